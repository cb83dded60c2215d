#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "hc3l/errors.hpp"
#include "hc3l/fft.hpp"
#include "hc3l/hfe.hpp"
#include "test_util.hpp"

using namespace hc3l;

TEST_CASE("fft2 of a constant image is DC only") {
    Grid img = Grid::full({8, 8}, 3.25);
    Spectrum s = fft2(img);
    CHECK(std::abs(s.at(0, 0) - std::complex<double>(64.0 * 3.25, 0.0)) < 1e-9);
    for (std::size_t r = 0; r < 8; ++r) {
        for (std::size_t c = 0; c < 8; ++c) {
            if (r == 0 && c == 0) continue;
            CHECK(std::abs(s.at(r, c)) < 1e-9);
        }
    }
}

TEST_CASE("fft2 of an impulse is flat") {
    Grid img({4, 4});
    img.at(0, 0) = 1.0;
    Spectrum s = fft2(img);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c)
            CHECK(std::abs(s.at(r, c) - std::complex<double>(1.0, 0.0)) < 1e-9);
}

TEST_CASE("fft2 matches the direct DFT oracle") {
    RngStream rng(11);
    for (std::size_t n : {8ul, 16ul}) {
        Grid img = testutil::random_grid(rng, {n, n});
        Spectrum s = fft2(img);
        auto oracle = testutil::dft_2d(testutil::grid_to_cvec(img), -1);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c)
                CHECK(std::abs(s.at(r, c) - oracle[r][c]) < 1e-9);
    }
}

TEST_CASE("non-power-of-two sizes fall back to the direct kernel") {
    RngStream rng(12);
    Grid img = testutil::random_grid(rng, {6, 10});
    Spectrum s = fft2(img);
    auto oracle = testutil::dft_2d(testutil::grid_to_cvec(img), -1);
    for (std::size_t r = 0; r < 6; ++r)
        for (std::size_t c = 0; c < 10; ++c)
            CHECK(std::abs(s.at(r, c) - oracle[r][c]) < 1e-9);
}

TEST_CASE("ifft2 inverts fft2") {
    RngStream rng(13);
    for (auto shape : std::vector<std::vector<std::size_t>>{{8, 8}, {5, 7}, {16, 4}}) {
        Grid img = testutil::random_grid(rng, shape);
        Grid back = ifft2(fft2(img));
        CHECK(testutil::max_abs_diff(img, back) < 1e-9);
    }
}

TEST_CASE("hermitian symmetry of real-image spectra") {
    RngStream rng(14);
    Grid img = testutil::random_grid(rng, {12, 9});
    Spectrum s = fft2(img);
    std::size_t h = 12, w = 9;
    for (std::size_t u = 0; u < h; ++u) {
        for (std::size_t v = 0; v < w; ++v) {
            std::complex<double> a = s.at(u, v);
            std::complex<double> b = std::conj(s.at((h - u) % h, (w - v) % w));
            CHECK(std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)));
        }
    }
}

TEST_CASE("fft_shift centers DC and ifft_shift is its exact inverse") {
    Grid img({4, 4});
    img.at(0, 0) = 1.0;  // constant spectrum contribution not needed; use DC marker
    Spectrum s = fft2(Grid::full({4, 4}, 1.0));
    Spectrum c = fft_shift(s);
    CHECK(c.centered);
    CHECK(std::abs(c.at(2, 2) - std::complex<double>(16.0, 0.0)) < 1e-12);

    // Exact inverse on odd sizes.
    RngStream rng(15);
    Grid odd = testutil::random_grid(rng, {5, 5});
    Spectrum so = fft2(odd);
    Spectrum round = ifft_shift(fft_shift(so));
    for (std::size_t i = 0; i < so.values.size(); ++i)
        CHECK(round.values[i] == so.values[i]);
}

TEST_CASE("fft_shift index map on a 2x2 block") {
    // Exhaustive index-map oracle: [[1,2],[3,4]] -> [[4,3],[2,1]].
    Spectrum s(2, 2);
    s.set(0, 0, {1.0, 0.0});
    s.set(0, 1, {2.0, 0.0});
    s.set(1, 0, {3.0, 0.0});
    s.set(1, 1, {4.0, 0.0});
    Spectrum c = fft_shift(s);
    CHECK(c.at(0, 0).real() == 4.0);
    CHECK(c.at(0, 1).real() == 3.0);
    CHECK(c.at(1, 0).real() == 2.0);
    CHECK(c.at(1, 1).real() == 1.0);
}

TEST_CASE("double shift is a state error") {
    Spectrum s = fft2(Grid::full({4, 4}, 1.0));
    Spectrum c = fft_shift(s);
    CHECK_THROWS_AS(fft_shift(c), StateError);
    CHECK_THROWS_AS(ifft_shift(s), StateError);
}

TEST_CASE("high_pass_mask with th=0 keeps everything") {
    RngStream rng(16);
    Grid img = testutil::random_grid(rng, {8, 8});
    Spectrum c = fft_shift(fft2(img));
    HfeConfig cfg;
    cfg.cutoff = 0;
    Spectrum m = high_pass_mask(c, cfg);
    for (std::size_t i = 0; i < m.values.size(); ++i) CHECK(m.values[i] == c.values[i]);
}

TEST_CASE("high_pass_mask matches the predicate oracle entry by entry") {
    RngStream rng(17);
    for (int th : {1, 2, 4}) {
        for (std::size_t n : {8ul, 9ul}) {
            Grid img = testutil::random_grid(rng, {n, n});
            Spectrum c = fft_shift(fft2(img));
            HfeConfig cfg;
            cfg.cutoff = th;
            Spectrum m = high_pass_mask(c, cfg);
            for (std::size_t row = 0; row < n; ++row) {
                for (std::size_t col = 0; col < n; ++col) {
                    long fy = static_cast<long>(row) - static_cast<long>(n / 2);
                    long fx = static_cast<long>(col) - static_cast<long>(n / 2);
                    bool remove = std::labs(fx) < th || std::labs(fy) < th;
                    if (remove) {
                        CHECK(std::abs(m.at(row, col)) == 0.0);
                    } else {
                        CHECK(m.at(row, col) == c.at(row, col));
                    }
                }
            }
        }
    }
}

TEST_CASE("high_pass_mask spot values at th=2 on 8x8") {
    // (f_x=3, f_y=3) kept; (f_x=3, f_y=1) zeroed.
    RngStream rng(18);
    Grid img = testutil::random_grid(rng, {8, 8});
    Spectrum c = fft_shift(fft2(img));
    HfeConfig cfg;
    cfg.cutoff = 2;
    Spectrum m = high_pass_mask(c, cfg);
    CHECK(m.at(4 + 3, 4 + 3) == c.at(4 + 3, 4 + 3));
    CHECK(std::abs(m.at(4 + 1, 4 + 3)) == 0.0);
}

TEST_CASE("square mask variant uses AND") {
    RngStream rng(19);
    Grid img = testutil::random_grid(rng, {8, 8});
    Spectrum c = fft_shift(fft2(img));
    HfeConfig cfg;
    cfg.cutoff = 2;
    cfg.mask_shape = MaskShape::square;
    Spectrum m = high_pass_mask(c, cfg);
    // (f_x=3, f_y=1): only one axis low -> kept under AND.
    CHECK(m.at(4 + 1, 4 + 3) == c.at(4 + 1, 4 + 3));
    CHECK(std::abs(m.at(4 + 1, 4 + 1)) == 0.0);
}

TEST_CASE("extract_high_frequency identity at th=0 and DC removal") {
    RngStream rng(20);
    Grid img = testutil::random_grid(rng, {16, 16});
    HfeConfig cfg;
    cfg.cutoff = 0;
    CHECK(testutil::max_abs_diff(extract_high_frequency(img, cfg), img) < 1e-9);

    Grid flat = Grid::full({16, 16}, 0.7);
    cfg.cutoff = 8;  // valid bound for 16x16 is min(8, 8)
    Grid hf = extract_high_frequency(flat, cfg);
    for (std::size_t i = 0; i < hf.size(); ++i) CHECK(std::abs(hf[i]) < 1e-9);
}

TEST_CASE("extract_high_frequency matches the direct-DFT pipeline oracle") {
    RngStream rng(21);
    Grid img = testutil::random_grid(rng, {64, 64});
    HfeConfig cfg;
    cfg.cutoff = 5;  // scaled default for 64-wide slices
    Grid hf = extract_high_frequency(img, cfg);
    Grid oracle = testutil::hfe_oracle(img, cfg.cutoff);
    CHECK(testutil::max_abs_diff(hf, oracle) < 1e-7);
}

TEST_CASE("extract_high_frequency validates the cutoff") {
    Grid img = Grid::full({16, 16}, 0.0);
    HfeConfig cfg;
    cfg.cutoff = 9;
    CHECK_THROWS_AS(extract_high_frequency(img, cfg), std::invalid_argument);
    cfg.cutoff = -1;
    CHECK_THROWS_AS(extract_high_frequency(img, cfg), std::invalid_argument);
}

TEST_CASE("hfe idempotence, linearity and energy properties") {
    RngStream rng(22);
    HfeConfig cfg;
    cfg.cutoff = 4;
    Grid x = testutil::random_grid(rng, {32, 32});
    Grid y = testutil::random_grid(rng, {32, 32});

    Grid once = extract_high_frequency(x, cfg);
    Grid twice = extract_high_frequency(once, cfg);
    CHECK(testutil::max_abs_diff(once, twice) < 1e-7);

    double a = 0.35, b = -1.2;
    Grid comb({32, 32});
    for (std::size_t i = 0; i < comb.size(); ++i) comb[i] = a * x[i] + b * y[i];
    Grid lhs = extract_high_frequency(comb, cfg);
    Grid hy = extract_high_frequency(y, cfg);
    Grid rhs({32, 32});
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = a * once[i] + b * hy[i];
    CHECK(testutil::max_abs_diff(lhs, rhs) < 1e-7);

    double ein = 0.0, eout = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        ein += x[i] * x[i];
        eout += once[i] * once[i];
    }
    CHECK(eout <= ein + 1e-7);
}

TEST_CASE("default cutoff scales with width") {
    CHECK(default_cutoff_for_width(384) == 30);
    CHECK(default_cutoff_for_width(64) == 5);
    CHECK(default_cutoff_for_width(128) == 10);
}
