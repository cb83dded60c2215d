#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "hc3l/metrics.hpp"
#include "test_util.hpp"

using namespace hc3l;

TEST_CASE("mae basic cases and loop oracle") {
    RngStream rng(1);
    Grid a = testutil::random_grid(rng, {16, 16}, -1000.0, 3000.0);
    CHECK(mae(a, a) == 0.0);

    Grid b(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) b[i] = a[i] + 300.0;
    CHECK(mae(a, b) == doctest::Approx(300.0).epsilon(1e-12));

    Grid c = testutil::random_grid(rng, {16, 16}, -1000.0, 3000.0);
    double oracle = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) oracle += std::abs(a[i] - c[i]);
    oracle /= static_cast<double>(a.size());
    CHECK(std::abs(mae(a, c) - oracle) < 1e-9);

    CHECK_THROWS_AS(mae(a, Grid({2, 2})), std::invalid_argument);
}

TEST_CASE("psnr closed forms") {
    Grid a = Grid::full({10, 10}, 500.0);
    Grid b = Grid::full({10, 10}, 800.0);
    // MSE = 300^2 = 9e4; PSNR = 10*log10(9e6/9e4) = 20 dB.
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));

    CHECK(std::isinf(psnr(a, a)));
    CHECK(psnr(a, a) > 0);

    Grid c = Grid::full({10, 10}, 500.0 + 3000.0);
    CHECK(psnr(a, c) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("ssim closed forms and oracle") {
    Grid a = Grid::full({8, 8}, 0.0);
    CHECK(ssim(a, a) == 1.0);

    // Constant 0 vs constant 3000 with C1 = 900: 900 / 9000900.
    Grid b = Grid::full({8, 8}, 3000.0);
    CHECK(ssim(a, b) == doctest::Approx(900.0 / 9000900.0).epsilon(1e-12));
    CHECK(ssim(a, b) == doctest::Approx(9.9990e-5).epsilon(1e-4));

    // Two-pass statistics oracle on a random pair.
    RngStream rng(2);
    Grid x = testutil::random_grid(rng, {12, 12}, -1000.0, 3000.0);
    Grid y = testutil::random_grid(rng, {12, 12}, -1000.0, 3000.0);
    double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i] / n;
        my += y[i] / n;
    }
    double vx = 0, vy = 0, cxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        vx += (x[i] - mx) * (x[i] - mx) / n;
        vy += (y[i] - my) * (y[i] - my) / n;
        cxy += (x[i] - mx) * (y[i] - my) / n;
    }
    double c1 = 900.0, c2 = 8100.0;
    double oracle = (2 * mx * my + c1) * (2 * cxy + c2) /
                    ((mx * mx + my * my + c1) * (vx + vy + c2));
    CHECK(std::abs(ssim(x, y) - oracle) < 1e-9);
}

TEST_CASE("metric symmetry and permutation invariance") {
    RngStream rng(3);
    Grid a = testutil::random_grid(rng, {9, 9}, -500.0, 2500.0);
    Grid b = testutil::random_grid(rng, {9, 9}, -500.0, 2500.0);
    CHECK(mae(a, b) == mae(b, a));
    CHECK(psnr(a, b) == psnr(b, a));
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-15));

    // Identical spatial permutation applied to both images.
    std::vector<std::size_t> perm(a.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    shuffle(perm, rng);
    Grid ap(a.shape()), bp(b.shape());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        ap[i] = a[perm[i]];
        bp[i] = b[perm[i]];
    }
    CHECK(mae(ap, bp) == doctest::Approx(mae(a, b)).epsilon(1e-12));
    CHECK(psnr(ap, bp) == doctest::Approx(psnr(a, b)).epsilon(1e-12));
    CHECK(ssim(ap, bp) == doctest::Approx(ssim(a, b)).epsilon(1e-12));
}

TEST_CASE("ssim upper bound with equality only at identity") {
    RngStream rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        Grid a = testutil::random_grid(rng, {6, 6}, -1000.0, 3000.0);
        Grid b = testutil::random_grid(rng, {6, 6}, -1000.0, 3000.0);
        CHECK(ssim(a, b) <= 1.0);
        CHECK(ssim(a, b) < 1.0);
    }
}

TEST_CASE("stabilization constants") {
    CHECK(MetricReport::kC1 == doctest::Approx(900.0).epsilon(1e-15));
    CHECK(MetricReport::kC2 == doctest::Approx(8100.0).epsilon(1e-15));
}
