#pragma once

// Shared helpers and independent oracles for the test suites. Oracles are
// written from definitions only and never call the implementation path they
// check.

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "hc3l/grid.hpp"
#include "hc3l/rng.hpp"

namespace testutil {

inline hc3l::Grid random_grid(hc3l::RngStream& rng, std::vector<std::size_t> shape,
                              double lo = -1.0, double hi = 1.0) {
    hc3l::Grid g(std::move(shape));
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = rng.next_uniform(lo, hi);
    return g;
}

// ---- direct DFT oracles ----------------------------------------------------

using cvec = std::vector<std::complex<double>>;

// 1D DFT by the definition X[k] = sum_j x[j] exp(sign*2*pi*i*k*j/n).
inline cvec dft_1d(const cvec& x, int sign) {
    std::size_t n = x.size();
    cvec out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(k) *
                         static_cast<double>(j) / static_cast<double>(n);
            acc += x[j] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    return out;
}

// 2D DFT via per-row and per-column summation; forward unscaled.
inline std::vector<cvec> dft_2d(const std::vector<cvec>& x, int sign) {
    std::size_t h = x.size(), w = x[0].size();
    std::vector<cvec> tmp(h);
    for (std::size_t r = 0; r < h; ++r) tmp[r] = dft_1d(x[r], sign);
    std::vector<cvec> out(h, cvec(w));
    for (std::size_t c = 0; c < w; ++c) {
        cvec col(h);
        for (std::size_t r = 0; r < h; ++r) col[r] = tmp[r][c];
        col = dft_1d(col, sign);
        for (std::size_t r = 0; r < h; ++r) out[r][c] = col[r];
    }
    return out;
}

inline std::vector<cvec> grid_to_cvec(const hc3l::Grid& g) {
    std::vector<cvec> out(g.dim(0), cvec(g.dim(1)));
    for (std::size_t r = 0; r < g.dim(0); ++r)
        for (std::size_t c = 0; c < g.dim(1); ++c) out[r][c] = g.at(r, c);
    return out;
}

// Full HFE pipeline from definitions: direct DFT, index-map shift, the
// low-frequency predicate, inverse index map and direct inverse DFT.
inline hc3l::Grid hfe_oracle(const hc3l::Grid& image, int th, bool cross_mask = true) {
    std::size_t h = image.dim(0), w = image.dim(1);
    auto spec = dft_2d(grid_to_cvec(image), -1);

    // Zero entries by evaluating the predicate at centered coordinates,
    // expressed directly on the uncentered array: the centered entry at
    // (row, col) came from uncentered ((row + ceil(h/2)) mod h, ...).
    for (std::size_t row = 0; row < h; ++row) {
        for (std::size_t col = 0; col < w; ++col) {
            long fy = static_cast<long>(row) - static_cast<long>(h / 2);
            long fx = static_cast<long>(col) - static_cast<long>(w / 2);
            bool low_x = std::labs(fx) < th;
            bool low_y = std::labs(fy) < th;
            bool remove = cross_mask ? (low_x || low_y) : (low_x && low_y);
            if (remove) {
                std::size_t ur = (row + (h + 1) / 2) % h;
                std::size_t uc = (col + (w + 1) / 2) % w;
                spec[ur][uc] = {0.0, 0.0};
            }
        }
    }

    auto img = dft_2d(spec, +1);
    hc3l::Grid out({h, w});
    double scale = 1.0 / static_cast<double>(h * w);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) out.at(r, c) = img[r][c].real() * scale;
    return out;
}

inline double max_abs_diff(const hc3l::Grid& a, const hc3l::Grid& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1e-6, std::abs(a), std::abs(b)});
}

}  // namespace testutil
