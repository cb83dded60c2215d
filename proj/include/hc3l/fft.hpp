#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "hc3l/grid.hpp"

namespace hc3l {

// 2D complex spectrum, interleaved (real, imag) pairs in row-major order.
// `centered` tracks whether fft_shift has moved DC to the array center.
struct Spectrum {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;  // 2 * height * width
    bool centered = false;

    Spectrum() = default;
    Spectrum(std::size_t h, std::size_t w)
        : height(h), width(w), values(2 * h * w, 0.0) {}

    std::complex<double> at(std::size_t row, std::size_t col) const {
        std::size_t i = 2 * (row * width + col);
        return {values[i], values[i + 1]};
    }
    void set(std::size_t row, std::size_t col, std::complex<double> z) {
        std::size_t i = 2 * (row * width + col);
        values[i] = z.real();
        values[i + 1] = z.imag();
    }
};

// Forward transform, unscaled. Radix-2 kernel for power-of-two dimensions,
// direct DFT summation otherwise.
Spectrum fft2(const Grid& image);

// Inverse transform scaled by 1/(H*W); returns the real part.
Grid ifft2(const Spectrum& spectrum);

// Inverse transform keeping the full complex result (uncentered input
// required). Used where the imaginary residue must be inspected.
Spectrum ifft2_complex(const Spectrum& spectrum);

// Moves DC to (floor(H/2), floor(W/2)). Requires centered == false
// (StateError otherwise); ifft_shift is the exact inverse for all sizes.
Spectrum fft_shift(const Spectrum& spectrum);
Spectrum ifft_shift(const Spectrum& spectrum);

}  // namespace hc3l
