#pragma once

#include "hc3l/fft.hpp"
#include "hc3l/grid.hpp"

namespace hc3l {

// High-pass mask geometry. `cross` zeroes entries with |f_x| < th OR
// |f_y| < th (a cross-shaped removal region keeping the four spectrum
// corners); `square` uses AND, removing a centered square block instead.
enum class MaskShape { cross, square };

struct HfeConfig {
    int cutoff = 30;  // th, in frequency-index units
    MaskShape mask_shape = MaskShape::cross;
};

// Reference cutoff th=30 was chosen for 384-wide slices; keep the removed
// spectrum fraction constant at other widths.
int default_cutoff_for_width(std::size_t width);

// Zeroes the low-frequency region of a centered spectrum. Centered
// coordinates are (f_x, f_y) = (col - floor(W/2), row - floor(H/2)).
// Requires a centered spectrum (StateError) and a valid cutoff
// (std::invalid_argument).
Spectrum high_pass_mask(const Spectrum& spectrum, const HfeConfig& cfg);

// High-Frequency Extractor: real part of
// ifft2(ifft_shift(high_pass_mask(fft_shift(fft2(x))))). Input is a
// normalized-intensity image; throws NumericalError if the imaginary
// residue exceeds 1e-9 * max(1, max|x|).
Grid extract_high_frequency(const Grid& image, const HfeConfig& cfg);

}  // namespace hc3l
