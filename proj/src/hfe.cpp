#include "hc3l/hfe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "hc3l/errors.hpp"

namespace hc3l {

int default_cutoff_for_width(std::size_t width) {
    return static_cast<int>(std::llround(30.0 * static_cast<double>(width) / 384.0));
}

namespace {

void check_cutoff(const HfeConfig& cfg, std::size_t h, std::size_t w) {
    long limit = static_cast<long>(std::min(h / 2, w / 2));
    if (cfg.cutoff < 0 || cfg.cutoff > limit) {
        throw std::invalid_argument("hfe cutoff out of range [0, " + std::to_string(limit) +
                                    "]: " + std::to_string(cfg.cutoff));
    }
}

}  // namespace

Spectrum high_pass_mask(const Spectrum& spectrum, const HfeConfig& cfg) {
    if (!spectrum.centered) throw StateError("high_pass_mask: spectrum must be centered");
    check_cutoff(cfg, spectrum.height, spectrum.width);

    long cy = static_cast<long>(spectrum.height / 2);
    long cx = static_cast<long>(spectrum.width / 2);
    Spectrum out = spectrum;
    for (std::size_t r = 0; r < spectrum.height; ++r) {
        long fy = static_cast<long>(r) - cy;
        for (std::size_t c = 0; c < spectrum.width; ++c) {
            long fx = static_cast<long>(c) - cx;
            bool low_x = std::labs(fx) < cfg.cutoff;
            bool low_y = std::labs(fy) < cfg.cutoff;
            bool remove = cfg.mask_shape == MaskShape::cross ? (low_x || low_y)
                                                             : (low_x && low_y);
            if (remove) out.set(r, c, {0.0, 0.0});
        }
    }
    return out;
}

Grid extract_high_frequency(const Grid& image, const HfeConfig& cfg) {
    if (image.rank() != 2)
        throw std::invalid_argument("extract_high_frequency: image must be rank 2");
    check_cutoff(cfg, image.dim(0), image.dim(1));

    Spectrum masked = high_pass_mask(fft_shift(fft2(image)), cfg);
    Spectrum full = ifft2_complex(ifft_shift(masked));

    double max_abs = 0.0;
    for (std::size_t i = 0; i < image.size(); ++i)
        max_abs = std::max(max_abs, std::abs(image[i]));
    double residue_limit = 1e-9 * std::max(1.0, max_abs);

    Grid out({image.dim(0), image.dim(1)});
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (std::abs(full.values[2 * i + 1]) > residue_limit) {
            throw NumericalError("extract_high_frequency: imaginary residue above tolerance");
        }
        out[i] = full.values[2 * i];
    }
    return out;
}

}  // namespace hc3l
