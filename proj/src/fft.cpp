#include "hc3l/fft.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "hc3l/errors.hpp"

namespace hc3l {

namespace {

using cplx = std::complex<double>;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 Cooley-Tukey. sign = -1 forward, +1 inverse
// (unscaled).
void fft_radix2(std::vector<cplx>& a, int sign) {
    std::size_t n = a.size();
    if (n <= 1) return;
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
        cplx wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                cplx u = a[i + k];
                cplx v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

// Direct DFT by definition for non-power-of-two lengths.
void dft_naive(std::vector<cplx>& a, int sign) {
    std::size_t n = a.size();
    std::vector<cplx> out(n, cplx(0.0, 0.0));
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < n; ++j) {
            double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(k) *
                         static_cast<double>(j) / static_cast<double>(n);
            out[k] += a[j] * cplx(std::cos(ang), std::sin(ang));
        }
    }
    a = std::move(out);
}

void transform_1d(std::vector<cplx>& a, int sign) {
    if (is_pow2(a.size())) {
        fft_radix2(a, sign);
    } else {
        dft_naive(a, sign);
    }
}

// Row-column decomposition over the interleaved buffer.
void transform_2d(std::vector<double>& values, std::size_t h, std::size_t w, int sign) {
    std::vector<cplx> line;
    line.resize(std::max(h, w));
    for (std::size_t r = 0; r < h; ++r) {
        line.assign(w, cplx());
        for (std::size_t c = 0; c < w; ++c)
            line[c] = {values[2 * (r * w + c)], values[2 * (r * w + c) + 1]};
        transform_1d(line, sign);
        for (std::size_t c = 0; c < w; ++c) {
            values[2 * (r * w + c)] = line[c].real();
            values[2 * (r * w + c) + 1] = line[c].imag();
        }
    }
    for (std::size_t c = 0; c < w; ++c) {
        line.assign(h, cplx());
        for (std::size_t r = 0; r < h; ++r)
            line[r] = {values[2 * (r * w + c)], values[2 * (r * w + c) + 1]};
        transform_1d(line, sign);
        for (std::size_t r = 0; r < h; ++r) {
            values[2 * (r * w + c)] = line[r].real();
            values[2 * (r * w + c) + 1] = line[r].imag();
        }
    }
}

void check_image(const Grid& image) {
    if (image.rank() != 2) throw std::invalid_argument("fft2: image must be rank 2");
}

std::size_t shifted_index(std::size_t i, std::size_t n, bool inverse) {
    // Forward shift: out[i] = in[(i + ceil(n/2)) mod n]; inverse undoes it.
    std::size_t s = inverse ? n / 2 : (n + 1) / 2;
    return (i + s) % n;
}

Spectrum apply_shift(const Spectrum& in, bool inverse) {
    Spectrum out(in.height, in.width);
    for (std::size_t r = 0; r < in.height; ++r) {
        std::size_t sr = shifted_index(r, in.height, inverse);
        for (std::size_t c = 0; c < in.width; ++c) {
            std::size_t sc = shifted_index(c, in.width, inverse);
            out.set(r, c, in.at(sr, sc));
        }
    }
    return out;
}

}  // namespace

Spectrum fft2(const Grid& image) {
    check_image(image);
    std::size_t h = image.dim(0), w = image.dim(1);
    Spectrum s(h, w);
    for (std::size_t i = 0; i < h * w; ++i) s.values[2 * i] = image[i];
    transform_2d(s.values, h, w, -1);
    return s;
}

Spectrum ifft2_complex(const Spectrum& spectrum) {
    if (spectrum.centered)
        throw StateError("ifft2 requires an uncentered spectrum; apply ifft_shift first");
    Spectrum out = spectrum;
    transform_2d(out.values, out.height, out.width, +1);
    double scale = 1.0 / static_cast<double>(out.height * out.width);
    for (double& v : out.values) v *= scale;
    return out;
}

Grid ifft2(const Spectrum& spectrum) {
    Spectrum full = ifft2_complex(spectrum);
    Grid image({full.height, full.width});
    for (std::size_t i = 0; i < image.size(); ++i) image[i] = full.values[2 * i];
    return image;
}

Spectrum fft_shift(const Spectrum& spectrum) {
    if (spectrum.centered) throw StateError("fft_shift: spectrum is already centered");
    Spectrum out = apply_shift(spectrum, false);
    out.centered = true;
    return out;
}

Spectrum ifft_shift(const Spectrum& spectrum) {
    if (!spectrum.centered) throw StateError("ifft_shift: spectrum is not centered");
    Spectrum out = apply_shift(spectrum, true);
    out.centered = false;
    return out;
}

}  // namespace hc3l
