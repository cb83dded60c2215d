#pragma once

#include <string>
#include <vector>

#include "hc3l/grid.hpp"
#include "hc3l/nn.hpp"
#include "hc3l/rng.hpp"

namespace hc3l {

// Unified Feature Encoder configuration: factor-8 compression to a
// 4-channel latent through three stride-2 stages, mirrored decoder, and a
// vector-quantization codebook.
struct UfeConfig {
    int downsample_factor = 8;
    int latent_channels = 4;
    int codebook_size = 512;
    int code_dim = 4;
    int base_width = 16;
    double commitment_weight = 0.25;
    double lambda_l1 = 1.0;
    double lambda_ssim = 0.2;
    int gn_groups = 4;
};

struct QuantizeResult {
    Grid z_q;                  // same shape as the input latent
    std::vector<int> indices;  // row-major per spatial position
    double codebook_term = 0.0;
    double commitment_term = 0.0;

    double loss() const { return codebook_term + commitment_term; }
};

// Differentiable whole-image SSIM on normalized [-1, 1] intensities
// (dynamic range 2) with the gradient taken with respect to the second image.
struct SsimGrad {
    double value = 0.0;
    Grid grad_second;
};
SsimGrad ssim_unit_with_grad(const Grid& x, const Grid& y);

// Stage-1 reconstruction objective:
//   lambda_l1 * mean|x - x_rec| + lambda_ssim * (1 - SSIM(x, x_rec)) + quant_loss
// with the analytic gradient with respect to x_rec.
struct Stage1Loss {
    double total = 0.0;
    double l1_term = 0.0;
    double ssim_term = 0.0;
    double quant_term = 0.0;
    Grid grad_xrec;
};
Stage1Loss stage1_loss(const Grid& x, const Grid& x_rec, double quant_loss,
                       double lambda_l1, double lambda_ssim);

class Ufe {
public:
    Ufe(const UfeConfig& cfg, RngStream& init_rng);

    const UfeConfig& config() const noexcept { return cfg_; }
    nn::NetworkGraph& encoder() noexcept { return encoder_; }
    nn::NetworkGraph& decoder() noexcept { return decoder_; }
    Grid& codebook() noexcept { return codebook_; }
    const Grid& codebook() const noexcept { return codebook_; }

    // [1,H,W] normalized image -> continuous (pre-quantization) latent
    // [4, H/8, W/8]. H and W must be divisible by the downsampling factor.
    Grid encode(const Grid& image);

    // Nearest codebook entry per spatial position (ties resolved to the
    // lowest index); loss terms are means over all latent elements.
    QuantizeResult quantize(const Grid& z_cont) const;

    // [4,h,w] quantized latent -> [1,8h,8w] image in (-1, 1).
    Grid decode(const Grid& z_q);

    // Shares network parameters; the codebook is copied (read-only use).
    Ufe worker_clone() const;

    // Parameter container plus a JSON config sidecar at path + ".json".
    void save(const std::string& path) const;
    static Ufe load(const std::string& path);

private:
    Ufe() = default;
    void build(RngStream& rng);

    UfeConfig cfg_;
    nn::NetworkGraph encoder_;
    nn::NetworkGraph decoder_;
    Grid codebook_;  // [K, code_dim]
};

}  // namespace hc3l
