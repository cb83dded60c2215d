#pragma once

#include <string>
#include <vector>

#include "hc3l/diffusion.hpp"
#include "hc3l/grid.hpp"
#include "hc3l/hfe.hpp"
#include "hc3l/nn.hpp"
#include "hc3l/ufe.hpp"

namespace hc3l {

// Conditional denoiser: 3-level U-Net over the 4-channel noisy latent
// concatenated with the 8-channel hybrid condition, skip connections by
// channel concatenation, time embedding added per residual block.
struct DenoiserConfig {
    int latent_channels = 4;
    int condition_channels = 8;
    int base_width = 32;
    int time_embed_dim = 128;
    int res_blocks_per_level = 2;
    int gn_groups = 4;

    int input_channels() const { return latent_channels + condition_channels; }
};

class Denoiser {
public:
    Denoiser(const DenoiserConfig& cfg, RngStream& init_rng);

    const DenoiserConfig& config() const noexcept { return cfg_; }
    nn::NetworkGraph& graph() noexcept { return graph_; }

    // x: [input_channels,h,w]; raw sinusoidal embedding of length
    // time_embed_dim. Output [latent_channels,h,w].
    const Grid& predict(const Grid& x, const Grid& time_embedding_raw);

    Denoiser worker_clone() const;

    void save(const std::string& path) const;
    static Denoiser load(const std::string& path);

private:
    Denoiser() = default;
    void build(RngStream& rng);

    DenoiserConfig cfg_;
    nn::NetworkGraph graph_;
};

// Channel concatenation of encoded CBCT and encoded high-frequency image:
// channels 0..3 are E(x), channels 4..7 are E(x_h).
Grid build_condition(const Grid& x_cbct, const HfeConfig& hfe_cfg, Ufe& ufe);

// One denoiser forward on channel_concat(z_t, condition) at timestep t.
Grid predict_noise(const Grid& z_t, int t, const Grid& condition, Denoiser& denoiser);

// L1 noise-matching objective; gradients accumulate into the denoiser's
// parameter gradients (the caller zeroes them per batch).
double stage2_loss_backward(const Grid& z0, int t, const Grid& eps, const Grid& condition,
                            Denoiser& denoiser, const NoiseSchedule& schedule);

// Full CBCT -> sCT path: pure-noise latent, DDIM along the reversed
// subsequence with a fixed hybrid condition, quantize, decode. Input and
// output are normalized-intensity images of identical shape.
Grid synthesize(const Grid& x_cbct, const HfeConfig& hfe_cfg, Ufe& ufe, Denoiser& denoiser,
                const NoiseSchedule& schedule, const std::vector<int>& subsequence,
                RngStream& rng);

}  // namespace hc3l
