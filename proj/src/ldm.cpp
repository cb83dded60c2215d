#include "hc3l/ldm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "hc3l/container.hpp"
#include "hc3l/errors.hpp"

namespace hc3l {

Denoiser::Denoiser(const DenoiserConfig& cfg, RngStream& init_rng) : cfg_(cfg) {
    build(init_rng);
}

void Denoiser::build(RngStream& rng) {
    std::size_t b = static_cast<std::size_t>(cfg_.base_width);
    std::size_t in_ch = static_cast<std::size_t>(cfg_.input_channels());
    std::size_t out_ch = static_cast<std::size_t>(cfg_.latent_channels);
    std::size_t td = static_cast<std::size_t>(cfg_.time_embed_dim);
    int g = cfg_.gn_groups;
    int rb = cfg_.res_blocks_per_level;

    nn::NetworkGraph& n = graph_;
    int x = n.add_input();
    int temb_raw = n.add_input();

    // Shared dense+silu trunk; per-block dense heads live inside the
    // residual blocks.
    int temb = n.dense(temb_raw, td, td, rng);
    temb = n.silu(temb);

    int h = n.conv3x3(x, in_ch, b, 1, rng);
    for (int i = 0; i < rb; ++i) h = nn::add_residual_block(n, h, b, g, rng, temb, td);
    int skip1 = h;
    h = n.conv3x3(h, b, 2 * b, 2, rng);
    for (int i = 0; i < rb; ++i) h = nn::add_residual_block(n, h, 2 * b, g, rng, temb, td);
    int skip2 = h;
    h = n.conv3x3(h, 2 * b, 4 * b, 2, rng);
    for (int i = 0; i < rb; ++i) h = nn::add_residual_block(n, h, 4 * b, g, rng, temb, td);

    h = n.upsample2x(h);
    h = n.conv3x3(h, 4 * b, 2 * b, 1, rng);
    h = n.channel_concat(h, skip2);
    h = n.conv3x3(h, 4 * b, 2 * b, 1, rng);
    for (int i = 0; i < rb; ++i) h = nn::add_residual_block(n, h, 2 * b, g, rng, temb, td);

    h = n.upsample2x(h);
    h = n.conv3x3(h, 2 * b, b, 1, rng);
    h = n.channel_concat(h, skip1);
    h = n.conv3x3(h, 2 * b, b, 1, rng);
    for (int i = 0; i < rb; ++i) h = nn::add_residual_block(n, h, b, g, rng, temb, td);

    h = n.group_norm(h, b, g);
    h = n.silu(h);
    h = n.conv3x3(h, b, out_ch, 1, rng, /*zero_init=*/true);
    n.set_output(h);
}

const Grid& Denoiser::predict(const Grid& x, const Grid& time_embedding_raw) {
    if (x.rank() != 3 || x.dim(0) != static_cast<std::size_t>(cfg_.input_channels()))
        throw std::invalid_argument("denoiser: expected [" +
                                    std::to_string(cfg_.input_channels()) + ",h,w] input");
    return graph_.forward({x, time_embedding_raw});
}

Denoiser Denoiser::worker_clone() const {
    Denoiser d;
    d.cfg_ = cfg_;
    d.graph_ = graph_.worker_clone();
    return d;
}

void Denoiser::save(const std::string& path) const {
    std::vector<std::pair<std::string, Grid>> entries;
    const auto& p = graph_.params();
    for (std::size_t i = 0; i < p.values.size(); ++i)
        entries.emplace_back(p.names[i], p.values[i]);
    save_container(path, entries);

    nlohmann::json j{{"latent_channels", cfg_.latent_channels},
                     {"condition_channels", cfg_.condition_channels},
                     {"base_width", cfg_.base_width},
                     {"time_embed_dim", cfg_.time_embed_dim},
                     {"res_blocks_per_level", cfg_.res_blocks_per_level},
                     {"gn_groups", cfg_.gn_groups}};
    std::ofstream sidecar(path + ".json");
    if (!sidecar) throw MissingInputError("cannot write sidecar for " + path);
    sidecar << j.dump(2) << "\n";
}

Denoiser Denoiser::load(const std::string& path) {
    std::ifstream sidecar(path + ".json");
    if (!sidecar) throw MissingInputError("missing checkpoint sidecar: " + path + ".json");
    nlohmann::json j;
    try {
        sidecar >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad checkpoint sidecar: ") + e.what(), 0);
    }
    DenoiserConfig cfg;
    cfg.latent_channels = j.at("latent_channels").get<int>();
    cfg.condition_channels = j.at("condition_channels").get<int>();
    cfg.base_width = j.at("base_width").get<int>();
    cfg.time_embed_dim = j.at("time_embed_dim").get<int>();
    cfg.res_blocks_per_level = j.at("res_blocks_per_level").get<int>();
    cfg.gn_groups = j.at("gn_groups").get<int>();

    RngStream scratch(0);
    Denoiser d(cfg, scratch);
    GridMap entries = load_container(path);
    auto& p = d.graph_.params();
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        auto it = entries.find(p.names[i]);
        if (it == entries.end())
            throw FormatError("checkpoint missing entry: " + p.names[i], 0);
        if (!it->second.same_shape(p.values[i]))
            throw FormatError("checkpoint shape mismatch for " + p.names[i], 0);
        p.values[i] = it->second;
    }
    return d;
}

namespace {

Grid squeeze_image(const Grid& image) {
    if (image.rank() != 3 || image.dim(0) != 1)
        throw std::invalid_argument("expected a [1,H,W] image");
    return Grid({image.dim(1), image.dim(2)}, image.values());
}

Grid unsqueeze_image(const Grid& image) {
    return Grid({1, image.dim(0), image.dim(1)}, image.values());
}

Grid concat_channels(const Grid& a, const Grid& b) {
    if (a.rank() != 3 || b.rank() != 3 || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
        throw std::invalid_argument("concat_channels: spatial shapes differ");
    Grid out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
    std::copy(a.data(), a.data() + a.size(), out.data());
    std::copy(b.data(), b.data() + b.size(), out.data() + a.size());
    return out;
}

}  // namespace

Grid build_condition(const Grid& x_cbct, const HfeConfig& hfe_cfg, Ufe& ufe) {
    Grid x_h = extract_high_frequency(squeeze_image(x_cbct), hfe_cfg);
    Grid z_x = ufe.encode(x_cbct);
    Grid z_xh = ufe.encode(unsqueeze_image(x_h));
    return concat_channels(z_x, z_xh);
}

Grid predict_noise(const Grid& z_t, int t, const Grid& condition, Denoiser& denoiser) {
    if (z_t.rank() != 3 ||
        z_t.dim(0) != static_cast<std::size_t>(denoiser.config().latent_channels))
        throw std::invalid_argument("predict_noise: bad latent shape");
    if (condition.rank() != 3 ||
        condition.dim(0) != static_cast<std::size_t>(denoiser.config().condition_channels))
        throw std::invalid_argument("predict_noise: bad condition shape");
    Grid x = concat_channels(z_t, condition);
    Grid temb = nn::time_embedding(t, static_cast<std::size_t>(denoiser.config().time_embed_dim));
    return denoiser.predict(x, temb);
}

double stage2_loss_backward(const Grid& z0, int t, const Grid& eps, const Grid& condition,
                            Denoiser& denoiser, const NoiseSchedule& schedule) {
    Grid z_t = q_sample(z0, t, schedule, eps);
    Grid eps_hat = predict_noise(z_t, t, condition, denoiser);

    double n = static_cast<double>(eps.size());
    double loss = 0.0;
    Grid grad(eps_hat.shape());
    for (std::size_t i = 0; i < eps.size(); ++i) {
        double d = eps[i] - eps_hat[i];
        loss += std::abs(d);
        grad[i] = (d > 0.0 ? -1.0 : (d < 0.0 ? 1.0 : 0.0)) / n;
    }
    denoiser.graph().backward(grad);
    return loss / n;
}

Grid synthesize(const Grid& x_cbct, const HfeConfig& hfe_cfg, Ufe& ufe, Denoiser& denoiser,
                const NoiseSchedule& schedule, const std::vector<int>& subsequence,
                RngStream& rng) {
    if (subsequence.empty() || subsequence.back() != schedule.T)
        throw std::invalid_argument("synthesize: subsequence must end at T");

    Grid condition = build_condition(x_cbct, hfe_cfg, ufe);
    std::size_t h = condition.dim(1), w = condition.dim(2);
    Grid z = sample_gaussian(
        rng, {static_cast<std::size_t>(denoiser.config().latent_channels), h, w});

    for (std::size_t i = subsequence.size(); i-- > 0;) {
        int t_cur = subsequence[i];
        int t_prev = i == 0 ? 0 : subsequence[i - 1];
        Grid eps_hat = predict_noise(z, t_cur, condition, denoiser);
        z = ddim_step(z, t_cur, t_prev, eps_hat, schedule);
    }

    // Snap the estimate onto the codebook the decoder was trained on.
    QuantizeResult q = ufe.quantize(z);
    Grid image = ufe.decode(q.z_q);
    if (!image.all_finite()) throw NumericalError("synthesize: non-finite output");
    return image;
}

}  // namespace hc3l
