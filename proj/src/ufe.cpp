#include "hc3l/ufe.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "hc3l/container.hpp"
#include "hc3l/errors.hpp"

namespace hc3l {

namespace {

// SSIM stabilizers for the [-1, 1] dynamic range (L = 2).
constexpr double kSsimC1 = (0.01 * 2.0) * (0.01 * 2.0);
constexpr double kSsimC2 = (0.03 * 2.0) * (0.03 * 2.0);

}  // namespace

SsimGrad ssim_unit_with_grad(const Grid& x, const Grid& y) {
    if (!x.same_shape(y)) throw std::invalid_argument("ssim_unit: shape mismatch");
    double n = static_cast<double>(x.size());
    double mu_x = 0.0, mu_y = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mu_x += x[i];
        mu_y += y[i];
    }
    mu_x /= n;
    mu_y /= n;
    double var_x = 0.0, var_y = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double dx = x[i] - mu_x;
        double dy = y[i] - mu_y;
        var_x += dx * dx;
        var_y += dy * dy;
        cov += dx * dy;
    }
    var_x /= n;
    var_y /= n;
    cov /= n;

    double a1 = 2.0 * mu_x * mu_y + kSsimC1;
    double a2 = 2.0 * cov + kSsimC2;
    double b1 = mu_x * mu_x + mu_y * mu_y + kSsimC1;
    double b2 = var_x + var_y + kSsimC2;

    SsimGrad out;
    out.value = (a1 * a2) / (b1 * b2);
    out.grad_second = Grid(y.shape());
    // dS/dy_i with dmu_y = 1/n, dvar_y = 2(y_i - mu_y)/n, dcov = (x_i - mu_x)/n.
    double inv_den = 1.0 / (b1 * b2);
    for (std::size_t i = 0; i < y.size(); ++i) {
        double da1 = 2.0 * mu_x / n;
        double da2 = 2.0 * (x[i] - mu_x) / n;
        double db1 = 2.0 * mu_y / n;
        double db2 = 2.0 * (y[i] - mu_y) / n;
        double dnum = da1 * a2 + a1 * da2;
        double dden = db1 * b2 + b1 * db2;
        out.grad_second[i] = (dnum - out.value * dden) * inv_den;
    }
    return out;
}

Stage1Loss stage1_loss(const Grid& x, const Grid& x_rec, double quant_loss,
                       double lambda_l1, double lambda_ssim) {
    if (!x.same_shape(x_rec)) throw std::invalid_argument("stage1_loss: shape mismatch");
    double n = static_cast<double>(x.size());

    Stage1Loss out;
    out.grad_xrec = Grid(x.shape());
    double l1 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = x_rec[i] - x[i];
        l1 += std::abs(d);
        out.grad_xrec[i] = lambda_l1 * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n;
    }
    out.l1_term = lambda_l1 * l1 / n;

    if (lambda_ssim != 0.0) {
        SsimGrad s = ssim_unit_with_grad(x, x_rec);
        out.ssim_term = lambda_ssim * (1.0 - s.value);
        for (std::size_t i = 0; i < x.size(); ++i)
            out.grad_xrec[i] -= lambda_ssim * s.grad_second[i];
    }
    out.quant_term = quant_loss;
    out.total = out.l1_term + out.ssim_term + out.quant_term;
    return out;
}

Ufe::Ufe(const UfeConfig& cfg, RngStream& init_rng) : cfg_(cfg) {
    build(init_rng);
}

void Ufe::build(RngStream& rng) {
    if (cfg_.downsample_factor != 8)
        throw std::invalid_argument("ufe: downsampling factor is fixed at 8");
    if (cfg_.latent_channels != cfg_.code_dim)
        throw std::invalid_argument("ufe: code dimension must equal latent channels");
    if (cfg_.codebook_size < 2) throw std::invalid_argument("ufe: codebook size must be >= 2");

    std::size_t b = static_cast<std::size_t>(cfg_.base_width);
    std::size_t lc = static_cast<std::size_t>(cfg_.latent_channels);
    int g = cfg_.gn_groups;

    {
        nn::NetworkGraph& e = encoder_;
        int x = e.add_input();
        int h = e.conv3x3(x, 1, b, 1, rng);
        h = e.conv3x3(h, b, b, 2, rng);
        h = nn::add_residual_block(e, h, b, g, rng);
        h = e.conv3x3(h, b, 2 * b, 2, rng);
        h = nn::add_residual_block(e, h, 2 * b, g, rng);
        h = e.conv3x3(h, 2 * b, 4 * b, 2, rng);
        h = nn::add_residual_block(e, h, 4 * b, g, rng);
        h = e.group_norm(h, 4 * b, g);
        h = e.silu(h);
        h = e.conv3x3(h, 4 * b, lc, 1, rng);
        e.set_output(h);
    }
    {
        nn::NetworkGraph& d = decoder_;
        int z = d.add_input();
        int h = d.conv3x3(z, lc, 4 * b, 1, rng);
        h = nn::add_residual_block(d, h, 4 * b, g, rng);
        h = d.upsample2x(h);
        h = d.conv3x3(h, 4 * b, 2 * b, 1, rng);
        h = nn::add_residual_block(d, h, 2 * b, g, rng);
        h = d.upsample2x(h);
        h = d.conv3x3(h, 2 * b, b, 1, rng);
        h = nn::add_residual_block(d, h, b, g, rng);
        h = d.upsample2x(h);
        h = d.conv3x3(h, b, b, 1, rng);
        h = d.group_norm(h, b, g);
        h = d.silu(h);
        h = d.conv3x3(h, b, 1, 1, rng, /*zero_init=*/true);
        h = d.tanh_act(h);
        d.set_output(h);
    }

    codebook_ = Grid({static_cast<std::size_t>(cfg_.codebook_size),
                      static_cast<std::size_t>(cfg_.code_dim)});
    for (std::size_t i = 0; i < codebook_.size(); ++i)
        codebook_[i] = 0.5 * rng.next_gaussian();
}

Grid Ufe::encode(const Grid& image) {
    if (image.rank() != 3 || image.dim(0) != 1)
        throw std::invalid_argument("encode: expected [1,H,W]");
    std::size_t f = static_cast<std::size_t>(cfg_.downsample_factor);
    if (image.dim(1) % f != 0 || image.dim(2) % f != 0)
        throw std::invalid_argument("encode: H and W must be divisible by " +
                                    std::to_string(f));
    return encoder_.forward({image});
}

QuantizeResult Ufe::quantize(const Grid& z_cont) const {
    if (z_cont.rank() != 3 ||
        z_cont.dim(0) != static_cast<std::size_t>(cfg_.latent_channels))
        throw std::invalid_argument("quantize: expected [latent_channels,h,w]");
    std::size_t c = z_cont.dim(0), hw = z_cont.dim(1) * z_cont.dim(2);
    std::size_t K = codebook_.dim(0);

    QuantizeResult r;
    r.z_q = Grid(z_cont.shape());
    r.indices.resize(hw);
    double sq = 0.0;
    for (std::size_t p = 0; p < hw; ++p) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < K; ++k) {
            double d = 0.0;
            for (std::size_t ch = 0; ch < c; ++ch) {
                double diff = z_cont[ch * hw + p] - codebook_.at(k, ch);
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best = k;
            }
        }
        r.indices[p] = static_cast<int>(best);
        for (std::size_t ch = 0; ch < c; ++ch)
            r.z_q[ch * hw + p] = codebook_.at(best, ch);
        sq += best_d;
    }
    double mse = sq / static_cast<double>(c * hw);
    r.codebook_term = mse;
    r.commitment_term = cfg_.commitment_weight * mse;
    return r;
}

Grid Ufe::decode(const Grid& z_q) {
    if (z_q.rank() != 3 || z_q.dim(0) != static_cast<std::size_t>(cfg_.latent_channels))
        throw std::invalid_argument("decode: expected [latent_channels,h,w]");
    return decoder_.forward({z_q});
}

Ufe Ufe::worker_clone() const {
    Ufe u;
    u.cfg_ = cfg_;
    u.encoder_ = encoder_.worker_clone();
    u.decoder_ = decoder_.worker_clone();
    u.codebook_ = codebook_;
    return u;
}

namespace {

nlohmann::json config_to_json(const UfeConfig& c) {
    return nlohmann::json{{"downsample_factor", c.downsample_factor},
                          {"latent_channels", c.latent_channels},
                          {"codebook_size", c.codebook_size},
                          {"code_dim", c.code_dim},
                          {"base_width", c.base_width},
                          {"commitment_weight", c.commitment_weight},
                          {"lambda_l1", c.lambda_l1},
                          {"lambda_ssim", c.lambda_ssim},
                          {"gn_groups", c.gn_groups}};
}

UfeConfig config_from_json(const nlohmann::json& j) {
    UfeConfig c;
    c.downsample_factor = j.at("downsample_factor").get<int>();
    c.latent_channels = j.at("latent_channels").get<int>();
    c.codebook_size = j.at("codebook_size").get<int>();
    c.code_dim = j.at("code_dim").get<int>();
    c.base_width = j.at("base_width").get<int>();
    c.commitment_weight = j.at("commitment_weight").get<double>();
    c.lambda_l1 = j.at("lambda_l1").get<double>();
    c.lambda_ssim = j.at("lambda_ssim").get<double>();
    c.gn_groups = j.at("gn_groups").get<int>();
    return c;
}

}  // namespace

void Ufe::save(const std::string& path) const {
    std::vector<std::pair<std::string, Grid>> entries;
    const auto& ep = encoder_.params();
    for (std::size_t i = 0; i < ep.values.size(); ++i)
        entries.emplace_back("enc." + ep.names[i], ep.values[i]);
    const auto& dp = decoder_.params();
    for (std::size_t i = 0; i < dp.values.size(); ++i)
        entries.emplace_back("dec." + dp.names[i], dp.values[i]);
    entries.emplace_back("codebook", codebook_);
    save_container(path, entries);

    std::ofstream sidecar(path + ".json");
    if (!sidecar) throw MissingInputError("cannot write sidecar for " + path);
    sidecar << config_to_json(cfg_).dump(2) << "\n";
}

Ufe Ufe::load(const std::string& path) {
    std::ifstream sidecar(path + ".json");
    if (!sidecar) throw MissingInputError("missing checkpoint sidecar: " + path + ".json");
    nlohmann::json j;
    try {
        sidecar >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad checkpoint sidecar: ") + e.what(), 0);
    }
    UfeConfig cfg = config_from_json(j);

    RngStream scratch(0);
    Ufe u(cfg, scratch);
    GridMap entries = load_container(path);
    auto fetch = [&](const std::string& name) -> const Grid& {
        auto it = entries.find(name);
        if (it == entries.end())
            throw FormatError("checkpoint missing entry: " + name, 0);
        return it->second;
    };
    auto& ep = u.encoder_.params();
    for (std::size_t i = 0; i < ep.values.size(); ++i) {
        const Grid& g = fetch("enc." + ep.names[i]);
        if (!g.same_shape(ep.values[i]))
            throw FormatError("checkpoint shape mismatch for enc." + ep.names[i], 0);
        ep.values[i] = g;
    }
    auto& dp = u.decoder_.params();
    for (std::size_t i = 0; i < dp.values.size(); ++i) {
        const Grid& g = fetch("dec." + dp.names[i]);
        if (!g.same_shape(dp.values[i]))
            throw FormatError("checkpoint shape mismatch for dec." + dp.names[i], 0);
        dp.values[i] = g;
    }
    const Grid& cb = fetch("codebook");
    if (!cb.same_shape(u.codebook_))
        throw FormatError("checkpoint codebook shape mismatch", 0);
    u.codebook_ = cb;
    return u;
}

}  // namespace hc3l
