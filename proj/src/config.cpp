#include "hc3l/config.hpp"

#include <fstream>
#include <set>

#include "hc3l/errors.hpp"

namespace hc3l {

using nlohmann::json;

HfeConfig HfeSection::resolve(std::size_t width) const {
    HfeConfig c;
    c.cutoff = cutoff < 0 ? default_cutoff_for_width(width) : cutoff;
    c.mask_shape = mask_shape;
    return c;
}

namespace {

void expect_object(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError("config section '" + path + "' must be an object");
}

void check_keys(const json& j, const std::string& path,
                const std::set<std::string>& allowed) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.count(key)) {
            throw ConfigError("unknown config key '" + (path.empty() ? key : path + "." + key) +
                              "'");
        }
    }
}

template <typename T>
void get_to(const json& j, const std::string& path, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        j.at(key).get_to(out);
    } catch (const json::exception&) {
        throw ConfigError("config key '" + path + "." + key + "' has the wrong type");
    }
}

void get_range(const json& j, const std::string& path, const char* key, double& lo,
               double& hi) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        throw ConfigError("config key '" + path + "." + key + "' must be [lo, hi]");
    lo = v[0].get<double>();
    hi = v[1].get<double>();
    if (lo > hi) throw ConfigError("config key '" + path + "." + key + "' has lo > hi");
}

void get_range_int(const json& j, const std::string& path, const char* key, int& lo,
                   int& hi) {
    double dlo = lo, dhi = hi;
    get_range(j, path, key, dlo, dhi);
    lo = static_cast<int>(dlo);
    hi = static_cast<int>(dhi);
}

void require(bool cond, const std::string& message) {
    if (!cond) throw ConfigError(message);
}

void parse_phantom(const json& j, PhantomSpec& p) {
    const std::string path = "phantom";
    expect_object(j, path);
    check_keys(j, path,
               {"size", "train_count", "test_count", "master_seed", "body_radius",
                "target_radius", "bone_radius", "pocket_radius", "tissue_hu", "bone_hu",
                "target_hu", "air_hu", "bone_count", "air_pockets", "cupping_amplitude_hu",
                "streak_count", "streak_amplitude_hu", "noise_sigma_hu", "noise_clip_sigmas",
                "gain_jitter", "offset_jitter_hu", "mae_band_hu"});
    get_to(j, path, "size", p.size);
    get_to(j, path, "train_count", p.train_count);
    get_to(j, path, "test_count", p.test_count);
    get_to(j, path, "master_seed", p.master_seed);
    get_range(j, path, "body_radius", p.body_radius_min, p.body_radius_max);
    get_range(j, path, "target_radius", p.target_radius_min, p.target_radius_max);
    get_range(j, path, "bone_radius", p.bone_radius_min, p.bone_radius_max);
    get_range(j, path, "pocket_radius", p.pocket_radius_min, p.pocket_radius_max);
    get_range(j, path, "tissue_hu", p.tissue_hu_min, p.tissue_hu_max);
    get_range(j, path, "bone_hu", p.bone_hu_min, p.bone_hu_max);
    get_range(j, path, "target_hu", p.target_hu_min, p.target_hu_max);
    get_to(j, path, "air_hu", p.air_hu);
    get_range_int(j, path, "bone_count", p.bone_count_min, p.bone_count_max);
    get_range_int(j, path, "air_pockets", p.air_pocket_min, p.air_pocket_max);
    get_to(j, path, "cupping_amplitude_hu", p.cupping_amplitude_hu);
    get_range_int(j, path, "streak_count", p.streak_count_min, p.streak_count_max);
    get_to(j, path, "streak_amplitude_hu", p.streak_amplitude_hu);
    get_to(j, path, "noise_sigma_hu", p.noise_sigma_hu);
    get_to(j, path, "noise_clip_sigmas", p.noise_clip_sigmas);
    get_to(j, path, "gain_jitter", p.gain_jitter);
    get_to(j, path, "offset_jitter_hu", p.offset_jitter_hu);
    get_range(j, path, "mae_band_hu", p.mae_band_lo_hu, p.mae_band_hi_hu);

    require(p.size >= 16 && p.size % 8 == 0, "phantom.size must be >= 16 and divisible by 8");
    require(p.train_count >= 1 && p.test_count >= 1, "phantom counts must be >= 1");
}

void parse_hfe(const json& j, HfeSection& h) {
    const std::string path = "hfe";
    expect_object(j, path);
    check_keys(j, path, {"cutoff", "mask_shape"});
    get_to(j, path, "cutoff", h.cutoff);
    if (j.contains("mask_shape")) {
        std::string s = j.at("mask_shape").get<std::string>();
        if (s == "cross") {
            h.mask_shape = MaskShape::cross;
        } else if (s == "square") {
            h.mask_shape = MaskShape::square;
        } else {
            throw ConfigError("hfe.mask_shape must be \"cross\" or \"square\"");
        }
    }
}

void parse_ufe(const json& j, UfeConfig& u) {
    const std::string path = "ufe";
    expect_object(j, path);
    check_keys(j, path,
               {"downsample_factor", "latent_channels", "codebook_size", "code_dim",
                "base_width", "commitment_weight", "lambda_l1", "lambda_ssim", "gn_groups"});
    get_to(j, path, "downsample_factor", u.downsample_factor);
    get_to(j, path, "latent_channels", u.latent_channels);
    get_to(j, path, "codebook_size", u.codebook_size);
    get_to(j, path, "code_dim", u.code_dim);
    get_to(j, path, "base_width", u.base_width);
    get_to(j, path, "commitment_weight", u.commitment_weight);
    get_to(j, path, "lambda_l1", u.lambda_l1);
    get_to(j, path, "lambda_ssim", u.lambda_ssim);
    get_to(j, path, "gn_groups", u.gn_groups);
    require(u.base_width >= 4, "ufe.base_width must be >= 4");
    require(u.codebook_size >= 2, "ufe.codebook_size must be >= 2");
}

void parse_diffusion(const json& j, DiffusionConfig& d, DenoiserConfig& n) {
    const std::string path = "diffusion";
    expect_object(j, path);
    check_keys(j, path, {"T", "beta_start", "beta_end", "ddim_steps", "sigma_mode", "denoiser"});
    get_to(j, path, "T", d.T);
    get_to(j, path, "beta_start", d.beta_start);
    get_to(j, path, "beta_end", d.beta_end);
    get_to(j, path, "ddim_steps", d.ddim_steps);
    if (j.contains("sigma_mode")) {
        std::string s = j.at("sigma_mode").get<std::string>();
        if (s == "posterior") {
            d.sigma_mode = SigmaMode::posterior;
        } else if (s == "beta") {
            d.sigma_mode = SigmaMode::beta;
        } else {
            throw ConfigError("diffusion.sigma_mode must be \"posterior\" or \"beta\"");
        }
    }
    if (j.contains("denoiser")) {
        const json& dj = j.at("denoiser");
        const std::string dpath = "diffusion.denoiser";
        expect_object(dj, dpath);
        check_keys(dj, dpath,
                   {"base_width", "time_embed_dim", "res_blocks_per_level", "gn_groups"});
        get_to(dj, dpath, "base_width", n.base_width);
        get_to(dj, dpath, "time_embed_dim", n.time_embed_dim);
        get_to(dj, dpath, "res_blocks_per_level", n.res_blocks_per_level);
        get_to(dj, dpath, "gn_groups", n.gn_groups);
    }
    require(d.T >= 1, "diffusion.T must be >= 1");
    require(d.beta_start > 0.0 && d.beta_start <= d.beta_end && d.beta_end < 1.0,
            "diffusion betas must satisfy 0 < beta_start <= beta_end < 1");
    require(d.ddim_steps >= 1 && d.ddim_steps <= d.T,
            "diffusion.ddim_steps must be in [1, T]");
    require(n.time_embed_dim > 0 && n.time_embed_dim % 2 == 0,
            "diffusion.denoiser.time_embed_dim must be even");
}

void parse_training(const json& j, TrainingConfig& t) {
    const std::string path = "training";
    expect_object(j, path);
    check_keys(j, path,
               {"stage1_epochs", "stage2_epochs", "batch_size", "lr", "beta1", "beta2",
                "weight_decay", "seed"});
    get_to(j, path, "stage1_epochs", t.stage1_epochs);
    get_to(j, path, "stage2_epochs", t.stage2_epochs);
    get_to(j, path, "batch_size", t.batch_size);
    get_to(j, path, "lr", t.lr);
    get_to(j, path, "beta1", t.beta1);
    get_to(j, path, "beta2", t.beta2);
    get_to(j, path, "weight_decay", t.weight_decay);
    get_to(j, path, "seed", t.seed);
    require(t.stage1_epochs >= 1 && t.stage2_epochs >= 1, "training epochs must be >= 1");
    require(t.batch_size >= 1, "training.batch_size must be >= 1");
    require(t.lr > 0.0, "training.lr must be > 0");
}

void parse_evaluation(const json& j, EvaluationConfig& e) {
    const std::string path = "evaluation";
    expect_object(j, path);
    check_keys(j, path,
               {"ddim_steps", "dosimetry", "dosimetry_slices", "gamma_dd_percent",
                "gamma_dta_mm", "gamma_thresholds_percent", "prescription_gy", "falloff_mm",
                "dose_spacing_mm", "target_mask_hu"});
    get_to(j, path, "ddim_steps", e.ddim_steps);
    get_to(j, path, "dosimetry", e.dosimetry);
    get_to(j, path, "dosimetry_slices", e.dosimetry_slices);
    get_to(j, path, "gamma_dd_percent", e.gamma_dd_percent);
    get_to(j, path, "gamma_dta_mm", e.gamma_dta_mm);
    get_to(j, path, "gamma_thresholds_percent", e.gamma_thresholds_percent);
    get_to(j, path, "prescription_gy", e.prescription_gy);
    get_to(j, path, "falloff_mm", e.falloff_mm);
    get_to(j, path, "dose_spacing_mm", e.dose_spacing_mm);
    get_range(j, path, "target_mask_hu", e.target_mask_hu_lo, e.target_mask_hu_hi);
    require(e.ddim_steps >= 1, "evaluation.ddim_steps must be >= 1");
    require(e.gamma_dd_percent.size() == e.gamma_dta_mm.size(),
            "evaluation gamma criteria lists must have equal length");
    require(e.dose_spacing_mm.size() == 2, "evaluation.dose_spacing_mm must have 2 entries");
}

}  // namespace

PipelineConfig parse_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    check_keys(j, "", {"phantom", "hfe", "ufe", "diffusion", "training", "evaluation"});
    PipelineConfig cfg;
    if (j.contains("phantom")) parse_phantom(j.at("phantom"), cfg.phantom);
    if (j.contains("hfe")) parse_hfe(j.at("hfe"), cfg.hfe);
    if (j.contains("ufe")) parse_ufe(j.at("ufe"), cfg.ufe);
    if (j.contains("diffusion")) parse_diffusion(j.at("diffusion"), cfg.diffusion, cfg.denoiser);
    if (j.contains("training")) parse_training(j.at("training"), cfg.training);
    if (j.contains("evaluation")) parse_evaluation(j.at("evaluation"), cfg.evaluation);
    require(cfg.evaluation.ddim_steps <= cfg.diffusion.T,
            "evaluation.ddim_steps must be <= diffusion.T");
    return cfg;
}

PipelineConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingInputError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("invalid JSON in " + path + ": " + e.what());
    }
    return parse_config(j);
}

json config_to_json(const PipelineConfig& cfg) {
    const PhantomSpec& p = cfg.phantom;
    json j;
    j["phantom"] = {
        {"size", p.size},
        {"train_count", p.train_count},
        {"test_count", p.test_count},
        {"master_seed", p.master_seed},
        {"body_radius", {p.body_radius_min, p.body_radius_max}},
        {"target_radius", {p.target_radius_min, p.target_radius_max}},
        {"bone_radius", {p.bone_radius_min, p.bone_radius_max}},
        {"pocket_radius", {p.pocket_radius_min, p.pocket_radius_max}},
        {"tissue_hu", {p.tissue_hu_min, p.tissue_hu_max}},
        {"bone_hu", {p.bone_hu_min, p.bone_hu_max}},
        {"target_hu", {p.target_hu_min, p.target_hu_max}},
        {"air_hu", p.air_hu},
        {"bone_count", {p.bone_count_min, p.bone_count_max}},
        {"air_pockets", {p.air_pocket_min, p.air_pocket_max}},
        {"cupping_amplitude_hu", p.cupping_amplitude_hu},
        {"streak_count", {p.streak_count_min, p.streak_count_max}},
        {"streak_amplitude_hu", p.streak_amplitude_hu},
        {"noise_sigma_hu", p.noise_sigma_hu},
        {"noise_clip_sigmas", p.noise_clip_sigmas},
        {"gain_jitter", p.gain_jitter},
        {"offset_jitter_hu", p.offset_jitter_hu},
        {"mae_band_hu", {p.mae_band_lo_hu, p.mae_band_hi_hu}},
    };
    j["hfe"] = {
        {"cutoff", cfg.hfe.cutoff},
        {"mask_shape", cfg.hfe.mask_shape == MaskShape::cross ? "cross" : "square"},
    };
    j["ufe"] = {
        {"downsample_factor", cfg.ufe.downsample_factor},
        {"latent_channels", cfg.ufe.latent_channels},
        {"codebook_size", cfg.ufe.codebook_size},
        {"code_dim", cfg.ufe.code_dim},
        {"base_width", cfg.ufe.base_width},
        {"commitment_weight", cfg.ufe.commitment_weight},
        {"lambda_l1", cfg.ufe.lambda_l1},
        {"lambda_ssim", cfg.ufe.lambda_ssim},
        {"gn_groups", cfg.ufe.gn_groups},
    };
    j["diffusion"] = {
        {"T", cfg.diffusion.T},
        {"beta_start", cfg.diffusion.beta_start},
        {"beta_end", cfg.diffusion.beta_end},
        {"ddim_steps", cfg.diffusion.ddim_steps},
        {"sigma_mode", cfg.diffusion.sigma_mode == SigmaMode::posterior ? "posterior" : "beta"},
        {"denoiser",
         {{"base_width", cfg.denoiser.base_width},
          {"time_embed_dim", cfg.denoiser.time_embed_dim},
          {"res_blocks_per_level", cfg.denoiser.res_blocks_per_level},
          {"gn_groups", cfg.denoiser.gn_groups}}},
    };
    j["training"] = {
        {"stage1_epochs", cfg.training.stage1_epochs},
        {"stage2_epochs", cfg.training.stage2_epochs},
        {"batch_size", cfg.training.batch_size},
        {"lr", cfg.training.lr},
        {"beta1", cfg.training.beta1},
        {"beta2", cfg.training.beta2},
        {"weight_decay", cfg.training.weight_decay},
        {"seed", cfg.training.seed},
    };
    j["evaluation"] = {
        {"ddim_steps", cfg.evaluation.ddim_steps},
        {"dosimetry", cfg.evaluation.dosimetry},
        {"dosimetry_slices", cfg.evaluation.dosimetry_slices},
        {"gamma_dd_percent", cfg.evaluation.gamma_dd_percent},
        {"gamma_dta_mm", cfg.evaluation.gamma_dta_mm},
        {"gamma_thresholds_percent", cfg.evaluation.gamma_thresholds_percent},
        {"prescription_gy", cfg.evaluation.prescription_gy},
        {"falloff_mm", cfg.evaluation.falloff_mm},
        {"dose_spacing_mm", cfg.evaluation.dose_spacing_mm},
        {"target_mask_hu", {cfg.evaluation.target_mask_hu_lo, cfg.evaluation.target_mask_hu_hi}},
    };
    return j;
}

}  // namespace hc3l
