#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "hc3l/diffusion.hpp"
#include "hc3l/hfe.hpp"
#include "hc3l/ldm.hpp"
#include "hc3l/phantom.hpp"
#include "hc3l/ufe.hpp"

namespace hc3l {

struct TrainingConfig {
    int stage1_epochs = 60;
    int stage2_epochs = 200;
    int batch_size = 16;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 0.01;
    std::uint64_t seed = 2024;
};

struct DiffusionConfig {
    int T = 1000;
    double beta_start = 0.002;
    double beta_end = 0.02;
    int ddim_steps = 150;
    SigmaMode sigma_mode = SigmaMode::posterior;
};

struct EvaluationConfig {
    int ddim_steps = 20;
    bool dosimetry = true;
    int dosimetry_slices = 5;
    std::vector<double> gamma_dd_percent = {3.0, 2.0};
    std::vector<double> gamma_dta_mm = {3.0, 2.0};
    std::vector<double> gamma_thresholds_percent = {10.0, 50.0, 80.0};
    double prescription_gy = 60.0;
    double falloff_mm = 6.0;
    std::vector<double> dose_spacing_mm = {1.0, 1.0};
    double target_mask_hu_lo = 100.0;
    double target_mask_hu_hi = 500.0;
};

// HFE cutoff with an auto mode: -1 rescales the reference value 30 (chosen
// on 384-wide slices) proportionally to the actual width.
struct HfeSection {
    int cutoff = -1;
    MaskShape mask_shape = MaskShape::cross;

    HfeConfig resolve(std::size_t width) const;
};

// Whole-pipeline configuration; every field has a default and unknown JSON
// keys are rejected.
struct PipelineConfig {
    PhantomSpec phantom;
    HfeSection hfe;
    UfeConfig ufe;
    DiffusionConfig diffusion;
    DenoiserConfig denoiser;
    TrainingConfig training;
    EvaluationConfig evaluation;

    NoiseSchedule make_schedule() const {
        return linear_schedule(diffusion.T, diffusion.beta_start, diffusion.beta_end,
                               diffusion.sigma_mode);
    }
};

// Throws ConfigError on unknown keys, wrong types or out-of-range values.
PipelineConfig parse_config(const nlohmann::json& j);
PipelineConfig load_config_file(const std::string& path);

// Fully-defaulted (effective) form, suitable for echoing next to outputs.
nlohmann::json config_to_json(const PipelineConfig& cfg);

}  // namespace hc3l
