#pragma once

#include <string>
#include <vector>

#include "hc3l/config.hpp"
#include "hc3l/grid.hpp"

namespace hc3l {

// Paired HU slices loaded from a dataset container (entries ct_NNNN /
// cbct_NNNN).
struct SliceDataset {
    std::vector<Grid> ct_hu;
    std::vector<Grid> cbct_hu;

    int count() const { return static_cast<int>(ct_hu.size()); }
};

SliceDataset load_dataset(const std::string& container_path);

// Refuses to overwrite an existing path unless force is set (ConfigError).
void refuse_overwrite(const std::string& path, bool force);

void write_effective_config(const PipelineConfig& cfg, const std::string& out_dir);

// Writes train.hc3l, test.hc3l and manifest.json; every CBCT slice is
// checked against the configured MAE band.
void generate_phantom_dataset(const PipelineConfig& cfg, const std::string& out_dir,
                              bool force);

// Stage 1: UFE reconstruction training over mixed CT/CBCT/high-frequency
// batches. Writes the checkpoint, a JSON config sidecar and a loss CSV.
void run_stage1(const PipelineConfig& cfg, const std::string& train_container,
                const std::string& checkpoint_out, bool force);

// Stage 2: conditional denoiser training against the frozen UFE.
void run_stage2(const PipelineConfig& cfg, const std::string& train_container,
                const std::string& ufe_checkpoint, const std::string& checkpoint_out,
                bool force);

struct EvalSummary {
    int n_slices = 0;
    double sct_mae_hu = 0.0;
    double sct_psnr_db = 0.0;
    double sct_ssim = 0.0;
    double cbct_mae_hu = 0.0;
    double cbct_psnr_db = 0.0;
    double cbct_ssim = 0.0;
    double synthesis_seconds = 0.0;
};

// Synthesizes sCT for every test slice, writes sct.hc3l, metrics.json,
// timing.json and (when enabled) dose_report.json under out_dir.
EvalSummary run_eval(const PipelineConfig& cfg, const std::string& test_container,
                     const std::string& ufe_checkpoint, const std::string& ldm_checkpoint,
                     const std::string& out_dir, bool force);

// Full pipeline under out_dir: dataset/ -> ufe.hc3l -> ldm.hc3l -> eval/.
// Completed stages are reused unless force is set.
void eval_all(const PipelineConfig& cfg, const std::string& out_dir, bool force);

// Binary mask of voxels with lo <= HU <= hi.
Grid target_mask_from_hu(const Grid& hu, double lo, double hi);

}  // namespace hc3l
