// Command-line front end for the CBCT-to-CT synthesis pipeline.
//
// Exit codes: 0 success, 2 invalid config/usage, 3 missing input,
// 4 numerical failure.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hc3l/config.hpp"
#include "hc3l/container.hpp"
#include "hc3l/dosimetry.hpp"
#include "hc3l/errors.hpp"
#include "hc3l/ldm.hpp"
#include "hc3l/metrics.hpp"
#include "hc3l/pipeline.hpp"
#include "hc3l/threading.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    unsigned threads = 0;
    bool force = false;
};

hc3l::PipelineConfig resolve_config(const GlobalArgs& g) {
    hc3l::PipelineConfig cfg;
    if (!g.config_path.empty()) cfg = hc3l::load_config_file(g.config_path);
    if (g.seed_set) {
        cfg.training.seed = g.seed;
        cfg.phantom.master_seed = g.seed;
    }
    hc3l::set_thread_count(g.threads);
    return cfg;
}

std::vector<double> parse_csv_doubles(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    if (out.empty()) throw hc3l::ConfigError("expected a comma-separated number list: " + s);
    return out;
}

const hc3l::Grid& single_entry(const hc3l::GridMap& m, const std::string& path) {
    if (m.size() != 1)
        throw hc3l::ConfigError(path + ": expected exactly one grid, found " +
                                std::to_string(m.size()));
    return m.begin()->second;
}

std::string sct_name(const std::string& name) {
    if (name.rfind("cbct", 0) == 0) return "sct" + name.substr(4);
    return "sct_" + name;
}

json json_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"HC3L-Diff: hybrid conditional latent diffusion for CBCT-to-CT synthesis"};
    app.require_subcommand(1);

    GlobalArgs g;
    app.add_option("--config", g.config_path, "Pipeline configuration JSON");
    app.add_option("--out-dir", g.out_dir, "Output directory");
    app.add_option("--seed", g.seed, "Master seed override")->each([&](const std::string&) {
        g.seed_set = true;
    });
    app.add_option("--threads", g.threads, "Worker threads (0 = hardware)");
    app.add_flag("--force", g.force, "Overwrite existing outputs");

    // phantom
    auto* phantom = app.add_subcommand("phantom", "Generate the paired CT/CBCT dataset");
    std::string phantom_spec;
    phantom->add_option("--spec", phantom_spec, "Pipeline config JSON with a phantom section");

    // hfe
    auto* hfe = app.add_subcommand("hfe", "Apply the high-frequency extractor to a container");
    std::string hfe_in, hfe_out;
    int hfe_th = -1;
    bool hfe_unit = false;
    hfe->add_option("--input", hfe_in, "Input container")->required();
    hfe->add_option("--th", hfe_th, "Cutoff in frequency-index units (-1 = auto)");
    hfe->add_option("--output", hfe_out, "Output container")->required();
    hfe->add_flag("--unit", hfe_unit, "Inputs are already in [-1,1] (skip HU normalization)");

    // train-ufe
    auto* tufe = app.add_subcommand("train-ufe", "Stage 1: train the unified feature encoder");
    std::string tufe_data, tufe_out;
    tufe->add_option("--data", tufe_data, "Training container (train.hc3l)");
    tufe->add_option("--out", tufe_out, "Checkpoint path");

    // train-ldm
    auto* tldm = app.add_subcommand("train-ldm", "Stage 2: train the conditional denoiser");
    std::string tldm_data, tldm_ufe, tldm_out;
    tldm->add_option("--data", tldm_data, "Training container (train.hc3l)");
    tldm->add_option("--ufe", tldm_ufe, "Stage-1 checkpoint")->required();
    tldm->add_option("--out", tldm_out, "Checkpoint path");

    // synthesize
    auto* synth = app.add_subcommand("synthesize", "CBCT container -> sCT container");
    std::string sy_cbct, sy_ufe, sy_ldm, sy_out;
    int sy_steps = 0;
    std::uint64_t sy_seed = 0;
    bool sy_seed_set = false;
    synth->add_option("--cbct", sy_cbct, "Input container of CBCT slices (HU)")->required();
    synth->add_option("--ufe", sy_ufe, "Stage-1 checkpoint")->required();
    synth->add_option("--ldm", sy_ldm, "Stage-2 checkpoint")->required();
    synth->add_option("--ddim-steps", sy_steps, "Sampling steps (default diffusion.ddim_steps)");
    synth->add_option("--seed", sy_seed, "Sampling seed")->each([&](const std::string&) {
        sy_seed_set = true;
    });
    synth->add_option("--out", sy_out, "Output container")->required();

    // metrics
    auto* met = app.add_subcommand("metrics", "MAE/PSNR/SSIM between two containers (HU)");
    std::string met_ref, met_test, met_out;
    met->add_option("--ref", met_ref, "Reference container")->required();
    met->add_option("--test", met_test, "Test container")->required();
    met->add_option("--out", met_out, "Report JSON path")->required();

    // gamma
    auto* gam = app.add_subcommand("gamma", "Gamma analysis between two dose containers");
    std::string gam_ref, gam_eval, gam_out, gam_thresholds = "10,50,80", gam_spacing = "1,1";
    double gam_dd = 3.0, gam_dta = 3.0, gam_radius = 0.0;
    bool gam_interp = false;
    gam->add_option("--ref", gam_ref, "Reference dose container")->required();
    gam->add_option("--eval", gam_eval, "Evaluated dose container")->required();
    gam->add_option("--dd", gam_dd, "Dose tolerance, % of reference max");
    gam->add_option("--dta", gam_dta, "Distance to agreement, mm");
    gam->add_option("--threshold", gam_thresholds, "Dose thresholds, % (comma separated)");
    gam->add_option("--spacing", gam_spacing, "Voxel spacing per axis, mm (comma separated)");
    gam->add_option("--radius", gam_radius, "Search radius, mm (0 = 3*dta)");
    gam->add_flag("--interp", gam_interp, "Trilinear sub-voxel search");
    gam->add_option("--out", gam_out, "Report JSON path")->required();

    // dvh
    auto* dvh = app.add_subcommand("dvh", "DVH parameters over a structure mask");
    std::string dvh_dose, dvh_mask, dvh_out, dvh_params = "95,98,max", dvh_spacing = "1,1";
    dvh->add_option("--dose", dvh_dose, "Dose container (Gy)")->required();
    dvh->add_option("--mask", dvh_mask, "Binary mask container")->required();
    dvh->add_option("--params", dvh_params, "Parameters, e.g. 95,98,max");
    dvh->add_option("--spacing", dvh_spacing, "Voxel spacing per axis, mm");
    dvh->add_option("--out", dvh_out, "Report JSON path")->required();

    // eval-all
    app.add_subcommand("eval-all", "Phantom -> stage 1 -> stage 2 -> evaluation");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        hc3l::PipelineConfig cfg = resolve_config(g);

        if (phantom->parsed()) {
            if (!phantom_spec.empty()) {
                cfg = hc3l::load_config_file(phantom_spec);
                if (g.seed_set) {
                    cfg.training.seed = g.seed;
                    cfg.phantom.master_seed = g.seed;
                }
            }
            hc3l::write_effective_config(cfg, g.out_dir);
            hc3l::generate_phantom_dataset(cfg, g.out_dir, g.force);
            std::cout << "dataset written to " << g.out_dir << "\n";
        } else if (hfe->parsed()) {
            hc3l::GridMap in = hc3l::load_container(hfe_in);
            std::vector<std::pair<std::string, hc3l::Grid>> out;
            for (const auto& [name, grid] : in) {
                if (grid.rank() != 2)
                    throw hc3l::ConfigError("hfe: entry " + name + " is not a 2D image");
                hc3l::HfeConfig hc = cfg.hfe.resolve(grid.dim(1));
                if (hfe_th >= 0) hc.cutoff = hfe_th;
                hc3l::Grid img = hfe_unit ? grid : hc3l::hu_to_unit(grid);
                out.emplace_back("hf_" + name, hc3l::extract_high_frequency(img, hc));
            }
            hc3l::save_container(hfe_out, out);
            std::cout << "high-frequency images written to " << hfe_out << "\n";
        } else if (tufe->parsed()) {
            if (tufe_data.empty()) tufe_data = g.out_dir + "/dataset/train.hc3l";
            if (tufe_out.empty()) tufe_out = g.out_dir + "/ufe.hc3l";
            hc3l::write_effective_config(cfg, g.out_dir);
            hc3l::run_stage1(cfg, tufe_data, tufe_out, g.force);
            std::cout << "stage-1 checkpoint written to " << tufe_out << "\n";
        } else if (tldm->parsed()) {
            if (tldm_data.empty()) tldm_data = g.out_dir + "/dataset/train.hc3l";
            if (tldm_out.empty()) tldm_out = g.out_dir + "/ldm.hc3l";
            hc3l::write_effective_config(cfg, g.out_dir);
            hc3l::run_stage2(cfg, tldm_data, tldm_ufe, tldm_out, g.force);
            std::cout << "stage-2 checkpoint written to " << tldm_out << "\n";
        } else if (synth->parsed()) {
            hc3l::refuse_overwrite(sy_out, g.force);
            hc3l::Ufe ufe = hc3l::Ufe::load(sy_ufe);
            hc3l::Denoiser den = hc3l::Denoiser::load(sy_ldm);
            hc3l::NoiseSchedule schedule = cfg.make_schedule();
            int steps = sy_steps > 0 ? sy_steps : cfg.diffusion.ddim_steps;
            std::vector<int> subseq = hc3l::make_subsequence(schedule.T, steps);
            std::uint64_t seed = sy_seed_set ? sy_seed : cfg.training.seed;

            hc3l::GridMap in = hc3l::load_container(sy_cbct);
            std::vector<std::pair<std::string, hc3l::Grid>> inputs(in.begin(), in.end());
            std::vector<std::pair<std::string, hc3l::Grid>> outputs(inputs.size());
            hc3l::parallel_for(inputs.size(), [&](std::size_t i) {
                const auto& [name, grid] = inputs[i];
                if (grid.rank() != 2)
                    throw hc3l::ConfigError("synthesize: entry " + name + " is not 2D");
                hc3l::Ufe uw = ufe.worker_clone();
                hc3l::Denoiser dw = den.worker_clone();
                hc3l::RngStream rng = hc3l::RngStream(seed).substream(i);
                hc3l::Grid unit({1, grid.dim(0), grid.dim(1)},
                                hc3l::hu_to_unit(grid).values());
                hc3l::Grid sct = hc3l::synthesize(unit, cfg.hfe.resolve(grid.dim(1)), uw, dw,
                                                  schedule, subseq, rng);
                hc3l::Grid sct2({grid.dim(0), grid.dim(1)}, sct.values());
                outputs[i] = {sct_name(name), hc3l::unit_to_hu(sct2)};
            });
            hc3l::save_container(sy_out, outputs);
            std::cout << "sCT container written to " << sy_out << "\n";
        } else if (met->parsed()) {
            hc3l::GridMap ref = hc3l::load_container(met_ref);
            hc3l::GridMap test = hc3l::load_container(met_test);
            if (ref.size() != test.size())
                throw hc3l::ConfigError("metrics: containers hold different entry counts");
            json per = json::array();
            double mae_sum = 0, psnr_sum = 0, ssim_sum = 0;
            auto it_r = ref.begin();
            auto it_t = test.begin();
            for (; it_r != ref.end(); ++it_r, ++it_t) {
                hc3l::MetricReport m = hc3l::compute_metrics(it_r->second, it_t->second);
                per.push_back(json{{"ref", it_r->first},
                                   {"test", it_t->first},
                                   {"mae_hu", m.mae_hu},
                                   {"psnr_db", json_number(m.psnr_db)},
                                   {"ssim", m.ssim}});
                mae_sum += m.mae_hu;
                psnr_sum += m.psnr_db;
                ssim_sum += m.ssim;
            }
            double n = static_cast<double>(ref.size());
            json rep{{"n_pairs", ref.size()},
                     {"aggregate",
                      {{"mae_hu", mae_sum / n},
                       {"psnr_db", json_number(psnr_sum / n)},
                       {"ssim", ssim_sum / n}}},
                     {"per_pair", per}};
            std::ofstream out(met_out);
            out << rep.dump(2) << "\n";
            std::cout << "metrics written to " << met_out << "\n";
        } else if (gam->parsed()) {
            hc3l::DoseGrid ref{single_entry(hc3l::load_container(gam_ref), gam_ref),
                               parse_csv_doubles(gam_spacing)};
            hc3l::DoseGrid eva{single_entry(hc3l::load_container(gam_eval), gam_eval),
                               parse_csv_doubles(gam_spacing)};
            json rows = json::array();
            for (double thr : parse_csv_doubles(gam_thresholds)) {
                hc3l::GammaCriteria crit;
                crit.dose_percent = gam_dd;
                crit.dta_mm = gam_dta;
                crit.threshold_percent = thr;
                crit.search_radius_mm = gam_radius;
                crit.interpolate = gam_interp;
                hc3l::Grid gmap = hc3l::gamma_map(ref, eva, crit);
                rows.push_back(json{{"dd_percent", gam_dd},
                                    {"dta_mm", gam_dta},
                                    {"threshold_percent", thr},
                                    {"gpr_percent", hc3l::gpr(gmap)}});
            }
            json rep{{"criteria", rows}};
            std::ofstream out(gam_out);
            out << rep.dump(2) << "\n";
            std::cout << "gamma report written to " << gam_out << "\n";
        } else if (dvh->parsed()) {
            hc3l::DoseGrid dose{single_entry(hc3l::load_container(dvh_dose), dvh_dose),
                                parse_csv_doubles(dvh_spacing)};
            const hc3l::Grid& mask = single_entry(hc3l::load_container(dvh_mask), dvh_mask);
            json values;
            std::stringstream ss(dvh_params);
            std::string item;
            while (std::getline(ss, item, ',')) {
                if (item == "max") {
                    values["dmax_gy"] = hc3l::dvh_dmax(dose, mask);
                } else {
                    double p = std::stod(item);
                    values["d" + item + "_gy"] = hc3l::dvh_parameter(dose, mask, p);
                }
            }
            std::ofstream out(dvh_out);
            out << json{{"parameters", values}}.dump(2) << "\n";
            std::cout << "dvh report written to " << dvh_out << "\n";
        } else {
            hc3l::eval_all(cfg, g.out_dir, g.force);
            std::cout << "pipeline outputs written to " << g.out_dir << "\n";
        }
    } catch (const hc3l::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const hc3l::MissingInputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const hc3l::NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const hc3l::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
