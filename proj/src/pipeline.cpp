#include "hc3l/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "hc3l/container.hpp"
#include "hc3l/dosimetry.hpp"
#include "hc3l/errors.hpp"
#include "hc3l/ldm.hpp"
#include "hc3l/metrics.hpp"
#include "hc3l/phantom.hpp"
#include "hc3l/threading.hpp"

namespace hc3l {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Substream tags per pipeline stage.
constexpr std::uint64_t kStage1InitTag = 11;
constexpr std::uint64_t kStage1TrainTag = 12;
constexpr std::uint64_t kStage2InitTag = 21;
constexpr std::uint64_t kStage2TrainTag = 22;
constexpr std::uint64_t kSynthesisTag = 31;

std::string slice_name(const char* prefix, int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%04d", prefix, index);
    return buf;
}

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Grid as_image3(const Grid& g2) {
    return Grid({1, g2.dim(0), g2.dim(1)}, g2.values());
}

Grid as_image2(const Grid& g3) {
    return Grid({g3.dim(1), g3.dim(2)}, g3.values());
}

// Serialize a possibly-infinite value (JSON has no inf literal).
json json_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

std::string loss_csv_path(const std::string& checkpoint) {
    fs::path p(checkpoint);
    return (p.parent_path() / (p.stem().string() + "_loss.csv")).string();
}

void check_finite_loss(double loss, const char* stage) {
    if (!std::isfinite(loss))
        throw NumericalError(std::string(stage) + ": non-finite training loss");
}

}  // namespace

void refuse_overwrite(const std::string& path, bool force) {
    if (!force && fs::exists(path))
        throw ConfigError("output already exists: " + path + " (pass --force to overwrite)");
}

SliceDataset load_dataset(const std::string& container_path) {
    GridMap all = load_container(container_path);
    SliceDataset ds;
    for (int i = 0;; ++i) {
        auto ct = all.find(slice_name("ct", i));
        auto cbct = all.find(slice_name("cbct", i));
        if (ct == all.end() || cbct == all.end()) break;
        ds.ct_hu.push_back(ct->second);
        ds.cbct_hu.push_back(cbct->second);
    }
    if (ds.ct_hu.empty())
        throw FormatError("dataset container has no ct_0000/cbct_0000 pair", 0);
    return ds;
}

void write_effective_config(const PipelineConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "effective_config.json");
    if (!out) throw MissingInputError("cannot write effective config in " + out_dir);
    out << config_to_json(cfg).dump(2) << "\n";
}

void generate_phantom_dataset(const PipelineConfig& cfg, const std::string& out_dir,
                              bool force) {
    fs::create_directories(out_dir);
    std::string train_path = (fs::path(out_dir) / "train.hc3l").string();
    std::string test_path = (fs::path(out_dir) / "test.hc3l").string();
    std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
    refuse_overwrite(train_path, force);
    refuse_overwrite(test_path, force);

    const PhantomSpec& spec = cfg.phantom;
    int total = spec.train_count + spec.test_count;
    std::vector<Grid> ct(total), cbct(total);
    parallel_for(static_cast<std::size_t>(total), [&](std::size_t i) {
        int idx = static_cast<int>(i);
        ct[i] = generate_ct(spec, idx);
        cbct[i] = degrade_to_cbct(ct[i], spec, idx);
    });

    double mae_sum = 0.0;
    for (int i = 0; i < total; ++i) {
        double m = mae(ct[i], cbct[i]);
        mae_sum += m;
        if (m < spec.mae_band_lo_hu || m > spec.mae_band_hi_hu) {
            throw ConfigError("phantom slice " + std::to_string(i) + " CBCT MAE " +
                              std::to_string(m) + " HU outside band [" +
                              std::to_string(spec.mae_band_lo_hu) + ", " +
                              std::to_string(spec.mae_band_hi_hu) + "]");
        }
    }

    std::vector<std::pair<std::string, Grid>> train_entries, test_entries;
    for (int i = 0; i < spec.train_count; ++i) {
        train_entries.emplace_back(slice_name("ct", i), ct[i]);
        train_entries.emplace_back(slice_name("cbct", i), cbct[i]);
    }
    for (int j = 0; j < spec.test_count; ++j) {
        int src = spec.train_count + j;
        test_entries.emplace_back(slice_name("ct", j), ct[src]);
        test_entries.emplace_back(slice_name("cbct", j), cbct[src]);
    }
    save_container(train_path, train_entries);
    save_container(test_path, test_entries);

    json manifest;
    manifest["train_count"] = spec.train_count;
    manifest["test_count"] = spec.test_count;
    manifest["master_seed"] = spec.master_seed;
    manifest["size"] = spec.size;
    manifest["cbct_mae_mean_hu"] = mae_sum / total;
    manifest["spec"] = config_to_json(cfg)["phantom"];
    std::ofstream mf(manifest_path);
    mf << manifest.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Stage 1
// ---------------------------------------------------------------------------

void run_stage1(const PipelineConfig& cfg, const std::string& train_container,
                const std::string& checkpoint_out, bool force) {
    refuse_overwrite(checkpoint_out, force);
    SliceDataset ds = load_dataset(train_container);
    int n = ds.count();
    std::size_t width = ds.ct_hu[0].dim(1);
    HfeConfig hfe_cfg = cfg.hfe.resolve(width);

    // Three reconstruction views per slice: CT, CBCT and HFE(CBCT).
    std::vector<Grid> views(static_cast<std::size_t>(3 * n));
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        Grid ct_unit = hu_to_unit(ds.ct_hu[i]);
        Grid cbct_unit = hu_to_unit(ds.cbct_hu[i]);
        views[3 * i] = as_image3(ct_unit);
        views[3 * i + 1] = as_image3(cbct_unit);
        views[3 * i + 2] = as_image3(extract_high_frequency(cbct_unit, hfe_cfg));
    });

    RngStream root(cfg.training.seed);
    RngStream init_rng = root.substream(kStage1InitTag);
    Ufe master(cfg.ufe, init_rng);
    RngStream train_rng = root.substream(kStage1TrainTag);

    nn::AdamWConfig opt_cfg;
    opt_cfg.lr = cfg.training.lr;
    opt_cfg.beta1 = cfg.training.beta1;
    opt_cfg.beta2 = cfg.training.beta2;
    opt_cfg.weight_decay = cfg.training.weight_decay;
    nn::AdamW opt(opt_cfg);

    int batch = cfg.training.batch_size;
    std::vector<Ufe> workers;
    workers.reserve(batch);
    for (int k = 0; k < batch; ++k) workers.push_back(master.worker_clone());

    std::size_t K = master.codebook().dim(0);
    Grid cb_grad(master.codebook().shape());
    std::vector<Grid> worker_cb_grad(batch, Grid(master.codebook().shape()));
    std::vector<std::vector<long>> worker_usage(batch, std::vector<long>(K, 0));
    std::vector<long> epoch_usage(K, 0);

    // Optimizer operates on encoder params + decoder params + codebook.
    auto& enc_params = master.encoder().params().values;
    auto& dec_params = master.decoder().params().values;
    std::vector<Grid*> opt_params;
    for (Grid& g : enc_params) opt_params.push_back(&g);
    for (Grid& g : dec_params) opt_params.push_back(&g);
    opt_params.push_back(&master.codebook());
    std::size_t codebook_param_index = opt_params.size() - 1;

    std::ofstream csv(loss_csv_path(checkpoint_out));
    csv << "step,epoch,loss,l1,ssim,quant\n";

    std::vector<double> losses(batch), l1s(batch), ssims(batch), quants(batch);
    std::vector<Grid> last_latents(batch);
    long step = 0;

    for (int epoch = 0; epoch < cfg.training.stage1_epochs; ++epoch) {
        std::vector<int> order(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) order[i] = i;
        shuffle(order, train_rng);

        for (int start = 0; start < n; start += batch) {
            int bn = std::min(batch, n - start);
            parallel_for(static_cast<std::size_t>(bn), [&](std::size_t k) {
                Ufe& w = workers[k];
                w.codebook() = master.codebook();
                w.encoder().zero_param_grads();
                w.decoder().zero_param_grads();
                worker_cb_grad[k].fill(0.0);
                std::fill(worker_usage[k].begin(), worker_usage[k].end(), 0L);

                int slice = order[start + static_cast<int>(k)];
                int kind = (slice + epoch) % 3;
                const Grid& x = views[3 * slice + kind];

                Grid z = w.encode(x);
                QuantizeResult q = w.quantize(z);
                Grid x_rec = w.decode(q.z_q);
                Stage1Loss s1 = stage1_loss(x, x_rec, q.loss(), cfg.ufe.lambda_l1,
                                            cfg.ufe.lambda_ssim);

                // Straight-through: decoder input gradients reach the encoder
                // output unchanged, plus the commitment pull toward z_q.
                Grid enc_out_grad = w.decoder().backward(s1.grad_xrec)[0];
                double nl = static_cast<double>(z.size());
                for (std::size_t i = 0; i < z.size(); ++i) {
                    enc_out_grad[i] +=
                        cfg.ufe.commitment_weight * 2.0 * (z[i] - q.z_q[i]) / nl;
                }
                w.encoder().backward(enc_out_grad);

                // Codebook loss term pulls the chosen entries toward z.
                std::size_t hw = z.dim(1) * z.dim(2);
                std::size_t ch = z.dim(0);
                for (std::size_t p = 0; p < hw; ++p) {
                    int entry = q.indices[p];
                    worker_usage[k][entry] += 1;
                    for (std::size_t c = 0; c < ch; ++c) {
                        worker_cb_grad[k].at(entry, c) +=
                            2.0 * (q.z_q[c * hw + p] - z[c * hw + p]) / nl;
                    }
                }
                last_latents[k] = std::move(z);
                losses[k] = s1.total;
                l1s[k] = s1.l1_term;
                ssims[k] = s1.ssim_term;
                quants[k] = s1.quant_term;
            });

            // Fixed-order reduction keeps results independent of the thread
            // count.
            master.encoder().zero_param_grads();
            master.decoder().zero_param_grads();
            cb_grad.fill(0.0);
            auto& enc_g = master.encoder().param_grads();
            auto& dec_g = master.decoder().param_grads();
            double inv_bn = 1.0 / bn;
            for (int k = 0; k < bn; ++k) {
                auto& weg = workers[k].encoder().param_grads();
                for (std::size_t p = 0; p < enc_g.size(); ++p)
                    for (std::size_t i = 0; i < enc_g[p].size(); ++i)
                        enc_g[p][i] += weg[p][i] * inv_bn;
                auto& wdg = workers[k].decoder().param_grads();
                for (std::size_t p = 0; p < dec_g.size(); ++p)
                    for (std::size_t i = 0; i < dec_g[p].size(); ++i)
                        dec_g[p][i] += wdg[p][i] * inv_bn;
                for (std::size_t i = 0; i < cb_grad.size(); ++i)
                    cb_grad[i] += worker_cb_grad[k][i] * inv_bn;
                for (std::size_t e = 0; e < K; ++e) epoch_usage[e] += worker_usage[k][e];
            }

            std::vector<const Grid*> opt_grads;
            for (Grid& g : enc_g) opt_grads.push_back(&g);
            for (Grid& g : dec_g) opt_grads.push_back(&g);
            opt_grads.push_back(&cb_grad);
            opt.update(opt_params, opt_grads);

            double loss = 0, l1 = 0, ss = 0, qd = 0;
            for (int k = 0; k < bn; ++k) {
                loss += losses[k] * inv_bn;
                l1 += l1s[k] * inv_bn;
                ss += ssims[k] * inv_bn;
                qd += quants[k] * inv_bn;
            }
            check_finite_loss(loss, "stage1");
            csv << step << "," << epoch << "," << fmt_g(loss) << "," << fmt_g(l1) << ","
                << fmt_g(ss) << "," << fmt_g(qd) << "\n";
            ++step;
        }

        // Reseed entries unused across the epoch from a recent latent.
        int last_bn = std::min(batch, n);
        for (std::size_t e = 0; e < K; ++e) {
            if (epoch_usage[e] != 0) continue;
            long src = train_rng.next_int(0, last_bn - 1);
            const Grid& z = last_latents[src];
            std::size_t hw = z.dim(1) * z.dim(2);
            long pos = train_rng.next_int(0, static_cast<long>(hw) - 1);
            for (std::size_t c = 0; c < z.dim(0); ++c)
                master.codebook().at(e, c) = z[c * hw + pos];
            opt.reset_rows(codebook_param_index, e, e + 1);
        }
        std::fill(epoch_usage.begin(), epoch_usage.end(), 0L);
    }

    master.save(checkpoint_out);
}

// ---------------------------------------------------------------------------
// Stage 2
// ---------------------------------------------------------------------------

void run_stage2(const PipelineConfig& cfg, const std::string& train_container,
                const std::string& ufe_checkpoint, const std::string& checkpoint_out,
                bool force) {
    refuse_overwrite(checkpoint_out, force);
    SliceDataset ds = load_dataset(train_container);
    int n = ds.count();
    Ufe ufe = Ufe::load(ufe_checkpoint);
    std::size_t width = ds.ct_hu[0].dim(1);
    HfeConfig hfe_cfg = cfg.hfe.resolve(width);

    // The UFE is frozen, so latent targets and hybrid conditions are fixed
    // per slice; compute them once.
    std::vector<Grid> z0(static_cast<std::size_t>(n)), cond(static_cast<std::size_t>(n));
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        Ufe w = ufe.worker_clone();
        z0[i] = w.encode(as_image3(hu_to_unit(ds.ct_hu[i])));
        cond[i] = build_condition(as_image3(hu_to_unit(ds.cbct_hu[i])), hfe_cfg, w);
    });

    RngStream root(cfg.training.seed);
    RngStream init_rng = root.substream(kStage2InitTag);
    Denoiser master(cfg.denoiser, init_rng);
    RngStream train_rng = root.substream(kStage2TrainTag);
    NoiseSchedule schedule = cfg.make_schedule();

    nn::AdamWConfig opt_cfg;
    opt_cfg.lr = cfg.training.lr;
    opt_cfg.beta1 = cfg.training.beta1;
    opt_cfg.beta2 = cfg.training.beta2;
    opt_cfg.weight_decay = cfg.training.weight_decay;
    nn::AdamW opt(opt_cfg);

    int batch = cfg.training.batch_size;
    std::vector<Denoiser> workers;
    workers.reserve(batch);
    for (int k = 0; k < batch; ++k) workers.push_back(master.worker_clone());

    auto& params = master.graph().params().values;
    std::vector<Grid*> opt_params;
    for (Grid& g : params) opt_params.push_back(&g);

    std::ofstream csv(loss_csv_path(checkpoint_out));
    csv << "step,epoch,loss\n";

    std::vector<double> losses(batch);
    std::vector<int> ts(batch);
    std::vector<Grid> epses(batch);
    long step = 0;

    for (int epoch = 0; epoch < cfg.training.stage2_epochs; ++epoch) {
        std::vector<int> order(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) order[i] = i;
        shuffle(order, train_rng);

        for (int start = 0; start < n; start += batch) {
            int bn = std::min(batch, n - start);
            // Draw (t, eps) sequentially so the stream is thread-agnostic.
            for (int k = 0; k < bn; ++k) {
                ts[k] = static_cast<int>(train_rng.next_int(1, schedule.T));
                epses[k] = sample_gaussian(train_rng, z0[order[start + k]].shape());
            }
            parallel_for(static_cast<std::size_t>(bn), [&](std::size_t k) {
                Denoiser& w = workers[k];
                w.graph().zero_param_grads();
                int slice = order[start + static_cast<int>(k)];
                losses[k] = stage2_loss_backward(z0[slice], ts[k], epses[k], cond[slice], w,
                                                 schedule);
            });

            auto& mg = master.graph().param_grads();
            master.graph().zero_param_grads();
            double inv_bn = 1.0 / bn;
            for (int k = 0; k < bn; ++k) {
                auto& wg = workers[k].graph().param_grads();
                for (std::size_t p = 0; p < mg.size(); ++p)
                    for (std::size_t i = 0; i < mg[p].size(); ++i)
                        mg[p][i] += wg[p][i] * inv_bn;
            }
            std::vector<const Grid*> opt_grads;
            for (Grid& g : mg) opt_grads.push_back(&g);
            opt.update(opt_params, opt_grads);

            double loss = 0;
            for (int k = 0; k < bn; ++k) loss += losses[k] * inv_bn;
            check_finite_loss(loss, "stage2");
            csv << step << "," << epoch << "," << fmt_g(loss) << "\n";
            ++step;
        }
    }

    master.save(checkpoint_out);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

Grid target_mask_from_hu(const Grid& hu, double lo, double hi) {
    Grid mask(hu.shape());
    for (std::size_t i = 0; i < hu.size(); ++i)
        mask[i] = (hu[i] >= lo && hu[i] <= hi) ? 1.0 : 0.0;
    return mask;
}

namespace {

json dvh_to_json(const DvhReport& r) {
    return json{{"d95_gy", r.d95}, {"d98_gy", r.d98}, {"dmax_gy", r.dmax}};
}

json dose_report_for_slice(const PipelineConfig& cfg, const Grid& ct_hu, const Grid& sct_hu,
                           bool control_row) {
    const EvaluationConfig& e = cfg.evaluation;
    Grid mask_ct = target_mask_from_hu(ct_hu, e.target_mask_hu_lo, e.target_mask_hu_hi);
    Grid mask_sct = target_mask_from_hu(sct_hu, e.target_mask_hu_lo, e.target_mask_hu_hi);

    json row;
    std::size_t n_ct = 0, n_sct = 0;
    for (std::size_t i = 0; i < mask_ct.size(); ++i) {
        n_ct += mask_ct[i] > 0.5;
        n_sct += mask_sct[i] > 0.5;
    }
    row["target_voxels_ct"] = n_ct;
    row["target_voxels_sct"] = n_sct;
    if (n_ct == 0 || n_sct == 0) {
        row["empty_mask"] = true;
        return row;
    }

    DoseGrid dose_ref = synthetic_dose(mask_ct, e.dose_spacing_mm, e.prescription_gy,
                                       e.falloff_mm);
    DoseGrid dose_eval = control_row ? dose_ref
                                     : synthetic_dose(mask_sct, e.dose_spacing_mm,
                                                      e.prescription_gy, e.falloff_mm);

    json gammas = json::array();
    for (std::size_t c = 0; c < e.gamma_dd_percent.size(); ++c) {
        for (double thr : e.gamma_thresholds_percent) {
            GammaCriteria crit;
            crit.dose_percent = e.gamma_dd_percent[c];
            crit.dta_mm = e.gamma_dta_mm[c];
            crit.threshold_percent = thr;
            Grid g = gamma_map(dose_ref, dose_eval, crit);
            gammas.push_back(json{{"dd_percent", crit.dose_percent},
                                  {"dta_mm", crit.dta_mm},
                                  {"threshold_percent", thr},
                                  {"gpr_percent", gpr(g)}});
        }
    }
    row["gamma"] = gammas;

    DvhReport ref_r = dvh_report(dose_ref, mask_ct);
    DvhReport eval_r = dvh_report(dose_eval, mask_ct);
    row["dvh_ref"] = dvh_to_json(ref_r);
    row["dvh_eval"] = dvh_to_json(eval_r);
    row["dvh_diff_percent"] = dvh_to_json(dvh_percent_diff(eval_r, ref_r));
    return row;
}

}  // namespace

EvalSummary run_eval(const PipelineConfig& cfg, const std::string& test_container,
                     const std::string& ufe_checkpoint, const std::string& ldm_checkpoint,
                     const std::string& out_dir, bool force) {
    fs::create_directories(out_dir);
    std::string metrics_path = (fs::path(out_dir) / "metrics.json").string();
    refuse_overwrite(metrics_path, force);

    SliceDataset ds = load_dataset(test_container);
    int n = ds.count();
    Ufe ufe = Ufe::load(ufe_checkpoint);
    Denoiser den = Denoiser::load(ldm_checkpoint);
    NoiseSchedule schedule = cfg.make_schedule();
    std::vector<int> subseq = make_subsequence(schedule.T, cfg.evaluation.ddim_steps);
    HfeConfig hfe_cfg = cfg.hfe.resolve(ds.ct_hu[0].dim(1));

    std::vector<Grid> sct_hu(static_cast<std::size_t>(n));
    auto t0 = std::chrono::steady_clock::now();
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        Ufe uw = ufe.worker_clone();
        Denoiser dw = den.worker_clone();
        RngStream rng =
            RngStream(cfg.training.seed).substream(kSynthesisTag).substream(i);
        Grid sct_unit = synthesize(as_image3(hu_to_unit(ds.cbct_hu[i])), hfe_cfg, uw, dw,
                                   schedule, subseq, rng);
        sct_hu[i] = unit_to_hu(as_image2(sct_unit));
    });
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                         .count();

    EvalSummary sum;
    sum.n_slices = n;
    sum.synthesis_seconds = seconds;
    json per_slice = json::array();
    for (int i = 0; i < n; ++i) {
        MetricReport ms = compute_metrics(ds.ct_hu[i], sct_hu[i]);
        MetricReport mc = compute_metrics(ds.ct_hu[i], ds.cbct_hu[i]);
        per_slice.push_back(json{{"index", i},
                                 {"sct_mae_hu", ms.mae_hu},
                                 {"sct_psnr_db", json_number(ms.psnr_db)},
                                 {"sct_ssim", ms.ssim},
                                 {"cbct_mae_hu", mc.mae_hu},
                                 {"cbct_psnr_db", json_number(mc.psnr_db)},
                                 {"cbct_ssim", mc.ssim}});
        sum.sct_mae_hu += ms.mae_hu / n;
        sum.sct_psnr_db += ms.psnr_db / n;
        sum.sct_ssim += ms.ssim / n;
        sum.cbct_mae_hu += mc.mae_hu / n;
        sum.cbct_psnr_db += mc.psnr_db / n;
        sum.cbct_ssim += mc.ssim / n;
    }

    std::vector<std::pair<std::string, Grid>> sct_entries;
    for (int i = 0; i < n; ++i) sct_entries.emplace_back(slice_name("sct", i), sct_hu[i]);
    save_container((fs::path(out_dir) / "sct.hc3l").string(), sct_entries);

    json metrics_json;
    metrics_json["n_slices"] = n;
    metrics_json["ddim_steps"] = cfg.evaluation.ddim_steps;
    metrics_json["sct_vs_ct"] = {{"mae_hu", sum.sct_mae_hu},
                                 {"psnr_db", json_number(sum.sct_psnr_db)},
                                 {"ssim", sum.sct_ssim}};
    metrics_json["cbct_vs_ct"] = {{"mae_hu", sum.cbct_mae_hu},
                                  {"psnr_db", json_number(sum.cbct_psnr_db)},
                                  {"ssim", sum.cbct_ssim}};
    metrics_json["per_slice"] = per_slice;
    {
        std::ofstream out(metrics_path);
        out << metrics_json.dump(2) << "\n";
    }

    // Wall-clock timing lives apart from the deterministic report.
    {
        json timing{{"synthesis_seconds_total", seconds},
                    {"synthesis_seconds_per_slice", seconds / n},
                    {"threads", thread_count()}};
        std::ofstream out(fs::path(out_dir) / "timing.json");
        out << timing.dump(2) << "\n";
    }

    if (cfg.evaluation.dosimetry) {
        json dose;
        dose["spacing_mm"] = cfg.evaluation.dose_spacing_mm;
        dose["prescription_gy"] = cfg.evaluation.prescription_gy;
        dose["falloff_mm"] = cfg.evaluation.falloff_mm;
        dose["control"] = dose_report_for_slice(cfg, ds.ct_hu[0], ds.ct_hu[0], true);
        json rows = json::array();
        int limit = std::min(n, cfg.evaluation.dosimetry_slices);
        for (int i = 0; i < limit; ++i) {
            json row = dose_report_for_slice(cfg, ds.ct_hu[i], sct_hu[i], false);
            row["index"] = i;
            rows.push_back(row);
        }
        dose["slices"] = rows;
        std::ofstream out(fs::path(out_dir) / "dose_report.json");
        out << dose.dump(2) << "\n";
    }
    return sum;
}

void eval_all(const PipelineConfig& cfg, const std::string& out_dir, bool force) {
    fs::create_directories(out_dir);
    write_effective_config(cfg, out_dir);

    std::string dataset_dir = (fs::path(out_dir) / "dataset").string();
    std::string train_path = (fs::path(dataset_dir) / "train.hc3l").string();
    std::string test_path = (fs::path(dataset_dir) / "test.hc3l").string();
    if (force || !fs::exists(train_path) || !fs::exists(test_path))
        generate_phantom_dataset(cfg, dataset_dir, force);

    std::string ufe_path = (fs::path(out_dir) / "ufe.hc3l").string();
    if (force || !fs::exists(ufe_path)) run_stage1(cfg, train_path, ufe_path, force);

    std::string ldm_path = (fs::path(out_dir) / "ldm.hc3l").string();
    if (force || !fs::exists(ldm_path)) run_stage2(cfg, train_path, ufe_path, ldm_path, force);

    run_eval(cfg, test_path, ufe_path, ldm_path, (fs::path(out_dir) / "eval").string(),
             force);
}

}  // namespace hc3l
