#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iostream>

#include "xaichest/harness.hpp"
#include "xaichest/rng.hpp"

// The experiment suites mirror the evaluation studies: threshold fine-tuning,
// modulation order, channel frequency selectivity, RF nonlinearity, training
// SNR, conventional-estimator accuracy, and architecture reduction.

namespace xaichest::harness {

namespace fs = std::filesystem;

namespace {

double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

std::string modulation_name(Modulation m) {
    switch (m) {
        case Modulation::Qpsk: return "QPSK";
        case Modulation::Qam16: return "16QAM";
        case Modulation::Qam64: return "64QAM";
    }
    return "?";
}

std::string estimator_name(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::Dpa: return "DPA";
        case EstimatorKind::Sta: return "STA";
        case EstimatorKind::Trfi: return "TRFI";
    }
    return "?";
}

SweepConfig sweep_config_of(const ExperimentConfig& cfg, int workers) {
    SweepConfig sc;
    sc.gammas = cfg.gammas;
    sc.hidden = cfg.arch;
    sc.train = train_config_of(cfg);
    sc.link = make_link_config(cfg, cfg.sweep_frames);
    sc.snr_db = cfg.sweep_snr_db;
    sc.workers = workers;
    return sc;
}

// Pipeline + mask/histogram/sweep CSVs for one configuration variant.
struct VariantResult {
    TrainedPipeline pipe;
    SweepResult sweep;
};

VariantResult run_variant(const ExperimentConfig& cfg, const fs::path& dir, int workers,
                          std::vector<fs::path>& artifacts, bool with_sweep = true) {
    fs::create_directories(dir);
    VariantResult vr;
    vr.pipe = run_training_pipeline(cfg);
    FrameSpec spec = ieee80211p_frame_spec(cfg.frame_symbols);

    fs::path mask_path = dir / "mask.csv";
    write_mask_csv(mask_path, vr.pipe.mask, spec);
    artifacts.push_back(mask_path);

    Histogram hist = noise_weight_histogram(per_sample_masks(vr.pipe.n_model, vr.pipe.data.test),
                                            cfg.hist_bins, spec.pilot_indices);
    fs::path hist_path = dir / "histogram.csv";
    write_histogram_csv(hist_path, hist);
    artifacts.push_back(hist_path);

    if (with_sweep) {
        vr.sweep = threshold_sweep(vr.pipe.mask, vr.pipe.data.train, vr.pipe.data.test,
                                   sweep_config_of(cfg, workers));
        fs::path sweep_path = dir / "sweep.csv";
        write_sweep_csv(sweep_path, vr.sweep, cfg.digest);
        artifacts.push_back(sweep_path);
    }
    return vr;
}

// BER at one SNR for a model trained on the given relevant subset.
struct CandidateEval {
    double ber = 0.0;
    std::uint64_t bit_errors = 0;
    std::uint64_t total_bits = 0;
    double mse = 0.0;
};

CandidateEval eval_trained(const ExperimentConfig& cfg, const Mlp& model,
                           const std::vector<int>& relevant, double snr_db) {
    LinkConfig link = make_link_config(cfg, cfg.sweep_frames);
    link.model = &model;
    link.relevant = relevant;
    LinkStats s = run_link(link, snr_db);
    return {s.ber(), s.bit_errors, s.total_bits, s.mse_channel};
}

int suite_threshold(const CommandContext& ctx) {
    fs::path dir = ctx.out_dir / "suite_threshold";
    std::vector<fs::path> artifacts;
    VariantResult vr = run_variant(ctx.cfg, dir, ctx.workers, artifacts);
    if (vr.sweep.selected_index >= 0) {
        const SweepRow& sel = vr.sweep.rows[vr.sweep.selected_index];
        std::cout << "threshold: gamma* = " << sel.gamma << ", |Psi| = " << sel.n_relevant
                  << "\n";
    }
    CommandContext sub = ctx;
    sub.out_dir = dir;
    write_manifest(sub, "suite-threshold", 0.0, artifacts);
    return kExitOk;
}

int suite_modulation(const CommandContext& ctx, bool low_selectivity) {
    fs::path dir = ctx.out_dir / (low_selectivity ? "suite_selectivity" : "suite_modulation");
    fs::create_directories(dir);
    std::vector<fs::path> artifacts;
    fs::path summary_path = dir / "summary.csv";
    CsvWriter summary(summary_path,
                      {"modulation", "gamma_star", "n_relevant_star", "ber_full",
                       "ber_relevant_star", "ber_pilots_only", "mean_mask"});
    for (Modulation m : {Modulation::Qpsk, Modulation::Qam16, Modulation::Qam64}) {
        ExperimentConfig cfg = ctx.cfg;
        cfg.modulation = m;
        if (low_selectivity) cfg.profile = ProfileKind::VtvExpressway;
        VariantResult vr = run_variant(cfg, dir / modulation_name(m), ctx.workers, artifacts);

        // Pilots-only reference (the selectivity study's headline case).
        RelevanceSet pilots;
        pilots.gamma = 0.0;
        pilots.relevant = ieee80211p_frame_spec(cfg.frame_symbols).pilot_indices;
        Dataset pilots_train = filter_dataset(vr.pipe.data.train, pilots);
        TrainResult pilots_u = train_u(pilots_train, cfg.arch, train_config_of(cfg));
        CandidateEval pe = eval_trained(cfg, pilots_u.model, pilots.relevant, cfg.sweep_snr_db);

        double gamma_star = 0.0;
        int n_star = 0;
        double ber_star = vr.sweep.ber_full;
        if (vr.sweep.selected_index >= 0) {
            const SweepRow& sel = vr.sweep.rows[vr.sweep.selected_index];
            gamma_star = sel.gamma;
            n_star = sel.n_relevant;
            ber_star = sel.ber_relevant;
        }
        summary.row({modulation_name(m), fmt(gamma_star), fmt(n_star), fmt(vr.sweep.ber_full),
                     fmt(ber_star), fmt(pe.ber), fmt(mean_of(vr.pipe.mask.values))});
    }
    summary.close();
    artifacts.push_back(summary_path);
    CommandContext sub = ctx;
    sub.out_dir = dir;
    write_manifest(sub, low_selectivity ? "suite-selectivity" : "suite-modulation", 0.0,
                   artifacts);
    return kExitOk;
}

int suite_nonlinear(const CommandContext& ctx) {
    ExperimentConfig cfg = ctx.cfg;
    cfg.modulation = Modulation::Qpsk;
    cfg.profile = ProfileKind::VtvSdww;
    cfg.hpa.kind = HpaKind::Rapp;
    cfg.hpa.ibo_db = 2.0;
    fs::path dir = ctx.out_dir / "suite_nonlinear";
    std::vector<fs::path> artifacts;
    VariantResult vr = run_variant(cfg, dir, ctx.workers, artifacts);

    // How many pilots land in the lowest quartile of the aggregated weights.
    FrameSpec spec = ieee80211p_frame_spec(cfg.frame_symbols);
    std::vector<double> sorted = vr.pipe.mask.values;
    std::sort(sorted.begin(), sorted.end());
    double quartile = sorted[sorted.size() / 4];
    int pilots_low = 0;
    for (int p : spec.pilot_indices) {
        if (vr.pipe.mask.values[p] <= quartile) ++pilots_low;
    }
    fs::path summary_path = dir / "summary.csv";
    CsvWriter summary(summary_path, {"ibo_db", "pilots_in_lowest_quartile", "gamma_star",
                                     "n_relevant_star", "ber_full", "ber_relevant_star"});
    double gamma_star = 0.0, ber_star = vr.sweep.ber_full;
    int n_star = 0;
    if (vr.sweep.selected_index >= 0) {
        const SweepRow& sel = vr.sweep.rows[vr.sweep.selected_index];
        gamma_star = sel.gamma;
        n_star = sel.n_relevant;
        ber_star = sel.ber_relevant;
    }
    summary.row({fmt(cfg.hpa.ibo_db), fmt(pilots_low), fmt(gamma_star), fmt(n_star),
                 fmt(vr.sweep.ber_full), fmt(ber_star)});
    summary.close();
    artifacts.push_back(summary_path);
    CommandContext sub = ctx;
    sub.out_dir = dir;
    write_manifest(sub, "suite-nonlinear", 0.0, artifacts);
    return kExitOk;
}

int suite_train_snr(const CommandContext& ctx) {
    fs::path dir = ctx.out_dir / "suite_train_snr";
    fs::create_directories(dir);
    std::vector<fs::path> artifacts;
    fs::path summary_path = dir / "summary.csv";
    CsvWriter summary(summary_path, {"train_snr_db", "mean_mask", "mean_pilot_mask",
                                     "ber_at_top_snr"});
    FrameSpec spec = ieee80211p_frame_spec(ctx.cfg.frame_symbols);
    for (double snr = 0.0; snr <= 40.0; snr += 5.0) {
        ExperimentConfig cfg = ctx.cfg;
        cfg.profile = ProfileKind::VtvExpressway;
        cfg.modulation = Modulation::Qpsk;
        cfg.train_snr_db = snr;
        std::string tag = "snr" + fmt(snr);
        std::vector<fs::path> sub_artifacts;
        VariantResult vr = run_variant(cfg, dir / tag, ctx.workers, sub_artifacts,
                                       /*with_sweep=*/false);
        for (auto& a : sub_artifacts) artifacts.push_back(a);

        // BER of this U model across the evaluation grid.
        LinkConfig link = make_link_config(cfg, cfg.eval_frames);
        link.model = &vr.pipe.u_model;
        BerCurve curve = ber_curve(link, cfg.snr_grid_db, ctx.workers);
        curve.config_digest = cfg.digest;
        fs::path ber_path = dir / tag / "ber.csv";
        write_ber_csv(ber_path, curve);
        artifacts.push_back(ber_path);

        double pilot_mean = 0.0;
        for (int p : spec.pilot_indices) pilot_mean += vr.pipe.mask.values[p];
        pilot_mean /= static_cast<double>(spec.pilot_indices.size());
        summary.row({fmt(snr), fmt(mean_of(vr.pipe.mask.values)), fmt(pilot_mean),
                     fmt(curve.points.back().ber)});
    }
    summary.close();
    artifacts.push_back(summary_path);
    CommandContext sub = ctx;
    sub.out_dir = dir;
    write_manifest(sub, "suite-train-snr", 0.0, artifacts);
    return kExitOk;
}

int suite_estimators(const CommandContext& ctx) {
    fs::path dir = ctx.out_dir / "suite_estimators";
    fs::create_directories(dir);
    std::vector<fs::path> artifacts;
    fs::path summary_path = dir / "summary.csv";
    CsvWriter summary(summary_path, {"estimator", "mean_mask", "gamma_star", "n_relevant_star",
                                     "ber_full", "ber_relevant_star", "conv_ber_top_snr"});
    for (EstimatorKind kind : {EstimatorKind::Dpa, EstimatorKind::Sta, EstimatorKind::Trfi}) {
        ExperimentConfig cfg = ctx.cfg;
        cfg.estimator = kind;
        cfg.profile = ProfileKind::VtvSdww;
        cfg.modulation = Modulation::Qpsk;
        std::string tag = estimator_name(kind);
        VariantResult vr = run_variant(cfg, dir / tag, ctx.workers, artifacts);

        // Conventional (no-model) reference curve.
        LinkConfig conv = make_link_config(cfg, cfg.eval_frames);
        BerCurve conv_curve = ber_curve(conv, cfg.snr_grid_db, ctx.workers);
        conv_curve.config_digest = cfg.digest;
        fs::path conv_path = dir / tag / "conventional_ber.csv";
        write_ber_csv(conv_path, conv_curve);
        artifacts.push_back(conv_path);

        double gamma_star = 0.0, ber_star = vr.sweep.ber_full;
        int n_star = 0;
        if (vr.sweep.selected_index >= 0) {
            const SweepRow& sel = vr.sweep.rows[vr.sweep.selected_index];
            gamma_star = sel.gamma;
            n_star = sel.n_relevant;
            ber_star = sel.ber_relevant;
        }
        summary.row({tag, fmt(mean_of(vr.pipe.mask.values)), fmt(gamma_star), fmt(n_star),
                     fmt(vr.sweep.ber_full), fmt(ber_star), fmt(conv_curve.points.back().ber)});
    }
    summary.close();
    artifacts.push_back(summary_path);
    CommandContext sub = ctx;
    sub.out_dir = dir;
    write_manifest(sub, "suite-estimators", 0.0, artifacts);
    return kExitOk;
}

int suite_arch_reduction(const CommandContext& ctx) {
    ExperimentConfig cfg = ctx.cfg;
    cfg.profile = ProfileKind::VtvExpressway;
    cfg.modulation = Modulation::Qpsk;
    fs::path dir = ctx.out_dir / "suite_arch_reduction";
    fs::create_directories(dir);
    std::vector<fs::path> artifacts;

    DatasetPair data = generate_datasets(cfg);
    FrameSpec spec = ieee80211p_frame_spec(cfg.frame_symbols);
    RelevanceSet pilots;
    pilots.relevant = spec.pilot_indices;
    Dataset pilots_train = filter_dataset(data.train, pilots);
    Dataset pilots_test = filter_dataset(data.test, pilots);

    fs::path arch_path = dir / "arch.csv";
    CsvWriter csv(arch_path, {"arch", "input", "total_flops", "ber", "bit_errors", "total_bits",
                              "mse"});

    // Full-input baseline with the stock architecture.
    {
        TrainResult full = train_u(data.train, cfg.arch, train_config_of(cfg));
        CandidateEval e = eval_trained(cfg, full.model, {}, cfg.sweep_snr_db);
        std::string arch_tag;
        for (std::size_t i = 0; i < cfg.arch.size(); ++i) {
            if (i) arch_tag += '-';
            arch_tag += std::to_string(cfg.arch[i]);
        }
        csv.row({arch_tag, "full", fmt(count_flops(full.model.dims).total), fmt(e.ber),
                 fmt(e.bit_errors), fmt(e.total_bits), fmt(dataset_mse(full.model, data.test))});
    }
    const std::vector<std::vector<int>> archs = {{15, 15, 15}, {15, 15}, {15}, {10}, {5}};
    for (const auto& hidden : archs) {
        TrainResult t = train_u(pilots_train, hidden, train_config_of(cfg));
        CandidateEval e = eval_trained(cfg, t.model, pilots.relevant, cfg.sweep_snr_db);
        std::string arch_tag;
        for (std::size_t i = 0; i < hidden.size(); ++i) {
            if (i) arch_tag += '-';
            arch_tag += std::to_string(hidden[i]);
        }
        csv.row({arch_tag, "pilots", fmt(count_flops(t.model.dims).total), fmt(e.ber),
                 fmt(e.bit_errors), fmt(e.total_bits), fmt(dataset_mse(t.model, pilots_test))});
        fs::path model_path = dir / ("u_pilots_" + arch_tag + ".model");
        save_model(t.model, model_path);
        artifacts.push_back(model_path);
    }
    csv.close();
    artifacts.push_back(arch_path);
    CommandContext sub = ctx;
    sub.out_dir = dir;
    write_manifest(sub, "suite-arch-reduction", 0.0, artifacts);
    return kExitOk;
}

}  // namespace

int run_suite(const CommandContext& ctx, const std::string& name) {
    fs::create_directories(ctx.out_dir);
    auto t0 = std::chrono::steady_clock::now();
    int rc;
    if (name == "threshold") {
        rc = suite_threshold(ctx);
    } else if (name == "modulation") {
        rc = suite_modulation(ctx, false);
    } else if (name == "selectivity") {
        rc = suite_modulation(ctx, true);
    } else if (name == "nonlinear") {
        rc = suite_nonlinear(ctx);
    } else if (name == "train_snr") {
        rc = suite_train_snr(ctx);
    } else if (name == "estimators") {
        rc = suite_estimators(ctx);
    } else if (name == "arch_reduction") {
        rc = suite_arch_reduction(ctx);
    } else {
        throw ConfigError("unknown suite '" + name +
                          "' (threshold|modulation|selectivity|nonlinear|train_snr|estimators|"
                          "arch_reduction)");
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "suite " << name << " finished in " << secs << " s\n";
    return rc;
}

}  // namespace xaichest::harness
