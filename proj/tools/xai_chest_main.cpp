#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "xaichest/harness.hpp"

using namespace xaichest;
using namespace xaichest::harness;

int main(int argc, char** argv) {
    CLI::App app{"xai-chest: OFDM channel-estimation link simulator with "
                 "noise-mask input attribution"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string out_dir;
    int workers = 1;
    bool desk_scale = false;
    std::uint64_t seed_override = 0;
    bool seed_set = false;
    app.add_option("--config", config_path, "experiment config (JSON)")->required();
    app.add_option("--out", out_dir, "output directory (XAI_CHEST_OUT overrides)");
    app.add_option("--workers", workers, "parallel work items")->check(CLI::PositiveNumber);
    app.add_flag("--desk-scale", desk_scale, "cap frames/epochs for laptop-scale runs");
    app.add_option_function<std::uint64_t>(
           "--seed", [&](std::uint64_t v) { seed_override = v; seed_set = true; },
           "override master_seed");

    auto* gen = app.add_subcommand("gen-data", "simulate frames and write train/test caches");
    auto* tu = app.add_subcommand("train-u", "train the channel-estimation U model");
    auto* tn = app.add_subcommand("train-n", "train the noise-mask N model against a frozen U");
    auto* sw = app.add_subcommand("sweep", "threshold sweep with per-gamma retraining");
    auto* ber = app.add_subcommand("ber", "BER curve over the configured SNR grid");
    auto* fl = app.add_subcommand("flops", "dense-layer FLOP counts");
    auto* pr = app.add_subcommand("probe", "restricted-loss landscape scan");
    auto* su = app.add_subcommand("suite", "run a named experiment suite");

    std::string ber_model, ber_relevant;
    double ber_gamma = 0.0;
    ber->add_option("--model", ber_model, "saved model to attach to the link");
    ber->add_option("--relevant", ber_relevant, "comma-separated relevant subcarrier indices");
    ber->add_option("--gamma", ber_gamma, "derive the relevant set from n_model at this gamma");

    std::vector<std::string> flops_dims;
    fl->add_option("--dims", flops_dims, "comma-separated layer widths (repeatable)");

    std::string suite_name;
    su->add_option("--name", suite_name, "suite name")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        CommandContext ctx;
        ctx.cfg = load_config(config_path);
        if (seed_set) {
            ctx.cfg.master_seed = seed_override;
            ctx.cfg.raw["master_seed"] = seed_override;
            std::string dumped = ctx.cfg.raw.dump();
            ctx.cfg.digest = fnv1a_hex(dumped.data(), dumped.size());
        }
        if (desk_scale) apply_desk_scale(ctx.cfg);
        ctx.out_dir = resolve_out_dir(ctx.cfg, out_dir);
        ctx.workers = workers;

        if (gen->parsed()) return cmd_gen_data(ctx);
        if (tu->parsed()) return cmd_train_u(ctx);
        if (tn->parsed()) return cmd_train_n(ctx);
        if (sw->parsed()) return cmd_sweep(ctx);
        if (ber->parsed()) return cmd_ber(ctx, ber_model, ber_relevant, ber_gamma);
        if (fl->parsed()) return cmd_flops(ctx, flops_dims);
        if (pr->parsed()) return cmd_probe(ctx);
        if (su->parsed()) return run_suite(ctx, suite_name);
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const MissingArtifactError& e) {
        std::cerr << "dependency error: " << e.what() << "\n";
        return kExitMissing;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
}
