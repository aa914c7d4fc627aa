// symboost CLI: stage the residual-boosting pipeline or run it end to end.
//
//   symboost pipeline     --config cfg.json [--bundle DIR] [--seed N] [--workers N]
//   symboost train-legacy --config cfg.json [--bundle DIR] ...
//   symboost regions | evolve | aggregate | eval   (same flags)
//   symboost predict      --bundle DIR --input in.csv --output out.csv

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "symboost/pipeline.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string bundle;
    std::int64_t seed = -1;
    int workers = 0;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required = true) {
    auto* opt = cmd->add_option("--config", flags.config_path, "pipeline config JSON");
    if (config_required) opt->required();
    cmd->add_option("--bundle", flags.bundle, "artifact bundle directory (overrides output_dir)");
    cmd->add_option("--seed", flags.seed, "override the config seed");
    cmd->add_option("--workers", flags.workers, "override the chain worker count");
}

symboost::PipelineConfig resolve(const CommonFlags& flags) {
    auto cfg = symboost::PipelineConfig::from_file(flags.config_path);
    if (!flags.bundle.empty()) cfg.output_dir = flags.bundle;
    if (flags.seed >= 0) cfg.seed = static_cast<std::uint64_t>(flags.seed);
    if (flags.workers > 0) cfg.workers = flags.workers;
    return cfg;
}

int guarded(const char* stage, const std::function<void()>& fn) {
    try {
        fn();
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "[" << stage << "] error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"residual boosting with guarded symbolic experts"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string input_csv, output_csv;

    auto* cmd_pipeline = app.add_subcommand("pipeline", "run every stage end to end");
    add_common(cmd_pipeline, flags);
    auto* cmd_legacy = app.add_subcommand("train-legacy", "train or import the frozen model");
    add_common(cmd_legacy, flags);
    auto* cmd_regions = app.add_subcommand("regions", "mine hard regions from residuals");
    add_common(cmd_regions, flags);
    auto* cmd_evolve = app.add_subcommand("evolve", "run the per-region expert chains");
    add_common(cmd_evolve, flags);
    auto* cmd_aggregate = app.add_subcommand("aggregate", "train the gating model");
    add_common(cmd_aggregate, flags);
    auto* cmd_eval = app.add_subcommand("eval", "score legacy vs final on the held-out split");
    add_common(cmd_eval, flags);

    auto* cmd_predict = app.add_subcommand("predict", "batch-score a CSV from a bundle");
    cmd_predict->add_option("--bundle", flags.bundle, "artifact bundle directory")->required();
    cmd_predict->add_option("--input", input_csv, "input CSV")->required();
    cmd_predict->add_option("--output", output_csv, "output CSV")->required();

    CLI11_PARSE(app, argc, argv);

    if (cmd_predict->parsed())
        return guarded("predict",
                       [&] { symboost::predict_bundle(flags.bundle, input_csv, output_csv); });

    if (cmd_pipeline->parsed())
        return guarded("pipeline", [&] {
            auto summary = symboost::run_pipeline(resolve(flags));
            std::cout << symboost::render_comparison(summary.legacy, summary.final);
            std::cout << "regions: " << summary.n_regions
                      << "  experts: " << summary.n_experts << "\nbundle: "
                      << summary.bundle_dir << "\n";
        });
    if (cmd_legacy->parsed())
        return guarded("train-legacy",
                       [&] { symboost::stage_train_legacy(resolve(flags)); });
    if (cmd_regions->parsed())
        return guarded("regions", [&] { symboost::stage_regions(resolve(flags)); });
    if (cmd_evolve->parsed())
        return guarded("evolve", [&] { symboost::stage_evolve(resolve(flags)); });
    if (cmd_aggregate->parsed())
        return guarded("aggregate", [&] { symboost::stage_aggregate(resolve(flags)); });
    if (cmd_eval->parsed())
        return guarded("eval", [&] {
            auto summary = symboost::stage_eval(resolve(flags));
            std::cout << symboost::render_comparison(summary.legacy, summary.final);
        });
    return 1;
}
