#include "symboost/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "support/synth.hpp"

using namespace symboost;
namespace fs = std::filesystem;

namespace {

PipelineConfig small_config(const std::string& dir, const std::string& csv) {
    PipelineConfig cfg;
    cfg.data_path = csv;
    cfg.target_column = "label";
    cfg.seed = 42;
    cfg.output_dir = dir;
    cfg.legacy_gbdt.n_trees = 60;
    cfg.legacy_features = {"x1", "x2"};
    cfg.cart.max_depth = 2;
    cfg.cart.min_leaf = 40;
    cfg.region.max_regions = 3;
    cfg.chain.max_iterations = 5;
    cfg.chain.success_target = 3;
    cfg.tpe.max_trials = 40;
    return cfg;
}

std::string prepare_data(const std::string& tag, std::size_t n = 1600) {
    const std::string dir = synth::temp_dir(tag);
    Dataset d = synth::oracle_dataset(n, 77);
    const std::string csv = dir + "/data.csv";
    save_csv(d, csv);
    return csv;
}

std::vector<std::string> bundle_files(const std::string& dir) {
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir).string());
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace

TEST_CASE("config parsing applies defaults and rejects unknown keys") {
    const std::string text = R"({
        "data": {"path": "d.csv", "target_column": "y"},
        "seed": 7,
        "provider": {"kind": "mock"}
    })";
    PipelineConfig cfg = PipelineConfig::from_json_text(text);
    CHECK(cfg.data_path == "d.csv");
    CHECK(cfg.seed == 7);
    CHECK(cfg.train_fraction == doctest::Approx(0.8));
    CHECK(cfg.legacy_gbdt.n_trees == 100);
    CHECK(cfg.chain.max_iterations == 12);
    CHECK(cfg.chain.success_target == 5);
    CHECK(cfg.chain.tau0 == doctest::Approx(0.002));
    CHECK(cfg.tpe.max_trials == 100);
    CHECK(cfg.gate.fit_fraction == doctest::Approx(0.75));
    CHECK(cfg.region.max_regions == 5);
    CHECK(cfg.provider.llm.temperature == doctest::Approx(0.1));

    CHECK_THROWS(PipelineConfig::from_json_text(
        R"({"data": {"path": "d", "target_column": "y"}, "typo_key": 1})"));
    CHECK_THROWS(PipelineConfig::from_json_text(R"({"data": {"path": "d"}})"));

    // the resolved config names every default
    const std::string resolved = cfg.to_json();
    for (const char* key :
         {"train_fraction", "tau0", "tau_decay", "prompt_samples", "repair_attempts",
          "boundary_window", "n_startup", "gamma", "n_candidates", "fit_fraction",
          "min_mean_abs_residual", "temperature", "api_key_env"})
        CHECK_MESSAGE(resolved.find(key) != std::string::npos, key);
}

TEST_CASE("full pipeline produces a complete, self-consistent bundle") {
    const std::string csv = prepare_data("pipe_full");
    const std::string dir = synth::temp_dir("pipe_full_out");
    PipelineConfig cfg = small_config(dir, csv);
    RunSummary summary = run_pipeline(cfg);

    for (const char* f : {"config_resolved.json", "schema.json", "legacy.json",
                          "regions.json", "gate.json", "eval.json", "eval.txt",
                          "scores.csv"})
        CHECK_MESSAGE(fs::exists(fs::path(dir) / f), f);
    CHECK(summary.n_regions >= 1);
    CHECK(fs::exists(fs::path(dir) / "experts" / "expert_0.json"));
    CHECK(fs::exists(fs::path(dir) / "chains" / "chain_0.jsonl"));
    CHECK(summary.legacy.n == summary.final.n);

    // the stored eval report reflects the summary
    const std::string eval = read_file(dir + "/eval.json");
    CHECK(eval.find("\"auc\"") != std::string::npos);
}

TEST_CASE("pipeline runs are byte-identical for fixed config and seeds") {
    const std::string csv = prepare_data("pipe_det");
    const std::string dir1 = synth::temp_dir("pipe_det1");
    const std::string dir2 = synth::temp_dir("pipe_det2");
    PipelineConfig cfg1 = small_config(dir1, csv);
    PipelineConfig cfg2 = small_config(dir2, csv);
    run_pipeline(cfg1);
    run_pipeline(cfg2);

    auto files1 = bundle_files(dir1);
    auto files2 = bundle_files(dir2);
    REQUIRE(files1 == files2);
    for (const auto& f : files1) {
        if (f == "config_resolved.json") continue;  // contains the output dir
        CHECK_MESSAGE(read_file(dir1 + "/" + f) == read_file(dir2 + "/" + f), f);
    }
}

TEST_CASE("worker count does not change outputs") {
    const std::string csv = prepare_data("pipe_workers");
    const std::string dir1 = synth::temp_dir("pipe_w1");
    const std::string dir2 = synth::temp_dir("pipe_w2");
    PipelineConfig cfg1 = small_config(dir1, csv);
    cfg1.workers = 1;
    PipelineConfig cfg2 = small_config(dir2, csv);
    cfg2.workers = 4;
    run_pipeline(cfg1);
    run_pipeline(cfg2);
    for (const auto& f : bundle_files(dir1)) {
        if (f == "config_resolved.json") continue;  // records the worker count
        CHECK_MESSAGE(read_file(dir1 + "/" + f) == read_file(dir2 + "/" + f), f);
    }
}

TEST_CASE("a perfect legacy model degenerates to a pass-through bundle") {
    const std::string work = synth::temp_dir("pipe_perfect");
    Dataset d = synth::oracle_dataset(900, 31);
    const std::string csv = work + "/data.csv";
    save_csv(d, csv);

    // score file that already knows every label
    const std::string scores = work + "/scores.csv";
    {
        std::ofstream out(scores);
        out << "row_id,probability\n";
        for (std::size_t r = 0; r < d.n_rows; ++r)
            out << d.row_ids[r] << ',' << d.target[r] << "\n";
    }

    PipelineConfig cfg = small_config(work + "/out", csv);
    cfg.legacy_source = "score_file";
    cfg.score_file = scores;
    cfg.legacy_features.clear();
    RunSummary summary = run_pipeline(cfg);
    CHECK(summary.n_regions == 0);
    CHECK(summary.n_experts == 0);
    CHECK(summary.final.auc == doctest::Approx(summary.legacy.auc).epsilon(1e-15));
    CHECK(summary.final.logloss == doctest::Approx(summary.legacy.logloss).epsilon(1e-15));

    // gate fell back to pass-through
    CHECK(read_file(work + "/out/gate.json").find("\"fallback\": true") !=
          std::string::npos);
}

TEST_CASE("a provider that never parses leaves the legacy model untouched") {
    const std::string csv = prepare_data("pipe_failing", 1200);
    const std::string dir = synth::temp_dir("pipe_failing_out");
    PipelineConfig cfg = small_config(dir, csv);
    cfg.provider.kind = "failing";
    RunSummary summary = run_pipeline(cfg);
    CHECK(summary.n_experts == 0);
    CHECK(summary.final.auc == doctest::Approx(summary.legacy.auc).epsilon(1e-15));

    // every chain logged only rejections
    const std::string transcript = read_file(dir + "/chains/chain_0.jsonl");
    CHECK(transcript.find("\"accepted\":true") == std::string::npos);
}

TEST_CASE("predict reproduces the bundle score table exactly") {
    const std::string csv = prepare_data("pipe_predict");
    const std::string dir = synth::temp_dir("pipe_predict_out");
    PipelineConfig cfg = small_config(dir, csv);
    // a dead llm endpoint in the config must not matter on the predict path
    cfg.provider.llm.base_url = "http://127.0.0.1:1/v1";
    run_pipeline(cfg);

    const std::string out_csv = dir + "/predict_out.csv";
    predict_bundle(dir, csv, out_csv);
    const std::string recorded = read_file(dir + "/scores.csv");
    const std::string predicted = read_file(out_csv);
    CHECK(predicted == recorded);  // bit-identical, stronger than 1e-12

    // input missing a feature column names it
    Dataset d = synth::oracle_dataset(10, 1);
    d.feature_names[2] = "x3_renamed";
    const std::string bad_csv = dir + "/bad.csv";
    save_csv(d, bad_csv);
    try {
        predict_bundle(dir, bad_csv, dir + "/nope.csv");
        CHECK(false);
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("x3") != std::string::npos);
    }
}

TEST_CASE("fallback bundles predict the legacy probabilities columnwise") {
    const std::string csv = prepare_data("pipe_fb", 1200);
    const std::string dir = synth::temp_dir("pipe_fb_out");
    PipelineConfig cfg = small_config(dir, csv);
    cfg.provider.kind = "failing";  // all-null experts force the pass-through gate
    run_pipeline(cfg);
    const std::string out_csv = dir + "/p.csv";
    predict_bundle(dir, csv, out_csv);
    std::ifstream in(out_csv);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        CHECK(line.substr(c1 + 1, c2 - c1 - 1) == line.substr(c2 + 1));
    }
}

TEST_CASE("aggregation rerun from saved artifacts reproduces the gate") {
    const std::string csv = prepare_data("pipe_stage");
    const std::string dir = synth::temp_dir("pipe_stage_out");
    PipelineConfig cfg = small_config(dir, csv);
    run_pipeline(cfg);
    const std::string gate1 = read_file(dir + "/gate.json");
    stage_aggregate(cfg);  // consumes experts/ from disk
    CHECK(read_file(dir + "/gate.json") == gate1);

    const std::string eval1 = read_file(dir + "/eval.json");
    stage_eval(cfg);
    CHECK(read_file(dir + "/eval.json") == eval1);
}
