#include "symboost/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "symboost/prob.hpp"

namespace fs = std::filesystem;

namespace symboost {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

// ---------------------------------------------------------------------------
// config

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, std::initializer_list<const char*> known,
                         const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok |= (it.key() == k);
        if (!ok)
            throw std::runtime_error("config: unknown key '" + it.key() + "' in " + where);
    }
}

GbdtConfig gbdt_from_json(const json& j, GbdtConfig base) {
    reject_unknown_keys(j, {"n_trees", "max_depth", "learning_rate", "min_leaf"}, "gbdt");
    base.n_trees = j.value("n_trees", base.n_trees);
    base.max_depth = j.value("max_depth", base.max_depth);
    base.learning_rate = j.value("learning_rate", base.learning_rate);
    base.min_leaf = j.value("min_leaf", base.min_leaf);
    return base;
}

json gbdt_to_json(const GbdtConfig& c) {
    return {{"n_trees", c.n_trees},
            {"max_depth", c.max_depth},
            {"learning_rate", c.learning_rate},
            {"min_leaf", c.min_leaf}};
}

}  // namespace

PipelineConfig PipelineConfig::from_json_text(const std::string& text) {
    json j = json::parse(text);
    reject_unknown_keys(j,
                        {"data", "split", "seed", "workers", "output_dir", "legacy",
                         "regions", "chain", "provider", "tpe", "gate"},
                        "config root");
    PipelineConfig c;

    const json& data = j.at("data");
    reject_unknown_keys(data, {"path", "target_column", "descriptions"}, "data");
    c.data_path = data.at("path").get<std::string>();
    c.target_column = data.at("target_column").get<std::string>();
    if (data.contains("descriptions"))
        c.descriptions =
            data.at("descriptions").get<std::map<std::string, std::string>>();

    if (j.contains("split")) {
        reject_unknown_keys(j["split"], {"train_fraction"}, "split");
        c.train_fraction = j["split"].value("train_fraction", c.train_fraction);
    }
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
    c.output_dir = j.value("output_dir", c.output_dir);

    if (j.contains("legacy")) {
        const json& l = j["legacy"];
        reject_unknown_keys(l, {"source", "score_file", "features", "gbdt"}, "legacy");
        c.legacy_source = l.value("source", c.legacy_source);
        c.score_file = l.value("score_file", c.score_file);
        if (l.contains("features"))
            c.legacy_features = l.at("features").get<std::vector<std::string>>();
        if (l.contains("gbdt")) c.legacy_gbdt = gbdt_from_json(l["gbdt"], c.legacy_gbdt);
    }
    if (c.legacy_source != "train" && c.legacy_source != "score_file")
        throw std::runtime_error("config: legacy.source must be 'train' or 'score_file'");

    if (j.contains("regions")) {
        const json& r = j["regions"];
        reject_unknown_keys(r,
                            {"max_depth", "min_leaf", "lambda", "c_min", "max_regions",
                             "min_mean_abs_residual"},
                            "regions");
        c.cart.max_depth = r.value("max_depth", c.cart.max_depth);
        c.cart.min_leaf = r.value("min_leaf", c.cart.min_leaf);
        c.region.lambda = r.value("lambda", c.region.lambda);
        c.region.c_min = r.value("c_min", c.region.c_min);
        c.region.max_regions = r.value("max_regions", c.region.max_regions);
        c.region.min_mean_abs_residual =
            r.value("min_mean_abs_residual", c.region.min_mean_abs_residual);
    }

    if (j.contains("chain")) {
        const json& ch = j["chain"];
        reject_unknown_keys(ch,
                            {"iterations", "success_target", "tau0", "tau_decay",
                             "prompt_samples", "top_features", "repair_attempts",
                             "boundary_window"},
                            "chain");
        c.chain.max_iterations = ch.value("iterations", c.chain.max_iterations);
        c.chain.success_target = ch.value("success_target", c.chain.success_target);
        c.chain.tau0 = ch.value("tau0", c.chain.tau0);
        c.chain.tau_decay = ch.value("tau_decay", c.chain.tau_decay);
        c.chain.prompt_samples = ch.value("prompt_samples", c.chain.prompt_samples);
        c.chain.top_features = ch.value("top_features", c.chain.top_features);
        c.chain.repair_attempts = ch.value("repair_attempts", c.chain.repair_attempts);
        c.chain.boundary_window = ch.value("boundary_window", c.chain.boundary_window);
    }

    if (j.contains("provider")) {
        const json& p = j["provider"];
        reject_unknown_keys(p, {"kind", "llm"}, "provider");
        c.provider.kind = p.value("kind", c.provider.kind);
        if (p.contains("llm")) {
            const json& l = p["llm"];
            reject_unknown_keys(
                l,
                {"base_url", "model", "temperature", "api_key_env", "timeout_seconds",
                 "max_retries"},
                "provider.llm");
            c.provider.llm.base_url = l.value("base_url", c.provider.llm.base_url);
            c.provider.llm.model = l.value("model", c.provider.llm.model);
            c.provider.llm.temperature = l.value("temperature", c.provider.llm.temperature);
            c.provider.llm.api_key_env = l.value("api_key_env", c.provider.llm.api_key_env);
            c.provider.llm.timeout_seconds =
                l.value("timeout_seconds", c.provider.llm.timeout_seconds);
            c.provider.llm.max_retries = l.value("max_retries", c.provider.llm.max_retries);
        }
    }

    if (j.contains("tpe")) {
        const json& t = j["tpe"];
        reject_unknown_keys(t, {"trials", "n_startup", "gamma", "n_candidates"}, "tpe");
        c.tpe.max_trials = t.value("trials", c.tpe.max_trials);
        c.tpe.n_startup = t.value("n_startup", c.tpe.n_startup);
        c.tpe.gamma = t.value("gamma", c.tpe.gamma);
        c.tpe.n_candidates = t.value("n_candidates", c.tpe.n_candidates);
    }

    if (j.contains("gate")) {
        const json& g = j["gate"];
        reject_unknown_keys(g, {"fit_fraction", "gbdt"}, "gate");
        c.gate.fit_fraction = g.value("fit_fraction", c.gate.fit_fraction);
        if (g.contains("gbdt")) c.gate.gbdt = gbdt_from_json(g["gbdt"], c.gate.gbdt);
    }

    return c;
}

PipelineConfig PipelineConfig::from_file(const std::string& path) {
    return from_json_text(read_file(path));
}

std::string PipelineConfig::to_json() const {
    json j;
    j["data"] = {{"path", data_path},
                 {"target_column", target_column},
                 {"descriptions", descriptions}};
    j["split"] = {{"train_fraction", train_fraction}};
    j["seed"] = seed;
    j["workers"] = workers;
    j["output_dir"] = output_dir;
    j["legacy"] = {{"source", legacy_source},
                   {"score_file", score_file},
                   {"features", legacy_features},
                   {"gbdt", gbdt_to_json(legacy_gbdt)}};
    j["regions"] = {{"max_depth", cart.max_depth},
                    {"min_leaf", cart.min_leaf},
                    {"lambda", region.lambda},
                    {"c_min", region.c_min},
                    {"max_regions", region.max_regions},
                    {"min_mean_abs_residual", region.min_mean_abs_residual}};
    j["chain"] = {{"iterations", chain.max_iterations},
                  {"success_target", chain.success_target},
                  {"tau0", chain.tau0},
                  {"tau_decay", chain.tau_decay},
                  {"prompt_samples", chain.prompt_samples},
                  {"top_features", chain.top_features},
                  {"repair_attempts", chain.repair_attempts},
                  {"boundary_window", chain.boundary_window}};
    j["provider"] = {{"kind", provider.kind},
                     {"llm",
                      {{"base_url", provider.llm.base_url},
                       {"model", provider.llm.model},
                       {"temperature", provider.llm.temperature},
                       {"api_key_env", provider.llm.api_key_env},
                       {"timeout_seconds", provider.llm.timeout_seconds},
                       {"max_retries", provider.llm.max_retries}}}};
    j["tpe"] = {{"trials", tpe.max_trials},
                {"n_startup", tpe.n_startup},
                {"gamma", tpe.gamma},
                {"n_candidates", tpe.n_candidates}};
    j["gate"] = {{"fit_fraction", gate.fit_fraction}, {"gbdt", gbdt_to_json(gate.gbdt)}};
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// shared stage plumbing

namespace {

struct Paths {
    fs::path dir;
    explicit Paths(const std::string& d) : dir(d) {}
    std::string config() const { return (dir / "config_resolved.json").string(); }
    std::string schema() const { return (dir / "schema.json").string(); }
    std::string legacy() const { return (dir / "legacy.json").string(); }
    std::string regions() const { return (dir / "regions.json").string(); }
    std::string chain(int id) const {
        return (dir / "chains" / ("chain_" + std::to_string(id) + ".jsonl")).string();
    }
    std::string expert(int id) const {
        return (dir / "experts" / ("expert_" + std::to_string(id) + ".json")).string();
    }
    std::string experts_dir() const { return (dir / "experts").string(); }
    std::string gate() const { return (dir / "gate.json").string(); }
    std::string eval_json() const { return (dir / "eval.json").string(); }
    std::string eval_text() const { return (dir / "eval.txt").string(); }
    std::string scores() const { return (dir / "scores.csv").string(); }
};

struct Loaded {
    Dataset full;
    Dataset train;
    Dataset val;
};

Loaded load_splits(const PipelineConfig& cfg) {
    Loaded out;
    out.full = load_csv(cfg.data_path, cfg.target_column, cfg.descriptions);
    auto [train, val] = split(out.full, cfg.train_fraction, cfg.seed);
    out.train = std::move(train);
    out.val = std::move(val);
    return out;
}

FrozenModel build_or_load_legacy(const PipelineConfig& cfg, const Paths& paths,
                                 const Dataset& train) {
    if (fs::exists(paths.legacy())) return FrozenModel::from_json(read_file(paths.legacy()));
    if (cfg.legacy_source == "score_file") return FrozenModel::from_score_file(cfg.score_file);

    // optional feature subset lets the legacy model see fewer columns than
    // the engine does
    std::vector<std::string> names = cfg.legacy_features.empty() ? train.feature_names
                                                                 : cfg.legacy_features;
    std::vector<std::size_t> cols;
    for (const auto& n : names) {
        int idx = train.feature_index(n);
        if (idx < 0) throw std::runtime_error("legacy: unknown feature '" + n + "'");
        cols.push_back(static_cast<std::size_t>(idx));
    }
    std::vector<double> sub(train.n_rows * cols.size());
    for (std::size_t r = 0; r < train.n_rows; ++r)
        for (std::size_t c = 0; c < cols.size(); ++c)
            sub[r * cols.size() + c] = train.at(r, cols[c]);
    MatrixView view{sub.data(), train.n_rows, cols.size()};
    GbdtConfig gcfg = cfg.legacy_gbdt;
    gcfg.seed = mix_seed(cfg.seed, 1);
    return FrozenModel::from_gbdt(GbdtModel::train(view, train.target, names, gcfg));
}

std::vector<Expert> load_experts(const Paths& paths,
                                 const std::vector<std::string>& schema) {
    std::vector<Expert> experts;
    if (!fs::exists(paths.experts_dir())) return experts;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(paths.experts_dir()))
        if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files)
        experts.push_back(
            Expert::from_artifact(ExpertArtifact::from_json(read_file(f.string())), schema));
    std::sort(experts.begin(), experts.end(), [](const Expert& a, const Expert& b) {
        return a.artifact.region_id < b.artifact.region_id;
    });
    return experts;
}

std::string render_scores_csv(const Dataset& data, const std::vector<double>& legacy,
                              const std::vector<double>& final) {
    std::string out = "row_id,legacy_proba,final_proba\n";
    char buf[80];
    for (std::size_t r = 0; r < data.n_rows; ++r) {
        std::snprintf(buf, sizeof(buf), ",%.17g,%.17g\n", legacy[r], final[r]);
        out += data.row_ids[r];
        out += buf;
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// stages

void stage_train_legacy(const PipelineConfig& cfg) {
    Paths paths(cfg.output_dir);
    Loaded d = load_splits(cfg);
    write_file(paths.config(), cfg.to_json());
    write_file(paths.schema(), schema_to_json(d.full));
    FrozenModel frozen =
        cfg.legacy_source == "score_file"
            ? FrozenModel::from_score_file(cfg.score_file)
            : [&] {
                  // force retraining even if an artifact exists
                  if (fs::exists(paths.legacy())) fs::remove(paths.legacy());
                  return build_or_load_legacy(cfg, paths, d.train);
              }();
    write_file(paths.legacy(), frozen.to_json());
}

void stage_regions(const PipelineConfig& cfg) {
    Paths paths(cfg.output_dir);
    Loaded d = load_splits(cfg);
    FrozenModel frozen = build_or_load_legacy(cfg, paths, d.train);

    const std::vector<double> r = residuals(frozen, d.train);
    std::vector<double> abs_r(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) abs_r[i] = std::fabs(r[i]);
    CartTree cart = fit_cart(d.train, abs_r, cfg.cart);
    std::vector<Region> regions = score_and_select(cart, d.train, cfg.region);
    write_file(paths.regions(), regions_to_json(regions));
}

void stage_evolve(const PipelineConfig& cfg) {
    Paths paths(cfg.output_dir);
    Loaded d = load_splits(cfg);
    FrozenModel frozen = build_or_load_legacy(cfg, paths, d.train);
    std::vector<Region> regions =
        regions_from_json(read_file(paths.regions()), d.train.feature_names);
    FeatureStats stats = feature_stats(d.train, d.val);

    std::vector<ExpertArtifact> artifacts(regions.size());
    std::vector<std::vector<std::string>> transcripts(regions.size());

    // independent workers over read-only inputs; join in region-id order so
    // the worker count never changes outputs
    const std::size_t n_workers = std::max(
        1, std::min<int>(cfg.workers, static_cast<int>(regions.size())));
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= regions.size()) break;
            auto provider = make_provider(cfg.provider);
            ChainConfig ccfg = cfg.chain;
            ccfg.seed = mix_seed(cfg.seed, 100 + static_cast<std::uint64_t>(regions[i].id));
            Chain chain(regions[i], regions, d.train, d.val, frozen, stats, *provider,
                        ccfg, cfg.tpe);
            artifacts[i] = chain.run();
            transcripts[i] = chain.transcript();
        }
    };
    if (n_workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    for (std::size_t i = 0; i < regions.size(); ++i) {
        write_file(paths.expert(regions[i].id), artifacts[i].to_json());
        std::string lines;
        for (const auto& l : transcripts[i]) lines += l + "\n";
        write_file(paths.chain(regions[i].id), lines);
    }
}

void stage_aggregate(const PipelineConfig& cfg) {
    Paths paths(cfg.output_dir);
    Loaded d = load_splits(cfg);
    FrozenModel frozen = build_or_load_legacy(cfg, paths, d.train);
    std::vector<Expert> experts = load_experts(paths, d.train.feature_names);

    bool any_live = false;
    for (const auto& e : experts) any_live |= !e.artifact.null_expert;

    GateModel gate;
    if (!any_live) {
        // nothing to arbitrate: pass the frozen model through untouched
        gate.fallback = true;
        gate.feature_layout = {};
    } else {
        GateConfig gcfg = cfg.gate;
        gcfg.seed = mix_seed(cfg.seed, 2);
        gate = train_gate(d.train, frozen, experts, gcfg);
    }
    write_file(paths.gate(), gate.to_json());
}

RunSummary stage_eval(const PipelineConfig& cfg) {
    Paths paths(cfg.output_dir);
    Loaded d = load_splits(cfg);
    FrozenModel frozen = build_or_load_legacy(cfg, paths, d.train);
    std::vector<Expert> experts = load_experts(paths, d.train.feature_names);
    GateModel gate = GateModel::from_json(read_file(paths.gate()));

    auto legacy_probas = [&](const Dataset& rows) {
        std::vector<double> logits = frozen.base_logits(rows);
        std::vector<double> p(logits.size());
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = sigmoid(logits[i]);
        return p;
    };

    const std::vector<double> val_legacy = legacy_probas(d.val);
    const std::vector<double> val_final = predict_final(d.val, frozen, experts, gate);

    RunSummary summary;
    summary.legacy = evaluate_scores(d.val.target, val_legacy);
    summary.final = evaluate_scores(d.val.target, val_final);
    if (fs::exists(paths.regions()))
        summary.n_regions =
            regions_from_json(read_file(paths.regions()), d.train.feature_names).size();
    for (const auto& e : experts) summary.n_experts += !e.artifact.null_expert;
    summary.bundle_dir = cfg.output_dir;

    write_file(paths.eval_json(), comparison_json(summary.legacy, summary.final));
    write_file(paths.eval_text(), render_comparison(summary.legacy, summary.final));

    // full-data score table; `predict` on the original file must reproduce it
    const std::vector<double> full_legacy = legacy_probas(d.full);
    const std::vector<double> full_final = predict_final(d.full, frozen, experts, gate);
    write_file(paths.scores(), render_scores_csv(d.full, full_legacy, full_final));
    return summary;
}

RunSummary run_pipeline(const PipelineConfig& cfg) {
    stage_train_legacy(cfg);
    stage_regions(cfg);
    stage_evolve(cfg);
    stage_aggregate(cfg);
    return stage_eval(cfg);
}

void predict_bundle(const std::string& bundle_dir, const std::string& input_csv,
                    const std::string& output_csv) {
    Paths paths(bundle_dir);
    std::string target_column;
    std::vector<ColumnSchema> schema =
        schema_from_json(read_file(paths.schema()), &target_column);
    Dataset data = load_csv_with_schema(input_csv, schema, target_column);
    FrozenModel frozen = FrozenModel::from_json(read_file(paths.legacy()));
    std::vector<Expert> experts = load_experts(paths, data.feature_names);
    GateModel gate = GateModel::from_json(read_file(paths.gate()));

    std::vector<double> logits = frozen.base_logits(data);
    std::vector<double> legacy(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) legacy[i] = sigmoid(logits[i]);
    std::vector<double> final = predict_final(data, frozen, experts, gate);
    write_file(output_csv, render_scores_csv(data, legacy, final));
}

}  // namespace symboost
