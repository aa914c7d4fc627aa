#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "symboost/aggregator.hpp"
#include "symboost/chain.hpp"
#include "symboost/dataset.hpp"
#include "symboost/gbdt.hpp"
#include "symboost/metrics.hpp"
#include "symboost/provider.hpp"
#include "symboost/regions.hpp"
#include "symboost/tpe.hpp"

namespace symboost {

// Single JSON config document; every field except the data path and target
// column has a default. The resolved config (defaults included) is written
// into every bundle for provenance.
struct PipelineConfig {
    std::string data_path;
    std::string target_column;
    std::map<std::string, std::string> descriptions;
    double train_fraction = 0.8;
    std::uint64_t seed = 42;
    int workers = 1;
    std::string output_dir = "symboost_out";

    std::string legacy_source = "train";  // "train" | "score_file"
    std::string score_file;
    std::vector<std::string> legacy_features;  // optional subset for training
    GbdtConfig legacy_gbdt{100, 3, 0.1, 5, 0};

    CartConfig cart{3, 30};
    RegionConfig region{0.7, 0.15, 5, 0.01};

    ChainConfig chain;
    ProviderConfig provider;
    TpeConfig tpe;
    GateConfig gate;

    static PipelineConfig from_json_text(const std::string& text);
    static PipelineConfig from_file(const std::string& path);
    std::string to_json() const;
};

struct RunSummary {
    EvalReport legacy;
    EvalReport final;
    std::size_t n_regions = 0;
    std::size_t n_experts = 0;  // non-null
    std::string bundle_dir;
};

// Stage entry points; each reads the artifacts it needs from the bundle
// directory and writes its own, so stages can run independently.
void stage_train_legacy(const PipelineConfig& cfg);
void stage_regions(const PipelineConfig& cfg);
void stage_evolve(const PipelineConfig& cfg);
void stage_aggregate(const PipelineConfig& cfg);
RunSummary stage_eval(const PipelineConfig& cfg);

RunSummary run_pipeline(const PipelineConfig& cfg);

// Pure evaluation path: no optimizer, no provider, no network.
void predict_bundle(const std::string& bundle_dir, const std::string& input_csv,
                    const std::string& output_csv);

// small file helpers shared by the CLI
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace symboost
