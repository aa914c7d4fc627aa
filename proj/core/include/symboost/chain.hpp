#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "symboost/dataset.hpp"
#include "symboost/expr.hpp"
#include "symboost/legacy.hpp"
#include "symboost/provider.hpp"
#include "symboost/regions.hpp"
#include "symboost/tpe.hpp"

namespace symboost {

struct ChainConfig {
    int max_iterations = 12;      // T
    int success_target = 5;
    double tau0 = 0.002;
    double tau_decay = 0.5;
    std::size_t prompt_samples = 20;  // N
    std::size_t top_features = 8;     // m_top
    int repair_attempts = 3;          // R
    double boundary_window = 0.1;     // w, fraction of the train interdecile range
    std::uint64_t seed = 0;
};

// geometric annealing tolerance, t starts at 1
inline double annealing_tau(double tau0, double decay, int t) {
    double tau = tau0;
    for (int i = 1; i < t; ++i) tau *= decay;
    return tau;
}

// strict: a candidate exactly tau below the incumbent is rejected
inline bool accept_candidate(double metric, double previous_metric, double tau) {
    return metric > previous_metric - tau;
}

// f_0: a guarded constant with one free slot, zero outside the region
ExpertExpr init_seed(const Region& region, const std::vector<std::string>& schema);

// Mean logloss of the fused score sigmoid(base_logit + expr(x; theta)) over
// the fit rows; probabilities clipped to [1e-9, 1 - 1e-9].
std::function<double(const std::map<std::string, double>&)> inner_objective(
    const ExpertExpr& expr, const std::vector<double>& base_logits,
    const Dataset& data, const std::vector<std::size_t>& fit_rows);

struct IterationRecord {
    int t = 0;
    std::string candidate_text;
    std::string intent;
    std::vector<SearchDim> search_space;
    std::map<std::string, double> theta_star;
    double metric = 0.0;  // A_t; 0 when the iteration failed before evaluation
    bool evaluated = false;
    bool accepted = false;
    std::string reason;
};

struct ExpertArtifact {
    int region_id = -1;
    bool null_expert = true;
    std::string dsl_text;
    std::vector<ParamSlot> params;
    std::vector<IterationRecord> history;
    std::vector<double> metric_series;  // evaluated A_t values in order
    double final_metric = 0.0;

    std::string to_json() const;
    static ExpertArtifact from_json(const std::string& text);
};

// An expert ready for evaluation; null experts contribute exactly zero.
struct Expert {
    ExpertArtifact artifact;
    std::optional<ExpertExpr> expr;
    std::vector<double> param_defaults;  // resolved once at load

    static Expert from_artifact(ExpertArtifact a, const std::vector<std::string>& schema);
    double value(std::span<const double> row) const;
};

// One evolutionary chain over a single region: propose -> tune -> fuse ->
// annealed accept, with constraint history and one-shot boundary refinement.
class Chain {
public:
    Chain(Region region, const std::vector<Region>& all_regions, const Dataset& train,
          const Dataset& val, const FrozenModel& frozen, const FeatureStats& stats,
          Provider& provider, const ChainConfig& cfg, const TpeConfig& tpe_cfg);

    bool run_iteration();   // returns true while the chain wants more iterations
    ExpertArtifact run();   // iterate to success_target or T, then finalize

    // state inspection (tests)
    int iteration() const { return t_; }
    int successes() const { return successes_; }
    double metric() const { return metric_; }
    const ExpertExpr& seed() const { return seed_; }
    bool boundary_refined() const { return boundary_refined_; }
    double legacy_val_auc() const { return legacy_val_auc_; }
    const std::vector<IntervalClause>& allowed_box() const { return allowed_box_; }
    const std::vector<std::string>& transcript() const { return transcript_; }
    const std::vector<IterationRecord>& history() const { return history_; }

private:
    void log_line(const std::string& json_line) { transcript_.push_back(json_line); }
    void drain_provider_events(int t);
    SearchSpace assemble_space(ExpertExpr& expr, const CandidateExpert& cand,
                               bool refine_boundaries);
    std::vector<std::size_t> fit_rows_for(const ExpertExpr& expr,
                                          const SearchSpace& space) const;

    Region region_;
    const Dataset& train_;
    const Dataset& val_;
    const FrozenModel& frozen_;
    const FeatureStats& stats_;
    Provider& provider_;
    ChainConfig cfg_;
    TpeConfig tpe_cfg_;

    std::vector<double> train_logits_, val_logits_;
    std::vector<double> train_probas_;
    double legacy_val_auc_ = 0.0;
    std::vector<IntervalClause> allowed_box_;  // region box + refinement slack

    ExpertExpr seed_;
    double metric_ = 0.0;  // A_{t-1}
    int t_ = 0;
    int successes_ = 0;
    bool boundary_refined_ = false;
    std::vector<std::string> positive_constraints_, negative_constraints_;
    std::vector<IterationRecord> history_;
    std::vector<double> metric_series_;
    std::vector<std::string> transcript_;  // JSON lines
};

}  // namespace symboost
