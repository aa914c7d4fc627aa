#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "symboost/chain.hpp"
#include "symboost/dataset.hpp"
#include "symboost/gbdt.hpp"
#include "symboost/legacy.hpp"

namespace symboost {

// (score, score - base_proba, score / (base_proba + eps)); an inactive
// expert contributes (0, -base_proba, 0).
struct InteractionVector {
    double score = 0.0;
    double delta = 0.0;
    double ratio = 0.0;
};

inline constexpr double kRatioEps = 1e-6;

InteractionVector interaction_vector(double expert_output, double base_proba);

struct ContextMatrix {
    std::vector<double> values;  // row-major
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<std::string> names;  // [x..., base_proba, expK_{score,delta,ratio}...]

    MatrixView view() const { return {values.data(), n_rows, n_cols}; }
};

// Context space of width d + 1 + 3K; regional disjointness keeps at most one
// expert score nonzero per row.
ContextMatrix build_context(const Dataset& data, const std::vector<double>& base_probas,
                            const std::vector<Expert>& experts);

struct GateConfig {
    double fit_fraction = 0.75;  // split of the training rows into fit/val folds
    GbdtConfig gbdt{50, 3, 0.1, 5, 0};
    std::uint64_t seed = 0;
};

struct GateModel {
    GbdtModel model;
    std::vector<std::string> feature_layout;
    bool fallback = false;  // pass through sigmoid(base_logit) instead of gating
    double gate_fold_auc = 0.0;
    double legacy_fold_auc = 0.0;

    std::string to_json() const;
    static GateModel from_json(const std::string& text);
};

// Trains the gate on a held-out fold of the training rows and keeps it only
// if it beats the legacy model on the remaining safety fold.
GateModel train_gate(const Dataset& train, const FrozenModel& frozen,
                     const std::vector<Expert>& experts, const GateConfig& cfg);

std::vector<double> predict_final(const Dataset& rows, const FrozenModel& frozen,
                                  const std::vector<Expert>& experts,
                                  const GateModel& gate);

}  // namespace symboost
