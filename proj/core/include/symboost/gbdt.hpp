#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "symboost/prob.hpp"
#include "symboost/tree.hpp"

namespace symboost {

struct GbdtConfig {
    int n_trees = 100;
    int max_depth = 3;
    double learning_rate = 0.1;
    std::size_t min_leaf = 5;
    std::uint64_t seed = 0;  // reserved; splits are fully deterministic
};

// Gradient boosting with logistic loss. Trees fit the negative gradient
// (y - p) with exact greedy variance-reduction splits; no subsampling.
class GbdtModel {
public:
    GbdtModel() = default;

    static GbdtModel train(const MatrixView& x, const std::vector<int>& y,
                           const std::vector<std::string>& feature_names,
                           const GbdtConfig& cfg);

    double predict_logit(std::span<const double> row) const;
    double predict_proba(std::span<const double> row) const;
    std::vector<double> predict_logits(const MatrixView& x) const;

    double initial_logit() const { return initial_logit_; }
    const std::vector<RegressionTree>& trees() const { return trees_; }
    const GbdtConfig& config() const { return config_; }
    const std::vector<std::string>& feature_names() const { return feature_names_; }

    // flat-array JSON artifact, byte-stable for fixed inputs
    std::string to_json() const;
    static GbdtModel from_json(const std::string& text);

private:
    double initial_logit_ = 0.0;
    std::vector<RegressionTree> trees_;
    GbdtConfig config_;
    std::vector<std::string> feature_names_;
};

}  // namespace symboost
