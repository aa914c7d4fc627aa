#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "symboost/dataset.hpp"
#include "symboost/gbdt.hpp"

namespace symboost {

// Read-only wrapper around the deployed scorer. Construction is the only
// mutation path; all queries are const and thread-safe.
class FrozenModel {
public:
    static FrozenModel from_gbdt(GbdtModel model);
    // CSV with header `row_id,probability`; probabilities are clipped to
    // [1e-6, 1 - 1e-6] before the logit transform
    static FrozenModel from_score_file(const std::string& path);

    double base_logit(const Dataset& data, std::size_t row) const;
    double base_proba(const Dataset& data, std::size_t row) const;
    std::vector<double> base_logits(const Dataset& data) const;

    std::uint64_t fingerprint() const { return fingerprint_; }
    bool is_gbdt() const { return is_gbdt_; }
    const GbdtModel& gbdt() const { return model_; }

    std::string to_json() const;
    static FrozenModel from_json(const std::string& text);

private:
    // maps the wrapped model's feature names onto a dataset schema; the
    // model may be trained on a subset of the dataset's columns
    std::vector<std::size_t> column_map(const Dataset& data) const;

    bool is_gbdt_ = true;
    GbdtModel model_;
    std::unordered_map<std::string, double> score_logits_;  // row_id -> logit
    std::uint64_t fingerprint_ = 0;
};

}  // namespace symboost
