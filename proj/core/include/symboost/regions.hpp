#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "symboost/dataset.hpp"
#include "symboost/legacy.hpp"
#include "symboost/tree.hpp"

namespace symboost {

// Probability-scale residuals r_i = y_i - sigmoid(base_logit(x_i)), in [-1,1].
std::vector<double> residuals(const FrozenModel& frozen, const Dataset& data);

struct CartConfig {
    int max_depth = 3;
    std::size_t min_leaf = 30;
};

// Shallow CART fit to |r|; leaves carry (count, mean |r|, cumulative |r|).
struct CartTree {
    RegressionTree tree;
    std::size_t n_rows = 0;
    double total_abs_residual = 0.0;
};

CartTree fit_cart(const Dataset& data, const std::vector<double>& abs_residuals,
                  const CartConfig& cfg);

// Half-open interval constraint: lower < f <= upper.
struct IntervalClause {
    int feature = -1;
    std::string feature_name;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
};

struct Region {
    int id = -1;
    std::vector<IntervalClause> clauses;  // only constrained features appear
    double priority = 0.0;                // score C, in [0,1]
    std::size_t coverage = 0;
    double cum_error = 0.0;

    bool contains(std::span<const double> row) const;
};

struct RegionConfig {
    double lambda = 0.7;      // weight of the cumulative-error share in C
    double c_min = 0.15;
    std::size_t max_regions = 5;  // K_max
    // leaves with mean |r| below this are never hard regions; keeps a
    // well-calibrated scorer from electing its whole (tiny-residual) space
    double min_mean_abs_residual = 0.01;
};

// Leaf scoring C = lambda * (leaf cum|r| / total cum|r|) + (1-lambda) *
// (leaf count / n); qualifying leaves sorted by C descending, truncated to
// max_regions, rules assembled from root-to-leaf paths.
std::vector<Region> score_and_select(const CartTree& cart, const Dataset& data,
                                     const RegionConfig& cfg);

std::string regions_to_json(const std::vector<Region>& regions);
std::vector<Region> regions_from_json(const std::string& text,
                                      const std::vector<std::string>& feature_names);

}  // namespace symboost
