#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "symboost/dataset.hpp"

namespace symboost {

struct MatrixView {
    const double* data = nullptr;
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;

    double at(std::size_t r, std::size_t c) const { return data[r * n_cols + c]; }
    std::span<const double> row(std::size_t r) const { return {data + r * n_cols, n_cols}; }
};

inline MatrixView view_of(const Dataset& d) {
    return {d.values.data(), d.n_rows, d.n_cols};
}

// Row orderings per feature, computed once and reused across trees (the
// ordering never changes while targets do).
struct SortedColumns {
    std::vector<std::vector<std::uint32_t>> order;  // per feature, rows sorted by value
    static SortedColumns build(const MatrixView& x);
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;      // leaf mean target
    double sum = 0.0;        // leaf target sum
    std::size_t count = 0;   // leaf sample count
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root; empty means untrained

    bool is_leaf(int i) const { return nodes[i].feature < 0; }
    double predict(std::span<const double> row) const;
    int leaf_index(std::span<const double> row) const;
    std::vector<int> leaves() const;
};

struct TreeFitConfig {
    int max_depth = 3;
    std::size_t min_leaf = 5;
};

// Greedy variance-reduction CART on a real-valued target. Split thresholds
// are midpoints of adjacent distinct values; rows with value <= threshold go
// left. Ties break toward the lowest feature index, then lowest threshold.
RegressionTree fit_regression_tree(const MatrixView& x, const SortedColumns& cols,
                                   const std::vector<char>& row_mask,
                                   const std::vector<double>& targets,
                                   const TreeFitConfig& cfg);

}  // namespace symboost
