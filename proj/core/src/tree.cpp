#include "symboost/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace symboost {

SortedColumns SortedColumns::build(const MatrixView& x) {
    SortedColumns cols;
    cols.order.resize(x.n_cols);
    for (std::size_t f = 0; f < x.n_cols; ++f) {
        auto& ord = cols.order[f];
        ord.resize(x.n_rows);
        std::iota(ord.begin(), ord.end(), 0U);
        std::stable_sort(ord.begin(), ord.end(), [&](std::uint32_t a, std::uint32_t b) {
            return x.at(a, f) < x.at(b, f);
        });
    }
    return cols;
}

double RegressionTree::predict(std::span<const double> row) const {
    return nodes[static_cast<std::size_t>(leaf_index(row))].value;
}

int RegressionTree::leaf_index(std::span<const double> row) const {
    int i = 0;
    while (!is_leaf(i)) {
        const TreeNode& n = nodes[static_cast<std::size_t>(i)];
        i = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return i;
}

std::vector<int> RegressionTree::leaves() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].feature < 0) out.push_back(static_cast<int>(i));
    return out;
}

namespace {

struct BestSplit {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
};

struct Builder {
    const MatrixView& x;
    const std::vector<double>& targets;
    const TreeFitConfig& cfg;
    RegressionTree tree;

    // lists[f] holds the node's rows in ascending order of feature f
    int build(std::vector<std::vector<std::uint32_t>>& lists, int depth) {
        const auto& rows = lists[0];
        const std::size_t count = rows.size();
        double sum = 0.0, sumsq = 0.0;
        for (std::uint32_t r : rows) {
            sum += targets[r];
            sumsq += targets[r] * targets[r];
        }

        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        TreeNode& as_leaf = tree.nodes.back();
        as_leaf.count = count;
        as_leaf.sum = sum;
        as_leaf.value = sum / static_cast<double>(count);

        if (depth >= cfg.max_depth || count < 2 * cfg.min_leaf) return node_id;

        const double parent_score = sum * sum / static_cast<double>(count);
        const double parent_sse = std::max(0.0, sumsq - parent_score);
        BestSplit best;
        double best_gain = 0.0;
        for (std::size_t f = 0; f < x.n_cols; ++f) {
            const auto& ord = lists[f];
            double left_sum = 0.0;
            for (std::size_t i = 1; i < count; ++i) {
                left_sum += targets[ord[i - 1]];
                const double lo = x.at(ord[i - 1], f);
                const double hi = x.at(ord[i], f);
                if (lo == hi) continue;  // not a boundary between distinct values
                if (i < cfg.min_leaf || count - i < cfg.min_leaf) continue;
                const double right_sum = sum - left_sum;
                const double gain = left_sum * left_sum / static_cast<double>(i) +
                                    right_sum * right_sum / static_cast<double>(count - i) -
                                    parent_score;
                if (gain > best_gain) {  // strict: first hit wins ties
                    best_gain = gain;
                    best.found = true;
                    best.feature = static_cast<int>(f);
                    best.threshold = 0.5 * (lo + hi);
                }
            }
        }
        // require a real variance reduction, not floating-point noise
        if (!best.found || best_gain <= 1e-12 * std::max(1.0, parent_sse)) return node_id;

        std::vector<std::vector<std::uint32_t>> left_lists(x.n_cols), right_lists(x.n_cols);
        for (std::size_t f = 0; f < x.n_cols; ++f) {
            left_lists[f].reserve(count / 2);
            right_lists[f].reserve(count / 2);
            for (std::uint32_t r : lists[f]) {
                const bool go_left =
                    x.at(r, static_cast<std::size_t>(best.feature)) <= best.threshold;
                (go_left ? left_lists[f] : right_lists[f]).push_back(r);
            }
            lists[f].clear();
            lists[f].shrink_to_fit();
        }

        const int left_id = build(left_lists, depth + 1);
        const int right_id = build(right_lists, depth + 1);
        TreeNode& n = tree.nodes[static_cast<std::size_t>(node_id)];
        n.feature = best.feature;
        n.threshold = best.threshold;
        n.left = left_id;
        n.right = right_id;
        return node_id;
    }
};

}  // namespace

RegressionTree fit_regression_tree(const MatrixView& x, const SortedColumns& cols,
                                   const std::vector<char>& row_mask,
                                   const std::vector<double>& targets,
                                   const TreeFitConfig& cfg) {
    if (x.n_rows == 0 || x.n_cols == 0)
        throw std::runtime_error("tree: empty training matrix");
    if (cols.order.size() != x.n_cols)
        throw std::runtime_error("tree: sorted columns do not match matrix");

    std::vector<std::vector<std::uint32_t>> lists(x.n_cols);
    for (std::size_t f = 0; f < x.n_cols; ++f) {
        lists[f].reserve(x.n_rows);
        for (std::uint32_t r : cols.order[f])
            if (row_mask.empty() || row_mask[r]) lists[f].push_back(r);
    }
    if (lists[0].empty()) throw std::runtime_error("tree: no rows selected");

    Builder b{x, targets, cfg, {}};
    b.build(lists, 0);
    return std::move(b.tree);
}

}  // namespace symboost
