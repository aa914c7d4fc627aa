#include "symboost/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace symboost {

GbdtModel GbdtModel::train(const MatrixView& x, const std::vector<int>& y,
                           const std::vector<std::string>& feature_names,
                           const GbdtConfig& cfg) {
    if (x.n_rows == 0) throw std::runtime_error("gbdt: no training rows");
    if (x.n_cols == 0) throw std::runtime_error("gbdt: no features");
    if (y.size() != x.n_rows) throw std::runtime_error("gbdt: label length mismatch");
    if (x.n_rows < 2) throw std::runtime_error("gbdt: need at least 2 rows");

    GbdtModel m;
    m.config_ = cfg;
    m.feature_names_ = feature_names;

    double mean = 0.0;
    for (int v : y) mean += (v != 0);
    mean /= static_cast<double>(y.size());
    m.initial_logit_ = clipped_logit(mean);

    if (cfg.n_trees == 0) return m;

    const SortedColumns cols = SortedColumns::build(x);
    std::vector<double> score(x.n_rows, m.initial_logit_);
    std::vector<double> gradient(x.n_rows);
    const std::vector<char> all_rows;  // empty mask selects everything

    TreeFitConfig tree_cfg{cfg.max_depth, cfg.min_leaf};
    m.trees_.reserve(static_cast<std::size_t>(cfg.n_trees));
    for (int t = 0; t < cfg.n_trees; ++t) {
        for (std::size_t i = 0; i < x.n_rows; ++i)
            gradient[i] = static_cast<double>(y[i] != 0) - sigmoid(score[i]);
        RegressionTree tree = fit_regression_tree(x, cols, all_rows, gradient, tree_cfg);
        for (std::size_t i = 0; i < x.n_rows; ++i)
            score[i] += cfg.learning_rate * tree.predict(x.row(i));
        m.trees_.push_back(std::move(tree));
    }
    return m;
}

double GbdtModel::predict_logit(std::span<const double> row) const {
    if (!feature_names_.empty() && row.size() != feature_names_.size())
        throw std::runtime_error("gbdt: row dimension mismatch");
    double total = 0.0;
    for (const auto& tree : trees_) total += tree.predict(row);
    return initial_logit_ + config_.learning_rate * total;
}

double GbdtModel::predict_proba(std::span<const double> row) const {
    return sigmoid(predict_logit(row));
}

std::vector<double> GbdtModel::predict_logits(const MatrixView& x) const {
    std::vector<double> out(x.n_rows);
    for (std::size_t i = 0; i < x.n_rows; ++i) out[i] = predict_logit(x.row(i));
    return out;
}

std::string GbdtModel::to_json() const {
    nlohmann::json j;
    j["initial_logit"] = initial_logit_;
    j["learning_rate"] = config_.learning_rate;
    j["n_trees"] = config_.n_trees;
    j["max_depth"] = config_.max_depth;
    j["min_leaf"] = config_.min_leaf;
    j["seed"] = config_.seed;
    j["feature_names"] = feature_names_;
    j["trees"] = nlohmann::json::array();
    for (const auto& tree : trees_) {
        nlohmann::json t;
        auto& feat = t["feature"] = nlohmann::json::array();
        auto& thr = t["threshold"] = nlohmann::json::array();
        auto& left = t["left"] = nlohmann::json::array();
        auto& right = t["right"] = nlohmann::json::array();
        auto& value = t["value"] = nlohmann::json::array();
        auto& count = t["count"] = nlohmann::json::array();
        for (const auto& n : tree.nodes) {
            feat.push_back(n.feature);
            thr.push_back(n.threshold);
            left.push_back(n.left);
            right.push_back(n.right);
            value.push_back(n.value);
            count.push_back(n.count);
        }
        j["trees"].push_back(std::move(t));
    }
    return j.dump(2);
}

GbdtModel GbdtModel::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    GbdtModel m;
    m.initial_logit_ = j.at("initial_logit").get<double>();
    m.config_.learning_rate = j.at("learning_rate").get<double>();
    m.config_.n_trees = j.at("n_trees").get<int>();
    m.config_.max_depth = j.at("max_depth").get<int>();
    m.config_.min_leaf = j.at("min_leaf").get<std::size_t>();
    m.config_.seed = j.at("seed").get<std::uint64_t>();
    m.feature_names_ = j.at("feature_names").get<std::vector<std::string>>();
    for (const auto& t : j.at("trees")) {
        RegressionTree tree;
        const auto& feat = t.at("feature");
        const std::size_t n = feat.size();
        tree.nodes.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            tree.nodes[i].feature = t.at("feature")[i].get<int>();
            tree.nodes[i].threshold = t.at("threshold")[i].get<double>();
            tree.nodes[i].left = t.at("left")[i].get<int>();
            tree.nodes[i].right = t.at("right")[i].get<int>();
            tree.nodes[i].value = t.at("value")[i].get<double>();
            tree.nodes[i].count = t.at("count")[i].get<std::size_t>();
        }
        m.trees_.push_back(std::move(tree));
    }
    return m;
}

}  // namespace symboost
