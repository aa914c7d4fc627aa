#include "symboost/regions.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace symboost {

std::vector<double> residuals(const FrozenModel& frozen, const Dataset& data) {
    std::vector<double> logits = frozen.base_logits(data);
    std::vector<double> r(data.n_rows);
    for (std::size_t i = 0; i < data.n_rows; ++i)
        r[i] = static_cast<double>(data.target[i]) - sigmoid(logits[i]);
    return r;
}

CartTree fit_cart(const Dataset& data, const std::vector<double>& abs_residuals,
                  const CartConfig& cfg) {
    if (abs_residuals.size() != data.n_rows)
        throw std::runtime_error("regions: residual length mismatch");
    if (data.n_rows < 2 * cfg.min_leaf)
        throw std::runtime_error("regions: need at least 2*min_leaf rows");

    CartTree cart;
    cart.n_rows = data.n_rows;
    for (double v : abs_residuals) {
        if (v < 0.0) throw std::runtime_error("regions: negative absolute residual");
        cart.total_abs_residual += v;
    }
    const MatrixView x = view_of(data);
    const SortedColumns cols = SortedColumns::build(x);
    cart.tree = fit_regression_tree(x, cols, {}, abs_residuals,
                                    TreeFitConfig{cfg.max_depth, cfg.min_leaf});
    return cart;
}

bool Region::contains(std::span<const double> row) const {
    for (const auto& c : clauses) {
        const double v = row[static_cast<std::size_t>(c.feature)];
        if (!(v > c.lower && v <= c.upper)) return false;
    }
    return true;
}

namespace {

struct LeafRule {
    int leaf = -1;
    std::vector<IntervalClause> clauses;
};

void collect_rules(const RegressionTree& tree, const Dataset& data, int node,
                   std::vector<IntervalClause>& path, std::vector<LeafRule>& out) {
    const TreeNode& n = tree.nodes[static_cast<std::size_t>(node)];
    if (n.feature < 0) {
        // keep only constrained features, bounds already intersected
        LeafRule rule;
        rule.leaf = node;
        for (const auto& c : path)
            if (std::isfinite(c.lower) || std::isfinite(c.upper)) rule.clauses.push_back(c);
        out.push_back(std::move(rule));
        return;
    }
    auto bound_for = [&](int feature) -> IntervalClause* {
        for (auto& c : path)
            if (c.feature == feature) return &c;
        path.push_back({feature, data.feature_names[static_cast<std::size_t>(feature)],
                        -std::numeric_limits<double>::infinity(),
                        std::numeric_limits<double>::infinity()});
        return &path.back();
    };

    {
        std::vector<IntervalClause> saved = path;
        IntervalClause* c = bound_for(n.feature);
        c->upper = std::min(c->upper, n.threshold);
        collect_rules(tree, data, n.left, path, out);
        path = std::move(saved);
    }
    {
        std::vector<IntervalClause> saved = path;
        IntervalClause* c = bound_for(n.feature);
        c->lower = std::max(c->lower, n.threshold);
        collect_rules(tree, data, n.right, path, out);
        path = std::move(saved);
    }
}

}  // namespace

std::vector<Region> score_and_select(const CartTree& cart, const Dataset& data,
                                     const RegionConfig& cfg) {
    std::vector<LeafRule> rules;
    std::vector<IntervalClause> path;
    collect_rules(cart.tree, data, 0, path, rules);

    struct Scored {
        LeafRule rule;
        double priority;
        std::size_t coverage;
        double cum_error;
    };
    std::vector<Scored> scored;
    const double total = cart.total_abs_residual;
    const double n = static_cast<double>(cart.n_rows);
    for (auto& rule : rules) {
        const TreeNode& leaf = cart.tree.nodes[static_cast<std::size_t>(rule.leaf)];
        if (leaf.count == 0) continue;
        const double mean_abs = leaf.sum / static_cast<double>(leaf.count);
        if (mean_abs < cfg.min_mean_abs_residual) continue;
        const double err_share = total > 0.0 ? leaf.sum / total : 0.0;
        const double cov_share = static_cast<double>(leaf.count) / n;
        const double c = cfg.lambda * err_share + (1.0 - cfg.lambda) * cov_share;
        if (c < cfg.c_min) continue;
        scored.push_back({std::move(rule), c, leaf.count, leaf.sum});
    }
    std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        return a.priority > b.priority;  // stable: leaf order breaks ties
    });
    if (scored.size() > cfg.max_regions) scored.resize(cfg.max_regions);

    std::vector<Region> regions;
    regions.reserve(scored.size());
    for (std::size_t i = 0; i < scored.size(); ++i) {
        Region r;
        r.id = static_cast<int>(i);
        r.clauses = std::move(scored[i].rule.clauses);
        r.priority = scored[i].priority;
        r.coverage = scored[i].coverage;
        r.cum_error = scored[i].cum_error;
        regions.push_back(std::move(r));
    }
    return regions;
}

std::string regions_to_json(const std::vector<Region>& regions) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : regions) {
        nlohmann::json clauses = nlohmann::json::array();
        for (const auto& c : r.clauses) {
            nlohmann::json jc;
            jc["feature"] = c.feature_name;
            jc["lower"] = std::isfinite(c.lower) ? nlohmann::json(c.lower)
                                                 : nlohmann::json(nullptr);
            jc["upper"] = std::isfinite(c.upper) ? nlohmann::json(c.upper)
                                                 : nlohmann::json(nullptr);
            clauses.push_back(std::move(jc));
        }
        j.push_back({{"id", r.id},
                     {"clauses", clauses},
                     {"priority", r.priority},
                     {"coverage", r.coverage},
                     {"cum_error", r.cum_error}});
    }
    return j.dump(2);
}

std::vector<Region> regions_from_json(const std::string& text,
                                      const std::vector<std::string>& feature_names) {
    nlohmann::json j = nlohmann::json::parse(text);
    std::vector<Region> regions;
    for (const auto& jr : j) {
        Region r;
        r.id = jr.at("id").get<int>();
        r.priority = jr.at("priority").get<double>();
        r.coverage = jr.at("coverage").get<std::size_t>();
        r.cum_error = jr.at("cum_error").get<double>();
        for (const auto& jc : jr.at("clauses")) {
            IntervalClause c;
            c.feature_name = jc.at("feature").get<std::string>();
            auto it = std::find(feature_names.begin(), feature_names.end(), c.feature_name);
            if (it == feature_names.end())
                throw std::runtime_error("regions: unknown feature '" + c.feature_name +
                                         "' in serialized region");
            c.feature = static_cast<int>(it - feature_names.begin());
            if (!jc.at("lower").is_null()) c.lower = jc.at("lower").get<double>();
            if (!jc.at("upper").is_null()) c.upper = jc.at("upper").get<double>();
            r.clauses.push_back(std::move(c));
        }
        regions.push_back(std::move(r));
    }
    return regions;
}

}  // namespace symboost
