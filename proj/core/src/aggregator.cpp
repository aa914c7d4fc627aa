#include "symboost/aggregator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

#include "symboost/metrics.hpp"
#include "symboost/prob.hpp"

namespace symboost {

InteractionVector interaction_vector(double expert_output, double base_proba) {
    InteractionVector v;
    v.score = expert_output;
    v.delta = expert_output - base_proba;
    v.ratio = expert_output / (base_proba + kRatioEps);
    return v;
}

ContextMatrix build_context(const Dataset& data, const std::vector<double>& base_probas,
                            const std::vector<Expert>& experts) {
    if (base_probas.size() != data.n_rows)
        throw std::runtime_error("aggregator: base probability length mismatch");
    for (std::size_t k = 1; k < experts.size(); ++k)
        if (experts[k].artifact.region_id < experts[k - 1].artifact.region_id)
            throw std::runtime_error("aggregator: experts must be ordered by region id");

    ContextMatrix ctx;
    ctx.n_rows = data.n_rows;
    ctx.n_cols = data.n_cols + 1 + 3 * experts.size();
    ctx.names = data.feature_names;
    ctx.names.push_back("base_proba");
    for (const auto& e : experts) {
        const std::string k = std::to_string(e.artifact.region_id);
        ctx.names.push_back("expert" + k + "_score");
        ctx.names.push_back("expert" + k + "_delta");
        ctx.names.push_back("expert" + k + "_ratio");
    }

    ctx.values.resize(ctx.n_rows * ctx.n_cols);
    for (std::size_t r = 0; r < data.n_rows; ++r) {
        double* out = ctx.values.data() + r * ctx.n_cols;
        const auto row = data.row(r);
        std::copy(row.begin(), row.end(), out);
        out[data.n_cols] = base_probas[r];
        std::size_t c = data.n_cols + 1;
        for (const auto& e : experts) {
            const InteractionVector v = interaction_vector(e.value(row), base_probas[r]);
            out[c++] = v.score;
            out[c++] = v.delta;
            out[c++] = v.ratio;
        }
    }
    return ctx;
}

GateModel train_gate(const Dataset& train, const FrozenModel& frozen,
                     const std::vector<Expert>& experts, const GateConfig& cfg) {
    if (!(cfg.fit_fraction > 0.0 && cfg.fit_fraction < 1.0))
        throw std::runtime_error(
            "aggregator: gate_fit_fraction must lie in (0,1); the safety fold "
            "cannot be empty");

    auto [fit, fold] = split(train, cfg.fit_fraction, cfg.seed);

    auto probas_of = [&](const Dataset& d) {
        std::vector<double> logits = frozen.base_logits(d);
        std::vector<double> p(logits.size());
        for (std::size_t i = 0; i < logits.size(); ++i) p[i] = sigmoid(logits[i]);
        return p;
    };
    const std::vector<double> fit_probas = probas_of(fit);
    const std::vector<double> fold_probas = probas_of(fold);

    GateModel gate;
    const ContextMatrix fit_ctx = build_context(fit, fit_probas, experts);
    gate.feature_layout = fit_ctx.names;
    gate.model = GbdtModel::train(fit_ctx.view(), fit.target, fit_ctx.names, cfg.gbdt);

    // safe-improvement check on the untouched fold
    const ContextMatrix fold_ctx = build_context(fold, fold_probas, experts);
    std::vector<double> gate_scores(fold.n_rows);
    for (std::size_t r = 0; r < fold.n_rows; ++r)
        gate_scores[r] = sigmoid(gate.model.predict_logit(fold_ctx.view().row(r)));
    gate.gate_fold_auc = auc(fold.target, gate_scores);
    gate.legacy_fold_auc = auc(fold.target, fold_probas);
    gate.fallback = gate.gate_fold_auc < gate.legacy_fold_auc;
    return gate;
}

std::vector<double> predict_final(const Dataset& rows, const FrozenModel& frozen,
                                  const std::vector<Expert>& experts,
                                  const GateModel& gate) {
    std::vector<double> logits = frozen.base_logits(rows);
    std::vector<double> out(rows.n_rows);
    if (gate.fallback) {
        for (std::size_t r = 0; r < rows.n_rows; ++r) out[r] = sigmoid(logits[r]);
        return out;
    }
    if (gate.feature_layout.size() != rows.n_cols + 1 + 3 * experts.size())
        throw std::runtime_error("aggregator: gate layout does not match expert count");
    std::vector<double> probas(rows.n_rows);
    for (std::size_t r = 0; r < rows.n_rows; ++r) probas[r] = sigmoid(logits[r]);
    const ContextMatrix ctx = build_context(rows, probas, experts);
    for (std::size_t r = 0; r < rows.n_rows; ++r)
        out[r] = sigmoid(gate.model.predict_logit(ctx.view().row(r)));
    return out;
}

std::string GateModel::to_json() const {
    nlohmann::json j;
    j["model"] = nlohmann::json::parse(model.to_json());
    j["feature_layout"] = feature_layout;
    j["fallback"] = fallback;
    j["gate_fold_auc"] = gate_fold_auc;
    j["legacy_fold_auc"] = legacy_fold_auc;
    return j.dump(2);
}

GateModel GateModel::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    GateModel g;
    g.model = GbdtModel::from_json(j.at("model").dump());
    g.feature_layout = j.at("feature_layout").get<std::vector<std::string>>();
    g.fallback = j.at("fallback").get<bool>();
    g.gate_fold_auc = j.at("gate_fold_auc").get<double>();
    g.legacy_fold_auc = j.at("legacy_fold_auc").get<double>();
    return g;
}

}  // namespace symboost
