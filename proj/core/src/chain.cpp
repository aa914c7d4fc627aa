#include "symboost/chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "json.hpp"

#include "symboost/metrics.hpp"
#include "symboost/prob.hpp"

namespace symboost {

ExpertExpr init_seed(const Region& region, const std::vector<std::string>& schema) {
    std::string guard;
    for (const auto& c : region.clauses) {
        std::string part;
        if (std::isfinite(c.lower))
            part += "`" + c.feature_name + "` > " + ExpertExpr::render_number(c.lower);
        if (std::isfinite(c.upper)) {
            if (!part.empty()) part += " and ";
            part += "`" + c.feature_name + "` <= " + ExpertExpr::render_number(c.upper);
        }
        if (part.empty()) continue;
        if (!guard.empty()) guard += " and ";
        guard += part;
    }
    // a region with no finite bounds covers everything; the grammar still
    // needs one clause, so use a vacuously true comparison
    if (guard.empty()) guard = "`" + schema.at(0) + "` >= -1e18";
    return ExpertExpr::parse("if " + guard + " then p{c0=0} else 0", schema);
}

std::function<double(const std::map<std::string, double>&)> inner_objective(
    const ExpertExpr& expr, const std::vector<double>& base_logits,
    const Dataset& data, const std::vector<std::size_t>& fit_rows) {
    if (fit_rows.empty()) throw std::runtime_error("chain: empty fit set");
    // copy what the closure needs; the expr lives as long as the iteration
    return [&expr, &base_logits, &data, fit_rows](
               const std::map<std::string, double>& theta) {
        const std::vector<double> values = expr.resolve_params(theta);
        constexpr double eps = 1e-9;
        double total = 0.0;
        for (std::size_t r : fit_rows) {
            const double delta = expr.evaluate_with_values(data.row(r), values);
            const double p =
                std::clamp(sigmoid(base_logits[r] + delta), eps, 1.0 - eps);
            total += data.target[r] != 0 ? -std::log(p) : -std::log(1.0 - p);
        }
        return total / static_cast<double>(fit_rows.size());
    };
}

// ---------------------------------------------------------------------------

namespace {

double interdecile_of(const FeatureStat& s) {
    return s.deciles.back() - s.deciles.front();
}

nlohmann::json dims_json(const std::vector<SearchDim>& dims) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& d : dims)
        arr.push_back({{"name", d.name},
                       {"lower", d.lower},
                       {"upper", d.upper},
                       {"scale", d.scale == SearchDim::Scale::Log ? "log" : "linear"}});
    return arr;
}

}  // namespace

Chain::Chain(Region region, const std::vector<Region>& all_regions, const Dataset& train,
             const Dataset& val, const FrozenModel& frozen, const FeatureStats& stats,
             Provider& provider, const ChainConfig& cfg, const TpeConfig& tpe_cfg)
    : region_(std::move(region)),
      train_(train),
      val_(val),
      frozen_(frozen),
      stats_(stats),
      provider_(provider),
      cfg_(cfg),
      tpe_cfg_(tpe_cfg) {
    train_logits_ = frozen_.base_logits(train_);
    val_logits_ = frozen_.base_logits(val_);
    train_probas_.resize(train_logits_.size());
    for (std::size_t i = 0; i < train_logits_.size(); ++i)
        train_probas_[i] = sigmoid(train_logits_[i]);

    std::vector<double> val_probas(val_logits_.size());
    for (std::size_t i = 0; i < val_logits_.size(); ++i)
        val_probas[i] = sigmoid(val_logits_[i]);
    legacy_val_auc_ = auc(val_.target, val_probas);

    // allowed box: the region box expanded outward by the boundary-refinement
    // slack. Outward slack is capped at half the gap to the nearest other
    // region along the same axis, so tuned guards can never overlap a
    // neighboring expert's territory.
    for (const auto& c : region_.clauses) {
        IntervalClause limit = c;
        const double idr = interdecile_of(stats_.per_feature[static_cast<std::size_t>(c.feature)]);
        const double w = cfg_.boundary_window * idr;
        double slack_down = w, slack_up = w;
        for (const auto& other : all_regions) {
            if (other.id == region_.id) continue;
            for (const auto& oc : other.clauses) {
                if (oc.feature != c.feature) continue;
                if (std::isfinite(c.lower) && std::isfinite(oc.upper) &&
                    oc.upper <= c.lower + 1e-12)
                    slack_down = std::min(slack_down, (c.lower - oc.upper) / 2.0);
                if (std::isfinite(c.upper) && std::isfinite(oc.lower) &&
                    oc.lower >= c.upper - 1e-12)
                    slack_up = std::min(slack_up, (oc.lower - c.upper) / 2.0);
            }
        }
        if (std::isfinite(limit.lower)) limit.lower -= std::max(slack_down, 0.0);
        if (std::isfinite(limit.upper)) limit.upper += std::max(slack_up, 0.0);
        allowed_box_.push_back(limit);
    }

    seed_ = init_seed(region_, train_.feature_names);
    metric_ = legacy_val_auc_;  // f_0 with c0 = 0 leaves the fusion at the legacy score
}

SearchSpace Chain::assemble_space(ExpertExpr& expr, const CandidateExpert& cand,
                                  bool refine_boundaries) {
    SearchSpace space;

    // the allowed interval for one guard clause's threshold
    auto boundary_window = [&](const GuardClause& clause, double value) {
        const double idr =
            interdecile_of(stats_.per_feature[static_cast<std::size_t>(clause.feature)]);
        const double w = cfg_.boundary_window * idr;
        double lo = value - w, hi = value + w;
        for (const auto& limit : allowed_box_) {
            if (limit.feature != clause.feature) continue;
            lo = std::max(lo, limit.lower);
            hi = std::min(hi, limit.upper);
        }
        return std::pair<double, double>{lo, hi};
    };

    if (refine_boundaries) {
        // promote literal guard thresholds into tunable boundary slots
        int next = 0;
        for (std::size_t ci = 0; ci < expr.guard().size(); ++ci) {
            if (expr.guard()[ci].is_param) continue;
            const GuardClause clause = expr.guard()[ci];
            auto [lo, hi] = boundary_window(clause, clause.literal);
            if (!(hi - lo > 1e-12)) continue;
            std::string name = "b" + std::to_string(next++);
            bool taken = true;
            while (taken) {
                taken = false;
                for (const auto& p : expr.params())
                    if (p.name == name) {
                        name += "x";
                        taken = true;
                    }
            }
            expr.promote_guard_literal(ci, name);
            space.dims.push_back({name, lo, hi, SearchDim::Scale::Linear});
        }
    }

    for (const auto& slot : expr.params()) {
        if (slot.frozen) {
            space.frozen[slot.name] = slot.value;
            continue;
        }
        bool covered = false;
        for (const auto& d : space.dims) covered |= (d.name == slot.name);
        if (covered) continue;
        const SearchDim* declared = nullptr;
        for (const auto& d : cand.search_space)
            if (d.name == slot.name) declared = &d;
        if (declared) {
            SearchDim dim = *declared;
            if (slot.kind == ParamSlot::Kind::Boundary) {
                // clamp declared boundary windows into the allowed box
                for (std::size_t ci = 0; ci < expr.guard().size(); ++ci) {
                    const auto& clause = expr.guard()[ci];
                    if (!clause.is_param ||
                        expr.params()[static_cast<std::size_t>(clause.param)].name !=
                            slot.name)
                        continue;
                    auto [lo, hi] = boundary_window(clause, slot.value);
                    dim.lower = std::max(dim.lower, lo);
                    dim.upper = std::min(dim.upper, hi);
                }
            }
            if (dim.lower < dim.upper) space.dims.push_back(dim);
            else space.frozen[slot.name] = slot.value;
            continue;
        }
        if (slot.kind == ParamSlot::Kind::Boundary) {
            // free boundary slot without a declared window (inherited)
            bool added = false;
            for (std::size_t ci = 0; ci < expr.guard().size(); ++ci) {
                const auto& clause = expr.guard()[ci];
                if (!clause.is_param ||
                    expr.params()[static_cast<std::size_t>(clause.param)].name != slot.name)
                    continue;
                auto [lo, hi] = boundary_window(clause, slot.value);
                if (hi - lo > 1e-12) {
                    space.dims.push_back({slot.name, lo, hi, SearchDim::Scale::Linear});
                    added = true;
                }
            }
            if (!added) space.frozen[slot.name] = slot.value;
        } else {
            // undeclared free coefficient (the seed's c0): the output clip
            // makes +-3 the meaningful range
            space.dims.push_back({slot.name, -3.0, 3.0, SearchDim::Scale::Linear});
        }
    }
    return space;
}

std::vector<std::size_t> Chain::fit_rows_for(const ExpertExpr& expr,
                                             const SearchSpace& space) const {
    // the fit set covers every row the guard can reach: boundary slots take
    // their loosest window value, everything else its current value
    std::vector<double> loosest(expr.params().size());
    for (std::size_t i = 0; i < expr.params().size(); ++i)
        loosest[i] = expr.params()[i].value;
    for (const auto& dim : space.dims) {
        for (std::size_t i = 0; i < expr.params().size(); ++i) {
            if (expr.params()[i].name != dim.name ||
                expr.params()[i].kind != ParamSlot::Kind::Boundary)
                continue;
            for (const auto& clause : expr.guard()) {
                if (!clause.is_param || clause.param != static_cast<int>(i)) continue;
                loosest[i] = (clause.cmp == Cmp::Gt || clause.cmp == Cmp::Ge)
                                 ? dim.lower
                                 : dim.upper;
            }
        }
    }
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < train_.n_rows; ++r)
        if (expr.guard_true(train_.row(r), loosest)) rows.push_back(r);
    return rows;
}

void Chain::drain_provider_events(int t) {
    for (auto& e : provider_.drain_events()) {
        nlohmann::json j;
        j["t"] = t;
        j["event"] = e.kind;
        j["payload"] = e.payload;
        log_line(j.dump());
    }
}

bool Chain::run_iteration() {
    const int t = ++t_;
    const double tau = annealing_tau(cfg_.tau0, cfg_.tau_decay, t);

    PromptInputs in;
    in.region = &region_;
    in.seed_dsl = seed_.serialize();
    in.seed_metric = metric_;
    in.iteration = t;
    in.sample_seed = mix_seed(cfg_.seed, static_cast<std::uint64_t>(t));
    in.base_probas = &train_probas_;
    in.positive_constraints = positive_constraints_;
    in.negative_constraints = negative_constraints_;
    PromptBundle prompt = build_prompt(in, train_, stats_,
                                       {cfg_.prompt_samples, cfg_.top_features});

    IterationRecord rec;
    rec.t = t;

    // propose + parse/validate repair loop
    CandidateExpert cand;
    CandidateValidation valid;
    bool have_candidate = false;
    std::string failure_kind;
    try {
        cand = provider_.propose(prompt,
                                 mix_seed(cfg_.seed, static_cast<std::uint64_t>(t) * 2 + 1));
        valid = validate_candidate(cand, train_.feature_names, allowed_box_);
        int attempt = 0;
        while (!valid.ok && attempt < cfg_.repair_attempts) {
            ++attempt;
            cand = provider_.repair(
                prompt, cand, valid.error_kind + ": " + valid.error_message, attempt,
                mix_seed(cfg_.seed, static_cast<std::uint64_t>(t) * 131 +
                                        static_cast<std::uint64_t>(attempt)));
            valid = validate_candidate(cand, train_.feature_names, allowed_box_);
        }
        have_candidate = valid.ok;
        failure_kind = valid.ok ? "" : valid.error_kind;
    } catch (const std::exception& e) {
        have_candidate = false;
        failure_kind = "transport";
        cand.intent = std::string("provider failure: ") + e.what();
    }
    drain_provider_events(t);

    rec.candidate_text = cand.dsl_text;
    rec.intent = cand.intent;

    if (!have_candidate) {
        rec.reason = "failed: " + failure_kind;
        const std::string constraint =
            cand.intent.empty() ? ("iteration " + std::to_string(t) + " unparseable")
                                : cand.intent;
        negative_constraints_.push_back(constraint);
        history_.push_back(rec);
        nlohmann::json j{{"t", t},
                         {"event", "iteration"},
                         {"candidate_text", rec.candidate_text},
                         {"accepted", false},
                         {"reason", rec.reason}};
        log_line(j.dump());
        return t_ < cfg_.max_iterations && successes_ < cfg_.success_target;
    }

    ExpertExpr expr = std::move(valid.expr);
    const bool refine = !boundary_refined_;
    SearchSpace space = assemble_space(expr, cand, refine);
    rec.search_space = space.dims;

    const std::vector<std::size_t> fit_rows = fit_rows_for(expr, space);
    TpeConfig tpe_cfg = tpe_cfg_;
    tpe_cfg.seed = mix_seed(cfg_.seed, static_cast<std::uint64_t>(t) * 7919);
    TpeResult tuned;
    if (fit_rows.empty()) {
        rec.reason = "failed: empty fit set";
        negative_constraints_.push_back(cand.intent);
        history_.push_back(rec);
        log_line(nlohmann::json{{"t", t},
                                {"event", "iteration"},
                                {"accepted", false},
                                {"reason", rec.reason}}
                     .dump());
        return t_ < cfg_.max_iterations && successes_ < cfg_.success_target;
    }
    tuned = tpe_optimize(inner_objective(expr, train_logits_, train_, fit_rows), space,
                         tpe_cfg);
    rec.theta_star = tuned.theta;
    for (const auto& [name, v] : tuned.theta) expr.set_param_value(name, v);

    // A_t: direct additive fusion scored on the full validation split
    {
        std::vector<double> fused(val_.n_rows);
        const std::vector<double> values = expr.resolve_params({});
        for (std::size_t r = 0; r < val_.n_rows; ++r)
            fused[r] = sigmoid(val_logits_[r] +
                               expr.evaluate_with_values(val_.row(r), values));
        rec.metric = auc(val_.target, fused);
        rec.evaluated = true;
    }
    metric_series_.push_back(rec.metric);

    if (accept_candidate(rec.metric, metric_, tau)) {
        rec.accepted = true;
        rec.reason = "accepted";
        expr.freeze_all();
        seed_ = expr;
        metric_ = rec.metric;
        ++successes_;
        positive_constraints_.push_back(cand.intent);
        if (refine) boundary_refined_ = true;
    } else {
        rec.accepted = false;
        rec.reason = "no-gain";
        negative_constraints_.push_back(cand.intent);
    }

    history_.push_back(rec);
    nlohmann::json j{{"t", t},
                     {"event", "iteration"},
                     {"candidate_text", expr.serialize()},
                     {"search_space", dims_json(rec.search_space)},
                     {"theta_star", rec.theta_star},
                     {"A_t", rec.metric},
                     {"accepted", rec.accepted},
                     {"reason", rec.reason}};
    log_line(j.dump());
    return t_ < cfg_.max_iterations && successes_ < cfg_.success_target;
}

ExpertArtifact Chain::run() {
    while (run_iteration()) {
    }

    ExpertArtifact a;
    a.region_id = region_.id;
    a.history = history_;
    a.metric_series = metric_series_;
    a.final_metric = metric_;
    // cascaded rejection: a chain that never improved, or whose final metric
    // sits below the legacy baseline, must not contribute an expert
    const bool useful = successes_ > 0 && metric_ >= legacy_val_auc_;
    a.null_expert = !useful;
    if (useful) {
        a.dsl_text = seed_.serialize();
        a.params = seed_.params();
    }
    log_line(nlohmann::json{{"event", "final"},
                            {"null_expert", a.null_expert},
                            {"successes", successes_},
                            {"final_metric", a.final_metric},
                            {"legacy_val_auc", legacy_val_auc_}}
                 .dump());
    return a;
}

// ---------------------------------------------------------------------------
// artifacts

std::string ExpertArtifact::to_json() const {
    nlohmann::json j;
    j["region_id"] = region_id;
    j["null_expert"] = null_expert;
    j["dsl_text"] = dsl_text;
    j["params"] = nlohmann::json::array();
    for (const auto& p : params)
        j["params"].push_back(
            {{"name", p.name},
             {"value", p.value},
             {"frozen", p.frozen},
             {"kind", p.kind == ParamSlot::Kind::Boundary ? "boundary" : "coefficient"}});
    j["history"] = nlohmann::json::array();
    for (const auto& h : history)
        j["history"].push_back({{"t", h.t},
                                {"intent", h.intent},
                                {"accepted", h.accepted},
                                {"evaluated", h.evaluated},
                                {"metric", h.metric},
                                {"reason", h.reason}});
    j["metrics"] = {{"a_series", metric_series}, {"final", final_metric}};
    return j.dump(2);
}

ExpertArtifact ExpertArtifact::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ExpertArtifact a;
    a.region_id = j.at("region_id").get<int>();
    a.null_expert = j.at("null_expert").get<bool>();
    a.dsl_text = j.at("dsl_text").get<std::string>();
    for (const auto& p : j.at("params")) {
        ParamSlot slot;
        slot.name = p.at("name").get<std::string>();
        slot.value = p.at("value").get<double>();
        slot.frozen = p.at("frozen").get<bool>();
        slot.kind = p.at("kind") == "boundary" ? ParamSlot::Kind::Boundary
                                               : ParamSlot::Kind::Coefficient;
        a.params.push_back(std::move(slot));
    }
    for (const auto& h : j.at("history")) {
        IterationRecord r;
        r.t = h.at("t").get<int>();
        r.intent = h.at("intent").get<std::string>();
        r.accepted = h.at("accepted").get<bool>();
        r.evaluated = h.at("evaluated").get<bool>();
        r.metric = h.at("metric").get<double>();
        r.reason = h.at("reason").get<std::string>();
        a.history.push_back(std::move(r));
    }
    a.metric_series = j.at("metrics").at("a_series").get<std::vector<double>>();
    a.final_metric = j.at("metrics").at("final").get<double>();
    return a;
}

Expert Expert::from_artifact(ExpertArtifact a, const std::vector<std::string>& schema) {
    Expert e;
    if (!a.null_expert) {
        e.expr = ExpertExpr::parse(a.dsl_text, schema);
        for (const auto& p : e.expr->params()) e.param_defaults.push_back(p.value);
    }
    e.artifact = std::move(a);
    return e;
}

double Expert::value(std::span<const double> row) const {
    if (!expr) return 0.0;
    return expr->evaluate_with_values(row, param_defaults);
}

}  // namespace symboost
