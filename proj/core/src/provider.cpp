#include "symboost/provider.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "symboost/prob.hpp"

namespace symboost {

namespace {

std::string fmt(double v, const char* spec = "%.6g") {
    char buf[40];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

}  // namespace

const char* error_tag(int y, double base_proba) {
    if (std::fabs(base_proba - 0.5) <= 0.1) return kTagHighUncertainty;
    if (y != 0 && base_proba < 0.5) return kTagFalseNeg;
    if (y == 0 && base_proba >= 0.5) return kTagFalsePos;
    return kTagConfidentOk;
}

// ---------------------------------------------------------------------------
// prompt assembly

PromptBundle build_prompt(const PromptInputs& in, const Dataset& data,
                          const FeatureStats& stats, const PromptConfig& cfg) {
    if (!in.region || !in.base_probas)
        throw std::runtime_error("provider: prompt inputs incomplete");

    std::vector<std::size_t> region_rows;
    for (std::size_t r = 0; r < data.n_rows; ++r)
        if (in.region->contains(data.row(r))) region_rows.push_back(r);
    if (region_rows.empty()) throw std::runtime_error("provider: region is empty");

    PromptBundle b;
    b.iteration = in.iteration;
    b.schema = data.feature_names;
    b.descriptions = data.feature_descriptions;
    b.stats = stats.per_feature;
    b.seed_function = in.seed_dsl;
    b.seed_metric = in.seed_metric;
    b.positive_constraints = in.positive_constraints;
    b.negative_constraints = in.negative_constraints;
    for (const auto& c : in.region->clauses) b.region_features.push_back(c.feature);

    b.task_header =
        "You refine a guarded symbolic correction for a frozen tabular scorer.\n"
        "Modify the seed function incrementally: keep its guard inside the region "
        "rule, add or adjust one structural element, and declare a search box for "
        "every new parameter.";

    {
        std::string rule;
        for (std::size_t i = 0; i < in.region->clauses.size(); ++i) {
            const auto& c = in.region->clauses[i];
            if (i) rule += " and ";
            std::string part;
            if (std::isfinite(c.lower)) part += "`" + c.feature_name + "` > " + fmt(c.lower);
            if (std::isfinite(c.upper)) {
                if (!part.empty()) part += " and ";
                part += "`" + c.feature_name + "` <= " + fmt(c.upper);
            }
            rule += part;
        }
        b.region_rule = rule.empty() ? "(entire feature space)" : rule;
    }

    // top-m features by IV with PSI drift flags
    {
        std::vector<std::size_t> order(data.n_cols);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b2) {
            return stats.per_feature[a].iv > stats.per_feature[b2].iv;
        });
        std::string block;
        const std::size_t m = std::min(cfg.top_features, order.size());
        for (std::size_t i = 0; i < m; ++i) {
            const auto& s = stats.per_feature[order[i]];
            block += "`" + data.feature_names[order[i]] + "` iv=" + fmt(s.iv) +
                     " psi=" + fmt(s.psi);
            if (s.psi >= 0.25) block += " [DRIFT]";
            block += " range=[" + fmt(s.min) + ", " + fmt(s.max) + "] mean=" + fmt(s.mean);
            if (!data.feature_descriptions.empty() &&
                !data.feature_descriptions[order[i]].empty())
                block += "  # " + data.feature_descriptions[order[i]];
            block += "\n";
        }
        b.stats_block = block;
    }

    // tag-stratified, seeded sample selection
    {
        const std::vector<std::string> tag_order = {kTagFalseNeg, kTagFalsePos,
                                                    kTagHighUncertainty, kTagConfidentOk};
        std::vector<std::vector<std::size_t>> groups(tag_order.size());
        for (std::size_t r : region_rows) {
            const char* tag = error_tag(data.target[r], (*in.base_probas)[r]);
            for (std::size_t g = 0; g < tag_order.size(); ++g)
                if (tag_order[g] == tag) groups[g].push_back(r);
        }
        Rng rng(in.sample_seed);
        for (auto& g : groups) rng.shuffle(g);

        const std::size_t want = std::min(cfg.n_samples, region_rows.size());
        std::vector<std::size_t> cursors(groups.size(), 0);
        while (b.samples.size() < want) {
            bool progressed = false;
            for (std::size_t g = 0; g < groups.size() && b.samples.size() < want; ++g) {
                if (cursors[g] >= groups[g].size()) continue;
                const std::size_t r = groups[g][cursors[g]++];
                SampleRow row;
                row.row_id = data.row_ids[r];
                row.values.assign(data.row(r).begin(), data.row(r).end());
                row.y = data.target[r];
                row.base_proba = (*in.base_probas)[r];
                row.tag = tag_order[g];
                b.samples.push_back(std::move(row));
                progressed = true;
            }
            if (!progressed) break;
        }

        std::string block;
        for (const auto& s : b.samples) {
            block += "[" + s.tag + "] y=" + std::to_string(s.y) +
                     " base_p=" + fmt(s.base_proba) + " |";
            for (std::size_t f = 0; f < s.values.size(); ++f)
                block += " `" + data.feature_names[f] + "`=" + fmt(s.values[f]);
            block += "\n";
        }
        b.samples_block = block;
    }

    {
        std::string block;
        block += "Rejected modifications (do not repeat):\n";
        if (in.negative_constraints.empty()) block += "  (none)\n";
        for (const auto& c : in.negative_constraints) block += "  - " + c + "\n";
        block += "Accepted modifications so far:\n";
        if (in.positive_constraints.empty()) block += "  (none)\n";
        for (const auto& c : in.positive_constraints) block += "  - " + c + "\n";
        b.constraints_block = block;
    }

    return b;
}

std::string PromptBundle::render() const {
    std::string p;
    p += task_header;
    p += "\n\nREGION RULE:\n  " + region_rule + "\n";
    p += "\nSEED FUNCTION (validation AUC " + fmt(seed_metric) + "):\n  " +
         seed_function + "\n";
    p += "\nFEATURE STATISTICS (top by information value):\n" + stats_block;
    p += "\nSAMPLES (" + std::to_string(samples.size()) +
         " rows from the region, tagged by error type):\n" + samples_block;
    p += "\nCONSTRAINTS:\n" + constraints_block;
    p += "\nRESPOND with the full modified function in one fenced code block, then a\n"
         "line `SEARCH_SPACE:` followed by a JSON array of\n"
         "{\"name\", \"lower\", \"upper\", \"scale\"} entries for each new parameter,\n"
         "then a line `INTENT:` with a one-line summary of the modification.\n";
    return p;
}

// ---------------------------------------------------------------------------
// candidate validation

CandidateValidation validate_candidate(const CandidateExpert& cand,
                                       const std::vector<std::string>& schema,
                                       const std::vector<IntervalClause>& allowed_box) {
    CandidateValidation v;
    try {
        v.expr = ExpertExpr::parse(cand.dsl_text, schema);
    } catch (const ParseError& e) {
        v.error_kind = e.kind;
        v.error_message = e.what();
        return v;
    }

    for (const auto& dim : cand.search_space) {
        const ParamSlot* slot = nullptr;
        for (const auto& p : v.expr.params())
            if (p.name == dim.name) slot = &p;
        if (!slot) {
            v.error_kind = "search-space";
            v.error_message =
                "search space entry '" + dim.name + "' does not name a parameter slot";
            return v;
        }
        if (slot->frozen) {
            v.error_kind = "search-space";
            v.error_message = "search space entry '" + dim.name + "' names a frozen slot";
            return v;
        }
        if (!(dim.lower < dim.upper)) {
            v.error_kind = "search-space";
            v.error_message = "search space entry '" + dim.name + "' needs lower < upper";
            return v;
        }
        if (dim.scale == SearchDim::Scale::Log && !(dim.lower > 0.0)) {
            v.error_kind = "search-space";
            v.error_message =
                "search space entry '" + dim.name + "' is log-scaled but lower <= 0";
            return v;
        }
    }

    // guard box (thresholds at their defaults) must stay inside the allowed box
    std::vector<double> defaults(v.expr.params().size());
    for (std::size_t i = 0; i < defaults.size(); ++i)
        defaults[i] = v.expr.params()[i].value;
    for (const auto& limit : allowed_box) {
        double lower = -std::numeric_limits<double>::infinity();
        double upper = std::numeric_limits<double>::infinity();
        for (const auto& c : v.expr.guard()) {
            if (c.feature != limit.feature) continue;
            const double thr =
                c.is_param ? defaults[static_cast<std::size_t>(c.param)] : c.literal;
            if (c.cmp == Cmp::Gt || c.cmp == Cmp::Ge) lower = std::max(lower, thr);
            if (c.cmp == Cmp::Lt || c.cmp == Cmp::Le) upper = std::min(upper, thr);
        }
        const double eps = 1e-9;
        if (lower < limit.lower - eps || upper > limit.upper + eps) {
            v.error_kind = "guard";
            v.error_message = "guard on `" + limit.feature_name +
                              "` reaches outside the allowed region box";
            return v;
        }
    }

    v.ok = true;
    return v;
}

// ---------------------------------------------------------------------------
// mock provider

namespace {

struct Mutation {
    std::string body;   // empty -> keep seed body
    std::string guard;  // empty -> keep seed guard
    std::string intent;
    std::vector<SearchDim> space;
};

// sizes coefficient boxes so c * feature stays within the output clip
double feature_scale(const FeatureStat& s) {
    return std::max({std::fabs(s.deciles.front()), std::fabs(s.deciles.back()), 1e-3});
}

double interdecile(const FeatureStat& s) { return s.deciles.back() - s.deciles.front(); }

std::string unique_name(const ExpertExpr& seed, std::string base) {
    auto taken = [&](const std::string& n) {
        for (const auto& p : seed.params())
            if (p.name == n) return true;
        return false;
    };
    while (taken(base)) base += "x";
    return base;
}

// features ranked by |corr(feature, y - base_p)| over the few-shot rows;
// this is the mock's stand-in for reading the samples block
std::vector<std::size_t> rank_features_by_residual_corr(const PromptBundle& b) {
    const std::size_t d = b.schema.size();
    std::vector<double> corr(d, 0.0);
    const std::size_t n = b.samples.size();
    if (n >= 3) {
        std::vector<double> resid(n);
        for (std::size_t i = 0; i < n; ++i)
            resid[i] = static_cast<double>(b.samples[i].y) - b.samples[i].base_proba;
        double rm =
            std::accumulate(resid.begin(), resid.end(), 0.0) / static_cast<double>(n);
        for (std::size_t f = 0; f < d; ++f) {
            double fm = 0.0;
            for (const auto& s : b.samples) fm += s.values[f];
            fm /= static_cast<double>(n);
            double num = 0.0, df = 0.0, dr = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double a = b.samples[i].values[f] - fm;
                const double r = resid[i] - rm;
                num += a * r;
                df += a * a;
                dr += r * r;
            }
            corr[f] = (df > 1e-12 && dr > 1e-12) ? num / std::sqrt(df * dr) : 0.0;
        }
    }
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b2) {
        return std::fabs(corr[a]) > std::fabs(corr[b2]);
    });
    return order;
}

}  // namespace

CandidateExpert MockProvider::propose(const PromptBundle& prompt, std::uint64_t seed) {
    log_event("prompt", prompt.render());
    ExpertExpr seed_expr = ExpertExpr::parse(prompt.seed_function, prompt.schema);
    const std::string body = seed_expr.body_text();
    const std::string guard = seed_expr.guard_text();
    const int t = prompt.iteration;
    const auto ranked = rank_features_by_residual_corr(prompt);
    const auto& stats = prompt.stats;

    auto ref = [&](std::size_t f) { return "`" + prompt.schema[f] + "`"; };
    auto top = [&](std::size_t i) { return ranked[std::min(i, ranked.size() - 1)]; };

    std::vector<Mutation> menu;
    auto add_product = [&](std::size_t fa, std::size_t fb) {
        if (fa == fb) return;
        const std::size_t lo = std::min(fa, fb), hi = std::max(fa, fb);
        Mutation m;
        const std::string pname = unique_name(seed_expr, "a" + std::to_string(t));
        m.body = "(" + body + " + p{" + pname + "=0} * " + ref(lo) + " * " + ref(hi) + ")";
        m.intent = "add product term " + ref(lo) + "*" + ref(hi);
        const double s = feature_scale(stats[lo]) * feature_scale(stats[hi]);
        m.space.push_back({pname, -3.0 / s, 3.0 / s, SearchDim::Scale::Linear});
        menu.push_back(std::move(m));
    };
    auto add_additive = [&](std::size_t f) {
        Mutation m;
        const std::string pname = unique_name(seed_expr, "c" + std::to_string(t));
        m.body = "(" + body + " + p{" + pname + "=0} * " + ref(f) + ")";
        m.intent = "add additive term on " + ref(f);
        const double s = feature_scale(stats[f]);
        m.space.push_back({pname, -3.0 / s, 3.0 / s, SearchDim::Scale::Linear});
        menu.push_back(std::move(m));
    };
    auto add_gauss = [&](std::size_t f) {
        const double idr = interdecile(stats[f]);
        if (idr <= 1e-9) return;
        Mutation m;
        const std::string amp = unique_name(seed_expr, "g" + std::to_string(t));
        const std::string mu = unique_name(seed_expr, "m" + std::to_string(t));
        const std::string sg = unique_name(seed_expr, "s" + std::to_string(t));
        m.body = "(" + body + " + p{" + amp + "=0} * gauss(" + ref(f) + ", p{" + mu +
                 "=" + ExpertExpr::render_number(stats[f].deciles[4]) + "}, p{" + sg +
                 "=" + ExpertExpr::render_number(idr / 2.0) + "}))";
        m.intent = "add gauss bump on " + ref(f);
        m.space.push_back({amp, -3.0, 3.0, SearchDim::Scale::Linear});
        m.space.push_back({mu, stats[f].deciles.front(), stats[f].deciles.back(),
                           SearchDim::Scale::Linear});
        m.space.push_back({sg, std::max(idr / 20.0, 1e-6), std::max(idr, 1e-5),
                           SearchDim::Scale::Log});
        menu.push_back(std::move(m));
    };

    if (ranked.size() >= 2) {
        add_product(top(0), top(1));
        add_additive(top(0));
        if (ranked.size() >= 3) add_product(top(0), top(2));
        add_additive(top(1));
        add_gauss(top(0));
        if (ranked.size() >= 3) add_product(top(1), top(2));
        add_gauss(top(1));
        if (ranked.size() >= 3) add_additive(top(2));
    } else {
        add_additive(top(0));
        add_gauss(top(0));
    }

    {
        Mutation m;
        const std::string w = unique_name(seed_expr, "w" + std::to_string(t));
        m.body = "(p{" + w + "=1} * tanh(" + body + "))";
        m.intent = "wrap body in scaled tanh";
        m.space.push_back({w, -3.0, 3.0, SearchDim::Scale::Linear});
        menu.push_back(std::move(m));
    }

    // tune one guard threshold, emitting a boundary slot
    for (std::size_t ci = 0; ci < seed_expr.guard().size(); ++ci) {
        const auto& clause = seed_expr.guard()[ci];
        if (clause.is_param) continue;
        const double idr = interdecile(stats[static_cast<std::size_t>(clause.feature)]);
        if (idr <= 1e-9) continue;
        Mutation m;
        ExpertExpr copy = seed_expr;
        const std::string bname =
            unique_name(seed_expr, "tb" + std::to_string(t) + "_" + std::to_string(ci));
        copy.promote_guard_literal(ci, bname);
        m.guard = copy.guard_text();
        m.intent = "tune guard threshold on `" + clause.feature_name + "`";
        m.space.push_back({bname, clause.literal - 0.1 * idr, clause.literal + 0.1 * idr,
                           SearchDim::Scale::Linear});
        menu.push_back(std::move(m));
    }

    {
        Mutation m;
        const std::string r = unique_name(seed_expr, "r" + std::to_string(t));
        m.body = "(p{" + r + "=1} * " + body + ")";
        // iteration-salted so the fallback never exhausts
        m.intent = "rescale body (iteration " + std::to_string(t) + ")";
        m.space.push_back({r, 0.2, 5.0, SearchDim::Scale::Log});
        menu.push_back(std::move(m));
    }

    auto blocked = [&](const std::string& intent) {
        for (const auto& c : prompt.negative_constraints)
            if (c == intent) return true;
        for (const auto& c : prompt.positive_constraints)
            if (c == intent) return true;
        return false;
    };

    const Mutation* chosen = &menu.back();  // rescale is always admissible
    for (const auto& m : menu) {
        if (!blocked(m.intent)) {
            chosen = &m;
            break;
        }
    }

    CandidateExpert cand;
    cand.dsl_text = "if " + (chosen->guard.empty() ? guard : chosen->guard) + " then " +
                    (chosen->body.empty() ? body : chosen->body) + " else 0";
    cand.intent = chosen->intent;
    cand.search_space = chosen->space;
    (void)seed;
    log_event("response", cand.dsl_text + "\nINTENT: " + cand.intent);
    return cand;
}

CandidateExpert MockProvider::repair(const PromptBundle& prompt,
                                     const CandidateExpert& failed,
                                     const std::string& error_report, int attempt,
                                     std::uint64_t seed) {
    log_event("prompt", "REPAIR attempt " + std::to_string(attempt) + ":\n" + error_report);

    // unknown feature: swap it for the highest-IV feature inside the region
    auto quote = error_report.find("unknown feature '");
    if (quote != std::string::npos) {
        auto start = quote + std::string("unknown feature '").size();
        auto end = error_report.find('\'', start);
        if (end != std::string::npos) {
            const std::string bad = error_report.substr(start, end - start);
            int best = -1;
            double best_iv = -1.0;
            for (int f : prompt.region_features)
                if (prompt.stats[static_cast<std::size_t>(f)].iv > best_iv) {
                    best_iv = prompt.stats[static_cast<std::size_t>(f)].iv;
                    best = f;
                }
            if (best < 0) {
                for (std::size_t f = 0; f < prompt.schema.size(); ++f)
                    if (prompt.stats[f].iv > best_iv) {
                        best_iv = prompt.stats[f].iv;
                        best = static_cast<int>(f);
                    }
            }
            CandidateExpert fixed = failed;
            const std::string from = "`" + bad + "`";
            const std::string to = "`" + prompt.schema[static_cast<std::size_t>(best)] + "`";
            std::size_t pos = 0;
            while ((pos = fixed.dsl_text.find(from, pos)) != std::string::npos) {
                fixed.dsl_text.replace(pos, from.size(), to);
                pos += to.size();
            }
            log_event("response", fixed.dsl_text);
            return fixed;
        }
    }

    // bad search-space entry: drop it
    auto entry = error_report.find("search space entry '");
    if (entry != std::string::npos) {
        auto start = entry + std::string("search space entry '").size();
        auto end = error_report.find('\'', start);
        if (end != std::string::npos) {
            const std::string bad = error_report.substr(start, end - start);
            CandidateExpert fixed = failed;
            std::erase_if(fixed.search_space,
                          [&](const SearchDim& d) { return d.name == bad; });
            log_event("response", "dropped search space entry '" + bad + "'");
            return fixed;
        }
    }

    // otherwise try a different mutation
    return propose(prompt, mix_seed(seed, static_cast<std::uint64_t>(attempt)));
}

// ---------------------------------------------------------------------------
// failing provider

CandidateExpert FailingProvider::propose(const PromptBundle& prompt, std::uint64_t seed) {
    (void)prompt;
    (void)seed;
    log_event("response", "((broken");
    return {"((broken", "emit unparseable candidate", {}};
}

CandidateExpert FailingProvider::repair(const PromptBundle& prompt,
                                        const CandidateExpert& failed,
                                        const std::string& error_report, int attempt,
                                        std::uint64_t seed) {
    (void)failed;
    (void)error_report;
    (void)attempt;
    return propose(prompt, seed);
}

// ---------------------------------------------------------------------------
// llm provider

namespace {

const char* kSystemPrompt =
    "You improve a frozen binary scorer by editing a guarded expression in a "
    "small DSL.\n"
    "Grammar: if <clause> (and <clause>)* then <arith> else 0, where a clause "
    "compares a backquoted feature against a number or a parameter p{name=value}. "
    "The arithmetic part may use + - * /, parentheses, numbers, backquoted "
    "features, parameters p{name=value[,frozen]} and the functions exp, log1p, "
    "tanh, sigmoid, abs, sqrt, min(a,b), max(a,b), gauss(u,mu,s), clip(x,lo,hi).\n"
    "Never touch parameters marked ,frozen. Always keep the guard within the "
    "region rule. Reply with the whole function in a fenced code block, then "
    "SEARCH_SPACE: [...] JSON for new parameters, then INTENT: <one line>.";

std::string extract_fenced_block(const std::string& content) {
    auto open = content.find("```");
    if (open == std::string::npos) return "";
    auto line_end = content.find('\n', open);
    if (line_end == std::string::npos) return "";
    auto close = content.find("```", line_end);
    if (close == std::string::npos) return "";
    std::string block = content.substr(line_end + 1, close - line_end - 1);
    while (!block.empty() && (block.back() == '\n' || block.back() == ' '))
        block.pop_back();
    while (!block.empty() && (block.front() == '\n' || block.front() == ' '))
        block.erase(block.begin());
    return block;
}

}  // namespace

CandidateExpert LlmProvider::parse_completion(const std::string& content) {
    CandidateExpert cand;
    cand.dsl_text = extract_fenced_block(content);
    if (cand.dsl_text.empty())
        throw std::runtime_error("llm: response lacks a fenced code block");

    auto marker = content.find("SEARCH_SPACE:");
    if (marker != std::string::npos) {
        auto bracket = content.find('[', marker);
        if (bracket != std::string::npos) {
            // stream extraction stops after one complete JSON value, so the
            // INTENT line that follows does not break the parse
            nlohmann::json arr;
            std::istringstream iss(content.substr(bracket));
            try {
                iss >> arr;
            } catch (const nlohmann::json::exception&) {
                arr = nlohmann::json();
            }
            if (arr.is_array()) {
                for (const auto& e : arr) {
                    SearchDim d;
                    d.name = e.value("name", "");
                    d.lower = e.value("lower", 0.0);
                    d.upper = e.value("upper", 1.0);
                    d.scale = e.value("scale", "linear") == std::string("log")
                                  ? SearchDim::Scale::Log
                                  : SearchDim::Scale::Linear;
                    cand.search_space.push_back(std::move(d));
                }
            }
        }
    }

    auto intent = content.find("INTENT:");
    if (intent != std::string::npos) {
        auto eol = content.find('\n', intent);
        cand.intent = content.substr(
            intent + 7, eol == std::string::npos ? std::string::npos : eol - intent - 7);
        while (!cand.intent.empty() && cand.intent.front() == ' ')
            cand.intent.erase(cand.intent.begin());
    }
    if (cand.intent.empty()) cand.intent = "unlabeled modification";
    return cand;
}

std::string LlmProvider::complete(const std::string& system_text,
                                  const std::string& user_text) {
    nlohmann::json body;
    body["model"] = cfg_.model;
    body["temperature"] = cfg_.temperature;
    body["messages"] =
        nlohmann::json::array({{{"role", "system"}, {"content", system_text}},
                               {{"role", "user"}, {"content", user_text}}});

    // split a path prefix like /v1 off the base URL; httplib clients only
    // take scheme://host:port
    std::string host = cfg_.base_url;
    std::string prefix;
    const auto scheme_end = host.find("://");
    const auto path_start =
        host.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start != std::string::npos) {
        prefix = host.substr(path_start);
        host = host.substr(0, path_start);
        while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    }

    httplib::Client cli(host.c_str());
    cli.set_connection_timeout(cfg_.timeout_seconds, 0);
    cli.set_read_timeout(cfg_.timeout_seconds, 0);
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()))
        cli.set_default_headers({{"Authorization", std::string("Bearer ") + key}});

    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(250 * attempt));
        auto res =
            cli.Post((prefix + "/chat/completions").c_str(), body.dump(), "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            last_error = "http status " + std::to_string(res->status);
            if (res->status >= 500) continue;  // retry server errors only
            break;
        }
        nlohmann::json reply = nlohmann::json::parse(res->body);
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    }
    throw std::runtime_error("llm: request failed: " + last_error);
}

CandidateExpert LlmProvider::propose(const PromptBundle& prompt, std::uint64_t seed) {
    (void)seed;  // sampling lives server-side; temperature comes from config
    const std::string user = prompt.render();
    log_event("prompt", user);
    const std::string content = complete(kSystemPrompt, user);
    log_event("response", content);
    return parse_completion(content);
}

CandidateExpert LlmProvider::repair(const PromptBundle& prompt,
                                    const CandidateExpert& failed,
                                    const std::string& error_report, int attempt,
                                    std::uint64_t seed) {
    (void)seed;
    std::string user = prompt.render();
    user += "\n\nYour previous candidate failed validation (attempt " +
            std::to_string(attempt) + "):\n" + error_report +
            "\nPrevious candidate:\n" + failed.dsl_text +
            "\nFix the problem and respond in the same format.";
    log_event("prompt", user);
    const std::string content = complete(kSystemPrompt, user);
    log_event("response", content);
    return parse_completion(content);
}

std::unique_ptr<Provider> make_provider(const ProviderConfig& cfg) {
    if (cfg.kind == "mock") return std::make_unique<MockProvider>();
    if (cfg.kind == "failing") return std::make_unique<FailingProvider>();
    if (cfg.kind == "llm") return std::make_unique<LlmProvider>(cfg.llm);
    throw std::runtime_error("provider: unknown kind '" + cfg.kind + "'");
}

}  // namespace symboost
