#include "symboost/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace symboost {

namespace {

void check_lengths(std::size_t ny, std::size_t ns) {
    if (ny != ns) throw std::runtime_error("metrics: label/score length mismatch");
    if (ny == 0) throw std::runtime_error("metrics: empty input");
}

std::pair<std::size_t, std::size_t> class_counts(const std::vector<int>& y) {
    std::size_t pos = 0;
    for (int v : y) pos += (v != 0);
    return {pos, y.size() - pos};
}

}  // namespace

double auc(const std::vector<int>& y, const std::vector<double>& scores) {
    check_lengths(y.size(), scores.size());
    auto [n_pos, n_neg] = class_counts(y);
    if (n_pos == 0 || n_neg == 0)
        throw std::runtime_error("auc: both classes must be present");

    std::vector<std::size_t> order(y.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // average ranks over tie groups, then the rank-sum formulation
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
        for (std::size_t k = i; k < j; ++k)
            if (y[order[k]] != 0) rank_sum_pos += avg_rank;
        i = j;
    }
    double np = static_cast<double>(n_pos);
    double nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

double ks(const std::vector<int>& y, const std::vector<double>& scores) {
    check_lengths(y.size(), scores.size());
    auto [n_pos, n_neg] = class_counts(y);
    if (n_pos == 0 || n_neg == 0)
        throw std::runtime_error("ks: both classes must be present");

    std::vector<std::size_t> order(y.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // sweep the empirical CDFs of both classes over distinct score values
    double best = 0.0;
    double cum_pos = 0.0, cum_neg = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        for (std::size_t k = i; k < j; ++k) {
            if (y[order[k]] != 0)
                cum_pos += 1.0;
            else
                cum_neg += 1.0;
        }
        double gap = std::fabs(cum_pos / static_cast<double>(n_pos) -
                               cum_neg / static_cast<double>(n_neg));
        best = std::max(best, gap);
        i = j;
    }
    return best;
}

double logloss(const std::vector<int>& y, const std::vector<double>& p) {
    check_lengths(y.size(), p.size());
    constexpr double eps = 1e-9;
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double pi = std::clamp(p[i], eps, 1.0 - eps);
        total += y[i] != 0 ? -std::log(pi) : -std::log(1.0 - pi);
    }
    return total / static_cast<double>(y.size());
}

double accuracy(const std::vector<int>& y, const std::vector<double>& p, double threshold) {
    check_lengths(y.size(), p.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        int pred = p[i] >= threshold ? 1 : 0;
        hits += (pred == (y[i] != 0 ? 1 : 0));
    }
    return static_cast<double>(hits) / static_cast<double>(y.size());
}

EvalReport evaluate_scores(const std::vector<int>& y, const std::vector<double>& p) {
    EvalReport r;
    r.auc = auc(y, p);
    r.ks = ks(y, p);
    r.accuracy = accuracy(y, p);
    r.logloss = logloss(y, p);
    r.n = y.size();
    return r;
}

std::string render_comparison(const EvalReport& baseline, const EvalReport& candidate) {
    char buf[256];
    std::string out;
    out += "metric      baseline      final         delta\n";
    auto line = [&](const char* name, double b, double c) {
        std::snprintf(buf, sizeof(buf), "%-10s  %12.6f  %12.6f  %+12.6f\n", name, b, c, c - b);
        out += buf;
    };
    line("auc", baseline.auc, candidate.auc);
    line("ks", baseline.ks, candidate.ks);
    line("accuracy", baseline.accuracy, candidate.accuracy);
    line("logloss", baseline.logloss, candidate.logloss);
    std::snprintf(buf, sizeof(buf), "%-10s  %12zu\n", "n", candidate.n);
    out += buf;
    return out;
}

std::string comparison_json(const EvalReport& baseline, const EvalReport& candidate) {
    nlohmann::json j;
    auto fill = [](const EvalReport& r) {
        return nlohmann::json{{"auc", r.auc},
                              {"ks", r.ks},
                              {"accuracy", r.accuracy},
                              {"logloss", r.logloss},
                              {"n", r.n}};
    };
    j["baseline"] = fill(baseline);
    j["final"] = fill(candidate);
    j["delta"] = {{"auc", candidate.auc - baseline.auc},
                  {"ks", candidate.ks - baseline.ks},
                  {"accuracy", candidate.accuracy - baseline.accuracy},
                  {"logloss", candidate.logloss - baseline.logloss}};
    return j.dump(2);
}

}  // namespace symboost
