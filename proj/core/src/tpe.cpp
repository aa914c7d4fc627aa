#include "symboost/tpe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace symboost {

namespace {

constexpr double kMinBandwidth = 1e-6;

double to_scaled(const SearchDim& d, double v) {
    return d.scale == SearchDim::Scale::Log ? std::log(v) : v;
}

double from_scaled(const SearchDim& d, double x) {
    return d.scale == SearchDim::Scale::Log ? std::exp(x) : x;
}

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Gaussian mixture truncated to [a, b]. One extra box-wide component sits
// at the box center (the usual TPE prior); without it the good-side KDE
// collapses onto the incumbent and the search stalls.
struct Kde {
    std::vector<double> centers;  // last entry is the prior component
    double bandwidth = kMinBandwidth;
    double prior_bandwidth = 1.0;
    double a = 0.0, b = 1.0;

    void fit(std::vector<double> mu, double lo, double hi) {
        a = lo;
        b = hi;
        prior_bandwidth = hi - lo;
        const double k = static_cast<double>(mu.size());
        // Scott-style width from the spread of the kernel centers, clipped
        // from below by a box-relative floor so the mixture never collapses
        // onto the incumbent
        const auto [mn, mx] = std::minmax_element(mu.begin(), mu.end());
        const double spread = *mx - *mn;
        const double floor = (hi - lo) / std::min(100.0, k + 2.0);
        bandwidth =
            std::max({spread * 1.06 * std::pow(k, -0.2), floor, kMinBandwidth});
        centers = std::move(mu);
        centers.push_back(0.5 * (lo + hi));
    }

    double component_bandwidth(std::size_t i) const {
        return i + 1 == centers.size() ? prior_bandwidth : bandwidth;
    }

    double log_density(double x) const {
        double total = 0.0;
        for (std::size_t i = 0; i < centers.size(); ++i) {
            const double h = component_bandwidth(i);
            const double z = (x - centers[i]) / h;
            const double mass =
                norm_cdf((b - centers[i]) / h) - norm_cdf((a - centers[i]) / h);
            total += std::exp(-0.5 * z * z) /
                     (h * std::sqrt(2.0 * 3.141592653589793) * std::max(mass, 1e-12));
        }
        total /= static_cast<double>(centers.size());
        return std::log(std::max(total, 1e-300));
    }

    double sample(Rng& rng) const {
        const std::size_t i = rng.uniform_index(centers.size());
        const double h = component_bandwidth(i);
        for (int tries = 0; tries < 100; ++tries) {
            const double x = centers[i] + h * rng.normal();
            if (x >= a && x <= b) return x;
        }
        return rng.uniform(a, b);
    }
};

std::map<std::string, double> uniform_theta(const SearchSpace& space, Rng& rng) {
    std::map<std::string, double> theta;
    for (const auto& d : space.dims)
        theta[d.name] = from_scaled(d, rng.uniform(to_scaled(d, d.lower), to_scaled(d, d.upper)));
    return theta;
}

}  // namespace

void validate_space(const SearchSpace& space) {
    for (const auto& d : space.dims) {
        if (!(d.lower < d.upper))
            throw std::runtime_error("tpe: dimension '" + d.name +
                                     "' needs lower < upper");
        if (d.scale == SearchDim::Scale::Log && !(d.lower > 0.0))
            throw std::runtime_error("tpe: log-scale dimension '" + d.name +
                                     "' needs lower > 0");
        if (space.frozen.count(d.name))
            throw std::runtime_error("tpe: dimension '" + d.name + "' is also frozen");
    }
}

std::map<std::string, double> tpe_suggest(const TrialLog& log, const SearchSpace& space,
                                          const TpeConfig& cfg, Rng& rng) {
    const std::size_t k = log.trials.size();
    if (k < cfg.n_startup || k < 2) return uniform_theta(space, rng);

    // rank trials by loss, stable on trial index
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return log.trials[a].loss < log.trials[b].loss;
    });
    std::size_t n_good = static_cast<std::size_t>(
        std::ceil(cfg.gamma * static_cast<double>(k)));
    n_good = std::clamp<std::size_t>(n_good, 1, k - 1);

    std::map<std::string, double> best;
    double best_score = -std::numeric_limits<double>::infinity();
    std::vector<Kde> good_kde(space.dims.size()), bad_kde(space.dims.size());
    for (std::size_t d = 0; d < space.dims.size(); ++d) {
        const SearchDim& dim = space.dims[d];
        const double a = to_scaled(dim, dim.lower);
        const double b = to_scaled(dim, dim.upper);
        std::vector<double> good, bad;
        for (std::size_t i = 0; i < k; ++i) {
            const double v = to_scaled(dim, log.trials[order[i]].theta.at(dim.name));
            (i < n_good ? good : bad).push_back(v);
        }
        good_kde[d].fit(std::move(good), a, b);
        bad_kde[d].fit(std::move(bad), a, b);
    }

    for (std::size_t c = 0; c < cfg.n_candidates; ++c) {
        std::map<std::string, double> cand;
        double score = 0.0;
        for (std::size_t d = 0; d < space.dims.size(); ++d) {
            const double x = good_kde[d].sample(rng);
            score += good_kde[d].log_density(x) - bad_kde[d].log_density(x);
            cand[space.dims[d].name] = from_scaled(space.dims[d], x);
        }
        if (score > best_score) {
            best_score = score;
            best = std::move(cand);
        }
    }
    return best;
}

TpeResult tpe_optimize(
    const std::function<double(const std::map<std::string, double>&)>& objective,
    const SearchSpace& space, const TpeConfig& cfg) {
    if (cfg.max_trials < 1) throw std::runtime_error("tpe: max_trials must be >= 1");
    validate_space(space);

    TpeResult result;
    Rng rng(cfg.seed);

    if (space.dims.empty()) {
        // nothing to search; evaluate the frozen point once
        Trial t;
        t.theta = space.frozen;
        t.loss = objective(t.theta);
        result.theta = t.theta;
        result.loss = t.loss;
        result.log.trials.push_back(std::move(t));
        result.log.best_index = 0;
        return result;
    }

    for (std::size_t m = 0; m < cfg.max_trials; ++m) {
        Trial t;
        t.theta = tpe_suggest(result.log, space, cfg, rng);
        for (const auto& [name, v] : space.frozen) t.theta[name] = v;
        t.loss = objective(t.theta);
        result.log.trials.push_back(std::move(t));
        const Trial& added = result.log.trials.back();
        if (m == 0 || added.loss < result.log.trials[result.log.best_index].loss)
            result.log.best_index = m;
    }
    result.theta = result.log.trials[result.log.best_index].theta;
    result.loss = result.log.trials[result.log.best_index].loss;
    return result;
}

std::string TrialLog::to_json() const {
    nlohmann::json j;
    j["best_index"] = best_index;
    j["trials"] = nlohmann::json::array();
    for (const auto& t : trials)
        j["trials"].push_back({{"theta", t.theta}, {"loss", t.loss}});
    return j.dump();
}

}  // namespace symboost
