#include "symboost/tpe.hpp"

#include <algorithm>
#include <cmath>

#include "doctest.h"

using namespace symboost;

namespace {

SearchSpace box_1d(double lo, double hi) {
    SearchSpace s;
    s.dims.push_back({"x", lo, hi, SearchDim::Scale::Linear});
    return s;
}

double parabola(const std::map<std::string, double>& theta) {
    const double x = theta.at("x");
    return (x - 2.0) * (x - 2.0);
}

}  // namespace

TEST_CASE("quadratic bowl is located within tolerance") {
    // grid oracle: 10001 points over [0,5] put the optimum at exactly 2.0
    double grid_best = 1e18, grid_x = 0.0;
    for (int i = 0; i <= 10000; ++i) {
        const double x = 5.0 * i / 10000.0;
        if ((x - 2.0) * (x - 2.0) < grid_best) {
            grid_best = (x - 2.0) * (x - 2.0);
            grid_x = x;
        }
    }
    CHECK(grid_x == doctest::Approx(2.0));

    TpeConfig cfg;
    cfg.max_trials = 100;
    cfg.seed = 7;
    TpeResult res = tpe_optimize(parabola, box_1d(0.0, 5.0), cfg);
    CHECK(std::fabs(res.theta.at("x") - 2.0) <= 0.2);
    CHECK(res.log.trials.size() == 100);
}

TEST_CASE("frozen assignments are injected into every trial") {
    SearchSpace s = box_1d(0.0, 5.0);
    s.frozen["a"] = 1.5;
    TpeConfig cfg;
    cfg.max_trials = 30;
    cfg.seed = 3;
    auto obj = [](const std::map<std::string, double>& theta) {
        return (theta.at("x") - 1.0) * (theta.at("x") - 1.0) + theta.at("a");
    };
    TpeResult res = tpe_optimize(obj, s, cfg);
    for (const auto& t : res.log.trials) CHECK(t.theta.at("a") == 1.5);
}

TEST_CASE("M below n_startup behaves as pure random search") {
    TpeConfig cfg;
    cfg.max_trials = 5;
    cfg.n_startup = 10;
    cfg.seed = 11;
    TpeResult res = tpe_optimize(parabola, box_1d(0.0, 5.0), cfg);
    REQUIRE(res.log.trials.size() == 5);
    double best = 1e18;
    for (const auto& t : res.log.trials) best = std::min(best, t.loss);
    CHECK(res.loss == doctest::Approx(best));
}

TEST_CASE("empty free set evaluates the frozen point once") {
    SearchSpace s;
    s.frozen["a"] = 2.0;
    TpeConfig cfg;
    cfg.max_trials = 50;
    int calls = 0;
    auto obj = [&](const std::map<std::string, double>& theta) {
        ++calls;
        return theta.at("a");
    };
    TpeResult res = tpe_optimize(obj, s, cfg);
    CHECK(calls == 1);
    CHECK(res.loss == doctest::Approx(2.0));
}

TEST_CASE("invalid boxes are rejected") {
    SearchSpace bad = box_1d(2.0, 1.0);
    CHECK_THROWS(tpe_optimize(parabola, bad, TpeConfig{}));
    SearchSpace log_bad;
    log_bad.dims.push_back({"x", -1.0, 1.0, SearchDim::Scale::Log});
    CHECK_THROWS(tpe_optimize(parabola, log_bad, TpeConfig{}));
}

TEST_CASE("suggest draws uniformly from an empty log") {
    SearchSpace s = box_1d(-2.0, 4.0);
    TrialLog log;
    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        auto theta = tpe_suggest(log, s, TpeConfig{}, rng);
        CHECK(theta.at("x") >= -2.0);
        CHECK(theta.at("x") <= 4.0);
    }
}

TEST_CASE("log-scale startup is uniform in the exponent") {
    SearchSpace s;
    s.dims.push_back({"x", 1e-3, 1e+1, SearchDim::Scale::Log});
    TrialLog log;
    Rng rng(77);
    TpeConfig cfg;
    const int n = 10000;
    std::vector<double> exponents;
    exponents.reserve(n);
    for (int i = 0; i < n; ++i)
        exponents.push_back(std::log(tpe_suggest(log, s, cfg, rng).at("x")));
    std::sort(exponents.begin(), exponents.end());

    // KS statistic against the uniform CDF over [ln 1e-3, ln 1e1]
    const double lo = std::log(1e-3), hi = std::log(1e+1);
    double ks = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = (exponents[static_cast<std::size_t>(i)] - lo) / (hi - lo);
        ks = std::max(ks, std::fabs(u - (i + 1.0) / n));
        ks = std::max(ks, std::fabs(u - static_cast<double>(i) / n));
    }
    CHECK(ks < 0.02);
}

TEST_CASE("identical losses still split into non-empty good and bad sets") {
    SearchSpace s = box_1d(0.0, 1.0);
    TrialLog log;
    Rng fill(1);
    for (int i = 0; i < 20; ++i) {
        Trial t;
        t.theta["x"] = fill.uniform01();
        t.loss = 0.5;  // all identical
        log.trials.push_back(t);
    }
    Rng rng(2);
    TpeConfig cfg;
    cfg.n_startup = 10;
    auto theta = tpe_suggest(log, s, cfg, rng);
    CHECK(theta.at("x") >= 0.0);
    CHECK(theta.at("x") <= 1.0);
}

TEST_CASE("every proposal stays inside the box for every seed") {
    SearchSpace s;
    s.dims.push_back({"x", -1.0, 2.0, SearchDim::Scale::Linear});
    s.dims.push_back({"y", 0.5, 8.0, SearchDim::Scale::Log});
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        TpeConfig cfg;
        cfg.max_trials = 60;
        cfg.seed = seed;
        auto obj = [](const std::map<std::string, double>& theta) {
            return theta.at("x") * theta.at("x") + std::log(theta.at("y"));
        };
        TpeResult res = tpe_optimize(obj, s, cfg);
        for (const auto& t : res.log.trials) {
            CHECK(t.theta.at("x") >= -1.0);
            CHECK(t.theta.at("x") <= 2.0);
            CHECK(t.theta.at("y") >= 0.5);
            CHECK(t.theta.at("y") <= 8.0);
        }
    }
}

TEST_CASE("best loss is the running minimum of the log") {
    TpeConfig cfg;
    cfg.max_trials = 80;
    cfg.seed = 19;
    TpeResult res = tpe_optimize(parabola, box_1d(0.0, 5.0), cfg);
    double running = 1e18;
    for (std::size_t i = 0; i < res.log.trials.size(); ++i) {
        running = std::min(running, res.log.trials[i].loss);
        if (i == res.log.best_index)
            CHECK(res.log.trials[i].loss == doctest::Approx(running));
    }
    CHECK(res.loss == doctest::Approx(running));
}

TEST_CASE("budget-matched dominance over uniform random search") {
    auto objective2 = [](const std::map<std::string, double>& theta) {
        const double x = theta.at("x"), y = theta.at("y");
        return (x - 2.0) * (x - 2.0) + (y + 1.0) * (y + 1.0);
    };
    SearchSpace s;
    s.dims.push_back({"x", -5.0, 5.0, SearchDim::Scale::Linear});
    s.dims.push_back({"y", -5.0, 5.0, SearchDim::Scale::Linear});

    std::vector<double> tpe_best, rnd_best;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        TpeConfig cfg;
        cfg.max_trials = 100;
        cfg.seed = seed;
        tpe_best.push_back(tpe_optimize(objective2, s, cfg).loss);

        Rng rng(seed);
        double best = 1e18;
        for (int i = 0; i < 100; ++i) {
            std::map<std::string, double> theta{{"x", rng.uniform(-5.0, 5.0)},
                                                {"y", rng.uniform(-5.0, 5.0)}};
            best = std::min(best, objective2(theta));
        }
        rnd_best.push_back(best);
    }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    CHECK(median(tpe_best) <= median(rnd_best));
}

TEST_CASE("trial log serializes") {
    TpeConfig cfg;
    cfg.max_trials = 3;
    TpeResult res = tpe_optimize(parabola, box_1d(0.0, 5.0), cfg);
    const std::string j = res.log.to_json();
    CHECK(j.find("\"trials\"") != std::string::npos);
    CHECK(j.find("\"best_index\"") != std::string::npos);
}
