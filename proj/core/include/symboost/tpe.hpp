#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "symboost/rng.hpp"

namespace symboost {

struct SearchDim {
    enum class Scale { Linear, Log };
    std::string name;
    double lower = 0.0;
    double upper = 1.0;
    Scale scale = Scale::Linear;
};

struct SearchSpace {
    std::vector<SearchDim> dims;            // free parameters
    std::map<std::string, double> frozen;   // injected verbatim into every theta
};

struct Trial {
    std::map<std::string, double> theta;
    double loss = 0.0;
};

struct TrialLog {
    std::vector<Trial> trials;
    std::size_t best_index = 0;

    std::string to_json() const;
};

struct TpeConfig {
    std::size_t max_trials = 100;  // M
    std::size_t n_startup = 10;
    double gamma = 0.25;
    std::size_t n_candidates = 24;
    std::uint64_t seed = 0;
};

struct TpeResult {
    std::map<std::string, double> theta;
    double loss = 0.0;
    TrialLog log;
};

// Tree-structured Parzen Estimator over a box of named parameters.
// Startup trials are uniform on the (scaled) box; afterwards completed
// trials split at the gamma loss quantile into good/bad sets, per-dimension
// truncated Gaussian KDEs l (good) and g (bad) are built with Scott-style
// bandwidths, n_candidates are drawn from l and the one maximizing the
// density ratio l/g (dimension-wise product) is evaluated next.
TpeResult tpe_optimize(
    const std::function<double(const std::map<std::string, double>&)>& objective,
    const SearchSpace& space, const TpeConfig& cfg);

// One proposal given the trials so far; exposed for unit-testing the sampler.
std::map<std::string, double> tpe_suggest(const TrialLog& log, const SearchSpace& space,
                                          const TpeConfig& cfg, Rng& rng);

void validate_space(const SearchSpace& space);

}  // namespace symboost
