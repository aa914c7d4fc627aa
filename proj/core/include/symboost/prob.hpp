#pragma once

#include <algorithm>
#include <cmath>

namespace symboost {

inline double sigmoid(double logit) {
    if (logit >= 0.0) {
        double e = std::exp(-logit);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(logit);
    return e / (1.0 + e);
}

// ln(p / (1-p)) with p clipped to [1e-6, 1 - 1e-6]
inline double clipped_logit(double p) {
    constexpr double eps = 1e-6;
    p = std::clamp(p, eps, 1.0 - eps);
    return std::log(p / (1.0 - p));
}

}  // namespace symboost
