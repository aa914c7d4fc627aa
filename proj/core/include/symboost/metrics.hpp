#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace symboost {

// Mann-Whitney AUC, ties counted as 0.5. Throws if a class is missing.
double auc(const std::vector<int>& y, const std::vector<double>& scores);

// Kolmogorov-Smirnov statistic: max gap between class-conditional score CDFs.
double ks(const std::vector<int>& y, const std::vector<double>& scores);

// Mean binary cross-entropy; probabilities clipped to [1e-9, 1 - 1e-9].
double logloss(const std::vector<int>& y, const std::vector<double>& p);

// Fraction of rows where (p >= threshold) matches the label.
double accuracy(const std::vector<int>& y, const std::vector<double>& p,
                double threshold = 0.5);

struct EvalReport {
    double auc = 0.0;
    double ks = 0.0;
    double accuracy = 0.0;
    double logloss = 0.0;
    std::size_t n = 0;
};

EvalReport evaluate_scores(const std::vector<int>& y, const std::vector<double>& p);

// Side-by-side report with deltas, aligned-column text form.
std::string render_comparison(const EvalReport& baseline, const EvalReport& candidate);
std::string comparison_json(const EvalReport& baseline, const EvalReport& candidate);

}  // namespace symboost
