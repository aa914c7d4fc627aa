#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace symboost {

// Preprocessing recipe for one raw CSV column, recorded at ingestion so the
// exact transform can be re-applied to prediction inputs.
struct ColumnSchema {
    std::string name;
    bool categorical = false;
    double median = 0.0;                   // numeric imputation value
    std::vector<std::string> categories;   // lexicographic, categorical only
};

// Immutable numeric feature matrix with binary target. Never holds NaN/Inf;
// safe to share read-only across chain workers.
struct Dataset {
    std::vector<double> values;  // row-major, n_rows * n_cols
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<int> target;     // {0,1}, empty when loaded without labels
    std::vector<std::string> feature_names;
    std::vector<std::string> feature_descriptions;  // empty or aligned with names
    std::vector<std::string> row_ids;
    std::vector<ColumnSchema> source_schema;
    std::string target_column;

    double at(std::size_t row, std::size_t col) const { return values[row * n_cols + col]; }
    std::span<const double> row(std::size_t i) const {
        return {values.data() + i * n_cols, n_cols};
    }
    // -1 when the name is not in the schema
    int feature_index(const std::string& name) const;
};

// CSV ingestion. Header row required. Categorical columns are one-hot
// expanded in lexicographic category order; missing numeric cells take the
// column median. A column named "row_id" supplies row identifiers.
Dataset load_csv(const std::string& path, const std::string& target_column,
                 const std::map<std::string, std::string>& descriptions = {});

// Re-applies a recorded preprocessing recipe to a new file (prediction path).
// The target column may be absent; every schema column must be present.
Dataset load_csv_with_schema(const std::string& path,
                             const std::vector<ColumnSchema>& schema,
                             const std::string& target_column);

// Writes the expanded numeric matrix; load_csv on the result reproduces the
// values bit-exactly.
void save_csv(const Dataset& data, const std::string& path);

// Deterministic split, |train| = round(fraction * n) clamped to [1, n-1],
// stratified by target when both classes have at least two members.
std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction,
                                  std::uint64_t seed);

struct FeatureStat {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    std::vector<double> deciles;  // order statistics at q = 0.1 .. 0.9
    double iv = 0.0;
    double psi = 0.0;
};

struct FeatureStats {
    std::vector<FeatureStat> per_feature;  // aligned with feature_names
};

// IV and PSI over 10 train-quantile bins. `smoothing` events are added to
// each bin count before normalizing (0.5 by default, 0 disables).
FeatureStats feature_stats(const Dataset& train, const Dataset& val,
                           double smoothing = 0.5);

// Smallest sorted value whose empirical CDF reaches q (order statistic, no
// interpolation; commutes with monotone transforms).
double quantile_sorted(const std::vector<double>& sorted_values, double q);

std::string schema_to_json(const Dataset& data);
std::vector<ColumnSchema> schema_from_json(const std::string& text,
                                           std::string* target_column);

}  // namespace symboost
