#include "symboost/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

#include "symboost/rng.hpp"

namespace symboost {

namespace {

bool is_missing(const std::string& cell) {
    return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "?";
}

bool parse_double(const std::string& cell, double* out) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0' || !std::isfinite(v)) return false;
    *out = v;
    return true;
}

// minimal RFC-4180-ish reader: quoted fields, embedded commas and quotes
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c == '\r') {
            // tolerate CRLF
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        out += c;
    }
    out += '"';
    return out;
}

std::vector<std::vector<std::string>> read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("dataset: cannot open file: " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() && in.peek() == EOF) break;
        rows.push_back(split_csv_line(line));
    }
    if (rows.empty()) throw std::runtime_error("dataset: empty file: " + path);
    return rows;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int parse_binary_target(const std::string& cell, const std::string& column) {
    double v;
    if (!parse_double(cell, &v) || (v != 0.0 && v != 1.0))
        throw std::runtime_error("dataset: target column '" + column +
                                 "' has non-binary value '" + cell + "'");
    return v == 1.0 ? 1 : 0;
}

struct RawTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> cells;  // data rows
    int target_col = -1;
    int row_id_col = -1;
};

RawTable open_table(const std::string& path, const std::string& target_column,
                    bool require_target) {
    RawTable t;
    auto rows = read_table(path);
    t.header = rows.front();
    t.cells.assign(rows.begin() + 1, rows.end());
    if (t.cells.empty()) throw std::runtime_error("dataset: no data rows in " + path);
    for (std::size_t c = 0; c < t.header.size(); ++c) {
        if (t.header[c] == target_column) t.target_col = static_cast<int>(c);
        if (t.header[c] == "row_id") t.row_id_col = static_cast<int>(c);
    }
    if (require_target && t.target_col < 0)
        throw std::runtime_error("dataset: target column '" + target_column +
                                 "' not found in " + path);
    for (const auto& row : t.cells)
        if (row.size() != t.header.size())
            throw std::runtime_error("dataset: ragged row in " + path);
    return t;
}

std::string cell_at(const RawTable& t, std::size_t row, int col) {
    return t.cells[row][static_cast<std::size_t>(col)];
}

void finalize(Dataset& d) {
    std::unordered_set<std::string> seen;
    for (const auto& name : d.feature_names)
        if (!seen.insert(name).second)
            throw std::runtime_error("dataset: duplicate feature name '" + name + "'");
    if (d.n_cols == 0) throw std::runtime_error("dataset: no feature columns");
    if (d.n_rows == 0) throw std::runtime_error("dataset: no rows");
}

}  // namespace

int Dataset::feature_index(const std::string& name) const {
    for (std::size_t i = 0; i < feature_names.size(); ++i)
        if (feature_names[i] == name) return static_cast<int>(i);
    return -1;
}

Dataset load_csv(const std::string& path, const std::string& target_column,
                 const std::map<std::string, std::string>& descriptions) {
    RawTable t = open_table(path, target_column, /*require_target=*/true);
    const std::size_t n = t.cells.size();

    Dataset d;
    d.target_column = target_column;
    d.n_rows = n;
    d.target.resize(n);
    for (std::size_t r = 0; r < n; ++r)
        d.target[r] = parse_binary_target(cell_at(t, r, t.target_col), target_column);

    d.row_ids.resize(n);
    for (std::size_t r = 0; r < n; ++r)
        d.row_ids[r] = t.row_id_col >= 0 ? cell_at(t, r, t.row_id_col) : std::to_string(r);

    // decide column kinds and imputation values
    std::vector<std::vector<double>> columns;  // expanded feature columns
    for (std::size_t c = 0; c < t.header.size(); ++c) {
        if (static_cast<int>(c) == t.target_col || static_cast<int>(c) == t.row_id_col)
            continue;
        const std::string& col_name = t.header[c];
        std::vector<double> numeric(n);
        bool all_numeric = true;
        std::size_t present = 0;
        for (std::size_t r = 0; r < n; ++r) {
            const std::string cell = cell_at(t, r, static_cast<int>(c));
            if (is_missing(cell)) continue;
            ++present;
            if (!parse_double(cell, &numeric[r])) {
                all_numeric = false;
                break;
            }
        }
        if (present == 0)
            throw std::runtime_error("dataset: column '" + col_name +
                                     "' has zero parseable values");

        ColumnSchema schema;
        schema.name = col_name;
        auto desc_it = descriptions.find(col_name);
        const std::string desc = desc_it != descriptions.end() ? desc_it->second : "";

        if (all_numeric) {
            std::vector<double> observed;
            observed.reserve(present);
            for (std::size_t r = 0; r < n; ++r)
                if (!is_missing(cell_at(t, r, static_cast<int>(c))))
                    observed.push_back(numeric[r]);
            schema.median = median_of(observed);
            std::vector<double> col(n);
            for (std::size_t r = 0; r < n; ++r) {
                const std::string cell = cell_at(t, r, static_cast<int>(c));
                col[r] = is_missing(cell) ? schema.median : numeric[r];
            }
            columns.push_back(std::move(col));
            d.feature_names.push_back(col_name);
            d.feature_descriptions.push_back(desc);
        } else {
            schema.categorical = true;
            std::set<std::string> cats;
            for (std::size_t r = 0; r < n; ++r) {
                const std::string cell = cell_at(t, r, static_cast<int>(c));
                if (!is_missing(cell)) cats.insert(cell);
            }
            schema.categories.assign(cats.begin(), cats.end());  // lexicographic
            for (const auto& cat : schema.categories) {
                std::vector<double> col(n, 0.0);
                for (std::size_t r = 0; r < n; ++r)
                    if (cell_at(t, r, static_cast<int>(c)) == cat) col[r] = 1.0;
                columns.push_back(std::move(col));
                d.feature_names.push_back(col_name + "=" + cat);
                d.feature_descriptions.push_back(desc);
            }
        }
        d.source_schema.push_back(std::move(schema));
    }

    d.n_cols = columns.size();
    d.values.resize(n * d.n_cols);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d.n_cols; ++c) d.values[r * d.n_cols + c] = columns[c][r];
    finalize(d);
    return d;
}

Dataset load_csv_with_schema(const std::string& path,
                             const std::vector<ColumnSchema>& schema,
                             const std::string& target_column) {
    RawTable t = open_table(path, target_column, /*require_target=*/false);
    const std::size_t n = t.cells.size();

    std::unordered_map<std::string, int> col_index;
    for (std::size_t c = 0; c < t.header.size(); ++c)
        col_index[t.header[c]] = static_cast<int>(c);

    Dataset d;
    d.target_column = target_column;
    d.n_rows = n;
    d.source_schema = schema;
    d.row_ids.resize(n);
    for (std::size_t r = 0; r < n; ++r)
        d.row_ids[r] = t.row_id_col >= 0 ? cell_at(t, r, t.row_id_col) : std::to_string(r);
    if (t.target_col >= 0) {
        d.target.resize(n);
        for (std::size_t r = 0; r < n; ++r)
            d.target[r] = parse_binary_target(cell_at(t, r, t.target_col), target_column);
    }

    std::vector<std::vector<double>> columns;
    for (const auto& col : schema) {
        auto it = col_index.find(col.name);
        if (it == col_index.end())
            throw std::runtime_error("dataset: input is missing feature column '" +
                                     col.name + "'");
        const int src = it->second;
        if (!col.categorical) {
            std::vector<double> out(n);
            for (std::size_t r = 0; r < n; ++r) {
                const std::string cell = cell_at(t, r, src);
                double v;
                if (is_missing(cell)) {
                    out[r] = col.median;
                } else if (parse_double(cell, &v)) {
                    out[r] = v;
                } else {
                    throw std::runtime_error("dataset: non-numeric value '" + cell +
                                             "' in numeric column '" + col.name + "'");
                }
            }
            columns.push_back(std::move(out));
            d.feature_names.push_back(col.name);
            d.feature_descriptions.push_back("");
        } else {
            for (const auto& cat : col.categories) {
                std::vector<double> out(n, 0.0);
                for (std::size_t r = 0; r < n; ++r)
                    if (cell_at(t, r, src) == cat) out[r] = 1.0;
                columns.push_back(std::move(out));
                d.feature_names.push_back(col.name + "=" + cat);
                d.feature_descriptions.push_back("");
            }
        }
    }

    d.n_cols = columns.size();
    d.values.resize(n * d.n_cols);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d.n_cols; ++c) d.values[r * d.n_cols + c] = columns[c][r];
    finalize(d);
    return d;
}

void save_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("dataset: cannot write file: " + path);
    out << "row_id";
    for (const auto& name : data.feature_names) out << ',' << csv_escape(name);
    if (!data.target.empty()) out << ',' << csv_escape(data.target_column);
    out << '\n';
    char buf[40];
    for (std::size_t r = 0; r < data.n_rows; ++r) {
        out << csv_escape(data.row_ids[r]);
        for (std::size_t c = 0; c < data.n_cols; ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", data.at(r, c));
            out << ',' << buf;
        }
        if (!data.target.empty()) out << ',' << data.target[r];
        out << '\n';
    }
}

namespace {

Dataset take_rows(const Dataset& data, const std::vector<std::size_t>& rows) {
    Dataset d;
    d.n_rows = rows.size();
    d.n_cols = data.n_cols;
    d.feature_names = data.feature_names;
    d.feature_descriptions = data.feature_descriptions;
    d.source_schema = data.source_schema;
    d.target_column = data.target_column;
    d.values.reserve(rows.size() * data.n_cols);
    d.row_ids.reserve(rows.size());
    if (!data.target.empty()) d.target.reserve(rows.size());
    for (std::size_t r : rows) {
        auto row = data.row(r);
        d.values.insert(d.values.end(), row.begin(), row.end());
        d.row_ids.push_back(data.row_ids[r]);
        if (!data.target.empty()) d.target.push_back(data.target[r]);
    }
    return d;
}

}  // namespace

std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction,
                                  std::uint64_t seed) {
    if (data.n_rows < 2) throw std::runtime_error("split: need at least 2 rows");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::runtime_error("split: fraction must lie in (0,1)");

    const std::size_t n = data.n_rows;
    std::size_t n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(n)));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < n; ++i) (data.target[i] != 0 ? pos : neg).push_back(i);

    Rng rng(seed);
    std::vector<std::size_t> train_rows, val_rows;
    if (pos.size() >= 2 && neg.size() >= 2) {
        // largest-remainder quotas keep |train| exact under stratification
        double qp = train_fraction * static_cast<double>(pos.size());
        double qn = train_fraction * static_cast<double>(neg.size());
        std::size_t tp = static_cast<std::size_t>(std::floor(qp));
        std::size_t tn = static_cast<std::size_t>(std::floor(qn));
        while (tp + tn < n_train) {
            if (qp - std::floor(qp) >= qn - std::floor(qn) && tp < pos.size())
                ++tp;
            else
                ++tn;
        }
        while (tp + tn > n_train) {
            if (qp - std::floor(qp) < qn - std::floor(qn) && tp > 0)
                --tp;
            else
                --tn;
        }
        rng.shuffle(pos);
        rng.shuffle(neg);
        for (std::size_t i = 0; i < pos.size(); ++i)
            (i < tp ? train_rows : val_rows).push_back(pos[i]);
        for (std::size_t i = 0; i < neg.size(); ++i)
            (i < tn ? train_rows : val_rows).push_back(neg[i]);
    } else {
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), std::size_t{0});
        rng.shuffle(all);
        for (std::size_t i = 0; i < n; ++i)
            (i < n_train ? train_rows : val_rows).push_back(all[i]);
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(val_rows.begin(), val_rows.end());
    return {take_rows(data, train_rows), take_rows(data, val_rows)};
}

double quantile_sorted(const std::vector<double>& sorted_values, double q) {
    if (sorted_values.empty()) throw std::runtime_error("quantile: empty input");
    const double n = static_cast<double>(sorted_values.size());
    auto idx = static_cast<std::size_t>(std::ceil(q * n));
    idx = idx == 0 ? 0 : idx - 1;
    idx = std::min(idx, sorted_values.size() - 1);
    return sorted_values[idx];
}

namespace {

std::vector<double> bin_edges(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    std::vector<double> edges;
    for (int b = 1; b < 10; ++b) {
        double e = quantile_sorted(values, static_cast<double>(b) / 10.0);
        if (edges.empty() || e > edges.back()) edges.push_back(e);
    }
    return edges;  // possibly fewer than 9 after deduplication
}

std::size_t bin_of(double x, const std::vector<double>& edges) {
    std::size_t b = 0;
    while (b < edges.size() && x > edges[b]) ++b;
    return b;
}

}  // namespace

FeatureStats feature_stats(const Dataset& train, const Dataset& val, double smoothing) {
    if (train.feature_names != val.feature_names)
        throw std::runtime_error("feature_stats: train/val schema mismatch");
    if (val.n_rows == 0) throw std::runtime_error("feature_stats: empty validation set");
    std::size_t n_pos = 0;
    for (int y : train.target) n_pos += (y != 0);
    if (n_pos == 0 || n_pos == train.n_rows)
        throw std::runtime_error("feature_stats: train set must contain both classes");

    FeatureStats stats;
    stats.per_feature.resize(train.n_cols);
    for (std::size_t f = 0; f < train.n_cols; ++f) {
        std::vector<double> col(train.n_rows);
        for (std::size_t r = 0; r < train.n_rows; ++r) col[r] = train.at(r, f);

        FeatureStat& s = stats.per_feature[f];
        s.min = *std::min_element(col.begin(), col.end());
        s.max = *std::max_element(col.begin(), col.end());
        s.mean = std::accumulate(col.begin(), col.end(), 0.0) /
                 static_cast<double>(col.size());
        std::vector<double> sorted = col;
        std::sort(sorted.begin(), sorted.end());
        s.deciles.resize(9);
        for (int d = 1; d <= 9; ++d)
            s.deciles[d - 1] = quantile_sorted(sorted, static_cast<double>(d) / 10.0);

        const auto edges = bin_edges(col);
        const std::size_t n_bins = edges.size() + 1;

        std::vector<double> good(n_bins, smoothing), bad(n_bins, smoothing);
        std::vector<double> p_cnt(n_bins, smoothing), q_cnt(n_bins, smoothing);
        for (std::size_t r = 0; r < train.n_rows; ++r) {
            std::size_t b = bin_of(train.at(r, f), edges);
            (train.target[r] != 0 ? good : bad)[b] += 1.0;
            p_cnt[b] += 1.0;
        }
        for (std::size_t r = 0; r < val.n_rows; ++r)
            q_cnt[bin_of(val.at(r, f), edges)] += 1.0;

        auto normalize = [](std::vector<double>& v) {
            double total = std::accumulate(v.begin(), v.end(), 0.0);
            for (double& x : v) x /= total;
        };
        normalize(good);
        normalize(bad);
        normalize(p_cnt);
        normalize(q_cnt);

        double iv = 0.0, psi = 0.0;
        for (std::size_t b = 0; b < n_bins; ++b) {
            if (good[b] > 0.0 && bad[b] > 0.0)
                iv += (good[b] - bad[b]) * std::log(good[b] / bad[b]);
            if (p_cnt[b] > 0.0 && q_cnt[b] > 0.0)
                psi += (p_cnt[b] - q_cnt[b]) * std::log(p_cnt[b] / q_cnt[b]);
        }
        s.iv = iv;
        s.psi = psi;
    }
    return stats;
}

std::string schema_to_json(const Dataset& data) {
    nlohmann::json j;
    j["target_column"] = data.target_column;
    j["columns"] = nlohmann::json::array();
    for (const auto& col : data.source_schema) {
        nlohmann::json c;
        c["name"] = col.name;
        c["categorical"] = col.categorical;
        if (col.categorical)
            c["categories"] = col.categories;
        else
            c["median"] = col.median;
        j["columns"].push_back(std::move(c));
    }
    j["feature_names"] = data.feature_names;
    return j.dump(2);
}

std::vector<ColumnSchema> schema_from_json(const std::string& text,
                                           std::string* target_column) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (target_column) *target_column = j.at("target_column").get<std::string>();
    std::vector<ColumnSchema> schema;
    for (const auto& c : j.at("columns")) {
        ColumnSchema col;
        col.name = c.at("name").get<std::string>();
        col.categorical = c.at("categorical").get<bool>();
        if (col.categorical)
            col.categories = c.at("categories").get<std::vector<std::string>>();
        else
            col.median = c.at("median").get<double>();
        schema.push_back(std::move(col));
    }
    return schema;
}

}  // namespace symboost
