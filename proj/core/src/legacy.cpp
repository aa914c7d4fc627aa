#include "symboost/legacy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "symboost/rng.hpp"

namespace symboost {

FrozenModel FrozenModel::from_gbdt(GbdtModel model) {
    FrozenModel f;
    f.is_gbdt_ = true;
    f.model_ = std::move(model);
    f.fingerprint_ = fnv1a64(f.model_.to_json());
    return f;
}

FrozenModel FrozenModel::from_score_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("legacy: cannot open score file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("legacy: empty score file");
    // tolerate CRLF
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line != "row_id,probability")
        throw std::runtime_error("legacy: score file header must be 'row_id,probability'");

    FrozenModel f;
    f.is_gbdt_ = false;
    std::string content = line + "\n";
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
            line.pop_back();
        if (line.empty()) continue;
        content += line + "\n";
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("legacy: malformed score row: " + line);
        std::string id = line.substr(0, comma);
        double p = std::stod(line.substr(comma + 1));
        if (p < 0.0 || p > 1.0)
            throw std::runtime_error("legacy: probability outside [0,1] for row_id " + id);
        f.score_logits_[id] = clipped_logit(p);
    }
    if (f.score_logits_.empty()) throw std::runtime_error("legacy: no score rows");
    f.fingerprint_ = fnv1a64(content);
    return f;
}

std::vector<std::size_t> FrozenModel::column_map(const Dataset& data) const {
    const auto& names = model_.feature_names();
    std::vector<std::size_t> map;
    map.reserve(names.size());
    for (const auto& name : names) {
        int idx = data.feature_index(name);
        if (idx < 0)
            throw std::runtime_error("legacy: dataset lacks model feature '" + name + "'");
        map.push_back(static_cast<std::size_t>(idx));
    }
    return map;
}

double FrozenModel::base_logit(const Dataset& data, std::size_t row) const {
    if (is_gbdt_) {
        const auto map = column_map(data);
        std::vector<double> sub(map.size());
        for (std::size_t i = 0; i < map.size(); ++i) sub[i] = data.at(row, map[i]);
        return model_.predict_logit(sub);
    }
    auto it = score_logits_.find(data.row_ids[row]);
    if (it == score_logits_.end())
        throw std::runtime_error("legacy: no score for row_id " + data.row_ids[row]);
    return it->second;
}

double FrozenModel::base_proba(const Dataset& data, std::size_t row) const {
    return sigmoid(base_logit(data, row));
}

std::vector<double> FrozenModel::base_logits(const Dataset& data) const {
    std::vector<double> out(data.n_rows);
    if (is_gbdt_) {
        const auto map = column_map(data);
        std::vector<double> sub(map.size());
        for (std::size_t r = 0; r < data.n_rows; ++r) {
            for (std::size_t i = 0; i < map.size(); ++i) sub[i] = data.at(r, map[i]);
            out[r] = model_.predict_logit(sub);
        }
    } else {
        for (std::size_t r = 0; r < data.n_rows; ++r) {
            auto it = score_logits_.find(data.row_ids[r]);
            if (it == score_logits_.end())
                throw std::runtime_error("legacy: no score for row_id " + data.row_ids[r]);
            out[r] = it->second;
        }
    }
    return out;
}

std::string FrozenModel::to_json() const {
    nlohmann::json j;
    if (is_gbdt_) {
        j["source"] = "gbdt";
        j["model"] = nlohmann::json::parse(model_.to_json());
    } else {
        j["source"] = "score_table";
        // std::map gives a sorted, byte-stable rendering
        std::map<std::string, double> sorted(score_logits_.begin(), score_logits_.end());
        j["logits"] = sorted;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fingerprint_));
    j["fingerprint"] = buf;
    return j.dump(2);
}

FrozenModel FrozenModel::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    FrozenModel f;
    if (j.at("source") == "gbdt") {
        f.is_gbdt_ = true;
        f.model_ = GbdtModel::from_json(j.at("model").dump());
    } else {
        f.is_gbdt_ = false;
        for (auto it = j.at("logits").begin(); it != j.at("logits").end(); ++it)
            f.score_logits_[it.key()] = it.value().get<double>();
    }
    f.fingerprint_ = std::stoull(j.at("fingerprint").get<std::string>(), nullptr, 16);
    return f;
}

}  // namespace symboost
