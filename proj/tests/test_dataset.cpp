#include "symboost/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "doctest.h"
#include "support/synth.hpp"
#include "symboost/rng.hpp"

using namespace symboost;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const std::string path = synth::temp_dir("dataset") + "/" + name;
    std::ofstream out(path);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("load_csv basic shape") {
    const auto path = write_temp("basic.csv", "f,label\n1.5,0\n2.0,1\n3.5,1\n");
    Dataset d = load_csv(path, "label");
    CHECK(d.n_rows == 3);
    CHECK(d.n_cols == 1);
    CHECK(d.target == std::vector<int>{0, 1, 1});
    CHECK(d.feature_names == std::vector<std::string>{"f"});
}

TEST_CASE("median imputation") {
    const auto path = write_temp("missing.csv", "f,label\n1.0,0\n3.0,1\n,1\n");
    Dataset d = load_csv(path, "label");
    CHECK(d.at(2, 0) == doctest::Approx(2.0));  // median of {1, 3}
}

TEST_CASE("one-hot expansion in lexicographic order") {
    const auto path = write_temp("cat.csv", "c,label\nb,0\na,1\n");
    Dataset d = load_csv(path, "label");
    CHECK(d.feature_names == std::vector<std::string>{"c=a", "c=b"});
    CHECK(d.at(0, 0) == 0.0);
    CHECK(d.at(0, 1) == 1.0);
    CHECK(d.at(1, 0) == 1.0);
    CHECK(d.at(1, 1) == 0.0);
}

TEST_CASE("ingestion errors") {
    CHECK_THROWS(load_csv("/nonexistent/file.csv", "label"));
    const auto no_target = write_temp("nt.csv", "f,g\n1,2\n");
    CHECK_THROWS(load_csv(no_target, "label"));
    const auto bad_target = write_temp("bt.csv", "f,label\n1,2\n");
    CHECK_THROWS(load_csv(bad_target, "label"));
    const auto empty_col = write_temp("ec.csv", "f,label\n,1\n,0\n");
    CHECK_THROWS(load_csv(empty_col, "label"));
}

TEST_CASE("ingestion is idempotent through save_csv") {
    Dataset d = synth::oracle_dataset(50, 3);
    const std::string path = synth::temp_dir("roundtrip") + "/data.csv";
    save_csv(d, path);
    Dataset d2 = load_csv(path, "label");
    REQUIRE(d2.n_rows == d.n_rows);
    REQUIRE(d2.n_cols == d.n_cols);
    CHECK(d2.values == d.values);  // bit-exact
    CHECK(d2.target == d.target);
    CHECK(d2.row_ids == d.row_ids);

    const std::string path2 = synth::temp_dir("roundtrip2") + "/data.csv";
    save_csv(d2, path2);
    CHECK(load_csv(path2, "label").values == d.values);
}

TEST_CASE("split sizes, determinism, stratification") {
    Dataset d = synth::oracle_dataset(10, 1);
    auto [train, val] = split(d, 0.8, 1);
    CHECK(train.n_rows == 8);
    CHECK(val.n_rows == 2);

    auto [train2, val2] = split(d, 0.8, 1);
    CHECK(train2.row_ids == train.row_ids);
    CHECK(val2.row_ids == val.row_ids);

    // 50/50 classes stay balanced under stratification
    Dataset balanced;
    balanced.n_rows = 100;
    balanced.n_cols = 1;
    balanced.feature_names = {"f"};
    balanced.target_column = "label";
    for (std::size_t i = 0; i < 100; ++i) {
        balanced.values.push_back(static_cast<double>(i));
        balanced.target.push_back(i < 50 ? 0 : 1);
        balanced.row_ids.push_back(std::to_string(i));
    }
    auto [btrain, bval] = split(balanced, 0.8, 7);
    CHECK(btrain.n_rows == 80);
    int pos = 0;
    for (int y : btrain.target) pos += y;
    CHECK(pos == 40);
}

TEST_CASE("split partitions are disjoint and exhaustive for any seed") {
    Dataset d = synth::oracle_dataset(137, 5);
    for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 999ULL}) {
        auto [train, val] = split(d, 0.7, seed);
        std::set<std::string> ids(train.row_ids.begin(), train.row_ids.end());
        for (const auto& id : val.row_ids) CHECK(ids.insert(id).second);
        CHECK(ids.size() == d.n_rows);
    }
}

TEST_CASE("split errors") {
    Dataset d = synth::oracle_dataset(10, 1);
    CHECK_THROWS(split(d, 0.0, 1));
    CHECK_THROWS(split(d, 1.0, 1));
    Dataset one = synth::oracle_dataset(1, 1);
    CHECK_THROWS(split(one, 0.5, 1));
}

TEST_CASE("psi is zero for identical distributions") {
    Dataset d = synth::oracle_dataset(400, 9);
    FeatureStats stats = feature_stats(d, d);
    for (const auto& s : stats.per_feature) {
        CHECK(s.psi == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(s.iv >= 0.0);
    }
}

TEST_CASE("iv vanishes for a target-independent feature") {
    Rng rng(13);
    Dataset d;
    d.n_rows = 10000;
    d.n_cols = 1;
    d.feature_names = {"noise"};
    d.target_column = "label";
    for (std::size_t i = 0; i < d.n_rows; ++i) {
        d.values.push_back(rng.uniform01());
        d.target.push_back(rng.uniform01() < 0.5 ? 1 : 0);
        d.row_ids.push_back(std::to_string(i));
    }
    auto [train, val] = split(d, 0.8, 3);
    FeatureStats stats = feature_stats(train, val);
    CHECK(stats.per_feature[0].iv <= 0.01);
}

TEST_CASE("iv matches the two-bin hand computation without smoothing") {
    // bin1: 80% of goods, 20% of bads; bin2 mirrored.
    // IV = 0.6*ln4 + 0.6*ln4 = 1.2*ln4
    Dataset d;
    d.n_cols = 1;
    d.feature_names = {"f"};
    d.target_column = "label";
    auto push = [&](double v, int y, int count) {
        for (int i = 0; i < count; ++i) {
            d.values.push_back(v);
            d.target.push_back(y);
            d.row_ids.push_back(std::to_string(d.row_ids.size()));
        }
    };
    push(0.0, 1, 8);
    push(0.0, 0, 2);
    push(1.0, 1, 2);
    push(1.0, 0, 8);
    d.n_rows = d.target.size();
    FeatureStats stats = feature_stats(d, d, /*smoothing=*/0.0);
    CHECK(stats.per_feature[0].iv == doctest::Approx(1.2 * std::log(4.0)).epsilon(1e-9));
    CHECK(stats.per_feature[0].iv == doctest::Approx(1.6636).epsilon(1e-3));
}

TEST_CASE("iv and psi are invariant under strictly monotone transforms") {
    Dataset d = synth::oracle_dataset(600, 21);
    auto [train, val] = split(d, 0.75, 4);
    FeatureStats before = feature_stats(train, val);

    auto transform = [](Dataset ds) {
        for (std::size_t r = 0; r < ds.n_rows; ++r)
            for (std::size_t c = 0; c < ds.n_cols; ++c) {
                double& v = ds.values[r * ds.n_cols + c];
                v = std::exp(3.0 * v) + v * v * v;  // strictly increasing on [0,1]
            }
        return ds;
    };
    FeatureStats after = feature_stats(transform(train), transform(val));
    for (std::size_t f = 0; f < before.per_feature.size(); ++f) {
        CHECK(after.per_feature[f].iv ==
              doctest::Approx(before.per_feature[f].iv).epsilon(1e-12));
        CHECK(after.per_feature[f].psi ==
              doctest::Approx(before.per_feature[f].psi).epsilon(1e-12));
    }
}

TEST_CASE("feature_stats errors") {
    Dataset d = synth::oracle_dataset(100, 2);
    Dataset single = d;
    for (auto& y : single.target) y = 1;
    CHECK_THROWS(feature_stats(single, d));  // one-class train
    Dataset empty = d;
    empty.n_rows = 0;
    empty.values.clear();
    empty.target.clear();
    empty.row_ids.clear();
    CHECK_THROWS(feature_stats(d, empty));  // empty validation
}

TEST_CASE("schema json round-trips") {
    const auto path = write_temp("mixed.csv", "num,cat,label\n1.0,a,0\n2.0,b,1\n,a,1\n");
    Dataset d = load_csv(path, "label");
    std::string target;
    auto schema = schema_from_json(schema_to_json(d), &target);
    CHECK(target == "label");
    REQUIRE(schema.size() == 2);
    CHECK(schema[0].name == "num");
    CHECK_FALSE(schema[0].categorical);
    CHECK(schema[0].median == doctest::Approx(1.5));
    CHECK(schema[1].categorical);
    CHECK(schema[1].categories == std::vector<std::string>{"a", "b"});

    Dataset again = load_csv_with_schema(path, schema, target);
    CHECK(again.values == d.values);
}
