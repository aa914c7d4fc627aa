#include "symboost/regions.hpp"

#include <cmath>
#include <fstream>

#include "doctest.h"
#include "support/oracles.hpp"
#include "support/synth.hpp"
#include "symboost/rng.hpp"

using namespace symboost;

namespace {

// 200 rows, one feature; |r| = 0.9 above 0.5 and 0.05 below
struct HotCold {
    Dataset data;
    std::vector<double> abs_r;
};

HotCold hot_cold() {
    HotCold hc;
    hc.data.n_rows = 200;
    hc.data.n_cols = 1;
    hc.data.feature_names = {"f"};
    hc.data.target_column = "label";
    for (int i = 0; i < 200; ++i) {
        const double x = (i + 0.5) / 200.0;
        hc.data.values.push_back(x);
        hc.data.target.push_back(0);
        hc.data.row_ids.push_back(std::to_string(i));
        hc.abs_r.push_back(x > 0.5 ? 0.9 : 0.05);
    }
    return hc;
}

FrozenModel scorer_from_probas(const Dataset& d, const std::vector<double>& p) {
    const std::string path = synth::temp_dir("regions") + "/scores.csv";
    std::ofstream out(path);
    out << "row_id,probability\n";
    char buf[64];
    for (std::size_t r = 0; r < d.n_rows; ++r) {
        std::snprintf(buf, sizeof(buf), "%.17g", p[r]);
        out << d.row_ids[r] << ',' << buf << '\n';
    }
    out.close();
    return FrozenModel::from_score_file(path);
}

}  // namespace

TEST_CASE("residuals follow y - sigmoid(base_logit)") {
    Dataset d = synth::oracle_dataset(50, 3);
    std::vector<double> probas(d.n_rows, 0.5);
    probas[0] = 1.0;  // clips to 1 - 1e-6
    FrozenModel frozen = scorer_from_probas(d, probas);
    std::vector<double> r = residuals(frozen, d);
    REQUIRE(r.size() == d.n_rows);
    if (d.target[0] == 1)
        CHECK(r[0] == doctest::Approx(1e-6).epsilon(0.01));
    for (std::size_t i = 1; i < d.n_rows; ++i)
        CHECK(r[i] == doctest::Approx(d.target[i] - 0.5));

    // a perfect scorer leaves residual magnitudes at the clip level
    std::vector<double> perfect(d.n_rows);
    for (std::size_t i = 0; i < d.n_rows; ++i)
        perfect[i] = static_cast<double>(d.target[i]);
    FrozenModel exact = scorer_from_probas(d, perfect);
    for (double v : residuals(exact, d)) CHECK(std::fabs(v) <= 1e-6 + 1e-12);
}

TEST_CASE("depth-1 cart finds the midpoint of the hot/cold boundary") {
    HotCold hc = hot_cold();
    CartConfig cfg;
    cfg.max_depth = 1;
    cfg.min_leaf = 10;
    CartTree cart = fit_cart(hc.data, hc.abs_r, cfg);
    REQUIRE(cart.tree.nodes[0].feature == 0);

    auto brute = oracle::best_split_bruteforce(
        {std::vector<double>(hc.data.values)}, hc.abs_r, cfg.min_leaf);
    REQUIRE(brute.found);
    CHECK(cart.tree.nodes[0].threshold == doctest::Approx(brute.threshold));
    // the straddling values are 99.5/200 and 100.5/200
    CHECK(cart.tree.nodes[0].threshold == doctest::Approx(0.5));
}

TEST_CASE("depth-1 cart equals the exhaustive split on random instances") {
    Rng rng(31);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 40 + rng.uniform_index(160);
        Dataset d;
        d.n_rows = n;
        d.n_cols = 3;
        d.feature_names = {"a", "b", "c"};
        std::vector<double> abs_r(n);
        std::vector<std::vector<double>> cols(3, std::vector<double>(n));
        for (std::size_t i = 0; i < n; ++i) {
            for (int f = 0; f < 3; ++f) {
                const double v = std::floor(rng.uniform01() * 12.0) / 12.0;
                cols[static_cast<std::size_t>(f)][i] = v;
                d.values.push_back(v);
            }
            d.target.push_back(0);
            d.row_ids.push_back(std::to_string(i));
            abs_r[i] = rng.uniform01();
        }
        CartConfig cfg;
        cfg.max_depth = 1;
        cfg.min_leaf = 5;
        CartTree cart = fit_cart(d, abs_r, cfg);
        auto brute = oracle::best_split_bruteforce(cols, abs_r, cfg.min_leaf);
        if (!brute.found) {
            CHECK(cart.tree.nodes.size() == 1);
            continue;
        }
        REQUIRE(cart.tree.nodes[0].feature >= 0);
        CHECK(cart.tree.nodes[0].feature == brute.feature);
        CHECK(cart.tree.nodes[0].threshold == doctest::Approx(brute.threshold));
    }
}

TEST_CASE("constant residuals yield a single leaf, depth 0 likewise") {
    HotCold hc = hot_cold();
    std::vector<double> constant(hc.data.n_rows, 0.3);
    CartTree flat = fit_cart(hc.data, constant, CartConfig{3, 10});
    CHECK(flat.tree.nodes.size() == 1);

    CartTree depth0 = fit_cart(hc.data, hc.abs_r, CartConfig{0, 10});
    REQUIRE(depth0.tree.nodes.size() == 1);
    CHECK(depth0.tree.nodes[0].count == hc.data.n_rows);
    double total = 0.0;
    for (double v : hc.abs_r) total += v;
    CHECK(depth0.tree.nodes[0].sum == doctest::Approx(total));
}

TEST_CASE("fit_cart preconditions") {
    HotCold hc = hot_cold();
    CartConfig cfg;
    cfg.min_leaf = 150;  // needs 300 rows
    CHECK_THROWS(fit_cart(hc.data, hc.abs_r, cfg));
}

TEST_CASE("leaf cumulative residuals sum to the total") {
    Dataset d = synth::oracle_dataset(500, 8);
    Rng rng(4);
    std::vector<double> abs_r(d.n_rows);
    for (auto& v : abs_r) v = rng.uniform01();
    CartTree cart = fit_cart(d, abs_r, CartConfig{3, 30});
    double leaf_sum = 0.0;
    for (int leaf : cart.tree.leaves())
        leaf_sum += cart.tree.nodes[static_cast<std::size_t>(leaf)].sum;
    CHECK(leaf_sum == doctest::Approx(cart.total_abs_residual).epsilon(1e-9));
}

TEST_CASE("score_and_select priority arithmetic") {
    HotCold hc = hot_cold();
    CartTree cart = fit_cart(hc.data, hc.abs_r, CartConfig{1, 10});

    // lambda = 1 reduces C to the normalized cumulative error
    RegionConfig pure;
    pure.lambda = 1.0;
    pure.c_min = 0.0;
    pure.max_regions = 10;
    auto regions = score_and_select(cart, hc.data, pure);
    REQUIRE(regions.size() == 2);
    const double total = cart.total_abs_residual;
    CHECK(regions[0].priority == doctest::Approx(regions[0].cum_error / total));

    // hand case: hot leaf C = 0.7 * (90 / 95) + 0.3 * 0.5
    RegionConfig cfg;
    cfg.lambda = 0.7;
    cfg.c_min = 0.15;
    cfg.max_regions = 5;
    auto selected = score_and_select(cart, hc.data, cfg);
    REQUIRE(!selected.empty());
    CHECK(selected[0].priority == doctest::Approx(0.8132).epsilon(1e-3));
    CHECK(selected[0].coverage == 100);
    // the hot region is f > 0.5
    REQUIRE(selected[0].clauses.size() == 1);
    CHECK(selected[0].clauses[0].lower == doctest::Approx(0.5));
    CHECK(!std::isfinite(selected[0].clauses[0].upper));
}

TEST_CASE("a perfect scorer yields no hard regions") {
    Dataset d = synth::oracle_dataset(300, 5);
    std::vector<double> perfect(d.n_rows);
    for (std::size_t i = 0; i < d.n_rows; ++i)
        perfect[i] = static_cast<double>(d.target[i]);
    FrozenModel exact = scorer_from_probas(d, perfect);
    std::vector<double> r = residuals(exact, d);
    std::vector<double> abs_r(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) abs_r[i] = std::fabs(r[i]);
    CartTree cart = fit_cart(d, abs_r, CartConfig{3, 30});
    auto regions = score_and_select(cart, d, RegionConfig{});
    CHECK(regions.empty());
}

TEST_CASE("emitted regions are pairwise disjoint over the data") {
    Dataset d = synth::oracle_dataset(800, 12);
    Rng rng(9);
    std::vector<double> abs_r(d.n_rows);
    for (auto& v : abs_r) v = rng.uniform01();
    CartTree cart = fit_cart(d, abs_r, CartConfig{3, 30});
    RegionConfig cfg;
    cfg.c_min = 0.0;
    cfg.max_regions = 16;
    auto regions = score_and_select(cart, d, cfg);
    REQUIRE(regions.size() >= 2);
    for (std::size_t r = 0; r < d.n_rows; ++r) {
        int hits = 0;
        for (const auto& region : regions) hits += region.contains(d.row(r));
        CHECK(hits <= 1);
    }
}

TEST_CASE("regions serialize and reload") {
    HotCold hc = hot_cold();
    CartTree cart = fit_cart(hc.data, hc.abs_r, CartConfig{1, 10});
    auto regions = score_and_select(cart, hc.data, RegionConfig{});
    const std::string j = regions_to_json(regions);
    auto back = regions_from_json(j, hc.data.feature_names);
    REQUIRE(back.size() == regions.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].id == regions[i].id);
        CHECK(back[i].priority == doctest::Approx(regions[i].priority));
        CHECK(back[i].coverage == regions[i].coverage);
        REQUIRE(back[i].clauses.size() == regions[i].clauses.size());
        for (std::size_t c = 0; c < back[i].clauses.size(); ++c) {
            CHECK(back[i].clauses[c].feature == regions[i].clauses[c].feature);
            CHECK(back[i].clauses[c].lower == regions[i].clauses[c].lower);
            CHECK(back[i].clauses[c].upper == regions[i].clauses[c].upper);
        }
    }
}
