#include "symboost/chain.hpp"

#include <cmath>
#include <set>

#include "doctest.h"
#include "support/synth.hpp"
#include "symboost/metrics.hpp"
#include "symboost/prob.hpp"

using namespace symboost;

namespace {

// legacy model denied everything but x1, x2: the x3-gated interaction stays
// in the residuals for the chain to find
struct Bench {
    Dataset train, val;
    FrozenModel frozen;
    FeatureStats stats;
    std::vector<Region> regions;

    explicit Bench(std::size_t n = 1600, std::uint64_t seed = 7) {
        Dataset full = synth::oracle_dataset(n, seed);
        auto [tr, va] = split(full, 0.8, 1);
        train = std::move(tr);
        val = std::move(va);

        std::vector<double> sub(train.n_rows * 2);
        for (std::size_t r = 0; r < train.n_rows; ++r) {
            sub[r * 2] = train.at(r, 0);
            sub[r * 2 + 1] = train.at(r, 1);
        }
        GbdtConfig gcfg;
        gcfg.n_trees = 60;
        frozen = FrozenModel::from_gbdt(GbdtModel::train(
            {sub.data(), train.n_rows, 2}, train.target, {"x1", "x2"}, gcfg));
        stats = feature_stats(train, val);

        std::vector<double> r = residuals(frozen, train);
        std::vector<double> abs_r(r.size());
        for (std::size_t i = 0; i < r.size(); ++i) abs_r[i] = std::fabs(r[i]);
        CartTree cart = fit_cart(train, abs_r, CartConfig{2, 40});
        RegionConfig rcfg;
        rcfg.max_regions = 3;
        regions = score_and_select(cart, train, rcfg);
    }

    ChainConfig chain_cfg() const {
        ChainConfig c;
        c.max_iterations = 6;
        c.success_target = 3;
        c.seed = 11;
        return c;
    }

    TpeConfig tpe_cfg() const {
        TpeConfig t;
        t.max_trials = 40;
        return t;
    }
};

}  // namespace

TEST_CASE("annealing schedule and acceptance rule") {
    CHECK(annealing_tau(0.002, 0.5, 1) == doctest::Approx(0.002));
    CHECK(annealing_tau(0.002, 0.5, 2) == doctest::Approx(0.001));
    CHECK(annealing_tau(0.002, 0.5, 3) == doctest::Approx(0.0005));

    CHECK(accept_candidate(0.700, 0.701, 0.002));        // 0.700 > 0.699
    CHECK_FALSE(accept_candidate(0.699, 0.701, 0.002));  // equality rejects
    CHECK(accept_candidate(0.75, 0.70, 0.002));
}

TEST_CASE("init_seed builds the guarded constant") {
    Region region;
    region.id = 0;
    region.clauses.push_back({2, "x3", 0.6, std::numeric_limits<double>::infinity()});
    const std::vector<std::string> schema = {"x1", "x2", "x3"};
    ExpertExpr seed = init_seed(region, schema);
    CHECK(seed.serialize() == "if `x3` > 0.6 then p{c0=0} else 0");

    std::vector<double> outside = {0.0, 0.0, 0.5};
    std::vector<double> inside = {0.0, 0.0, 0.7};
    CHECK(seed.evaluate(outside) == 0.0);
    CHECK(seed.evaluate(inside) == 0.0);  // c0 = 0: identity start

    // bounded interval renders both clauses
    Region both;
    both.id = 1;
    both.clauses.push_back({0, "x1", 0.2, 0.8});
    CHECK(init_seed(both, schema).serialize() ==
          "if `x1` > 0.2 and `x1` <= 0.8 then p{c0=0} else 0");

    // an unconstrained region still parses through the vacuous clause
    Region whole;
    whole.id = 2;
    ExpertExpr all = init_seed(whole, schema);
    CHECK(all.evaluate(outside) == 0.0);
}

TEST_CASE("inner objective reduces to legacy logloss at the identity") {
    Bench b(800, 3);
    REQUIRE(!b.regions.empty());
    ExpertExpr seed = init_seed(b.regions[0], b.train.feature_names);
    std::vector<double> logits = b.frozen.base_logits(b.train);

    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < b.train.n_rows; ++r)
        if (b.regions[0].contains(b.train.row(r))) rows.push_back(r);
    REQUIRE(!rows.empty());
    auto obj = inner_objective(seed, logits, b.train, rows);

    std::vector<int> y;
    std::vector<double> p;
    for (std::size_t r : rows) {
        y.push_back(b.train.target[r]);
        p.push_back(sigmoid(logits[r]));
    }
    CHECK(obj({{"c0", 0.0}}) == doctest::Approx(logloss(y, p)).epsilon(1e-12));

    // pushing logits toward y strictly helps on an all-positive subset
    std::vector<std::size_t> pos_rows;
    for (std::size_t r : rows)
        if (b.train.target[r] == 1) pos_rows.push_back(r);
    REQUIRE(!pos_rows.empty());
    auto pos_obj = inner_objective(seed, logits, b.train, pos_rows);
    CHECK(pos_obj({{"c0", 1.0}}) < pos_obj({{"c0", 0.0}}));
}

TEST_CASE("single-row objective matches the hand-computed value") {
    Dataset d;
    d.n_rows = 1;
    d.n_cols = 1;
    d.values = {1.0};
    d.feature_names = {"f"};
    d.target = {1};
    d.row_ids = {"0"};
    ExpertExpr e = ExpertExpr::parse("if `f` >= 0 then p{c0=0} else 0", d.feature_names);
    std::vector<double> logits = {0.0};
    auto obj = inner_objective(e, logits, d, {0});
    CHECK(obj({{"c0", 3.0}}) == doctest::Approx(0.048587).epsilon(1e-4));
    CHECK(obj({{"c0", 3.0}}) == doctest::Approx(-std::log(sigmoid(3.0))).epsilon(1e-12));
}

TEST_CASE("empty fit set is rejected") {
    Bench b(800, 3);
    ExpertExpr seed = init_seed(b.regions[0], b.train.feature_names);
    std::vector<double> logits = b.frozen.base_logits(b.train);
    CHECK_THROWS(inner_objective(seed, logits, b.train, {}));
}

TEST_CASE("failing provider yields a null expert with all-negative history") {
    Bench b(800, 5);
    REQUIRE(!b.regions.empty());
    FailingProvider failing;
    Chain chain(b.regions[0], b.regions, b.train, b.val, b.frozen, b.stats, failing,
                b.chain_cfg(), b.tpe_cfg());
    ExpertArtifact a = chain.run();
    CHECK(a.null_expert);
    CHECK(a.history.size() == 6);  // ran to the iteration cap
    for (const auto& h : a.history) {
        CHECK_FALSE(h.accepted);
        CHECK(h.reason.find("failed") != std::string::npos);
    }
    CHECK(a.final_metric == doctest::Approx(chain.legacy_val_auc()));
}

TEST_CASE("mock provider lifts the chain metric above the legacy baseline") {
    Bench b;
    REQUIRE(!b.regions.empty());
    MockProvider mock;
    Chain chain(b.regions[0], b.regions, b.train, b.val, b.frozen, b.stats, mock,
                b.chain_cfg(), b.tpe_cfg());
    ExpertArtifact a = chain.run();
    REQUIRE_FALSE(a.null_expert);
    CHECK(a.final_metric > chain.legacy_val_auc());
    CHECK(!a.dsl_text.empty());

    // every parameter of the accepted seed is frozen
    for (const auto& p : a.params) CHECK(p.frozen);

    // the guard never escapes the allowed box
    ExpertExpr e = ExpertExpr::parse(a.dsl_text, b.train.feature_names);
    std::vector<double> defaults;
    for (const auto& p : e.params()) defaults.push_back(p.value);
    for (const auto& limit : chain.allowed_box()) {
        double lower = -std::numeric_limits<double>::infinity();
        double upper = std::numeric_limits<double>::infinity();
        for (const auto& c : e.guard()) {
            if (c.feature != limit.feature) continue;
            const double thr =
                c.is_param ? defaults[static_cast<std::size_t>(c.param)] : c.literal;
            if (c.cmp == Cmp::Gt || c.cmp == Cmp::Ge) lower = std::max(lower, thr);
            if (c.cmp == Cmp::Lt || c.cmp == Cmp::Le) upper = std::min(upper, thr);
        }
        CHECK(lower >= limit.lower - 1e-9);
        CHECK(upper <= limit.upper + 1e-9);
    }

    // zero outside the region's allowed box on the full dataset
    for (std::size_t r = 0; r < b.val.n_rows; ++r) {
        bool in_box = true;
        for (const auto& limit : chain.allowed_box())
            in_box &= b.val.at(r, static_cast<std::size_t>(limit.feature)) > limit.lower &&
                      b.val.at(r, static_cast<std::size_t>(limit.feature)) <= limit.upper;
        if (!in_box) CHECK(e.evaluate(b.val.row(r), {}) == 0.0);
    }
}

TEST_CASE("chain stops at the success target") {
    Bench b;
    MockProvider mock;
    ChainConfig cfg = b.chain_cfg();
    cfg.success_target = 2;
    cfg.max_iterations = 12;
    Chain chain(b.regions[0], b.regions, b.train, b.val, b.frozen, b.stats, mock, cfg,
                b.tpe_cfg());
    chain.run();
    if (chain.successes() >= 2) {
        CHECK(chain.successes() == 2);
        CHECK(chain.iteration() <= 12);
    }
}

TEST_CASE("accepted metrics respect the annealing floor") {
    Bench b;
    MockProvider mock;
    Chain chain(b.regions[0], b.regions, b.train, b.val, b.frozen, b.stats, mock,
                b.chain_cfg(), b.tpe_cfg());
    const double a0 = chain.legacy_val_auc();
    ExpertArtifact a = chain.run();
    const double tau0 = b.chain_cfg().tau0;
    for (const auto& h : a.history)
        if (h.accepted) CHECK(h.metric >= a0 - 2.0 * tau0 - 1e-12);
}

TEST_CASE("incremental freezing: accepted slots never reappear in later spaces") {
    Bench b;
    MockProvider mock;
    Chain chain(b.regions[0], b.regions, b.train, b.val, b.frozen, b.stats, mock,
                b.chain_cfg(), b.tpe_cfg());
    ExpertArtifact a = chain.run();

    std::set<std::string> frozen_names;
    for (const auto& h : a.history) {
        if (h.evaluated) {
            for (const auto& d : h.search_space) CHECK(!frozen_names.count(d.name));
        }
        if (h.accepted)
            for (const auto& d : h.search_space) frozen_names.insert(d.name);
    }
    CHECK(!frozen_names.empty());
}

TEST_CASE("boundary refinement happens once, on the first accepted iteration") {
    Bench b;
    MockProvider mock;
    Chain chain(b.regions[0], b.regions, b.train, b.val, b.frozen, b.stats, mock,
                b.chain_cfg(), b.tpe_cfg());
    ExpertArtifact a = chain.run();
    REQUIRE(chain.boundary_refined());

    int refined_iterations = 0;
    for (const auto& h : a.history)
        for (const auto& d : h.search_space)
            if (d.name.size() >= 2 && d.name[0] == 'b' &&
                std::isdigit(static_cast<unsigned char>(d.name[1])))
                ++refined_iterations;
    CHECK(refined_iterations >= 1);

    // the final accepted expert carries tuned boundary slots
    bool has_boundary = false;
    for (const auto& p : a.params) has_boundary |= p.kind == ParamSlot::Kind::Boundary;
    CHECK(has_boundary);
}

TEST_CASE("chains are bit-reproducible with the mock provider") {
    Bench b;
    auto run_once = [&]() {
        MockProvider mock;
        Chain chain(b.regions[0], b.regions, b.train, b.val, b.frozen, b.stats, mock,
                    b.chain_cfg(), b.tpe_cfg());
        ExpertArtifact a = chain.run();
        std::string transcript;
        for (const auto& line : chain.transcript()) transcript += line + "\n";
        return std::pair<std::string, std::string>(a.to_json(), transcript);
    };
    auto [json1, t1] = run_once();
    auto [json2, t2] = run_once();
    CHECK(json1 == json2);
    CHECK(t1 == t2);
}

TEST_CASE("expert artifacts round-trip through json") {
    Bench b(800, 9);
    MockProvider mock;
    Chain chain(b.regions[0], b.regions, b.train, b.val, b.frozen, b.stats, mock,
                b.chain_cfg(), b.tpe_cfg());
    ExpertArtifact a = chain.run();
    ExpertArtifact back = ExpertArtifact::from_json(a.to_json());
    CHECK(back.to_json() == a.to_json());

    Expert e = Expert::from_artifact(back, b.train.feature_names);
    if (!back.null_expert) {
        for (std::size_t r = 0; r < 50; ++r) {
            const double v = e.value(b.val.row(r));
            CHECK(std::isfinite(v));
            CHECK(std::fabs(v) <= 3.0);
        }
    }
}
