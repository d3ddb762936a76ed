#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "icubench/tuner.hpp"
#include "oracles.hpp"

using namespace icubench;
using tuner::ParamDistribution;

TEST_CASE("reciprocal pdf closed form and normalization") {
    ParamDistribution d;
    d.kind = ParamDistribution::Kind::log_uniform;
    d.a = 1.0;
    d.b = std::exp(1.0);
    CHECK(d.pdf(1.0) == doctest::Approx(1.0));  // 1/(x (ln b - ln a)) at x=1

    ParamDistribution u;
    u.kind = ParamDistribution::Kind::uniform;
    u.a = 0;
    u.b = 2;
    CHECK(u.pdf(1.0) == doctest::Approx(0.5));
    CHECK(u.pdf(-0.1) == 0.0);
    CHECK(u.pdf(2.1) == 0.0);

    // integrates to one on random (a, b) pairs
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> la(-3, 1);
    for (int rep = 0; rep < 20; ++rep) {
        double a = std::pow(10.0, la(rng));
        double b = a * std::pow(10.0, std::uniform_real_distribution<double>(0.5, 4)(rng));
        ParamDistribution r;
        r.kind = ParamDistribution::Kind::log_uniform;
        r.a = a;
        r.b = b;
        double integral = oracle::integrate_log_spaced([&](double x) { return r.pdf(x); }, a, b);
        CHECK(integral == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("log_uniform sampling matches the reciprocal law (KS test on ln x)") {
    ParamDistribution d;
    d.kind = ParamDistribution::Kind::log_uniform;
    d.a = 1e-3;
    d.b = 1e1;
    std::mt19937_64 rng(2024);
    std::vector<double> logs;
    for (int i = 0; i < 100000; ++i) {
        double v = d.sample(rng).get<double>();
        CHECK(v >= d.a);
        CHECK(v <= d.b);
        logs.push_back(std::log(v));
    }
    double ks = oracle::ks_vs_uniform(logs, std::log(d.a), std::log(d.b));
    // critical value at alpha=0.01 is 1.63/sqrt(n)
    CHECK(ks < 1.63 / std::sqrt(100000.0));
}

TEST_CASE("randint and choice sampling stay in range") {
    ParamDistribution ri;
    ri.kind = ParamDistribution::Kind::randint;
    ri.a = 3;
    ri.b = 7;
    ParamDistribution ch;
    ch.kind = ParamDistribution::Kind::choice;
    ch.choices = {json("l1"), json("l2"), json("elasticnet")};
    std::mt19937_64 rng(1);
    std::set<std::int64_t> seen;
    for (int i = 0; i < 500; ++i) {
        auto v = ri.sample(rng).get<std::int64_t>();
        CHECK(v >= 3);
        CHECK(v <= 7);
        seen.insert(v);
        CHECK(ch.contains(ch.sample(rng)));
    }
    CHECK(seen.size() == 5);  // inclusive on both ends
}

TEST_CASE("param space parsing rejects bad specs") {
    auto good = parse_json_strict(R"({"C": {"kind": "log_uniform", "a": 1e-3, "b": 10}})", "space");
    auto space = tuner::parse_param_space(cursor(good, "space"));
    REQUIRE(space.size() == 1);
    CHECK(space[0].first == "C");

    auto flipped = parse_json_strict(R"({"C": {"kind": "uniform", "a": 2, "b": 1}})", "space");
    CHECK_THROWS_AS(tuner::parse_param_space(cursor(flipped, "space")), ConfigError);

    auto neg = parse_json_strict(R"({"C": {"kind": "log_uniform", "a": 0, "b": 1}})", "space");
    CHECK_THROWS_AS(tuner::parse_param_space(cursor(neg, "space")), ConfigError);

    auto unknown = parse_json_strict(R"({"C": {"kind": "uniform", "a": 0, "b": 1, "c": 2}})", "space");
    CHECK_THROWS_AS(tuner::parse_param_space(cursor(unknown, "space")), ConfigError);
}

TEST_CASE("make_splits partitions and is deterministic") {
    std::vector<std::int64_t> ids;
    for (int i = 0; i < 10; ++i) ids.push_back(i);
    auto plan = tuner::make_splits(ids, 5, 1, 42);
    std::set<std::int64_t> seen;
    for (int k = 0; k < 5; ++k) {
        const auto& cell = plan.at(0, k);
        CHECK(cell.test.size() == 2);
        for (auto id : cell.test) CHECK(seen.insert(id).second);  // disjoint test folds
        // train/val/test disjoint
        std::set<std::int64_t> tr(cell.train.begin(), cell.train.end());
        for (auto id : cell.test) CHECK(!tr.count(id));
        for (auto id : cell.val) CHECK(!tr.count(id));
        std::set<std::int64_t> te(cell.test.begin(), cell.test.end());
        for (auto id : cell.val) CHECK(!te.count(id));
        CHECK(cell.train.size() + cell.val.size() + cell.test.size() == 10);
    }
    CHECK(seen.size() == 10);

    auto plan2 = tuner::make_splits(ids, 5, 1, 42);
    CHECK(plan2.at(0, 3).train == plan.at(0, 3).train);

    CHECK_THROWS_AS(tuner::make_splits(ids, 2, 1, 0), ConfigError);
}

TEST_CASE("repetition shuffles differ") {
    std::vector<std::int64_t> ids;
    for (int i = 0; i < 100; ++i) ids.push_back(i);
    auto plan = tuner::make_splits(ids, 5, 5, 7);
    int distinct = 0;
    for (int r = 1; r < 5; ++r) {
        if (plan.at(r, 0).test != plan.at(0, 0).test) ++distinct;
    }
    CHECK(distinct == 4);
}

TEST_CASE("no id appears in both train/val and test of the same cell") {
    std::vector<std::int64_t> ids;
    for (int i = 0; i < 57; ++i) ids.push_back(i * 3 + 1);
    auto plan = tuner::make_splits(ids, 5, 3, 11);
    for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 5; ++k) {
            const auto& cell = plan.at(r, k);
            std::set<std::int64_t> test(cell.test.begin(), cell.test.end());
            for (auto id : cell.train) CHECK(!test.count(id));
            for (auto id : cell.val) CHECK(!test.count(id));
        }
}

TEST_CASE("bayes_optimize finds a 1-d quadratic minimum") {
    auto space_json = parse_json_strict(R"({"x": {"kind": "uniform", "a": 0, "b": 1}})", "space");
    auto space = tuner::parse_param_space(cursor(space_json, "space"));
    tuner::OptimizeOptions opt;
    opt.n_init = 5;
    opt.n_calls = 30;
    opt.seed = 13;
    auto result = tuner::bayes_optimize(
        space, [](const json& p) { double x = p.at("x").get<double>(); return (x - 0.3) * (x - 0.3); },
        opt);
    CHECK(result.trials.size() == 30);
    CHECK(std::abs(result.best_point.at("x").get<double>() - 0.3) < 0.05);
    for (const auto& t : result.trials) {
        double x = t.point.at("x").get<double>();
        CHECK(x >= 0.0);
        CHECK(x <= 1.0);
    }
}

TEST_CASE("bayes_optimize is reproducible and reduces to random search") {
    auto space_json = parse_json_strict(
        R"({"x": {"kind": "uniform", "a": -1, "b": 1}, "k": {"kind": "choice", "values": [1, 2]}})",
        "space");
    auto space = tuner::parse_param_space(cursor(space_json, "space"));
    auto f = [](const json& p) {
        double x = p.at("x").get<double>();
        return x * x + (p.at("k").get<int>() == 2 ? 0.0 : 0.5);
    };
    tuner::OptimizeOptions opt;
    opt.n_init = 6;
    opt.n_calls = 12;
    opt.seed = 4;
    auto a = tuner::bayes_optimize(space, f, opt);
    auto b = tuner::bayes_optimize(space, f, opt);
    REQUIRE(a.trials.size() == b.trials.size());
    for (std::size_t i = 0; i < a.trials.size(); ++i) CHECK(a.trials[i].point == b.trials[i].point);

    // n_calls == n_init: pure random search
    tuner::OptimizeOptions rnd;
    rnd.n_init = 8;
    rnd.n_calls = 8;
    rnd.seed = 4;
    auto c = tuner::bayes_optimize(space, f, rnd);
    std::mt19937_64 rng(4);
    for (const auto& t : c.trials) {
        auto expect = tuner::sample_point(space, rng);
        CHECK(t.point == expect);
    }
}

TEST_CASE("discrete space equals exhaustive enumeration") {
    auto space_json =
        parse_json_strict(R"({"c": {"kind": "choice", "values": [3, 1, 4, 2]}})", "space");
    auto space = tuner::parse_param_space(cursor(space_json, "space"));
    auto f = [](const json& p) { return static_cast<double>(p.at("c").get<int>()); };
    tuner::OptimizeOptions opt;
    opt.n_init = 4;
    opt.n_calls = 16;
    opt.seed = 21;
    auto result = tuner::bayes_optimize(space, f, opt);
    CHECK(result.best_point.at("c").get<int>() == 1);
    CHECK(result.best_value == 1.0);
}

TEST_CASE("failed objectives are recorded and skipped for best") {
    auto space_json = parse_json_strict(R"({"x": {"kind": "uniform", "a": 0, "b": 1}})", "space");
    auto space = tuner::parse_param_space(cursor(space_json, "space"));
    int calls = 0;
    auto f = [&](const json& p) {
        ++calls;
        double x = p.at("x").get<double>();
        if (x < 0.5) return std::numeric_limits<double>::quiet_NaN();
        return x;
    };
    tuner::OptimizeOptions opt;
    opt.n_init = 5;
    opt.n_calls = 15;
    opt.seed = 3;
    auto result = tuner::bayes_optimize(space, f, opt);
    CHECK(result.best_value >= 0.5);
    bool any_failed = false;
    for (const auto& t : result.trials) any_failed |= t.failed;
    CHECK(any_failed);
}
