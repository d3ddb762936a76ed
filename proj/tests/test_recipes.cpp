#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "icubench/recipes.hpp"

using namespace icubench;
using namespace icubench::recipes;
using cohort::CohortBundle;

namespace {

// two stays, three bins each, one feature with holes
CohortBundle small_bundle() {
    CohortBundle b;
    b.sta.add_i64("stay_id", {1, 2});
    b.sta.add_f64("age", {40, 60});
    b.sta.add_f64("sex", {0, 1});
    b.sta.add_f64("height", {kMissing, 180});
    b.sta.add_f64("weight", {70, kMissing});
    b.dyn.add_i64("stay_id", {1, 1, 1, 2, 2, 2});
    b.dyn.add_i64("time", {0, 1, 2, 0, 1, 2});
    b.dyn.add_f64("hr", {kMissing, 4.0, kMissing, 2.0, kMissing, 3.0});
    b.outc.add_i64("stay_id", {1, 2});
    b.outc.add_f64("label", {1, 0});
    b.vars.dynamic = {"hr"};
    b.vars.statics = {"age", "sex", "height", "weight"};
    return b;
}

CohortBundle random_bundle(std::mt19937_64& rng, int n_stays, int max_bins) {
    CohortBundle b;
    std::uniform_int_distribution<int> bins(2, max_bins);
    std::uniform_real_distribution<double> v(-3, 3);
    std::bernoulli_distribution miss(0.3);
    std::vector<std::int64_t> sid;
    std::vector<double> age, sex, height, weight;
    std::vector<std::int64_t> did, dt;
    std::vector<double> hr, lact;
    std::vector<std::int64_t> oid;
    std::vector<double> lab;
    for (int i = 0; i < n_stays; ++i) {
        sid.push_back(i + 1);
        age.push_back(40 + v(rng));
        sex.push_back(i % 2);
        height.push_back(miss(rng) ? kMissing : 170 + v(rng));
        weight.push_back(miss(rng) ? kMissing : 75 + v(rng));
        int nb = bins(rng);
        for (int h = 0; h < nb; ++h) {
            did.push_back(i + 1);
            dt.push_back(h);
            hr.push_back(miss(rng) ? kMissing : 80 + v(rng));
            lact.push_back(miss(rng) ? kMissing : 2 + 0.2 * v(rng));
        }
        oid.push_back(i + 1);
        lab.push_back(rng() % 2 ? 1.0 : 0.0);
    }
    b.sta.add_i64("stay_id", sid);
    b.sta.add_f64("age", age);
    b.sta.add_f64("sex", sex);
    b.sta.add_f64("height", height);
    b.sta.add_f64("weight", weight);
    b.dyn.add_i64("stay_id", did);
    b.dyn.add_i64("time", dt);
    b.dyn.add_f64("hr", hr);
    b.dyn.add_f64("lact", lact);
    b.outc.add_i64("stay_id", oid);
    b.outc.add_f64("label", lab);
    b.vars.dynamic = {"hr", "lact"};
    b.vars.statics = {"age", "sex", "height", "weight"};
    return b;
}

bool no_missing_predictors(const CohortBundle& b) {
    for (const auto& c : b.vars.dynamic)
        for (double v : b.dyn.f64(c))
            if (is_missing(v)) return false;
    for (const auto& c : b.vars.statics)
        for (double v : b.sta.f64(c))
            if (is_missing(v)) return false;
    return true;
}

}  // namespace

TEST_CASE("step_scale: population statistics, constant guard, train-fitted application") {
    CohortBundle train;
    train.sta.add_i64("stay_id", {1, 2, 3});
    train.sta.add_f64("age", {30, 30, 30});  // constant
    train.dyn.add_i64("stay_id", {1, 2, 3});
    train.dyn.add_i64("time", {0, 0, 0});
    train.dyn.add_f64("hr", {1, 2, 3});
    train.outc.add_i64("stay_id", {1, 2, 3});
    train.outc.add_f64("label", {0, 0, 1});
    train.vars.dynamic = {"hr"};
    train.vars.statics = {"age"};

    Recipe r;
    r.steps.push_back({"scale", json::object()});
    auto fitted = fit(r, train);
    const auto& stats = fitted.steps[0].stats;
    CHECK(stats.at("hr").at("mean").get<double>() == doctest::Approx(2.0));
    CHECK(stats.at("hr").at("std").get<double>() == doctest::Approx(std::sqrt(2.0 / 3.0)));  // population
    CHECK(stats.at("age").at("std").get<double>() == 1.0);  // constant column guard

    // train-fitted mean/std applied to a test bundle: (3 - 2)/1 with sigma forced to 1
    CohortBundle test = train;
    test.dyn.f64("hr") = {3, 3, 3};
    auto fitted_unit = fitted;
    fitted_unit.steps[0].stats["hr"]["std"] = 1.0;
    auto out = apply(fitted_unit, test);
    CHECK(out.dyn.f64("hr")[0] == doctest::Approx(1.0));

    // determinism: fit twice, identical statistics
    auto fitted2 = fit(r, train);
    CHECK(fitted2.to_json() == fitted.to_json());

    // inverse transform recovers inputs
    auto rt = inverse_scale(fitted, apply(fitted, train));
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(rt.dyn.f64("hr")[i] == doctest::Approx(train.dyn.f64("hr")[i]).epsilon(1e-10));
}

TEST_CASE("forward fill then mean impute: the documented example") {
    // series [NA, 4, NA, NA] with train mean 10 -> [10, 4, 4, 4]
    CohortBundle b;
    b.sta.add_i64("stay_id", {1});
    b.sta.add_f64("age", {50});
    b.dyn.add_i64("stay_id", {1, 1, 1, 1});
    b.dyn.add_i64("time", {0, 1, 2, 3});
    b.dyn.add_f64("x", {kMissing, 4.0, kMissing, kMissing});
    b.outc.add_i64("stay_id", {1});
    b.outc.add_f64("label", {1});
    b.vars.dynamic = {"x"};
    b.vars.statics = {"age"};

    Recipe r;
    r.steps.push_back({"forward_fill", json::object()});
    r.steps.push_back({"mean_impute", json::object()});
    auto fitted = fit(r, b);
    // overwrite the learned mean to match the documented fixture
    fitted.steps[1].stats["x"] = 10.0;
    auto out = apply(fitted, b);
    CHECK(out.dyn.f64("x") == std::vector<double>{10.0, 4.0, 4.0, 4.0});
}

TEST_CASE("missing indicator marks raw missingness and becomes a predictor") {
    auto b = small_bundle();
    Recipe r;
    r.steps.push_back({"missing_indicator", json::object()});
    r.steps.push_back({"forward_fill", json::object()});
    auto fitted = fit(r, b);
    auto out = apply(fitted, b);
    REQUIRE(out.dyn.has("hr_miss"));
    CHECK(out.dyn.f64("hr_miss") == std::vector<double>{1, 0, 1, 0, 1, 0});
    CHECK(std::find(out.vars.dynamic.begin(), out.vars.dynamic.end(), "hr_miss") !=
          out.vars.dynamic.end());
    // fill happened after the mask was taken
    CHECK(out.dyn.f64("hr")[2] == 4.0);
}

TEST_CASE("forward fill is idempotent and never crosses stay boundaries") {
    auto b = small_bundle();
    Recipe r;
    r.steps.push_back({"forward_fill", json::object()});
    auto f = fit(r, b);
    auto once = apply(f, b);
    auto twice = apply(f, once);
    for (std::size_t i = 0; i < once.dyn.nrow(); ++i) {
        double a = once.dyn.f64("hr")[i];
        double c = twice.dyn.f64("hr")[i];
        CHECK(((is_missing(a) && is_missing(c)) || a == c));
    }
    // stay 1 starts missing: leading NaN not filled from stay 2
    CHECK(is_missing(once.dyn.f64("hr")[0]));
    CHECK(once.dyn.f64("hr")[4] == 2.0);  // within stay 2

    // permuting stay order leaves per-stay outputs unchanged
    std::vector<std::size_t> perm{3, 4, 5, 0, 1, 2};
    CohortBundle swapped = b;
    swapped.dyn = b.dyn.select_rows(perm);
    auto out_sw = apply(f, swapped);
    CHECK(out_sw.dyn.f64("hr")[3 + 1] == once.dyn.f64("hr")[1]);
    CHECK(is_missing(out_sw.dyn.f64("hr")[3 + 0]));
}

TEST_CASE("default chain leaves no missing values and is leakage-proof") {
    std::mt19937_64 rng(13);
    auto train = random_bundle(rng, 20, 10);
    auto test = random_bundle(rng, 10, 10);

    auto recipe = default_recipe(true);
    auto fitted = fit(recipe, train);
    auto out_train = apply(fitted, train);
    auto out_test = apply(fitted, test);
    CHECK(no_missing_predictors(out_train));
    CHECK(no_missing_predictors(out_test));

    // leakage: mutating any test value does not change fitted statistics
    auto mutated = test;
    for (auto& v : mutated.dyn.f64("hr")) v = 999.0;
    for (auto& v : mutated.sta.f64("age")) v = -1;
    auto fitted_again = fit(recipe, train);
    CHECK(fitted_again.to_json() == fitted.to_json());
    // and fitting on train is unaffected by whatever happens to test data
    auto out_mutated = apply(fitted, mutated);
    CHECK(no_missing_predictors(out_mutated));
}

TEST_CASE("hist_aggregate: expanding window, causality, raw counts") {
    auto b = small_bundle();
    Recipe r;
    r.steps.push_back({"hist_aggregate", json{{"stats", {"min", "max", "mean", "count"}}}});
    auto fitted = fit(r, b);
    auto out = apply(fitted, b);
    // stay 1: values [NA, 4, NA] -> count [0,1,1], mean [NA,4,4]
    CHECK(out.dyn.f64("hr_count") == std::vector<double>{0, 1, 1, 1, 1, 2});
    CHECK(is_missing(out.dyn.f64("hr_mean")[0]));
    CHECK(out.dyn.f64("hr_mean")[1] == 4.0);
    CHECK(out.dyn.f64("hr_mean")[2] == 4.0);
    // stay 2: values [2, NA, 3] -> mean [2, 2, 2.5], min [2,2,2], max [2,2,3]
    CHECK(out.dyn.f64("hr_mean")[5] == doctest::Approx(2.5));
    CHECK(out.dyn.f64("hr_min")[5] == 2.0);
    CHECK(out.dyn.f64("hr_max")[5] == 3.0);

    // causality: deleting future bins leaves earlier outputs identical
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 100; ++rep) {
        auto big = random_bundle(rng, 1, 12);
        auto full = apply(fitted, big);  // fitted stats are stateless for this step
        std::size_t n = big.dyn.nrow();
        if (n < 3) continue;
        std::vector<std::size_t> keep;
        std::size_t cut = 1 + rng() % (n - 1);
        for (std::size_t i = 0; i < cut; ++i) keep.push_back(i);
        CohortBundle trunc = big;
        trunc.dyn = big.dyn.select_rows(keep);
        auto part = apply(fitted, trunc);
        for (std::size_t i = 0; i < cut; ++i) {
            for (const char* col : {"hr_min", "hr_max", "hr_mean", "hr_count"}) {
                double a = full.dyn.f64(col)[i];
                double c = part.dyn.f64(col)[i];
                CHECK(((is_missing(a) && is_missing(c)) || a == c));
            }
        }
    }
}

TEST_CASE("resample re-bins the sequence with the requested aggregate") {
    CohortBundle b;
    b.sta.add_i64("stay_id", {1});
    b.sta.add_f64("age", {50});
    b.dyn.add_i64("stay_id", {1, 1, 1, 1});
    b.dyn.add_i64("time", {0, 1, 2, 3});
    b.dyn.add_f64("hr", {1.0, 3.0, 5.0, kMissing});
    b.outc.add_i64("stay_id", {1, 1, 1, 1});
    b.outc.add_i64("time", {0, 1, 2, 3});
    b.outc.add_f64("label", {0, 0, 1, 1});
    b.vars.dynamic = {"hr"};
    b.vars.statics = {"age"};

    Recipe r;
    r.steps.push_back({"resample", json{{"width_h", 2}, {"aggregate", "mean"}}});
    auto out = apply(fit(r, b), b);
    REQUIRE(out.dyn.nrow() == 2);
    CHECK(out.dyn.i64("time") == std::vector<std::int64_t>{0, 1});
    CHECK(out.dyn.f64("hr")[0] == doctest::Approx(2.0));  // mean(1,3)
    CHECK(out.dyn.f64("hr")[1] == doctest::Approx(5.0));  // single observed value
    // outcome keeps the latest label inside each coarse bin
    REQUIRE(out.outc.nrow() == 2);
    CHECK(out.outc.f64("label") == std::vector<double>{0, 1});

    // per-column aggregate override
    Recipe r2;
    r2.steps.push_back({"resample", json{{"width_h", 2}, {"aggregates", {{"hr", "max"}}}}});
    auto out2 = apply(fit(r2, b), b);
    CHECK(out2.dyn.f64("hr")[0] == doctest::Approx(3.0));  // max(1,3)
}

TEST_CASE("recipe and fitted recipe serialize and round trip") {
    auto recipe = default_recipe(true);
    auto j = recipe.to_json();
    auto back = Recipe::from_json(j);
    CHECK(back.to_json() == j);

    std::mt19937_64 rng(3);
    auto train = random_bundle(rng, 8, 6);
    auto fitted = fit(recipe, train);
    auto fj = fitted.to_json();
    auto fback = FittedRecipe::from_json(fj);
    CHECK(fback.to_json() == fj);

    // applying a deserialized recipe gives identical output
    auto test = random_bundle(rng, 4, 6);
    auto a = apply(fitted, test);
    auto b2 = apply(fback, test);
    for (const auto& c : a.vars.dynamic) {
        const auto& va = a.dyn.f64(c);
        const auto& vb = b2.dyn.f64(c);
        REQUIRE(va.size() == vb.size());
        for (std::size_t i = 0; i < va.size(); ++i)
            CHECK(((is_missing(va[i]) && is_missing(vb[i])) || va[i] == vb[i]));
    }

    // unseen column: applying to a bundle lacking a fitted column fails loudly
    auto bad = test;
    bad.dyn.drop("lact");
    bad.vars.dynamic = {"hr"};
    CHECK_THROWS_AS(apply(fitted, bad), DataError);

    // unknown step kind
    CHECK_THROWS_AS(fit(Recipe{{{"sparkle", json::object()}}}, train), ConfigError);
}
