#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "icubench/json_util.hpp"

namespace icubench::tuner {

// Sampling distribution for one hyperparameter. log_uniform follows the
// reciprocal density 1/(x (ln b - ln a)) on [a, b], realized as exp(U(ln a, ln b)).
struct ParamDistribution {
    enum class Kind { uniform, log_uniform, randint, choice };
    Kind kind = Kind::uniform;
    double a = 0, b = 1;          // bounds; randint is inclusive on both ends
    std::vector<json> choices;

    json sample(std::mt19937_64& rng) const;
    double pdf(double x) const;   // uniform / log_uniform only
    bool contains(const json& value) const;

    static ParamDistribution parse(const JsonCursor& spec);
    json to_json() const;
};

using ParamSpace = std::vector<std::pair<std::string, ParamDistribution>>;

ParamSpace parse_param_space(const JsonCursor& spec);
json param_space_to_json(const ParamSpace& space);
json sample_point(const ParamSpace& space, std::mt19937_64& rng);

struct SplitPlan {
    struct Cell {
        std::vector<std::int64_t> train, val, test;
    };
    int folds = 0, repetitions = 0;
    std::vector<std::vector<Cell>> cells;  // [repetition][fold]

    const Cell& at(int r, int k) const { return cells[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)]; }
};

// Grouped repeated k-fold: per repetition a seeded shuffle, test = fold k,
// val = fold (k+1) mod K, train = the rest. Requires K >= 3.
SplitPlan make_splits(std::vector<std::int64_t> ids, int folds, int repetitions, std::uint64_t seed);

struct TrialRecord {
    json point;
    double objective = 0;
    bool failed = false;
    std::uint64_t seed = 0;
    json to_json() const;
};

struct OptimizeResult {
    json best_point;
    double best_value = 0;
    std::vector<TrialRecord> trials;
};

struct OptimizeOptions {
    int n_init = 10;
    int n_calls = 50;
    std::uint64_t seed = 0;
    int candidate_pool = 1024;
    double ei_xi = 0.01;
};

// Minimizes `objective` over the space: n_init random evaluations, then a
// Gaussian process (squared-exponential kernel over normalized coordinates,
// one-hot categoricals) with expected-improvement acquisition over a random
// candidate pool. Non-finite objective values are recorded as failures and
// penalized. Fully deterministic for a fixed seed.
OptimizeResult bayes_optimize(const ParamSpace& space, const std::function<double(const json&)>& objective,
                              const OptimizeOptions& options);

}  // namespace icubench::tuner
