#include "icubench/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace icubench::tuner {

json ParamDistribution::sample(std::mt19937_64& rng) const {
    switch (kind) {
        case Kind::uniform: {
            std::uniform_real_distribution<double> u(a, b);
            return u(rng);
        }
        case Kind::log_uniform: {
            std::uniform_real_distribution<double> u(std::log(a), std::log(b));
            return std::exp(u(rng));
        }
        case Kind::randint: {
            std::uniform_int_distribution<std::int64_t> u(static_cast<std::int64_t>(a),
                                                          static_cast<std::int64_t>(b));
            return u(rng);
        }
        case Kind::choice: {
            std::uniform_int_distribution<std::size_t> u(0, choices.size() - 1);
            return choices[u(rng)];
        }
    }
    return json();
}

double ParamDistribution::pdf(double x) const {
    if (x < a || x > b) return 0.0;
    switch (kind) {
        case Kind::uniform: return 1.0 / (b - a);
        case Kind::log_uniform: return 1.0 / (x * (std::log(b) - std::log(a)));
        default: throw ConfigError("pdf defined for continuous distributions only");
    }
}

bool ParamDistribution::contains(const json& value) const {
    switch (kind) {
        case Kind::uniform:
        case Kind::log_uniform: {
            if (!value.is_number()) return false;
            double v = value.get<double>();
            return v >= a && v <= b;
        }
        case Kind::randint: {
            if (!value.is_number_integer() && !value.is_number_unsigned()) return false;
            double v = value.get<double>();
            return v >= a && v <= b;
        }
        case Kind::choice:
            return std::find(choices.begin(), choices.end(), value) != choices.end();
    }
    return false;
}

ParamDistribution ParamDistribution::parse(const JsonCursor& spec) {
    spec.require_object();
    ParamDistribution d;
    std::string kind = spec.at("kind").get_string();
    if (kind == "uniform") d.kind = Kind::uniform;
    else if (kind == "log_uniform") d.kind = Kind::log_uniform;
    else if (kind == "randint") d.kind = Kind::randint;
    else if (kind == "choice") d.kind = Kind::choice;
    else spec.at("kind").fail("unknown distribution kind '" + kind + "'");

    if (d.kind == Kind::choice) {
        spec.reject_unknown_keys({"kind", "values"});
        auto values = spec.at("values");
        values.require_array();
        if (values.node->empty()) values.fail("choice needs at least one value");
        d.choices.assign(values.node->begin(), values.node->end());
    } else {
        spec.reject_unknown_keys({"kind", "a", "b"});
        d.a = spec.at("a").get_number();
        d.b = spec.at("b").get_number();
        if (!(d.a < d.b)) spec.fail("requires a < b");
        if (d.kind == Kind::log_uniform && d.a <= 0) spec.fail("log_uniform requires a > 0");
    }
    return d;
}

json ParamDistribution::to_json() const {
    json out;
    switch (kind) {
        case Kind::uniform: out["kind"] = "uniform"; break;
        case Kind::log_uniform: out["kind"] = "log_uniform"; break;
        case Kind::randint: out["kind"] = "randint"; break;
        case Kind::choice: out["kind"] = "choice"; break;
    }
    if (kind == Kind::choice) out["values"] = choices;
    else {
        out["a"] = a;
        out["b"] = b;
    }
    return out;
}

ParamSpace parse_param_space(const JsonCursor& spec) {
    spec.require_object();
    ParamSpace space;
    for (auto it = spec.node->begin(); it != spec.node->end(); ++it) {
        space.emplace_back(it.key(), ParamDistribution::parse(spec.at(it.key())));
    }
    return space;
}

json param_space_to_json(const ParamSpace& space) {
    json out = json::object();
    for (const auto& [name, dist] : space) out[name] = dist.to_json();
    return out;
}

json sample_point(const ParamSpace& space, std::mt19937_64& rng) {
    json point = json::object();
    for (const auto& [name, dist] : space) point[name] = dist.sample(rng);
    return point;
}

SplitPlan make_splits(std::vector<std::int64_t> ids, int folds, int repetitions, std::uint64_t seed) {
    if (folds < 3) throw ConfigError("make_splits: need at least 3 folds for disjoint train/val/test");
    if (repetitions < 1) throw ConfigError("make_splits: repetitions must be >= 1");
    if (static_cast<int>(ids.size()) < folds)
        throw DataError("make_splits: fewer ids than folds");
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

    SplitPlan plan;
    plan.folds = folds;
    plan.repetitions = repetitions;
    plan.cells.resize(static_cast<std::size_t>(repetitions));
    for (int r = 0; r < repetitions; ++r) {
        std::seed_seq seq{seed, static_cast<std::uint64_t>(r)};
        std::mt19937_64 rng(seq);
        std::vector<std::int64_t> shuffled = ids;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);

        std::size_t n = shuffled.size();
        std::vector<std::vector<std::int64_t>> fold_ids(static_cast<std::size_t>(folds));
        std::size_t base = n / static_cast<std::size_t>(folds);
        std::size_t extra = n % static_cast<std::size_t>(folds);
        std::size_t pos = 0;
        for (int k = 0; k < folds; ++k) {
            std::size_t len = base + (static_cast<std::size_t>(k) < extra ? 1 : 0);
            fold_ids[static_cast<std::size_t>(k)].assign(shuffled.begin() + static_cast<std::ptrdiff_t>(pos),
                                                         shuffled.begin() + static_cast<std::ptrdiff_t>(pos + len));
            pos += len;
        }
        auto& row = plan.cells[static_cast<std::size_t>(r)];
        row.resize(static_cast<std::size_t>(folds));
        for (int k = 0; k < folds; ++k) {
            auto& cell = row[static_cast<std::size_t>(k)];
            int val = (k + 1) % folds;
            cell.test = fold_ids[static_cast<std::size_t>(k)];
            cell.val = fold_ids[static_cast<std::size_t>(val)];
            for (int j = 0; j < folds; ++j) {
                if (j == k || j == val) continue;
                const auto& f = fold_ids[static_cast<std::size_t>(j)];
                cell.train.insert(cell.train.end(), f.begin(), f.end());
            }
            std::sort(cell.train.begin(), cell.train.end());
            std::sort(cell.val.begin(), cell.val.end());
            std::sort(cell.test.begin(), cell.test.end());
        }
    }
    return plan;
}

json TrialRecord::to_json() const {
    return json{{"point", point}, {"objective", objective}, {"failed", failed}, {"seed", seed}};
}

namespace {

// ---- dense GP machinery (dimension <= ~20, observations <= ~100) ----

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

// Cholesky factorization in place; returns false if not positive definite.
bool cholesky(Mat& a) {
    std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i][j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i][k] * a[j][k];
            if (i == j) {
                if (s <= 0) return false;
                a[i][i] = std::sqrt(s);
            } else {
                a[i][j] = s / a[j][j];
            }
        }
        for (std::size_t j = i + 1; j < n; ++j) a[i][j] = 0;
    }
    return true;
}

Vec chol_solve(const Mat& l, Vec b) {
    std::size_t n = l.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < i; ++k) b[i] -= l[i][k] * b[k];
        b[i] /= l[i][i];
    }
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t k = i + 1; k < n; ++k) b[i] -= l[k][i] * b[k];
        b[i] /= l[i][i];
    }
    return b;
}

double sq_dist(const Vec& x, const Vec& y) {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = x[i] - y[i];
        s += d * d;
    }
    return s;
}

struct Gp {
    Mat chol;
    Vec alpha;
    const std::vector<Vec>* xs = nullptr;
    double length = 1.0, noise = 1e-6, y_mean = 0, y_std = 1;

    // negative log marginal likelihood pieces are folded into fit()
    void predict(const Vec& x, double& mu, double& sigma) const {
        std::size_t n = xs->size();
        Vec k(n);
        for (std::size_t i = 0; i < n; ++i)
            k[i] = std::exp(-0.5 * sq_dist(x, (*xs)[i]) / (length * length));
        double m = 0;
        for (std::size_t i = 0; i < n; ++i) m += k[i] * alpha[i];
        // solve L v = k for the variance term
        Vec v = k;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < i; ++j) v[i] -= chol[i][j] * v[j];
            v[i] /= chol[i][i];
        }
        double var = 1.0 + noise;
        for (std::size_t i = 0; i < n; ++i) var -= v[i] * v[i];
        var = std::max(var, 1e-12);
        mu = y_mean + y_std * m;
        sigma = y_std * std::sqrt(var);
    }
};

// Fit kernel length-scale and observation noise by marginal-likelihood grid
// search on standardized targets. Noise floor 1e-6.
bool fit_gp(Gp& gp, const std::vector<Vec>& xs, const Vec& ys) {
    std::size_t n = xs.size();
    double mean = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(n);
    double ss = 0;
    for (double y : ys) ss += (y - mean) * (y - mean);
    double stdev = std::sqrt(ss / static_cast<double>(n));
    if (stdev < 1e-12) stdev = 1.0;
    Vec z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = (ys[i] - mean) / stdev;

    double dim = xs.empty() ? 1.0 : static_cast<double>(xs[0].size());
    const double length_grid[] = {0.1, 0.2, 0.5, 1.0, 2.0};
    const double noise_grid[] = {1e-6, 1e-4, 1e-2, 1e-1};

    double best_ll = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (double lg : length_grid) {
        double length = lg * std::sqrt(dim);
        Mat k(n, Vec(n));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j <= i; ++j) {
                double v = std::exp(-0.5 * sq_dist(xs[i], xs[j]) / (length * length));
                k[i][j] = v;
                k[j][i] = v;
            }
        for (double ng : noise_grid) {
            Mat a = k;
            for (std::size_t i = 0; i < n; ++i) a[i][i] += 1e-6 + ng;
            if (!cholesky(a)) continue;
            Vec alpha = chol_solve(a, z);
            double ll = 0;
            for (std::size_t i = 0; i < n; ++i) {
                ll -= 0.5 * z[i] * alpha[i];
                ll -= std::log(a[i][i]);
            }
            if (ll > best_ll) {
                best_ll = ll;
                gp.chol = std::move(a);
                gp.alpha = std::move(alpha);
                gp.length = length;
                gp.noise = 1e-6 + ng;
                any = true;
            }
        }
    }
    gp.xs = &xs;
    gp.y_mean = mean;
    gp.y_std = stdev;
    return any;
}

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double norm_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

// Expected improvement for minimization.
double expected_improvement(double mu, double sigma, double best, double xi) {
    if (sigma <= 0) return 0.0;
    double z = (best - mu - xi) / sigma;
    return (best - mu - xi) * norm_cdf(z) + sigma * norm_pdf(z);
}

struct Encoder {
    const ParamSpace* space;
    std::size_t dims = 0;
    std::vector<std::size_t> offset;

    explicit Encoder(const ParamSpace& s) : space(&s) {
        for (const auto& [name, dist] : s) {
            offset.push_back(dims);
            dims += dist.kind == ParamDistribution::Kind::choice ? dist.choices.size() : 1;
        }
    }

    Vec encode(const json& point) const {
        Vec x(dims, 0.0);
        std::size_t i = 0;
        for (const auto& [name, dist] : *space) {
            const json& v = point.at(name);
            switch (dist.kind) {
                case ParamDistribution::Kind::uniform:
                case ParamDistribution::Kind::randint:
                    x[offset[i]] = (v.get<double>() - dist.a) / (dist.b - dist.a);
                    break;
                case ParamDistribution::Kind::log_uniform:
                    x[offset[i]] = (std::log(v.get<double>()) - std::log(dist.a)) /
                                   (std::log(dist.b) - std::log(dist.a));
                    break;
                case ParamDistribution::Kind::choice: {
                    auto it = std::find(dist.choices.begin(), dist.choices.end(), v);
                    if (it != dist.choices.end())
                        x[offset[i] + static_cast<std::size_t>(it - dist.choices.begin())] = 1.0;
                    break;
                }
            }
            ++i;
        }
        return x;
    }
};

}  // namespace

OptimizeResult bayes_optimize(const ParamSpace& space, const std::function<double(const json&)>& objective,
                              const OptimizeOptions& options) {
    if (space.empty()) throw ConfigError("bayes_optimize: empty parameter space");
    if (options.n_init < 1 || options.n_init > options.n_calls)
        throw ConfigError("bayes_optimize: need 1 <= n_init <= n_calls");

    std::mt19937_64 rng(options.seed);
    Encoder enc(space);

    OptimizeResult result;
    std::vector<Vec> xs;
    Vec raw_ys;  // NaN for failures

    auto evaluate = [&](const json& point) {
        TrialRecord trial;
        trial.point = point;
        trial.seed = options.seed;
        double y = objective(point);
        if (!std::isfinite(y)) {
            trial.failed = true;
            trial.objective = std::numeric_limits<double>::quiet_NaN();
        } else {
            trial.objective = y;
        }
        result.trials.push_back(trial);
        xs.push_back(enc.encode(point));
        raw_ys.push_back(trial.failed ? std::numeric_limits<double>::quiet_NaN() : y);
    };

    for (int i = 0; i < options.n_init; ++i) evaluate(sample_point(space, rng));

    for (int call = options.n_init; call < options.n_calls; ++call) {
        // failed trials enter the GP at a penalized value above the worst success
        double worst = -std::numeric_limits<double>::infinity();
        double best = std::numeric_limits<double>::infinity();
        for (double y : raw_ys) {
            if (std::isfinite(y)) {
                worst = std::max(worst, y);
                best = std::min(best, y);
            }
        }
        json next;
        if (!std::isfinite(best)) {
            next = sample_point(space, rng);  // nothing succeeded yet
        } else {
            double spread = (worst > best) ? (worst - best) : std::max(1.0, std::abs(best));
            Vec ys = raw_ys;
            for (auto& y : ys)
                if (!std::isfinite(y)) y = worst + 0.5 * spread;

            Gp gp;
            if (!fit_gp(gp, xs, ys)) {
                next = sample_point(space, rng);
            } else {
                double best_ei = -1;
                for (int c = 0; c < options.candidate_pool; ++c) {
                    json cand = sample_point(space, rng);
                    double mu, sigma;
                    gp.predict(enc.encode(cand), mu, sigma);
                    double ei = expected_improvement(mu, sigma, best, options.ei_xi * gp.y_std);
                    if (ei > best_ei) {
                        best_ei = ei;
                        next = cand;
                    }
                }
            }
        }
        evaluate(next);
    }

    double best = std::numeric_limits<double>::infinity();
    std::size_t best_idx = 0;
    bool found = false;
    for (std::size_t i = 0; i < result.trials.size(); ++i) {
        if (!result.trials[i].failed && result.trials[i].objective < best) {
            best = result.trials[i].objective;
            best_idx = i;
            found = true;
        }
    }
    if (!found) throw DataError("bayes_optimize: every trial failed");
    result.best_point = result.trials[best_idx].point;
    result.best_value = best;
    return result;
}

}  // namespace icubench::tuner
