#include <algorithm>
#include <cmath>

#include "icubench/models.hpp"

namespace icubench::models {

std::vector<double> class_weights(std::span<const double> y, bool balanced) {
    std::vector<double> w(y.size(), 1.0);
    if (!balanced) return w;
    double n_pos = 0, n_neg = 0;
    for (double v : y) (v > 0.5 ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0) return w;
    double n = static_cast<double>(y.size());
    double w_pos = n / (2.0 * n_pos);
    double w_neg = n / (2.0 * n_neg);
    for (std::size_t i = 0; i < y.size(); ++i) w[i] = y[i] > 0.5 ? w_pos : w_neg;
    return w;
}

namespace {

void check_finite(const Matrix& x) {
    for (double v : x.values)
        if (!std::isfinite(v)) throw DataError("model input contains non-finite features");
}

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

// numerically safe log(1 + exp(-m))
double log1p_exp_neg(double m) {
    if (m > 0) return std::log1p(std::exp(-m));
    return -m + std::log1p(std::exp(m));
}

struct LogRegProblem {
    const Matrix& x;
    std::span<const double> y;
    std::vector<double> w;   // per-sample weights
    double lam_l1 = 0, lam_l2 = 0;

    // weighted cross-entropy + l2 part (the smooth piece)
    double smooth(const std::vector<double>& beta, double intercept) const {
        double loss = 0;
        for (std::size_t i = 0; i < x.n; ++i) {
            double z = intercept;
            auto row = x.row(i);
            for (std::size_t j = 0; j < x.d; ++j) z += beta[j] * row[j];
            double m = y[i] > 0.5 ? z : -z;
            loss += w[i] * log1p_exp_neg(m);
        }
        double l2 = 0;
        for (double b : beta) l2 += b * b;
        return loss + 0.5 * lam_l2 * l2;
    }

    double objective(const std::vector<double>& beta, double intercept) const {
        double l1 = 0;
        for (double b : beta) l1 += std::abs(b);
        return smooth(beta, intercept) + lam_l1 * l1;
    }

    void gradient(const std::vector<double>& beta, double intercept, std::vector<double>& g,
                  double& g0) const {
        std::fill(g.begin(), g.end(), 0.0);
        g0 = 0;
        for (std::size_t i = 0; i < x.n; ++i) {
            double z = intercept;
            auto row = x.row(i);
            for (std::size_t j = 0; j < x.d; ++j) z += beta[j] * row[j];
            double r = w[i] * (sigmoid(z) - (y[i] > 0.5 ? 1.0 : 0.0));
            g0 += r;
            for (std::size_t j = 0; j < x.d; ++j) g[j] += r * row[j];
        }
        for (std::size_t j = 0; j < x.d; ++j) g[j] += lam_l2 * beta[j];
    }
};

double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

}  // namespace

TrainedModel train_logreg(const Matrix& x, std::span<const double> y, const LogRegParams& params) {
    if (x.n != y.size()) throw DataError("train_logreg: X/y size mismatch");
    if (params.C <= 0) throw ConfigError("train_logreg: C must be > 0");
    if (params.l1_ratio < 0 || params.l1_ratio > 1)
        throw ConfigError("train_logreg: l1_ratio must lie in [0,1]");
    check_finite(x);
    for (double v : y)
        if (v != 0.0 && v != 1.0) throw DataError("train_logreg: labels must be 0/1");

    LogRegProblem prob{x, y, class_weights(y, params.balanced)};
    double reg = 1.0 / params.C;
    switch (params.penalty) {
        case Penalty::l1: prob.lam_l1 = reg; break;
        case Penalty::l2: prob.lam_l2 = reg; break;
        case Penalty::elasticnet:
            prob.lam_l1 = reg * params.l1_ratio;
            prob.lam_l2 = reg * (1.0 - params.l1_ratio);
            break;
    }

    std::vector<double> beta(x.d, 0.0);
    double intercept = 0;
    std::vector<double> grad(x.d);
    double grad0;

    // monotone FISTA: accelerated proposal accepted only when it improves the
    // objective, otherwise fall back to the plain proximal step
    std::vector<double> beta_prev = beta;
    double intercept_prev = intercept;
    double t_momentum = 1;
    double step = 1.0;
    double obj = prob.objective(beta, intercept);
    std::vector<double> trace{obj};

    std::vector<double> yk(x.d), cand(x.d);
    int iter = 0;
    for (; iter < params.max_iter; ++iter) {
        step = std::min(step * 1.2, 1e3);  // backtracking reshrinks when needed
        double t_next = (1 + std::sqrt(1 + 4 * t_momentum * t_momentum)) / 2;
        double mom = (t_momentum - 1) / t_next;
        for (std::size_t j = 0; j < x.d; ++j) yk[j] = beta[j] + mom * (beta[j] - beta_prev[j]);
        double y0 = intercept + mom * (intercept - intercept_prev);
        t_momentum = t_next;

        auto prox_from = [&](const std::vector<double>& base, double base0, double& out0) {
            prob.gradient(base, base0, grad, grad0);
            double fy = prob.smooth(base, base0);
            for (;;) {
                for (std::size_t j = 0; j < x.d; ++j)
                    cand[j] = soft_threshold(base[j] - step * grad[j], step * prob.lam_l1);
                out0 = base0 - step * grad0;  // intercept unpenalized
                double fc = prob.smooth(cand, out0);
                double quad = fy;
                for (std::size_t j = 0; j < x.d; ++j) {
                    double dj = cand[j] - base[j];
                    quad += grad[j] * dj + dj * dj / (2 * step);
                }
                double d0 = out0 - base0;
                quad += grad0 * d0 + d0 * d0 / (2 * step);
                if (fc <= quad + 1e-12 || step < 1e-14) break;
                step *= 0.5;
            }
        };

        double cand0;
        prox_from(yk, y0, cand0);
        double cand_obj = prob.objective(cand, cand0);
        if (cand_obj > obj) {
            // restart from the last accepted point
            prox_from(beta, intercept, cand0);
            cand_obj = prob.objective(cand, cand0);
            t_momentum = 1;
        }

        beta_prev = beta;
        intercept_prev = intercept;
        if (cand_obj <= obj) {
            beta = cand;
            intercept = cand0;
        }
        trace.push_back(std::min(cand_obj, obj));
        double decrease = obj - std::min(cand_obj, obj);
        obj = std::min(cand_obj, obj);
        if (decrease >= 0 && decrease < params.tol * std::max(1.0, std::abs(obj))) {
            ++iter;
            break;
        }
    }

    TrainedModel model;
    model.kind = "logreg";
    model.feature_names = x.names;
    model.linear.coef = std::move(beta);
    model.linear.intercept = intercept;
    model.linear.logistic = true;
    model.iterations_used = iter;
    model.objective_trace = std::move(trace);
    return model;
}

TrainedModel train_elasticnet(const Matrix& x, std::span<const double> y, const ElasticNetParams& params) {
    if (x.n != y.size()) throw DataError("train_elasticnet: X/y size mismatch");
    if (params.alpha <= 0) throw ConfigError("train_elasticnet: alpha must be > 0");
    if (params.l1_ratio < 0 || params.l1_ratio > 1)
        throw ConfigError("train_elasticnet: l1_ratio must lie in [0,1]");
    check_finite(x);

    double n = static_cast<double>(x.n);
    double lam1 = params.alpha * params.l1_ratio;
    double lam2 = params.alpha * (1.0 - params.l1_ratio);

    std::vector<double> beta(x.d, 0.0);
    double intercept = 0;
    {
        double m = 0;
        for (double v : y) m += v;
        intercept = y.empty() ? 0.0 : m / n;
    }

    // residual r = y - X beta - intercept
    std::vector<double> r(x.n);
    for (std::size_t i = 0; i < x.n; ++i) r[i] = y[i] - intercept;

    std::vector<double> col_sq(x.d, 0.0);
    for (std::size_t i = 0; i < x.n; ++i)
        for (std::size_t j = 0; j < x.d; ++j) col_sq[j] += x.at(i, j) * x.at(i, j);

    auto objective = [&]() {
        double sse = 0;
        for (double v : r) sse += v * v;
        double l1 = 0, l2 = 0;
        for (double b : beta) {
            l1 += std::abs(b);
            l2 += b * b;
        }
        return 0.5 * sse / n + lam1 * l1 + 0.5 * lam2 * l2;
    };

    std::vector<double> trace{objective()};
    int iter = 0;
    for (; iter < params.max_iter; ++iter) {
        double max_delta = 0;
        for (std::size_t j = 0; j < x.d; ++j) {
            if (col_sq[j] == 0) continue;
            double old = beta[j];
            double rho = 0;
            for (std::size_t i = 0; i < x.n; ++i) rho += x.at(i, j) * r[i];
            rho = rho / n + (col_sq[j] / n) * old;
            double denom = col_sq[j] / n + lam2;
            double next = soft_threshold(rho, lam1) / denom;
            if (next != old) {
                double delta = next - old;
                for (std::size_t i = 0; i < x.n; ++i) r[i] -= delta * x.at(i, j);
                beta[j] = next;
                max_delta = std::max(max_delta, std::abs(delta));
            }
        }
        // exact intercept update
        double mean_r = 0;
        for (double v : r) mean_r += v;
        mean_r /= n;
        if (mean_r != 0) {
            intercept += mean_r;
            for (auto& v : r) v -= mean_r;
            max_delta = std::max(max_delta, std::abs(mean_r));
        }
        trace.push_back(objective());
        if (max_delta < params.tol) {
            ++iter;
            break;
        }
    }

    TrainedModel model;
    model.kind = "elasticnet";
    model.feature_names = x.names;
    model.linear.coef = std::move(beta);
    model.linear.intercept = intercept;
    model.linear.logistic = false;
    model.iterations_used = iter;
    model.objective_trace = std::move(trace);
    return model;
}

std::vector<double> TrainedModel::predict(const Matrix& x) const {
    if (x.d != feature_names.size())
        throw DataError("predict: expected " + std::to_string(feature_names.size()) + " features, got " +
                        std::to_string(x.d));
    std::vector<double> out(x.n);
    for (std::size_t i = 0; i < x.n; ++i) out[i] = predict_row(x.row(i));
    return out;
}

double TrainedModel::predict_row(std::span<const double> x) const {
    if (is_gbt()) {
        double z = gbt.base_score;
        for (const auto& tree : gbt.trees) z += gbt.learning_rate * tree.predict_row(x);
        return gbt.task == TaskKind::classification ? sigmoid(z) : z;
    }
    double z = linear.intercept;
    for (std::size_t j = 0; j < linear.coef.size(); ++j) z += linear.coef[j] * x[j];
    return linear.logistic ? sigmoid(z) : z;
}

}  // namespace icubench::models
