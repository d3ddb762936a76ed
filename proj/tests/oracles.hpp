// Independent reference implementations used as test oracles. These stay
// deliberately naive (brute force, O(n^2), plain scans) and must not share code
// with the library paths they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <vector>

namespace oracle {

// Pairwise concordance AUROC, ties 1/2.
inline double auroc_pairwise(std::span<const double> scores, std::span<const double> labels) {
    double num = 0, pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] <= 0.5) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] > 0.5) continue;
            pairs += 1;
            if (scores[i] > scores[j]) num += 1;
            else if (scores[i] == scores[j]) num += 0.5;
        }
    }
    return pairs == 0 ? 0.5 : num / pairs;
}

// Average precision by explicit threshold enumeration over descending unique scores.
inline double average_precision_enum(std::span<const double> scores, std::span<const double> labels) {
    double n_pos = 0;
    for (double y : labels) n_pos += y > 0.5 ? 1 : 0;
    if (n_pos == 0) return 0.0;
    std::vector<double> thresholds(scores.begin(), scores.end());
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    double ap = 0, recall_prev = 0;
    for (double t : thresholds) {
        double tp = 0, pp = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= t) {
                pp += 1;
                if (labels[i] > 0.5) tp += 1;
            }
        }
        double recall = tp / n_pos;
        double precision = tp / pp;
        ap += (recall - recall_prev) * precision;
        recall_prev = recall;
    }
    return ap;
}

// Grouped aggregation over (key, value) pairs; "first"/"last" follow input order.
inline std::map<std::int64_t, double> group_aggregate(const std::vector<std::pair<std::int64_t, double>>& rows,
                                                      const std::string& how) {
    std::map<std::int64_t, std::vector<double>> groups;
    for (const auto& [k, v] : rows) groups[k].push_back(v);
    std::map<std::int64_t, double> out;
    for (auto& [k, vs] : groups) {
        double r;
        if (how == "mean") {
            r = 0;
            for (double v : vs) r += v;
            r /= static_cast<double>(vs.size());
        } else if (how == "min") {
            r = *std::min_element(vs.begin(), vs.end());
        } else if (how == "max") {
            r = *std::max_element(vs.begin(), vs.end());
        } else if (how == "sum") {
            r = 0;
            for (double v : vs) r += v;
        } else if (how == "first") {
            r = vs.front();
        } else {
            r = vs.back();
        }
        out[k] = r;
    }
    return out;
}

// Midpoint-rule integral of f over [a, b].
template <typename F>
double integrate(F f, double a, double b, int steps = 200000) {
    double h = (b - a) / steps;
    double s = 0;
    for (int i = 0; i < steps; ++i) s += f(a + (i + 0.5) * h);
    return s * h;
}

// Midpoint rule over geometrically spaced panels; suited to integrands like 1/x
// that span several decades. Requires 0 < a < b.
template <typename F>
double integrate_log_spaced(F f, double a, double b, int panels = 200000) {
    double r = std::pow(b / a, 1.0 / panels);
    double s = 0;
    double lo = a;
    for (int i = 0; i < panels; ++i) {
        double hi = (i + 1 == panels) ? b : lo * r;
        s += f((lo + hi) / 2) * (hi - lo);
        lo = hi;
    }
    return s;
}

// Kolmogorov-Smirnov statistic of samples against U(lo, hi).
inline double ks_vs_uniform(std::vector<double> samples, double lo, double hi) {
    std::sort(samples.begin(), samples.end());
    double n = static_cast<double>(samples.size());
    double d = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double cdf = (samples[i] - lo) / (hi - lo);
        d = std::max(d, std::abs(cdf - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - cdf));
    }
    return d;
}

}  // namespace oracle
