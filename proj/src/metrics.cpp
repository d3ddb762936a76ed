#include "icubench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "icubench/frame.hpp"

namespace icubench::metrics {

namespace {

void check_sizes(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw DataError(std::string(what) + ": size mismatch");
}

std::vector<std::size_t> order_by_score_desc(std::span<const double> scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const double> labels) {
    check_sizes(scores.size(), labels.size(), "auroc");
    std::size_t n = scores.size();
    double n_pos = 0, n_neg = 0;
    for (auto y : labels) (y > 0.5 ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0) return 0.5;

    // rank-sum with average ranks for ties; half-integer sums are exact in double
    auto idx = order_by_score_desc(scores);
    std::vector<std::size_t> asc_idx(idx.rbegin(), idx.rend());
    double rank_sum_pos = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[asc_idx[j + 1]] == scores[asc_idx[i]]) ++j;
        double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[asc_idx[k]] > 0.5) rank_sum_pos += avg_rank;
        }
        i = j + 1;
    }
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg);
}

double auprc(std::span<const double> scores, std::span<const double> labels) {
    check_sizes(scores.size(), labels.size(), "auprc");
    double n_pos = 0;
    for (auto y : labels) n_pos += (y > 0.5) ? 1 : 0;
    if (n_pos == 0) return 0.0;

    auto idx = order_by_score_desc(scores);
    double tp = 0, pp = 0;
    double ap = 0;
    double recall_prev = 0;
    std::size_t i = 0;
    std::size_t n = idx.size();
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) {
            pp += 1;
            if (labels[idx[k]] > 0.5) tp += 1;
        }
        double recall = tp / n_pos;
        double precision = tp / pp;
        ap += (recall - recall_prev) * precision;
        recall_prev = recall;
        i = j + 1;
    }
    return ap;
}

double mae(std::span<const double> pred, std::span<const double> truth) {
    check_sizes(pred.size(), truth.size(), "mae");
    if (pred.empty()) return 0.0;
    double s = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - truth[i]);
    return s / static_cast<double>(pred.size());
}

double accuracy(std::span<const double> scores, std::span<const double> labels, double threshold) {
    check_sizes(scores.size(), labels.size(), "accuracy");
    if (scores.empty()) return 0.0;
    double ok = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        bool hat = scores[i] >= threshold;
        bool y = labels[i] > 0.5;
        if (hat == y) ok += 1;
    }
    return ok / static_cast<double>(scores.size());
}

namespace {

struct BinStats {
    double count = 0, conf = 0, acc = 0;
};

std::vector<BinStats> bin_probs(std::span<const double> probs, std::span<const double> labels, int bins) {
    std::vector<BinStats> st(static_cast<std::size_t>(bins));
    for (std::size_t i = 0; i < probs.size(); ++i) {
        int b = static_cast<int>(probs[i] * bins);
        b = std::clamp(b, 0, bins - 1);  // prob 1.0 falls in the last bin
        st[static_cast<std::size_t>(b)].count += 1;
        st[static_cast<std::size_t>(b)].conf += probs[i];
        st[static_cast<std::size_t>(b)].acc += labels[i] > 0.5 ? 1 : 0;
    }
    return st;
}

}  // namespace

double calibration_error(std::span<const double> probs, std::span<const double> labels, int bins) {
    check_sizes(probs.size(), labels.size(), "calibration_error");
    if (probs.empty()) return 0.0;
    auto st = bin_probs(probs, labels, bins);
    double n = static_cast<double>(probs.size());
    double ece = 0;
    for (const auto& b : st) {
        if (b.count == 0) continue;
        ece += (b.count / n) * std::abs(b.acc / b.count - b.conf / b.count);
    }
    return ece;
}

std::vector<CurvePoint> calibration_curve(std::span<const double> probs, std::span<const double> labels,
                                          int bins) {
    check_sizes(probs.size(), labels.size(), "calibration_curve");
    auto st = bin_probs(probs, labels, bins);
    std::vector<CurvePoint> pts;
    for (const auto& b : st) {
        if (b.count == 0) continue;
        pts.push_back({b.conf / b.count, b.acc / b.count});
    }
    return pts;
}

std::vector<CurvePoint> roc_curve(std::span<const double> scores, std::span<const double> labels) {
    check_sizes(scores.size(), labels.size(), "roc_curve");
    double n_pos = 0, n_neg = 0;
    for (auto y : labels) (y > 0.5 ? n_pos : n_neg) += 1;
    std::vector<CurvePoint> pts{{0, 0}};
    if (n_pos == 0 || n_neg == 0) return pts;
    auto idx = order_by_score_desc(scores);
    double tp = 0, fp = 0;
    std::size_t i = 0, n = idx.size();
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) (labels[idx[k]] > 0.5 ? tp : fp) += 1;
        pts.push_back({fp / n_neg, tp / n_pos});
        i = j + 1;
    }
    return pts;
}

std::vector<CurvePoint> pr_curve(std::span<const double> scores, std::span<const double> labels) {
    check_sizes(scores.size(), labels.size(), "pr_curve");
    double n_pos = 0;
    for (auto y : labels) n_pos += (y > 0.5) ? 1 : 0;
    std::vector<CurvePoint> pts;
    if (n_pos == 0) return pts;
    auto idx = order_by_score_desc(scores);
    double tp = 0, pp = 0;
    std::size_t i = 0, n = idx.size();
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) {
            pp += 1;
            if (labels[idx[k]] > 0.5) tp += 1;
        }
        pts.push_back({tp / n_pos, tp / pp});  // (recall, precision)
        i = j + 1;
    }
    return pts;
}

double jsd(std::span<const double> p_raw, std::span<const double> q_raw) {
    auto normalize = [](std::span<const double> v) {
        std::vector<double> out(v.size());
        double sum = 0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            out[i] = std::abs(v[i]);
            sum += out[i];
        }
        if (sum <= 0) throw DataError("jsd: distribution sums to zero");
        for (auto& x : out) x /= sum;
        return out;
    };
    auto p = normalize(p_raw);
    auto q = normalize(q_raw);
    std::size_t n = std::max(p.size(), q.size());
    p.resize(n, 0.0);
    q.resize(n, 0.0);
    double d = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double m = 0.5 * (p[i] + q[i]);
        if (p[i] > 0) d += 0.5 * p[i] * std::log(p[i] / m);
        if (q[i] > 0) d += 0.5 * q[i] * std::log(q[i] / m);
    }
    return std::max(0.0, d);
}

double demographic_parity_ratio(std::span<const double> preds, std::span<const double> groups,
                                double threshold) {
    check_sizes(preds.size(), groups.size(), "demographic_parity_ratio");
    std::map<double, std::pair<double, double>> per_group;  // group -> (n, positives)
    for (std::size_t i = 0; i < preds.size(); ++i) {
        auto& [n, pos] = per_group[groups[i]];
        n += 1;
        if (preds[i] >= threshold) pos += 1;
    }
    if (per_group.size() < 2) return 1.0;
    double lo = 1.0, hi = 0.0;
    for (const auto& [g, np] : per_group) {
        double rate = np.second / np.first;
        lo = std::min(lo, rate);
        hi = std::max(hi, rate);
    }
    if (hi == 0.0) return 1.0;  // nobody predicted positive in any group
    return lo / hi;
}

std::map<std::string, MeanStd> aggregate(const std::vector<std::map<std::string, double>>& fold_metrics) {
    std::map<std::string, MeanStd> out;
    if (fold_metrics.empty()) return out;
    for (const auto& [name, _] : fold_metrics.front()) {
        double sum = 0, n = 0;
        for (const auto& fold : fold_metrics) {
            auto it = fold.find(name);
            if (it == fold.end()) throw DataError("aggregate: fold missing metric " + name);
            sum += it->second;
            n += 1;
        }
        double mean = sum / n;
        double ss = 0;
        for (const auto& fold : fold_metrics) {
            double d = fold.at(name) - mean;
            ss += d * d;
        }
        out[name] = MeanStd{mean, std::sqrt(ss / n)};
    }
    return out;
}

}  // namespace icubench::metrics
