#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <random>

#include "icubench/models.hpp"

namespace icubench::models {

double GbtTree::predict_row(std::span<const double> x) const {
    int node = 0;
    while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
        const auto& nd = nodes[static_cast<std::size_t>(node)];
        double v = x[static_cast<std::size_t>(nd.feature)];
        bool go_left = is_missing(v) ? nd.missing_left : v <= nd.threshold;
        node = go_left ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(node)].value;
}

namespace {

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

// Feature binning: quantile-spaced thresholds, bin 0 reserved for missing.
struct BinMapper {
    // thresholds[f] sorted ascending; value v maps to bin = upper_bound index + 1
    std::vector<std::vector<double>> thresholds;

    static BinMapper build(const Matrix& x, int max_bins) {
        BinMapper m;
        m.thresholds.resize(x.d);
        std::vector<double> col;
        for (std::size_t j = 0; j < x.d; ++j) {
            col.clear();
            for (std::size_t i = 0; i < x.n; ++i) {
                double v = x.at(i, j);
                if (!is_missing(v)) col.push_back(v);
            }
            std::sort(col.begin(), col.end());
            col.erase(std::unique(col.begin(), col.end()), col.end());
            auto& thr = m.thresholds[j];
            int usable = max_bins - 1;  // minus the missing bin
            if (static_cast<int>(col.size()) <= usable) {
                for (std::size_t k = 0; k + 1 < col.size(); ++k)
                    thr.push_back((col[k] + col[k + 1]) / 2);
            } else {
                for (int q = 1; q < usable; ++q) {
                    std::size_t pos = static_cast<std::size_t>(
                        static_cast<double>(q) * static_cast<double>(col.size()) / usable);
                    pos = std::min(pos, col.size() - 1);
                    double t = (col[pos - 1] + col[pos]) / 2;
                    if (thr.empty() || t > thr.back()) thr.push_back(t);
                }
            }
        }
        return m;
    }

    int bin_of(std::size_t feature, double v) const {
        if (is_missing(v)) return 0;
        const auto& thr = thresholds[feature];
        return 1 + static_cast<int>(std::upper_bound(thr.begin(), thr.end(), v) - thr.begin());
    }

    int n_bins(std::size_t feature) const { return 2 + static_cast<int>(thresholds[feature].size()); }

    double threshold_value(std::size_t feature, int bin) const {
        // raw threshold for "bin <= bin" split; bin 0 handled via missing direction
        return thresholds[feature][static_cast<std::size_t>(bin - 1)];
    }
};

struct HistEntry {
    double g = 0, h = 0;
    int count = 0;
};

struct SplitCandidate {
    double gain = -1;
    int feature = -1;
    int threshold_bin = -1;
    bool missing_left = true;
};

struct Leaf {
    std::vector<std::uint32_t> rows;
    double sum_g = 0, sum_h = 0;
    int depth = 0;
    SplitCandidate best;
};

constexpr double kLambda = 1e-3;  // small l2 on leaf weights for stability

double leaf_score(double g, double h) { return g * g / (h + kLambda); }

SplitCandidate best_split(const std::vector<std::vector<HistEntry>>& hist,
                          const std::vector<std::size_t>& features, double sum_g, double sum_h,
                          int total_count, int min_child) {
    SplitCandidate best;
    double parent = leaf_score(sum_g, sum_h);
    for (std::size_t f : features) {
        const auto& bins = hist[f];
        // scan split points left to right; missing (bin 0) tried on both sides
        for (int miss_left = 0; miss_left < 2; ++miss_left) {
            double gl = miss_left ? bins[0].g : 0;
            double hl = miss_left ? bins[0].h : 0;
            int cl = miss_left ? bins[0].count : 0;
            for (std::size_t b = 1; b + 1 < bins.size(); ++b) {
                gl += bins[b].g;
                hl += bins[b].h;
                cl += bins[b].count;
                int cr = total_count - cl;
                if (cl < min_child || cr < min_child) continue;
                double gr = sum_g - gl;
                double hr = sum_h - hl;
                double gain = leaf_score(gl, hl) + leaf_score(gr, hr) - parent;
                if (gain > best.gain) {
                    best.gain = gain;
                    best.feature = static_cast<int>(f);
                    best.threshold_bin = static_cast<int>(b);
                    best.missing_left = miss_left != 0;
                }
            }
            if (bins[0].count == 0) break;  // both directions identical without missing rows
        }
    }
    return best;
}

}  // namespace

TrainedModel train_gbt(const Matrix& x, std::span<const double> y, const GbtParams& params, TaskKind task,
                       const Matrix* x_val, std::span<const double> y_val) {
    if (x.n != y.size()) throw DataError("train_gbt: X/y size mismatch");
    if (x.n == 0) throw DataError("train_gbt: empty training set");
    if (params.num_leaves < 1) throw ConfigError("train_gbt: num_leaves must be >= 1");

    bool classify = task == TaskKind::classification;
    if (classify)
        for (double v : y)
            if (v != 0.0 && v != 1.0) throw DataError("train_gbt: labels must be 0/1");

    auto weights = classify ? class_weights(y, params.balanced) : std::vector<double>(x.n, 1.0);

    BinMapper mapper = BinMapper::build(x, params.max_bins);
    std::vector<std::vector<int>> binned(x.d, std::vector<int>(x.n));
    for (std::size_t j = 0; j < x.d; ++j)
        for (std::size_t i = 0; i < x.n; ++i) binned[j][i] = mapper.bin_of(j, x.at(i, j));

    GbtModel model;
    model.task = task;
    model.learning_rate = params.learning_rate;
    if (classify) {
        double pos = 0, tot = 0;
        for (std::size_t i = 0; i < x.n; ++i) {
            pos += weights[i] * y[i];
            tot += weights[i];
        }
        double p = std::clamp(pos / tot, 1e-9, 1 - 1e-9);
        model.base_score = std::log(p / (1 - p));
    } else {
        model.base_score = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(x.n);
    }

    std::vector<double> raw(x.n, model.base_score);
    std::vector<double> raw_val;
    if (x_val) raw_val.assign(x_val->n, model.base_score);

    auto train_loss = [&]() {
        double s = 0, wsum = 0;
        for (std::size_t i = 0; i < x.n; ++i) {
            if (classify) {
                double m = y[i] > 0.5 ? raw[i] : -raw[i];
                s += weights[i] * (m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m)));
            } else {
                double d = raw[i] - y[i];
                s += 0.5 * d * d;
            }
            wsum += weights[i];
        }
        return s / (classify ? wsum : static_cast<double>(x.n));
    };
    auto val_loss = [&]() {
        double s = 0;
        for (std::size_t i = 0; i < x_val->n; ++i) {
            if (classify) {
                double m = y_val[i] > 0.5 ? raw_val[i] : -raw_val[i];
                s += m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
            } else {
                double d = raw_val[i] - y_val[i];
                s += 0.5 * d * d;
            }
        }
        return s / static_cast<double>(x_val->n);
    };

    std::mt19937_64 rng(params.seed);
    std::vector<double> g(x.n), h(x.n);
    std::vector<double> trace{train_loss()};

    double best_val = std::numeric_limits<double>::infinity();
    int best_round = 0;
    int rounds_no_improve = 0;

    std::vector<std::uint32_t> all_rows(x.n);
    std::iota(all_rows.begin(), all_rows.end(), 0u);

    for (int round = 0; round < params.n_estimators; ++round) {
        for (std::size_t i = 0; i < x.n; ++i) {
            if (classify) {
                double p = sigmoid(raw[i]);
                g[i] = weights[i] * (p - y[i]);
                h[i] = std::max(weights[i] * p * (1 - p), 1e-12);
            } else {
                g[i] = raw[i] - y[i];
                h[i] = 1.0;
            }
        }

        // per-tree row subsample and feature subsample
        std::vector<std::uint32_t> rows;
        if (params.subsample < 1.0 && params.subsample_freq > 0 &&
            round % params.subsample_freq == 0) {
            std::size_t want = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::llround(params.subsample * static_cast<double>(x.n))));
            rows = all_rows;
            std::shuffle(rows.begin(), rows.end(), rng);
            rows.resize(want);
            std::sort(rows.begin(), rows.end());
        } else {
            rows = all_rows;
        }
        std::vector<std::size_t> features(x.d);
        std::iota(features.begin(), features.end(), std::size_t{0});
        if (params.colsample < 1.0 && x.d > 1) {
            std::size_t want = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::llround(params.colsample * static_cast<double>(x.d))));
            std::shuffle(features.begin(), features.end(), rng);
            features.resize(want);
            std::sort(features.begin(), features.end());
        }

        GbtTree tree;
        auto make_hist = [&](const std::vector<std::uint32_t>& leaf_rows) {
            std::vector<std::vector<HistEntry>> hist(x.d);
            for (std::size_t f : features)
                hist[f].assign(static_cast<std::size_t>(mapper.n_bins(f)), HistEntry{});
            for (std::size_t f : features) {
                auto& hf = hist[f];
                const auto& bf = binned[f];
                for (auto r : leaf_rows) {
                    auto& e = hf[static_cast<std::size_t>(bf[r])];
                    e.g += g[r];
                    e.h += h[r];
                    e.count += 1;
                }
            }
            return hist;
        };

        std::vector<Leaf> leaves;
        std::vector<std::vector<std::vector<HistEntry>>> leaf_hists;
        {
            Leaf root;
            root.rows = rows;
            for (auto r : rows) {
                root.sum_g += g[r];
                root.sum_h += h[r];
            }
            leaf_hists.push_back(make_hist(root.rows));
            root.best = best_split(leaf_hists[0], features, root.sum_g, root.sum_h,
                                   static_cast<int>(root.rows.size()), params.min_child_samples);
            leaves.push_back(std::move(root));
            tree.nodes.push_back(GbtTreeNode{});
        }
        std::vector<int> leaf_node{0};

        int n_leaves = 1;
        while (n_leaves < params.num_leaves) {
            // expand the leaf with the best gain (leaf-wise growth)
            int pick = -1;
            double best_gain = 0;
            for (std::size_t li = 0; li < leaves.size(); ++li) {
                if (leaves[li].best.gain > best_gain &&
                    (params.max_depth < 0 || leaves[li].depth < params.max_depth)) {
                    best_gain = leaves[li].best.gain;
                    pick = static_cast<int>(li);
                }
            }
            if (pick < 0) break;

            Leaf& parent = leaves[static_cast<std::size_t>(pick)];
            const auto& split = parent.best;
            const auto& bf = binned[static_cast<std::size_t>(split.feature)];

            Leaf left, right;
            left.depth = right.depth = parent.depth + 1;
            for (auto r : parent.rows) {
                int b = bf[r];
                bool go_left = (b == 0) ? split.missing_left : b <= split.threshold_bin;
                (go_left ? left.rows : right.rows).push_back(r);
            }
            for (auto r : left.rows) {
                left.sum_g += g[r];
                left.sum_h += h[r];
            }
            right.sum_g = parent.sum_g - left.sum_g;
            right.sum_h = parent.sum_h - left.sum_h;

            // histogram subtraction: build the smaller child, derive the sibling
            bool left_small = left.rows.size() <= right.rows.size();
            auto small_hist = make_hist(left_small ? left.rows : right.rows);
            auto& parent_hist = leaf_hists[static_cast<std::size_t>(pick)];
            std::vector<std::vector<HistEntry>> sib_hist(x.d);
            for (std::size_t f : features) {
                auto& sf = sib_hist[f];
                sf = parent_hist[f];
                const auto& sm = small_hist[f];
                for (std::size_t b = 0; b < sf.size(); ++b) {
                    sf[b].g -= sm[b].g;
                    sf[b].h -= sm[b].h;
                    sf[b].count -= sm[b].count;
                }
            }
            auto& left_hist = left_small ? small_hist : sib_hist;
            auto& right_hist = left_small ? sib_hist : small_hist;

            left.best = best_split(left_hist, features, left.sum_g, left.sum_h,
                                   static_cast<int>(left.rows.size()), params.min_child_samples);
            right.best = best_split(right_hist, features, right.sum_g, right.sum_h,
                                    static_cast<int>(right.rows.size()), params.min_child_samples);

            int node_idx = leaf_node[static_cast<std::size_t>(pick)];
            auto& node = tree.nodes[static_cast<std::size_t>(node_idx)];
            node.feature = split.feature;
            node.threshold_bin = split.threshold_bin;
            node.threshold =
                mapper.threshold_value(static_cast<std::size_t>(split.feature), split.threshold_bin);
            node.missing_left = split.missing_left;
            node.left = static_cast<int>(tree.nodes.size());
            node.right = node.left + 1;
            tree.nodes.push_back(GbtTreeNode{});
            tree.nodes.push_back(GbtTreeNode{});

            leaf_node[static_cast<std::size_t>(pick)] = node.left;
            leaf_node.push_back(node.right);
            leaf_hists[static_cast<std::size_t>(pick)] = std::move(left_hist);
            leaf_hists.push_back(std::move(right_hist));
            leaves[static_cast<std::size_t>(pick)] = std::move(left);
            leaves.push_back(std::move(right));
            ++n_leaves;
        }

        for (std::size_t li = 0; li < leaves.size(); ++li) {
            double value = -leaves[li].sum_g / (leaves[li].sum_h + kLambda);
            tree.nodes[static_cast<std::size_t>(leaf_node[li])].value = value;
            double step = params.learning_rate * value;
            for (auto r : leaves[li].rows) raw[r] += step;
        }
        // rows outside the subsample still need their raw scores updated
        if (rows.size() != x.n) {
            std::vector<char> in_sample(x.n, 0);
            for (auto r : rows) in_sample[r] = 1;
            for (std::size_t i = 0; i < x.n; ++i)
                if (!in_sample[i]) raw[i] += params.learning_rate * tree.predict_row(x.row(i));
        }

        model.trees.push_back(std::move(tree));
        trace.push_back(train_loss());

        if (x_val) {
            const auto& t = model.trees.back();
            for (std::size_t i = 0; i < x_val->n; ++i)
                raw_val[i] += params.learning_rate * t.predict_row(x_val->row(i));
            double vl = val_loss();
            if (vl < best_val - 1e-12) {
                best_val = vl;
                best_round = static_cast<int>(model.trees.size());
                rounds_no_improve = 0;
            } else if (++rounds_no_improve >= params.early_stopping_rounds) {
                break;
            }
        }
    }

    if (x_val && best_round > 0 && best_round < static_cast<int>(model.trees.size()))
        model.trees.resize(static_cast<std::size_t>(best_round));

    TrainedModel out;
    out.kind = classify ? "gbt_classifier" : "gbt_regressor";
    out.feature_names = x.names;
    out.seed = params.seed;
    out.gbt = std::move(model);
    out.rounds_used = static_cast<int>(out.gbt.trees.size());
    out.objective_trace = std::move(trace);
    return out;
}

}  // namespace icubench::models
