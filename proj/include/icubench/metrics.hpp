#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace icubench::metrics {

struct CurvePoint {
    double x;
    double y;
};

// Probability that a random positive outranks a random negative, ties counted 1/2
// (Mann-Whitney). Returns 0.5 when one class is absent.
double auroc(std::span<const double> scores, std::span<const double> labels);

// Average precision: sum over descending unique thresholds of (R_i - R_{i-1}) * P_i.
double auprc(std::span<const double> scores, std::span<const double> labels);

double mae(std::span<const double> pred, std::span<const double> truth);

double accuracy(std::span<const double> scores, std::span<const double> labels, double threshold = 0.5);

// Expected calibration error over equal-width probability bins; empty bins skipped.
double calibration_error(std::span<const double> probs, std::span<const double> labels, int bins = 10);
std::vector<CurvePoint> calibration_curve(std::span<const double> probs, std::span<const double> labels,
                                          int bins = 10);

std::vector<CurvePoint> roc_curve(std::span<const double> scores, std::span<const double> labels);
std::vector<CurvePoint> pr_curve(std::span<const double> scores, std::span<const double> labels);

// Jensen-Shannon divergence between |p| and |q| normalized to sum 1; natural log,
// so the range is [0, ln 2]. A distribution-shift diagnostic, not a performance score.
double jsd(std::span<const double> p_raw, std::span<const double> q_raw);

// min over groups of positivity rate at `threshold`, divided by the max. 1.0 = parity.
double demographic_parity_ratio(std::span<const double> preds, std::span<const double> groups,
                                double threshold = 0.5);

struct MeanStd {
    double mean;
    double std;  // population
};

std::map<std::string, MeanStd> aggregate(const std::vector<std::map<std::string, double>>& fold_metrics);

}  // namespace icubench::metrics
