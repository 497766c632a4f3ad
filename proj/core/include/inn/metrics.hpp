#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "inn/tensor.hpp"

namespace inn {

/// Fraction of components with lower - lambda*beta <= y <= upper + lambda*beta.
double coverage(const Tensor& lower, const Tensor& upper, const Tensor& target, double lambda, double beta);

struct MarkovRow {
    double lambda = 0.0;
    double bound = 0.0;     // 1 - 1/lambda
    double coverage = 0.0;  // with lambda*beta enlargement
    double margin = 0.0;    // coverage - bound
    bool pass = false;      // coverage >= bound - slack
};

/// Empirical check of the coverage guarantee P(lo - lb <= y <= up + lb) >= 1 - 1/lambda.
/// Failures are reported, not thrown.
std::vector<MarkovRow> markov_bound_check(const Tensor& lower, const Tensor& upper, const Tensor& target,
                                          std::span<const double> lambdas, double beta, double slack = 0.05);

struct MarkovAlphaRow {
    double lambda = 0.0;
    double alpha = 0.0;
    double bound = 0.0;     // 1 - 1/(lambda * alpha)
    double fraction = 0.0;  // samples whose component coverage is >= 1 - alpha
    double margin = 0.0;
    bool pass = false;
};

/// Per-sample form: the fraction of samples (rows) whose enlarged intervals
/// cover at least 1 - alpha of their components, against 1 - 1/(lambda alpha).
std::vector<MarkovAlphaRow> markov_alpha_check(const Tensor& lower, const Tensor& upper, const Tensor& target,
                                               std::span<const double> lambdas, double alpha, double beta,
                                               double slack = 0.05);

double pearson(std::span<const double> a, std::span<const double> b);

/// corr(|pred - target|, u) / MSE(pred, target) for one sample. Throws
/// MetricUndefined when u or the error map is constant, or the MSE is zero.
double pwcc(std::span<const double> pred, std::span<const double> target, std::span<const double> u);

struct PwccSummary {
    std::vector<double> values;  // per defined sample
    std::size_t skipped = 0;     // samples where the metric is undefined
    double mean = 0.0;
    double std = 0.0;
};

/// Row-wise PWCC over a batch; undefined rows are skipped and counted.
PwccSummary pwcc_batch(const Tensor& pred, const Tensor& target, const Tensor& u);

struct DirectionPoint {
    double threshold = 0.0;
    std::optional<double> accuracy;  // empty when nothing passes the threshold
    double proportion = 0.0;         // considered / all components
    std::size_t considered = 0;
};

/// For each threshold t, considers components whose larger interval half
/// (relative to the prediction) is at least t times the smaller half; the
/// predicted direction is the side of the larger half. Accuracy is agreement
/// with sign(target - pred). Components with width < 1e-12 or equal halves
/// carry no direction and are never considered.
std::vector<DirectionPoint> direction_sweep(const Tensor& pred, const Tensor& lower, const Tensor& upper,
                                            const Tensor& target, std::span<const double> thresholds);

double mean_value(const Tensor& t);
double mean_value(std::span<const double> v);
double stddev(std::span<const double> v);  // sample (n - 1) std, 0 for n < 2

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

} // namespace inn
