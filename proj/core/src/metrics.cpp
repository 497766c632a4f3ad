#include "inn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "inn/error.hpp"

namespace inn {

namespace {

void check_aligned(const Tensor& lower, const Tensor& upper, const Tensor& target, const char* what) {
    if (lower.size() != upper.size() || lower.size() != target.size())
        throw DimensionError(std::string(what) + ": bounds and targets differ in size");
}

} // namespace

double coverage(const Tensor& lower, const Tensor& upper, const Tensor& target, double lambda, double beta) {
    check_aligned(lower, upper, target, "coverage");
    if (lower.size() == 0) return 0.0;
    const double pad = lambda * beta;
    std::size_t hits = 0;
    for (std::size_t j = 0; j < target.size(); ++j)
        if (lower[j] - pad <= target[j] && target[j] <= upper[j] + pad) ++hits;
    return static_cast<double>(hits) / static_cast<double>(target.size());
}

std::vector<MarkovRow> markov_bound_check(const Tensor& lower, const Tensor& upper, const Tensor& target,
                                          std::span<const double> lambdas, double beta, double slack) {
    std::vector<MarkovRow> rows;
    for (double lambda : lambdas) {
        MarkovRow r;
        r.lambda = lambda;
        r.bound = 1.0 - 1.0 / lambda;
        r.coverage = coverage(lower, upper, target, lambda, beta);
        r.margin = r.coverage - r.bound;
        r.pass = r.coverage >= r.bound - slack;
        rows.push_back(r);
    }
    return rows;
}

std::vector<MarkovAlphaRow> markov_alpha_check(const Tensor& lower, const Tensor& upper, const Tensor& target,
                                               std::span<const double> lambdas, double alpha, double beta,
                                               double slack) {
    check_aligned(lower, upper, target, "markov_alpha_check");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
    const std::size_t rows = lower.rank() > 1 ? lower.dim(0) : 1;
    const std::size_t cols = lower.size() / rows;
    std::vector<MarkovAlphaRow> out;
    for (double lambda : lambdas) {
        const double pad = lambda * beta;
        std::size_t good = 0;
        for (std::size_t r = 0; r < rows; ++r) {
            std::size_t hits = 0;
            for (std::size_t c = 0; c < cols; ++c) {
                const std::size_t j = r * cols + c;
                if (lower[j] - pad <= target[j] && target[j] <= upper[j] + pad) ++hits;
            }
            if (static_cast<double>(hits) >= (1.0 - alpha) * static_cast<double>(cols)) ++good;
        }
        MarkovAlphaRow row;
        row.lambda = lambda;
        row.alpha = alpha;
        row.bound = 1.0 - 1.0 / (lambda * alpha);
        row.fraction = static_cast<double>(good) / static_cast<double>(rows);
        row.margin = row.fraction - row.bound;
        row.pass = row.fraction >= row.bound - slack;
        out.push_back(row);
    }
    return out;
}

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) throw DimensionError("pearson needs two equal-length series (n >= 2)");
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa <= 0.0 || sbb <= 0.0) throw MetricUndefined("correlation undefined for a constant series");
    return sab / std::sqrt(saa * sbb);
}

double pwcc(std::span<const double> pred, std::span<const double> target, std::span<const double> u) {
    if (pred.size() != target.size() || pred.size() != u.size())
        throw DimensionError("pwcc: prediction, target and uncertainty differ in size");
    std::vector<double> abs_err(pred.size());
    double sq = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        abs_err[i] = std::abs(d);
        sq += d * d;
    }
    const double mse_value = sq / static_cast<double>(pred.size());
    if (!(mse_value > 0.0)) throw MetricUndefined("pwcc undefined for zero MSE");
    return pearson(abs_err, u) / mse_value;
}

PwccSummary pwcc_batch(const Tensor& pred, const Tensor& target, const Tensor& u) {
    if (pred.size() != target.size() || pred.size() != u.size())
        throw DimensionError("pwcc_batch: inputs differ in size");
    PwccSummary s;
    const std::size_t rows = pred.dim(0);
    for (std::size_t r = 0; r < rows; ++r) {
        try {
            s.values.push_back(pwcc(pred.row(r), target.row(r), u.row(r)));
        } catch (const MetricUndefined&) {
            ++s.skipped;
        }
    }
    s.mean = mean_value(s.values);
    s.std = stddev(s.values);
    return s;
}

std::vector<DirectionPoint> direction_sweep(const Tensor& pred, const Tensor& lower, const Tensor& upper,
                                            const Tensor& target, std::span<const double> thresholds) {
    check_aligned(lower, upper, target, "direction_sweep");
    if (pred.size() != target.size()) throw DimensionError("direction_sweep: prediction size differs");
    constexpr double kEps = 1e-12;

    // Per component: direction (+1 up, -1 down, 0 none), half ratio, agreement.
    const std::size_t n = pred.size();
    std::vector<double> ratio(n, 0.0);
    std::vector<int> dir(n, 0);
    std::vector<bool> agree(n, false);
    for (std::size_t j = 0; j < n; ++j) {
        if (upper[j] - lower[j] < kEps) continue;
        const double up_half = upper[j] - pred[j];
        const double lo_half = pred[j] - lower[j];
        if (up_half == lo_half) continue;
        const double big = std::max(up_half, lo_half);
        const double small = std::min(up_half, lo_half);
        ratio[j] = big / std::max(small, kEps);
        dir[j] = up_half > lo_half ? 1 : -1;
        const double resid = target[j] - pred[j];
        agree[j] = (dir[j] > 0 && resid > 0.0) || (dir[j] < 0 && resid < 0.0);
    }

    std::vector<DirectionPoint> curve;
    for (double t : thresholds) {
        DirectionPoint p;
        p.threshold = t;
        std::size_t hits = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (dir[j] == 0 || ratio[j] < t) continue;
            ++p.considered;
            if (agree[j]) ++hits;
        }
        p.proportion = n ? static_cast<double>(p.considered) / static_cast<double>(n) : 0.0;
        if (p.considered) p.accuracy = static_cast<double>(hits) / static_cast<double>(p.considered);
        curve.push_back(p);
    }
    return curve;
}

double mean_value(std::span<const double> v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double mean_value(const Tensor& t) { return mean_value(t.values()); }

double stddev(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_value(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

} // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    return pearson(ra, rb);
}

} // namespace inn
