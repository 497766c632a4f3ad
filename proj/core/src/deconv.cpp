#include "inn/deconv.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "inn/error.hpp"

namespace inn {

Tensor dct_matrix(std::size_t n) {
    if (n < 1) throw ConfigError("DCT size must be positive");
    Tensor d({n, n});
    const double nn = static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double c = k == 0 ? std::sqrt(1.0 / nn) : std::sqrt(2.0 / nn);
        for (std::size_t i = 0; i < n; ++i)
            d[k * n + i] = c * std::cos(std::numbers::pi * (static_cast<double>(i) + 0.5) * static_cast<double>(k) / nn);
    }
    return d;
}

std::vector<double> decay_spectrum(std::size_t n, double gamma) {
    std::vector<double> s(n);
    for (std::size_t k = 0; k < n; ++k)
        s[k] = std::exp(-gamma * static_cast<double>(k) / static_cast<double>(n - 1));
    return s;
}

Tensor build_operator(const OperatorSpec& spec) {
    if (spec.n < 2) throw ConfigError("operator dimension must be at least 2");
    if (!(spec.gamma >= 0.0)) throw ConfigError("operator decay gamma must be nonnegative");
    const std::size_t n = spec.n;
    const Tensor d = dct_matrix(n);
    const auto s = decay_spectrum(n, spec.gamma);

    // A = D^T S D = sum_k s_k d_k d_k^T
    Tensor a({n, n});
    for (std::size_t k = 0; k < n; ++k) {
        const double* dk = d.data() + k * n;
        for (std::size_t i = 0; i < n; ++i) {
            const double coef = s[k] * dk[i];
            double* row = a.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) row[j] += coef * dk[j];
        }
    }
    // Symmetrize away rounding asymmetry.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    return a;
}

std::vector<double> apply(const Tensor& a, std::span<const double> x) {
    const std::size_t n = x.size();
    if (a.shape() != Shape{n, n}) throw DimensionError("apply: operator is not " + std::to_string(n) + "x" + std::to_string(n));
    std::vector<double> y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = a.data() + i * n;
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += row[j] * x[j];
        y[i] = s;
    }
    return y;
}

Tensor piecewise_constant(std::size_t n, std::span<const std::size_t> positions, std::span<const double> values) {
    if (values.size() != positions.size() + 1) throw ConfigError("piecewise_constant needs one more value than jumps");
    for (std::size_t j = 0; j < positions.size(); ++j)
        if (positions[j] == 0 || positions[j] >= n || (j > 0 && positions[j] <= positions[j - 1]))
            throw ConfigError("piecewise_constant: jump positions must be increasing and inside (0, n)");
    Tensor y({n});
    std::size_t seg = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (seg < positions.size() && i >= positions[seg]) ++seg;
        y[i] = values[seg];
    }
    return y;
}

Tensor sample_signal(const SignalSpec& spec, Rng& rng) {
    if (!(spec.jumps_min >= 1 && spec.jumps_min <= spec.jumps_max && spec.jumps_max < spec.n))
        throw ConfigError("signal jump range must satisfy 1 <= min <= max < n");
    const auto jumps = static_cast<std::size_t>(rng.uniform_int(spec.jumps_min, spec.jumps_max));

    // Distinct positions in 1..n-1 via a partial Fisher-Yates shuffle.
    std::vector<std::size_t> pool(spec.n - 1);
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i + 1;
    for (std::size_t i = 0; i < jumps; ++i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(i, pool.size() - 1));
        std::swap(pool[i], pool[j]);
    }
    std::vector<std::size_t> positions(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(jumps));
    std::sort(positions.begin(), positions.end());

    std::vector<double> values(jumps + 1);
    for (auto& v : values) v = rng.uniform(spec.value_lo, spec.value_hi);
    return piecewise_constant(spec.n, positions, values);
}

void assign_splits(DeconvDataset& data) {
    const std::size_t m = data.m();
    const std::size_t val = m / 10;
    const std::size_t test = m / 10;
    const std::size_t train = m - val - test;
    data.train = {0, train};
    data.val = {train, train + val};
    data.test = {train + val, m};
}

DeconvDataset generate(const OperatorSpec& op, const SignalSpec& sig, std::size_t m, double sigma,
                       std::uint64_t seed, NoiseMode mode) {
    if (m < 1) throw ConfigError("dataset needs at least one sample");
    if (!(sigma >= 0.0)) throw ConfigError("noise sigma must be nonnegative");
    if (sig.n != op.n) throw ConfigError("signal and operator dimensions differ");
    const std::size_t n = op.n;
    const Tensor a = build_operator(op);

    DeconvDataset data;
    data.x = Tensor({m, n});
    data.y = Tensor({m, n});
    data.sigma = sigma;
    data.seed = seed;
    data.gamma = op.gamma;
    data.mode = mode;

    for (std::size_t i = 0; i < m; ++i) {
        Rng rng(derive_seed(seed, i));
        const Tensor y = sample_signal(sig, rng);
        const auto x = apply(a, y.values());
        auto x_row = data.x.row(i);
        auto y_row = data.y.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            x_row[j] = x[j];
            y_row[j] = y[j];
        }
        if (sigma > 0.0) {
            for (auto& v : x_row) v += rng.normal(0.0, sigma);
            if (mode == NoiseMode::InputsAndTargets)
                for (auto& v : y_row) v += rng.normal(0.0, sigma);
        }
    }
    assign_splits(data);
    return data;
}

} // namespace inn
