#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "inn/rng.hpp"
#include "inn/tensor.hpp"

namespace inn {

// Ill-conditioned blur A = D^T S D with D the orthonormal DCT-II and
// S = diag(exp(-gamma * k / (n - 1))). cond(A) = exp(gamma).
struct OperatorSpec {
    std::size_t n = 512;
    double gamma = 8.0;
};

// Piecewise-constant signals: J ~ U{jumps_min..jumps_max} interior jumps at
// distinct uniform positions, J + 1 segment values i.i.d. U[value_lo, value_hi].
struct SignalSpec {
    std::size_t n = 512;
    std::size_t jumps_min = 2;
    std::size_t jumps_max = 10;
    double value_lo = 0.0;
    double value_hi = 1.0;
};

enum class NoiseMode : std::uint8_t { InputsOnly = 0, InputsAndTargets = 1 };

// Row k is the k-th DCT-II basis vector: D[k][i] = c_k cos(pi (i + 1/2) k / n).
Tensor dct_matrix(std::size_t n);
std::vector<double> decay_spectrum(std::size_t n, double gamma);
Tensor build_operator(const OperatorSpec& spec);

// y = A x for a square A stored row-major.
std::vector<double> apply(const Tensor& a, std::span<const double> x);

// Step function with jumps before each listed position (0 < p < n, strictly
// increasing) and values.size() == positions.size() + 1.
Tensor piecewise_constant(std::size_t n, std::span<const std::size_t> positions, std::span<const double> values);

Tensor sample_signal(const SignalSpec& spec, Rng& rng);

struct SplitRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const noexcept { return end - begin; }
};

/// Paired samples x_i = A y_i + eta_i. Sample i draws its signal and noise
/// from Rng(derive_seed(seed, i)), so the content is a pure function of
/// (specs, m, sigma, seed, mode). Splits are 80/10/10 by index.
struct DeconvDataset {
    Tensor x;  // (m, n)
    Tensor y;  // (m, n)
    double sigma = 0.0;
    std::uint64_t seed = 0;
    double gamma = 0.0;
    NoiseMode mode = NoiseMode::InputsOnly;
    SplitRange train, val, test;

    std::size_t n() const { return x.dim(1); }
    std::size_t m() const { return x.dim(0); }

    Tensor x_of(const SplitRange& r) const { return x.slice_rows(r.begin, r.end); }
    Tensor y_of(const SplitRange& r) const { return y.slice_rows(r.begin, r.end); }
};

void assign_splits(DeconvDataset& data);

DeconvDataset generate(const OperatorSpec& op, const SignalSpec& sig, std::size_t m, double sigma,
                       std::uint64_t seed, NoiseMode mode = NoiseMode::InputsOnly);

} // namespace inn
