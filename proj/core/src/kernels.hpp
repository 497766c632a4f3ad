#pragma once

// Linear-layer kernels shared by point and interval propagation.
//
// Dense and conv1d are both handled as a 1D correlation with stride 1 and
// zero "same" padding: a dense layer over F features is a conv over a length-1
// signal with F input channels and kernel 1. Every kernel takes two source
// buffers and picks one per weight: `pos` where w >= 0, `neg` where w < 0.
// Point propagation passes the same buffer twice; interval propagation passes
// the upper/lower bound buffers in the order the bound formula requires.

#include <cstddef>

#include "inn/network.hpp"

namespace inn::detail {

struct LinearGeometry {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t kernel = 1;
    std::size_t length = 1;
    std::size_t pad = 0;

    std::size_t weight_size() const noexcept { return out * in * kernel; }
    std::size_t macs_per_sample() const noexcept { return weight_size() * length; }
};

LinearGeometry geometry(const LayerSpec& spec, ActShape input);

// out[b, o, :] += sum_{i,k} w[o,i,k] * src(w)[b, i, : + k - pad]
void linear_accumulate(const LinearGeometry& g, std::size_t batch, const double* w, const double* pos,
                       const double* neg, double* out);

// Point input with interval weights:
// out[b, o, l] += sum_{i,k} (x >= 0 ? w_nonneg : w_neg)[o,i,k] * x[b, i, l + k - pad]
// Summation order matches linear_accumulate, so equal weights give bit-identical results.
void linear_accumulate_point(const LinearGeometry& g, std::size_t batch, const double* w_nonneg, const double* w_neg,
                             const double* x, double* out);

// out[b, o, :] += bias[o]
void add_bias(const LinearGeometry& g, std::size_t batch, const double* bias, double* out);

// dw[o,i,k] += sum_{b,l} grad[b,o,l] * src(sel[o,i,k])[b,i,l+k-pad]
// `sel` decides which source each weight reads; pass the weights themselves.
void linear_grad_weight(const LinearGeometry& g, std::size_t batch, const double* grad, const double* sel,
                        const double* pos, const double* neg, double* dw);

// db[o] += sum_{b,l} grad[b,o,l]
void linear_grad_bias(const LinearGeometry& g, std::size_t batch, const double* grad, double* db);

// dsrc(w)[b,i,l+k-pad] += w[o,i,k] * grad[b,o,l]
void linear_grad_input(const LinearGeometry& g, std::size_t batch, const double* w, const double* grad,
                       double* dpos, double* dneg);

} // namespace inn::detail
