#include "kernels.hpp"

#include <algorithm>

#include "inn/error.hpp"

namespace inn::detail {

LinearGeometry geometry(const LayerSpec& spec, ActShape input) {
    LinearGeometry g;
    if (spec.kind == LayerKind::Dense) {
        g.in = input.size();
        g.out = spec.out;
        g.kernel = 1;
        g.length = 1;
        g.pad = 0;
    } else if (spec.kind == LayerKind::Conv1d) {
        g.in = input.channels;
        g.out = spec.out;
        g.kernel = spec.kernel;
        g.length = input.length;
        g.pad = (spec.kernel - 1) / 2;
    } else {
        throw ConsistencyError("geometry() called on a non-linear layer");
    }
    return g;
}

namespace {

// Output positions l whose tap l + k - pad falls inside [0, length).
inline void valid_range(const LinearGeometry& g, std::size_t k, std::size_t& lo, std::size_t& hi) {
    const auto shift = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(g.pad);
    const auto len = static_cast<std::ptrdiff_t>(g.length);
    lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -shift));
    hi = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(len - shift, 0, len));
}

// Offset of the tap for output position `lo` at kernel index k (always >= 0).
inline std::size_t tap_offset(std::size_t lo, std::size_t k, std::size_t pad) { return lo + k - pad; }

} // namespace

void linear_accumulate(const LinearGeometry& g, std::size_t batch, const double* w, const double* pos,
                       const double* neg, double* out) {
    const std::size_t L = g.length;
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < g.out; ++o) {
            double* out_row = out + (b * g.out + o) * L;
            for (std::size_t i = 0; i < g.in; ++i) {
                const double* wk = w + (o * g.in + i) * g.kernel;
                const std::size_t src_off = (b * g.in + i) * L;
                for (std::size_t k = 0; k < g.kernel; ++k) {
                    const double wv = wk[k];
                    if (wv == 0.0) continue;
                    std::size_t lo, hi;
                    valid_range(g, k, lo, hi);
                    if (hi <= lo) continue;
                    const double* src = (wv >= 0.0 ? pos : neg) + src_off + tap_offset(lo, k, g.pad);
                    double* dst = out_row + lo;
                    const std::size_t n = hi - lo;
                    for (std::size_t j = 0; j < n; ++j) dst[j] += wv * src[j];
                }
            }
        }
    }
}

void linear_accumulate_point(const LinearGeometry& g, std::size_t batch, const double* w_nonneg, const double* w_neg,
                             const double* x, double* out) {
    const std::size_t L = g.length;
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < g.out; ++o) {
            double* out_row = out + (b * g.out + o) * L;
            for (std::size_t i = 0; i < g.in; ++i) {
                const std::size_t widx = (o * g.in + i) * g.kernel;
                const std::size_t src_off = (b * g.in + i) * L;
                for (std::size_t k = 0; k < g.kernel; ++k) {
                    const double wa = w_nonneg[widx + k];
                    const double wb = w_neg[widx + k];
                    if (wa == 0.0 && wb == 0.0) continue;
                    std::size_t lo, hi;
                    valid_range(g, k, lo, hi);
                    if (hi <= lo) continue;
                    const double* src = x + src_off + tap_offset(lo, k, g.pad);
                    double* dst = out_row + lo;
                    const std::size_t n = hi - lo;
                    for (std::size_t j = 0; j < n; ++j) dst[j] += (src[j] >= 0.0 ? wa : wb) * src[j];
                }
            }
        }
    }
}

void add_bias(const LinearGeometry& g, std::size_t batch, const double* bias, double* out) {
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t o = 0; o < g.out; ++o) {
            double* row = out + (b * g.out + o) * g.length;
            for (std::size_t l = 0; l < g.length; ++l) row[l] += bias[o];
        }
}

namespace {

inline double dot(const double* a, const double* b, std::size_t n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        s0 += a[j] * b[j];
        s1 += a[j + 1] * b[j + 1];
        s2 += a[j + 2] * b[j + 2];
        s3 += a[j + 3] * b[j + 3];
    }
    for (; j < n; ++j) s0 += a[j] * b[j];
    return (s0 + s1) + (s2 + s3);
}

} // namespace

void linear_grad_weight(const LinearGeometry& g, std::size_t batch, const double* grad, const double* sel,
                        const double* pos, const double* neg, double* dw) {
    const std::size_t L = g.length;
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < g.out; ++o) {
            const double* g_row = grad + (b * g.out + o) * L;
            for (std::size_t i = 0; i < g.in; ++i) {
                const std::size_t widx = (o * g.in + i) * g.kernel;
                const std::size_t src_off = (b * g.in + i) * L;
                for (std::size_t k = 0; k < g.kernel; ++k) {
                    std::size_t lo, hi;
                    valid_range(g, k, lo, hi);
                    if (hi <= lo) continue;
                    const double* src = (sel[widx + k] >= 0.0 ? pos : neg) + src_off + tap_offset(lo, k, g.pad);
                    dw[widx + k] += dot(g_row + lo, src, hi - lo);
                }
            }
        }
    }
}

void linear_grad_bias(const LinearGeometry& g, std::size_t batch, const double* grad, double* db) {
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t o = 0; o < g.out; ++o) {
            const double* row = grad + (b * g.out + o) * g.length;
            double s = 0.0;
            for (std::size_t l = 0; l < g.length; ++l) s += row[l];
            db[o] += s;
        }
}

void linear_grad_input(const LinearGeometry& g, std::size_t batch, const double* w, const double* grad,
                       double* dpos, double* dneg) {
    const std::size_t L = g.length;
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < g.out; ++o) {
            const double* g_row = grad + (b * g.out + o) * L;
            for (std::size_t i = 0; i < g.in; ++i) {
                const double* wk = w + (o * g.in + i) * g.kernel;
                const std::size_t dst_off = (b * g.in + i) * L;
                for (std::size_t k = 0; k < g.kernel; ++k) {
                    const double wv = wk[k];
                    if (wv == 0.0) continue;
                    std::size_t lo, hi;
                    valid_range(g, k, lo, hi);
                    if (hi <= lo) continue;
                    double* dst = (wv >= 0.0 ? dpos : dneg) + dst_off + tap_offset(lo, k, g.pad);
                    const double* src = g_row + lo;
                    const std::size_t n = hi - lo;
                    for (std::size_t j = 0; j < n; ++j) dst[j] += wv * src[j];
                }
            }
        }
    }
}

} // namespace inn::detail
