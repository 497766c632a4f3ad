#include "inn/interval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#include "inn/adam.hpp"
#include "inn/error.hpp"
#include "inn/training.hpp"
#include "kernels.hpp"

namespace inn {

namespace {

std::uint64_t next_inn_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
}

// Ordinal of each layer among linear layers (or npos).
std::vector<std::size_t> ordinals(const Network& net) {
    std::vector<std::size_t> out(net.layer_count(), static_cast<std::size_t>(-1));
    const auto& lin = net.linear_layers();
    for (std::size_t q = 0; q < lin.size(); ++q) out[lin[q]] = q;
    return out;
}

void validate_interval_architecture(const Network& net) {
    bool seen_linear = false;
    bool relu_since_linear = false;
    for (std::size_t i = 0; i < net.layer_count(); ++i) {
        const auto kind = net.layer(i).spec.kind;
        if (kind == LayerKind::Relu) relu_since_linear = true;
        if (net.layer(i).spec.is_linear()) {
            if (seen_linear && !relu_since_linear)
                throw ConfigError("interval propagation needs a ReLU before linear layer " + std::to_string(i) +
                                  " so its interval inputs stay nonnegative");
            seen_linear = true;
            relu_since_linear = false;
        }
    }
}

} // namespace

LayerMask LayerMask::parse(const std::string& text, std::size_t linear_count) {
    std::string t;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) t += c;
    if (t == "all") return all(linear_count);
    if (t == "none") return LayerMask(std::vector<bool>(linear_count, false));
    std::vector<bool> bits(linear_count, false);
    if (t.rfind("last:", 0) == 0) {
        std::size_t k = 0;
        try {
            k = std::stoul(t.substr(5));
        } catch (const std::exception&) {
            throw ConfigError("bad layer mask '" + text + "'");
        }
        if (k == 0 || k > linear_count)
            throw ConfigError("layer mask 'last:K' needs 1 <= K <= " + std::to_string(linear_count));
        for (std::size_t q = linear_count - k; q < linear_count; ++q) bits[q] = true;
        return LayerMask(std::move(bits));
    }
    std::stringstream ss(t);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t q = 0;
        try {
            std::size_t used = 0;
            q = std::stoul(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("bad layer mask '" + text + "'");
        }
        if (q == 0 || q > linear_count)
            throw ConfigError("layer mask entry " + item + " outside 1.." + std::to_string(linear_count));
        bits[q - 1] = true;
    }
    return LayerMask(std::move(bits));
}

bool LayerMask::any() const noexcept { return std::find(bits_.begin(), bits_.end(), true) != bits_.end(); }

std::string LayerMask::to_string() const {
    if (!bits_.empty() && std::all_of(bits_.begin(), bits_.end(), [](bool b) { return b; })) return "all";
    if (!any()) return "none";
    std::string out;
    for (std::size_t q = 0; q < bits_.size(); ++q)
        if (bits_[q]) out += (out.empty() ? "" : ",") + std::to_string(q + 1);
    return out;
}

IntervalNetwork::IntervalNetwork(Network base, LayerMask mask)
    : base_(std::move(base)), mask_(std::move(mask)), id_(next_inn_id()) {
    validate_interval_architecture(base_);
    if (mask_.size() != base_.linear_layers().size())
        throw ConfigError("layer mask has " + std::to_string(mask_.size()) + " entries, network has " +
                          std::to_string(base_.linear_layers().size()) + " linear layers");
    for (auto idx : base_.linear_layers()) {
        const auto& layer = base_.layer(idx);
        bounds_.push_back(IntervalBounds{layer.weight, layer.weight, layer.bias, layer.bias});
    }
}

namespace {
LayerMask full_mask(const Network& net) { return LayerMask::all(net.linear_layers().size()); }
} // namespace

IntervalNetwork::IntervalNetwork(Network base) : IntervalNetwork(Network(base), full_mask(base)) {}

IntervalNetwork::IntervalNetwork(const IntervalNetwork& other)
    : base_(other.base_), mask_(other.mask_), bounds_(other.bounds_), id_(next_inn_id()) {}

IntervalNetwork& IntervalNetwork::operator=(const IntervalNetwork& other) {
    if (this != &other) {
        base_ = other.base_;
        mask_ = other.mask_;
        bounds_ = other.bounds_;
        id_ = next_inn_id();
        generation_ = 0;
    }
    return *this;
}

std::size_t IntervalNetwork::first_trainable_layer() const {
    const auto& lin = base_.linear_layers();
    for (std::size_t q = 0; q < lin.size(); ++q)
        if (mask_[q]) return lin[q];
    return base_.layer_count();
}

void IntervalNetwork::set_bounds(std::size_t ordinal, IntervalBounds b) {
    const auto& layer = base_.layer(base_.linear_layers().at(ordinal));
    require_same_shape(b.weight_lower, layer.weight, "weight lower bound");
    require_same_shape(b.weight_upper, layer.weight, "weight upper bound");
    require_same_shape(b.bias_lower, layer.bias, "bias lower bound");
    require_same_shape(b.bias_upper, layer.bias, "bias upper bound");
    bounds_[ordinal] = std::move(b);
    ++generation_;
}

std::vector<Tensor*> IntervalNetwork::trainable_tensors() {
    ++generation_;
    std::vector<Tensor*> out;
    for (std::size_t q = 0; q < bounds_.size(); ++q) {
        if (!mask_[q]) continue;
        auto& b = bounds_[q];
        out.insert(out.end(), {&b.weight_lower, &b.weight_upper, &b.bias_lower, &b.bias_upper});
    }
    return out;
}

bool IntervalNetwork::contains_base() const {
    const auto& lin = base_.linear_layers();
    auto inside = [](const Tensor& lo, const Tensor& pt, const Tensor& up) {
        for (std::size_t j = 0; j < pt.size(); ++j)
            if (!(lo[j] <= pt[j] && pt[j] <= up[j])) return false;
        return true;
    };
    for (std::size_t q = 0; q < lin.size(); ++q) {
        const auto& layer = base_.layer(lin[q]);
        const auto& b = bounds_[q];
        if (!inside(b.weight_lower, layer.weight, b.weight_upper) || !inside(b.bias_lower, layer.bias, b.bias_upper))
            return false;
    }
    return true;
}

double IntervalNetwork::mean_parameter_width() const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& b : bounds_) {
        for (std::size_t j = 0; j < b.weight_lower.size(); ++j) sum += b.weight_upper[j] - b.weight_lower[j];
        for (std::size_t j = 0; j < b.bias_lower.size(); ++j) sum += b.bias_upper[j] - b.bias_lower[j];
        n += b.weight_lower.size() + b.bias_lower.size();
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

IntervalNetwork& project_containment(IntervalNetwork& inn) {
    const auto& lin = inn.base_.linear_layers();
    for (std::size_t q = 0; q < lin.size(); ++q) {
        const auto& layer = inn.base_.layer(lin[q]);
        auto& b = inn.bounds_[q];
        for (std::size_t j = 0; j < layer.weight.size(); ++j) {
            b.weight_lower[j] = std::min(b.weight_lower[j], layer.weight[j]);
            b.weight_upper[j] = std::max(b.weight_upper[j], layer.weight[j]);
        }
        for (std::size_t j = 0; j < layer.bias.size(); ++j) {
            b.bias_lower[j] = std::min(b.bias_lower[j], layer.bias[j]);
            b.bias_upper[j] = std::max(b.bias_upper[j], layer.bias[j]);
        }
    }
    ++inn.generation_;
    return inn;
}

IntervalForwardResult interval_forward(const IntervalNetwork& inn, const Tensor& x, PassCounter* counter) {
    const auto& net = inn.base();
    const std::size_t batch = batch_of(x, net.input_shape());
    const auto in = net.input_shape();
    auto result = interval_forward_from(inn, 0, x.reshaped({batch, in.channels, in.length}), counter);
    result.cache.input_shape = x.shape();
    return result;
}

IntervalForwardResult interval_forward_from(const IntervalNetwork& inn, std::size_t start_layer, const Tensor& act,
                                            PassCounter* counter) {
    const auto& net = inn.base();
    if (start_layer >= net.layer_count()) throw DimensionError("interval_forward_from: start layer out of range");
    const auto ord = ordinals(net);
    const auto& lin = net.linear_layers();
    for (std::size_t q = 0; q < lin.size() && lin[q] < start_layer; ++q)
        if (inn.trainable(q))
            throw ConsistencyError("interval_forward_from: trainable layer " + std::to_string(lin[q]) +
                                   " precedes start layer " + std::to_string(start_layer));

    const auto start_shape = net.activation_shape(start_layer);
    const std::size_t batch = batch_of(act, start_shape);

    IntervalForwardResult result;
    auto& cache = result.cache;
    cache.inn_id = inn.id();
    cache.generation = inn.generation();
    cache.batch = batch;
    cache.start_layer = start_layer;
    cache.input_shape = act.shape();

    Tensor lo = act.reshaped({batch, start_shape.channels, start_shape.length});
    Tensor up = lo;
    // Point-valued until the first linear layer has been applied.
    bool point = true;
    for (std::size_t q = 0; q < lin.size() && lin[q] < start_layer; ++q) point = false;

    std::uint64_t macs = 0;
    for (std::size_t i = start_layer; i < net.layer_count(); ++i) {
        const auto& layer = net.layer(i);
        const auto out_shape = net.activation_shape(i + 1);
        Tensor next_lo, next_up;
        if (layer.spec.is_linear()) {
            const auto& b = inn.bounds(ord[i]);
            const auto g = detail::geometry(layer.spec, net.activation_shape(i));
            next_lo = Tensor({batch, out_shape.channels, out_shape.length});
            next_up = Tensor({batch, out_shape.channels, out_shape.length});
            if (point) {
                // up = W_up max(x,0) + W_lo min(x,0) + b_up;  lo = W_lo max(x,0) + W_up min(x,0) + b_lo
                detail::linear_accumulate_point(g, batch, b.weight_upper.data(), b.weight_lower.data(), lo.data(),
                                                next_up.data());
                detail::linear_accumulate_point(g, batch, b.weight_lower.data(), b.weight_upper.data(), lo.data(),
                                                next_lo.data());
                point = false;
            } else {
                // Nonnegative inputs:
                // up = max(W_up,0) x_up + min(W_up,0) x_lo + b_up;  lo = max(W_lo,0) x_lo + min(W_lo,0) x_up + b_lo
                detail::linear_accumulate(g, batch, b.weight_upper.data(), up.data(), lo.data(), next_up.data());
                detail::linear_accumulate(g, batch, b.weight_lower.data(), lo.data(), up.data(), next_lo.data());
            }
            detail::add_bias(g, batch, b.bias_upper.data(), next_up.data());
            detail::add_bias(g, batch, b.bias_lower.data(), next_lo.data());
            macs += 2 * g.macs_per_sample() * batch;
        } else if (layer.spec.kind == LayerKind::Relu) {
            next_lo = lo;
            next_up = up;
            for (auto& v : next_lo.values()) v = v > 0.0 ? v : 0.0;
            for (auto& v : next_up.values()) v = v > 0.0 ? v : 0.0;
        } else {
            // Dropout is the identity at inference.
            next_lo = lo;
            next_up = up;
        }
        cache.lower.push_back(std::move(lo));
        cache.upper.push_back(std::move(up));
        lo = std::move(next_lo);
        up = std::move(next_up);
    }

    for (std::size_t j = 0; j < lo.size(); ++j)
        if (!(lo[j] <= up[j]))
            throw ConsistencyError("interval propagation produced lower > upper at output " + std::to_string(j));

    if (counter) {
        counter->passes += 2;  // one sweep per bound
        counter->macs += macs;
    }
    const auto out = net.output_shape();
    result.lower = std::move(lo).reshaped({batch, out.size()});
    result.upper = std::move(up).reshaped({batch, out.size()});
    cache.out_lower = result.lower;
    cache.out_upper = result.upper;
    return result;
}

double interval_loss(const Tensor& lower, const Tensor& upper, const Tensor& y, double beta) {
    return interval_loss_with_grad(lower, upper, y, beta).value;
}

IntervalLoss interval_loss_with_grad(const Tensor& lower, const Tensor& upper, const Tensor& y, double beta) {
    if (!(beta > 0.0)) throw ConfigError("interval loss needs beta > 0");
    require_same_shape(lower, upper, "interval_loss bounds");
    if (y.size() != lower.size()) throw DimensionError("interval_loss: target size does not match bounds");
    const double batch = static_cast<double>(lower.rank() > 1 ? lower.dim(0) : 1);

    IntervalLoss out;
    out.grad_lower = Tensor(lower.shape());
    out.grad_upper = Tensor(upper.shape());
    double total = 0.0;
    for (std::size_t j = 0; j < lower.size(); ++j) {
        if (lower[j] > upper[j]) throw ConsistencyError("interval_loss: lower > upper");
        const double above = std::max(y[j] - upper[j], 0.0);
        const double below = std::max(lower[j] - y[j], 0.0);
        total += above * above + below * below + beta * (upper[j] - lower[j]);
        out.grad_upper[j] = (-2.0 * above + beta) / batch;
        out.grad_lower[j] = (2.0 * below - beta) / batch;
    }
    out.value = total / batch;
    return out;
}

std::vector<Tensor> IntervalGradients::trainable_flat() const {
    std::vector<Tensor> out;
    for (const auto& b : layers) {
        if (b.weight_lower.empty()) continue;
        out.insert(out.end(), {b.weight_lower, b.weight_upper, b.bias_lower, b.bias_upper});
    }
    return out;
}

IntervalGradients interval_backward(const IntervalNetwork& inn, const IntervalCache& cache, const Tensor& grad_lower,
                                    const Tensor& grad_upper) {
    const auto& net = inn.base();
    if (cache.inn_id != inn.id() || cache.generation != inn.generation() ||
        cache.lower.size() != net.layer_count() - cache.start_layer)
        throw ConsistencyError("interval cache is stale or belongs to a different interval network");
    const std::size_t batch = cache.batch;
    const auto out = net.output_shape();
    if (grad_lower.size() != batch * out.size() || grad_upper.size() != batch * out.size())
        throw DimensionError("interval_backward: gradient shape does not match network output");

    const auto ord = ordinals(net);
    const auto& lin = net.linear_layers();
    IntervalGradients grads;
    grads.layers.resize(lin.size());
    for (std::size_t q = 0; q < lin.size(); ++q) {
        if (!inn.trainable(q)) continue;
        const auto& layer = net.layer(lin[q]);
        grads.layers[q] = IntervalBounds{Tensor(layer.weight.shape()), Tensor(layer.weight.shape()),
                                         Tensor(layer.bias.shape()), Tensor(layer.bias.shape())};
    }
    const std::size_t first_trainable = inn.first_trainable_layer();
    if (first_trainable >= net.layer_count()) return grads;

    // The first linear layer reached from start_layer sees a point input
    // only when no linear layer precedes start_layer.
    std::size_t point_layer = net.layer_count();
    if (std::none_of(lin.begin(), lin.end(), [&](std::size_t l) { return l < cache.start_layer; }))
        point_layer = lin.front();

    Tensor g_lo = grad_lower.reshaped({batch, out.channels, out.length});
    Tensor g_up = grad_upper.reshaped({batch, out.channels, out.length});

    for (std::size_t i = net.layer_count(); i-- > std::max(cache.start_layer, first_trainable);) {
        const auto& layer = net.layer(i);
        const Tensor& x_lo = cache.lower[i - cache.start_layer];
        const Tensor& x_up = cache.upper[i - cache.start_layer];
        if (layer.spec.is_linear()) {
            const std::size_t q = ord[i];
            const auto& b = inn.bounds(q);
            const auto g = detail::geometry(layer.spec, net.activation_shape(i));
            const bool need_input_grad = i > first_trainable;
            if (i == point_layer) {
                if (inn.trainable(q)) {
                    Tensor x_pos = x_lo, x_neg = x_lo;
                    for (auto& v : x_pos.values()) v = std::max(v, 0.0);
                    for (auto& v : x_neg.values()) v = std::min(v, 0.0);
                    auto& d = grads.layers[q];
                    const double* sel = b.weight_upper.data();  // selection irrelevant: both sources equal
                    detail::linear_grad_weight(g, batch, g_up.data(), sel, x_pos.data(), x_pos.data(),
                                               d.weight_upper.data());
                    detail::linear_grad_weight(g, batch, g_up.data(), sel, x_neg.data(), x_neg.data(),
                                               d.weight_lower.data());
                    detail::linear_grad_weight(g, batch, g_lo.data(), sel, x_pos.data(), x_pos.data(),
                                               d.weight_lower.data());
                    detail::linear_grad_weight(g, batch, g_lo.data(), sel, x_neg.data(), x_neg.data(),
                                               d.weight_upper.data());
                    detail::linear_grad_bias(g, batch, g_up.data(), d.bias_upper.data());
                    detail::linear_grad_bias(g, batch, g_lo.data(), d.bias_lower.data());
                }
                // Point inputs carry no gradient we need.
                break;
            }
            if (inn.trainable(q)) {
                auto& d = grads.layers[q];
                // Subgradient at w == 0 follows the max(w, 0) branch.
                detail::linear_grad_weight(g, batch, g_up.data(), b.weight_upper.data(), x_up.data(), x_lo.data(),
                                           d.weight_upper.data());
                detail::linear_grad_weight(g, batch, g_lo.data(), b.weight_lower.data(), x_lo.data(), x_up.data(),
                                           d.weight_lower.data());
                detail::linear_grad_bias(g, batch, g_up.data(), d.bias_upper.data());
                detail::linear_grad_bias(g, batch, g_lo.data(), d.bias_lower.data());
            }
            if (!need_input_grad) break;
            Tensor dx_lo(x_lo.shape()), dx_up(x_up.shape());
            detail::linear_grad_input(g, batch, b.weight_upper.data(), g_up.data(), dx_up.data(), dx_lo.data());
            detail::linear_grad_input(g, batch, b.weight_lower.data(), g_lo.data(), dx_lo.data(), dx_up.data());
            g_lo = std::move(dx_lo);
            g_up = std::move(dx_up);
        } else if (layer.spec.kind == LayerKind::Relu) {
            for (std::size_t j = 0; j < g_lo.size(); ++j) {
                if (!(x_lo[j] > 0.0)) g_lo[j] = 0.0;
                if (!(x_up[j] > 0.0)) g_up[j] = 0.0;
            }
        }
    }
    return grads;
}

IntervalGradients interval_backward(const IntervalNetwork& inn, const IntervalCache& cache, const Tensor& y,
                                    double beta) {
    if (cache.out_lower.empty()) throw ConsistencyError("interval cache holds no output bounds");
    const auto loss = interval_loss_with_grad(cache.out_lower, cache.out_upper, y, beta);
    return interval_backward(inn, cache, loss.grad_lower, loss.grad_upper);
}

Tensor uncertainty(const IntervalNetwork& inn, const Tensor& x, PassCounter* counter) {
    auto r = interval_forward(inn, x, counter);
    Tensor width(r.lower.shape());
    for (std::size_t j = 0; j < width.size(); ++j) width[j] = r.upper[j] - r.lower[j];
    return width;
}

double beta_from_mae(const Network& base, const Tensor& x, const Tensor& y) {
    const Tensor pred = predict(base, x);
    if (pred.size() != y.size()) throw DimensionError("beta_from_mae: target size does not match predictions");
    double s = 0.0;
    for (std::size_t j = 0; j < pred.size(); ++j) s += std::abs(pred[j] - y[j]);
    return s / static_cast<double>(pred.size());
}

} // namespace inn
