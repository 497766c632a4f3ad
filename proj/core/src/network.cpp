#include "inn/network.hpp"

#include <atomic>
#include <cmath>

#include "inn/error.hpp"
#include "kernels.hpp"

namespace inn {

namespace {

std::uint64_t next_network_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
}

} // namespace

const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv1d: return "conv1d";
    case LayerKind::Relu: return "relu";
    case LayerKind::Dropout: return "dropout";
    }
    return "?";
}

std::string describe(const LayerSpec& spec) {
    switch (spec.kind) {
    case LayerKind::Dense: return "dense(" + std::to_string(spec.in) + "," + std::to_string(spec.out) + ")";
    case LayerKind::Conv1d:
        return "conv1d(" + std::to_string(spec.in) + "," + std::to_string(spec.out) + ",k=" +
               std::to_string(spec.kernel) + ")";
    case LayerKind::Relu: return "relu";
    case LayerKind::Dropout: return "dropout(" + std::to_string(spec.p) + ")";
    }
    return "?";
}

Network::Network(ActShape input, std::vector<LayerSpec> specs) : input_(input), id_(next_network_id()) {
    layers_.reserve(specs.size());
    for (auto& s : specs) layers_.push_back(Layer{s, {}, {}});
    validate_and_allocate();
}

Network::Network(const Network& other)
    : input_(other.input_), layers_(other.layers_), shapes_(other.shapes_), linear_(other.linear_),
      id_(next_network_id()), generation_(0) {}

Network& Network::operator=(const Network& other) {
    if (this != &other) {
        input_ = other.input_;
        layers_ = other.layers_;
        shapes_ = other.shapes_;
        linear_ = other.linear_;
        id_ = next_network_id();
        generation_ = 0;
    }
    return *this;
}

void Network::validate_and_allocate() {
    if (layers_.empty()) throw ConfigError("network needs at least one layer");
    if (input_.channels == 0 || input_.length == 0) throw DimensionError("network input shape must be positive");
    if (!layers_.back().spec.is_linear())
        throw ConfigError("final layer must be dense or conv1d, got " + describe(layers_.back().spec));

    shapes_.clear();
    linear_.clear();
    ActShape cur = input_;
    shapes_.push_back(cur);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        auto& layer = layers_[i];
        const auto& s = layer.spec;
        switch (s.kind) {
        case LayerKind::Dense:
            if (s.in != cur.size())
                throw DimensionError("layer " + std::to_string(i) + " " + describe(s) + " expects " +
                                     std::to_string(s.in) + " inputs, receives " + std::to_string(cur.size()));
            if (s.out == 0) throw DimensionError("dense layer needs positive output size");
            cur = ActShape{s.out, 1};
            break;
        case LayerKind::Conv1d:
            if (s.in != cur.channels)
                throw DimensionError("layer " + std::to_string(i) + " " + describe(s) + " expects " +
                                     std::to_string(s.in) + " channels, receives " + std::to_string(cur.channels));
            if (s.out == 0 || s.kernel == 0) throw DimensionError("conv1d needs positive channels and kernel");
            cur = ActShape{s.out, cur.length};
            break;
        case LayerKind::Relu: break;
        case LayerKind::Dropout:
            if (!(s.p >= 0.0 && s.p < 1.0)) throw ConfigError("dropout probability must lie in [0, 1)");
            break;
        }
        if (s.is_linear()) {
            const auto g = detail::geometry(s, shapes_.back());
            if (layer.weight.shape() != Shape{g.out, g.in, g.kernel}) layer.weight = Tensor({g.out, g.in, g.kernel});
            if (layer.bias.shape() != Shape{g.out}) layer.bias = Tensor({g.out});
            linear_.push_back(i);
        }
        shapes_.push_back(cur);
    }
}

void Network::init_params(Rng& rng) {
    for (auto idx : linear_) {
        auto& layer = layers_[idx];
        const auto& shape = layer.weight.shape();
        const double fan_in = static_cast<double>(shape[1] * shape[2]);
        const double stddev = std::sqrt(2.0 / fan_in);
        for (auto& w : layer.weight.values()) w = rng.normal(0.0, stddev);
        layer.bias.fill(0.0);
    }
    ++generation_;
}

std::vector<LayerSpec> Network::specs() const {
    std::vector<LayerSpec> out;
    out.reserve(layers_.size());
    for (const auto& l : layers_) out.push_back(l.spec);
    return out;
}

bool Network::has_dropout() const noexcept {
    for (const auto& l : layers_)
        if (l.spec.kind == LayerKind::Dropout) return true;
    return false;
}

std::vector<Tensor*> Network::parameters() {
    ++generation_;
    std::vector<Tensor*> out;
    for (auto idx : linear_) {
        out.push_back(&layers_[idx].weight);
        out.push_back(&layers_[idx].bias);
    }
    return out;
}

std::vector<const Tensor*> Network::parameters() const {
    std::vector<const Tensor*> out;
    for (auto idx : linear_) {
        out.push_back(&layers_[idx].weight);
        out.push_back(&layers_[idx].bias);
    }
    return out;
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += p->size();
    return n;
}

std::size_t batch_of(const Tensor& x, ActShape per_sample) {
    if (x.rank() < 1 || x.size() == 0) throw DimensionError("input must have a batch axis");
    const std::size_t batch = x.dim(0);
    if (x.size() != batch * per_sample.size())
        throw DimensionError("input " + shape_string(x.shape()) + " does not match per-sample shape (" +
                             std::to_string(per_sample.channels) + ", " + std::to_string(per_sample.length) + ")");
    return batch;
}

ForwardResult forward(const Network& net, const Tensor& x, Mode mode, Rng* rng, PassCounter* counter) {
    const std::size_t batch = batch_of(x, net.input_shape());
    const bool dropout_active = mode == Mode::Train && net.has_dropout();
    if (dropout_active && rng == nullptr) throw ConfigError("train-mode forward with dropout needs an rng");

    ForwardResult result;
    auto& cache = result.cache;
    cache.net_id = net.id();
    cache.generation = net.generation();
    cache.batch = batch;
    cache.input_shape = x.shape();
    cache.inputs.reserve(net.layer_count());
    cache.masks.resize(net.layer_count());

    auto in_shape = net.input_shape();
    Tensor act = x.reshaped({batch, in_shape.channels, in_shape.length});
    std::uint64_t macs = 0;

    for (std::size_t i = 0; i < net.layer_count(); ++i) {
        const auto& layer = net.layer(i);
        const auto out_shape = net.activation_shape(i + 1);
        Tensor next;
        switch (layer.spec.kind) {
        case LayerKind::Dense:
        case LayerKind::Conv1d: {
            const auto g = detail::geometry(layer.spec, net.activation_shape(i));
            next = Tensor({batch, out_shape.channels, out_shape.length});
            detail::linear_accumulate(g, batch, layer.weight.data(), act.data(), act.data(), next.data());
            detail::add_bias(g, batch, layer.bias.data(), next.data());
            macs += g.macs_per_sample() * batch;
            break;
        }
        case LayerKind::Relu:
            next = act;
            for (auto& v : next.values()) v = v > 0.0 ? v : 0.0;
            break;
        case LayerKind::Dropout:
            next = act;
            if (dropout_active) {
                // Inverted dropout: keep with probability 1-p, scale kept units by 1/(1-p).
                const double p = layer.spec.p;
                const double scale = 1.0 / (1.0 - p);
                Tensor mask(act.shape());
                for (auto& m : mask.values()) m = rng->uniform() >= p ? scale : 0.0;
                for (std::size_t j = 0; j < next.size(); ++j) next[j] *= mask[j];
                cache.masks[i] = std::move(mask);
            }
            break;
        }
        cache.inputs.push_back(std::move(act));
        act = std::move(next);
    }
    if (counter) {
        counter->passes += 1;
        counter->macs += macs;
    }
    const auto out = net.output_shape();
    result.output = std::move(act).reshaped({batch, out.size()});
    return result;
}

Tensor forward_prefix(const Network& net, const Tensor& x, std::size_t end_layer) {
    if (end_layer > net.layer_count()) throw DimensionError("forward_prefix: layer index out of range");
    const std::size_t batch = batch_of(x, net.input_shape());
    const auto in_shape = net.input_shape();
    Tensor act = x.reshaped({batch, in_shape.channels, in_shape.length});
    for (std::size_t i = 0; i < end_layer; ++i) {
        const auto& layer = net.layer(i);
        if (layer.spec.is_linear()) {
            const auto out_shape = net.activation_shape(i + 1);
            const auto g = detail::geometry(layer.spec, net.activation_shape(i));
            Tensor next({batch, out_shape.channels, out_shape.length});
            detail::linear_accumulate(g, batch, layer.weight.data(), act.data(), act.data(), next.data());
            detail::add_bias(g, batch, layer.bias.data(), next.data());
            act = std::move(next);
        } else if (layer.spec.kind == LayerKind::Relu) {
            for (auto& v : act.values()) v = v > 0.0 ? v : 0.0;
        }
    }
    return act;
}

Tensor predict(const Network& net, const Tensor& x, PassCounter* counter) {
    return forward(net, x, Mode::Eval, nullptr, counter).output;
}

Gradients backward(const Network& net, const ForwardCache& cache, const Tensor& grad_out) {
    if (cache.net_id != net.id() || cache.generation != net.generation() || cache.inputs.size() != net.layer_count())
        throw ConsistencyError("forward cache is stale or belongs to a different network");
    const std::size_t batch = cache.batch;
    const auto out = net.output_shape();
    if (grad_out.size() != batch * out.size() || grad_out.dim(0) != batch)
        throw DimensionError("grad_out " + shape_string(grad_out.shape()) + " does not match network output");

    Gradients grads;
    const auto params = net.parameters();
    grads.params.reserve(params.size());
    for (const auto* p : params) grads.params.emplace_back(p->shape());

    Tensor g = grad_out.reshaped({batch, out.channels, out.length});
    std::size_t pidx = params.size();
    for (std::size_t li = net.layer_count(); li-- > 0;) {
        const auto& layer = net.layer(li);
        const Tensor& input = cache.inputs[li];
        switch (layer.spec.kind) {
        case LayerKind::Dense:
        case LayerKind::Conv1d: {
            const auto g_geom = detail::geometry(layer.spec, net.activation_shape(li));
            pidx -= 2;
            Tensor& dw = grads.params[pidx];
            Tensor& db = grads.params[pidx + 1];
            detail::linear_grad_weight(g_geom, batch, g.data(), layer.weight.data(), input.data(), input.data(),
                                       dw.data());
            detail::linear_grad_bias(g_geom, batch, g.data(), db.data());
            Tensor dx(input.shape());
            detail::linear_grad_input(g_geom, batch, layer.weight.data(), g.data(), dx.data(), dx.data());
            g = std::move(dx);
            break;
        }
        case LayerKind::Relu:
            // Subgradient at exactly 0 is 0.
            for (std::size_t j = 0; j < g.size(); ++j)
                if (!(input[j] > 0.0)) g[j] = 0.0;
            break;
        case LayerKind::Dropout:
            if (!cache.masks[li].empty())
                for (std::size_t j = 0; j < g.size(); ++j) g[j] *= cache.masks[li][j];
            break;
        }
    }
    grads.input = std::move(g);
    grads.input.reshape(cache.input_shape);
    return grads;
}

double mse(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "mse");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        s += d * d;
    }
    return s / static_cast<double>(pred.size());
}

Tensor mse_grad(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "mse_grad");
    Tensor g(pred.shape());
    const double scale = 2.0 / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) g[i] = scale * (pred[i] - target[i]);
    return g;
}

} // namespace inn
