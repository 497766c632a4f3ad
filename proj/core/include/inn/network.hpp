#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "inn/rng.hpp"
#include "inn/tensor.hpp"

namespace inn {

enum class LayerKind : std::uint8_t { Dense = 0, Conv1d = 1, Relu = 2, Dropout = 3 };

const char* layer_kind_name(LayerKind kind);

/// One entry of a network architecture. Dense layers flatten whatever
/// per-sample activation they receive; conv1d layers use stride 1 and zero
/// "same" padding, so the signal length never changes.
struct LayerSpec {
    LayerKind kind = LayerKind::Relu;
    std::size_t in = 0;      // dense: input features; conv1d: input channels
    std::size_t out = 0;     // dense: output features; conv1d: output channels
    std::size_t kernel = 1;  // conv1d only
    double p = 0.0;          // dropout only

    static LayerSpec dense(std::size_t in, std::size_t out) { return {LayerKind::Dense, in, out, 1, 0.0}; }
    static LayerSpec conv1d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel) {
        return {LayerKind::Conv1d, in_ch, out_ch, kernel, 0.0};
    }
    static LayerSpec relu() { return {LayerKind::Relu, 0, 0, 1, 0.0}; }
    static LayerSpec dropout(double p) { return {LayerKind::Dropout, 0, 0, 1, p}; }

    bool is_linear() const noexcept { return kind == LayerKind::Dense || kind == LayerKind::Conv1d; }

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

std::string describe(const LayerSpec& spec);

// Per-sample activation shape: channels x length. Dense outputs have length 1.
struct ActShape {
    std::size_t channels = 1;
    std::size_t length = 1;
    std::size_t size() const noexcept { return channels * length; }
    friend bool operator==(const ActShape&, const ActShape&) = default;
};

struct Layer {
    LayerSpec spec;
    Tensor weight;  // (out, in, kernel); empty for relu/dropout
    Tensor bias;    // (out)
};

/// Feed-forward network of dense/conv1d/relu/dropout layers with point
/// parameters. Batches enter as (B, ...) with B*channels*length elements and
/// leave flattened as (B, out_channels * out_length).
class Network {
public:
    Network() = default;
    Network(ActShape input, std::vector<LayerSpec> specs);
    Network(const Network& other);
    Network& operator=(const Network& other);
    Network(Network&&) noexcept = default;
    Network& operator=(Network&&) noexcept = default;

    // He-normal weights, zero biases.
    void init_params(Rng& rng);

    ActShape input_shape() const noexcept { return input_; }
    ActShape output_shape() const noexcept { return shapes_.back(); }
    // Shape entering layer i; index layer_count() gives the output shape.
    ActShape activation_shape(std::size_t i) const { return shapes_.at(i); }

    std::size_t layer_count() const noexcept { return layers_.size(); }
    const Layer& layer(std::size_t i) const { return layers_.at(i); }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    std::vector<LayerSpec> specs() const;

    // Indices of dense/conv1d layers, in order.
    const std::vector<std::size_t>& linear_layers() const noexcept { return linear_; }
    bool has_dropout() const noexcept;

    // Weight/bias tensors of every linear layer, in layer order (W0, b0, W1, ...).
    // The mutable overload bumps the generation, invalidating forward caches.
    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;
    std::size_t parameter_count() const;

    std::uint64_t id() const noexcept { return id_; }
    std::uint64_t generation() const noexcept { return generation_; }

private:
    void validate_and_allocate();

    ActShape input_{};
    std::vector<Layer> layers_;
    std::vector<ActShape> shapes_;
    std::vector<std::size_t> linear_;
    std::uint64_t id_ = 0;
    std::uint64_t generation_ = 0;
};

enum class Mode { Eval, Train };

// Tallies work done by uncertainty queries. `passes` counts full traversals
// of the network (one per bound for interval propagation).
struct PassCounter {
    std::uint64_t passes = 0;
    std::uint64_t macs = 0;
};

struct ForwardCache {
    std::uint64_t net_id = 0;
    std::uint64_t generation = 0;
    std::size_t batch = 0;
    Shape input_shape;           // shape of the tensor handed to forward()
    std::vector<Tensor> inputs;  // activation entering each layer, (B, C, L)
    std::vector<Tensor> masks;   // dropout scale masks (empty when not train-mode dropout)
};

struct ForwardResult {
    Tensor output;  // (B, out features)
    ForwardCache cache;
};

/// `rng` is required iff mode == Train and the net contains dropout.
ForwardResult forward(const Network& net, const Tensor& x, Mode mode, Rng* rng = nullptr,
                      PassCounter* counter = nullptr);

// Eval-mode activation entering layer `end_layer`, shaped (B, C, L).
Tensor forward_prefix(const Network& net, const Tensor& x, std::size_t end_layer);

// Eval-mode forward without keeping a cache.
Tensor predict(const Network& net, const Tensor& x, PassCounter* counter = nullptr);

struct Gradients {
    std::vector<Tensor> params;  // aligned with Network::parameters()
    Tensor input;                // same shape as the forward input
};

Gradients backward(const Network& net, const ForwardCache& cache, const Tensor& grad_out);

double mse(const Tensor& pred, const Tensor& target);
// d mse / d pred.
Tensor mse_grad(const Tensor& pred, const Tensor& target);

// Batch size implied by x for a network input of the given shape.
std::size_t batch_of(const Tensor& x, ActShape per_sample);

} // namespace inn
