#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "inn/network.hpp"

namespace inn {

/// Lower/upper bounds for one linear layer's weight and bias.
struct IntervalBounds {
    Tensor weight_lower;
    Tensor weight_upper;
    Tensor bias_lower;
    Tensor bias_upper;
};

/// Which linear layers (by ordinal among dense/conv1d layers) carry trainable
/// intervals. Parsed from "all", "none", "last:K" or a 1-based list "8,9,10".
class LayerMask {
public:
    LayerMask() = default;
    explicit LayerMask(std::vector<bool> bits) : bits_(std::move(bits)) {}

    static LayerMask all(std::size_t linear_count) { return LayerMask(std::vector<bool>(linear_count, true)); }
    static LayerMask parse(const std::string& text, std::size_t linear_count);

    std::size_t size() const noexcept { return bits_.size(); }
    bool operator[](std::size_t i) const { return bits_.at(i); }
    bool any() const noexcept;
    const std::vector<bool>& bits() const noexcept { return bits_; }
    std::string to_string() const;

    friend bool operator==(const LayerMask&, const LayerMask&) = default;

private:
    std::vector<bool> bits_;
};

/// Interval-valued parameters wrapped around a frozen point network. Shares
/// the base architecture; starts as point intervals at the base parameters.
/// Every linear layer after the first must see a ReLU output (dropout may sit
/// in between), which keeps hidden interval activations nonnegative.
class IntervalNetwork {
public:
    IntervalNetwork() = default;
    IntervalNetwork(Network base, LayerMask mask);
    explicit IntervalNetwork(Network base);
    IntervalNetwork(const IntervalNetwork& other);
    IntervalNetwork& operator=(const IntervalNetwork& other);
    IntervalNetwork(IntervalNetwork&&) noexcept = default;
    IntervalNetwork& operator=(IntervalNetwork&&) noexcept = default;

    const Network& base() const noexcept { return base_; }
    const LayerMask& mask() const noexcept { return mask_; }
    std::size_t linear_count() const noexcept { return bounds_.size(); }
    bool trainable(std::size_t ordinal) const { return mask_[ordinal]; }
    // Layer index of the first trainable linear layer, or layer_count() if none.
    std::size_t first_trainable_layer() const;

    const IntervalBounds& bounds(std::size_t ordinal) const { return bounds_.at(ordinal); }
    // Replaces one layer's bounds (shape-checked). Bumps the generation.
    void set_bounds(std::size_t ordinal, IntervalBounds bounds);

    // Bound tensors of trainable layers: (w_lo, w_up, b_lo, b_up) per layer.
    // Bumps the generation.
    std::vector<Tensor*> trainable_tensors();

    // lower <= point <= upper on every entry, exactly.
    bool contains_base() const;
    // Mean of (upper - lower) over all parameter entries.
    double mean_parameter_width() const;

    std::uint64_t id() const noexcept { return id_; }
    std::uint64_t generation() const noexcept { return generation_; }

private:
    friend IntervalNetwork& project_containment(IntervalNetwork& inn);

    Network base_;
    LayerMask mask_;
    std::vector<IntervalBounds> bounds_;
    std::uint64_t id_ = 0;
    std::uint64_t generation_ = 0;
};

struct IntervalCache {
    std::uint64_t inn_id = 0;
    std::uint64_t generation = 0;
    std::size_t batch = 0;
    std::size_t start_layer = 0;
    Shape input_shape;
    // Interval entering each layer from start_layer on, (B, C, L).
    std::vector<Tensor> lower;
    std::vector<Tensor> upper;
    // Output bounds, (B, out features).
    Tensor out_lower;
    Tensor out_upper;
};

struct IntervalForwardResult {
    Tensor lower;  // (B, out features)
    Tensor upper;
    IntervalCache cache;
};

/// Propagates point inputs through the interval network. The first linear
/// layer uses the point-input formula (any sign); later linear layers use the
/// nonnegative-input formula. Throws ConsistencyError if lower > upper.
IntervalForwardResult interval_forward(const IntervalNetwork& inn, const Tensor& x, PassCounter* counter = nullptr);

/// Same as interval_forward but starts at `start_layer` with a point
/// activation (B, C, L) matching base().activation_shape(start_layer). All
/// linear layers before start_layer must be masked off (hence point-valued).
IntervalForwardResult interval_forward_from(const IntervalNetwork& inn, std::size_t start_layer, const Tensor& act,
                                            PassCounter* counter = nullptr);

struct IntervalLoss {
    double value = 0.0;
    Tensor grad_lower;
    Tensor grad_upper;
};

/// Mean over the batch axis of
///   sum_c max(y - up, 0)^2 + max(lo - y, 0)^2 + beta * (up - lo).
double interval_loss(const Tensor& lower, const Tensor& upper, const Tensor& y, double beta);
IntervalLoss interval_loss_with_grad(const Tensor& lower, const Tensor& upper, const Tensor& y, double beta);

/// Gradients per linear layer ordinal. Frozen layers hold empty tensors.
struct IntervalGradients {
    std::vector<IntervalBounds> layers;
    // Aligned with IntervalNetwork::trainable_tensors().
    std::vector<Tensor> trainable_flat() const;
};

IntervalGradients interval_backward(const IntervalNetwork& inn, const IntervalCache& cache, const Tensor& grad_lower,
                                    const Tensor& grad_upper);
IntervalGradients interval_backward(const IntervalNetwork& inn, const IntervalCache& cache, const Tensor& y,
                                    double beta);

/// upper <- max(upper, point), lower <- min(lower, point) on every entry.
IntervalNetwork& project_containment(IntervalNetwork& inn);

/// Pixel-wise uncertainty: output interval width.
Tensor uncertainty(const IntervalNetwork& inn, const Tensor& x, PassCounter* counter = nullptr);

/// Tightness heuristic: mean absolute error of the base network on (x, y).
double beta_from_mae(const Network& base, const Tensor& x, const Tensor& y);

struct InnTrainConfig {
    std::size_t epochs = 100;
    double lr = 1e-5;
    double beta = 2e-3;
    std::size_t batch = 256;
    std::string mask = "all";
    std::uint64_t seed = 0;
    double width_ceiling = 1e3;  // abort when the mean output width exceeds this
};

struct InnStep {
    std::size_t epoch = 0;
    std::uint64_t step = 0;
    const IntervalNetwork* inn = nullptr;
    const std::vector<std::size_t>* rows = nullptr;  // training rows of this step
    double loss = 0.0;
};

struct InnEpochLog {
    std::size_t epoch = 0;
    double loss = 0.0;
    double mean_width = 0.0;  // mean output width over the epoch's batches
};

struct InnTrainResult {
    IntervalNetwork inn;
    std::vector<InnEpochLog> log;
    std::uint64_t steps = 0;
};

using InnStepObserver = std::function<void(const InnStep&)>;
using InnEpochCallback = std::function<void(const InnEpochLog&)>;

/// Trains interval bounds around a frozen base with Adam, projecting onto the
/// containment set after every step. Deterministic given cfg.seed.
InnTrainResult train_inn(const Network& base, const Tensor& x, const Tensor& y, const InnTrainConfig& cfg,
                         const InnStepObserver& on_step = {}, const InnEpochCallback& on_epoch = {});

} // namespace inn
