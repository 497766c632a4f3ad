#include <cmath>
#include <sstream>

#include "inn/adam.hpp"
#include "inn/error.hpp"
#include "inn/interval.hpp"
#include "inn/training.hpp"

namespace inn {

namespace {

// Above this many doubles the frozen-prefix activations are recomputed per
// batch instead of being held for the whole training set.
constexpr std::size_t kPrefixCacheLimit = std::size_t{1} << 25;

double mean_width(const Tensor& lower, const Tensor& upper) {
    double s = 0.0;
    for (std::size_t j = 0; j < lower.size(); ++j) s += upper[j] - lower[j];
    return s / static_cast<double>(lower.size());
}

} // namespace

InnTrainResult train_inn(const Network& base, const Tensor& x, const Tensor& y, const InnTrainConfig& cfg,
                         const InnStepObserver& on_step, const InnEpochCallback& on_epoch) {
    if (!(cfg.beta > 0.0)) throw ConfigError("inn beta must be positive");
    if (!(cfg.lr > 0.0)) throw ConfigError("inn learning rate must be positive");
    if (cfg.batch == 0) throw ConfigError("inn batch size must be positive");

    InnTrainResult result;
    result.inn = IntervalNetwork(base, LayerMask::parse(cfg.mask, base.linear_layers().size()));
    auto& inn = result.inn;

    const std::size_t m = batch_of(x, base.input_shape());
    const std::size_t out_size = base.output_shape().size();
    if (y.size() != m * out_size) throw DimensionError("train_inn: targets do not match network outputs");
    const Tensor y_flat = y.reshaped({m, out_size});

    if (!inn.mask().any() || cfg.epochs == 0) return result;

    // Layers before the first trainable one stay point-valued, so their output
    // is a fixed function of x.
    const std::size_t start = inn.first_trainable_layer();
    const auto start_shape = base.activation_shape(start);
    Tensor prefix_all;
    if (start > 0 && m * start_shape.size() <= kPrefixCacheLimit) prefix_all = forward_prefix(base, x, start);

    AdamState adam(inn.trainable_tensors(), AdamConfig{cfg.lr});
    const Rng root(cfg.seed);
    std::uint64_t step = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng = root.split(epoch);
        const auto batches = minibatches(shuffled_indices(m, shuffle_rng), cfg.batch);
        double loss_sum = 0.0;
        double width_sum = 0.0;
        for (const auto& rows : batches) {
            Tensor act;
            if (start == 0)
                act = x.gather_rows(rows);
            else if (!prefix_all.empty())
                act = prefix_all.gather_rows(rows);
            else
                act = forward_prefix(base, x.gather_rows(rows), start);
            const Tensor yb = y_flat.gather_rows(rows);

            auto fwd = interval_forward_from(inn, start, act);
            const double width = mean_width(fwd.lower, fwd.upper);
            auto loss = interval_loss_with_grad(fwd.lower, fwd.upper, yb, cfg.beta);
            if (!std::isfinite(loss.value) || !std::isfinite(width))
                throw DivergenceError("non-finite interval loss at epoch " + std::to_string(epoch) + ", step " +
                                      std::to_string(step) + " (seed " + std::to_string(cfg.seed) + ")");
            if (width > cfg.width_ceiling) {
                std::ostringstream msg;
                msg << "mean output interval width " << width << " exceeds ceiling " << cfg.width_ceiling
                    << " at epoch " << epoch << ", step " << step
                    << "; intervals are growing exponentially through depth. Train only the last layers "
                       "(inn.mask = last:K) or lower inn.lr";
                throw DivergenceError(msg.str());
            }
            loss_sum += loss.value;
            width_sum += width;

            const auto grads = interval_backward(inn, fwd.cache, loss.grad_lower, loss.grad_upper);
            adam.step(inn.trainable_tensors(), grads.trainable_flat());
            project_containment(inn);
            if (on_step) on_step(InnStep{epoch, step, &inn, &rows, loss.value});
            ++step;
        }
        const double nb = static_cast<double>(batches.size());
        InnEpochLog entry{epoch, loss_sum / nb, width_sum / nb};
        result.log.push_back(entry);
        if (on_epoch) on_epoch(entry);
    }
    result.steps = step;
    return result;
}

} // namespace inn
