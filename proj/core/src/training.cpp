#include "inn/training.hpp"

#include <cmath>
#include <numeric>

#include "inn/adam.hpp"
#include "inn/error.hpp"

namespace inn {

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, i - 1));
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

std::vector<std::vector<std::size_t>> minibatches(const std::vector<std::size_t>& order, std::size_t batch) {
    if (batch == 0) throw ConfigError("batch size must be positive");
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < order.size(); start += batch) {
        const std::size_t end = std::min(order.size(), start + batch);
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

std::vector<EpochLog> train_mse(Network& net, const Tensor& x, const Tensor& y, const TrainConfig& cfg,
                                const EpochCallback& on_epoch) {
    const std::size_t m = batch_of(x, net.input_shape());
    if (y.dim(0) != m || y.size() != m * net.output_shape().size())
        throw DimensionError("train_mse: targets " + shape_string(y.shape()) + " do not match outputs");
    if (!(cfg.lr > 0.0)) throw ConfigError("learning rate must be positive");

    const auto y_flat = y.reshaped({m, net.output_shape().size()});
    AdamState adam(net.parameters(), AdamConfig{cfg.lr});
    std::vector<EpochLog> log;
    std::uint64_t step = 0;
    const Rng root(cfg.seed);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng = root.split(epoch);
        const auto batches = minibatches(shuffled_indices(m, shuffle_rng), cfg.batch);
        double loss_sum = 0.0;
        for (const auto& rows : batches) {
            const Tensor xb = x.gather_rows(rows);
            const Tensor yb = y_flat.gather_rows(rows);
            Rng drop_rng = root.split(0x100000000ULL + step);
            auto fwd = forward(net, xb, Mode::Train, &drop_rng);
            const double loss = mse(fwd.output, yb);
            if (!std::isfinite(loss))
                throw DivergenceError("non-finite MSE at epoch " + std::to_string(epoch) + ", step " +
                                      std::to_string(step) + " (seed " + std::to_string(cfg.seed) + ")");
            loss_sum += loss;
            auto grads = backward(net, fwd.cache, mse_grad(fwd.output, yb));
            adam.step(net.parameters(), grads.params);
            ++step;
        }
        EpochLog entry{epoch, loss_sum / static_cast<double>(batches.size())};
        log.push_back(entry);
        if (on_epoch) on_epoch(entry);
    }
    return log;
}

} // namespace inn
