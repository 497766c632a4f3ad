#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "inn/network.hpp"

namespace inn {

struct TrainConfig {
    std::size_t epochs = 100;
    double lr = 1e-3;
    std::size_t batch = 256;
    std::uint64_t seed = 0;
};

struct EpochLog {
    std::size_t epoch = 0;
    double loss = 0.0;  // mean minibatch loss over the epoch
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng);

// Splits `order` into consecutive minibatches; the last one may be short.
std::vector<std::vector<std::size_t>> minibatches(const std::vector<std::size_t>& order, std::size_t batch);

/// Minimizes MSE with Adam. Dropout runs in train mode. Deterministic given
/// cfg.seed. Throws DivergenceError on a non-finite loss.
std::vector<EpochLog> train_mse(Network& net, const Tensor& x, const Tensor& y, const TrainConfig& cfg,
                                const EpochCallback& on_epoch = {});

} // namespace inn
