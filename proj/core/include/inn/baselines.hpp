#pragma once

#include <cstdint>
#include <vector>

#include "inn/network.hpp"
#include "inn/training.hpp"

namespace inn {

// ---- MC dropout ------------------------------------------------------------

struct McDropConfig {
    std::size_t samples = 64;  // T, at least 2
    std::uint64_t seed = 0;
};

struct McDropResult {
    Tensor mean;
    Tensor std;  // sample standard deviation (T - 1 denominator)
};

/// T train-mode forward passes; pass t draws its dropout masks from
/// Rng(derive_seed(seed, t)), so results do not depend on evaluation order.
McDropResult mcdrop_predict(const Network& net, const Tensor& x, const McDropConfig& cfg,
                            PassCounter* counter = nullptr);

// ---- ProbOut ---------------------------------------------------------------

// Floor added to softplus so the predicted variance is strictly positive.
inline constexpr double kVarianceFloor = 1e-6;

double softplus(double s);
double softplus_inverse(double v);
double sigmoid(double s);

/// A network whose flattened output is [raw mean | raw scale], each half the
/// size of the target; variance = softplus(scale) + kVarianceFloor.
class ProbOutNetwork {
public:
    ProbOutNetwork() = default;
    explicit ProbOutNetwork(Network net);

    // Copies `base` and doubles the output channels of its final layer. The
    // mean half copies the base final layer; the scale half has zero weights
    // and a bias giving variance `initial_variance` everywhere.
    static ProbOutNetwork from_base(const Network& base, double initial_variance);

    const Network& network() const noexcept { return net_; }
    Network& network() noexcept { return net_; }
    std::size_t target_size() const noexcept { return net_.output_shape().size() / 2; }

private:
    Network net_;
};

struct ProbOutPrediction {
    Tensor mean;
    Tensor variance;
};

ProbOutPrediction split_probout(const Tensor& raw);
ProbOutPrediction probout_predict(const ProbOutNetwork& net, const Tensor& x, PassCounter* counter = nullptr);

/// Mean over the batch of sum_c 0.5 log(var) + (y - mean)^2 / (2 var).
double probout_loss(const Tensor& mean, const Tensor& variance, const Tensor& y);

struct ProbOutLossGrad {
    double value = 0.0;
    Tensor grad_mean;
    Tensor grad_variance;
};
ProbOutLossGrad probout_loss_with_grad(const Tensor& mean, const Tensor& variance, const Tensor& y);

struct ProbOutTrainResult {
    ProbOutNetwork net;
    std::vector<EpochLog> log;
};

/// Starts from `base` (variance initialized to the base training MSE) and
/// minimizes the Gaussian negative log-likelihood with Adam.
ProbOutTrainResult train_probout(const Network& base, const Tensor& x, const Tensor& y, const TrainConfig& cfg,
                                 const EpochCallback& on_epoch = {});

} // namespace inn
