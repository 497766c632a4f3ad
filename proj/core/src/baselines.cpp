#include "inn/baselines.hpp"

#include <cmath>

#include "inn/adam.hpp"
#include "inn/error.hpp"

namespace inn {

McDropResult mcdrop_predict(const Network& net, const Tensor& x, const McDropConfig& cfg, PassCounter* counter) {
    if (cfg.samples < 2) throw ConfigError("MC dropout needs at least 2 samples");
    if (!net.has_dropout()) throw ConfigError("MC dropout needs a network with at least one dropout layer");

    // Welford accumulation in pass order.
    Tensor mean, m2;
    for (std::size_t t = 0; t < cfg.samples; ++t) {
        Rng rng(derive_seed(cfg.seed, t));
        const Tensor y = forward(net, x, Mode::Train, &rng, counter).output;
        if (t == 0) {
            mean = Tensor::zeros_like(y);
            m2 = Tensor::zeros_like(y);
        }
        const double n = static_cast<double>(t + 1);
        for (std::size_t j = 0; j < y.size(); ++j) {
            const double delta = y[j] - mean[j];
            mean[j] += delta / n;
            m2[j] += delta * (y[j] - mean[j]);
        }
    }
    McDropResult out{mean, Tensor::zeros_like(mean)};
    const double denom = static_cast<double>(cfg.samples - 1);
    for (std::size_t j = 0; j < m2.size(); ++j) out.std[j] = std::sqrt(std::max(m2[j], 0.0) / denom);
    return out;
}

double softplus(double s) { return std::log1p(std::exp(-std::abs(s))) + std::max(s, 0.0); }

double softplus_inverse(double v) {
    if (!(v > 0.0)) throw ConfigError("softplus_inverse needs a positive argument");
    // log(exp(v) - 1) = v + log(1 - exp(-v))
    return v + std::log(-std::expm1(-v));
}

double sigmoid(double s) {
    if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
}

ProbOutNetwork::ProbOutNetwork(Network net) : net_(std::move(net)) {
    if (net_.output_shape().size() % 2 != 0) throw ConfigError("ProbOut network needs an even output size");
}

ProbOutNetwork ProbOutNetwork::from_base(const Network& base, double initial_variance) {
    if (!(initial_variance > kVarianceFloor)) initial_variance = 2.0 * kVarianceFloor;
    auto specs = base.specs();
    auto& last = specs.back();
    last.out *= 2;
    Network net(base.input_shape(), specs);

    auto dst = net.parameters();
    const auto src = base.parameters();
    for (std::size_t i = 0; i + 2 < src.size(); ++i) *dst[i] = *src[i];

    // Final layer: the mean half is the base layer; the scale half is constant.
    const Tensor& w = *src[src.size() - 2];
    const Tensor& b = *src[src.size() - 1];
    Tensor& w2 = *dst[dst.size() - 2];
    Tensor& b2 = *dst[dst.size() - 1];
    w2.fill(0.0);
    std::copy(w.values().begin(), w.values().end(), w2.values().begin());
    const std::size_t out = b.size();
    const double scale_bias = softplus_inverse(initial_variance - kVarianceFloor);
    for (std::size_t o = 0; o < out; ++o) {
        b2[o] = b[o];
        b2[out + o] = scale_bias;
    }
    return ProbOutNetwork(std::move(net));
}

ProbOutPrediction split_probout(const Tensor& raw) {
    const std::size_t batch = raw.dim(0);
    const std::size_t half = raw.size() / batch / 2;
    ProbOutPrediction p{Tensor({batch, half}), Tensor({batch, half})};
    for (std::size_t b = 0; b < batch; ++b) {
        const auto row = raw.row(b);
        for (std::size_t c = 0; c < half; ++c) {
            p.mean[b * half + c] = row[c];
            p.variance[b * half + c] = softplus(row[half + c]) + kVarianceFloor;
        }
    }
    return p;
}

ProbOutPrediction probout_predict(const ProbOutNetwork& net, const Tensor& x, PassCounter* counter) {
    return split_probout(predict(net.network(), x, counter));
}

ProbOutLossGrad probout_loss_with_grad(const Tensor& mean, const Tensor& variance, const Tensor& y) {
    require_same_shape(mean, variance, "probout_loss");
    if (y.size() != mean.size()) throw DimensionError("probout_loss: target size does not match predictions");
    const double batch = static_cast<double>(mean.rank() > 1 ? mean.dim(0) : 1);
    ProbOutLossGrad out{0.0, Tensor(mean.shape()), Tensor(mean.shape())};
    double total = 0.0;
    for (std::size_t j = 0; j < mean.size(); ++j) {
        const double v = variance[j];
        if (!(v > 0.0)) throw ConsistencyError("probout_loss: variance must be positive");
        const double r = y[j] - mean[j];
        total += 0.5 * std::log(v) + r * r / (2.0 * v);
        out.grad_mean[j] = -r / v / batch;
        out.grad_variance[j] = (0.5 / v - r * r / (2.0 * v * v)) / batch;
    }
    out.value = total / batch;
    return out;
}

double probout_loss(const Tensor& mean, const Tensor& variance, const Tensor& y) {
    return probout_loss_with_grad(mean, variance, y).value;
}

ProbOutTrainResult train_probout(const Network& base, const Tensor& x, const Tensor& y, const TrainConfig& cfg,
                                 const EpochCallback& on_epoch) {
    if (!(cfg.lr > 0.0)) throw ConfigError("probout learning rate must be positive");
    const std::size_t m = batch_of(x, base.input_shape());
    const std::size_t out_size = base.output_shape().size();
    if (y.size() != m * out_size) throw DimensionError("train_probout: targets do not match network outputs");
    const Tensor y_flat = y.reshaped({m, out_size});

    const double base_mse = mse(predict(base, x), y_flat);
    ProbOutTrainResult result{ProbOutNetwork::from_base(base, base_mse), {}};
    Network& net = result.net.network();

    AdamState adam(net.parameters(), AdamConfig{cfg.lr});
    const Rng root(cfg.seed);
    std::uint64_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng = root.split(epoch);
        const auto batches = minibatches(shuffled_indices(m, shuffle_rng), cfg.batch);
        double loss_sum = 0.0;
        for (const auto& rows : batches) {
            const Tensor xb = x.gather_rows(rows);
            const Tensor yb = y_flat.gather_rows(rows);
            Rng drop_rng = root.split(0x100000000ULL + step);
            auto fwd = forward(net, xb, Mode::Train, &drop_rng);
            const auto pred = split_probout(fwd.output);
            const auto loss = probout_loss_with_grad(pred.mean, pred.variance, yb);
            if (!std::isfinite(loss.value))
                throw DivergenceError("non-finite ProbOut loss at epoch " + std::to_string(epoch) + ", step " +
                                      std::to_string(step) + " (seed " + std::to_string(cfg.seed) + ")");
            loss_sum += loss.value;

            // Chain through variance = softplus(scale) + floor.
            const std::size_t batch = rows.size();
            Tensor grad_raw(fwd.output.shape());
            for (std::size_t b = 0; b < batch; ++b) {
                const auto raw_row = fwd.output.row(b);
                auto g_row = grad_raw.row(b);
                for (std::size_t c = 0; c < out_size; ++c) {
                    g_row[c] = loss.grad_mean[b * out_size + c];
                    g_row[out_size + c] = loss.grad_variance[b * out_size + c] * sigmoid(raw_row[out_size + c]);
                }
            }
            auto grads = backward(net, fwd.cache, grad_raw);
            adam.step(net.parameters(), grads.params);
            ++step;
        }
        EpochLog entry{epoch, loss_sum / static_cast<double>(batches.size())};
        result.log.push_back(entry);
        if (on_epoch) on_epoch(entry);
    }
    return result;
}

} // namespace inn
