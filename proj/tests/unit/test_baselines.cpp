#include <doctest.h>

#include <cmath>

#include "inn/baselines.hpp"
#include "inn/error.hpp"
#include "inn/metrics.hpp"
#include "test_support.hpp"

using namespace inn;
using namespace inn::test;

namespace {

// dense(k,k) identity -> relu -> dropout(p) -> dense(k,1) with weights w.
Network dropout_probe(const std::vector<double>& w, double bias, double p) {
    const std::size_t k = w.size();
    Network net(ActShape{k, 1},
                {LayerSpec::dense(k, k), LayerSpec::relu(), LayerSpec::dropout(p), LayerSpec::dense(k, 1)});
    auto params = net.parameters();
    for (std::size_t i = 0; i < k; ++i) (*params[0])[i * k + i] = 1.0;
    for (std::size_t i = 0; i < k; ++i) (*params[2])[i] = w[i];
    (*params[3])[0] = bias;
    return net;
}

double naive_nll(const Tensor& mu, const Tensor& var, const Tensor& y) {
    double total = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i)
        total += 0.5 * std::log(var[i]) + (y[i] - mu[i]) * (y[i] - mu[i]) / (2.0 * var[i]);
    return total / static_cast<double>(mu.dim(0));
}

} // namespace

TEST_CASE("dropout p = 0 gives zero spread and the deterministic mean") {
    const Network net = dropout_probe({0.5, -1.0, 2.0}, 0.1, 0.0);
    Rng rng(1);
    const Tensor x = random_tensor({4, 3}, rng, 0.0, 1.0);
    PassCounter counter;
    const auto r = mcdrop_predict(net, x, McDropConfig{8, 3}, &counter);
    const Tensor y = predict(net, x);
    for (std::size_t i = 0; i < y.size(); ++i) {
        CHECK(r.std[i] == 0.0);
        CHECK(r.mean[i] == doctest::Approx(y[i]).epsilon(1e-14));
    }
    CHECK(counter.passes == 8);
}

TEST_CASE("T = 2 matches the two hand-replayed masked passes") {
    const std::vector<double> w{0.5, -1.0, 2.0};
    const double p = 0.4;
    const Network net = dropout_probe(w, 0.25, p);
    const Tensor x({1, 3}, std::vector<double>{1.0, 2.0, 3.0});
    const std::uint64_t seed = 77;
    double outs[2];
    for (std::uint64_t t = 0; t < 2; ++t) {
        Rng rng(derive_seed(seed, t));
        double acc = 0.25;
        for (std::size_t i = 0; i < 3; ++i) {
            const double m = rng.uniform() >= p ? 1.0 / (1.0 - p) : 0.0;
            acc += w[i] * m * x[i];
        }
        outs[t] = acc;
    }
    const auto r = mcdrop_predict(net, x, McDropConfig{2, seed});
    CHECK(r.mean[0] == doctest::Approx(0.5 * (outs[0] + outs[1])).epsilon(1e-14));
    CHECK(r.std[0] == doctest::Approx(std::abs(outs[0] - outs[1]) / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("large-T std approaches the exact dropout distribution") {
    const std::vector<double> w{1.0, -0.5, 0.75, 2.0};
    const double p = 0.3;
    const Network net = dropout_probe(w, 0.0, p);
    const Tensor x({1, 4}, std::vector<double>{0.8, 1.5, 0.3, 0.6});
    double mean = 0.0, second = 0.0;
    for (unsigned mask = 0; mask < 16u; ++mask) {
        double prob = 1.0, out = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
            const bool keep = (mask >> i) & 1u;
            prob *= keep ? 1.0 - p : p;
            if (keep) out += w[i] * x[i] / (1.0 - p);
        }
        mean += prob * out;
        second += prob * out * out;
    }
    const double exact_std = std::sqrt(second - mean * mean);
    const auto r = mcdrop_predict(net, x, McDropConfig{10000, 5});
    CHECK(std::abs(r.std[0] - exact_std) <= 0.05 * exact_std);
    CHECK(std::abs(r.mean[0] - mean) <= 0.05 * std::abs(mean));
}

TEST_CASE("mcdrop is deterministic per seed and needs dropout") {
    const Network net = dropout_probe({1.0, 2.0}, 0.0, 0.5);
    Rng rng(2);
    const Tensor x = random_tensor({3, 2}, rng, 0.0, 1.0);
    const auto a = mcdrop_predict(net, x, McDropConfig{5, 11});
    const auto b = mcdrop_predict(net, x, McDropConfig{5, 11});
    CHECK(a.mean == b.mean);
    CHECK(a.std == b.std);
    const Network plain(ActShape{2, 1}, {LayerSpec::dense(2, 1)});
    CHECK_THROWS_AS(mcdrop_predict(plain, x, McDropConfig{5, 1}), ConfigError);
    CHECK_THROWS_AS(mcdrop_predict(net, x, McDropConfig{1, 1}), ConfigError);
}

TEST_CASE("softplus helpers") {
    CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
    CHECK(softplus(800.0) == doctest::Approx(800.0));
    CHECK(softplus(-800.0) >= 0.0);
    for (double v : {1e-4, 0.3, 2.0, 50.0}) CHECK(softplus(softplus_inverse(v)) == doctest::Approx(v).epsilon(1e-12));
    CHECK(sigmoid(0.0) == 0.5);
}

TEST_CASE("probout loss examples and gradients") {
    const Tensor y({1, 2}, std::vector<double>{0.3, -0.2});
    CHECK(probout_loss(y, Tensor({1, 2}, 1.0), y) == 0.0);

    // d loss / d var vanishes at var = r^2.
    const Tensor mu({1, 2}, std::vector<double>{0.8, -0.5});
    Tensor var({1, 2});
    for (std::size_t i = 0; i < 2; ++i) var[i] = (y[i] - mu[i]) * (y[i] - mu[i]);
    const auto g = probout_loss_with_grad(mu, var, y);
    for (double v : g.grad_variance.values()) CHECK(std::abs(v) <= 1e-12);

    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const Tensor m = random_tensor({4, 3}, rng);
        const Tensor v = random_tensor({4, 3}, rng, 0.05, 2.0);
        const Tensor t = random_tensor({4, 3}, rng);
        const auto lg = probout_loss_with_grad(m, v, t);
        CHECK(std::abs(lg.value - naive_nll(m, v, t)) <= 1e-12);
        const double h = 1e-6;
        for (std::size_t i = 0; i < m.size(); ++i) {
            Tensor mp = m, mm = m, vp = v, vm = v;
            mp[i] += h;
            mm[i] -= h;
            vp[i] += h;
            vm[i] -= h;
            CHECK(rel_error(lg.grad_mean[i], (naive_nll(mp, v, t) - naive_nll(mm, v, t)) / (2 * h)) <= 1e-6);
            CHECK(rel_error(lg.grad_variance[i], (naive_nll(m, vp, t) - naive_nll(m, vm, t)) / (2 * h)) <= 1e-6);
        }
    }
    CHECK_THROWS(probout_loss(y, Tensor({1, 2}, 0.0), y));
}

TEST_CASE("probout with zero epochs reproduces the base mean") {
    Rng rng(4);
    Network base = random_dense_net({3, 5, 2}, rng);
    const Tensor x = random_tensor({16, 3}, rng);
    const Tensor y = random_tensor({16, 2}, rng);
    const auto res = train_probout(base, x, y, TrainConfig{0, 1e-3, 8, 1});
    PassCounter counter;
    const auto pred = probout_predict(res.net, x, &counter);
    const Tensor base_pred = predict(base, x);
    for (std::size_t i = 0; i < base_pred.size(); ++i) CHECK(pred.mean[i] == doctest::Approx(base_pred[i]));
    // Initial variance sits at the base training MSE.
    for (double v : pred.variance.values()) CHECK(v == doctest::Approx(mse(base_pred, y)).epsilon(1e-9));
    CHECK(counter.passes == 1);
}

TEST_CASE("probout recovers a known homoscedastic noise level") {
    Rng rng(5);
    const std::size_t m = 1024;
    Tensor x({m, 1}), y({m, 1});
    for (std::size_t i = 0; i < m; ++i) {
        x[i] = rng.uniform(-1.0, 1.0);
        y[i] = 2.0 * x[i] + 0.5 + 0.1 * rng.normal();
    }
    Network base(ActShape{1, 1}, {LayerSpec::dense(1, 1)});
    base.init_params(rng);  // deliberately untrained
    const auto res = train_probout(base, x, y, TrainConfig{150, 1e-2, 64, 2});
    CHECK(res.log.back().loss < res.log.front().loss);
    for (std::size_t e = 1; e < 10; ++e) CHECK(res.log[e].loss <= res.log[0].loss);
    const auto pred = probout_predict(res.net, x);
    double mean_sd = 0.0;
    for (double v : pred.variance.values()) {
        CHECK(v > 0.0);
        mean_sd += std::sqrt(v);
    }
    mean_sd /= static_cast<double>(m);
    CHECK(mean_sd == doctest::Approx(0.1).epsilon(0.2));
}
