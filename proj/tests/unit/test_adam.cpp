#include <doctest.h>

#include <cmath>
#include <vector>

#include "inn/adam.hpp"
#include "inn/error.hpp"
#include "inn/training.hpp"
#include "test_support.hpp"

using namespace inn;

namespace {

// Scalar Adam written out by hand.
struct ScalarAdam {
    double lr, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double m = 0.0, v = 0.0;
    int t = 0;
    double step(double theta, double g) {
        ++t;
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mh = m / (1 - std::pow(b1, t));
        const double vh = v / (1 - std::pow(b2, t));
        return theta - lr * mh / (std::sqrt(vh) + eps);
    }
};

} // namespace

TEST_CASE("first Adam step on a scalar moves by lr") {
    Tensor theta({1}, 0.0);
    std::vector<Tensor*> params{&theta};
    AdamState adam(params, AdamConfig{0.1});
    adam.step(params, std::vector<Tensor>{Tensor({1}, 1.0)});
    CHECK(theta[0] == doctest::Approx(-0.0999999999).epsilon(1e-8));
    CHECK(adam.steps() == 1);
}

TEST_CASE("zero gradients on a fresh state leave parameters unchanged") {
    Tensor theta({3}, std::vector<double>{0.5, -1.0, 2.0});
    const Tensor before = theta;
    std::vector<Tensor*> params{&theta};
    AdamState adam(params, AdamConfig{0.01});
    adam.step(params, std::vector<Tensor>{Tensor({3}, 0.0)});
    CHECK(theta == before);
}

TEST_CASE("lr = 0 leaves parameters bit-identical") {
    Rng rng(8);
    Tensor theta = test::random_tensor({10}, rng);
    const Tensor before = theta;
    std::vector<Tensor*> params{&theta};
    AdamState adam(params, AdamConfig{0.0});
    for (int i = 0; i < 5; ++i) adam.step(params, std::vector<Tensor>{test::random_tensor({10}, rng)});
    CHECK(theta == before);
}

TEST_CASE("multi-step sequence matches a scalar reference") {
    Tensor theta({2}, std::vector<double>{0.3, -0.7});
    std::vector<Tensor*> params{&theta};
    AdamState adam(params, AdamConfig{0.05});
    ScalarAdam r0{0.05}, r1{0.05};
    double t0 = 0.3, t1 = -0.7;
    const double gs[][2] = {{1.0, -2.0}, {1.0, -2.0}, {0.5, 3.0}, {-0.25, 0.0}};
    for (const auto& g : gs) {
        adam.step(params, std::vector<Tensor>{Tensor({2}, std::vector<double>{g[0], g[1]})});
        t0 = r0.step(t0, g[0]);
        t1 = r1.step(t1, g[1]);
        CHECK(std::abs(theta[0] - t0) <= 1e-15);
        CHECK(std::abs(theta[1] - t1) <= 1e-15);
    }
}

TEST_CASE("Adam rejects mismatched parameter lists and bad settings") {
    Tensor a({2}), b({3});
    std::vector<Tensor*> params{&a};
    AdamState adam(params, AdamConfig{});
    std::vector<Tensor*> two{&a, &b};
    CHECK_THROWS_AS(adam.step(two, std::vector<Tensor>{Tensor({2}), Tensor({3})}), DimensionError);
    CHECK_THROWS_AS(AdamState(params, AdamConfig{-1.0}), ConfigError);
}

TEST_CASE("train_mse fits a linear map and is deterministic") {
    Rng rng(1);
    Network net(ActShape{2, 1}, {LayerSpec::dense(2, 1)});
    net.init_params(rng);
    Tensor x = test::random_tensor({64, 2}, rng);
    Tensor y({64, 1});
    for (std::size_t i = 0; i < 64; ++i) y[i] = 2.0 * x[2 * i] - x[2 * i + 1] + 0.5;
    Network copy = net;
    const TrainConfig cfg{300, 0.05, 16, 3};
    const auto log = train_mse(net, x, y, cfg);
    CHECK(log.size() == 300);
    CHECK(log.back().loss < 1e-4);
    train_mse(copy, x, y, cfg);
    CHECK(net.layer(0).weight == copy.layer(0).weight);
}

TEST_CASE("minibatches cover every index once") {
    Rng rng(2);
    const auto order = shuffled_indices(10, rng);
    const auto batches = minibatches(order, 4);
    CHECK(batches.size() == 3);
    CHECK(batches.back().size() == 2);
    std::vector<int> seen(10, 0);
    for (const auto& b : batches)
        for (auto i : b) ++seen[i];
    for (int s : seen) CHECK(s == 1);
}
