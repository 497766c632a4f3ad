#include <doctest.h>

#include <string>

#include "inn/error.hpp"
#include "inn/interval.hpp"
#include "inn/metrics.hpp"
#include "inn/training.hpp"
#include "test_support.hpp"

using namespace inn;
using namespace inn::test;

namespace {

struct Toy {
    Network base;
    Tensor x, y;
};

Toy toy_problem(std::uint64_t seed) {
    Rng rng(seed);
    Toy t{Network(ActShape{2, 1}, {LayerSpec::dense(2, 8), LayerSpec::relu(), LayerSpec::dense(8, 1)}),
          random_tensor({64, 2}, rng), Tensor({64, 1})};
    t.base.init_params(rng);
    for (std::size_t i = 0; i < 64; ++i) t.y[i] = t.x[2 * i] * t.x[2 * i + 1] + 0.1 * rng.normal();
    train_mse(t.base, t.x, t.y, TrainConfig{50, 1e-2, 16, seed});
    return t;
}

double coverage_of(const IntervalNetwork& inn, const Tensor& x, const Tensor& y) {
    const auto r = interval_forward(inn, x);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < y.size(); ++i) hit += r.lower[i] <= y[i] && y[i] <= r.upper[i];
    return static_cast<double>(hit) / static_cast<double>(y.size());
}

} // namespace

TEST_CASE("zero epochs leaves point intervals") {
    const Toy t = toy_problem(1);
    InnTrainConfig cfg;
    cfg.epochs = 0;
    const auto res = train_inn(t.base, t.x, t.y, cfg);
    CHECK(res.steps == 0);
    CHECK(res.inn.mean_parameter_width() == 0.0);
    const Tensor u = uncertainty(res.inn, t.x);
    for (double v : u.values()) CHECK(v == 0.0);
    CHECK(coverage_of(res.inn, t.x, t.y) < 0.05);
}

TEST_CASE("training widens intervals and raises coverage") {
    const Toy t = toy_problem(2);
    InnTrainConfig cfg;
    cfg.epochs = 60;
    cfg.lr = 1e-3;
    cfg.beta = 0.01;
    cfg.batch = 16;
    cfg.seed = 4;
    const auto res = train_inn(t.base, t.x, t.y, cfg);
    CHECK(res.log.size() == 60);
    CHECK(res.log.back().loss < res.log.front().loss);
    CHECK(coverage_of(res.inn, t.x, t.y) > 0.5);
}

TEST_CASE("a huge beta keeps widths near zero") {
    const Toy t = toy_problem(3);
    InnTrainConfig small, huge;
    small.epochs = huge.epochs = 5;
    small.lr = huge.lr = 1e-3;
    small.batch = huge.batch = 16;
    small.beta = 1e-3;
    huge.beta = 1e6;
    const double w_small = mean_value(uncertainty(train_inn(t.base, t.x, t.y, small).inn, t.x));
    const double w_huge = mean_value(uncertainty(train_inn(t.base, t.x, t.y, huge).inn, t.x));
    CHECK(w_huge < w_small);
    CHECK(w_huge < 1e-2);
}

TEST_CASE("containment holds after every projected step") {
    const Toy t = toy_problem(4);
    InnTrainConfig cfg;
    cfg.epochs = 5;
    cfg.lr = 5e-2;  // large steps push bounds across the point
    cfg.beta = 0.5;
    cfg.batch = 8;
    std::uint64_t observed = 0, violations = 0;
    const auto res = train_inn(t.base, t.x, t.y, cfg, [&](const InnStep& s) {
        ++observed;
        if (!s.inn->contains_base()) ++violations;
        CHECK(s.rows->size() <= 8);
    });
    CHECK(observed == res.steps);
    CHECK(observed == 5 * 8);
    CHECK(violations == 0);
}

TEST_CASE("training is deterministic given the seed") {
    const Toy t = toy_problem(5);
    InnTrainConfig cfg;
    cfg.epochs = 3;
    cfg.lr = 1e-3;
    cfg.beta = 0.05;
    cfg.batch = 16;
    cfg.seed = 9;
    const auto a = train_inn(t.base, t.x, t.y, cfg);
    const auto b = train_inn(t.base, t.x, t.y, cfg);
    for (std::size_t q = 0; q < a.inn.linear_count(); ++q) {
        CHECK(a.inn.bounds(q).weight_lower == b.inn.bounds(q).weight_lower);
        CHECK(a.inn.bounds(q).bias_upper == b.inn.bounds(q).bias_upper);
    }
}

TEST_CASE("the width ceiling aborts with a layer-mask hint") {
    const Toy t = toy_problem(6);
    InnTrainConfig cfg;
    cfg.epochs = 2;
    cfg.lr = 1e-2;
    cfg.beta = 1e-3;
    cfg.width_ceiling = 1e-6;
    try {
        train_inn(t.base, t.x, t.y, cfg);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(std::string(e.what()).find("mask") != std::string::npos);
    }
}

TEST_CASE("masked layers keep point intervals") {
    const Toy t = toy_problem(7);
    InnTrainConfig cfg;
    cfg.epochs = 3;
    cfg.lr = 1e-3;
    cfg.beta = 0.01;
    cfg.batch = 16;
    cfg.mask = "last:1";
    const auto res = train_inn(t.base, t.x, t.y, cfg);
    const auto& first = res.inn.bounds(0);
    CHECK(first.weight_lower == first.weight_upper);
    CHECK(first.bias_lower == first.bias_upper);
    CHECK(res.inn.bounds(1).weight_upper != res.inn.bounds(1).weight_lower);
}

TEST_CASE("layer mask parsing") {
    CHECK(LayerMask::parse("all", 3).bits() == std::vector<bool>{true, true, true});
    CHECK(LayerMask::parse("none", 2).bits() == std::vector<bool>{false, false});
    CHECK(LayerMask::parse("last:2", 4).bits() == std::vector<bool>{false, false, true, true});
    CHECK(LayerMask::parse("1,3", 3).bits() == std::vector<bool>{true, false, true});
    CHECK(LayerMask::parse(LayerMask::parse("2,3", 4).to_string(), 4) == LayerMask::parse("2,3", 4));
    CHECK_THROWS_AS(LayerMask::parse("last:5", 4), ConfigError);
    CHECK_THROWS_AS(LayerMask::parse("0", 4), ConfigError);
    CHECK_THROWS_AS(LayerMask::parse("x", 4), ConfigError);
}

TEST_CASE("invalid hyperparameters are rejected") {
    const Toy t = toy_problem(8);
    InnTrainConfig cfg;
    cfg.beta = 0.0;
    CHECK_THROWS_AS(train_inn(t.base, t.x, t.y, cfg), ConfigError);
    cfg.beta = 1e-3;
    cfg.lr = 0.0;
    CHECK_THROWS_AS(train_inn(t.base, t.x, t.y, cfg), ConfigError);
}

TEST_CASE("beta_from_mae is the mean absolute error") {
    Network net(ActShape{1, 1}, {LayerSpec::dense(1, 1)});
    (*net.parameters()[0])[0] = 1.0;
    const Tensor x({3, 1}, std::vector<double>{0, 1, 2});
    const Tensor y({3, 1}, std::vector<double>{1, 1, 1});
    CHECK(beta_from_mae(net, x, y) == doctest::Approx(2.0 / 3.0));
}
