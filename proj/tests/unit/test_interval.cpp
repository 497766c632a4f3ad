#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "inn/error.hpp"
#include "inn/interval.hpp"
#include "test_support.hpp"

using namespace inn;
using namespace inn::test;

namespace {

// Widens every trainable bound by U[lo, hi].
void widen(IntervalNetwork& inn, Rng& rng, double lo, double hi) {
    for (std::size_t q = 0; q < inn.linear_count(); ++q) {
        if (!inn.trainable(q)) continue;
        IntervalBounds b = inn.bounds(q);
        for (auto& v : b.weight_lower.values()) v -= rng.uniform(lo, hi);
        for (auto& v : b.weight_upper.values()) v += rng.uniform(lo, hi);
        for (auto& v : b.bias_lower.values()) v -= rng.uniform(lo, hi);
        for (auto& v : b.bias_upper.values()) v += rng.uniform(lo, hi);
        inn.set_bounds(q, std::move(b));
    }
}

double naive_loss(const Tensor& lo, const Tensor& up, const Tensor& y, double beta) {
    const std::size_t batch = lo.dim(0);
    double total = 0.0;
    for (std::size_t i = 0; i < lo.size(); ++i) {
        const double over = std::max(y[i] - up[i], 0.0);
        const double under = std::max(lo[i] - y[i], 0.0);
        total += over * over + under * under + beta * (up[i] - lo[i]);
    }
    return total / static_cast<double>(batch);
}

} // namespace

TEST_CASE("one dense layer with boxes [1,2] and [-1,1] maps (1,1) to [0,3]") {
    Network base(ActShape{2, 1}, {LayerSpec::dense(2, 1)});
    auto p = base.parameters();
    (*p[0])[0] = 1.5;
    (*p[0])[1] = 0.0;
    IntervalNetwork inn(base);
    IntervalBounds b = inn.bounds(0);
    b.weight_lower = Tensor(b.weight_lower.shape(), std::vector<double>{1, -1});
    b.weight_upper = Tensor(b.weight_upper.shape(), std::vector<double>{2, 1});
    inn.set_bounds(0, b);
    const auto r = interval_forward(inn, Tensor({1, 2}, std::vector<double>{1, 1}));
    CHECK(r.lower[0] == 0.0);
    CHECK(r.upper[0] == 3.0);
}

TEST_CASE("point intervals reproduce the base network bit for bit") {
    Rng rng(3);
    const Network base = random_dense_net({4, 6, 5, 2}, rng);
    const IntervalNetwork inn(base);
    const Tensor x = random_tensor({8, 4}, rng);
    const auto r = interval_forward(inn, x);
    const Tensor y = predict(base, x);
    CHECK(r.lower == y);
    CHECK(r.upper == y);
    const Tensor u = uncertainty(inn, x);
    for (double v : u.values()) CHECK(v == 0.0);
}

TEST_CASE("single-layer bounds equal the corner enumeration") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        // 3x3 weights + 3 biases = 12 boxed parameters.
        Network base = random_dense_net({3, 3}, rng);
        IntervalNetwork inn(base);
        widen(inn, rng, 0.0, 0.5);
        const Tensor x = random_tensor({1, 3}, rng, 0.0, 2.0);
        const auto r = interval_forward(inn, x);
        const auto& b = inn.bounds(0);
        for (std::size_t o = 0; o < 3; ++o) {
            double lo = INFINITY, hi = -INFINITY;
            for (unsigned corner = 0; corner < (1u << 12); ++corner) {
                double acc = 0.0;
                for (std::size_t i = 0; i < 3; ++i) {
                    const std::size_t k = o * 3 + i;
                    const double w = (corner >> (o * 4 + i)) & 1u ? b.weight_upper[k] : b.weight_lower[k];
                    acc += w * x[i];
                }
                acc += (corner >> (o * 4 + 3)) & 1u ? b.bias_upper[o] : b.bias_lower[o];
                lo = std::min(lo, acc);
                hi = std::max(hi, acc);
            }
            CHECK(r.lower[o] == doctest::Approx(lo).epsilon(1e-12));
            CHECK(r.upper[o] == doctest::Approx(hi).epsilon(1e-12));
        }
    }
}

TEST_CASE("hidden-layer formula equals corner enumeration on nonnegative point input") {
    Rng rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        Network base = random_dense_net({2, 3, 2}, rng);
        IntervalNetwork inn(base, LayerMask(std::vector<bool>{false, true}));
        widen(inn, rng, 0.0, 0.4);
        const Tensor x = random_tensor({1, 2}, rng);
        const Tensor act = forward_prefix(base, x, 2);  // post-ReLU
        const auto r = interval_forward(inn, x);
        const auto& b = inn.bounds(1);
        for (std::size_t o = 0; o < 2; ++o) {
            double lo = INFINITY, hi = -INFINITY;
            for (unsigned corner = 0; corner < 16u; ++corner) {
                double acc = 0.0;
                for (std::size_t i = 0; i < 3; ++i) {
                    const std::size_t k = o * 3 + i;
                    acc += ((corner >> i) & 1u ? b.weight_upper[k] : b.weight_lower[k]) * act[i];
                }
                acc += (corner >> 3) & 1u ? b.bias_upper[o] : b.bias_lower[o];
                lo = std::min(lo, acc);
                hi = std::max(hi, acc);
            }
            CHECK(r.lower[o] == doctest::Approx(lo).epsilon(1e-12));
            CHECK(r.upper[o] == doctest::Approx(hi).epsilon(1e-12));
        }
    }
}

TEST_CASE("Monte-Carlo weight draws stay inside the propagated box") {
    Rng rng(99);
    const Network base = random_dense_net({3, 5, 4, 2}, rng);
    IntervalNetwork inn(base);
    widen(inn, rng, 0.0, 0.2);
    const Tensor x = random_tensor({4, 3}, rng);
    const auto r = interval_forward(inn, x);
    const Tensor y0 = predict(base, x);
    for (std::size_t j = 0; j < y0.size(); ++j) {
        CHECK(r.lower[j] <= y0[j] + 1e-9);
        CHECK(y0[j] <= r.upper[j] + 1e-9);
    }
    int outside = 0;
    for (int draw = 0; draw < 10000; ++draw) {
        const Tensor y = predict(realize(inn, rng), x);
        for (std::size_t j = 0; j < y.size(); ++j)
            if (y[j] < r.lower[j] - 1e-9 || y[j] > r.upper[j] + 1e-9) ++outside;
    }
    CHECK(outside == 0);
}

TEST_CASE("conv networks keep the base output inside the interval") {
    Rng rng(5);
    Network base(ActShape{1, 9}, {LayerSpec::conv1d(1, 3, 3), LayerSpec::relu(), LayerSpec::dropout(0.5),
                                  LayerSpec::conv1d(3, 2, 5), LayerSpec::relu(), LayerSpec::conv1d(2, 1, 3)});
    base.init_params(rng);
    IntervalNetwork inn(base);
    widen(inn, rng, 0.0, 0.05);
    const Tensor x = random_tensor({3, 1, 9}, rng);
    const auto r = interval_forward(inn, x);
    const Tensor y0 = predict(base, x);
    for (std::size_t j = 0; j < y0.size(); ++j) {
        CHECK(r.lower[j] <= y0[j] + 1e-9);
        CHECK(y0[j] <= r.upper[j] + 1e-9);
    }
    int outside = 0;
    for (int draw = 0; draw < 2000; ++draw) {
        const Tensor y = predict(realize(inn, rng), x);
        for (std::size_t j = 0; j < y.size(); ++j)
            if (y[j] < r.lower[j] - 1e-9 || y[j] > r.upper[j] + 1e-9) ++outside;
    }
    CHECK(outside == 0);
}

TEST_CASE("interval loss examples") {
    const Tensor lo({1, 1}, 0.0), up({1, 1}, 1.0), y({1, 1}, 1.5);
    CHECK(interval_loss(lo, up, y, 0.1) == doctest::Approx(0.35));

    Rng rng(4);
    Tensor l = random_tensor({5, 3}, rng, -1.0, 0.0);
    Tensor u = random_tensor({5, 3}, rng, 0.0, 1.0);
    Tensor inside({5, 3});
    for (std::size_t i = 0; i < inside.size(); ++i) inside[i] = 0.5 * (l[i] + u[i]);
    double widths = 0.0;
    for (std::size_t i = 0; i < l.size(); ++i) widths += u[i] - l[i];
    CHECK(interval_loss(l, u, inside, 0.3) == doctest::Approx(0.3 * widths / 5.0).epsilon(1e-14));

    for (int trial = 0; trial < 20; ++trial) {
        const Tensor a = random_tensor({7, 4}, rng);
        Tensor b = a;
        for (auto& v : b.values()) v += rng.uniform(0.0, 0.5);
        const Tensor t = random_tensor({7, 4}, rng, -1.5, 1.5);
        const double beta = rng.uniform(0.01, 1.0);
        const double got = interval_loss(a, b, t, beta);
        CHECK(got >= 0.0);
        CHECK(std::abs(got - naive_loss(a, b, t, beta)) <= 1e-12);
    }
    CHECK_THROWS_AS(interval_loss(lo, up, y, 0.0), ConfigError);
    CHECK_THROWS_AS(interval_loss(up, lo, y, 0.1), ConsistencyError);
}

TEST_CASE("point intervals with covered targets get penalty-only gradients") {
    const Tensor lo({2, 2}, 0.0), up({2, 2}, 0.0), y({2, 2}, 0.0);
    const auto g = interval_loss_with_grad(lo, up, y, 0.2);
    for (double v : g.grad_upper.values()) CHECK(v == doctest::Approx(0.1));
    for (double v : g.grad_lower.values()) CHECK(v == doctest::Approx(-0.1));
}

TEST_CASE("zero output gradients give zero parameter gradients") {
    // The beta = 0, all-covered case: the loss is identically zero near the
    // point, so only the bound gradients matter and they vanish.
    Rng rng(6);
    const Network base = random_dense_net({3, 4, 2}, rng);
    IntervalNetwork inn(base);
    widen(inn, rng, 0.0, 0.1);
    const Tensor x = random_tensor({3, 3}, rng);
    const auto r = interval_forward(inn, x);
    const auto g = interval_backward(inn, r.cache, Tensor(r.lower.shape(), 0.0), Tensor(r.upper.shape(), 0.0));
    for (const auto& t : g.trainable_flat())
        for (double v : t.values()) CHECK(v == 0.0);
}

TEST_CASE("interval gradients match central finite differences") {
    Rng rng(123);
    int checked = 0, attempts = 0;
    while (checked < 50 && attempts < 500) {
        ++attempts;
        Network base = random_dense_net({3, 4, 3, 2}, rng);
        IntervalNetwork inn(base);
        widen(inn, rng, 1e-2, 0.2);
        const Tensor x = random_tensor({2, 3}, rng);
        const Tensor y = random_tensor({2, 2}, rng, -2.0, 2.0);
        const double beta = rng.uniform(0.01, 0.5);
        const auto r = interval_forward(inn, x);

        // Skip configurations near ReLU or sign kinks.
        bool near_kink = false;
        for (std::size_t li = 0; li < base.layer_count(); ++li) {
            if (base.layer(li).spec.kind != LayerKind::Relu) continue;
            const std::size_t k = li - r.cache.start_layer;
            for (double v : r.cache.lower[k].values()) near_kink |= std::abs(v) < 1e-3;
            for (double v : r.cache.upper[k].values()) near_kink |= std::abs(v) < 1e-3;
        }
        // The squared hinges have a second-derivative jump at the bounds.
        for (std::size_t j = 0; j < y.size(); ++j)
            near_kink |= std::abs(y[j] - r.upper[j]) < 1e-3 || std::abs(y[j] - r.lower[j]) < 1e-3;
        for (std::size_t q = 1; q < inn.linear_count(); ++q) {
            for (double v : inn.bounds(q).weight_lower.values()) near_kink |= std::abs(v) < 1e-3;
            for (double v : inn.bounds(q).weight_upper.values()) near_kink |= std::abs(v) < 1e-3;
        }
        if (near_kink) continue;
        ++checked;

        const auto grads = interval_backward(inn, r.cache, y, beta).trainable_flat();
        IntervalNetwork probe = inn;
        auto tensors = probe.trainable_tensors();
        REQUIRE(tensors.size() == grads.size());
        const double h = 1e-5;
        auto objective = [&] {
            const auto rr = interval_forward(probe, x);
            return interval_loss(rr.lower, rr.upper, y, beta);
        };
        for (std::size_t t = 0; t < tensors.size(); ++t)
            for (std::size_t i = 0; i < tensors[t]->size(); ++i) {
                const double orig = (*tensors[t])[i];
                (*tensors[t])[i] = orig + h;
                const double up = objective();
                (*tensors[t])[i] = orig - h;
                const double dn = objective();
                (*tensors[t])[i] = orig;
                // Gradients near 1e-7 sit at the finite-difference roundoff level.
                CHECK(rel_error(grads[t][i], (up - dn) / (2 * h), 1e-4) <= 1e-5);
            }
    }
    CHECK(checked == 50);
}

TEST_CASE("backward rejects a stale cache") {
    Rng rng(7);
    IntervalNetwork inn(random_dense_net({2, 3, 1}, rng));
    const Tensor x = random_tensor({1, 2}, rng);
    const auto r = interval_forward(inn, x);
    inn.trainable_tensors();
    CHECK_THROWS_AS(interval_backward(inn, r.cache, Tensor({1, 1}, 0.0), 0.1), ConsistencyError);
}

TEST_CASE("projection snaps drifted bounds back to the point") {
    Rng rng(8);
    const Network base = random_dense_net({2, 2}, rng);
    IntervalNetwork inn(base);
    widen(inn, rng, 0.1, 0.2);
    const IntervalNetwork valid = inn;
    project_containment(inn);
    for (std::size_t q = 0; q < inn.linear_count(); ++q) {
        CHECK(inn.bounds(q).weight_lower == valid.bounds(q).weight_lower);
        CHECK(inn.bounds(q).weight_upper == valid.bounds(q).weight_upper);
    }
    IntervalBounds b = inn.bounds(0);
    const double point = base.layer(0).weight[0];
    b.weight_upper[0] = point - 0.1;
    inn.set_bounds(0, b);
    CHECK_FALSE(inn.contains_base());
    project_containment(inn);
    CHECK(inn.bounds(0).weight_upper[0] == point);
    CHECK(inn.contains_base());
}

TEST_CASE("width bounds the base error on either side") {
    Rng rng(10);
    const Network base = random_dense_net({3, 4, 2}, rng);
    IntervalNetwork inn(base);
    widen(inn, rng, 0.0, 0.3);
    const Tensor x = random_tensor({6, 3}, rng);
    const auto r = interval_forward(inn, x);
    const Tensor u = uncertainty(inn, x);
    const Tensor y0 = predict(base, x);
    for (std::size_t j = 0; j < u.size(); ++j) {
        CHECK(u[j] == r.upper[j] - r.lower[j]);
        CHECK(u[j] >= 0.0);
        CHECK((y0[j] - r.lower[j]) + (r.upper[j] - y0[j]) <= u[j] + 1e-12);
        // Any covered target is within `width` of the base prediction.
        const double t = rng.uniform(r.lower[j], r.upper[j]);
        CHECK(std::abs(t - y0[j]) <= u[j] + 1e-12);
    }
}

TEST_CASE("interval propagation requires a ReLU before every later linear layer") {
    Network base(ActShape{2, 1}, {LayerSpec::dense(2, 2), LayerSpec::dense(2, 1)});
    CHECK_THROWS_AS(IntervalNetwork{base}, ConfigError);
}

TEST_CASE("pass counter counts one traversal per bound") {
    Rng rng(11);
    const IntervalNetwork inn(random_dense_net({2, 3, 1}, rng));
    PassCounter counter;
    uncertainty(inn, random_tensor({5, 2}, rng), &counter);
    CHECK(counter.passes == 2);
}
