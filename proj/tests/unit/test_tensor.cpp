#include <doctest.h>

#include <algorithm>
#include <set>

#include "inn/error.hpp"
#include "inn/rng.hpp"
#include "inn/tensor.hpp"

using namespace inn;

TEST_CASE("tensor construction and shape checks") {
    Tensor t({2, 3}, 1.5);
    CHECK(t.size() == 6);
    CHECK(t.rank() == 2);
    CHECK(t.dim(1) == 3);
    CHECK(t[5] == 1.5);
    CHECK_THROWS_AS(Tensor({2, 0}), DimensionError);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
    CHECK_THROWS_AS(t.reshaped({4}), DimensionError);
    CHECK(t.reshaped({3, 2}).shape() == Shape{3, 2});
}

TEST_CASE("row access, slicing and gathering") {
    Tensor t({3, 2}, std::vector<double>{1, 2, 3, 4, 5, 6});
    CHECK(t.row(1)[0] == 3);
    const Tensor s = t.slice_rows(1, 3);
    CHECK(s.shape() == Shape{2, 2});
    CHECK(s[3] == 6);
    const std::vector<std::size_t> rows{2, 0};
    const Tensor g = t.gather_rows(rows);
    CHECK(g[0] == 5);
    CHECK(g[2] == 1);
    CHECK(max_abs_diff(t, t) == 0.0);
}

TEST_CASE("rng is deterministic and derive_seed separates streams") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    std::set<std::uint64_t> seeds;
    for (std::uint64_t s = 0; s < 1000; ++s) seeds.insert(derive_seed(7, s));
    CHECK(seeds.size() == 1000);
    CHECK(derive_seed(1, 2) != derive_seed(2, 1));
}

TEST_CASE("rng distributions have the documented ranges and moments") {
    Rng rng(3);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sq / n - 1.0) < 0.02);
    for (int i = 0; i < 1000; ++i) {
        const auto k = rng.uniform_int(3, 5);
        CHECK((k >= 3 && k <= 5));
    }
}
