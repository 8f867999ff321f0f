#include <doctest.h>

#include <cmath>
#include <vector>

#include "tlv/autograd.hpp"
#include "tlv/errors.hpp"
#include "tlv/numerics.hpp"
#include "tlv/objective.hpp"
#include "tlv/rng.hpp"

using namespace tlv;

namespace {

Tensor unit_rows(int n, int d, std::uint64_t seed) {
    CounterRng rng = CounterRng::stream(seed, "unit_rows");
    Tensor t({n, d});
    for (int i = 0; i < n; ++i) {
        double norm = 0.0;
        for (int j = 0; j < d; ++j) {
            t.at(i, j) = rng.next_gaussian(0.0, 1.0);
            norm += t.at(i, j) * t.at(i, j);
        }
        norm = std::sqrt(norm);
        for (int j = 0; j < d; ++j) t.at(i, j) /= norm;
    }
    return t;
}

// direct translation of the symmetric objective definition
double naive_infonce(const Tensor& zx, const Tensor& zy, double tau) {
    const int n = zx.dim(0), d = zx.dim(1);
    auto dot = [&](const Tensor& a, int i, const Tensor& b, int j) {
        double s = 0.0;
        for (int k = 0; k < d; ++k) s += a.at(i, k) * b.at(j, k);
        return s;
    };
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        double zrow = 0.0, zcol = 0.0;
        for (int j = 0; j < n; ++j) {
            zrow += std::exp(dot(zx, i, zy, j) / tau);
            zcol += std::exp(dot(zx, j, zy, i) / tau);
        }
        total += std::log(std::exp(dot(zx, i, zy, i) / tau) / zrow);
        total += std::log(std::exp(dot(zx, i, zy, i) / tau) / zcol);
    }
    return -total / (2.0 * n);
}

} // namespace

TEST_CASE("two-pair identity value") {
    const Tensor eye({2, 2}, {1.0, 0.0, 0.0, 1.0});
    const double loss = pair_infonce(make_const(eye), make_const(eye), 1.0)->val[0];
    CHECK(loss == doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-14));
}

TEST_CASE("single pair scores exactly zero") {
    const Tensor one({1, 4}, {1.0, 0.0, 0.0, 0.0});
    CHECK(pair_infonce(make_const(one), make_const(one), 0.05)->val[0] == 0.0);
}

TEST_CASE("matches the naive oracle on random batches") {
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 1 + trial % 16;
        const Tensor zx = unit_rows(n, 8, 100 + static_cast<std::uint64_t>(trial) * 2);
        const Tensor zy = unit_rows(n, 8, 101 + static_cast<std::uint64_t>(trial) * 2);
        const double got = pair_infonce(make_const(zx), make_const(zy), 0.05)->val[0];
        const double want = naive_infonce(zx, zy, 0.05);
        CHECK(std::abs(got - want) <= 1e-10);
    }
}

TEST_CASE("loss is symmetric in its arguments") {
    const Tensor zx = unit_rows(5, 6, 200), zy = unit_rows(5, 6, 201);
    const double a = pair_infonce(make_const(zx), make_const(zy), 0.05)->val[0];
    const double b = pair_infonce(make_const(zy), make_const(zx), 0.05)->val[0];
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("perfect separation drives the loss to the floor") {
    const Tensor zx({2, 2}, {1.0, 0.0, -1.0, 0.0});
    const double loss = pair_infonce(make_const(zx), make_const(zx), 0.05)->val[0];
    CHECK(loss >= 0.0);
    CHECK(loss < 1e-8);
}

TEST_CASE("rows must be unit length") {
    const Tensor bad({2, 2}, {2.0, 0.0, 0.0, 1.0});
    const Tensor good = unit_rows(2, 2, 300);
    CHECK_THROWS_AS(pair_infonce(make_const(bad), make_const(good), 0.05), DomainError);
    CHECK_THROWS_AS(pair_infonce(make_const(good), make_const(bad), 0.05), DomainError);
    CHECK_THROWS_AS(pair_infonce(make_const(good), make_const(unit_rows(3, 2, 301)), 0.05), ShapeError);
    CHECK_THROWS_AS(pair_infonce(make_const(good), make_const(good), 0.0), ConfigError);
}

TEST_CASE("gradient flows through normalization into the loss") {
    CounterRng rng = CounterRng::stream(7, "pre");
    Tensor x({3, 5}), y({3, 5});
    for (std::int64_t i = 0; i < x.numel(); ++i) x[i] = rng.next_gaussian(0.0, 1.0);
    for (std::int64_t i = 0; i < y.numel(); ++i) y[i] = rng.next_gaussian(0.0, 1.0);
    std::vector<Parameter> params;
    params.push_back({"x", make_leaf(x), true});
    params.push_back({"y", make_leaf(y), true});
    const double err = finite_diff_check(
        [&] {
            return pair_infonce(ops::l2_normalize_rows(params[0].node),
                                ops::l2_normalize_rows(params[1].node), 0.1);
        },
        params);
    CHECK(err < 1e-6);
}
