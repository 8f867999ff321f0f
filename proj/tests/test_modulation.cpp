#include <doctest.h>

#include <cmath>
#include <vector>

#include "tlv/autograd.hpp"
#include "tlv/errors.hpp"
#include "tlv/rng.hpp"
#include "tlv/sam.hpp"

using namespace tlv;

namespace {

SamParams manual_sam(Tensor w_r, Tensor centroids) {
    SamParams p;
    p.sensors = w_r.dim(0);
    p.w_r = make_leaf(std::move(w_r));
    p.centroids = make_leaf(std::move(centroids));
    return p;
}

} // namespace

TEST_CASE("routing weights form a distribution") {
    std::vector<Parameter> reg;
    const SamParams p = init_sam(3, 6, 2, reg);
    CHECK(reg.size() == 2);
    CounterRng rng = CounterRng::stream(1, "feat");
    Tensor h({6});
    for (int i = 0; i < 6; ++i) h[i] = rng.next_gaussian(0.0, 1.0);
    const Var r = route(make_const(h), p);
    double z = 0.0;
    for (int s = 0; s < 3; ++s) {
        CHECK(r->val[s] > 0.0);
        z += r->val[s];
    }
    CHECK(z == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("modulation rescales by the routed weight") {
    const Var h = make_const(Tensor::vec({3.0, 4.0}));
    const Var r = make_const(Tensor::vec({0.25, 0.75}));
    const Var m = modulate(h, r, 0);
    CHECK(m->val[0] == doctest::Approx(3.75).epsilon(1e-15));
    CHECK(m->val[1] == doctest::Approx(5.0).epsilon(1e-15));
    const double norm = std::sqrt(m->val[0] * m->val[0] + m->val[1] * m->val[1]);
    CHECK(norm == doctest::Approx(6.25).epsilon(1e-12));

    // zero routing weight leaves the feature untouched
    const Var id = modulate(h, make_const(Tensor::vec({0.0, 1.0})), 0);
    CHECK(id->val[0] == 3.0);
    CHECK(id->val[1] == 4.0);

    CHECK_THROWS_AS(modulate(h, r, 2), DomainError);
}

TEST_CASE("sensor posterior over cosine similarities") {
    const SamParams p = manual_sam(Tensor({2, 2}, {1.0, 0.0, 0.0, 1.0}),
                                   Tensor({2, 2}, {1.0, 0.0, 0.0, 1.0}));
    const Var post = sensor_posterior(make_const(Tensor::vec({1.0, 0.0})), p, 0.05);
    // cosines are [1, 0]; at tau = 0.05 the softmax gives 1 / (1 + e^-20)
    const double want = 1.0 / (1.0 + std::exp(-20.0));
    CHECK(post->val[0] == doctest::Approx(want).epsilon(1e-14));
    CHECK(post->val[1] == doctest::Approx(1.0 - want).epsilon(1e-10));
}

TEST_CASE("uniform posterior gives a log-cardinality decoupling loss") {
    // four orthogonal centroids, feature orthogonal to all of them
    Tensor c({4, 8});
    for (int s = 0; s < 4; ++s) c.at(s, s) = 1.0;
    const SamParams p = manual_sam(Tensor::zeros({4, 8}), std::move(c));
    Tensor f({8});
    f[7] = 1.0;
    const Var loss = decoupling_loss({make_const(f)}, {2}, p, 0.05, 1.0);
    CHECK(loss->val[0] == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("decoupling loss reverses feature gradients but not centroid gradients") {
    CounterRng rng = CounterRng::stream(3, "dl");
    Tensor f({6}), c({3, 6});
    for (std::int64_t i = 0; i < f.numel(); ++i) f[i] = rng.next_gaussian(0.0, 1.0);
    for (std::int64_t i = 0; i < c.numel(); ++i) c[i] = rng.next_gaussian(0.0, 1.0);

    const double lambda = 0.7;
    std::vector<Parameter> params;
    params.push_back({"f", make_leaf(f), true});
    params.push_back({"c", make_leaf(c), true});
    SamParams p;
    p.sensors = 3;
    p.w_r = make_const(Tensor::zeros({3, 6}));
    p.centroids = params[1].node;

    zero_grads(params);
    backward(decoupling_loss({params[0].node}, {1}, p, 0.1, lambda));
    const Tensor g_f = params[0].node->grad;
    const Tensor g_c = params[1].node->grad;

    // finite differences of the forward loss (the gate is an identity there)
    const double eps = 1e-6;
    auto loss_at = [&](const Tensor& fv, const Tensor& cv) {
        SamParams q;
        q.sensors = 3;
        q.w_r = make_const(Tensor::zeros({3, 6}));
        q.centroids = make_const(cv);
        return decoupling_loss({make_const(fv)}, {1}, q, 0.1, lambda)->val[0];
    };
    for (int i = 0; i < 6; ++i) {
        Tensor up = f, dn = f;
        up[i] += eps;
        dn[i] -= eps;
        const double fd = (loss_at(up, c) - loss_at(dn, c)) / (2 * eps);
        CHECK(std::abs(g_f[i] - (-lambda * fd)) < 1e-6 * std::max(1.0, std::abs(fd)));
    }
    for (int i = 0; i < 6; ++i) {
        Tensor up = c, dn = c;
        up[i] += eps;
        dn[i] -= eps;
        const double fd = (loss_at(f, up) - loss_at(f, dn)) / (2 * eps);
        CHECK(std::abs(g_c[i] - fd) < 1e-6 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("decoupling loss validates its batch") {
    std::vector<Parameter> reg;
    const SamParams p = init_sam(2, 4, 1, reg);
    CHECK_THROWS_AS(decoupling_loss({}, {}, p, 0.05, 1.0), DomainError);
    const Var f = make_const(Tensor::vec({1.0, 0.0, 0.0, 0.0}));
    CHECK_THROWS_AS(decoupling_loss({f}, {2}, p, 0.05, 1.0), DomainError);
    CHECK_THROWS_AS(decoupling_loss({f}, {0, 1}, p, 0.05, 1.0), ShapeError);
}
