#include <doctest.h>

#include <cmath>
#include <vector>

#include "tlv/autograd.hpp"
#include "tlv/encoders.hpp"
#include "tlv/errors.hpp"
#include "tlv/numerics.hpp"
#include "tlv/rng.hpp"
#include "tlv/uba.hpp"

using namespace tlv;

namespace {

Tensor randn(std::vector<int> shape, std::uint64_t seed) {
    CounterRng rng = CounterRng::stream(seed, "uba_rand");
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.next_gaussian(0.0, 0.5);
    return t;
}

} // namespace

TEST_CASE("scalar adapter chain") {
    UbaLevelParams level;
    level.w_down[0] = make_leaf(Tensor({1, 1}, {2.0}));
    level.w_up[0] = make_leaf(Tensor({1, 1}, {4.0}));
    level.w_sh = make_leaf(Tensor({1, 1}, {3.0}));
    const Var out = uba_apply(make_const(Tensor::vec({1.0})), Modality::tactile, level);
    CHECK(out->val[0] == 25.0); // 1 + 4*3*2*1
}

TEST_CASE("fresh adapters are exact identities") {
    std::vector<Parameter> reg;
    const UbaParams uba = init_uba(2, 4, {8, 8, 6}, 3, reg);
    CHECK(uba.levels.size() == 2);
    // registry: per level 3 downs + 3 ups + 1 shared
    CHECK(reg.size() == 14);

    const Tensor h = randn({3, 8}, 41);
    const Var out = uba_apply(make_const(h), Modality::vision, uba.levels[0]);
    for (std::int64_t i = 0; i < h.numel(); ++i) CHECK(out->val[i] == h[i]);
}

TEST_CASE("adapter gradients check out") {
    UbaLevelParams level;
    std::vector<Parameter> params;
    params.push_back({"down", make_leaf(randn({4, 6}, 42)), true});
    params.push_back({"up", make_leaf(randn({6, 4}, 43)), true});
    params.push_back({"sh", make_leaf(randn({4, 4}, 44)), true});
    level.w_down[2] = params[0].node;
    level.w_up[2] = params[1].node;
    level.w_sh = params[2].node;
    const Tensor h = randn({3, 6}, 45);
    const double err = finite_diff_check(
        [&] { return ops::mean_all(uba_apply(make_const(h), Modality::language, level)); }, params);
    CHECK(err < 1e-6);
}

TEST_CASE("placement binds the deepest layers") {
    const PlacementPlan plan = plan_placement({24, 12, 12}, 12);
    REQUIRE(plan.entries[0].size() == 12);
    REQUIRE(plan.entries[1].size() == 12);
    CHECK(plan.entries[0].front() == std::pair<int, int>{12, 0});
    CHECK(plan.entries[0].back() == std::pair<int, int>{23, 11});
    CHECK(plan.entries[1].front() == std::pair<int, int>{0, 0});
    CHECK(plan.entries[1].back() == std::pair<int, int>{11, 11});
    CHECK(plan.entries[2].front() == std::pair<int, int>{0, 0});

    const PlacementPlan none = plan_placement({4, 4, 2}, 0);
    CHECK(none.entries[0].empty());

    CHECK_THROWS_AS(plan_placement({4, 4, 2}, 3), ConfigError);
    CHECK_THROWS_AS(plan_placement({4, 4, 2}, -1), ConfigError);
}

TEST_CASE("trainable fraction accounting") {
    EncoderConfig t;
    t.modality = Modality::tactile;
    t.num_layers = 3;
    t.dim = 16;
    t.num_heads = 2;
    t.patch_size = 4;
    t.image_size = 8;
    t.channels = 3;
    t.max_seq_len = 8;
    EncoderConfig v = t;
    v.modality = Modality::vision;
    EncoderConfig l;
    l.modality = Modality::language;
    l.num_layers = 2;
    l.dim = 12;
    l.num_heads = 2;
    l.vocab_size = 10;
    l.max_seq_len = 8;

    const int levels = 2, rank = 4, sensors = 3;
    const double got = count_trainable_fraction({t, v, l}, levels, rank, sensors);

    // adapters: per level, down+up per modality plus one shared core
    std::int64_t adapters = 0;
    for (int lv = 0; lv < levels; ++lv) {
        adapters += 2LL * rank * t.dim + 2LL * rank * v.dim + 2LL * rank * l.dim;
        adapters += static_cast<std::int64_t>(rank) * rank;
    }
    // modulator: routing matrix plus centroids over the tactile width
    const std::int64_t sam = 2LL * sensors * t.dim;
    const std::int64_t towers =
        encoder_param_count(t) + encoder_param_count(v) + encoder_param_count(l);
    const double want = static_cast<double>(adapters + sam) /
                        static_cast<double>(towers + adapters + sam);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
}
