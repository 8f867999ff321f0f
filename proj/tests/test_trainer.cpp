#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <vector>

#include "tlv/config.hpp"
#include "tlv/errors.hpp"
#include "tlv/numerics.hpp"
#include "tlv/synthdata.hpp"
#include "tlv/trainer.hpp"

using namespace tlv;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_cfg() {
    RunConfig cfg;
    cfg.data.classes = 2;
    cfg.data.sensors = 2;
    cfg.data.samples_per_cell = 10;
    cfg.data.image_size = 8;
    cfg.data.seed = 3;
    cfg.model.dim = 8;
    cfg.model.heads = 2;
    cfg.model.t_layers = 2;
    cfg.model.v_layers = 2;
    cfg.model.l_layers = 2;
    cfg.model.patch_size = 4;
    cfg.model.uba_levels = 1;
    cfg.model.uba_rank = 2;
    cfg.train.epochs = 1;
    cfg.train.batch_size = 16;
    cfg.train.seed = 5;
    bind_model_to_data(cfg.model, cfg.data);
    return cfg;
}

} // namespace

TEST_CASE("adamw matches the update rule by hand") {
    const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8, wd = 0.01;
    std::vector<Parameter> params;
    params.push_back({"w", make_leaf(Tensor::vec({1.0, 2.0})), true});
    AdamW opt(lr, b1, b2, eps, wd);

    double theta[2] = {1.0, 2.0};
    double m[2] = {0.0, 0.0}, v[2] = {0.0, 0.0};
    const double grads[2][2] = {{0.5, -1.0}, {-0.25, 0.75}};
    for (int t = 1; t <= 2; ++t) {
        params[0].node->grad = Tensor::vec({grads[t - 1][0], grads[t - 1][1]});
        opt.step(params);
        for (int i = 0; i < 2; ++i) {
            const double g = grads[t - 1][i];
            m[i] = b1 * m[i] + (1 - b1) * g;
            v[i] = b2 * v[i] + (1 - b2) * g * g;
            const double mh = m[i] / (1 - std::pow(b1, t));
            const double vh = v[i] / (1 - std::pow(b2, t));
            theta[i] -= lr * (mh / (std::sqrt(vh) + eps) + wd * theta[i]);
            CHECK(params[0].node->val[i] == doctest::Approx(theta[i]).epsilon(1e-15));
        }
        CHECK(opt.t() == t);
    }
}

TEST_CASE("weight decay is decoupled from the gradient path") {
    std::vector<Parameter> p1, p2;
    p1.push_back({"w", make_leaf(Tensor::vec({2.0})), true});
    p2.push_back({"w", make_leaf(Tensor::vec({2.0})), true});
    AdamW with(0.1, 0.9, 0.999, 1e-8, 0.5);
    AdamW without(0.1, 0.9, 0.999, 1e-8, 0.0);
    p1[0].node->grad = Tensor::vec({0.3});
    p2[0].node->grad = Tensor::vec({0.3});
    with.step(p1);
    without.step(p2);
    // the decayed run moves further down by exactly lr*wd*theta
    CHECK(p1[0].node->val[0] ==
          doctest::Approx(p2[0].node->val[0] - 0.1 * 0.5 * 2.0).epsilon(1e-12));
}

TEST_CASE("gradient clipping caps the global norm") {
    std::vector<Parameter> params;
    params.push_back({"a", make_leaf(Tensor::vec({0.0, 0.0})), true});
    params.push_back({"b", make_leaf(Tensor::vec({0.0})), true});
    params[0].node->grad = Tensor::vec({3.0, 4.0});
    params[1].node->grad = Tensor::vec({12.0});
    // global norm = sqrt(9 + 16 + 144) = 13
    CHECK(global_grad_norm(params) == doctest::Approx(13.0).epsilon(1e-12));
    const double pre = clip_grad_norm(params, 1.0);
    CHECK(pre == doctest::Approx(13.0).epsilon(1e-12));
    CHECK(global_grad_norm(params) == doctest::Approx(1.0).epsilon(1e-12));
    // already under the cap: untouched
    const double again = clip_grad_norm(params, 5.0);
    CHECK(again == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(global_grad_norm(params) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sensor filter selects training rows") {
    const RunConfig cfg = tiny_cfg();
    const Dataset data = generate_dataset(cfg.data);
    CHECK(training_indices(data, -1).size() == 32);
    CHECK(training_indices(data, 0).size() == 16);
    CHECK(training_indices(data, 1).size() == 16);
    for (int i : training_indices(data, 1)) CHECK(data.train[static_cast<std::size_t>(i)].sensor == 1);
}

TEST_CASE("a session walks epochs in fixed-size batches") {
    const RunConfig cfg = tiny_cfg();
    const Dataset data = generate_dataset(cfg.data);
    TrainSession session(cfg);
    const auto metrics = session.run(data);
    // 32 usable rows / batch 16 = 2 steps
    REQUIRE(metrics.size() == 2);
    CHECK(metrics[0].epoch == 0);
    CHECK(metrics[0].step == 1);
    CHECK(metrics[1].step == 2);
    CHECK(session.epoch() == 1);
    CHECK(session.step() == 2);
    for (const auto& r : metrics) {
        CHECK(std::isfinite(r.l_total));
        CHECK(r.l_total > 0.0);
        CHECK(r.grad_norm >= 0.0);
        if (deterministic_mode()) CHECK(r.wall_ms == 0.0);
    }
    // l_total composes the pair terms and the weighted decoupling term
    const auto& r = metrics[0];
    CHECK(r.l_total ==
          doctest::Approx(r.l_tv + r.l_tl + r.l_vl + cfg.model.lambda_dl * r.l_dl).epsilon(1e-12));

    // second run with the same seed reproduces every field
    TrainSession twin(cfg);
    const auto metrics2 = twin.run(data);
    REQUIRE(metrics2.size() == metrics.size());
    for (std::size_t i = 0; i < metrics.size(); ++i) {
        CHECK(metrics[i].l_total == metrics2[i].l_total);
        CHECK(metrics[i].grad_norm == metrics2[i].grad_norm);
    }
}

TEST_CASE("oversized batches are rejected") {
    RunConfig cfg = tiny_cfg();
    cfg.train.batch_size = 64;
    const Dataset data = generate_dataset(cfg.data);
    TrainSession session(cfg);
    CHECK_THROWS_AS(session.run(data), DomainError);
}

TEST_CASE("non-finite losses abort with diagnostics") {
    const RunConfig cfg = tiny_cfg();
    const Dataset data = generate_dataset(cfg.data);
    TrainSession session(cfg);
    session.model().params()[0].node->val[0] = std::numeric_limits<double>::quiet_NaN();
    std::vector<const Triplet*> batch;
    for (int i = 0; i < cfg.train.batch_size; ++i) batch.push_back(&data.train[static_cast<std::size_t>(i)]);
    CHECK_THROWS_AS(session.train_step(batch, 0), TrainAbortError);
}

TEST_CASE("interrupted runs resume exactly") {
    RunConfig cfg = tiny_cfg();
    cfg.train.epochs = 4;
    const Dataset data = generate_dataset(cfg.data);

    TrainSession full(cfg);
    const auto all = full.run(data);

    TrainSession head(cfg);
    const auto first = head.run(data, 2);
    const Checkpoint snap = head.snapshot();
    TrainSession tail(snap);
    CHECK(tail.epoch() == 2);
    const auto rest = tail.run(data);

    REQUIRE(first.size() + rest.size() == all.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
        const MetricsRecord& got = i < first.size() ? first[i] : rest[i - first.size()];
        CHECK(got.epoch == all[i].epoch);
        CHECK(got.step == all[i].step);
        CHECK(got.l_total == all[i].l_total);
        CHECK(got.grad_norm == all[i].grad_norm);
    }
    const auto& pa = full.model().params();
    const auto& pb = tail.model().params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        for (std::int64_t j = 0; j < pa[i].node->val.numel(); ++j) {
            CHECK(pa[i].node->val[j] == pb[i].node->val[j]);
        }
    }
}

TEST_CASE("reversal warmup starts as a zero-reversal run, then departs") {
    RunConfig warm = tiny_cfg();
    warm.model.grl_lambda = 0.7;
    warm.train.grl_warmup_epochs = 1;
    warm.train.epochs = 2;
    RunConfig off = warm;
    off.model.grl_lambda = 0.0;
    off.train.grl_warmup_epochs = 0;
    const Dataset data = generate_dataset(warm.data);

    TrainSession sa(warm), sb(off);
    sa.run(data, 1);
    sb.run(data, 1);
    const auto& pa = sa.model().params();
    const auto& pb = sb.model().params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        for (std::int64_t j = 0; j < pa[i].node->val.numel(); ++j) {
            CHECK(pa[i].node->val[j] == pb[i].node->val[j]);
        }
    }

    sa.run(data);
    sb.run(data);
    bool diverged = false;
    for (std::size_t i = 0; i < pa.size() && !diverged; ++i) {
        for (std::int64_t j = 0; j < pa[i].node->val.numel(); ++j) {
            if (pa[i].node->val[j] != pb[i].node->val[j]) {
                diverged = true;
                break;
            }
        }
    }
    CHECK(diverged);
}

TEST_CASE("metrics csv round-trips at full precision") {
    std::vector<MetricsRecord> rows(2);
    rows[0] = {0, 1, 1.0 / 3.0, 0.1, 0.2, 0.3, 0.05, 0.987654321012345678, 12.5};
    rows[1] = {1, 2, 2.0 / 7.0, 0.2, 0.3, 0.4, 0.06, 1.5, 13.25};
    const fs::path path = fs::temp_directory_path() / "tlv_metrics_test.csv";
    write_metrics_csv(path, rows);
    const auto back = read_metrics_csv(path);
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(back[i].epoch == rows[i].epoch);
        CHECK(back[i].step == rows[i].step);
        CHECK(back[i].l_total == rows[i].l_total);
        CHECK(back[i].l_dl == rows[i].l_dl);
        CHECK(back[i].grad_norm == rows[i].grad_norm);
        CHECK(back[i].wall_ms == rows[i].wall_ms);
    }
    fs::remove(path);
}

TEST_CASE("epoch means and moving averages") {
    std::vector<MetricsRecord> rows;
    for (int e = 0; e < 3; ++e) {
        for (int s = 0; s < 2; ++s) {
            MetricsRecord r;
            r.epoch = e;
            r.l_total = e + s * 0.5;
            rows.push_back(r);
        }
    }
    const auto means = per_epoch_mean_total(rows);
    REQUIRE(means.size() == 3);
    CHECK(means[0] == doctest::Approx(0.25));
    CHECK(means[1] == doctest::Approx(1.25));
    CHECK(means[2] == doctest::Approx(2.25));

    const auto ma = moving_average({4, 3, 2, 1}, 2);
    REQUIRE(ma.size() == 4);
    CHECK(ma[0] == doctest::Approx(4.0));
    CHECK(ma[1] == doctest::Approx(3.5));
    CHECK(ma[3] == doctest::Approx(1.5));

    CHECK(final_half_non_increasing({5, 4, 3, 2, 2, 1}));
    CHECK_FALSE(final_half_non_increasing({5, 4, 3, 2, 1, 2}));
    // wobble in the first half is allowed
    CHECK(final_half_non_increasing({5, 7, 3, 2, 2, 2}));
}
