#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tlv/checkpoint.hpp"
#include "tlv/config.hpp"
#include "tlv/model.hpp"

namespace tlv {

struct MetricsRecord {
    int epoch = 0;
    std::int64_t step = 0;
    double l_total = 0, l_tv = 0, l_tl = 0, l_vl = 0, l_dl = 0;
    double grad_norm = 0;
    double wall_ms = 0;
};

// header: epoch,step,l_total,l_tv,l_tl,l_vl,l_dl,grad_norm,wall_ms
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& records);
std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path);

std::vector<double> per_epoch_mean_total(const std::vector<MetricsRecord>& records);
std::vector<double> moving_average(const std::vector<double>& xs, int window);
// every consecutive pair inside the final half of the moving average is
// non-increasing (up to a 1e-12 slack)
bool final_half_non_increasing(const std::vector<double>& ma);

// Adam with decoupled weight decay:
//   theta -= lr * (mhat / (sqrt(vhat) + eps) + weight_decay * theta)
class AdamW {
public:
    AdamW(double lr, double beta1, double beta2, double eps, double weight_decay);

    void step(std::vector<Parameter>& params);

    std::int64_t t() const { return t_; }
    const std::vector<Tensor>& m_state() const { return m_; }
    const std::vector<Tensor>& v_state() const { return v_; }
    void restore(std::int64_t t, std::vector<Tensor> m, std::vector<Tensor> v);

private:
    void ensure(const std::vector<Parameter>& params);

    double lr_, b1_, b2_, eps_, wd_;
    std::int64_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

// One training run: deterministic per-epoch shuffles keyed by (seed, epoch),
// fixed-size batches with the last partial batch dropped, gradient clipping
// at clip_norm, abort on any non-finite loss. A session built from a
// checkpoint continues exactly where the saved run stopped.
class TrainSession {
public:
    explicit TrainSession(const RunConfig& cfg);
    explicit TrainSession(const Checkpoint& ckpt);

    const RunConfig& config() const { return cfg_; }
    ModelState& model() { return model_; }
    int epoch() const { return epoch_; }
    std::int64_t step() const { return step_; }

    MetricsRecord train_step(const std::vector<const Triplet*>& batch, int epoch_label);
    // trains from the current epoch through cfg.train.epochs - 1; a
    // non-negative until_epoch stops earlier (exclusive), emulating an
    // interrupted run for resume tests
    std::vector<MetricsRecord> run(const Dataset& data, int until_epoch = -1);

    Checkpoint snapshot() const;

private:
    RunConfig cfg_;
    ModelState model_;
    AdamW opt_;
    int epoch_ = 0;
    std::int64_t step_ = 0;
};

// indices of the training split visible under the sensor filter (-1 = all)
std::vector<int> training_indices(const Dataset& data, int sensor_filter);

} // namespace tlv
