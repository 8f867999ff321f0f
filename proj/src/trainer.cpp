#include "tlv/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tlv/errors.hpp"
#include "tlv/numerics.hpp"
#include "tlv/rng.hpp"

namespace tlv {

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& records) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw LoadError("metrics: cannot write " + path.string());
    out << "epoch,step,l_total,l_tv,l_tl,l_vl,l_dl,grad_norm,wall_ms\n";
    char buf[256];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof(buf), "%d,%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch,
                      static_cast<long long>(r.step), r.l_total, r.l_tv, r.l_tl, r.l_vl, r.l_dl,
                      r.grad_norm, r.wall_ms);
        out << buf;
    }
    if (!out) throw LoadError("metrics: short write to " + path.string());
}

std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("metrics: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "epoch,step,l_total,l_tv,l_tl,l_vl,l_dl,grad_norm,wall_ms") {
        throw LoadError("metrics: unexpected header in " + path.string());
    }
    std::vector<MetricsRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        MetricsRecord r;
        long long step = 0;
        const int got = std::sscanf(line.c_str(), "%d,%lld,%lg,%lg,%lg,%lg,%lg,%lg,%lg", &r.epoch, &step,
                                    &r.l_total, &r.l_tv, &r.l_tl, &r.l_vl, &r.l_dl, &r.grad_norm,
                                    &r.wall_ms);
        if (got != 9) throw LoadError("metrics: malformed row '" + line + "'");
        r.step = step;
        out.push_back(r);
    }
    return out;
}

std::vector<double> per_epoch_mean_total(const std::vector<MetricsRecord>& records) {
    if (records.empty()) throw DomainError("per_epoch_mean_total: no records");
    std::vector<double> sums, counts;
    for (const auto& r : records) {
        if (r.epoch < 0) throw DomainError("per_epoch_mean_total: negative epoch");
        if (static_cast<std::size_t>(r.epoch) >= sums.size()) {
            sums.resize(static_cast<std::size_t>(r.epoch) + 1, 0.0);
            counts.resize(static_cast<std::size_t>(r.epoch) + 1, 0.0);
        }
        sums[static_cast<std::size_t>(r.epoch)] += r.l_total;
        counts[static_cast<std::size_t>(r.epoch)] += 1.0;
    }
    std::vector<double> means;
    for (std::size_t e = 0; e < sums.size(); ++e) {
        if (counts[e] == 0.0) throw DomainError("per_epoch_mean_total: epoch gap in metrics");
        means.push_back(sums[e] / counts[e]);
    }
    return means;
}

std::vector<double> moving_average(const std::vector<double>& xs, int window) {
    if (window < 1) throw ConfigError("moving_average: window must be >= 1");
    std::vector<double> out;
    out.reserve(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const std::size_t lo = i + 1 >= static_cast<std::size_t>(window) ? i + 1 - window : 0;
        double s = 0.0;
        for (std::size_t j = lo; j <= i; ++j) s += xs[j];
        out.push_back(s / static_cast<double>(i - lo + 1));
    }
    return out;
}

bool final_half_non_increasing(const std::vector<double>& ma) {
    if (ma.size() < 2) return true;
    const std::size_t start = ma.size() / 2;
    for (std::size_t i = start; i < ma.size(); ++i) {
        if (i == 0) continue;
        if (ma[i] > ma[i - 1] + 1e-12) return false;
    }
    return true;
}

AdamW::AdamW(double lr, double beta1, double beta2, double eps, double weight_decay)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), wd_(weight_decay) {
    if (!(lr > 0.0)) throw ConfigError("adamw: lr must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("adamw: betas must lie in [0, 1)");
    }
    if (!(eps > 0.0)) throw ConfigError("adamw: eps must be positive");
    if (weight_decay < 0.0) throw ConfigError("adamw: weight_decay must be >= 0");
}

void AdamW::ensure(const std::vector<Parameter>& params) {
    if (!m_.empty()) {
        if (m_.size() != params.size()) throw ShapeError("adamw: parameter list changed size");
        return;
    }
    for (const auto& p : params) {
        m_.push_back(Tensor::zeros(p.node->val.shape()));
        v_.push_back(Tensor::zeros(p.node->val.shape()));
    }
}

void AdamW::step(std::vector<Parameter>& params) {
    ensure(params);
    ++t_;
    const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        if (!p.trainable) continue;
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (std::int64_t j = 0; j < p.node->val.numel(); ++j) {
            const double g = p.node->grad[j];
            m[j] = b1_ * m[j] + (1.0 - b1_) * g;
            v[j] = b2_ * v[j] + (1.0 - b2_) * g * g;
            const double mh = m[j] / bc1;
            const double vh = v[j] / bc2;
            p.node->val[j] -= lr_ * (mh / (std::sqrt(vh) + eps_) + wd_ * p.node->val[j]);
        }
    }
}

void AdamW::restore(std::int64_t t, std::vector<Tensor> m, std::vector<Tensor> v) {
    if (t < 0 || m.size() != v.size()) throw LoadError("adamw: inconsistent optimizer state");
    t_ = t;
    m_ = std::move(m);
    v_ = std::move(v);
}

std::vector<int> training_indices(const Dataset& data, int sensor_filter) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < data.train.size(); ++i) {
        if (sensor_filter == -1 || data.train[i].sensor == sensor_filter) {
            idx.push_back(static_cast<int>(i));
        }
    }
    if (idx.empty()) {
        throw DomainError("training_indices: no training samples under sensor filter " +
                          std::to_string(sensor_filter));
    }
    return idx;
}

TrainSession::TrainSession(const RunConfig& cfg)
    : cfg_(cfg),
      model_(cfg.model, cfg.train.seed),
      opt_(cfg.train.lr, cfg.train.beta1, cfg.train.beta2, cfg.train.adam_eps, cfg.train.weight_decay) {
    cfg_.train.validate();
}

TrainSession::TrainSession(const Checkpoint& ckpt)
    : TrainSession([&] {
          EchoState st;
          try {
              st = parse_config_echo(ckpt.config_echo);
          } catch (const ConfigError& e) {
              throw LoadError(std::string("checkpoint config echo: ") + e.what());
          }
          return st.cfg;
      }()) {
    const EchoState st = parse_config_echo(ckpt.config_echo);
    epoch_ = st.epoch;
    step_ = st.step;
    auto& params = model_.params();
    if (ckpt.tensors.size() != params.size() * 3) {
        throw LoadError("checkpoint: tensor count does not match the configured model");
    }
    std::vector<Tensor> m, v;
    for (const auto& p : params) {
        const Tensor* val = ckpt.find(p.name);
        const Tensor* tm = ckpt.find("adam.m." + p.name);
        const Tensor* tv = ckpt.find("adam.v." + p.name);
        if (!val || !tm || !tv) throw LoadError("checkpoint: missing tensor for " + p.name);
        if (!val->same_shape(p.node->val) || !tm->same_shape(p.node->val) || !tv->same_shape(p.node->val)) {
            throw LoadError("checkpoint: shape mismatch for " + p.name);
        }
        p.node->val = *val;
        m.push_back(*tm);
        v.push_back(*tv);
    }
    opt_.restore(st.adam_t, std::move(m), std::move(v));
}

MetricsRecord TrainSession::train_step(const std::vector<const Triplet*>& batch, int epoch_label) {
    const auto t0 = std::chrono::steady_clock::now();
    auto& params = model_.params();
    zero_grads(params);
    ModelState::Losses ls = model_.batch_loss(batch);
    backward(ls.total);
    MetricsRecord rec;
    rec.epoch = epoch_label;
    rec.l_total = ls.total->val[0];
    rec.l_tv = ls.tv->val[0];
    rec.l_tl = ls.tl->val[0];
    rec.l_vl = ls.vl->val[0];
    rec.l_dl = ls.dl->val[0];
    const double pre_clip = global_grad_norm(params);
    if (!std::isfinite(rec.l_total) || !std::isfinite(rec.l_tv) || !std::isfinite(rec.l_tl) ||
        !std::isfinite(rec.l_vl) || !std::isfinite(rec.l_dl) || !std::isfinite(pre_clip)) {
        std::ostringstream os;
        os << "training aborted: non-finite loss at epoch " << epoch_label << " step " << (step_ + 1)
           << " (l_total=" << rec.l_total << " l_tv=" << rec.l_tv << " l_tl=" << rec.l_tl
           << " l_vl=" << rec.l_vl << " l_dl=" << rec.l_dl << " grad_norm=" << pre_clip << ")";
        throw TrainAbortError(os.str());
    }
    rec.grad_norm = clip_grad_norm(params, cfg_.train.clip_norm);
    opt_.step(params);
    ++step_;
    rec.step = step_;
    if (deterministic_mode()) {
        rec.wall_ms = 0.0;
    } else {
        rec.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
    return rec;
}

std::vector<MetricsRecord> TrainSession::run(const Dataset& data, int until_epoch) {
    const ModelConfig& mc = cfg_.model;
    if (data.cfg.image_size != mc.image_size || data.cfg.channels != mc.channels ||
        data.cfg.vocab_size() != mc.vocab_size || data.cfg.sensors != mc.sensors) {
        throw ConfigError("train: model configuration does not match the dataset extents");
    }
    const std::vector<int> base_idx = training_indices(data, cfg_.train.sensor_filter);
    const int B = cfg_.train.batch_size;
    if (static_cast<int>(base_idx.size()) < B) {
        throw DomainError("train: batch_size " + std::to_string(B) + " exceeds usable training samples " +
                          std::to_string(base_idx.size()));
    }
    int stop = cfg_.train.epochs;
    if (until_epoch >= 0 && until_epoch < stop) stop = until_epoch;
    std::vector<MetricsRecord> metrics;
    for (int e = epoch_; e < stop; ++e) {
        if (cfg_.train.grl_warmup_epochs > 0) {
            const double ramp =
                std::min(1.0, static_cast<double>(e) / cfg_.train.grl_warmup_epochs);
            model_.set_grl_lambda(cfg_.model.grl_lambda * ramp);
        }
        std::vector<int> idx = base_idx;
        CounterRng shuffle = CounterRng::stream(cfg_.train.seed, "shuffle", static_cast<std::uint64_t>(e));
        shuffle.shuffle(idx);
        const int nb = static_cast<int>(idx.size()) / B;
        for (int b = 0; b < nb; ++b) {
            std::vector<const Triplet*> batch;
            batch.reserve(static_cast<std::size_t>(B));
            for (int j = 0; j < B; ++j) {
                batch.push_back(&data.train[static_cast<std::size_t>(idx[static_cast<std::size_t>(b * B + j)])]);
            }
            metrics.push_back(train_step(batch, e));
        }
        epoch_ = e + 1;
    }
    return metrics;
}

Checkpoint TrainSession::snapshot() const {
    Checkpoint ckpt;
    ckpt.config_echo = serialize_config_with_state(cfg_, epoch_, step_, opt_.t());
    const auto& params = model_.params();
    for (const auto& p : params) ckpt.tensors.emplace_back(p.name, p.node->val);
    const auto& m = opt_.m_state();
    const auto& v = opt_.v_state();
    for (std::size_t i = 0; i < params.size(); ++i) {
        ckpt.tensors.emplace_back("adam.m." + params[i].name,
                                  i < m.size() ? m[i] : Tensor::zeros(params[i].node->val.shape()));
        ckpt.tensors.emplace_back("adam.v." + params[i].name,
                                  i < v.size() ? v[i] : Tensor::zeros(params[i].node->val.shape()));
    }
    return ckpt;
}

} // namespace tlv
