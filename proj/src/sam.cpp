#include "tlv/sam.hpp"

#include "tlv/errors.hpp"
#include "tlv/rng.hpp"

namespace tlv {

SamParams init_sam(int sensors, int dim, std::uint64_t seed, std::vector<Parameter>& registry) {
    if (sensors < 2) throw ConfigError("init_sam: need at least two sensors");
    if (dim < 1) throw ConfigError("init_sam: dim must be positive");
    SamParams p;
    p.sensors = sensors;
    CounterRng rw = CounterRng::stream(seed, "sam.w_r");
    Tensor w({sensors, dim});
    for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = rw.next_gaussian(0.0, 0.02);
    CounterRng rc = CounterRng::stream(seed, "sam.centroids");
    Tensor c({sensors, dim});
    for (std::int64_t i = 0; i < c.numel(); ++i) c[i] = rc.next_gaussian(0.0, 0.02);
    p.w_r = make_leaf(std::move(w));
    p.centroids = make_leaf(std::move(c));
    registry.push_back(Parameter{"sam.w_r", p.w_r, true});
    registry.push_back(Parameter{"sam.centroids", p.centroids, true});
    return p;
}

Var route(const Var& h, const SamParams& p) {
    require_rank(h->val, 1, "route");
    const int d = h->val.dim(0);
    if (p.w_r->val.dim(1) != d) throw ShapeError("route: feature width does not match W_r");
    Var scores = ops::matmul_nt(ops::reshape(h, {1, d}), p.w_r); // [1,S]
    return ops::reshape(ops::softmax_rows(scores, 1.0), {p.sensors});
}

Var modulate(const Var& h, const Var& r, int sensor) {
    require_rank(r->val, 1, "modulate routing");
    if (sensor < 0 || sensor >= r->val.dim(0)) {
        throw DomainError("modulate: sensor id " + std::to_string(sensor) + " out of range");
    }
    Var rs = ops::pick(r, sensor);
    return ops::add(h, ops::mul_scalar_var(h, rs));
}

Var modulate_auto(const Var& h, const SamParams& p) {
    Var r = route(h, p);
    int best = 0;
    for (int s = 1; s < p.sensors; ++s) {
        if (r->val[s] > r->val[best]) best = s;
    }
    return modulate(h, r, best);
}

Var sensor_posterior(const Var& h, const SamParams& p, double tau) {
    require_rank(h->val, 1, "sensor_posterior");
    const int d = h->val.dim(0);
    if (p.centroids->val.dim(1) != d) throw ShapeError("sensor_posterior: feature width does not match centroids");
    Var hn = ops::l2_normalize_rows(ops::reshape(h, {1, d}));
    Var cn = ops::l2_normalize_rows(p.centroids);
    Var sims = ops::matmul_nt(hn, cn); // [1,S]
    return ops::reshape(ops::softmax_rows(sims, tau), {p.sensors});
}

Var decoupling_loss(const std::vector<Var>& feats, const std::vector<int>& sensors,
                    const SamParams& p, double tau, double grl_lambda) {
    if (feats.empty()) throw DomainError("decoupling_loss: empty batch");
    if (feats.size() != sensors.size()) throw ShapeError("decoupling_loss: one sensor id per feature");
    for (int s : sensors) {
        if (s < 0 || s >= p.sensors) throw DomainError("decoupling_loss: sensor id out of range");
    }
    Var H = ops::grad_reverse(ops::vstack(feats), grl_lambda); // [N,d]
    Var hn = ops::l2_normalize_rows(H);
    Var cn = ops::l2_normalize_rows(p.centroids);
    Var sims = ops::matmul_nt(hn, cn); // [N,S]
    Var logp = ops::log_softmax_rows(sims, tau);
    return ops::scale(ops::mean_all(ops::gather_rows(logp, sensors)), -1.0);
}

} // namespace tlv
