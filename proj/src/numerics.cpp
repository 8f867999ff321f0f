#include "tlv/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "tlv/errors.hpp"
#include "tlv/rng.hpp"

namespace tlv {

namespace {
void check_finite(const std::vector<double>& v, const char* where) {
    for (double x : v) {
        if (!std::isfinite(x)) throw DomainError(std::string(where) + ": non-finite input");
    }
}
} // namespace

std::vector<double> softmax_temp(const std::vector<double>& x, double tau) {
    if (x.empty()) throw DomainError("softmax_temp: empty input");
    if (!(tau > 0.0)) throw ConfigError("softmax_temp: temperature must be positive");
    check_finite(x, "softmax_temp");
    double mx = x[0] / tau;
    for (double v : x) mx = std::max(mx, v / tau);
    std::vector<double> out(x.size());
    double z = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = std::exp(x[i] / tau - mx);
        z += out[i];
    }
    for (double& v : out) v /= z;
    return out;
}

std::vector<double> l2_normalize(const std::vector<double>& x, double eps) {
    if (x.empty()) throw DomainError("l2_normalize: empty input");
    check_finite(x, "l2_normalize");
    double n2 = 0.0;
    for (double v : x) n2 += v * v;
    const double nr = std::sqrt(n2);
    if (nr < eps) throw DegenerateInputError("l2_normalize: near-zero norm");
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] / nr;
    return out;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b, double eps) {
    if (a.size() != b.size()) throw ShapeError("cosine_similarity: length mismatch");
    const auto an = l2_normalize(a, eps);
    const auto bn = l2_normalize(b, eps);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += an[i] * bn[i];
    return s;
}

double global_grad_norm(const std::vector<Parameter>& params) {
    double n2 = 0.0;
    for (const auto& p : params) {
        if (!p.trainable) continue;
        for (std::int64_t i = 0; i < p.node->grad.numel(); ++i) {
            const double g = p.node->grad[i];
            n2 += g * g;
        }
    }
    return std::sqrt(n2);
}

double clip_grad_norm(std::vector<Parameter>& params, double max_norm) {
    if (!(max_norm > 0.0)) throw ConfigError("clip_grad_norm: max_norm must be positive");
    const double norm = global_grad_norm(params);
    if (norm > max_norm) {
        const double s = max_norm / norm;
        for (auto& p : params) {
            if (!p.trainable) continue;
            for (std::int64_t i = 0; i < p.node->grad.numel(); ++i) p.node->grad[i] *= s;
        }
    }
    return norm;
}

double finite_diff_check(const std::function<Var()>& make_loss,
                         std::vector<Parameter>& params,
                         const FiniteDiffOptions& opts) {
    if (!(opts.eps > 0.0) || opts.eps > 1e-3) {
        throw ConfigError("finite_diff_check: eps must be in (0, 1e-3]");
    }
    auto eval = [&]() -> double {
        Var v = make_loss();
        if (v->val.numel() != 1) throw DomainError("finite_diff_check: loss must be scalar");
        return v->val[0];
    };
    const double v1 = eval();
    const double v2 = eval();
    if (!(v1 == v2)) {
        throw OracleInvalidError("finite_diff_check: loss is not deterministic (" + std::to_string(v1) +
                                 " vs " + std::to_string(v2) + ")");
    }

    zero_grads(params);
    Var root = make_loss();
    backward(root);
    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params) analytic.push_back(p.node->grad);

    double worst = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        if (!p.trainable) continue;
        const std::int64_t n = p.node->val.numel();
        std::vector<std::int64_t> coords;
        if (opts.max_coords_per_param > 0 && n > opts.max_coords_per_param) {
            CounterRng rng = CounterRng::stream(opts.seed, "fdcheck", pi);
            std::vector<std::int64_t> all(static_cast<std::size_t>(n));
            for (std::int64_t i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
            rng.shuffle(all);
            coords.assign(all.begin(), all.begin() + opts.max_coords_per_param);
        } else {
            coords.resize(static_cast<std::size_t>(n));
            for (std::int64_t i = 0; i < n; ++i) coords[static_cast<std::size_t>(i)] = i;
        }
        for (std::int64_t c : coords) {
            const double saved = p.node->val[c];
            p.node->val[c] = saved + opts.eps;
            const double up = eval();
            p.node->val[c] = saved - opts.eps;
            const double dn = eval();
            p.node->val[c] = saved;
            const double gc = (up - dn) / (2.0 * opts.eps);
            const double ga = analytic[pi][c];
            const double err = std::abs(ga - gc) / std::max(1.0, std::abs(gc));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

} // namespace tlv
