#include "tlv/uba.hpp"

#include "tlv/errors.hpp"
#include "tlv/rng.hpp"

namespace tlv {

UbaParams init_uba(int levels, int rank, const std::array<int, 3>& dims, std::uint64_t seed,
                   std::vector<Parameter>& registry) {
    if (levels < 0) throw ConfigError("init_uba: levels must be >= 0");
    if (levels > 0 && rank < 1) throw ConfigError("init_uba: rank must be positive");
    UbaParams p;
    p.rank = rank;
    for (int lv = 0; lv < levels; ++lv) {
        UbaLevelParams L;
        const std::string base = "uba." + std::to_string(lv);
        for (int m = 0; m < 3; ++m) {
            const int d = dims[static_cast<std::size_t>(m)];
            if (d < 1) throw ConfigError("init_uba: modality dim must be positive");
            const std::string mn = modality_name(static_cast<Modality>(m));
            const std::string dn = base + ".down." + mn;
            CounterRng rng = CounterRng::stream(seed, dn);
            Tensor wd({rank, d});
            for (std::int64_t i = 0; i < wd.numel(); ++i) wd[i] = rng.next_gaussian(0.0, 0.02);
            L.w_down[static_cast<std::size_t>(m)] = make_leaf(std::move(wd));
            registry.push_back(Parameter{dn, L.w_down[static_cast<std::size_t>(m)], true});

            // zero start: the residual branch contributes nothing until trained
            const std::string un = base + ".up." + mn;
            L.w_up[static_cast<std::size_t>(m)] = make_leaf(Tensor::zeros({d, rank}));
            registry.push_back(Parameter{un, L.w_up[static_cast<std::size_t>(m)], true});
        }
        const std::string sn = base + ".shared";
        CounterRng rng = CounterRng::stream(seed, sn);
        Tensor ws({rank, rank});
        for (std::int64_t i = 0; i < ws.numel(); ++i) ws[i] = rng.next_gaussian(0.0, 0.02);
        L.w_sh = make_leaf(std::move(ws));
        registry.push_back(Parameter{sn, L.w_sh, true});
        p.levels.push_back(std::move(L));
    }
    return p;
}

Var uba_apply(const Var& h, Modality m, const UbaLevelParams& level) {
    const std::size_t mi = static_cast<std::size_t>(m);
    const Var& wd = level.w_down[mi];
    const Var& wu = level.w_up[mi];
    const bool single = h->val.rank() == 1;
    Var x = single ? ops::reshape(h, {1, h->val.dim(0)}) : h;
    if (x->val.dim(1) != wd->val.dim(1)) {
        throw ShapeError("uba_apply: feature width " + std::to_string(x->val.dim(1)) +
                         " does not match adapter dim " + std::to_string(wd->val.dim(1)));
    }
    Var low = ops::matmul_nt(x, wd);            // [T,r]
    Var mixed = ops::matmul_nt(low, level.w_sh); // [T,r]
    Var upd = ops::matmul_nt(mixed, wu);         // [T,d]
    Var out = ops::add(x, upd);
    return single ? ops::reshape(out, {h->val.dim(0)}) : out;
}

PlacementPlan plan_placement(const std::array<int, 3>& depths, int levels) {
    if (levels < 0) throw ConfigError("plan_placement: levels must be >= 0");
    PlacementPlan plan;
    for (int m = 0; m < 3; ++m) {
        const int D = depths[static_cast<std::size_t>(m)];
        if (D < 1) throw ConfigError("plan_placement: encoder depth must be positive");
        if (levels > D) {
            throw ConfigError("plan_placement: " + std::string(modality_name(static_cast<Modality>(m))) +
                              " depth " + std::to_string(D) + " is shallower than " +
                              std::to_string(levels) + " adapter levels");
        }
        for (int lv = 0; lv < levels; ++lv) {
            plan.entries[static_cast<std::size_t>(m)].push_back({D - levels + lv, lv});
        }
    }
    return plan;
}

double count_trainable_fraction(const std::array<EncoderConfig, 3>& encoders, int levels, int rank,
                                int sensors) {
    if (levels < 1 || rank < 1) throw ConfigError("count_trainable_fraction: need positive levels and rank");
    if (sensors < 1) throw ConfigError("count_trainable_fraction: need positive sensor count");
    std::int64_t towers = 0;
    for (const auto& cfg : encoders) towers += encoder_param_count(cfg);
    std::int64_t adapters = 0;
    for (const auto& cfg : encoders) adapters += 2LL * rank * cfg.dim; // down + up per modality
    adapters += static_cast<std::int64_t>(rank) * rank;               // shared core
    adapters *= levels;
    const std::int64_t sam = 2LL * sensors * encoders[0].dim; // routing + centroids
    const double added = static_cast<double>(adapters + sam);
    return added / (static_cast<double>(towers) + added);
}

} // namespace tlv
