#include "tlv/model.hpp"

#include "tlv/errors.hpp"
#include "tlv/objective.hpp"

namespace tlv {

EncoderConfig ModelConfig::encoder(Modality m) const {
    EncoderConfig e;
    e.modality = m;
    e.dim = dim;
    e.num_heads = heads;
    if (m == Modality::language) {
        e.num_layers = l_layers;
        e.vocab_size = vocab_size;
        e.max_seq_len = max_token_len + 1;
    } else {
        e.num_layers = m == Modality::tactile ? t_layers : v_layers;
        e.patch_size = patch_size;
        e.image_size = image_size;
        e.channels = channels;
        const int side = patch_size > 0 ? image_size / patch_size : 0;
        e.max_seq_len = side * side + 1;
    }
    return e;
}

void ModelConfig::validate() const {
    if (sensors < 2) throw ConfigError("model: sensors must be >= 2");
    if (uba_levels < 0) throw ConfigError("model: uba_levels must be >= 0");
    if (uba_levels > 0 && uba_rank < 1) throw ConfigError("model: uba_rank must be positive");
    if (!(tau_cl > 0.0) || !(tau_dl > 0.0)) throw ConfigError("model: temperatures must be positive");
    if (lambda_dl < 0.0) throw ConfigError("model: lambda_dl must be >= 0");
    if (grl_lambda < 0.0) throw ConfigError("model: grl_lambda must be >= 0");
    if (max_token_len < 1) throw ConfigError("model: max_token_len must be >= 1");
    encoder(Modality::tactile).validate();
    encoder(Modality::vision).validate();
    encoder(Modality::language).validate();
    if (uba_levels > 0) {
        plan_placement({t_layers, v_layers, l_layers}, uba_levels);
    }
}

ModelState::ModelState(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    enc_[0] = init_encoder(cfg_.encoder(Modality::tactile), seed, "enc_t", params_);
    enc_[1] = init_encoder(cfg_.encoder(Modality::vision), seed, "enc_v", params_);
    enc_[2] = init_encoder(cfg_.encoder(Modality::language), seed, "enc_l", params_);
    if (cfg_.use_sam) sam_ = init_sam(cfg_.sensors, cfg_.dim, seed, params_);
    if (cfg_.uba_levels > 0) {
        uba_ = init_uba(cfg_.uba_levels, cfg_.uba_rank, {cfg_.dim, cfg_.dim, cfg_.dim}, seed, params_);
        const PlacementPlan plan =
            plan_placement({cfg_.t_layers, cfg_.v_layers, cfg_.l_layers}, cfg_.uba_levels);
        for (int m = 0; m < 3; ++m) {
            for (const auto& [layer, level] : plan.entries[static_cast<std::size_t>(m)]) {
                const UbaLevelParams& lv = uba_.levels[static_cast<std::size_t>(level)];
                const Modality mod = static_cast<Modality>(m);
                hooks_[static_cast<std::size_t>(m)][layer] = [&lv, mod](const Var& h) {
                    return uba_apply(h, mod, lv);
                };
            }
        }
    }
}

void ModelState::set_grl_lambda(double v) {
    if (v < 0.0) throw ConfigError("model: grl_lambda must be >= 0");
    cfg_.grl_lambda = v;
}

Parameter* ModelState::find_param(const std::string& name) {
    for (auto& p : params_) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

Var ModelState::tactile_feature(const Tensor& grid) const {
    return encode_image(enc_[0], grid, hooks_[0]);
}

Var ModelState::tactile_embedding(const Var& feature, int sensor) const {
    if (!cfg_.use_sam) return feature;
    if (sensor == -1) return modulate_auto(feature, sam_);
    Var r = route(feature, sam_);
    return modulate(feature, r, sensor);
}

ModelState::Losses ModelState::batch_loss(const std::vector<const Triplet*>& batch) const {
    if (batch.empty()) throw DomainError("batch_loss: empty batch");
    std::vector<Var> zt, zv, zl, raw;
    std::vector<int> sensors;
    zt.reserve(batch.size());
    zv.reserve(batch.size());
    zl.reserve(batch.size());
    raw.reserve(batch.size());
    sensors.reserve(batch.size());
    for (const Triplet* t : batch) {
        if (!t) throw DomainError("batch_loss: null batch entry");
        Var ht = tactile_feature(t->tactile);
        raw.push_back(ht);
        sensors.push_back(t->sensor);
        zt.push_back(tactile_embedding(ht, t->sensor));
        zv.push_back(encode_image(enc_[1], t->vision, hooks_[1]));
        zl.push_back(encode_text(enc_[2], t->tokens, hooks_[2]));
    }
    Var Zt = ops::l2_normalize_rows(ops::vstack(zt));
    Var Zv = ops::l2_normalize_rows(ops::vstack(zv));
    Var Zl = ops::l2_normalize_rows(ops::vstack(zl));
    Losses out;
    out.tv = pair_infonce(Zt, Zv, cfg_.tau_cl);
    out.tl = pair_infonce(Zt, Zl, cfg_.tau_cl);
    out.vl = pair_infonce(Zv, Zl, cfg_.tau_cl);
    out.total = ops::add(ops::add(out.tv, out.tl), out.vl);
    if (cfg_.use_sam) {
        out.dl = decoupling_loss(raw, sensors, sam_, cfg_.tau_dl, cfg_.grl_lambda);
        out.total = ops::add(out.total, ops::scale(out.dl, cfg_.lambda_dl));
    } else {
        out.dl = make_const(Tensor::scalar(0.0));
    }
    return out;
}

namespace {
Tensor normalized_value(const Var& v) {
    Var z = ops::l2_normalize_rows(v);
    return z->val;
}
} // namespace

Tensor ModelState::embed_tactile(const Tensor& grid, int sensor) const {
    if (sensor != -1 && (sensor < 0 || sensor >= cfg_.sensors)) {
        throw DomainError("embed_tactile: sensor id out of range");
    }
    return normalized_value(tactile_embedding(tactile_feature(grid), sensor));
}

Tensor ModelState::embed_vision(const Tensor& grid) const {
    return normalized_value(encode_image(enc_[1], grid, hooks_[1]));
}

Tensor ModelState::embed_language(const std::vector<int>& tokens) const {
    return normalized_value(encode_text(enc_[2], tokens, hooks_[2]));
}

Tensor ModelState::embed_with_vision_tower(const Tensor& tactile_grid) const {
    return normalized_value(encode_image(enc_[1], tactile_grid, hooks_[1]));
}

Tensor ModelState::embed_with_tactile_tower(const Tensor& vision_grid, int sensor) const {
    if (sensor != -1 && (sensor < 0 || sensor >= cfg_.sensors)) {
        throw DomainError("embed_with_tactile_tower: sensor id out of range");
    }
    Var h = encode_image(enc_[0], vision_grid, hooks_[0]);
    return normalized_value(tactile_embedding(h, sensor));
}

} // namespace tlv
