#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tlv/encoders.hpp"
#include "tlv/sam.hpp"
#include "tlv/synthdata.hpp"
#include "tlv/uba.hpp"

namespace tlv {

struct ModelConfig {
    int dim = 32;
    int heads = 4;
    int t_layers = 4;
    int v_layers = 4;
    int l_layers = 2;
    int patch_size = 4;
    // filled in from the dataset before construction
    int image_size = 16;
    int channels = 3;
    int vocab_size = 12;
    int max_token_len = 6;
    int sensors = 2;
    // adapters and modulation
    int uba_levels = 2;
    int uba_rank = 8;
    bool use_sam = true;
    // objective
    double tau_cl = 0.05;
    double tau_dl = 0.05;
    double lambda_dl = 0.1;
    double grl_lambda = 1.0;

    EncoderConfig encoder(Modality m) const;
    void validate() const;
};

// The three encoders plus modulation and adapter stacks, with one parameter
// registry for the optimizer and checkpoints.
class ModelState {
public:
    ModelState(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    // live reversal scale, used by warmup schedules; affects batch_loss only
    void set_grl_lambda(double v);
    std::vector<Parameter>& params() { return params_; }
    const std::vector<Parameter>& params() const { return params_; }
    Parameter* find_param(const std::string& name);

    struct Losses {
        Var total, tv, tl, vl, dl;
    };
    // contrastive + decoupling loss graph over one batch
    Losses batch_loss(const std::vector<const Triplet*>& batch) const;

    // inference embeddings (normalized, [dim]); sensor -1 routes automatically
    Tensor embed_tactile(const Tensor& grid, int sensor) const;
    Tensor embed_vision(const Tensor& grid) const;
    Tensor embed_language(const std::vector<int>& tokens) const;
    // cross-tower probes: push a grid through the other image pipeline
    Tensor embed_with_vision_tower(const Tensor& tactile_grid) const;
    Tensor embed_with_tactile_tower(const Tensor& vision_grid, int sensor) const;

    const SamParams& sam() const { return sam_; }
    const UbaParams& uba() const { return uba_; }

private:
    Var tactile_feature(const Tensor& grid) const; // pre-modulation CLS feature
    Var tactile_embedding(const Var& feature, int sensor) const;

    ModelConfig cfg_;
    std::vector<Parameter> params_;
    std::array<EncoderParams, 3> enc_;
    SamParams sam_;
    UbaParams uba_;
    std::array<HookMap, 3> hooks_;
};

} // namespace tlv
