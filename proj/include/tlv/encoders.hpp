#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tlv/autograd.hpp"
#include "tlv/tensor.hpp"

namespace tlv {

enum class Modality { tactile = 0, vision = 1, language = 2 };

const char* modality_name(Modality m);

struct EncoderConfig {
    Modality modality = Modality::tactile;
    int num_layers = 4;
    int dim = 32;
    int num_heads = 4;
    int max_seq_len = 16;
    // image modalities
    int patch_size = 0;
    int image_size = 0;
    int channels = 3;
    // language modality
    int vocab_size = 0;

    bool is_image() const { return modality != Modality::language; }
    int num_patches() const;
    void validate() const;
};

// non-overlapping patches in raster order; each row is one patch flattened
// as (py, px, channel); image is [H,W,C] with H == W == image_size
Tensor patchify(const Tensor& image, int patch_size);

struct LayerParams {
    Var ln1_g, ln1_b;
    Var wq, bq, wk, bk, wv, bv;
    Var wo, bo;
    Var ln2_g, ln2_b;
    Var w1, b1, w2, b2;
};

struct EncoderParams {
    EncoderConfig cfg;
    Var patch_w, patch_b; // image path
    Var token_emb;        // language path
    Var cls;              // [1, d]
    Var pos;              // [max_seq_len, d]
    std::vector<LayerParams> layers;
    Var lnf_g, lnf_b;
};

// applied to the full token sequence after transformer layer `index`
using LayerHook = std::function<Var(const Var&)>;
using HookMap = std::map<int, LayerHook>;

// Initializes pre-LN transformer weights: linear weights and embeddings are
// N(0, 0.02), biases zero, norm gains one. Each tensor draws from its own
// seed/name keyed stream, so adding parameters never shifts existing draws.
EncoderParams init_encoder(const EncoderConfig& cfg, std::uint64_t seed,
                           const std::string& prefix, std::vector<Parameter>& registry);

// Runs the transformer stack over prepared tokens [T,d] and returns the
// final-norm CLS row [d]. Hook keys must name existing layers.
Var encode_tokens(const EncoderParams& p, const Var& x0, const HookMap& hooks);

// prepend CLS, add position rows, run the stack
Var encode_image(const EncoderParams& p, const Tensor& grid, const HookMap& hooks);
Var encode_text(const EncoderParams& p, const std::vector<int>& token_ids, const HookMap& hooks);

// total scalar count of the encoder's parameters under this configuration
std::int64_t encoder_param_count(const EncoderConfig& cfg);

} // namespace tlv
