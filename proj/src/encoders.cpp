#include "tlv/encoders.hpp"

#include <cmath>

#include "tlv/errors.hpp"
#include "tlv/rng.hpp"

namespace tlv {

const char* modality_name(Modality m) {
    switch (m) {
        case Modality::tactile: return "tactile";
        case Modality::vision: return "vision";
        case Modality::language: return "language";
    }
    return "?";
}

int EncoderConfig::num_patches() const {
    if (!is_image()) return 0;
    const int side = image_size / patch_size;
    return side * side;
}

void EncoderConfig::validate() const {
    if (num_layers < 1) throw ConfigError("encoder: num_layers must be >= 1");
    if (dim < 1) throw ConfigError("encoder: dim must be >= 1");
    if (num_heads < 1 || dim % num_heads != 0) {
        throw ConfigError("encoder: num_heads must divide dim");
    }
    if (max_seq_len < 2) throw ConfigError("encoder: max_seq_len must be >= 2");
    if (is_image()) {
        if (patch_size < 1 || image_size < 1 || channels < 1) {
            throw ConfigError("encoder: image modality needs positive patch_size/image_size/channels");
        }
        if (image_size % patch_size != 0) {
            throw ConfigError("encoder: patch_size must divide image_size");
        }
        if (num_patches() + 1 > max_seq_len) {
            throw ConfigError("encoder: max_seq_len too small for patch count");
        }
    } else {
        if (vocab_size < 1) throw ConfigError("encoder: language modality needs vocab_size");
    }
}

Tensor patchify(const Tensor& image, int patch_size) {
    require_rank(image, 3, "patchify");
    const int H = image.dim(0), W = image.dim(1), C = image.dim(2);
    if (patch_size < 1 || H % patch_size != 0 || W % patch_size != 0) {
        throw ShapeError("patchify: patch size must divide both image extents");
    }
    const int gh = H / patch_size, gw = W / patch_size;
    Tensor out({gh * gw, patch_size * patch_size * C});
    int row = 0;
    for (int by = 0; by < gh; ++by) {
        for (int bx = 0; bx < gw; ++bx, ++row) {
            int col = 0;
            for (int py = 0; py < patch_size; ++py)
                for (int px = 0; px < patch_size; ++px)
                    for (int c = 0; c < C; ++c, ++col) {
                        const int y = by * patch_size + py;
                        const int x = bx * patch_size + px;
                        out.at(row, col) = image[(static_cast<std::int64_t>(y) * W + x) * C + c];
                    }
        }
    }
    return out;
}

namespace {

Var make_param(std::vector<Parameter>& reg, const std::string& name, Tensor t) {
    Var v = make_leaf(std::move(t));
    reg.push_back(Parameter{name, v, true});
    return v;
}

Tensor gaussian_tensor(std::vector<int> shape, std::uint64_t seed, const std::string& name, double sigma) {
    Tensor t(std::move(shape));
    CounterRng rng = CounterRng::stream(seed, name);
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.next_gaussian(0.0, sigma);
    return t;
}

Var gauss_param(std::vector<Parameter>& reg, std::uint64_t seed, const std::string& name,
                std::vector<int> shape) {
    return make_param(reg, name, gaussian_tensor(std::move(shape), seed, name, 0.02));
}

Var zeros_param(std::vector<Parameter>& reg, const std::string& name, std::vector<int> shape) {
    return make_param(reg, name, Tensor::zeros(std::move(shape)));
}

Var ones_param(std::vector<Parameter>& reg, const std::string& name, std::vector<int> shape) {
    return make_param(reg, name, Tensor::full(std::move(shape), 1.0));
}

} // namespace

EncoderParams init_encoder(const EncoderConfig& cfg, std::uint64_t seed,
                           const std::string& prefix, std::vector<Parameter>& reg) {
    cfg.validate();
    EncoderParams p;
    p.cfg = cfg;
    const int d = cfg.dim;
    if (cfg.is_image()) {
        const int pdim = cfg.patch_size * cfg.patch_size * cfg.channels;
        p.patch_w = gauss_param(reg, seed, prefix + ".patch_w", {d, pdim});
        p.patch_b = zeros_param(reg, prefix + ".patch_b", {d});
    } else {
        p.token_emb = gauss_param(reg, seed, prefix + ".token_emb", {cfg.vocab_size, d});
    }
    p.cls = gauss_param(reg, seed, prefix + ".cls", {1, d});
    p.pos = gauss_param(reg, seed, prefix + ".pos", {cfg.max_seq_len, d});
    for (int li = 0; li < cfg.num_layers; ++li) {
        const std::string lp = prefix + ".layers." + std::to_string(li);
        LayerParams L;
        L.ln1_g = ones_param(reg, lp + ".ln1_g", {d});
        L.ln1_b = zeros_param(reg, lp + ".ln1_b", {d});
        L.wq = gauss_param(reg, seed, lp + ".wq", {d, d});
        L.bq = zeros_param(reg, lp + ".bq", {d});
        L.wk = gauss_param(reg, seed, lp + ".wk", {d, d});
        L.bk = zeros_param(reg, lp + ".bk", {d});
        L.wv = gauss_param(reg, seed, lp + ".wv", {d, d});
        L.bv = zeros_param(reg, lp + ".bv", {d});
        L.wo = gauss_param(reg, seed, lp + ".wo", {d, d});
        L.bo = zeros_param(reg, lp + ".bo", {d});
        L.ln2_g = ones_param(reg, lp + ".ln2_g", {d});
        L.ln2_b = zeros_param(reg, lp + ".ln2_b", {d});
        L.w1 = gauss_param(reg, seed, lp + ".w1", {4 * d, d});
        L.b1 = zeros_param(reg, lp + ".b1", {4 * d});
        L.w2 = gauss_param(reg, seed, lp + ".w2", {d, 4 * d});
        L.b2 = zeros_param(reg, lp + ".b2", {d});
        p.layers.push_back(std::move(L));
    }
    p.lnf_g = ones_param(reg, prefix + ".lnf_g", {d});
    p.lnf_b = zeros_param(reg, prefix + ".lnf_b", {d});
    return p;
}

Var encode_tokens(const EncoderParams& p, const Var& x0, const HookMap& hooks) {
    const int L = static_cast<int>(p.layers.size());
    for (const auto& [idx, fn] : hooks) {
        if (idx < 0 || idx >= L) {
            throw ConfigError("encode_tokens: hook layer " + std::to_string(idx) + " outside depth " +
                              std::to_string(L));
        }
        if (!fn) throw ConfigError("encode_tokens: empty hook");
    }
    Var x = x0;
    for (int li = 0; li < L; ++li) {
        const LayerParams& lp = p.layers[static_cast<std::size_t>(li)];
        Var h = ops::layer_norm(x, lp.ln1_g, lp.ln1_b);
        Var attn = ops::mha(ops::linear(h, lp.wq, lp.bq), ops::linear(h, lp.wk, lp.bk),
                            ops::linear(h, lp.wv, lp.bv), p.cfg.num_heads);
        x = ops::add(x, ops::linear(attn, lp.wo, lp.bo));
        Var h2 = ops::layer_norm(x, lp.ln2_g, lp.ln2_b);
        Var m = ops::linear(ops::gelu(ops::linear(h2, lp.w1, lp.b1)), lp.w2, lp.b2);
        x = ops::add(x, m);
        auto it = hooks.find(li);
        if (it != hooks.end()) x = it->second(x);
    }
    Var xf = ops::layer_norm(x, p.lnf_g, p.lnf_b);
    return ops::slice_row(xf, 0);
}

Var encode_image(const EncoderParams& p, const Tensor& grid, const HookMap& hooks) {
    if (!p.cfg.is_image()) throw ConfigError("encode_image: encoder is not an image encoder");
    require_rank(grid, 3, "encode_image");
    if (grid.dim(0) != p.cfg.image_size || grid.dim(1) != p.cfg.image_size || grid.dim(2) != p.cfg.channels) {
        throw ShapeError("encode_image: grid " + grid.shape_str() + " does not match configured extent");
    }
    Var tok = ops::linear(make_const(patchify(grid, p.cfg.patch_size)), p.patch_w, p.patch_b);
    Var x0 = ops::vconcat(p.cls, tok);
    const int T = x0->val.dim(0);
    x0 = ops::add(x0, ops::slice_rows(p.pos, 0, T));
    return encode_tokens(p, x0, hooks);
}

Var encode_text(const EncoderParams& p, const std::vector<int>& token_ids, const HookMap& hooks) {
    if (p.cfg.is_image()) throw ConfigError("encode_text: encoder is not a language encoder");
    if (token_ids.empty()) throw DomainError("encode_text: empty token sequence");
    const int T = static_cast<int>(token_ids.size()) + 1;
    if (T > p.cfg.max_seq_len) throw ShapeError("encode_text: sequence exceeds max_seq_len");
    Var emb = ops::embed_rows(p.token_emb, token_ids);
    Var x0 = ops::vconcat(p.cls, emb);
    x0 = ops::add(x0, ops::slice_rows(p.pos, 0, T));
    return encode_tokens(p, x0, hooks);
}

std::int64_t encoder_param_count(const EncoderConfig& cfg) {
    cfg.validate();
    const std::int64_t d = cfg.dim;
    std::int64_t n = 0;
    if (cfg.is_image()) {
        n += d * (cfg.patch_size * cfg.patch_size * cfg.channels) + d;
    } else {
        n += static_cast<std::int64_t>(cfg.vocab_size) * d;
    }
    n += d;                    // cls
    n += static_cast<std::int64_t>(cfg.max_seq_len) * d; // pos
    // per layer: two norms (4d), qkv and output projections 4(d^2+d),
    // mlp d*4d+4d + 4d*d+d
    const std::int64_t per_layer = 4 * d + 4 * (d * d + d) + (8 * d * d + 5 * d);
    n += cfg.num_layers * per_layer;
    n += 2 * d; // final norm
    return n;
}

} // namespace tlv
