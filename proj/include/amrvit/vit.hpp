#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "amrvit/graph.hpp"
#include "amrvit/iq.hpp"
#include "amrvit/params.hpp"
#include "amrvit/rng.hpp"
#include "amrvit/tensor.hpp"

namespace amrvit {

// Encoder over (2, input_len) I/Q frames cut into (2, patch_w) patches.
// No class token anywhere: the classifier and the projection head both read
// the mean-pooled patch tokens.
struct ViTConfig {
    int input_len = 512;
    int patch_w = 16;
    int embed_dim = 64;
    int layers = 8;
    int heads = 8;
    int mlp_dim = 64;
    int proj_dim = 64;
    double dropout = 0.2;
    int num_classes = 16;
    bool decoder_from_tokens = true;  // false: decoder reads the pooled vector

    int num_patches() const { return input_len / patch_w; }
    int patch_dim() const { return 2 * patch_w; }

    void validate() const {
        if (input_len <= 0 || patch_w <= 0 || input_len % patch_w != 0)
            throw std::invalid_argument("ViTConfig: input_len must be a positive multiple of patch_w");
        if (embed_dim <= 0 || heads <= 0 || embed_dim % heads != 0)
            throw std::invalid_argument("ViTConfig: embed_dim must be divisible by heads");
        if (layers < 1 || mlp_dim < 1 || proj_dim < 1 || num_classes < 2)
            throw std::invalid_argument("ViTConfig: bad layer/dim/class counts");
        if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("ViTConfig: dropout out of range");
    }
};

// ---- patch layout ----

// (2, L) frame -> [num_patches, 2*patch_w]; patch p holds samples
// [p*patch_w, (p+1)*patch_w) as its I row followed by its Q row.
template <typename T = float>
Tensor<T> patchify(const IQFrame& frame, const ViTConfig& cfg) {
    if (static_cast<int>(frame.length()) != cfg.input_len)
        throw std::invalid_argument("patchify: frame length " + std::to_string(frame.length()) +
                                    " does not match configured input_len " + std::to_string(cfg.input_len));
    const int np = cfg.num_patches(), pw = cfg.patch_w;
    Tensor<T> out({np, 2 * pw});
    for (int p = 0; p < np; ++p)
        for (int k = 0; k < pw; ++k) {
            out.v[p * 2 * pw + k] = static_cast<T>(frame.i[p * pw + k]);
            out.v[p * 2 * pw + pw + k] = static_cast<T>(frame.q[p * pw + k]);
        }
    return out;
}

template <typename T = float>
IQFrame unpatchify(const Tensor<T>& patches, const ViTConfig& cfg) {
    const int np = cfg.num_patches(), pw = cfg.patch_w;
    if (patches.ndim() != 2 || patches.dim(0) != np || patches.dim(1) != 2 * pw)
        throw std::invalid_argument("unpatchify: bad patch tensor shape " + patches.shape_str());
    IQFrame frame(cfg.input_len);
    for (int p = 0; p < np; ++p)
        for (int k = 0; k < pw; ++k) {
            frame.i[p * pw + k] = static_cast<float>(patches.v[p * 2 * pw + k]);
            frame.q[p * pw + k] = static_cast<float>(patches.v[p * 2 * pw + pw + k]);
        }
    return frame;
}

template <typename T = float>
Tensor<T> batch_patchify(const std::vector<const IQFrame*>& frames, const ViTConfig& cfg) {
    if (frames.empty()) throw std::invalid_argument("batch_patchify: empty batch");
    const int np = cfg.num_patches(), pd = cfg.patch_dim();
    Tensor<T> out({static_cast<int64_t>(frames.size()), np, pd});
    for (size_t b = 0; b < frames.size(); ++b) {
        const Tensor<T> one = patchify<T>(*frames[b], cfg);
        std::copy(one.v.begin(), one.v.end(), out.v.begin() + static_cast<int64_t>(b) * np * pd);
    }
    return out;
}

// ---- parameters ----

template <typename T = float>
ParamSet<T> build_vit_params(const ViTConfig& cfg, Rng& rng) {
    cfg.validate();
    ParamSet<T> ps;
    const int d = cfg.embed_dim, pd = cfg.patch_dim(), np = cfg.num_patches();
    ps.add("embed.w", uniform_fanin<T>({pd, d}, pd, rng));
    ps.add("embed.b", uniform_fanin<T>({d}, pd, rng));
    ps.add("pos", normal_init<T>({np, d}, 0.02, rng));
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string p = "blk" + std::to_string(l) + ".";
        ps.add(p + "ln1.g", Tensor<T>::full({d}, T{1}));
        ps.add(p + "ln1.b", Tensor<T>({d}));
        ps.add(p + "attn.wqkv", uniform_fanin<T>({d, 3 * d}, d, rng));
        ps.add(p + "attn.bqkv", uniform_fanin<T>({3 * d}, d, rng));
        ps.add(p + "attn.wo", uniform_fanin<T>({d, d}, d, rng));
        ps.add(p + "attn.bo", uniform_fanin<T>({d}, d, rng));
        ps.add(p + "ln2.g", Tensor<T>::full({d}, T{1}));
        ps.add(p + "ln2.b", Tensor<T>({d}));
        ps.add(p + "mlp.w1", uniform_fanin<T>({d, cfg.mlp_dim}, d, rng));
        ps.add(p + "mlp.b1", uniform_fanin<T>({cfg.mlp_dim}, d, rng));
        ps.add(p + "mlp.w2", uniform_fanin<T>({cfg.mlp_dim, d}, cfg.mlp_dim, rng));
        ps.add(p + "mlp.b2", uniform_fanin<T>({d}, cfg.mlp_dim, rng));
    }
    ps.add("final_ln.g", Tensor<T>::full({d}, T{1}));
    ps.add("final_ln.b", Tensor<T>({d}));
    ps.add("proj.w1", uniform_fanin<T>({d, d}, d, rng));
    ps.add("proj.b1", uniform_fanin<T>({d}, d, rng));
    ps.add("proj.w2", uniform_fanin<T>({d, cfg.proj_dim}, d, rng));
    ps.add("proj.b2", uniform_fanin<T>({cfg.proj_dim}, d, rng));
    ps.add("cls.w", uniform_fanin<T>({d, cfg.num_classes}, d, rng));
    ps.add("cls.b", uniform_fanin<T>({cfg.num_classes}, d, rng));
    if (!cfg.decoder_from_tokens) {
        ps.add("dec.expand.w", uniform_fanin<T>({d, d * np}, d, rng));
        ps.add("dec.expand.b", uniform_fanin<T>({d * np}, d, rng));
    }
    // two transposed-conv stages invert the patch grid: np -> 4*np -> 16*np = input_len
    ps.add("dec.ct1.k", uniform_fanin<T>({d, d / 2, 1, 4}, d * 4, rng));
    ps.add("dec.ct1.b", uniform_fanin<T>({d / 2}, d * 4, rng));
    ps.add("dec.ct2.k", uniform_fanin<T>({d / 2, 2, 1, 4}, d / 2 * 4, rng));
    ps.add("dec.ct2.b", uniform_fanin<T>({2}, d / 2 * 4, rng));
    return ps;
}

// Parameters mirrored into a graph as leaf nodes; trainable items become
// param() leaves, frozen ones plain inputs.
template <typename T>
struct BoundParams {
    const ParamSet<T>* ps = nullptr;
    std::vector<int> ids;

    int operator()(const std::string& name) const { return ids[ps->index_of(name)]; }
};

template <typename T>
BoundParams<T> bind_params(Graph<T>& g, const ParamSet<T>& ps) {
    BoundParams<T> bp;
    bp.ps = &ps;
    bp.ids.reserve(ps.items.size());
    for (const auto& it : ps.items)
        bp.ids.push_back(it.trainable ? g.param(it.value) : g.input(it.value));
    return bp;
}

// ---- forward pieces ----

// patches [B, np, patch_dim] -> tokens [B, np, embed_dim]
template <typename T>
int vit_encode(Graph<T>& g, const ViTConfig& cfg, const BoundParams<T>& p, int patches, bool training,
               Rng& rng, bool use_pos = true) {
    const int heads = cfg.heads;
    const T att_scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(cfg.embed_dim / heads)));
    int x = g.dense(patches, p("embed.w"), p("embed.b"));
    if (use_pos) x = g.add_tokens(x, p("pos"));
    if (training && cfg.dropout > 0.0) x = g.dropout(x, cfg.dropout, rng);
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string pre = "blk" + std::to_string(l) + ".";
        int h = g.layer_norm(x, p(pre + "ln1.g"), p(pre + "ln1.b"));
        int qkv = g.dense(h, p(pre + "attn.wqkv"), p(pre + "attn.bqkv"));
        const int q = g.qkv_head_slice(qkv, heads, 0);
        const int k = g.qkv_head_slice(qkv, heads, 1);
        const int v = g.qkv_head_slice(qkv, heads, 2);
        int attn = g.softmax_last(g.bmm_nt(q, k, att_scale));
        int ctx = g.merge_heads(g.bmm(attn, v), heads);
        int o = g.dense(ctx, p(pre + "attn.wo"), p(pre + "attn.bo"));
        if (training && cfg.dropout > 0.0) o = g.dropout(o, cfg.dropout, rng);
        x = g.add(x, o);
        int h2 = g.layer_norm(x, p(pre + "ln2.g"), p(pre + "ln2.b"));
        int m = g.gelu(g.dense(h2, p(pre + "mlp.w1"), p(pre + "mlp.b1")));
        m = g.dense(m, p(pre + "mlp.w2"), p(pre + "mlp.b2"));
        if (training && cfg.dropout > 0.0) m = g.dropout(m, cfg.dropout, rng);
        x = g.add(x, m);
    }
    return g.layer_norm(x, p("final_ln.g"), p("final_ln.b"));
}

// tokens [B, np, d] -> pooled [B, d]
template <typename T>
int vit_pool(Graph<T>& g, int tokens) {
    return g.mean_tokens(tokens);
}

// pooled [B, d] -> unit-norm projection [B, proj_dim]
template <typename T>
int vit_project(Graph<T>& g, const BoundParams<T>& p, int pooled) {
    int h = g.gelu(g.dense(pooled, p("proj.w1"), p("proj.b1")));
    return g.l2norm_rows(g.dense(h, p("proj.w2"), p("proj.b2")));
}

// pooled [B, d] -> logits [B, num_classes]
template <typename T>
int vit_classify(Graph<T>& g, const BoundParams<T>& p, int pooled) {
    return g.dense(pooled, p("cls.w"), p("cls.b"));
}

// tokens [B, np, d] (or pooled [B, d] in pooled-decoder mode) -> frames [B, 2, input_len]
template <typename T>
int vit_decode(Graph<T>& g, const ViTConfig& cfg, const BoundParams<T>& p, int encoded) {
    const int64_t bsz = g.value(encoded).dim(0);
    const int np = cfg.num_patches(), d = cfg.embed_dim;
    int fmap;
    if (cfg.decoder_from_tokens) {
        fmap = g.reshape(g.transpose_12(encoded), {bsz, d, 1, np});
    } else {
        int ex = g.dense(encoded, p("dec.expand.w"), p("dec.expand.b"));
        fmap = g.reshape(ex, {bsz, d, 1, np});
    }
    int u = g.relu(g.conv_transpose2d(fmap, p("dec.ct1.k"), p("dec.ct1.b"), 1, 4));
    int y = g.conv_transpose2d(u, p("dec.ct2.k"), p("dec.ct2.b"), 1, 4);
    return g.reshape(y, {bsz, 2, static_cast<int64_t>(cfg.input_len)});
}

}  // namespace amrvit
