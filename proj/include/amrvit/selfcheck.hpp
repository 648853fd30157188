#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "amrvit/augment.hpp"
#include "amrvit/gradcheck.hpp"
#include "amrvit/graph.hpp"
#include "amrvit/losses.hpp"
#include "amrvit/vit.hpp"

namespace amrvit {

struct SelfCheckResult {
    bool pass = true;
    std::vector<std::string> lines;

    void record(const std::string& name, bool ok, double detail = std::nan("")) {
        pass = pass && ok;
        std::string line = std::string(ok ? "PASS " : "FAIL ") + name;
        if (!std::isnan(detail)) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), " (%.3g)", detail);
            line += buf;
        }
        lines.push_back(line);
    }
};

namespace detail {

inline TensorD random_tensor(std::vector<int64_t> shape, Rng& rng, double scale = 1.0) {
    TensorD t(std::move(shape));
    for (auto& v : t.v) v = rng.normal(0.0, scale);
    return t;
}

}  // namespace detail

// Finite-difference battery over every kernel, then the full model with the
// combined objective. Kernel tolerance 1e-4, full model 1e-3, all in 64-bit.
inline SelfCheckResult selfcheck_gradients() {
    SelfCheckResult res;
    Rng rng(2024);
    const double kKernelTol = 1e-4;
    const double kModelTol = 1e-3;

    const auto check = [&](const std::string& name, const ScalarBuilder& f,
                           const std::vector<std::pair<std::string, TensorD>>& inputs, double tol,
                           int max_coords = 0) {
        const auto rep = check_gradients(f, inputs, max_coords);
        res.record("grad " + name, rep.pass(tol), rep.worst_rel_err());
    };

    check("dense", [](GraphD& g, const std::vector<int>& in) {
        return g.mse(g.dense(in[0], in[1], in[2]), TensorD({3, 4}));
    },
          {{"x", detail::random_tensor({3, 5}, rng)},
           {"w", detail::random_tensor({5, 4}, rng)},
           {"b", detail::random_tensor({4}, rng)}},
          kKernelTol);

    check("layer_norm", [](GraphD& g, const std::vector<int>& in) {
        return g.mse(g.layer_norm(in[0], in[1], in[2]), TensorD({4, 8}));
    },
          {{"x", detail::random_tensor({4, 8}, rng)},
           {"gamma", detail::random_tensor({8}, rng, 0.5)},
           {"beta", detail::random_tensor({8}, rng, 0.5)}},
          kKernelTol);

    check("softmax", [](GraphD& g, const std::vector<int>& in) {
        TensorD tgt({3, 6});
        tgt.v[1] = 1.0;
        tgt.v[8] = 0.7;
        return g.mse(g.softmax_last(in[0]), tgt);
    },
          {{"x", detail::random_tensor({3, 6}, rng)}}, kKernelTol);

    check("gelu", [](GraphD& g, const std::vector<int>& in) { return g.mse(g.gelu(in[0]), TensorD({10})); },
          {{"x", detail::random_tensor({10}, rng)}}, kKernelTol);

    check("relu", [](GraphD& g, const std::vector<int>& in) { return g.mse(g.relu(in[0]), TensorD({12})); },
          {{"x", detail::random_tensor({12}, rng)}}, kKernelTol);

    check("multi_head_self_attention", [](GraphD& g, const std::vector<int>& in) {
        const int heads = 2;
        const int qkv = g.dense(in[0], in[1], in[2]);
        const int q = g.qkv_head_slice(qkv, heads, 0);
        const int k = g.qkv_head_slice(qkv, heads, 1);
        const int v = g.qkv_head_slice(qkv, heads, 2);
        const int attn = g.softmax_last(g.bmm_nt(q, k, 0.5));
        const int ctx = g.merge_heads(g.bmm(attn, v), heads);
        const int out = g.dense(ctx, in[3], in[4]);
        return g.mse(out, TensorD({2, 4, 8}));
    },
          {{"x", detail::random_tensor({2, 4, 8}, rng)},
           {"wqkv", detail::random_tensor({8, 24}, rng, 0.4)},
           {"bqkv", detail::random_tensor({24}, rng, 0.2)},
           {"wo", detail::random_tensor({8, 8}, rng, 0.4)},
           {"bo", detail::random_tensor({8}, rng, 0.2)}},
          kModelTol);

    check("conv2d", [](GraphD& g, const std::vector<int>& in) {
        return g.mse(g.conv2d(in[0], in[1], in[2], 1, 2, 0, 1), TensorD({2, 5, 3, 3}));
    },
          {{"x", detail::random_tensor({2, 3, 4, 6}, rng)},
           {"k", detail::random_tensor({5, 3, 2, 3}, rng, 0.4)},
           {"b", detail::random_tensor({5}, rng, 0.2)}},
          kModelTol);

    check("conv_transpose2d", [](GraphD& g, const std::vector<int>& in) {
        return g.mse(g.conv_transpose2d(in[0], in[1], in[2], 1, 2), TensorD({2, 4, 1, 12}));
    },
          {{"x", detail::random_tensor({2, 3, 1, 5}, rng)},
           {"k", detail::random_tensor({3, 4, 1, 4}, rng, 0.4)},
           {"b", detail::random_tensor({4}, rng, 0.2)}},
          kModelTol);

    check("conv_transpose2d_block", [](GraphD& g, const std::vector<int>& in) {
        return g.mse(g.conv_transpose2d(in[0], in[1], in[2], 1, 4), TensorD({2, 4, 1, 20}));
    },
          {{"x", detail::random_tensor({2, 3, 1, 5}, rng)},
           {"k", detail::random_tensor({3, 4, 1, 4}, rng, 0.4)},
           {"b", detail::random_tensor({4}, rng, 0.2)}},
          kModelTol);

    check("maxpool2d", [](GraphD& g, const std::vector<int>& in) {
        return g.mse(g.maxpool2d(in[0], 1, 2, 1, 2), TensorD({2, 3, 2, 5}));
    },
          {{"x", detail::random_tensor({2, 3, 2, 10}, rng)}}, kKernelTol);

    check("dropout", [](GraphD& g, const std::vector<int>& in) {
        Rng drop(99);  // reseeded every evaluation: identical mask for all FD probes
        return g.mse(g.dropout(in[0], 0.3, drop), TensorD({6, 7}));
    },
          {{"x", detail::random_tensor({6, 7}, rng)}}, kKernelTol);

    check("l2norm_rows", [](GraphD& g, const std::vector<int>& in) {
        TensorD tgt({4, 6});
        tgt.v[0] = 1.0;
        return g.mse(g.l2norm_rows(in[0]), tgt);
    },
          {{"x", detail::random_tensor({4, 6}, rng)}}, kKernelTol);

    check("cross_entropy", [](GraphD& g, const std::vector<int>& in) {
        return g.cross_entropy(in[0], {1, 0, 3, 2}, {1.0, 0.0, 1.0, 0.5}, 2.5);
    },
          {{"logits", detail::random_tensor({4, 4}, rng)}}, kKernelTol);

    check("nt_xent", [](GraphD& g, const std::vector<int>& in) {
        const int z1 = g.l2norm_rows(g.dense(in[0], in[2], -1));
        const int z2 = g.l2norm_rows(g.dense(in[1], in[2], -1));
        return nt_xent(g, z1, z2, 0.5);
    },
          {{"h1", detail::random_tensor({3, 5}, rng)},
           {"h2", detail::random_tensor({3, 5}, rng)},
           {"w", detail::random_tensor({5, 4}, rng, 0.6)}},
          kKernelTol);

    // full ViT encoder + decoder + projection + classifier with the combined
    // objective, batch of 4 (2 labeled rows, 2 pseudo-labeled rows)
    {
        ViTConfig cfg;  // paper-scale configuration
        cfg.dropout = 0.0;
        Rng prng(7);
        ParamSet<double> params = build_vit_params<double>(cfg, prng);
        Rng frng(8);
        std::vector<IQFrame> frames;
        for (int k = 0; k < 4; ++k) {
            IQFrame f(cfg.input_len);
            for (auto& v : f.i) v = static_cast<float>(frng.normal());
            for (auto& v : f.q) v = static_cast<float>(frng.normal());
            frames.push_back(rms_normalize(f));
        }
        SemiBatch batch;
        for (const auto& f : frames) {
            batch.clean.push_back(&f);
            batch.view1.push_back(&f);
            batch.view2.push_back(&f);
        }
        batch.labels = {0, 3, 0, 0};
        batch.labeled = {1, 1, 0, 0};
        const std::vector<int> fixed_pseudo = {-1, -1, 2, 5};

        std::vector<std::pair<std::string, TensorD>> inputs;
        for (const auto& it : params.items) inputs.push_back({it.name, it.value});
        const auto builder = [&](GraphD& g, const std::vector<int>& ids) {
            BoundParams<double> bp;
            bp.ps = &params;
            bp.ids = ids;
            Rng dummy(0);
            LossWeights w;  // alpha = beta = w_recon = w_contrast = 1
            PseudoConfig pseudo;
            const auto comp = semi_supervised_loss(g, cfg, bp, batch, Scenario::ReconPlusContrastive, w, 0.5,
                                                   pseudo, true, false, dummy, &fixed_pseudo);
            return comp.loss_node;
        };
        const auto rep = check_gradients(builder, inputs, 3, 555);
        res.record("grad full_vit_total_loss", rep.pass(kModelTol), rep.worst_rel_err());
    }
    return res;
}

// Property battery over the augmentation module (>= 200 random frames).
inline SelfCheckResult selfcheck_augmentations(int n_frames = 200) {
    SelfCheckResult res;
    Rng rng(4242);
    AugmentParams params;
    const size_t len = 512;

    const auto random_frame = [&](Rng& r) {
        IQFrame f(len);
        for (size_t n = 0; n < len; ++n) {
            f.i[n] = static_cast<float>(r.normal());
            f.q[n] = static_cast<float>(r.normal());
        }
        return rms_normalize(f);
    };

    bool isometry = true, involution = true, rot_cycle = true, identity_zero = true, endpoints = true;
    bool deterministic = true, finite = true, exclusive = true;
    for (int t = 0; t < n_frames; ++t) {
        Rng fr(mix_seed(1000, static_cast<uint64_t>(t)));
        const IQFrame f = random_frame(fr);
        const double angle = fr.uniform(0.0, 2.0 * M_PI);

        const IQFrame r = rotate(f, angle);
        for (size_t n = 0; n < len && isometry; ++n) {
            const double m0 = std::hypot(f.i[n], f.q[n]);
            const double m1 = std::hypot(r.i[n], r.q[n]);
            isometry = std::abs(m0 - m1) <= 1e-6;
        }
        const IQFrame fh = flip_h(flip_h(f)), fv = flip_v(flip_v(f));
        for (size_t n = 0; n < len && involution; ++n)
            involution = fh.i[n] == f.i[n] && fh.q[n] == f.q[n] && fv.i[n] == f.i[n] && fv.q[n] == f.q[n];

        IQFrame quad = f;
        for (int k = 0; k < 4; ++k) quad = rotate(quad, M_PI / 2.0);
        for (size_t n = 0; n < len && rot_cycle; ++n)
            rot_cycle = std::abs(quad.i[n] - f.i[n]) <= 1e-6 && std::abs(quad.q[n] - f.q[n]) <= 1e-6;

        Rng wr(mix_seed(2000, static_cast<uint64_t>(t)));
        const IQFrame mw = magnitude_warp(f, 4, 0.0, wr);
        const IQFrame tw = time_warp(f, 4, 0.0, wr);
        for (size_t n = 0; n < len && identity_zero; ++n)
            identity_zero = std::abs(mw.i[n] - f.i[n]) <= 1e-6 && std::abs(tw.i[n] - f.i[n]) <= 1e-6 &&
                            std::abs(mw.q[n] - f.q[n]) <= 1e-6 && std::abs(tw.q[n] - f.q[n]) <= 1e-6;

        Rng wr2(mix_seed(3000, static_cast<uint64_t>(t)));
        const IQFrame tw2 = time_warp(f, 4, 0.2, wr2);
        endpoints = endpoints && std::abs(tw2.i[0] - f.i[0]) <= 1e-6 && std::abs(tw2.q[0] - f.q[0]) <= 1e-6 &&
                    std::abs(tw2.i[len - 1] - f.i[len - 1]) <= 1e-6 &&
                    std::abs(tw2.q[len - 1] - f.q[len - 1]) <= 1e-6;

        Rng a1(mix_seed(4000, static_cast<uint64_t>(t))), a2(mix_seed(4000, static_cast<uint64_t>(t)));
        const auto [o1, k1] = augment(f, params, a1);
        const auto [o2, k2] = augment(f, params, a2);
        deterministic = deterministic && k1 == k2 && o1.i == o2.i && o1.q == o2.q;
        finite = finite && o1.finite();

        // one-of-seven exclusivity: flips/rotations are exact isometries, so a
        // frame altered in magnitude by noise/scale/warp cannot also have been
        // flipped or rotated (signature check on the reported kind)
        if (k1 == AugmentKind::Scale) {
            double ratio = 0.0;
            bool constant = true;
            for (size_t n = 0; n < len; ++n) {
                if (std::abs(f.i[n]) < 1e-3) continue;
                const double rr = static_cast<double>(o1.i[n]) / f.i[n];
                if (ratio == 0.0) ratio = rr;
                constant = constant && std::abs(rr - ratio) <= 1e-3;
            }
            exclusive = exclusive && constant;
        } else if (k1 == AugmentKind::FlipH) {
            for (size_t n = 0; n < len && exclusive; ++n)
                exclusive = o1.i[n] == -f.i[n] && o1.q[n] == f.q[n];
        } else if (k1 == AugmentKind::FlipV) {
            for (size_t n = 0; n < len && exclusive; ++n)
                exclusive = o1.i[n] == f.i[n] && o1.q[n] == -f.q[n];
        }
    }
    res.record("augment isometry (rotate)", isometry);
    res.record("augment involution (flips)", involution);
    res.record("augment rotate(pi/2)^4 identity", rot_cycle);
    res.record("augment identity at zero perturbation", identity_zero);
    res.record("augment time-warp endpoint pinning", endpoints);
    res.record("augment determinism", deterministic);
    res.record("augment finite outputs", finite);
    res.record("augment one-of-seven exclusivity", exclusive);

    // selection counts: each kind 1000 +/- 120 over 7000 draws
    {
        Rng fr(5050);
        const IQFrame f = random_frame(fr);
        std::vector<int> counts(kNumAugmentKinds, 0);
        for (int t = 0; t < 7000; ++t) {
            Rng ar(mix_seed(6000, static_cast<uint64_t>(t)));
            counts[static_cast<int>(augment(f, params, ar).second)] += 1;
        }
        bool balanced = true;
        for (int c : counts) balanced = balanced && std::abs(c - 1000) <= 120;
        res.record("augment one-of-seven selection balance", balanced);
    }
    return res;
}

}  // namespace amrvit
