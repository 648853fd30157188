#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "amrvit/graph.hpp"
#include "amrvit/iq.hpp"
#include "amrvit/params.hpp"
#include "amrvit/rng.hpp"
#include "amrvit/vit.hpp"

namespace amrvit {

enum class ModelKind { vit, cnn, resnet };

inline const char* model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::vit: return "vit";
        case ModelKind::cnn: return "cnn";
        case ModelKind::resnet: return "resnet";
    }
    return "?";
}

inline ModelKind model_kind_from_name(const std::string& s) {
    if (s == "vit") return ModelKind::vit;
    if (s == "cnn") return ModelKind::cnn;
    if (s == "resnet") return ModelKind::resnet;
    throw std::invalid_argument("unknown model kind: " + s);
}

// ---------------------------------------------------------------------------
// CNN baseline: three valid conv stages, each followed by a 1x2 max pool,
// then a four-layer FC chain with dropout between FC layers. Input layout is
// [B, 1, 2, L] (one channel over the 2 x L I/Q grid).
// ---------------------------------------------------------------------------

struct CnnConfig {
    int input_len = 512;
    int fc1_input = 4060;  // declared width of FC1; checked against shape arithmetic
    std::array<int, 3> fc_hidden{512, 256, 80};
    double dropout = 0.2;
    int num_classes = 16;
};

// Shape arithmetic for the conv/pool stack. For input_len 512 this comes out
// to exactly 70 * 1 * 58 = 4060.
inline int cnn_flatten_size(const CnnConfig& cfg) {
    int h = 2, w = cfg.input_len;
    auto conv = [&](int kh, int kw) {
        h = h - kh + 1;
        w = w - kw + 1;
    };
    auto pool = [&] { w = w / 2; };
    conv(1, 7);
    pool();
    conv(1, 7);
    pool();
    conv(2, 7);
    pool();
    if (h <= 0 || w <= 0)
        throw std::invalid_argument("CnnConfig: input_len " + std::to_string(cfg.input_len) +
                                    " is too short for the conv stack");
    return 70 * h * w;
}

inline void validate(const CnnConfig& cfg) {
    const int actual = cnn_flatten_size(cfg);
    if (actual != cfg.fc1_input)
        throw std::invalid_argument("CnnConfig: configured FC1 input " + std::to_string(cfg.fc1_input) +
                                    " does not match actual flatten size " + std::to_string(actual) +
                                    " for input_len " + std::to_string(cfg.input_len));
}

template <typename T = float>
ParamSet<T> build_cnn_params(const CnnConfig& cfg, Rng& rng) {
    validate(cfg);
    ParamSet<T> ps;
    ps.add("conv1.k", uniform_fanin<T>({50, 1, 1, 7}, 1 * 7, rng));
    ps.add("conv1.b", uniform_fanin<T>({50}, 1 * 7, rng));
    ps.add("conv2.k", uniform_fanin<T>({70, 50, 1, 7}, 50 * 7, rng));
    ps.add("conv2.b", uniform_fanin<T>({70}, 50 * 7, rng));
    ps.add("conv3.k", uniform_fanin<T>({70, 70, 2, 7}, 70 * 14, rng));
    ps.add("conv3.b", uniform_fanin<T>({70}, 70 * 14, rng));
    int in = cfg.fc1_input;
    const std::array<int, 4> outs{cfg.fc_hidden[0], cfg.fc_hidden[1], cfg.fc_hidden[2], cfg.num_classes};
    for (int k = 0; k < 4; ++k) {
        const std::string p = "fc" + std::to_string(k + 1);
        ps.add(p + ".w", uniform_fanin<T>({in, outs[k]}, in, rng));
        ps.add(p + ".b", uniform_fanin<T>({outs[k]}, in, rng));
        in = outs[k];
    }
    return ps;
}

// x [B, 1, 2, L] -> logits [B, num_classes]
template <typename T>
int cnn_forward(Graph<T>& g, const CnnConfig& cfg, const BoundParams<T>& p, int x, bool training, Rng& rng) {
    const int64_t bsz = g.value(x).dim(0);
    int h = g.relu(g.conv2d(x, p("conv1.k"), p("conv1.b"), 1, 1, 0, 0));
    h = g.maxpool2d(h, 1, 2, 1, 2);
    h = g.relu(g.conv2d(h, p("conv2.k"), p("conv2.b"), 1, 1, 0, 0));
    h = g.maxpool2d(h, 1, 2, 1, 2);
    h = g.relu(g.conv2d(h, p("conv3.k"), p("conv3.b"), 1, 1, 0, 0));
    h = g.maxpool2d(h, 1, 2, 1, 2);
    h = g.reshape(h, {bsz, static_cast<int64_t>(cfg.fc1_input)});
    for (int k = 1; k <= 3; ++k) {
        h = g.relu(g.dense(h, p("fc" + std::to_string(k) + ".w"), p("fc" + std::to_string(k) + ".b")));
        if (training && cfg.dropout > 0.0) h = g.dropout(h, cfg.dropout, rng);
    }
    return g.dense(h, p("fc4.w"), p("fc4.b"));
}

// ---------------------------------------------------------------------------
// ResNet baseline: a 2->32 channel stem, five pre-activation residual units
// of 32 channels (two 1x3 convs each), a width-halving max pool after the
// stem and after every unit, then a 256->128->128->num_classes FC chain.
// Input layout is [B, 2, 1, L] (I/Q as channels).
// ---------------------------------------------------------------------------

struct ResNetConfig {
    int input_len = 512;
    int channels = 32;
    int res_layers = 5;
    int fc1_input = 256;  // declared flatten width; checked at build time
    std::array<int, 2> fc_hidden{128, 128};
    double dropout = 0.3;  // the reference table lists AlphaDropout(0.3); plain dropout here
    int num_classes = 16;
};

inline int resnet_flatten_size(const ResNetConfig& cfg) {
    int w = cfg.input_len;
    for (int k = 0; k < cfg.res_layers + 1; ++k) w /= 2;
    if (w <= 0)
        throw std::invalid_argument("ResNetConfig: input_len " + std::to_string(cfg.input_len) +
                                    " is too short for " + std::to_string(cfg.res_layers + 1) + " pools");
    return cfg.channels * w;
}

inline void validate(const ResNetConfig& cfg) {
    const int actual = resnet_flatten_size(cfg);
    if (actual != cfg.fc1_input)
        throw std::invalid_argument("ResNetConfig: configured FC1 input " + std::to_string(cfg.fc1_input) +
                                    " does not match actual flatten size " + std::to_string(actual) +
                                    " for input_len " + std::to_string(cfg.input_len));
}

template <typename T = float>
ParamSet<T> build_resnet_params(const ResNetConfig& cfg, Rng& rng) {
    validate(cfg);
    ParamSet<T> ps;
    const int ch = cfg.channels;
    ps.add("stem.k", uniform_fanin<T>({ch, 2, 1, 3}, 2 * 3, rng));
    ps.add("stem.b", uniform_fanin<T>({ch}, 2 * 3, rng));
    for (int u = 0; u < cfg.res_layers; ++u) {
        const std::string p = "res" + std::to_string(u) + ".";
        ps.add(p + "c1.k", uniform_fanin<T>({ch, ch, 1, 3}, ch * 3, rng));
        ps.add(p + "c1.b", uniform_fanin<T>({ch}, ch * 3, rng));
        ps.add(p + "c2.k", uniform_fanin<T>({ch, ch, 1, 3}, ch * 3, rng));
        ps.add(p + "c2.b", uniform_fanin<T>({ch}, ch * 3, rng));
    }
    int in = cfg.fc1_input;
    const std::array<int, 3> outs{cfg.fc_hidden[0], cfg.fc_hidden[1], cfg.num_classes};
    for (int k = 0; k < 3; ++k) {
        const std::string p = "fc" + std::to_string(k + 1);
        ps.add(p + ".w", uniform_fanin<T>({in, outs[k]}, in, rng));
        ps.add(p + ".b", uniform_fanin<T>({outs[k]}, in, rng));
        in = outs[k];
    }
    return ps;
}

// x [B, 2, 1, L] -> logits [B, num_classes]
template <typename T>
int resnet_forward(Graph<T>& g, const ResNetConfig& cfg, const BoundParams<T>& p, int x, bool training,
                   Rng& rng) {
    const int64_t bsz = g.value(x).dim(0);
    int h = g.relu(g.conv2d(x, p("stem.k"), p("stem.b"), 1, 1, 0, 1));
    h = g.maxpool2d(h, 1, 2, 1, 2);
    for (int u = 0; u < cfg.res_layers; ++u) {
        const std::string pre = "res" + std::to_string(u) + ".";
        int b = g.relu(h);
        b = g.conv2d(b, p(pre + "c1.k"), p(pre + "c1.b"), 1, 1, 0, 1);
        b = g.relu(b);
        b = g.conv2d(b, p(pre + "c2.k"), p(pre + "c2.b"), 1, 1, 0, 1);
        h = g.add(h, b);  // identity skip
        h = g.maxpool2d(h, 1, 2, 1, 2);
    }
    h = g.reshape(h, {bsz, static_cast<int64_t>(cfg.fc1_input)});
    for (int k = 1; k <= 2; ++k) {
        h = g.relu(g.dense(h, p("fc" + std::to_string(k) + ".w"), p("fc" + std::to_string(k) + ".b")));
        if (training && cfg.dropout > 0.0) h = g.dropout(h, cfg.dropout, rng);
    }
    return g.dense(h, p("fc3.w"), p("fc3.b"));
}

// ---- shared input packing ----

// CNN batches: [B, 1, 2, L]
template <typename T = float>
Tensor<T> batch_grid_1ch(const std::vector<const IQFrame*>& frames, int input_len) {
    Tensor<T> out({static_cast<int64_t>(frames.size()), 1, 2, input_len});
    for (size_t b = 0; b < frames.size(); ++b) {
        if (static_cast<int>(frames[b]->length()) != input_len)
            throw std::invalid_argument("batch_grid_1ch: frame length mismatch");
        T* base = out.data() + static_cast<int64_t>(b) * 2 * input_len;
        for (int t = 0; t < input_len; ++t) {
            base[t] = static_cast<T>(frames[b]->i[t]);
            base[input_len + t] = static_cast<T>(frames[b]->q[t]);
        }
    }
    return out;
}

// ResNet batches: [B, 2, 1, L]
template <typename T = float>
Tensor<T> batch_channels_iq(const std::vector<const IQFrame*>& frames, int input_len) {
    Tensor<T> out({static_cast<int64_t>(frames.size()), 2, 1, input_len});
    for (size_t b = 0; b < frames.size(); ++b) {
        if (static_cast<int>(frames[b]->length()) != input_len)
            throw std::invalid_argument("batch_channels_iq: frame length mismatch");
        T* base = out.data() + static_cast<int64_t>(b) * 2 * input_len;
        for (int t = 0; t < input_len; ++t) {
            base[t] = static_cast<T>(frames[b]->i[t]);
            base[input_len + t] = static_cast<T>(frames[b]->q[t]);
        }
    }
    return out;
}

}  // namespace amrvit
