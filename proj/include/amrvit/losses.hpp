#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "amrvit/graph.hpp"
#include "amrvit/iq.hpp"
#include "amrvit/tensor.hpp"
#include "amrvit/vit.hpp"

namespace amrvit {

// Eq-style combination weights: total = alpha * L_u + beta * L_s, with
// per-objective scalars inside the unsupervised term.
struct LossWeights {
    double alpha = 1.0;
    double beta = 1.0;
    double w_recon = 1.0;
    double w_contrast = 1.0;

    void validate() const {
        if (alpha < 0 || beta < 0 || w_recon < 0 || w_contrast < 0)
            throw std::invalid_argument("LossWeights: weights must be >= 0");
        if (alpha == 0 && beta == 0) throw std::invalid_argument("LossWeights: at least one weight must be > 0");
    }
};

struct PseudoConfig {
    double threshold = 0.8;
    double weight = 0.5;
    int warmup_epochs = 5;
    bool per_epoch_refresh = false;  // default: labels refreshed per batch

    void validate() const {
        if (threshold <= 0.0 || threshold >= 1.0)
            throw std::invalid_argument("PseudoConfig: threshold must be in (0, 1)");
        if (weight < 0.0 || weight > 1.0) throw std::invalid_argument("PseudoConfig: weight must be in [0, 1]");
        if (warmup_epochs < 0) throw std::invalid_argument("PseudoConfig: negative warmup");
    }
};

enum class Scenario { ReconOnly = 1, ReconPlusContrastive = 2, ContrastiveOnly = 3 };

inline const char* scenario_name(Scenario s) {
    switch (s) {
        case Scenario::ReconOnly: return "recon";
        case Scenario::ReconPlusContrastive: return "recon+contrastive";
        case Scenario::ContrastiveOnly: return "contrastive";
    }
    return "?";
}

inline Scenario scenario_from_name(const std::string& s) {
    if (s == "recon" || s == "1") return Scenario::ReconOnly;
    if (s == "recon+contrastive" || s == "2") return Scenario::ReconPlusContrastive;
    if (s == "contrastive" || s == "3") return Scenario::ContrastiveOnly;
    throw std::invalid_argument("unknown scenario: " + s);
}

inline bool scenario_uses_recon(Scenario s) { return s != Scenario::ContrastiveOnly; }
inline bool scenario_uses_contrastive(Scenario s) { return s != Scenario::ReconOnly; }

// ---- reconstruction ----

// Mean squared error over all 2L values of a frame pair.
inline double reconstruction_loss(const IQFrame& pred, const IQFrame& original) {
    if (pred.length() != original.length())
        throw std::invalid_argument("reconstruction_loss: length mismatch");
    double acc = 0.0;
    for (size_t n = 0; n < pred.length(); ++n) {
        const double di = static_cast<double>(pred.i[n]) - original.i[n];
        const double dq = static_cast<double>(pred.q[n]) - original.q[n];
        acc += di * di + dq * dq;
    }
    return acc / static_cast<double>(2 * pred.length());
}

// Clean frames packed as the decoder output layout [B, 2, L] (I row then Q row).
template <typename T = float>
Tensor<T> recon_target(const std::vector<const IQFrame*>& frames, int input_len) {
    Tensor<T> out({static_cast<int64_t>(frames.size()), 2, input_len});
    for (size_t b = 0; b < frames.size(); ++b) {
        if (static_cast<int>(frames[b]->length()) != input_len)
            throw std::invalid_argument("recon_target: frame length mismatch");
        T* base = out.data() + static_cast<int64_t>(b) * 2 * input_len;
        for (int t = 0; t < input_len; ++t) {
            base[t] = static_cast<T>(frames[b]->i[t]);
            base[input_len + t] = static_cast<T>(frames[b]->q[t]);
        }
    }
    return out;
}

// ---- contrastive (NT-Xent) ----

// z1, z2: [B, d] unit rows, paired by index. Stacks both views, masks the
// diagonal, and takes the mean cross-entropy of each anchor against its
// partner over the remaining 2B-1 candidates at temperature tau.
template <typename T>
int nt_xent(Graph<T>& g, int z1, int z2, T tau) {
    const auto& a = g.value(z1);
    const auto& b = g.value(z2);
    if (a.ndim() != 2 || !a.same_shape(b)) throw std::invalid_argument("nt_xent: views must be matching [B, d]");
    const int64_t bsz = a.dim(0);
    if (bsz < 2) throw std::invalid_argument("nt_xent: need batch size >= 2");
    if (tau <= T{0}) throw std::invalid_argument("nt_xent: temperature must be positive");

    const int z = g.concat_rows(z1, z2);
    int sim = g.matmul_nt(z, z, T{1} / tau);
    Tensor<T> mask({2 * bsz, 2 * bsz});
    for (int64_t k = 0; k < 2 * bsz; ++k) mask.v[k * 2 * bsz + k] = static_cast<T>(-1e9);
    sim = g.add_const(sim, mask);
    std::vector<int> partners(2 * bsz);
    for (int64_t k = 0; k < 2 * bsz; ++k) partners[k] = static_cast<int>((k + bsz) % (2 * bsz));
    return g.cross_entropy(sim, std::move(partners));
}

// Value-level entry point (pre: unit-norm rows).
inline double contrastive_loss(const TensorF& z1, const TensorF& z2, double tau) {
    for (const TensorF* z : {&z1, &z2}) {
        const int64_t d = z->dim(z->ndim() - 1);
        for (int64_t r = 0; r < z->dim(0); ++r) {
            double s = 0;
            for (int64_t j = 0; j < d; ++j) s += static_cast<double>(z->v[r * d + j]) * z->v[r * d + j];
            if (std::abs(std::sqrt(s) - 1.0) > 1e-3)
                throw std::invalid_argument("contrastive_loss: row " + std::to_string(r) + " is not unit norm");
        }
    }
    GraphF g;
    return g.value(nt_xent<float>(g, g.input(z1), g.input(z2), static_cast<float>(tau))).v[0];
}

// ---- classification ----

inline double classification_loss(const TensorF& logits, const std::vector<int>& labels) {
    GraphF g;
    return g.value(g.cross_entropy(g.input(logits), labels)).v[0];
}

// ---- pseudo-labels ----

struct PseudoSelection {
    std::vector<int> indices;
    std::vector<int> labels;
};

// Rows whose max probability strictly exceeds the threshold; label is the
// argmax with ties resolved to the lowest class index. Rows must be
// normalized probability vectors.
inline PseudoSelection pseudo_label_select(const TensorF& probs, double threshold) {
    if (probs.ndim() != 2) throw std::invalid_argument("pseudo_label_select: probs must be [B, K]");
    const int64_t bsz = probs.dim(0), k = probs.dim(1);
    PseudoSelection sel;
    for (int64_t r = 0; r < bsz; ++r) {
        double sum = 0.0;
        int best = 0;
        for (int64_t j = 0; j < k; ++j) {
            sum += probs.v[r * k + j];
            if (probs.v[r * k + j] > probs.v[r * k + best]) best = static_cast<int>(j);
        }
        if (std::abs(sum - 1.0) > 1e-4)
            throw std::invalid_argument("pseudo_label_select: row " + std::to_string(r) +
                                        " does not sum to 1 (got " + std::to_string(sum) + ")");
        if (static_cast<double>(probs.v[r * k + best]) > threshold) {
            sel.indices.push_back(static_cast<int>(r));
            sel.labels.push_back(best);
        }
    }
    return sel;
}

// ---- the combined objective ----

struct SemiBatch {
    std::vector<const IQFrame*> clean;  // RMS-normalized reconstruction targets
    std::vector<const IQFrame*> view1;  // model inputs (augmented in training)
    std::vector<const IQFrame*> view2;  // second views; required for contrastive terms
    std::vector<int> labels;            // ground-truth ids; ignored where !labeled
    std::vector<uint8_t> labeled;

    size_t size() const { return view1.size(); }
};

struct LossComponents {
    double total = 0.0;
    double recon = 0.0;        // raw MSE term
    double contrastive = 0.0;  // raw NT-Xent term
    double cls = 0.0;          // L_s = labeled CE + pseudo.weight * pseudo CE
    double cls_labeled = 0.0;
    double cls_pseudo = 0.0;
    long pseudo_count = 0;
    bool contrastive_evaluated = false;
    bool decoder_invoked = false;
    int loss_node = -1;
    int logits_node = -1;
};

inline std::vector<float> softmax_row_value(const float* x, int64_t k) {
    std::vector<float> p(k);
    float mx = x[0];
    for (int64_t j = 1; j < k; ++j) mx = std::max(mx, x[j]);
    float sum = 0;
    for (int64_t j = 0; j < k; ++j) {
        p[j] = std::exp(x[j] - mx);
        sum += p[j];
    }
    for (auto& v : p) v /= sum;
    return p;
}

// Builds the combined semi-supervised objective on the ViT path:
//   total = alpha * (w_recon * recon + w_contrast * contrastive) + beta * L_s
// Scenario gates are structural: a disabled term is never built into the
// graph. Pseudo-label selection reads the current logits outside the graph,
// so only the cross-entropy of the selected rows carries gradient.
template <typename T>
LossComponents semi_supervised_loss(Graph<T>& g, const ViTConfig& cfg, const BoundParams<T>& p,
                                    const SemiBatch& batch, Scenario scenario, const LossWeights& w,
                                    double tau, const PseudoConfig& pseudo, bool pseudo_active,
                                    bool training, Rng& rng,
                                    const std::vector<int>* fixed_pseudo_labels = nullptr) {
    w.validate();
    if (batch.size() == 0) throw std::invalid_argument("semi_supervised_loss: empty batch");
    const int64_t bsz = static_cast<int64_t>(batch.size());

    const int x1 = g.input(batch_patchify<T>(batch.view1, cfg));
    const int tokens1 = vit_encode(g, cfg, p, x1, training, rng);
    int pooled = -1;

    LossComponents out;
    std::vector<std::pair<int, T>> terms;

    const bool want_recon = w.alpha > 0 && w.w_recon > 0 && scenario_uses_recon(scenario);
    const bool want_contrast = w.alpha > 0 && w.w_contrast > 0 && scenario_uses_contrastive(scenario);
    if (want_recon) {
        if (batch.clean.size() != batch.size())
            throw std::invalid_argument("semi_supervised_loss: missing reconstruction targets");
        int dec_in = tokens1;
        if (!cfg.decoder_from_tokens) {
            pooled = vit_pool(g, tokens1);
            dec_in = pooled;
        }
        const int dec = vit_decode(g, cfg, p, dec_in);
        const int rn = g.mse(dec, recon_target<T>(batch.clean, cfg.input_len));
        out.recon = static_cast<double>(g.value(rn).v[0]);
        out.decoder_invoked = true;
        terms.push_back({rn, static_cast<T>(w.alpha * w.w_recon)});
    }
    if (want_contrast) {
        if (batch.view2.size() != batch.size())
            throw std::invalid_argument("semi_supervised_loss: contrastive scenario needs paired views");
        if (bsz < 2) throw std::invalid_argument("semi_supervised_loss: contrastive term needs batch >= 2");
        const int x2 = g.input(batch_patchify<T>(batch.view2, cfg));
        const int tokens2 = vit_encode(g, cfg, p, x2, training, rng);
        if (pooled < 0) pooled = vit_pool(g, tokens1);
        const int z1 = vit_project(g, p, pooled);
        const int z2 = vit_project(g, p, vit_pool(g, tokens2));
        const int cn = nt_xent(g, z1, z2, static_cast<T>(tau));
        out.contrastive = static_cast<double>(g.value(cn).v[0]);
        out.contrastive_evaluated = true;
        terms.push_back({cn, static_cast<T>(w.alpha * w.w_contrast)});
    }

    if (w.beta > 0) {
        if (batch.labels.size() != batch.size() || batch.labeled.size() != batch.size())
            throw std::invalid_argument("semi_supervised_loss: labels/mask size mismatch");
        if (pooled < 0) pooled = vit_pool(g, tokens1);
        const int logits = vit_classify(g, p, pooled);
        out.logits_node = logits;

        std::vector<T> wl(bsz, T{0});
        std::vector<int> labels_full(bsz, 0);
        int64_t n_labeled = 0;
        for (int64_t r = 0; r < bsz; ++r)
            if (batch.labeled[r]) {
                wl[r] = T{1};
                labels_full[r] = batch.labels[r];
                ++n_labeled;
            }
        if (n_labeled > 0) {
            const int ce = g.cross_entropy(logits, labels_full, wl, static_cast<T>(n_labeled));
            out.cls_labeled = static_cast<double>(g.value(ce).v[0]);
            terms.push_back({ce, static_cast<T>(w.beta)});
        }

        if (pseudo_active) {
            pseudo.validate();
            std::vector<T> wp(bsz, T{0});
            std::vector<int> plabels(bsz, 0);
            int64_t n_pseudo = 0;
            const auto& lv = g.value(logits);
            for (int64_t r = 0; r < bsz; ++r) {
                if (batch.labeled[r]) continue;  // never pseudo-label ground-truth rows
                int lbl = -1;
                if (fixed_pseudo_labels) {
                    lbl = (*fixed_pseudo_labels)[r];
                } else {
                    // per-batch refresh: read the current prediction
                    const T* row = lv.data() + r * cfg.num_classes;
                    int best = 0;
                    T mx = row[0];
                    for (int j = 1; j < cfg.num_classes; ++j)
                        if (row[j] > mx) {
                            mx = row[j];
                            best = j;
                        }
                    T sum = 0;
                    for (int j = 0; j < cfg.num_classes; ++j) sum += std::exp(row[j] - mx);
                    const double conf = 1.0 / static_cast<double>(sum);  // softmax value at the argmax
                    if (conf > pseudo.threshold) lbl = best;
                }
                if (lbl >= 0) {
                    wp[r] = T{1};
                    plabels[r] = lbl;
                    ++n_pseudo;
                }
            }
            out.pseudo_count = n_pseudo;
            if (n_pseudo > 0) {
                const int ce = g.cross_entropy(logits, plabels, wp, static_cast<T>(n_pseudo));
                out.cls_pseudo = static_cast<double>(g.value(ce).v[0]);
                terms.push_back({ce, static_cast<T>(w.beta * pseudo.weight)});
            }
        }
        out.cls = out.cls_labeled + pseudo.weight * out.cls_pseudo;
    }

    if (terms.empty()) throw std::invalid_argument("semi_supervised_loss: no active loss terms");
    out.loss_node = g.wsum(terms);
    out.total = static_cast<double>(g.value(out.loss_node).v[0]);
    return out;
}

}  // namespace amrvit
