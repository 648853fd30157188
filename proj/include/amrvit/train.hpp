#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "amrvit/augment.hpp"
#include "amrvit/baselines.hpp"
#include "amrvit/dataset.hpp"
#include "amrvit/eval.hpp"
#include "amrvit/losses.hpp"
#include "amrvit/optim.hpp"
#include "amrvit/vit.hpp"

namespace amrvit {

struct TrainConfig {
    int epochs = 40;
    int batch_size = 128;
    uint64_t seed = 1;
    Scenario scenario = Scenario::ReconOnly;
    double label_fraction = 0.1;  // provenance; masking happens upstream
    LrSchedule schedule;
    double weight_decay = 0.0;
    LossWeights weights;
    double finetune_alpha = 0.0;  // alpha used by finetune(); pretraining uses weights.alpha
    double temperature = 0.5;
    PseudoConfig pseudo;
    bool pseudo_enabled = true;
    bool freeze_encoder = false;
    bool augment = true;
    AugmentParams aug;
    double early_stop_train_acc = 0.0;  // > 0: stop once train accuracy reaches this
    bool track_train_acc = false;
};

struct EpochLog {
    int epoch = 0;
    double lr = 0.0;
    double total = 0.0;
    double recon = 0.0;
    double contrastive = 0.0;
    double cls = 0.0;
    long pseudo_count = 0;
    double val_acc = std::nan("");
    double train_acc = std::nan("");
};

struct TrainResult {
    ParamSet<float> params;
    std::vector<EpochLog> history;
    int best_epoch = -1;  // epoch of the returned checkpoint (-1: last)
};

// Per-epoch metrics CSV, one row per epoch. NaN fields are left empty.
inline void write_history_csv(const std::vector<EpochLog>& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_history_csv: cannot open " + path);
    out << "epoch,lr,total_loss,recon_loss,contrastive_loss,cls_loss,pseudo_count,val_acc\n";
    for (const auto& e : history) {
        out << e.epoch << "," << e.lr << "," << e.total << "," << e.recon << "," << e.contrastive << ","
            << e.cls << "," << e.pseudo_count << ",";
        if (!std::isnan(e.val_acc)) out << e.val_acc;
        out << "\n";
    }
}

namespace detail {

inline std::vector<IQFrame> normalize_all(const Dataset& ds) {
    std::vector<IQFrame> out(ds.samples.size());
    for (size_t k = 0; k < ds.samples.size(); ++k) out[k] = rms_normalize(ds.samples[k].frame);
    return out;
}

inline std::vector<size_t> shuffled_epoch_order(std::vector<size_t> idx, uint64_t seed, int epoch) {
    Rng rng(mix_seed(seed ^ 0x0badf00dULL, static_cast<uint64_t>(epoch)));
    for (size_t k = idx.size(); k > 1; --k) std::swap(idx[k - 1], idx[rng.uniform_int(static_cast<int64_t>(k))]);
    return idx;
}

// contiguous batch ranges; a trailing singleton is folded into the previous
// batch when pairs are required (NT-Xent needs >= 2 rows)
inline std::vector<std::pair<size_t, size_t>> batch_ranges(size_t n, int batch, bool need_pairs) {
    std::vector<std::pair<size_t, size_t>> out;
    for (size_t start = 0; start < n; start += batch) out.push_back({start, std::min(n, start + static_cast<size_t>(batch))});
    if (need_pairs && out.size() >= 2 && out.back().second - out.back().first < 2) {
        out[out.size() - 2].second = out.back().second;
        out.pop_back();
    }
    return out;
}

struct VitEpochStats {
    double total = 0, recon = 0, contrastive = 0, cls = 0;
    long pseudo_count = 0;
};

// One optimization epoch over the ViT path. `rows` are dataset indices.
inline VitEpochStats run_vit_epoch(const Dataset& ds, const std::vector<IQFrame>& normalized,
                                   const std::vector<size_t>& rows, ParamSet<float>& params,
                                   AdamState<float>& adam, const ViTConfig& vit_cfg, const TrainConfig& cfg,
                                   int epoch, const LossWeights& weights, bool pseudo_active,
                                   const std::vector<int>* fixed_pseudo_by_sample) {
    const bool need_view2 = weights.alpha > 0 && weights.w_contrast > 0 && scenario_uses_contrastive(cfg.scenario);
    const bool need_clean = weights.alpha > 0 && weights.w_recon > 0 && scenario_uses_recon(cfg.scenario);
    const auto order = shuffled_epoch_order(rows, cfg.seed, epoch);
    const auto ranges = batch_ranges(order.size(), cfg.batch_size, need_view2);
    Rng drop_rng(mix_seed(cfg.seed ^ 0xd50f0000ULL, static_cast<uint64_t>(epoch)));
    AdamConfig adam_cfg{lr_at(cfg.schedule, epoch), 0.9, 0.999, 1e-8, cfg.weight_decay};

    VitEpochStats stats;
    for (const auto& [lo, hi] : ranges) {
        const size_t bsz = hi - lo;
        std::vector<IQFrame> v1(bsz), v2;
        if (need_view2) v2.resize(bsz);
        SemiBatch batch;
        batch.clean.resize(bsz);
        batch.view1.resize(bsz);
        if (need_view2) batch.view2.resize(bsz);
        batch.labels.resize(bsz);
        batch.labeled.resize(bsz);
        std::vector<int> fixed(bsz, -1);
        for (size_t k = 0; k < bsz; ++k) {
            const size_t si = order[lo + k];
            const IQFrame& clean = normalized[si];
            batch.clean[k] = &clean;
            if (cfg.augment) {
                Rng r1(mix_seed(cfg.seed ^ 0xa1160001ULL, static_cast<uint64_t>(epoch), si));
                v1[k] = augment(clean, cfg.aug, r1).first;
            } else {
                v1[k] = clean;
            }
            batch.view1[k] = &v1[k];
            if (need_view2) {
                Rng r2(mix_seed(cfg.seed ^ 0xa1160002ULL, static_cast<uint64_t>(epoch), si));
                v2[k] = cfg.augment ? augment(clean, cfg.aug, r2).first : clean;
                batch.view2[k] = &v2[k];
            }
            batch.labels[k] = ds.samples[si].class_id;
            batch.labeled[k] = ds.samples[si].labeled ? 1 : 0;
            if (fixed_pseudo_by_sample) fixed[k] = (*fixed_pseudo_by_sample)[si];
        }

        GraphF g;
        const BoundParams<float> bp = bind_params(g, params);
        const LossComponents comp =
            semi_supervised_loss(g, vit_cfg, bp, batch, cfg.scenario, weights, cfg.temperature, cfg.pseudo,
                                 pseudo_active, true, drop_rng,
                                 fixed_pseudo_by_sample ? &fixed : nullptr);
        g.backward(comp.loss_node);
        std::vector<TensorF> grads(params.items.size());
        for (size_t k = 0; k < params.items.size(); ++k)
            if (params.items[k].trainable) grads[k] = g.grad(bp.ids[k]);
        adam_step(params, grads, adam, adam_cfg);

        const double wgt = static_cast<double>(bsz);
        stats.total += comp.total * wgt;
        stats.recon += comp.recon * wgt;
        stats.contrastive += comp.contrastive * wgt;
        stats.cls += comp.cls * wgt;
        stats.pseudo_count += comp.pseudo_count;
    }
    const double n = static_cast<double>(order.size());
    stats.total /= n;
    stats.recon /= n;
    stats.contrastive /= n;
    stats.cls /= n;
    return stats;
}

}  // namespace detail

// Unsupervised pretraining: labels are never consulted; every train sample is
// augmented once per epoch (twice when a contrastive term needs paired views).
inline TrainResult pretrain(const Dataset& ds, Scenario scenario, const ViTConfig& vit_cfg,
                            const TrainConfig& cfg_in) {
    TrainConfig cfg = cfg_in;
    cfg.scenario = scenario;
    vit_cfg.validate();
    if (scenario_uses_contrastive(scenario) && cfg.batch_size < 2)
        throw std::invalid_argument("pretrain: contrastive scenarios need batch_size >= 2");
    const auto rows = ds.indices_of(Split::train);
    if (rows.empty()) throw std::invalid_argument("pretrain: train split is empty");

    Rng init_rng(mix_seed(cfg.seed, 0x171717ULL));
    TrainResult res;
    res.params = build_vit_params<float>(vit_cfg, init_rng);
    AdamState<float> adam = AdamState<float>::init(res.params);
    LossWeights w = cfg.weights;
    w.beta = 0.0;  // pretraining is purely unsupervised
    const auto normalized = detail::normalize_all(ds);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto stats = detail::run_vit_epoch(ds, normalized, rows, res.params, adam, vit_cfg, cfg, epoch,
                                                 w, false, nullptr);
        EpochLog log;
        log.epoch = epoch;
        log.lr = lr_at(cfg.schedule, epoch);
        log.total = stats.total;
        log.recon = stats.recon;
        log.contrastive = stats.contrastive;
        log.cls = 0.0;
        res.history.push_back(log);
        if (!res.params.all_finite())
            throw std::runtime_error("pretrain: non-finite parameters after epoch " + std::to_string(epoch));
    }
    return res;
}

// Semi-supervised fine-tuning from pretrained (or fresh) parameters over an
// explicit train-row subset. The whole network trains unless freeze_encoder
// leaves only the classifier trainable. Pseudo-labeling starts after the
// warmup epochs. Returns the best-validation checkpoint when a val split
// exists.
inline TrainResult finetune_rows(const Dataset& ds, const ViTConfig& vit_cfg, ParamSet<float> init,
                                 const TrainConfig& cfg, const std::vector<size_t>& rows) {
    vit_cfg.validate();
    if (rows.empty()) throw std::invalid_argument("finetune: train split is empty");
    bool any_labeled = false;
    for (size_t k : rows) any_labeled = any_labeled || ds.samples[k].labeled;
    if (!any_labeled) throw std::invalid_argument("finetune: no labeled samples in train split");

    TrainResult res;
    res.params = std::move(init);
    if (cfg.freeze_encoder)
        for (auto& item : res.params.items)
            item.trainable = item.name.rfind("cls.", 0) == 0;
    AdamState<float> adam = AdamState<float>::init(res.params);
    LossWeights w = cfg.weights;
    w.alpha = cfg.finetune_alpha;
    const auto normalized = detail::normalize_all(ds);
    const bool has_val = ds.count(Split::val) > 0;
    const auto unlabeled_rows = [&] {
        std::vector<size_t> u;
        for (size_t k : rows)
            if (!ds.samples[k].labeled) u.push_back(k);
        return u;
    }();

    ModelSpec spec;
    spec.kind = ModelKind::vit;
    spec.vit = vit_cfg;

    ParamSet<float> best;
    double best_val = -1.0;
    int best_epoch = -1;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const bool pseudo_active = cfg.pseudo_enabled && epoch >= cfg.pseudo.warmup_epochs;
        std::vector<int> fixed_by_sample;
        if (pseudo_active && cfg.pseudo.per_epoch_refresh && !unlabeled_rows.empty()) {
            // freeze this epoch's pseudo-labels from clean-frame predictions
            fixed_by_sample.assign(ds.samples.size(), -1);
            std::vector<const IQFrame*> frames(unlabeled_rows.size());
            for (size_t k = 0; k < unlabeled_rows.size(); ++k) frames[k] = &normalized[unlabeled_rows[k]];
            for (size_t start = 0; start < frames.size(); start += 256) {
                const size_t stop = std::min(frames.size(), start + 256);
                const std::vector<const IQFrame*> chunk(frames.begin() + start, frames.begin() + stop);
                const TensorF logits = forward_logits(spec, res.params, chunk);
                TensorF probs(logits.shape);
                for (size_t r = 0; r < chunk.size(); ++r) {
                    const auto row = softmax_row_value(logits.data() + r * vit_cfg.num_classes, vit_cfg.num_classes);
                    std::copy(row.begin(), row.end(), probs.v.begin() + r * vit_cfg.num_classes);
                }
                const auto sel = pseudo_label_select(probs, cfg.pseudo.threshold);
                for (size_t s = 0; s < sel.indices.size(); ++s)
                    fixed_by_sample[unlabeled_rows[start + sel.indices[s]]] = sel.labels[s];
            }
        }
        const auto stats = detail::run_vit_epoch(ds, normalized, rows, res.params, adam, vit_cfg, cfg, epoch,
                                                 w, pseudo_active,
                                                 fixed_by_sample.empty() ? nullptr : &fixed_by_sample);
        EpochLog log;
        log.epoch = epoch;
        log.lr = lr_at(cfg.schedule, epoch);
        log.total = stats.total;
        log.recon = stats.recon;
        log.contrastive = stats.contrastive;
        log.cls = stats.cls;
        log.pseudo_count = stats.pseudo_count;
        if (has_val) {
            log.val_acc = evaluate(spec, res.params, ds, Split::val).overall;
            if (log.val_acc > best_val) {
                best_val = log.val_acc;
                best = res.params;
                best_epoch = epoch;
            }
        }
        if (cfg.track_train_acc || cfg.early_stop_train_acc > 0.0)
            log.train_acc = evaluate(spec, res.params, ds, Split::train).overall;
        res.history.push_back(log);
        if (!res.params.all_finite())
            throw std::runtime_error("finetune: non-finite parameters after epoch " + std::to_string(epoch));
        if (cfg.early_stop_train_acc > 0.0 && log.train_acc >= cfg.early_stop_train_acc) break;
    }
    if (best_epoch >= 0) {
        res.params = std::move(best);
        res.best_epoch = best_epoch;
    }
    return res;
}

inline TrainResult finetune(const Dataset& ds, const ViTConfig& vit_cfg, ParamSet<float> init,
                            const TrainConfig& cfg) {
    return finetune_rows(ds, vit_cfg, std::move(init), cfg, ds.indices_of(Split::train));
}

// Supervised reference training for any of the three models. Only labeled
// train rows are consumed; the optimizer, schedule, and augmentation policy
// match the semi-supervised loops, with pseudo-labeling off.
inline TrainResult train_supervised(ModelKind kind, const Dataset& ds, const ModelSpec& spec,
                                    const TrainConfig& cfg_in) {
    TrainConfig cfg = cfg_in;
    cfg.pseudo_enabled = false;
    std::vector<size_t> rows;
    for (size_t k : ds.indices_of(Split::train))
        if (ds.samples[k].labeled) rows.push_back(k);
    if (rows.empty()) throw std::invalid_argument("train_supervised: no labeled train samples");

    if (kind == ModelKind::vit) {
        Rng init_rng(mix_seed(cfg.seed, 0x272727ULL));
        TrainConfig ft = cfg;
        ft.finetune_alpha = 0.0;
        return finetune_rows(ds, spec.vit, build_vit_params<float>(spec.vit, init_rng), ft, rows);
    }

    Rng init_rng(mix_seed(cfg.seed, 0x383838ULL));
    TrainResult res;
    if (kind == ModelKind::cnn)
        res.params = build_cnn_params<float>(spec.cnn, init_rng);
    else
        res.params = build_resnet_params<float>(spec.resnet, init_rng);
    AdamState<float> adam = AdamState<float>::init(res.params);
    const auto normalized = detail::normalize_all(ds);
    const bool has_val = ds.count(Split::val) > 0;
    const int input_len = kind == ModelKind::cnn ? spec.cnn.input_len : spec.resnet.input_len;

    ParamSet<float> best;
    double best_val = -1.0;
    int best_epoch = -1;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = detail::shuffled_epoch_order(rows, cfg.seed, epoch);
        const auto ranges = detail::batch_ranges(order.size(), cfg.batch_size, false);
        Rng drop_rng(mix_seed(cfg.seed ^ 0xd50f0000ULL, static_cast<uint64_t>(epoch)));
        AdamConfig adam_cfg{lr_at(cfg.schedule, epoch), 0.9, 0.999, 1e-8, cfg.weight_decay};
        double total = 0.0;
        for (const auto& [lo, hi] : ranges) {
            const size_t bsz = hi - lo;
            std::vector<IQFrame> views(bsz);
            std::vector<const IQFrame*> frames(bsz);
            std::vector<int> labels(bsz);
            for (size_t k = 0; k < bsz; ++k) {
                const size_t si = order[lo + k];
                if (cfg.augment) {
                    Rng r1(mix_seed(cfg.seed ^ 0xa1160001ULL, static_cast<uint64_t>(epoch), si));
                    views[k] = augment(normalized[si], cfg.aug, r1).first;
                } else {
                    views[k] = normalized[si];
                }
                frames[k] = &views[k];
                labels[k] = ds.samples[si].class_id;
            }
            GraphF g;
            const BoundParams<float> bp = bind_params(g, res.params);
            int logits;
            if (kind == ModelKind::cnn) {
                const int x = g.input(batch_grid_1ch<float>(frames, input_len));
                logits = cnn_forward(g, spec.cnn, bp, x, true, drop_rng);
            } else {
                const int x = g.input(batch_channels_iq<float>(frames, input_len));
                logits = resnet_forward(g, spec.resnet, bp, x, true, drop_rng);
            }
            const int loss = g.cross_entropy(logits, labels);
            g.backward(loss);
            std::vector<TensorF> grads(res.params.items.size());
            for (size_t k = 0; k < res.params.items.size(); ++k) grads[k] = g.grad(bp.ids[k]);
            adam_step(res.params, grads, adam, adam_cfg);
            total += static_cast<double>(g.value(loss).v[0]) * static_cast<double>(bsz);
        }
        EpochLog log;
        log.epoch = epoch;
        log.lr = adam_cfg.lr;
        log.total = total / static_cast<double>(order.size());
        log.cls = log.total;
        if (has_val) {
            log.val_acc = evaluate(spec, res.params, ds, Split::val).overall;
            if (log.val_acc > best_val) {
                best_val = log.val_acc;
                best = res.params;
                best_epoch = epoch;
            }
        }
        if (cfg.track_train_acc || cfg.early_stop_train_acc > 0.0)
            log.train_acc = evaluate(spec, res.params, ds, Split::train).overall;
        res.history.push_back(log);
        if (!res.params.all_finite())
            throw std::runtime_error("train_supervised: non-finite parameters after epoch " +
                                     std::to_string(epoch));
        if (cfg.early_stop_train_acc > 0.0 && log.train_acc >= cfg.early_stop_train_acc) break;
    }
    if (best_epoch >= 0) {
        res.params = std::move(best);
        res.best_epoch = best_epoch;
    }
    return res;
}

}  // namespace amrvit
