#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "amrvit/baselines.hpp"
#include "amrvit/dataset.hpp"
#include "amrvit/graph.hpp"
#include "amrvit/losses.hpp"
#include "amrvit/params.hpp"
#include "amrvit/vit.hpp"

namespace amrvit {

struct ModelSpec {
    ModelKind kind = ModelKind::vit;
    ViTConfig vit;
    CnnConfig cnn;
    ResNetConfig resnet;

    int input_len() const {
        switch (kind) {
            case ModelKind::vit: return vit.input_len;
            case ModelKind::cnn: return cnn.input_len;
            case ModelKind::resnet: return resnet.input_len;
        }
        return 0;
    }
    int num_classes() const {
        switch (kind) {
            case ModelKind::vit: return vit.num_classes;
            case ModelKind::cnn: return cnn.num_classes;
            case ModelKind::resnet: return resnet.num_classes;
        }
        return 0;
    }
};

namespace detail {
inline Rng& dummy_rng() {
    static Rng rng(0);  // never consumed in inference mode
    return rng;
}
}  // namespace detail

// Inference logits for a batch of RMS-normalized frames.
inline TensorF forward_logits(const ModelSpec& spec, const ParamSet<float>& params,
                              const std::vector<const IQFrame*>& frames) {
    GraphF g;
    BoundParams<float> p;
    p.ps = &params;
    p.ids.reserve(params.items.size());
    for (const auto& it : params.items) p.ids.push_back(g.input(it.value));
    int logits = -1;
    switch (spec.kind) {
        case ModelKind::vit: {
            const int x = g.input(batch_patchify<float>(frames, spec.vit));
            const int tokens = vit_encode(g, spec.vit, p, x, false, detail::dummy_rng());
            logits = vit_classify(g, p, vit_pool(g, tokens));
            break;
        }
        case ModelKind::cnn: {
            const int x = g.input(batch_grid_1ch<float>(frames, spec.cnn.input_len));
            logits = cnn_forward(g, spec.cnn, p, x, false, detail::dummy_rng());
            break;
        }
        case ModelKind::resnet: {
            const int x = g.input(batch_channels_iq<float>(frames, spec.resnet.input_len));
            logits = resnet_forward(g, spec.resnet, p, x, false, detail::dummy_rng());
            break;
        }
    }
    return g.value(logits);
}

inline int argmax_lowest(const float* row, int k) {
    int best = 0;
    for (int j = 1; j < k; ++j)
        if (row[j] > row[best]) best = j;
    return best;
}

// Argmax predictions; ties resolve to the lowest class index.
inline std::vector<int> predict_classes(const ModelSpec& spec, const ParamSet<float>& params,
                                        const std::vector<const IQFrame*>& frames, int batch = 256) {
    std::vector<int> preds(frames.size());
    const int k = spec.num_classes();
    for (size_t start = 0; start < frames.size(); start += batch) {
        const size_t stop = std::min(frames.size(), start + batch);
        const std::vector<const IQFrame*> chunk(frames.begin() + start, frames.begin() + stop);
        const TensorF logits = forward_logits(spec, params, chunk);
        for (size_t r = 0; r < chunk.size(); ++r)
            preds[start + r] = argmax_lowest(logits.data() + r * k, k);
    }
    return preds;
}

struct MetricsRecord {
    double overall = 0.0;
    std::vector<double> per_class;
    std::vector<long> class_count;
    std::map<int, double> per_snr;
    std::map<int, long> per_snr_count;
    std::vector<std::vector<long>> confusion;  // [true][pred]
    long total = 0;

    long trace() const {
        long t = 0;
        for (size_t c = 0; c < confusion.size(); ++c) t += confusion[c][c];
        return t;
    }
};

// Full inference sweep over one split.
inline MetricsRecord evaluate(const ModelSpec& spec, const ParamSet<float>& params, const Dataset& ds,
                              Split split) {
    const auto idx = ds.indices_of(split);
    if (idx.empty())
        throw std::invalid_argument(std::string("evaluate: split ") + split_name(split) + " is empty");
    const int ncls = spec.num_classes();

    std::vector<IQFrame> normalized(idx.size());
    std::vector<const IQFrame*> frames(idx.size());
    for (size_t k = 0; k < idx.size(); ++k) {
        normalized[k] = rms_normalize(ds.samples[idx[k]].frame);
        frames[k] = &normalized[k];
    }
    const auto preds = predict_classes(spec, params, frames);

    MetricsRecord rec;
    rec.per_class.assign(ncls, 0.0);
    rec.class_count.assign(ncls, 0);
    rec.confusion.assign(ncls, std::vector<long>(ncls, 0));
    std::map<int, long> snr_hits;
    for (size_t k = 0; k < idx.size(); ++k) {
        const auto& s = ds.samples[idx[k]];
        if (s.class_id < 0 || s.class_id >= ncls)
            throw std::invalid_argument("evaluate: sample class_id out of model range");
        rec.confusion[s.class_id][preds[k]] += 1;
        rec.class_count[s.class_id] += 1;
        rec.per_snr_count[s.snr_db] += 1;
        if (preds[k] == s.class_id) snr_hits[s.snr_db] += 1;
        rec.total += 1;
    }
    for (int c = 0; c < ncls; ++c)
        rec.per_class[c] = rec.class_count[c] > 0
                               ? static_cast<double>(rec.confusion[c][c]) / static_cast<double>(rec.class_count[c])
                               : std::nan("");
    for (const auto& [snr, count] : rec.per_snr_count)
        rec.per_snr[snr] = static_cast<double>(snr_hits[snr]) / static_cast<double>(count);
    rec.overall = static_cast<double>(rec.trace()) / static_cast<double>(rec.total);
    return rec;
}

struct SnrAccuracy {
    std::map<int, double> accuracy;  // NaN marks a level with no samples
    std::map<int, long> count;
};

// Accuracy over only the samples at each requested SNR level, optionally
// capped per level (drawn without replacement).
inline SnrAccuracy per_snr_accuracy(const ModelSpec& spec, const ParamSet<float>& params, const Dataset& ds,
                                    Split split, const std::vector<int>& snr_levels, long cap = 0,
                                    uint64_t seed = 0) {
    SnrAccuracy out;
    for (int level : snr_levels) {
        std::vector<size_t> idx;
        for (size_t k = 0; k < ds.samples.size(); ++k)
            if (ds.samples[k].split == split && ds.samples[k].snr_db == level) idx.push_back(k);
        if (idx.empty()) {
            out.accuracy[level] = std::nan("");
            out.count[level] = 0;
            continue;
        }
        if (cap > 0 && static_cast<long>(idx.size()) > cap) {
            Rng rng(mix_seed(seed, static_cast<uint64_t>(level)));
            for (long k = 0; k < cap; ++k)
                std::swap(idx[k], idx[k + rng.uniform_int(static_cast<int64_t>(idx.size()) - k)]);
            idx.resize(cap);
        }
        std::vector<IQFrame> normalized(idx.size());
        std::vector<const IQFrame*> frames(idx.size());
        for (size_t k = 0; k < idx.size(); ++k) {
            normalized[k] = rms_normalize(ds.samples[idx[k]].frame);
            frames[k] = &normalized[k];
        }
        const auto preds = predict_classes(spec, params, frames);
        long hits = 0;
        for (size_t k = 0; k < idx.size(); ++k)
            if (preds[k] == ds.samples[idx[k]].class_id) ++hits;
        out.accuracy[level] = static_cast<double>(hits) / static_cast<double>(idx.size());
        out.count[level] = static_cast<long>(idx.size());
    }
    return out;
}

// Pooled encoder outputs for a set of frames (ViT only).
inline TensorF pooled_embeddings(const ViTConfig& cfg, const ParamSet<float>& params,
                                 const std::vector<const IQFrame*>& frames) {
    GraphF g;
    BoundParams<float> p;
    p.ps = &params;
    for (const auto& it : params.items) p.ids.push_back(g.input(it.value));
    const int x = g.input(batch_patchify<float>(frames, cfg));
    const int pooled = vit_pool(g, vit_encode(g, cfg, p, x, false, detail::dummy_rng()));
    return g.value(pooled);
}

// CSV export: 64 embedding columns, class_id, snr_db; one row per sample.
inline void export_embeddings(const ViTConfig& cfg, const ParamSet<float>& params, const Dataset& ds,
                              Split split, const std::string& path, int batch = 256) {
    const auto idx = ds.indices_of(split);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("export_embeddings: cannot open " + path);
    for (int j = 0; j < cfg.embed_dim; ++j) out << "e" << j << ",";
    out << "class_id,snr_db\n";
    for (size_t start = 0; start < idx.size(); start += batch) {
        const size_t stop = std::min(idx.size(), start + batch);
        std::vector<IQFrame> normalized(stop - start);
        std::vector<const IQFrame*> frames(stop - start);
        for (size_t k = start; k < stop; ++k) {
            normalized[k - start] = rms_normalize(ds.samples[idx[k]].frame);
            frames[k - start] = &normalized[k - start];
        }
        const TensorF emb = pooled_embeddings(cfg, params, frames);
        for (size_t k = start; k < stop; ++k) {
            for (int j = 0; j < cfg.embed_dim; ++j) out << emb.v[(k - start) * cfg.embed_dim + j] << ",";
            out << ds.samples[idx[k]].class_id << "," << ds.samples[idx[k]].snr_db << "\n";
        }
    }
    if (!out) throw std::runtime_error("export_embeddings: write failed for " + path);
}

// ---- metrics CSV emission ----

inline void write_metrics_csv(const MetricsRecord& rec, const std::vector<std::string>& class_names,
                              const std::string& dir) {
    {
        std::ofstream out(dir + "/overall.csv");
        if (!out) throw std::runtime_error("write_metrics_csv: cannot open " + dir + "/overall.csv");
        out << "overall_accuracy,total_samples\n" << rec.overall << "," << rec.total << "\n";
    }
    {
        std::ofstream out(dir + "/per_class.csv");
        out << "class_id,class_name,accuracy,count\n";
        for (size_t c = 0; c < rec.per_class.size(); ++c)
            out << c << "," << (c < class_names.size() ? class_names[c] : "?") << "," << rec.per_class[c]
                << "," << rec.class_count[c] << "\n";
    }
    {
        std::ofstream out(dir + "/per_snr.csv");
        out << "snr_db,accuracy,count\n";
        for (const auto& [snr, acc] : rec.per_snr) out << snr << "," << acc << "," << rec.per_snr_count.at(snr) << "\n";
    }
    {
        std::ofstream out(dir + "/confusion.csv");
        out << "true\\pred";
        for (size_t c = 0; c < rec.confusion.size(); ++c)
            out << "," << (c < class_names.size() ? class_names[c] : std::to_string(c));
        out << "\n";
        for (size_t r = 0; r < rec.confusion.size(); ++r) {
            out << (r < class_names.size() ? class_names[r] : std::to_string(r));
            for (size_t c = 0; c < rec.confusion[r].size(); ++c) out << "," << rec.confusion[r][c];
            out << "\n";
        }
    }
}

}  // namespace amrvit
