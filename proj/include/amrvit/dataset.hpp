#pragma once

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "amrvit/channel.hpp"
#include "amrvit/iq.hpp"
#include "amrvit/modulate.hpp"
#include "amrvit/modulation.hpp"
#include "amrvit/rng.hpp"

namespace amrvit {

enum class Split : uint8_t { train = 0, val = 1, test = 2 };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

struct LabeledSample {
    IQFrame frame;
    int class_id = 0;   // index into Dataset::class_names
    int snr_db = 0;
    bool labeled = true;
    Split split = Split::train;
};

struct Dataset {
    std::vector<LabeledSample> samples;
    std::vector<std::string> class_names;
    uint64_t seed = 0;
    std::array<double, 3> split_fractions{1.0, 0.0, 0.0};

    size_t size() const { return samples.size(); }

    size_t count(Split s) const {
        size_t n = 0;
        for (const auto& x : samples)
            if (x.split == s) ++n;
        return n;
    }

    std::vector<size_t> indices_of(Split s) const {
        std::vector<size_t> out;
        for (size_t k = 0; k < samples.size(); ++k)
            if (samples[k].split == s) out.push_back(k);
        return out;
    }
};

struct SynthConfig {
    std::vector<ModulationScheme> schemes;  // empty = all 16
    std::vector<int> snr_list_db;
    int frames_per_cell = 0;
    int frame_len = 512;
    int samples_per_symbol = 8;
    double max_freq_offset = 0.01;  // rad/sample; per-frame offset ~ U(-max, max)
    bool random_phase = true;
    uint64_t seed = 0;
};

inline std::vector<ModulationScheme> all_schemes() {
    std::vector<ModulationScheme> v(kNumSchemes);
    for (int k = 0; k < kNumSchemes; ++k) v[k] = static_cast<ModulationScheme>(k);
    return v;
}

// One synthetic frame: modulate -> channel -> AWGN. Deterministic in `seed`.
inline IQFrame synth_frame(ModulationScheme scheme, int snr_db, const SynthConfig& cfg, uint64_t seed) {
    Rng rng(seed);
    const int bps = bits_per_symbol(scheme);
    const size_t nsym = (static_cast<size_t>(cfg.frame_len) + cfg.samples_per_symbol - 1) /
                        static_cast<size_t>(cfg.samples_per_symbol);
    std::vector<uint8_t> bits(nsym * static_cast<size_t>(bps));
    for (auto& b : bits) b = static_cast<uint8_t>(rng.uniform_int(2));
    IQFrame f = modulate_symbols(scheme, bits, cfg.samples_per_symbol, rng);
    f.i.resize(cfg.frame_len);
    f.q.resize(cfg.frame_len);
    ChannelParams ch;
    ch.freq_offset = cfg.max_freq_offset > 0.0 ? rng.uniform(-cfg.max_freq_offset, cfg.max_freq_offset) : 0.0;
    ch.phase_offset = cfg.random_phase ? rng.uniform(0.0, 2.0 * M_PI) : 0.0;
    f = apply_channel(f, ch);
    return add_awgn(f, snr_db, rng);
}

// Balanced synthetic dataset: exactly frames_per_cell frames for every
// (scheme, SNR) cell, in scheme-major, SNR-minor, frame-index order.
inline Dataset build_synthetic_dataset(const SynthConfig& cfg) {
    SynthConfig c = cfg;
    if (c.schemes.empty()) c.schemes = all_schemes();
    if (c.snr_list_db.empty()) throw std::invalid_argument("build_synthetic_dataset: empty SNR list");
    if (c.frames_per_cell < 0) throw std::invalid_argument("build_synthetic_dataset: negative frames_per_cell");
    if (c.frame_len <= 0) throw std::invalid_argument("build_synthetic_dataset: frame_len must be positive");

    Dataset ds;
    ds.seed = c.seed;
    for (auto s : c.schemes) ds.class_names.push_back(scheme_name(s));
    ds.samples.reserve(c.schemes.size() * c.snr_list_db.size() * static_cast<size_t>(c.frames_per_cell));
    for (size_t ci = 0; ci < c.schemes.size(); ++ci) {
        for (size_t si = 0; si < c.snr_list_db.size(); ++si) {
            for (int k = 0; k < c.frames_per_cell; ++k) {
                const uint64_t fseed = mix_seed(c.seed, (ci * c.snr_list_db.size() + si), static_cast<uint64_t>(k));
                LabeledSample smp;
                smp.frame = synth_frame(c.schemes[ci], c.snr_list_db[si], c, fseed);
                smp.class_id = static_cast<int>(ci);
                smp.snr_db = c.snr_list_db[si];
                ds.samples.push_back(std::move(smp));
            }
        }
    }
    return ds;
}

// Random disjoint train/val/test tagging. Split sizes use largest-remainder
// rounding, so each lands within one sample of fraction * N.
inline Dataset split_dataset(Dataset ds, const std::array<double, 3>& fractions, uint64_t seed) {
    const double sum = fractions[0] + fractions[1] + fractions[2];
    for (double f : fractions)
        if (f <= 0.0) throw std::invalid_argument("split_dataset: fractions must be positive");
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("split_dataset: fractions must sum to 1");
    const size_t n = ds.samples.size();
    if (n < 3) throw std::invalid_argument("split_dataset: need at least 3 samples");

    std::array<size_t, 3> counts;
    std::array<double, 3> rema;
    size_t assigned = 0;
    for (int k = 0; k < 3; ++k) {
        const double exact = fractions[k] * static_cast<double>(n);
        counts[k] = static_cast<size_t>(exact);
        rema[k] = exact - static_cast<double>(counts[k]);
        assigned += counts[k];
    }
    while (assigned < n) {
        const int k = static_cast<int>(std::max_element(rema.begin(), rema.end()) - rema.begin());
        ++counts[k];
        rema[k] = -1.0;
        ++assigned;
    }

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (size_t k = n - 1; k > 0; --k) std::swap(order[k], order[rng.uniform_int(static_cast<int64_t>(k) + 1)]);

    size_t pos = 0;
    for (int s = 0; s < 3; ++s)
        for (size_t k = 0; k < counts[s]; ++k) ds.samples[order[pos++]].split = static_cast<Split>(s);
    ds.split_fractions = fractions;
    ds.seed = seed;
    return ds;
}

// Stratified partial labeling of the train split: every class keeps
// round(fraction * train-count) labeled samples, at least one. Val and test
// samples stay fully labeled.
inline Dataset label_mask(Dataset ds, double fraction, uint64_t seed) {
    if (fraction <= 0.0 || fraction > 1.0)
        throw std::invalid_argument("label_mask: fraction must be in (0, 1]");
    const int ncls = static_cast<int>(ds.class_names.size());
    std::vector<std::vector<size_t>> per_class(ncls);
    for (size_t k = 0; k < ds.samples.size(); ++k)
        if (ds.samples[k].split == Split::train) per_class[ds.samples[k].class_id].push_back(k);

    Rng rng(seed);
    for (int c = 0; c < ncls; ++c) {
        auto& idx = per_class[c];
        if (idx.empty())
            throw std::invalid_argument("label_mask: class " + ds.class_names[c] + " has no train samples");
        const size_t keep = std::max<size_t>(1, static_cast<size_t>(std::llround(fraction * static_cast<double>(idx.size()))));
        for (size_t k = idx.size() - 1; k > 0; --k) std::swap(idx[k], idx[rng.uniform_int(static_cast<int64_t>(k) + 1)]);
        for (size_t k = 0; k < idx.size(); ++k) ds.samples[idx[k]].labeled = k < keep;
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Dataset record file: "AMRD" magic, u32 little-endian header length, JSON
// header {version, schemes, snr_list, frames_per_cell, frame_len, seed},
// then for every sample (scheme-major, SNR-minor, frame order) the I block
// followed by the Q block as little-endian 32-bit floats.
// ---------------------------------------------------------------------------

inline void save_dataset(const Dataset& ds, const std::vector<int>& snr_list, int frames_per_cell,
                         int frame_len, const std::string& path) {
    nlohmann::json header{{"version", 1},
                          {"schemes", ds.class_names},
                          {"snr_list", snr_list},
                          {"frames_per_cell", frames_per_cell},
                          {"frame_len", frame_len},
                          {"seed", ds.seed}};
    const size_t expect = ds.class_names.size() * snr_list.size() * static_cast<size_t>(frames_per_cell);
    if (ds.samples.size() != expect)
        throw std::invalid_argument("save_dataset: sample count does not match header cells");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
    const std::string hs = header.dump();
    const uint32_t hlen = static_cast<uint32_t>(hs.size());
    out.write("AMRD", 4);
    out.write(reinterpret_cast<const char*>(&hlen), 4);
    out.write(hs.data(), hlen);
    for (const auto& s : ds.samples) {
        if (static_cast<int>(s.frame.length()) != frame_len)
            throw std::invalid_argument("save_dataset: frame length mismatch");
        out.write(reinterpret_cast<const char*>(s.frame.i.data()), sizeof(float) * frame_len);
        out.write(reinterpret_cast<const char*>(s.frame.q.data()), sizeof(float) * frame_len);
    }
    if (!out) throw std::runtime_error("save_dataset: write failed for " + path);
}

inline Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "AMRD", 4) != 0)
        throw std::runtime_error("load_dataset: bad magic in " + path);
    uint32_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 4);
    std::string hs(hlen, '\0');
    in.read(hs.data(), hlen);
    if (!in) throw std::runtime_error("load_dataset: truncated header in " + path);
    const auto header = nlohmann::json::parse(hs);
    if (header.at("version").get<int>() != 1)
        throw std::runtime_error("load_dataset: unsupported version in " + path);

    Dataset ds;
    ds.class_names = header.at("schemes").get<std::vector<std::string>>();
    const auto snr_list = header.at("snr_list").get<std::vector<int>>();
    const int per_cell = header.at("frames_per_cell").get<int>();
    const int frame_len = header.at("frame_len").get<int>();
    ds.seed = header.at("seed").get<uint64_t>();

    ds.samples.reserve(ds.class_names.size() * snr_list.size() * static_cast<size_t>(per_cell));
    for (size_t ci = 0; ci < ds.class_names.size(); ++ci) {
        for (size_t si = 0; si < snr_list.size(); ++si) {
            for (int k = 0; k < per_cell; ++k) {
                LabeledSample s;
                s.frame = IQFrame(frame_len);
                in.read(reinterpret_cast<char*>(s.frame.i.data()), sizeof(float) * frame_len);
                in.read(reinterpret_cast<char*>(s.frame.q.data()), sizeof(float) * frame_len);
                if (!in) throw std::runtime_error("load_dataset: truncated frame data in " + path);
                s.class_id = static_cast<int>(ci);
                s.snr_db = snr_list[si];
                ds.samples.push_back(std::move(s));
            }
        }
    }
    return ds;
}

}  // namespace amrvit
