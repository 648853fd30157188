#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "amrvit/rng.hpp"
#include "amrvit/tensor.hpp"

namespace amrvit {

// Named, ordered parameter tensors. Order is the canonical layout for the
// optimizer state and the checkpoint blob.
template <typename T>
struct ParamSet {
    struct Item {
        std::string name;
        Tensor<T> value;
        bool trainable = true;
    };
    std::vector<Item> items;

    int add(std::string name, Tensor<T> value, bool trainable = true) {
        items.push_back(Item{std::move(name), std::move(value), trainable});
        return static_cast<int>(items.size()) - 1;
    }

    int index_of(const std::string& name) const {
        for (size_t k = 0; k < items.size(); ++k)
            if (items[k].name == name) return static_cast<int>(k);
        throw std::invalid_argument("ParamSet: no parameter named " + name);
    }

    Tensor<T>& at(const std::string& name) { return items[index_of(name)].value; }
    const Tensor<T>& at(const std::string& name) const { return items[index_of(name)].value; }

    int64_t total_params() const {
        int64_t n = 0;
        for (const auto& it : items) n += it.value.numel();
        return n;
    }

    bool all_finite() const {
        for (const auto& it : items)
            for (T v : it.value.v)
                if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <typename U>
    ParamSet<U> cast() const {
        ParamSet<U> out;
        for (const auto& it : items) out.add(it.name, it.value.template cast<U>(), it.trainable);
        return out;
    }
};

// Initializers used across the models.
template <typename T>
Tensor<T> uniform_fanin(std::vector<int64_t> shape, int64_t fan_in, Rng& rng) {
    Tensor<T> t(std::move(shape));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : t.v) v = static_cast<T>(rng.uniform(-bound, bound));
    return t;
}

template <typename T>
Tensor<T> normal_init(std::vector<int64_t> shape, double sigma, Rng& rng) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.v) v = static_cast<T>(rng.normal(0.0, sigma));
    return t;
}

// ---------------------------------------------------------------------------
// Checkpoint file: "AMRC" magic, u32 little-endian header length, JSON
// manifest {version, model_kind, config, tensors: [{name, shape, offset}]},
// then all tensors as one little-endian 32-bit float blob. Offsets are float
// indices into the blob.
// ---------------------------------------------------------------------------

inline void save_checkpoint(const ParamSet<float>& params, const std::string& model_kind,
                            const nlohmann::json& config, const std::string& path) {
    nlohmann::json manifest{{"version", 1}, {"model_kind", model_kind}, {"config", config}};
    auto& tensors = manifest["tensors"] = nlohmann::json::array();
    int64_t offset = 0;
    for (const auto& it : params.items) {
        tensors.push_back({{"name", it.name}, {"shape", it.value.shape}, {"offset", offset}});
        offset += it.value.numel();
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    const std::string hs = manifest.dump();
    const uint32_t hlen = static_cast<uint32_t>(hs.size());
    out.write("AMRC", 4);
    out.write(reinterpret_cast<const char*>(&hlen), 4);
    out.write(hs.data(), hlen);
    for (const auto& it : params.items)
        out.write(reinterpret_cast<const char*>(it.value.data()), sizeof(float) * it.value.numel());
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

struct Checkpoint {
    ParamSet<float> params;
    std::string model_kind;
    nlohmann::json config;
};

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "AMRC", 4) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    uint32_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 4);
    std::string hs(hlen, '\0');
    in.read(hs.data(), hlen);
    if (!in) throw std::runtime_error("load_checkpoint: truncated header in " + path);
    const auto manifest = nlohmann::json::parse(hs);
    if (manifest.at("version").get<int>() != 1)
        throw std::runtime_error("load_checkpoint: unsupported version in " + path);

    Checkpoint ck;
    ck.model_kind = manifest.at("model_kind").get<std::string>();
    ck.config = manifest.value("config", nlohmann::json::object());
    for (const auto& t : manifest.at("tensors")) {
        Tensor<float> v(t.at("shape").get<std::vector<int64_t>>());
        in.read(reinterpret_cast<char*>(v.data()), sizeof(float) * v.numel());
        if (!in) throw std::runtime_error("load_checkpoint: truncated blob in " + path);
        ck.params.add(t.at("name").get<std::string>(), std::move(v));
    }
    return ck;
}

}  // namespace amrvit
