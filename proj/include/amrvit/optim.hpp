#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "amrvit/params.hpp"
#include "amrvit/tensor.hpp"

namespace amrvit {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

template <typename T>
struct AdamState {
    std::vector<Tensor<T>> m;  // first moments, aligned with ParamSet order
    std::vector<Tensor<T>> v;  // second moments
    int64_t step = 0;

    static AdamState init(const ParamSet<T>& params) {
        AdamState st;
        st.m.reserve(params.items.size());
        st.v.reserve(params.items.size());
        for (const auto& it : params.items) {
            st.m.push_back(Tensor<T>(it.value.shape));
            st.v.push_back(Tensor<T>(it.value.shape));
        }
        return st;
    }
};

// Textbook Adam with bias correction. Non-trainable parameters are skipped;
// their gradient slots may be empty.
template <typename T>
void adam_step(ParamSet<T>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state,
               const AdamConfig& cfg) {
    if (grads.size() != params.items.size() || state.m.size() != params.items.size())
        throw std::invalid_argument("adam_step: gradient/state count mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (size_t p = 0; p < params.items.size(); ++p) {
        auto& item = params.items[p];
        if (!item.trainable) continue;
        const auto& g = grads[p];
        if (!g.same_shape(item.value))
            throw std::invalid_argument("adam_step: gradient shape mismatch for " + item.name);
        auto& m = state.m[p];
        auto& v = state.v[p];
        for (int64_t k = 0; k < item.value.numel(); ++k) {
            double gk = static_cast<double>(g.v[k]);
            if (!std::isfinite(gk))
                throw std::runtime_error("adam_step: non-finite gradient in parameter " + item.name);
            if (cfg.weight_decay != 0.0) gk += cfg.weight_decay * static_cast<double>(item.value.v[k]);
            const double mk = cfg.beta1 * static_cast<double>(m.v[k]) + (1.0 - cfg.beta1) * gk;
            const double vk = cfg.beta2 * static_cast<double>(v.v[k]) + (1.0 - cfg.beta2) * gk * gk;
            m.v[k] = static_cast<T>(mk);
            v.v[k] = static_cast<T>(vk);
            const double mhat = mk / bc1;
            const double vhat = vk / bc2;
            item.value.v[k] -= static_cast<T>(cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
        }
    }
}

// Step-decay schedule: base_lr * gamma^floor(epoch / step_size).
struct LrSchedule {
    double base_lr = 0.001;
    int step_size = 15;
    double gamma = 0.90;
};

inline double lr_at(const LrSchedule& s, int epoch) {
    if (epoch < 0) throw std::invalid_argument("lr_at: negative epoch");
    if (s.step_size < 1) throw std::invalid_argument("lr_at: step_size must be >= 1");
    if (s.gamma <= 0.0 || s.gamma > 1.0) throw std::invalid_argument("lr_at: gamma must be in (0, 1]");
    return s.base_lr * std::pow(s.gamma, static_cast<double>(epoch / s.step_size));
}

}  // namespace amrvit
