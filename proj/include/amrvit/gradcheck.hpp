#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "amrvit/graph.hpp"
#include "amrvit/rng.hpp"
#include "amrvit/tensor.hpp"

namespace amrvit {

// Builds a scalar-valued computation in 64-bit mode. Receives leaf node ids
// aligned with the input list and returns the loss node id. Must be a pure
// function of the leaf values (stochastic pieces must reseed internally).
using ScalarBuilder = std::function<int(GraphD&, const std::vector<int>&)>;

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    int checked_coords = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;

    double worst_rel_err() const {
        double w = 0.0;
        for (const auto& e : entries) w = std::max(w, e.max_rel_err);
        return w;
    }
    bool pass(double tolerance) const { return worst_rel_err() < tolerance; }
};

// Compares reverse-mode gradients against central finite differences with
// h = 1e-5 relative step. When max_coords_per_input > 0, each input checks a
// random coordinate subset (two function evaluations per coordinate make
// exhaustive checks impractical for whole models).
inline GradCheckReport check_gradients(const ScalarBuilder& f,
                                       const std::vector<std::pair<std::string, TensorD>>& inputs,
                                       int max_coords_per_input = 0, uint64_t seed = 17) {
    const auto eval = [&](const std::vector<TensorD>& vals) {
        GraphD g;
        std::vector<int> ids(vals.size());
        for (size_t k = 0; k < vals.size(); ++k) ids[k] = g.input(vals[k]);
        const int loss = f(g, ids);
        return g.value(loss).v[0];
    };

    // analytic pass
    GraphD g;
    std::vector<int> ids(inputs.size());
    std::vector<TensorD> vals(inputs.size());
    for (size_t k = 0; k < inputs.size(); ++k) {
        vals[k] = inputs[k].second;
        ids[k] = g.param(vals[k]);
    }
    const int loss = f(g, ids);
    g.backward(loss);

    Rng rng(seed);
    GradCheckReport report;
    for (size_t k = 0; k < inputs.size(); ++k) {
        const TensorD& x = inputs[k].second;
        const TensorD& ga = g.grad(ids[k]);
        std::vector<int64_t> coords;
        if (max_coords_per_input <= 0 || x.numel() <= max_coords_per_input) {
            coords.resize(x.numel());
            for (int64_t j = 0; j < x.numel(); ++j) coords[j] = j;
        } else {
            for (int c = 0; c < max_coords_per_input; ++c) coords.push_back(rng.uniform_int(x.numel()));
            std::sort(coords.begin(), coords.end());
            coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
        }
        GradCheckEntry entry;
        entry.name = inputs[k].first;
        entry.checked_coords = static_cast<int>(coords.size());
        for (int64_t j : coords) {
            const double x0 = x.v[j];
            const double h = 1e-5 * std::max(1.0, std::abs(x0));
            vals[k].v[j] = x0 + h;
            const double fp = eval(vals);
            vals[k].v[j] = x0 - h;
            const double fm = eval(vals);
            vals[k].v[j] = x0;
            const double fd = (fp - fm) / (2.0 * h);
            const double abs_err = std::abs(ga.v[j] - fd);
            const double rel = abs_err / std::max({1e-4, std::abs(ga.v[j]), std::abs(fd)});
            entry.max_abs_err = std::max(entry.max_abs_err, abs_err);
            entry.max_rel_err = std::max(entry.max_rel_err, rel);
        }
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace amrvit
