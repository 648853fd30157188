#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "amrvit/iq.hpp"
#include "amrvit/rng.hpp"
#include "amrvit/spline.hpp"

namespace amrvit {

enum class AugmentKind : int {
    Rotate = 0,
    FlipH,
    FlipV,
    GaussianNoise,
    Scale,
    MagnitudeWarp,
    TimeWarp,
};

constexpr int kNumAugmentKinds = 7;

inline const char* augment_kind_name(AugmentKind k) {
    static const char* names[kNumAugmentKinds] = {"rotate",         "flip_h", "flip_v",   "gaussian_noise",
                                                  "scale",          "magnitude_warp",     "time_warp"};
    return names[static_cast<int>(k)];
}

inline AugmentKind augment_kind_from_name(const std::string& name) {
    for (int k = 0; k < kNumAugmentKinds; ++k)
        if (name == augment_kind_name(static_cast<AugmentKind>(k))) return static_cast<AugmentKind>(k);
    throw std::invalid_argument("unknown augmentation kind: " + name);
}

// Constellation rotation by `angle` radians (counterclockwise).
inline IQFrame rotate(const IQFrame& f, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    IQFrame out(f.length());
    for (size_t n = 0; n < f.length(); ++n) {
        out.i[n] = static_cast<float>(c * f.i[n] - s * f.q[n]);
        out.q[n] = static_cast<float>(s * f.i[n] + c * f.q[n]);
    }
    return out;
}

inline IQFrame flip_h(const IQFrame& f) {
    IQFrame out = f;
    for (auto& v : out.i) v = -v;
    return out;
}

inline IQFrame flip_v(const IQFrame& f) {
    IQFrame out = f;
    for (auto& v : out.q) v = -v;
    return out;
}

inline IQFrame gaussian_noise(const IQFrame& f, double sigma, Rng& rng) {
    if (sigma < 0.0) throw std::invalid_argument("gaussian_noise: sigma must be >= 0");
    IQFrame out(f.length());
    for (size_t n = 0; n < f.length(); ++n) {
        out.i[n] = f.i[n] + static_cast<float>(rng.normal(0.0, sigma));
        out.q[n] = f.q[n] + static_cast<float>(rng.normal(0.0, sigma));
    }
    return out;
}

// Multiplies the whole frame by one draw s ~ N(1, sigma^2), clamped to [0.5, 1.5].
inline IQFrame scale(const IQFrame& f, double sigma, Rng& rng) {
    const double s = std::clamp(rng.normal(1.0, sigma), 0.5, 1.5);
    IQFrame out(f.length());
    for (size_t n = 0; n < f.length(); ++n) {
        out.i[n] = static_cast<float>(f.i[n] * s);
        out.q[n] = static_cast<float>(f.q[n] * s);
    }
    return out;
}

namespace detail {

inline std::vector<double> knot_positions(int knots, size_t len) {
    std::vector<double> xs(knots);
    for (int k = 0; k < knots; ++k)
        xs[k] = static_cast<double>(len - 1) * static_cast<double>(k) / static_cast<double>(knots - 1);
    return xs;
}

}  // namespace detail

// Smooth per-sample amplitude envelope: a natural cubic spline through
// `knots` control values drawn from N(1, sigma^2) at equally spaced
// positions. I and Q share the same envelope.
inline IQFrame magnitude_warp(const IQFrame& f, int knots, double sigma, Rng& rng) {
    if (knots < 2) throw std::invalid_argument("magnitude_warp: need >= 2 knots");
    if (sigma < 0.0) throw std::invalid_argument("magnitude_warp: sigma must be >= 0");
    const auto xs = detail::knot_positions(knots, f.length());
    std::vector<double> ys(knots);
    for (auto& y : ys) y = rng.normal(1.0, sigma);
    const CubicSpline env(xs, ys);
    IQFrame out(f.length());
    for (size_t n = 0; n < f.length(); ++n) {
        const double c = env(static_cast<double>(n));
        out.i[n] = static_cast<float>(f.i[n] * c);
        out.q[n] = static_cast<float>(f.q[n] * c);
    }
    return out;
}

// Monotone temporal warp: interior knot targets are perturbed by
// N(0, sigma^2) in units of the knot spacing, endpoints stay pinned, and
// samples are linearly re-read at w(n). Retries up to 8 times if the spline
// comes out non-monotone.
inline IQFrame time_warp(const IQFrame& f, int knots, double sigma, Rng& rng) {
    if (knots < 2) throw std::invalid_argument("time_warp: need >= 2 knots");
    if (sigma < 0.0) throw std::invalid_argument("time_warp: sigma must be >= 0");
    const size_t len = f.length();
    const auto xs = detail::knot_positions(knots, len);
    const double spacing = static_cast<double>(len - 1) / static_cast<double>(knots - 1);

    std::vector<double> w(len);
    bool monotone = false;
    for (int attempt = 0; attempt < 8 && !monotone; ++attempt) {
        std::vector<double> ys = xs;
        for (int k = 1; k + 1 < knots; ++k) ys[k] += rng.normal(0.0, sigma) * spacing;
        const CubicSpline warp(xs, ys);
        monotone = true;
        double prev = 0.0;
        for (size_t n = 0; n < len; ++n) {
            w[n] = std::clamp(warp(static_cast<double>(n)), 0.0, static_cast<double>(len - 1));
            if (n > 0 && w[n] < prev) {
                monotone = false;
                break;
            }
            prev = w[n];
        }
    }
    if (!monotone) throw std::runtime_error("time_warp: could not build a monotone warp in 8 attempts");

    IQFrame out(len);
    for (size_t n = 0; n < len; ++n) {
        const double pos = w[n];
        const size_t lo = std::min(static_cast<size_t>(pos), len - 2);
        const double t = pos - static_cast<double>(lo);
        out.i[n] = static_cast<float>((1.0 - t) * f.i[lo] + t * f.i[lo + 1]);
        out.q[n] = static_cast<float>((1.0 - t) * f.q[lo] + t * f.q[lo + 1]);
    }
    return out;
}

struct AugmentParams {
    double noise_sigma = 0.05;
    double scale_sigma = 0.1;
    int mw_knots = 4;
    double mw_sigma = 0.2;
    int tw_knots = 4;
    double tw_sigma = 0.2;
    std::array<double, 4> rotate_angles{0.0, M_PI / 2.0, M_PI, 3.0 * M_PI / 2.0};
    std::vector<AugmentKind> enabled;  // empty = all seven

    std::vector<AugmentKind> kinds() const {
        if (!enabled.empty()) return enabled;
        std::vector<AugmentKind> all(kNumAugmentKinds);
        for (int k = 0; k < kNumAugmentKinds; ++k) all[k] = static_cast<AugmentKind>(k);
        return all;
    }
};

// One-of-N policy: picks exactly one enabled transform uniformly at random,
// applies it, and reports which one ran.
inline std::pair<IQFrame, AugmentKind> augment(const IQFrame& f, const AugmentParams& p, Rng& rng) {
    const auto kinds = p.kinds();
    const AugmentKind kind = kinds[rng.uniform_int(static_cast<int64_t>(kinds.size()))];
    switch (kind) {
        case AugmentKind::Rotate:
            return {rotate(f, p.rotate_angles[rng.uniform_int(4)]), kind};
        case AugmentKind::FlipH: return {flip_h(f), kind};
        case AugmentKind::FlipV: return {flip_v(f), kind};
        case AugmentKind::GaussianNoise: return {gaussian_noise(f, p.noise_sigma, rng), kind};
        case AugmentKind::Scale: return {scale(f, p.scale_sigma, rng), kind};
        case AugmentKind::MagnitudeWarp: return {magnitude_warp(f, p.mw_knots, p.mw_sigma, rng), kind};
        case AugmentKind::TimeWarp: return {time_warp(f, p.tw_knots, p.tw_sigma, rng), kind};
    }
    throw std::logic_error("augment: unreachable");
}

}  // namespace amrvit
