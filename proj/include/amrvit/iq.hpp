#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace amrvit {

// One complex baseband frame as paired in-phase / quadrature sample vectors.
struct IQFrame {
    std::vector<float> i;
    std::vector<float> q;

    IQFrame() = default;
    explicit IQFrame(size_t len) : i(len, 0.0f), q(len, 0.0f) {}
    IQFrame(std::vector<float> i_, std::vector<float> q_) : i(std::move(i_)), q(std::move(q_)) {
        if (i.size() != q.size()) throw std::invalid_argument("IQFrame: i and q lengths differ");
    }

    size_t length() const { return i.size(); }

    std::complex<float> at(size_t n) const { return {i[n], q[n]}; }
    void set(size_t n, std::complex<float> v) {
        i[n] = v.real();
        q[n] = v.imag();
    }

    bool finite() const {
        for (float v : i)
            if (!std::isfinite(v)) return false;
        for (float v : q)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

// Mean per-sample complex power, (1/L) * sum |i + jq|^2.
inline double frame_power(const IQFrame& f) {
    if (f.length() == 0) return 0.0;
    double acc = 0.0;
    for (size_t n = 0; n < f.length(); ++n)
        acc += static_cast<double>(f.i[n]) * f.i[n] + static_cast<double>(f.q[n]) * f.q[n];
    return acc / static_cast<double>(f.length());
}

// Scale a frame so its RMS sample magnitude is 1. Zero-power frames are
// returned unchanged.
inline IQFrame rms_normalize(const IQFrame& f) {
    const double p = frame_power(f);
    if (p <= 0.0) return f;
    const float s = static_cast<float>(1.0 / std::sqrt(p));
    IQFrame out(f.length());
    for (size_t n = 0; n < f.length(); ++n) {
        out.i[n] = f.i[n] * s;
        out.q[n] = f.q[n] * s;
    }
    return out;
}

}  // namespace amrvit
