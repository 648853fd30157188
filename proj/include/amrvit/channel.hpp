#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>

#include "amrvit/iq.hpp"
#include "amrvit/rng.hpp"

namespace amrvit {

// Per-frame channel: r(n) = A * exp(j(w*n + theta)) * x(n). Noise is added
// separately by add_awgn.
struct ChannelParams {
    double gain = 1.0;         // A, dimensionless
    double freq_offset = 0.0;  // w, radians/sample, in [-pi, pi)
    double phase_offset = 0.0; // theta, radians, in [0, 2*pi)

    void validate() const {
        if (!std::isfinite(gain) || !std::isfinite(freq_offset) || !std::isfinite(phase_offset))
            throw std::invalid_argument("ChannelParams: non-finite parameter");
        if (gain <= 0.0) throw std::invalid_argument("ChannelParams: gain must be positive");
        if (freq_offset < -M_PI || freq_offset >= M_PI)
            throw std::invalid_argument("ChannelParams: freq_offset outside [-pi, pi)");
        if (phase_offset < 0.0 || phase_offset >= 2.0 * M_PI)
            throw std::invalid_argument("ChannelParams: phase_offset outside [0, 2*pi)");
    }
};

inline IQFrame apply_channel(const IQFrame& frame, const ChannelParams& params) {
    params.validate();
    IQFrame out(frame.length());
    for (size_t n = 0; n < frame.length(); ++n) {
        const double ang = params.freq_offset * static_cast<double>(n) + params.phase_offset;
        const std::complex<double> rot = params.gain * std::complex<double>(std::cos(ang), std::sin(ang));
        const std::complex<double> v = rot * std::complex<double>(frame.i[n], frame.q[n]);
        out.i[n] = static_cast<float>(v.real());
        out.q[n] = static_cast<float>(v.imag());
    }
    return out;
}

// Adds white Gaussian noise sized against measured frame power:
// per-component variance = signal_power / (2 * 10^(snr_db/10)).
inline IQFrame add_awgn(const IQFrame& frame, double snr_db, Rng& rng) {
    const double p = frame_power(frame);
    if (p <= 0.0) throw std::invalid_argument("add_awgn: frame has zero power");
    const double noise_power = p / std::pow(10.0, snr_db / 10.0);
    const double sigma = std::sqrt(noise_power / 2.0);
    IQFrame out(frame.length());
    for (size_t n = 0; n < frame.length(); ++n) {
        out.i[n] = frame.i[n] + static_cast<float>(rng.normal(0.0, sigma));
        out.q[n] = frame.q[n] + static_cast<float>(rng.normal(0.0, sigma));
    }
    return out;
}

}  // namespace amrvit
