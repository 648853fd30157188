#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "amrvit/iq.hpp"
#include "amrvit/modulation.hpp"
#include "amrvit/rng.hpp"

namespace amrvit {

struct PulseShape {
    double rolloff = 0.35;
    int span_symbols = 8;
};

namespace detail {

// Root-raised-cosine taps at `sps` samples per symbol, normalized so that
// sum(h^2) = sps. With that scaling, shaping a unit-power symbol stream
// keeps the mean sample power at 1.
inline std::vector<double> rrc_taps(double rolloff, int span_symbols, int sps) {
    const int half = span_symbols * sps / 2;
    std::vector<double> h(2 * half + 1);
    const double b = rolloff;
    for (int n = -half; n <= half; ++n) {
        const double t = static_cast<double>(n) / sps;
        double v;
        if (n == 0) {
            v = 1.0 - b + 4.0 * b / M_PI;
        } else if (b > 0.0 && std::abs(std::abs(t) - 1.0 / (4.0 * b)) < 1e-9) {
            v = (b / std::sqrt(2.0)) * ((1.0 + 2.0 / M_PI) * std::sin(M_PI / (4.0 * b)) +
                                        (1.0 - 2.0 / M_PI) * std::cos(M_PI / (4.0 * b)));
        } else {
            const double num = std::sin(M_PI * t * (1.0 - b)) + 4.0 * b * t * std::cos(M_PI * t * (1.0 + b));
            const double den = M_PI * t * (1.0 - 16.0 * b * b * t * t);
            v = num / den;
        }
        h[n + half] = v;
    }
    double e = 0.0;
    for (double v : h) e += v * v;
    const double scale = std::sqrt(static_cast<double>(sps) / e);
    for (double& v : h) v *= scale;
    return h;
}

// Centered ("same") convolution; output length equals input length.
inline std::vector<double> convolve_same(const std::vector<double>& x, const std::vector<double>& h) {
    const int n = static_cast<int>(x.size());
    const int m = static_cast<int>(h.size());
    const int center = m / 2;
    std::vector<double> y(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        const int k_lo = std::max(0, i + center - n + 1);
        const int k_hi = std::min(m - 1, i + center);
        for (int k = k_lo; k <= k_hi; ++k) acc += h[k] * x[i + center - k];
        y[i] = acc;
    }
    return y;
}

// Windowed-sinc lowpass, normalized cutoff in cycles/sample, unity DC gain.
inline std::vector<double> lowpass_taps(double cutoff, int taps) {
    std::vector<double> h(taps);
    const int mid = (taps - 1) / 2;
    double sum = 0.0;
    for (int n = 0; n < taps; ++n) {
        const double t = static_cast<double>(n - mid);
        double v = (t == 0.0) ? 2.0 * cutoff : std::sin(2.0 * M_PI * cutoff * t) / (M_PI * t);
        v *= 0.54 - 0.46 * std::cos(2.0 * M_PI * n / (taps - 1));  // Hamming
        h[n] = v;
        sum += v;
    }
    for (double& v : h) v /= sum;
    return h;
}

// Band-limited Gaussian message with unit RMS, cutoff 0.1 x Nyquist.
inline std::vector<double> bandlimited_message(size_t len, Rng& rng) {
    static const std::vector<double> lp = lowpass_taps(0.05, 129);
    std::vector<double> white(len);
    for (auto& v : white) v = rng.normal();
    std::vector<double> m = convolve_same(white, lp);
    double p = 0.0;
    for (double v : m) p += v * v;
    p = std::sqrt(p / static_cast<double>(len));
    if (p > 0.0)
        for (double& v : m) v /= p;
    return m;
}

inline std::vector<double> gaussian_pulse(double bt, int sps) {
    // Gaussian frequency pulse for GMSK; sigma in symbol-time units.
    const double sigma = std::sqrt(std::log(2.0)) / (2.0 * M_PI * bt);
    const int half = 2 * sps;
    std::vector<double> g(2 * half + 1);
    double sum = 0.0;
    for (int n = -half; n <= half; ++n) {
        const double t = static_cast<double>(n) / sps;
        g[n + half] = std::exp(-t * t / (2.0 * sigma * sigma));
        sum += g[n + half];
    }
    for (double& v : g) v /= sum;
    return g;
}

inline uint32_t bits_to_index(const std::vector<uint8_t>& bits, size_t start, int nbits) {
    uint32_t idx = 0;
    for (int b = 0; b < nbits; ++b) idx = (idx << 1) | (bits[start + b] & 1u);
    return idx;
}

}  // namespace detail

// Synthesize one baseband frame. Digital schemes map bit groups onto the
// constellation and (for sps >= 2) shape with a root-raised-cosine pulse;
// sps == 1 emits raw symbol-rate constellation points. GMSK integrates a
// Gaussian-filtered (BT = 0.3) NRZ stream. AM/FM schemes modulate a
// band-limited Gaussian message drawn from `rng` and treat each bit slot as
// one symbol period, so the frame-length contract is the same for all
// schemes: length = (#bits / bits_per_symbol) * samples_per_symbol.
inline IQFrame modulate_symbols(ModulationScheme scheme, const std::vector<uint8_t>& bits,
                                int samples_per_symbol, Rng& rng,
                                const PulseShape& pulse = PulseShape{}) {
    const int sps = samples_per_symbol;
    if (sps < 1) throw std::invalid_argument("modulate_symbols: samples_per_symbol must be >= 1");
    const int bps = bits_per_symbol(scheme);
    if (bits.empty() || bits.size() % static_cast<size_t>(bps) != 0)
        throw std::invalid_argument("modulate_symbols: bit count " + std::to_string(bits.size()) +
                                    " not divisible by bits/symbol " + std::to_string(bps) + " for " +
                                    scheme_name(scheme));
    const size_t nsym = bits.size() / static_cast<size_t>(bps);
    const size_t len = nsym * static_cast<size_t>(sps);

    if (has_constellation(scheme)) {
        const auto& table = constellation(scheme);
        std::vector<std::complex<double>> syms(nsym);
        for (size_t s = 0; s < nsym; ++s) syms[s] = table[detail::bits_to_index(bits, s * bps, bps)];
        if (sps == 1) {
            IQFrame out(len);
            for (size_t s = 0; s < nsym; ++s) out.set(s, static_cast<std::complex<float>>(syms[s]));
            return out;
        }
        std::vector<double> up_i(len, 0.0), up_q(len, 0.0);
        for (size_t s = 0; s < nsym; ++s) {
            up_i[s * sps] = syms[s].real();
            up_q[s * sps] = syms[s].imag();
        }
        const auto h = detail::rrc_taps(pulse.rolloff, pulse.span_symbols, sps);
        const auto yi = detail::convolve_same(up_i, h);
        const auto yq = detail::convolve_same(up_q, h);
        IQFrame out(len);
        for (size_t n = 0; n < len; ++n) {
            out.i[n] = static_cast<float>(yi[n]);
            out.q[n] = static_cast<float>(yq[n]);
        }
        return out;
    }

    if (scheme == ModulationScheme::GMSK) {
        // NRZ hold, Gaussian filter, then phase accumulation of pi/2 per symbol.
        std::vector<double> nrz(len);
        for (size_t s = 0; s < nsym; ++s) {
            const double a = bits[s] ? 1.0 : -1.0;
            for (int k = 0; k < sps; ++k) nrz[s * sps + k] = a;
        }
        const auto g = detail::gaussian_pulse(0.3, sps);
        const auto f = detail::convolve_same(nrz, g);
        IQFrame out(len);
        double phase = 0.0;
        for (size_t n = 0; n < len; ++n) {
            phase += (M_PI / 2.0) * f[n] / sps;
            out.i[n] = static_cast<float>(std::cos(phase));
            out.q[n] = static_cast<float>(std::sin(phase));
        }
        return out;
    }

    // Analog schemes.
    const auto m = detail::bandlimited_message(len, rng);
    IQFrame out(len);
    switch (scheme) {
        case ModulationScheme::AM_DSB_SC:
            for (size_t n = 0; n < len; ++n) out.i[n] = static_cast<float>(m[n]);
            break;
        case ModulationScheme::AM_DSB_WC: {
            const double mu = 0.5;
            const double norm = 1.0 / std::sqrt(1.0 + mu * mu);
            for (size_t n = 0; n < len; ++n) out.i[n] = static_cast<float>((1.0 + mu * m[n]) * norm);
            break;
        }
        case ModulationScheme::FM: {
            // deviation = index * message cutoff (0.5 * 0.05 cycles/sample)
            const double dev = 0.5 * 0.05;
            double phase = 0.0;
            for (size_t n = 0; n < len; ++n) {
                phase += 2.0 * M_PI * dev * m[n];
                out.i[n] = static_cast<float>(std::cos(phase));
                out.q[n] = static_cast<float>(std::sin(phase));
            }
            break;
        }
        default: throw std::invalid_argument("modulate_symbols: unsupported scheme");
    }
    return out;
}

}  // namespace amrvit
