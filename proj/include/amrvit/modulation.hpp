#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace amrvit {

// The 16 modulation classes, in the fixed class-index order used everywhere
// downstream (labels, confusion matrices, reports).
enum class ModulationScheme : int {
    BPSK = 0,
    QPSK,
    PSK8,
    APSK16,
    APSK32,
    APSK64,
    APSK128,
    QAM16,
    QAM32,
    QAM64,
    QAM128,
    QAM256,
    AM_DSB_SC,
    AM_DSB_WC,
    FM,
    GMSK,
};

constexpr int kNumSchemes = 16;

inline const std::array<std::string, kNumSchemes>& scheme_names() {
    static const std::array<std::string, kNumSchemes> names = {
        "BPSK", "QPSK", "8PSK", "16APSK", "32APSK", "64APSK", "128APSK", "16QAM",
        "32QAM", "64QAM", "128QAM", "256QAM", "AM-DSB-SC", "AM-DSB-WC", "FM", "GMSK"};
    return names;
}

inline const std::string& scheme_name(ModulationScheme s) {
    return scheme_names()[static_cast<int>(s)];
}

inline ModulationScheme scheme_from_name(const std::string& name) {
    const auto& names = scheme_names();
    for (int k = 0; k < kNumSchemes; ++k)
        if (names[k] == name) return static_cast<ModulationScheme>(k);
    throw std::invalid_argument("unknown modulation scheme: " + name);
}

inline bool is_analog(ModulationScheme s) {
    return s == ModulationScheme::AM_DSB_SC || s == ModulationScheme::AM_DSB_WC ||
           s == ModulationScheme::FM;
}

// Schemes whose symbols come from a fixed constellation table.
inline bool has_constellation(ModulationScheme s) {
    return !is_analog(s) && s != ModulationScheme::GMSK;
}

inline int bits_per_symbol(ModulationScheme s) {
    switch (s) {
        case ModulationScheme::BPSK: return 1;
        case ModulationScheme::QPSK: return 2;
        case ModulationScheme::PSK8: return 3;
        case ModulationScheme::APSK16: return 4;
        case ModulationScheme::APSK32: return 5;
        case ModulationScheme::APSK64: return 6;
        case ModulationScheme::APSK128: return 7;
        case ModulationScheme::QAM16: return 4;
        case ModulationScheme::QAM32: return 5;
        case ModulationScheme::QAM64: return 6;
        case ModulationScheme::QAM128: return 7;
        case ModulationScheme::QAM256: return 8;
        case ModulationScheme::GMSK: return 1;
        // Analog schemes consume no bit values; one "symbol" per bit slot
        // keeps the frame-length contract uniform.
        case ModulationScheme::AM_DSB_SC:
        case ModulationScheme::AM_DSB_WC:
        case ModulationScheme::FM: return 1;
    }
    throw std::invalid_argument("bits_per_symbol: unsupported scheme");
}

namespace detail {

inline uint32_t binary_to_gray(uint32_t x) { return x ^ (x >> 1); }

inline std::vector<std::complex<double>> psk_points(int m, double phase0) {
    std::vector<std::complex<double>> pts(m);
    for (int k = 0; k < m; ++k) {
        // Gray mapping: bit pattern k sits at the gray(k)-th angle so that
        // adjacent constellation points differ in one bit.
        const double ang = phase0 + 2.0 * M_PI * binary_to_gray(static_cast<uint32_t>(k)) / m;
        pts[k] = {std::cos(ang), std::sin(ang)};
    }
    return pts;
}

inline std::vector<std::complex<double>> square_qam_points(int m) {
    const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(m))));
    std::vector<std::complex<double>> pts(m);
    for (int k = 0; k < m; ++k) {
        const int half = k >> std::countr_zero(static_cast<unsigned>(side));  // high bits -> I
        const int lo = k & (side - 1);
        const int gi = static_cast<int>(binary_to_gray(static_cast<uint32_t>(half)));
        const int gq = static_cast<int>(binary_to_gray(static_cast<uint32_t>(lo)));
        pts[k] = {static_cast<double>(2 * gi - (side - 1)), static_cast<double>(2 * gq - (side - 1))};
    }
    return pts;
}

// Cross constellations: a (rows x rows) odd-integer grid with the corner
// blocks removed. 32QAM = 6x6 minus 4 corners, 128QAM = 12x12 minus 2x2 corners.
inline std::vector<std::complex<double>> cross_qam_points(int m) {
    int side, corner;
    if (m == 32) {
        side = 6;
        corner = 1;
    } else if (m == 128) {
        side = 12;
        corner = 2;
    } else {
        throw std::invalid_argument("cross_qam_points: unsupported order");
    }
    std::vector<std::complex<double>> pts;
    pts.reserve(m);
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            const bool corner_cell = (r < corner || r >= side - corner) && (c < corner || c >= side - corner);
            if (corner_cell) continue;
            pts.emplace_back(2.0 * c - (side - 1), 2.0 * r - (side - 1));
        }
    }
    return pts;
}

// Ring (APSK) constellations. Ring populations follow DVB-S2(-X) style
// layouts; radii increase monotonically and the table is normalized to unit
// mean power afterwards, so only the relative geometry matters.
inline std::vector<std::complex<double>> apsk_points(int m) {
    std::vector<int> counts;
    std::vector<double> radii;
    switch (m) {
        case 16:
            counts = {4, 12};
            radii = {1.0, 2.57};
            break;
        case 32:
            counts = {4, 12, 16};
            radii = {1.0, 2.53, 4.30};
            break;
        case 64:
            counts = {8, 16, 20, 20};
            radii = {1.0, 1.88, 2.72, 3.60};
            break;
        case 128:
            counts = {8, 16, 24, 36, 44};
            radii = {1.0, 1.80, 2.60, 3.40, 4.20};
            break;
        default: throw std::invalid_argument("apsk_points: unsupported order");
    }
    std::vector<std::complex<double>> pts;
    pts.reserve(m);
    for (size_t ring = 0; ring < counts.size(); ++ring) {
        const int n = counts[ring];
        const double rot = (ring % 2 == 0) ? M_PI / n : 0.0;  // stagger adjacent rings
        for (int k = 0; k < n; ++k) {
            const double ang = rot + 2.0 * M_PI * k / n;
            pts.emplace_back(radii[ring] * std::cos(ang), radii[ring] * std::sin(ang));
        }
    }
    return pts;
}

inline void normalize_unit_power(std::vector<std::complex<double>>& pts) {
    double e = 0.0;
    for (const auto& p : pts) e += std::norm(p);
    e /= static_cast<double>(pts.size());
    const double s = 1.0 / std::sqrt(e);
    for (auto& p : pts) p *= s;
}

}  // namespace detail

// Constellation table for a digital scheme, normalized to mean symbol
// energy 1. Index = integer value of the symbol's bit group (MSB first).
inline const std::vector<std::complex<double>>& constellation(ModulationScheme s) {
    static const auto tables = [] {
        std::array<std::vector<std::complex<double>>, kNumSchemes> t;
        using MS = ModulationScheme;
        t[static_cast<int>(MS::BPSK)] = detail::psk_points(2, 0.0);
        t[static_cast<int>(MS::QPSK)] = detail::psk_points(4, M_PI / 4.0);
        t[static_cast<int>(MS::PSK8)] = detail::psk_points(8, 0.0);
        t[static_cast<int>(MS::APSK16)] = detail::apsk_points(16);
        t[static_cast<int>(MS::APSK32)] = detail::apsk_points(32);
        t[static_cast<int>(MS::APSK64)] = detail::apsk_points(64);
        t[static_cast<int>(MS::APSK128)] = detail::apsk_points(128);
        t[static_cast<int>(MS::QAM16)] = detail::square_qam_points(16);
        t[static_cast<int>(MS::QAM32)] = detail::cross_qam_points(32);
        t[static_cast<int>(MS::QAM64)] = detail::square_qam_points(64);
        t[static_cast<int>(MS::QAM128)] = detail::cross_qam_points(128);
        t[static_cast<int>(MS::QAM256)] = detail::square_qam_points(256);
        for (auto& tab : t)
            if (!tab.empty()) detail::normalize_unit_power(tab);
        return t;
    }();
    const auto& tab = tables[static_cast<int>(s)];
    if (tab.empty()) throw std::invalid_argument("constellation: " + scheme_name(s) + " has no constellation");
    return tab;
}

}  // namespace amrvit
