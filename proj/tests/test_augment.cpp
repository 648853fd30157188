#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "amrvit/augment.hpp"
#include "amrvit/selfcheck.hpp"

using namespace amrvit;

namespace {

// Independent natural-spline oracle: assembles the full second-derivative
// system and solves it with dense Gaussian elimination (the library uses a
// scaled tridiagonal sweep instead).
struct OracleSpline {
    std::vector<double> x, y, m;

    OracleSpline(std::vector<double> xs, std::vector<double> ys) : x(std::move(xs)), y(std::move(ys)) {
        const size_t n = x.size();
        m.assign(n, 0.0);
        if (n <= 2) return;
        const size_t ni = n - 2;
        std::vector<std::vector<double>> a(ni, std::vector<double>(ni, 0.0));
        std::vector<double> rhs(ni);
        for (size_t i = 0; i < ni; ++i) {
            const double h0 = x[i + 1] - x[i];
            const double h1 = x[i + 2] - x[i + 1];
            if (i > 0) a[i][i - 1] = h0 / 6.0;
            a[i][i] = (h0 + h1) / 3.0;
            if (i + 1 < ni) a[i][i + 1] = h1 / 6.0;
            rhs[i] = (y[i + 2] - y[i + 1]) / h1 - (y[i + 1] - y[i]) / h0;
        }
        for (size_t col = 0; col < ni; ++col) {
            size_t pivot = col;
            for (size_t r = col + 1; r < ni; ++r)
                if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
            std::swap(a[col], a[pivot]);
            std::swap(rhs[col], rhs[pivot]);
            for (size_t r = col + 1; r < ni; ++r) {
                const double f = a[r][col] / a[col][col];
                for (size_t c = col; c < ni; ++c) a[r][c] -= f * a[col][c];
                rhs[r] -= f * rhs[col];
            }
        }
        for (size_t r = ni; r-- > 0;) {
            double acc = rhs[r];
            for (size_t c = r + 1; c < ni; ++c) acc -= a[r][c] * m[c + 1];
            m[r + 1] = acc / a[r][r];
        }
    }

    double operator()(double t) const {
        size_t lo = 0;
        while (lo + 2 < x.size() && x[lo + 1] <= t) ++lo;
        const double h = x[lo + 1] - x[lo];
        const double u = (x[lo + 1] - t) / h, w = (t - x[lo]) / h;
        return u * y[lo] + w * y[lo + 1] +
               ((u * u * u - u) * m[lo] + (w * w * w - w) * m[lo + 1]) * h * h / 6.0;
    }
};

IQFrame random_frame(size_t len, uint64_t seed) {
    Rng rng(seed);
    IQFrame f(len);
    for (size_t n = 0; n < len; ++n) {
        f.i[n] = static_cast<float>(rng.normal());
        f.q[n] = static_cast<float>(rng.normal());
    }
    return rms_normalize(f);
}

}  // namespace

TEST_CASE("rotate quarter turn and magnitude preservation") {
    IQFrame f(1);
    f.i[0] = 1.0f;
    const IQFrame r = rotate(f, M_PI / 2.0);
    CHECK(r.i[0] == Catch::Approx(0.0).margin(1e-7));
    CHECK(r.q[0] == Catch::Approx(1.0).margin(1e-7));

    const IQFrame g = random_frame(256, 1);
    const IQFrame rr = rotate(g, 1.234);
    for (size_t n = 0; n < g.length(); ++n)
        CHECK(std::hypot(rr.i[n], rr.q[n]) == Catch::Approx(std::hypot(g.i[n], g.q[n])).margin(1e-6));
}

TEST_CASE("flip axes and the flip-flip rotation identity") {
    IQFrame f(1);
    f.i[0] = 1.0f;
    f.q[0] = 1.0f;
    const IQFrame h = flip_h(f);
    CHECK(h.i[0] == -1.0f);
    CHECK(h.q[0] == 1.0f);

    const IQFrame g = random_frame(128, 2);
    const IQFrame hv = flip_h(flip_v(g));
    const IQFrame pi = rotate(g, M_PI);
    for (size_t n = 0; n < g.length(); ++n) {
        CHECK(hv.i[n] == Catch::Approx(pi.i[n]).margin(1e-6));
        CHECK(hv.q[n] == Catch::Approx(pi.q[n]).margin(1e-6));
    }
}

TEST_CASE("gaussian_noise zero-sigma identity, variance, determinism") {
    const IQFrame f = random_frame(8192, 3);
    Rng r0(4);
    const IQFrame same = gaussian_noise(f, 0.0, r0);
    CHECK(same.i == f.i);
    CHECK(same.q == f.q);

    Rng r1(5);
    const IQFrame noisy = gaussian_noise(f, 0.1, r1);
    double var = 0.0;
    for (size_t n = 0; n < f.length(); ++n) {
        const double di = static_cast<double>(noisy.i[n]) - f.i[n];
        const double dq = static_cast<double>(noisy.q[n]) - f.q[n];
        var += di * di + dq * dq;
    }
    var /= static_cast<double>(2 * f.length());
    CHECK(var == Catch::Approx(0.01).epsilon(0.15));

    Rng r2(5), r3(5);
    const IQFrame a = gaussian_noise(f, 0.1, r2), b = gaussian_noise(f, 0.1, r3);
    CHECK(a.i == b.i);
    CHECK(a.q == b.q);
}

TEST_CASE("scale applies one constant factor") {
    const IQFrame f = random_frame(512, 6);
    Rng r0(7);
    const IQFrame same = scale(f, 0.0, r0);
    for (size_t n = 0; n < f.length(); ++n) CHECK(same.i[n] == Catch::Approx(f.i[n]).margin(1e-7));

    Rng r1(8);
    const IQFrame out = scale(f, 0.1, r1);
    double ratio = 0.0;
    for (size_t n = 0; n < f.length(); ++n) {
        if (std::abs(f.i[n]) < 1e-3) continue;
        const double rr = static_cast<double>(out.i[n]) / f.i[n];
        if (ratio == 0.0) ratio = rr;
        CHECK(rr == Catch::Approx(ratio).margin(1e-4));
    }
    CHECK(ratio >= 0.5);
    CHECK(ratio <= 1.5);

    double mean_s = 0.0;
    for (int t = 0; t < 1000; ++t) {
        Rng rng(mix_seed(9, static_cast<uint64_t>(t)));
        mean_s += std::clamp(rng.normal(1.0, 0.1), 0.5, 1.5);
    }
    mean_s /= 1000.0;
    CHECK(mean_s == Catch::Approx(1.0).margin(0.02));
}

TEST_CASE("magnitude_warp envelope matches the independent spline oracle") {
    const IQFrame f = random_frame(512, 10);
    const int knots = 4;
    const double sigma = 0.2;
    const uint64_t seed = 11;

    // replicate the knot draw, then solve the spline independently
    Rng probe(seed);
    std::vector<double> xs(knots), ys(knots);
    for (int k = 0; k < knots; ++k) {
        xs[k] = 511.0 * k / (knots - 1);
        ys[k] = probe.normal(1.0, sigma);
    }
    const OracleSpline oracle(xs, ys);

    Rng rng(seed);
    const IQFrame out = magnitude_warp(f, knots, sigma, rng);
    for (size_t n = 0; n < f.length(); ++n) {
        const double c = oracle(static_cast<double>(n));
        CHECK(out.i[n] == Catch::Approx(f.i[n] * c).margin(1e-5));
        CHECK(out.q[n] == Catch::Approx(f.q[n] * c).margin(1e-5));
    }
    // identical envelope on both components wherever the input allows a ratio
    for (size_t n = 0; n < f.length(); ++n)
        if (std::abs(f.i[n]) > 1e-3 && std::abs(f.q[n]) > 1e-3)
            CHECK(out.i[n] / f.i[n] == Catch::Approx(out.q[n] / f.q[n]).margin(1e-4));
}

TEST_CASE("magnitude_warp flat control points give the identity") {
    const IQFrame f = random_frame(256, 12);
    Rng rng(13);
    const IQFrame out = magnitude_warp(f, 5, 0.0, rng);
    for (size_t n = 0; n < f.length(); ++n) {
        CHECK(out.i[n] == Catch::Approx(f.i[n]).margin(1e-6));
        CHECK(out.q[n] == Catch::Approx(f.q[n]).margin(1e-6));
    }
}

TEST_CASE("time_warp matches the analytic resampling oracle on a sinusoid") {
    const size_t len = 512;
    IQFrame f(len);
    for (size_t n = 0; n < len; ++n) {
        f.i[n] = static_cast<float>(std::sin(2.0 * M_PI * 3.0 * n / len));
        f.q[n] = static_cast<float>(std::cos(2.0 * M_PI * 3.0 * n / len));
    }
    const int knots = 4;
    const double sigma = 0.1;
    const uint64_t seed = 14;

    // reproduce the warp map with the oracle spline
    Rng probe(seed);
    std::vector<double> xs(knots), ys(knots);
    const double spacing = (len - 1.0) / (knots - 1);
    for (int k = 0; k < knots; ++k) xs[k] = spacing * k;
    ys = xs;
    for (int k = 1; k + 1 < knots; ++k) ys[k] += probe.normal(0.0, sigma) * spacing;
    const OracleSpline warp(xs, ys);

    Rng rng(seed);
    const IQFrame out = time_warp(f, knots, sigma, rng);
    CHECK(out.i[0] == Catch::Approx(f.i[0]).margin(1e-6));
    CHECK(out.i[len - 1] == Catch::Approx(f.i[len - 1]).margin(1e-6));
    for (size_t n = 0; n < len; ++n) {
        const double w = std::clamp(warp(static_cast<double>(n)), 0.0, static_cast<double>(len - 1));
        CHECK(out.i[n] == Catch::Approx(std::sin(2.0 * M_PI * 3.0 * w / len)).margin(5e-3));
        CHECK(out.q[n] == Catch::Approx(std::cos(2.0 * M_PI * 3.0 * w / len)).margin(5e-3));
    }
}

TEST_CASE("warp parameter validation") {
    const IQFrame f = random_frame(64, 15);
    Rng rng(16);
    CHECK_THROWS_AS(magnitude_warp(f, 1, 0.2, rng), std::invalid_argument);
    CHECK_THROWS_AS(time_warp(f, 1, 0.2, rng), std::invalid_argument);
    CHECK_THROWS_AS(magnitude_warp(f, 4, -0.1, rng), std::invalid_argument);
    CHECK_THROWS_AS(gaussian_noise(f, -1.0, rng), std::invalid_argument);
}

TEST_CASE("augment policy reports the transform it applied") {
    const IQFrame f = random_frame(512, 17);
    AugmentParams params;
    int seen = 0;
    for (int t = 0; t < 300; ++t) {
        Rng rng(mix_seed(18, static_cast<uint64_t>(t)));
        const auto [out, kind] = augment(f, params, rng);
        if (kind == AugmentKind::FlipH) {
            for (size_t n = 0; n < f.length(); ++n) REQUIRE(out.i[n] == -f.i[n]);
            ++seen;
        } else if (kind == AugmentKind::Scale) {
            double ratio = 0.0;
            for (size_t n = 0; n < f.length(); ++n) {
                if (std::abs(f.i[n]) < 1e-3) continue;
                const double rr = static_cast<double>(out.i[n]) / f.i[n];
                if (ratio == 0.0) ratio = rr;
                REQUIRE(rr == Catch::Approx(ratio).margin(1e-3));
            }
            ++seen;
        } else if (kind == AugmentKind::TimeWarp) {
            REQUIRE(out.i[0] == Catch::Approx(f.i[0]).margin(1e-6));
            REQUIRE(out.i[f.length() - 1] == Catch::Approx(f.i[f.length() - 1]).margin(1e-6));
            ++seen;
        }
    }
    CHECK(seen > 50);  // the signature checks actually ran
}

TEST_CASE("augment policy restricted to an enabled subset") {
    const IQFrame f = random_frame(128, 19);
    AugmentParams params;
    params.enabled = {AugmentKind::FlipH, AugmentKind::FlipV};
    for (int t = 0; t < 50; ++t) {
        Rng rng(mix_seed(20, static_cast<uint64_t>(t)));
        const auto kind = augment(f, params, rng).second;
        CHECK((kind == AugmentKind::FlipH || kind == AugmentKind::FlipV));
    }
}

TEST_CASE("augmentation invariant battery") {
    const SelfCheckResult res = selfcheck_augmentations(200);
    for (const auto& line : res.lines) INFO(line);
    CHECK(res.pass);
}
