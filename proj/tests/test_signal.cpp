#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <filesystem>
#include <map>
#include <set>

#include "amrvit/channel.hpp"
#include "amrvit/dataset.hpp"
#include "amrvit/modulate.hpp"
#include "amrvit/modulation.hpp"

using namespace amrvit;

TEST_CASE("constellations are distinct and unit power") {
    for (int k = 0; k < kNumSchemes; ++k) {
        const auto s = static_cast<ModulationScheme>(k);
        if (!has_constellation(s)) continue;
        const auto& table = constellation(s);
        REQUIRE(static_cast<int>(table.size()) == (1 << bits_per_symbol(s)));
        double energy = 0.0;
        std::set<std::pair<long, long>> seen;
        for (const auto& p : table) {
            energy += std::norm(p);
            seen.insert({std::lround(p.real() * 1e7), std::lround(p.imag() * 1e7)});
        }
        energy /= static_cast<double>(table.size());
        INFO(scheme_name(s));
        CHECK(energy == Catch::Approx(1.0).margin(1e-6));
        CHECK(seen.size() == table.size());  // all points distinct
    }
    REQUIRE(scheme_names().size() == 16);
}

TEST_CASE("modulate_symbols canonical points") {
    Rng rng(1);
    const IQFrame bpsk = modulate_symbols(ModulationScheme::BPSK, {0}, 1, rng);
    REQUIRE(bpsk.length() == 1);
    CHECK(bpsk.i[0] == Catch::Approx(1.0).margin(1e-7));
    CHECK(bpsk.q[0] == Catch::Approx(0.0).margin(1e-7));

    const IQFrame qpsk = modulate_symbols(ModulationScheme::QPSK, {0, 0}, 1, rng);
    REQUIRE(qpsk.length() == 1);
    CHECK(qpsk.i[0] == Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-6));
    CHECK(qpsk.q[0] == Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-6));
}

TEST_CASE("modulate_symbols pulse-shaped 16QAM holds unit power") {
    Rng rng(7);
    std::vector<uint8_t> bits(4096);
    for (auto& b : bits) b = static_cast<uint8_t>(rng.uniform_int(2));
    const IQFrame f = modulate_symbols(ModulationScheme::QAM16, bits, 8, rng);
    REQUIRE(f.length() == 4096 / 4 * 8);
    CHECK(frame_power(f) == Catch::Approx(1.0).margin(0.05));
}

TEST_CASE("modulate_symbols frame-length contract for every scheme") {
    for (int k = 0; k < kNumSchemes; ++k) {
        const auto s = static_cast<ModulationScheme>(k);
        Rng rng(100 + k);
        const int bps = bits_per_symbol(s);
        std::vector<uint8_t> bits(static_cast<size_t>(bps) * 64);
        for (auto& b : bits) b = static_cast<uint8_t>(rng.uniform_int(2));
        const IQFrame f = modulate_symbols(s, bits, 8, rng);
        INFO(scheme_name(s));
        CHECK(f.length() == 64 * 8);
        CHECK(f.finite());
        CHECK(frame_power(f) == Catch::Approx(1.0).margin(0.2));
    }
}

TEST_CASE("modulate_symbols rejects mismatched bit counts") {
    Rng rng(1);
    CHECK_THROWS_AS(modulate_symbols(ModulationScheme::QAM16, {0, 1, 1}, 8, rng), std::invalid_argument);
    CHECK_THROWS_AS(modulate_symbols(ModulationScheme::BPSK, {}, 8, rng), std::invalid_argument);
    CHECK_THROWS_AS(modulate_symbols(ModulationScheme::BPSK, {1}, 0, rng), std::invalid_argument);
}

TEST_CASE("apply_channel identity and phase flip") {
    Rng rng(3);
    IQFrame f(64);
    for (size_t n = 0; n < 64; ++n) {
        f.i[n] = static_cast<float>(rng.normal());
        f.q[n] = static_cast<float>(rng.normal());
    }
    const IQFrame same = apply_channel(f, ChannelParams{1.0, 0.0, 0.0});
    for (size_t n = 0; n < 64; ++n) {
        CHECK(same.i[n] == Catch::Approx(f.i[n]).margin(1e-7));
        CHECK(same.q[n] == Catch::Approx(f.q[n]).margin(1e-7));
    }

    IQFrame one(1);
    one.i[0] = 1.0f;
    const IQFrame flipped = apply_channel(one, ChannelParams{1.0, 0.0, M_PI});
    CHECK(flipped.i[0] == Catch::Approx(-1.0).margin(1e-6));
    CHECK(flipped.q[0] == Catch::Approx(0.0).margin(1e-6));
}

TEST_CASE("apply_channel matches the complex-exponential oracle") {
    IQFrame ones(128);
    for (auto& v : ones.i) v = 1.0f;
    const ChannelParams params{2.0, 0.1, 0.0};
    const IQFrame out = apply_channel(ones, params);
    for (size_t n = 0; n < ones.length(); ++n) {
        const std::complex<double> expect = 2.0 * std::exp(std::complex<double>(0.0, 0.1 * n));
        CHECK(out.i[n] == Catch::Approx(expect.real()).margin(1e-5));
        CHECK(out.q[n] == Catch::Approx(expect.imag()).margin(1e-5));
        CHECK(std::hypot(out.i[n], out.q[n]) == Catch::Approx(2.0).margin(1e-5));
    }
}

TEST_CASE("apply_channel preserves magnitude at unit gain") {
    Rng rng(4);
    IQFrame f(256);
    for (size_t n = 0; n < f.length(); ++n) {
        f.i[n] = static_cast<float>(rng.normal());
        f.q[n] = static_cast<float>(rng.normal());
    }
    const IQFrame out = apply_channel(f, ChannelParams{1.0, 0.3, 1.0});
    REQUIRE(out.length() == f.length());
    for (size_t n = 0; n < f.length(); ++n)
        CHECK(std::hypot(out.i[n], out.q[n]) == Catch::Approx(std::hypot(f.i[n], f.q[n])).margin(1e-6));
}

TEST_CASE("apply_channel rejects bad parameters") {
    IQFrame f(4);
    f.i[0] = 1.0f;
    CHECK_THROWS_AS(apply_channel(f, ChannelParams{-1.0, 0.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(apply_channel(f, ChannelParams{1.0, 4.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(apply_channel(f, ChannelParams{std::nan(""), 0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("add_awgn vanishing noise, determinism, and zero-power error") {
    IQFrame f(64);
    for (auto& v : f.i) v = 1.0f;
    Rng r1(9), r2(9);
    const IQFrame clean = add_awgn(f, 300.0, r1);
    for (size_t n = 0; n < f.length(); ++n) CHECK(clean.i[n] == Catch::Approx(f.i[n]).margin(1e-6));

    Rng r3(9);
    const IQFrame a = add_awgn(f, 10.0, r2);
    const IQFrame b = add_awgn(f, 10.0, r3);
    CHECK(a.i == b.i);
    CHECK(a.q == b.q);

    IQFrame zero(16);
    Rng r4(1);
    CHECK_THROWS_AS(add_awgn(zero, 10.0, r4), std::invalid_argument);
}

TEST_CASE("add_awgn measured noise power at 0 dB") {
    IQFrame f(4096);
    for (auto& v : f.i) v = 1.0f;  // unit power
    Rng rng(11);
    const IQFrame noisy = add_awgn(f, 0.0, rng);
    double noise_power = 0.0;
    for (size_t n = 0; n < f.length(); ++n) {
        const double di = static_cast<double>(noisy.i[n]) - f.i[n];
        const double dq = static_cast<double>(noisy.q[n]) - f.q[n];
        noise_power += di * di + dq * dq;
    }
    noise_power /= static_cast<double>(f.length());
    CHECK(noise_power == Catch::Approx(1.0).margin(0.1));
}

TEST_CASE("add_awgn empirical SNR tracks the target over 100 trials") {
    IQFrame f(4096);
    Rng frng(21);
    for (size_t n = 0; n < f.length(); ++n) {
        f.i[n] = static_cast<float>(frng.normal());
        f.q[n] = static_cast<float>(frng.normal());
    }
    const IQFrame unit = rms_normalize(f);
    const double signal_power = frame_power(unit);
    for (double target : {0.0, 10.0}) {
        double mean_snr = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            Rng rng(mix_seed(33, static_cast<uint64_t>(trial), static_cast<uint64_t>(target)));
            const IQFrame noisy = add_awgn(unit, target, rng);
            double noise_power = 0.0;
            for (size_t n = 0; n < unit.length(); ++n) {
                const double di = static_cast<double>(noisy.i[n]) - unit.i[n];
                const double dq = static_cast<double>(noisy.q[n]) - unit.q[n];
                noise_power += di * di + dq * dq;
            }
            noise_power /= static_cast<double>(unit.length());
            mean_snr += 10.0 * std::log10(signal_power / noise_power);
        }
        mean_snr /= 100.0;
        CHECK(mean_snr == Catch::Approx(target).margin(0.3));
    }
}

TEST_CASE("build_synthetic_dataset counts and balance") {
    SynthConfig cfg;
    cfg.snr_list_db = {-2, 0, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20};
    cfg.frames_per_cell = 10;
    cfg.frame_len = 128;
    cfg.seed = 2;
    const Dataset ds = build_synthetic_dataset(cfg);
    REQUIRE(ds.size() == 16u * 12u * 10u);

    std::map<std::pair<int, int>, int> cells;
    for (const auto& s : ds.samples) cells[{s.class_id, s.snr_db}] += 1;
    REQUIRE(cells.size() == 16u * 12u);
    for (const auto& [cell, count] : cells) CHECK(count == 10);
}

TEST_CASE("build_synthetic_dataset single cell and determinism") {
    SynthConfig cfg;
    cfg.schemes = {ModulationScheme::QPSK};
    cfg.snr_list_db = {6};
    cfg.frames_per_cell = 5;
    cfg.frame_len = 64;
    cfg.seed = 77;
    const Dataset a = build_synthetic_dataset(cfg);
    REQUIRE(a.size() == 5);
    for (const auto& s : a.samples) {
        CHECK(s.class_id == 0);
        CHECK(s.snr_db == 6);
    }
    const Dataset b = build_synthetic_dataset(cfg);
    for (size_t k = 0; k < a.size(); ++k) {
        CHECK(a.samples[k].frame.i == b.samples[k].frame.i);
        CHECK(a.samples[k].frame.q == b.samples[k].frame.q);
    }
}

TEST_CASE("split_dataset exact fractions, determinism, partition") {
    SynthConfig cfg;
    cfg.schemes = {ModulationScheme::BPSK, ModulationScheme::FM};
    cfg.snr_list_db = {10};
    cfg.frames_per_cell = 500;
    cfg.frame_len = 32;
    Dataset ds = build_synthetic_dataset(cfg);
    REQUIRE(ds.size() == 1000);

    const Dataset s1 = split_dataset(ds, {0.7, 0.1, 0.2}, 42);
    CHECK(s1.count(Split::train) == 700);
    CHECK(s1.count(Split::val) == 100);
    CHECK(s1.count(Split::test) == 200);

    const Dataset s2 = split_dataset(ds, {0.7, 0.1, 0.2}, 42);
    for (size_t k = 0; k < ds.size(); ++k) CHECK(s1.samples[k].split == s2.samples[k].split);

    const size_t total = s1.count(Split::train) + s1.count(Split::val) + s1.count(Split::test);
    CHECK(total == ds.size());  // tags partition the samples

    Dataset tiny;
    tiny.samples.resize(2);
    CHECK_THROWS_AS(split_dataset(tiny, {0.7, 0.1, 0.2}, 1), std::invalid_argument);
    CHECK_THROWS_AS(split_dataset(ds, {0.7, 0.1, 0.3}, 1), std::invalid_argument);
}

TEST_CASE("split sizes stay within one sample of fraction * N") {
    SynthConfig cfg;
    cfg.schemes = {ModulationScheme::BPSK};
    cfg.snr_list_db = {0};
    cfg.frames_per_cell = 101;
    cfg.frame_len = 32;
    const Dataset ds = split_dataset(build_synthetic_dataset(cfg), {0.7, 0.1, 0.2}, 3);
    CHECK(std::abs(static_cast<double>(ds.count(Split::train)) - 70.7) <= 1.0);
    CHECK(std::abs(static_cast<double>(ds.count(Split::val)) - 10.1) <= 1.0);
    CHECK(std::abs(static_cast<double>(ds.count(Split::test)) - 20.2) <= 1.0);
}

TEST_CASE("label_mask stratification") {
    SynthConfig cfg;
    cfg.schemes = {ModulationScheme::BPSK, ModulationScheme::QPSK, ModulationScheme::FM};
    cfg.snr_list_db = {0, 10};
    cfg.frames_per_cell = 100;
    cfg.frame_len = 32;
    Dataset ds = split_dataset(build_synthetic_dataset(cfg), {0.7, 0.1, 0.2}, 9);

    std::map<int, int> train_per_class;
    for (const auto& s : ds.samples)
        if (s.split == Split::train) train_per_class[s.class_id] += 1;

    const Dataset masked = label_mask(ds, 0.10, 5);
    std::map<int, int> labeled_per_class;
    for (const auto& s : masked.samples) {
        if (s.split == Split::train) {
            if (s.labeled) labeled_per_class[s.class_id] += 1;
        } else {
            CHECK(s.labeled);  // val and test stay fully labeled
        }
    }
    for (const auto& [cls, count] : labeled_per_class) {
        CHECK(count == std::lround(0.10 * train_per_class[cls]));
        CHECK(count >= 1);
    }

    const Dataset all = label_mask(ds, 1.0, 5);
    for (const auto& s : all.samples) CHECK(s.labeled);

    CHECK_THROWS_AS(label_mask(ds, 0.0, 1), std::invalid_argument);
}

TEST_CASE("label_mask names the class with no train samples") {
    SynthConfig cfg;
    cfg.schemes = {ModulationScheme::BPSK, ModulationScheme::GMSK};
    cfg.snr_list_db = {0};
    cfg.frames_per_cell = 10;
    cfg.frame_len = 32;
    Dataset ds = build_synthetic_dataset(cfg);
    for (auto& s : ds.samples) s.split = s.class_id == 0 ? Split::train : Split::test;
    try {
        label_mask(ds, 0.5, 1);
        FAIL("expected an error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("GMSK") != std::string::npos);
    }
}

TEST_CASE("dataset record file round-trips") {
    SynthConfig cfg;
    cfg.schemes = {ModulationScheme::QAM16, ModulationScheme::FM};
    cfg.snr_list_db = {0, 10};
    cfg.frames_per_cell = 3;
    cfg.frame_len = 64;
    cfg.seed = 13;
    const Dataset ds = build_synthetic_dataset(cfg);
    const std::string path = std::filesystem::temp_directory_path() / "amrvit_test_dataset.amrd";
    save_dataset(ds, cfg.snr_list_db, cfg.frames_per_cell, cfg.frame_len, path);
    const Dataset back = load_dataset(path);
    REQUIRE(back.size() == ds.size());
    CHECK(back.class_names == ds.class_names);
    for (size_t k = 0; k < ds.size(); ++k) {
        CHECK(back.samples[k].class_id == ds.samples[k].class_id);
        CHECK(back.samples[k].snr_db == ds.samples[k].snr_db);
        CHECK(back.samples[k].frame.i == ds.samples[k].frame.i);
        CHECK(back.samples[k].frame.q == ds.samples[k].frame.q);
    }
    std::filesystem::remove(path);
}
