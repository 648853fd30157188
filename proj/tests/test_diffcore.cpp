#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "amrvit/gradcheck.hpp"
#include "amrvit/graph.hpp"
#include "amrvit/optim.hpp"
#include "amrvit/selfcheck.hpp"

using namespace amrvit;

TEST_CASE("dense identity and zero-weight cases") {
    GraphF g;
    TensorF x({2, 3}, {1, 2, 3, 4, 5, 6});
    TensorF eye({3, 3});
    for (int k = 0; k < 3; ++k) eye.v[k * 3 + k] = 1.0f;
    const int y = g.dense(g.input(x), g.input(eye), g.input(TensorF({3})));
    CHECK(g.value(y).v == x.v);

    TensorF zero_w({3, 2});
    TensorF b({2}, {0.5f, -1.0f});
    const int y2 = g.dense(g.input(x), g.input(zero_w), g.input(b));
    for (int r = 0; r < 2; ++r) {
        CHECK(g.value(y2).v[r * 2 + 0] == 0.5f);
        CHECK(g.value(y2).v[r * 2 + 1] == -1.0f);
    }

    CHECK_THROWS_AS(g.dense(g.input(x), g.input(TensorF({4, 2})), -1), std::invalid_argument);
}

TEST_CASE("layer_norm standardizes the last axis") {
    GraphF g;
    const int d = 64;
    TensorF constant = TensorF::full({3, d}, 2.5f);
    const int ln0 = g.layer_norm(g.input(constant), g.input(TensorF::full({d}, 1.0f)), g.input(TensorF({d})));
    for (float v : g.value(ln0).v) CHECK(std::abs(v) < 1e-6f);

    Rng rng(5);
    TensorF x({4, d});
    for (auto& v : x.v) v = static_cast<float>(rng.normal(1.0, 3.0));
    const int ln = g.layer_norm(g.input(x), g.input(TensorF::full({d}, 1.0f)), g.input(TensorF({d})));
    for (int r = 0; r < 4; ++r) {
        double mean = 0, var = 0;
        for (int j = 0; j < d; ++j) mean += g.value(ln).v[r * d + j];
        mean /= d;
        for (int j = 0; j < d; ++j) {
            const double c = g.value(ln).v[r * d + j] - mean;
            var += c * c;
        }
        var /= d;
        CHECK(std::abs(mean) < 1e-4);
        CHECK(var == Catch::Approx(1.0).margin(1e-3));
    }
}

TEST_CASE("softmax uniform rows, shift invariance, normalization") {
    GraphF g;
    const int u = g.softmax_last(g.input(TensorF({2, 16})));
    for (float v : g.value(u).v) CHECK(v == Catch::Approx(1.0 / 16).margin(1e-7));

    Rng rng(6);
    TensorF x({5, 9});
    for (auto& v : x.v) v = static_cast<float>(rng.normal());
    TensorF shifted = x;
    for (int r = 0; r < 5; ++r)
        for (int j = 0; j < 9; ++j) shifted.v[r * 9 + j] += 3.25f;
    const int s1 = g.softmax_last(g.input(x));
    const int s2 = g.softmax_last(g.input(shifted));
    for (size_t k = 0; k < g.value(s1).v.size(); ++k)
        CHECK(g.value(s1).v[k] == Catch::Approx(g.value(s2).v[k]).margin(1e-6));
    for (int r = 0; r < 5; ++r) {
        double sum = 0;
        for (int j = 0; j < 9; ++j) sum += g.value(s1).v[r * 9 + j];
        CHECK(sum == Catch::Approx(1.0).margin(1e-6));
    }
}

TEST_CASE("single-token attention reduces to the projection chain") {
    // with one token the softmax over scores is exactly 1, so the output is
    // out_proj(value_proj(x))
    Rng rng(7);
    TensorF x({1, 1, 8}), wqkv({8, 24}), bqkv({24}), wo({8, 8}), bo({8});
    for (auto& v : x.v) v = static_cast<float>(rng.normal());
    for (auto& v : wqkv.v) v = static_cast<float>(rng.normal(0, 0.3));
    for (auto& v : bqkv.v) v = static_cast<float>(rng.normal(0, 0.1));
    for (auto& v : wo.v) v = static_cast<float>(rng.normal(0, 0.3));
    for (auto& v : bo.v) v = static_cast<float>(rng.normal(0, 0.1));

    GraphF g;
    const int xi = g.input(x);
    const int qkv = g.dense(xi, g.input(wqkv), g.input(bqkv));
    const int q = g.qkv_head_slice(qkv, 2, 0);
    const int k = g.qkv_head_slice(qkv, 2, 1);
    const int v = g.qkv_head_slice(qkv, 2, 2);
    const int attn = g.softmax_last(g.bmm_nt(q, k, 0.5f));
    for (float a : g.value(attn).v) CHECK(a == Catch::Approx(1.0).margin(1e-7));
    const int out = g.dense(g.merge_heads(g.bmm(attn, v), 2), g.input(wo), g.input(bo));

    // direct oracle: v = x*Wv + bv, y = v*Wo + bo
    TensorF vdir({1, 1, 8});
    for (int j = 0; j < 8; ++j) {
        float acc = bqkv.v[16 + j];
        for (int i2 = 0; i2 < 8; ++i2) acc += x.v[i2] * wqkv.v[i2 * 24 + 16 + j];
        vdir.v[j] = acc;
    }
    for (int j = 0; j < 8; ++j) {
        float acc = bo.v[j];
        for (int i2 = 0; i2 < 8; ++i2) acc += vdir.v[i2] * wo.v[i2 * 8 + j];
        CHECK(g.value(out).v[j] == Catch::Approx(acc).margin(1e-5));
    }
}

TEST_CASE("attention is equivariant to token permutation") {
    Rng rng(8);
    const int n = 5, d = 8, heads = 2;
    TensorF x({1, n, d}), wqkv({d, 3 * d}), wo({d, d});
    for (auto& v : x.v) v = static_cast<float>(rng.normal());
    for (auto& v : wqkv.v) v = static_cast<float>(rng.normal(0, 0.3));
    for (auto& v : wo.v) v = static_cast<float>(rng.normal(0, 0.3));
    const std::vector<int> perm = {3, 0, 4, 1, 2};
    TensorF xp({1, n, d});
    for (int t = 0; t < n; ++t)
        for (int j = 0; j < d; ++j) xp.v[t * d + j] = x.v[perm[t] * d + j];

    const auto run = [&](const TensorF& input) {
        GraphF g;
        const int qkv = g.dense(g.input(input), g.input(wqkv), -1);
        const int q = g.qkv_head_slice(qkv, heads, 0);
        const int k = g.qkv_head_slice(qkv, heads, 1);
        const int v = g.qkv_head_slice(qkv, heads, 2);
        const int attn = g.softmax_last(g.bmm_nt(q, k, 0.5f));
        const int out = g.dense(g.merge_heads(g.bmm(attn, v), heads), g.input(wo), -1);
        return g.value(out);
    };
    const TensorF y = run(x);
    const TensorF yp = run(xp);
    for (int t = 0; t < n; ++t)
        for (int j = 0; j < d; ++j)
            CHECK(yp.v[t * d + j] == Catch::Approx(y.v[perm[t] * d + j]).margin(1e-5));
}

TEST_CASE("conv2d identity and bias-broadcast cases") {
    GraphF g;
    Rng rng(9);
    TensorF x({1, 1, 3, 7});
    for (auto& v : x.v) v = static_cast<float>(rng.normal());
    TensorF k1({1, 1, 1, 1}, {1.0f});
    const int y = g.conv2d(g.input(x), g.input(k1), -1, 1, 1, 0, 0);
    CHECK(g.value(y).v == x.v);

    TensorF kz({2, 1, 2, 2});
    TensorF b({2}, {0.25f, -0.75f});
    const int y2 = g.conv2d(g.input(x), g.input(kz), g.input(b), 1, 1, 0, 0);
    REQUIRE(g.value(y2).shape == std::vector<int64_t>{1, 2, 2, 6});
    for (int f = 0; f < 2; ++f)
        for (int p = 0; p < 12; ++p) CHECK(g.value(y2).v[f * 12 + p] == b.v[f]);

    // output size formula: floor((in + 2p - k)/stride) + 1
    TensorF k2({1, 1, 2, 3});
    const int y3 = g.conv2d(g.input(x), g.input(k2), -1, 1, 2, 0, 1);
    CHECK(g.value(y3).shape == std::vector<int64_t>{1, 1, 2, 4});
    CHECK_THROWS_AS(g.conv2d(g.input(TensorF({1, 1, 1, 2})), g.input(TensorF({1, 1, 2, 2})), -1, 1, 1, 0, 0),
                    std::invalid_argument);
}

TEST_CASE("conv_transpose2d inverts the spatial arithmetic") {
    GraphF g;
    TensorF x({1, 1, 1, 3}, {1.0f, 2.0f, 3.0f});
    TensorF k({1, 1, 1, 4});
    for (int j = 0; j < 4; ++j) k.v[j] = 1.0f;
    const int y = g.conv_transpose2d(g.input(x), g.input(k), -1, 1, 4);
    REQUIRE(g.value(y).shape == std::vector<int64_t>{1, 1, 1, 12});
    // stride == kernel: each input broadcast into its own block
    for (int t = 0; t < 3; ++t)
        for (int j = 0; j < 4; ++j) CHECK(g.value(y).v[t * 4 + j] == x.v[t]);
}

TEST_CASE("dropout statistics at p = 0.5") {
    GraphF g;
    const int64_t n = 100000;
    TensorF x = TensorF::full({n}, 2.0f);
    Rng rng(10);
    const int y = g.dropout(g.input(x), 0.5, rng);
    int64_t survivors = 0;
    double mean = 0;
    for (float v : g.value(y).v) {
        if (v != 0.0f) ++survivors;
        mean += v;
    }
    mean /= static_cast<double>(n);
    CHECK(std::abs(static_cast<double>(survivors) / n - 0.5) < 0.01);
    CHECK(mean == Catch::Approx(2.0).epsilon(0.02));

    Rng rng2(11);
    const int same = g.dropout(g.input(x), 0.0, rng2);
    CHECK(g.value(same).v == x.v);  // p = 0 adds no op
}

TEST_CASE("adam zero-gradient fixpoint and hand-computed first step") {
    ParamSet<float> ps;
    ps.add("w", TensorF({2}, {1.0f, -2.0f}));
    AdamState<float> st = AdamState<float>::init(ps);
    AdamConfig cfg;

    std::vector<TensorF> zero{TensorF({2})};
    adam_step(ps, zero, st, cfg);
    CHECK(ps.at("w").v[0] == 1.0f);
    CHECK(ps.at("w").v[1] == -2.0f);

    // first step on scalar gradient g: m = 0.1g, v = 0.001g^2, with bias
    // correction mhat = g, vhat = g^2, update = lr * g / (|g| + eps)
    ParamSet<float> p2;
    p2.add("w", TensorF({1}, {0.5f}));
    AdamState<float> s2 = AdamState<float>::init(p2);
    const double grad = 0.37;
    std::vector<TensorF> gv{TensorF({1}, {static_cast<float>(grad)})};
    adam_step(p2, gv, s2, cfg);
    const double expect = 0.5 - cfg.lr * grad / (std::sqrt(grad * grad) + cfg.eps);
    CHECK(static_cast<double>(p2.at("w").v[0]) == Catch::Approx(expect).margin(1e-8));
    CHECK(std::abs(0.5 - p2.at("w").v[0]) == Catch::Approx(cfg.lr).margin(1e-6));

    // determinism: identical calls from identical state
    ParamSet<float> a;
    a.add("w", TensorF({3}, {1.0f, 2.0f, 3.0f}));
    ParamSet<float> b = a;
    AdamState<float> sa = AdamState<float>::init(a), sb = AdamState<float>::init(b);
    std::vector<TensorF> gg{TensorF({3}, {0.1f, -0.2f, 0.3f})};
    adam_step(a, gg, sa, cfg);
    adam_step(b, gg, sb, cfg);
    CHECK(a.at("w").v == b.at("w").v);
}

TEST_CASE("adam reports the parameter with a non-finite gradient") {
    ParamSet<float> ps;
    ps.add("enc.w", TensorF({2}));
    AdamState<float> st = AdamState<float>::init(ps);
    std::vector<TensorF> g{TensorF({2}, {1.0f, std::numeric_limits<float>::quiet_NaN()})};
    try {
        adam_step(ps, g, st, AdamConfig{});
        FAIL("expected an error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("enc.w") != std::string::npos);
    }
}

TEST_CASE("step-decay learning rate schedule") {
    const LrSchedule s{0.001, 15, 0.90};
    CHECK(lr_at(s, 0) == Catch::Approx(0.001));
    CHECK(lr_at(s, 14) == Catch::Approx(0.001));
    CHECK(lr_at(s, 15) == Catch::Approx(0.0009));
    CHECK(lr_at(s, 30) == Catch::Approx(0.00081));
    CHECK_THROWS_AS(lr_at(s, -1), std::invalid_argument);
    CHECK_THROWS_AS(lr_at(LrSchedule{0.001, 0, 0.9}, 1), std::invalid_argument);
}

TEST_CASE("check_gradients on an analytic case") {
    // f(x) = sum x^2 has gradient 2x
    TensorD x({1, 3}, {1.0, 2.0, 3.0});
    const auto rep = check_gradients(
        [](GraphD& g, const std::vector<int>& in) { return g.matmul_nt(in[0], in[0]); }, {{"x", x}});
    REQUIRE(rep.entries.size() == 1);
    CHECK(rep.worst_rel_err() < 1e-7);

    GraphD g;
    const int xi = g.param(x);
    const int f = g.matmul_nt(xi, xi);
    g.backward(f);
    CHECK(g.grad(xi).v[0] == Catch::Approx(2.0).margin(1e-12));
    CHECK(g.grad(xi).v[1] == Catch::Approx(4.0).margin(1e-12));
    CHECK(g.grad(xi).v[2] == Catch::Approx(6.0).margin(1e-12));
}

TEST_CASE("kernel gradient battery passes at the stated tolerances") {
    const SelfCheckResult res = selfcheck_gradients();
    for (const auto& line : res.lines) INFO(line);
    CHECK(res.pass);
}
