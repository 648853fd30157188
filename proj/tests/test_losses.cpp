#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "amrvit/losses.hpp"
#include "amrvit/vit.hpp"

using namespace amrvit;

namespace {

// Brute-force NT-Xent: enumerate the full 2B x 2B similarity matrix and sum
// the per-anchor terms directly from the formula.
double nt_xent_oracle(const TensorF& z1, const TensorF& z2, double tau) {
    const int64_t b = z1.dim(0), d = z1.dim(1);
    std::vector<std::vector<double>> z(2 * b, std::vector<double>(d));
    for (int64_t r = 0; r < b; ++r)
        for (int64_t j = 0; j < d; ++j) {
            z[r][j] = z1.v[r * d + j];
            z[b + r][j] = z2.v[r * d + j];
        }
    double total = 0.0;
    for (int64_t i = 0; i < 2 * b; ++i) {
        const int64_t pos = (i + b) % (2 * b);
        double denom = 0.0, spos = 0.0;
        for (int64_t j = 0; j < 2 * b; ++j) {
            if (j == i) continue;
            double dot = 0.0;
            for (int64_t k = 0; k < d; ++k) dot += z[i][k] * z[j][k];
            const double e = std::exp(dot / tau);
            denom += e;
            if (j == pos) spos = e;
        }
        total += -std::log(spos / denom);
    }
    return total / static_cast<double>(2 * b);
}

TensorF random_unit_rows(int64_t b, int64_t d, uint64_t seed) {
    Rng rng(seed);
    TensorF z({b, d});
    for (int64_t r = 0; r < b; ++r) {
        double norm = 0.0;
        for (int64_t j = 0; j < d; ++j) {
            z.v[r * d + j] = static_cast<float>(rng.normal());
            norm += static_cast<double>(z.v[r * d + j]) * z.v[r * d + j];
        }
        norm = std::sqrt(norm);
        for (int64_t j = 0; j < d; ++j) z.v[r * d + j] = static_cast<float>(z.v[r * d + j] / norm);
    }
    return z;
}

double ce_oracle(const TensorF& logits, const std::vector<int>& labels) {
    const int64_t b = logits.dim(0), k = logits.dim(1);
    double total = 0.0;
    for (int64_t r = 0; r < b; ++r) {
        double mx = logits.v[r * k];
        for (int64_t j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(logits.v[r * k + j]));
        double sum = 0.0;
        for (int64_t j = 0; j < k; ++j) sum += std::exp(logits.v[r * k + j] - mx);
        total += mx + std::log(sum) - logits.v[r * k + labels[r]];
    }
    return total / static_cast<double>(b);
}

}  // namespace

TEST_CASE("reconstruction loss basics and the scalar oracle") {
    Rng rng(1);
    IQFrame a(64), b(64);
    for (size_t n = 0; n < 64; ++n) {
        a.i[n] = static_cast<float>(rng.normal());
        a.q[n] = static_cast<float>(rng.normal());
    }
    CHECK(reconstruction_loss(a, a) == 0.0);

    b = a;
    for (auto& v : b.i) v += 1.0f;
    for (auto& v : b.q) v += 1.0f;
    CHECK(reconstruction_loss(b, a) == Catch::Approx(1.0).margin(1e-6));

    for (size_t n = 0; n < 64; ++n) {
        b.i[n] = static_cast<float>(rng.normal());
        b.q[n] = static_cast<float>(rng.normal());
    }
    double acc = 0.0;
    for (size_t n = 0; n < 64; ++n) {
        acc += (static_cast<double>(b.i[n]) - a.i[n]) * (b.i[n] - a.i[n]);
        acc += (static_cast<double>(b.q[n]) - a.q[n]) * (b.q[n] - a.q[n]);
    }
    CHECK(reconstruction_loss(b, a) == Catch::Approx(acc / 128.0).margin(1e-6));

    IQFrame c(32);
    CHECK_THROWS_AS(reconstruction_loss(c, a), std::invalid_argument);
}

TEST_CASE("NT-Xent matches the hand-enumerated two-pair case") {
    TensorF z1({2, 2}, {1.0f, 0.0f, 0.0f, 1.0f});
    const double loss = contrastive_loss(z1, z1, 0.5);
    // frozen from the 4x4 similarity-matrix enumeration
    CHECK(loss == Catch::Approx(0.2395447662218845).margin(1e-6));
    CHECK(loss == Catch::Approx(nt_xent_oracle(z1, z1, 0.5)).margin(1e-7));
}

TEST_CASE("NT-Xent matches the brute-force oracle on 20 random batches") {
    for (int trial = 0; trial < 20; ++trial) {
        Rng rng(mix_seed(50, static_cast<uint64_t>(trial)));
        const int64_t b = 2 + rng.uniform_int(7);  // B <= 8
        const int64_t d = 2 + rng.uniform_int(15);
        const TensorF z1 = random_unit_rows(b, d, mix_seed(51, trial));
        const TensorF z2 = random_unit_rows(b, d, mix_seed(52, trial));
        const double tau = 0.2 + rng.uniform() * 0.8;
        INFO("trial " << trial << " B=" << b << " d=" << d << " tau=" << tau);
        CHECK(contrastive_loss(z1, z2, tau) == Catch::Approx(nt_xent_oracle(z1, z2, tau)).margin(1e-6));
    }
}

TEST_CASE("NT-Xent symmetry and positive-pair separation") {
    const TensorF z1 = random_unit_rows(5, 8, 60);
    const TensorF z2 = random_unit_rows(5, 8, 61);
    CHECK(contrastive_loss(z1, z2, 0.5) == Catch::Approx(contrastive_loss(z2, z1, 0.5)).margin(1e-6));

    // orthogonal anchors with identical positives score lower than random views
    TensorF e({4, 4});
    for (int r = 0; r < 4; ++r) e.v[r * 4 + r] = 1.0f;
    CHECK(contrastive_loss(e, e, 0.5) < nt_xent_oracle(random_unit_rows(4, 4, 62), random_unit_rows(4, 4, 63), 0.5));

    CHECK_THROWS_AS(contrastive_loss(random_unit_rows(1, 4, 64), random_unit_rows(1, 4, 64), 0.5),
                    std::invalid_argument);
    TensorF not_unit({2, 2}, {3.0f, 0.0f, 0.0f, 3.0f});
    CHECK_THROWS_AS(contrastive_loss(not_unit, not_unit, 0.5), std::invalid_argument);
}

TEST_CASE("classification loss: uniform logits give ln 16") {
    TensorF logits({3, 16});
    CHECK(classification_loss(logits, {0, 7, 15}) == Catch::Approx(2.772588722239781).margin(1e-6));
}

TEST_CASE("classification loss decreases with one-hot scale") {
    double prev = 1e9;
    for (double s : {1.0, 10.0, 100.0}) {
        TensorF logits({1, 16});
        logits.v[3] = static_cast<float>(s);
        const double loss = classification_loss(logits, {3});
        CHECK(loss < prev);
        prev = loss;
    }
    CHECK(prev < 1e-6);  // loss -> 0 as scale grows
}

TEST_CASE("classification loss matches the scalar oracle and validates labels") {
    Rng rng(70);
    TensorF logits({6, 16});
    for (auto& v : logits.v) v = static_cast<float>(rng.normal());
    std::vector<int> labels;
    for (int r = 0; r < 6; ++r) labels.push_back(static_cast<int>(rng.uniform_int(16)));
    CHECK(classification_loss(logits, labels) == Catch::Approx(ce_oracle(logits, labels)).margin(1e-6));
    CHECK_THROWS_AS(classification_loss(logits, {0, 1, 2, 3, 4, 16}), std::invalid_argument);
}

TEST_CASE("pseudo_label_select thresholds and tie handling") {
    TensorF probs({2, 4});
    probs.v = {0.9f, 0.05f, 0.03f, 0.02f, 0.6f, 0.3f, 0.07f, 0.03f};
    const auto sel = pseudo_label_select(probs, 0.8);
    REQUIRE(sel.indices == std::vector<int>{0});
    REQUIRE(sel.labels == std::vector<int>{0});

    TensorF uniform = TensorF::full({3, 4}, 0.25f);
    CHECK(pseudo_label_select(uniform, 0.8).indices.empty());
    CHECK(pseudo_label_select(uniform, 0.25).indices.empty());  // strict >

    const auto all = pseudo_label_select(probs, 0.0);
    CHECK(all.indices == std::vector<int>{0, 1});
    CHECK(all.labels == std::vector<int>{0, 0});

    // tie: both maxima equal, the lowest class index wins
    TensorF tie({1, 4}, {0.1f, 0.4f, 0.4f, 0.1f});
    const auto t = pseudo_label_select(tie, 0.3);
    REQUIRE(t.labels == std::vector<int>{1});

    TensorF bad = TensorF::full({1, 4}, 0.3f);
    CHECK_THROWS_AS(pseudo_label_select(bad, 0.5), std::invalid_argument);
}

TEST_CASE("pseudo_label_select reproduces exact sets at the four thresholds") {
    // hand-built probability rows with max prob 0.4, 0.55, 0.85, 1.0
    TensorF probs({4, 4});
    probs.v = {0.4f,  0.3f, 0.2f, 0.1f,   //
               0.15f, 0.55f, 0.2f, 0.1f,  //
               0.05f, 0.05f, 0.85f, 0.05f,//
               0.0f,  0.0f,  0.0f,  1.0f};
    struct Case {
        double threshold;
        std::vector<int> indices, labels;
    };
    const std::vector<Case> cases = {
        {0.0, {0, 1, 2, 3}, {0, 1, 2, 3}},
        {0.5, {1, 2, 3}, {1, 2, 3}},
        {0.8, {2, 3}, {2, 3}},
        {0.999, {3}, {3}},
    };
    for (const auto& c : cases) {
        const auto sel = pseudo_label_select(probs, c.threshold);
        INFO("threshold " << c.threshold);
        CHECK(sel.indices == c.indices);
        CHECK(sel.labels == c.labels);
    }
}

namespace {

struct SemiFixture {
    ViTConfig cfg;
    ParamSet<float> params;
    std::vector<IQFrame> frames;
    SemiBatch batch;

    SemiFixture() {
        cfg.layers = 2;
        cfg.dropout = 0.0;
        Rng prng(80);
        params = build_vit_params<float>(cfg, prng);
        Rng frng(81);
        for (int k = 0; k < 4; ++k) {
            IQFrame f(cfg.input_len);
            for (auto& v : f.i) v = static_cast<float>(frng.normal());
            for (auto& v : f.q) v = static_cast<float>(frng.normal());
            frames.push_back(rms_normalize(f));
        }
        for (const auto& f : frames) {
            batch.clean.push_back(&f);
            batch.view1.push_back(&f);
            batch.view2.push_back(&f);
        }
        batch.labels = {1, 2, 0, 0};
        batch.labeled = {1, 1, 0, 0};
    }

    LossComponents run(Scenario scenario, const LossWeights& w, bool pseudo_active = false,
                       const std::vector<int>* fixed = nullptr) {
        GraphF g;
        const BoundParams<float> p = bind_params(g, params);
        Rng dummy(0);
        return semi_supervised_loss(g, cfg, p, batch, scenario, w, 0.5, PseudoConfig{}, pseudo_active, false,
                                    dummy, fixed);
    }
};

}  // namespace

TEST_CASE("combined loss degenerate and recombination identities") {
    SemiFixture fix;

    // alpha = 0: total reduces to beta * L_s exactly
    LossWeights w0{0.0, 2.0, 1.0, 1.0};
    const auto only_s = fix.run(Scenario::ReconPlusContrastive, w0);
    CHECK(only_s.total == Catch::Approx(2.0 * only_s.cls).margin(1e-6));
    CHECK_FALSE(only_s.decoder_invoked);
    CHECK_FALSE(only_s.contrastive_evaluated);

    // component recombination at generic weights
    LossWeights w{0.7, 1.3, 0.9, 1.1};
    const auto comp = fix.run(Scenario::ReconPlusContrastive, w);
    const double lu = 0.9 * comp.recon + 1.1 * comp.contrastive;
    CHECK(comp.total == Catch::Approx(0.7 * lu + 1.3 * comp.cls).margin(1e-6));

    // doubling alpha doubles exactly the unsupervised part of the total
    LossWeights w2 = w;
    w2.alpha = 1.4;
    const auto comp2 = fix.run(Scenario::ReconPlusContrastive, w2);
    CHECK(comp2.total - 1.3 * comp2.cls == Catch::Approx(2.0 * (comp.total - 1.3 * comp.cls)).margin(1e-6));
}

TEST_CASE("scenario gates are structural") {
    SemiFixture fix;
    LossWeights w{1.0, 0.0, 1.0, 1.0};
    const auto recon_only = fix.run(Scenario::ReconOnly, w);
    CHECK(recon_only.decoder_invoked);
    CHECK_FALSE(recon_only.contrastive_evaluated);
    CHECK(recon_only.contrastive == 0.0);

    const auto contrast_only = fix.run(Scenario::ContrastiveOnly, w);
    CHECK_FALSE(contrast_only.decoder_invoked);
    CHECK(contrast_only.contrastive_evaluated);
    CHECK(contrast_only.recon == 0.0);

    const auto both = fix.run(Scenario::ReconPlusContrastive, w);
    CHECK(both.decoder_invoked);
    CHECK(both.contrastive_evaluated);
}

TEST_CASE("supervised term vanishes without labeled or confident rows") {
    SemiFixture fix;
    fix.batch.labeled = {0, 0, 0, 0};
    LossWeights w{1.0, 1.0, 1.0, 0.0};
    const auto comp = fix.run(Scenario::ReconOnly, w, false);
    CHECK(comp.cls == 0.0);
    CHECK(comp.pseudo_count == 0);
    CHECK(comp.total == Catch::Approx(comp.recon).margin(1e-6));
}

TEST_CASE("pseudo rows never overlap labeled rows") {
    SemiFixture fix;
    // force selection with fixed labels: only rows 2 and 3 are unlabeled
    const std::vector<int> fixed = {5, 5, 4, -1};
    LossWeights w{0.0, 1.0, 1.0, 1.0};
    const auto comp = fix.run(Scenario::ReconOnly, w, true, &fixed);
    CHECK(comp.pseudo_count == 1);  // only row 2: labeled rows ignored, row 3 unselected

    SemiBatch empty;
    GraphF g;
    const BoundParams<float> p = bind_params(g, fix.params);
    Rng dummy(0);
    CHECK_THROWS_AS(semi_supervised_loss(g, fix.cfg, p, empty, Scenario::ReconOnly, w, 0.5, PseudoConfig{},
                                         false, false, dummy),
                    std::invalid_argument);
}
