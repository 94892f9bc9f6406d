#include <doctest.h>

#include <cmath>

#include "tamperlab/train/trainer.hpp"
#include "tamperlab/ttt/engine.hpp"

using namespace tamperlab;

namespace {

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.image_size = 32;
    cfg.base_patch = 4;
    cfg.stage_dims = {8, 16, 32};
    cfg.blocks_per_stage = 1;
    cfg.head_dim = 8;
    cfg.mlp_ratio = 2;
    cfg.loc_width = 16;
    cfg.cls_proj_width = 8;
    cfg.cls_patch = 8;
    cfg.cls_dim = 16;
    cfg.cls_blocks = 2;
    cfg.cls_heads = 2;
    return cfg;
}

RgbImage test_image(std::uint64_t seed) {
    SynthConfig cfg;
    cfg.width = cfg.height = 32;
    cfg.count_splice = 1;
    auto s = generate_samples(cfg, seed);
    REQUIRE(s.size() == 1);
    return s[0].image;
}

std::vector<Tensor<float>> snapshot(Model<float>& m, const std::string& prefix) {
    std::vector<Tensor<float>> out;
    m.visit_params([&](const std::string& n, Tensor<float>& t) {
        if (n.rfind(prefix, 0) == 0) out.push_back(t.clone());
    });
    return out;
}

std::vector<Tensor<float>> snapshot_encoder(Encoder<float>& e) {
    std::vector<Tensor<float>> out;
    e.visit_params([&](const std::string&, Tensor<float>& t) { out.push_back(t.clone()); });
    return out;
}

bool equal(const std::vector<Tensor<float>>& a, const std::vector<Tensor<float>>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].data() != b[i].data()) return false;
    return true;
}

// a model whose initial prediction has at least one foreground token
Model<float> confident_model(std::uint64_t seed) {
    Model<float> m(small_config(), seed);
    // nudge the prediction bias so roughly half the map crosses 0.5
    m.visit_params([](const std::string& n, Tensor<float>& t) {
        if (n == "loc.pred.b") t[0] = 0.15f;
    });
    return m;
}

}  // namespace

TEST_CASE("K=0 leaves the encoder at the checkpoint") {
    Model<float> model = confident_model(3);
    TTTConfig cfg;
    cfg.steps = 0;
    cfg.query_batch = 4;
    auto res = ttt_adapt(test_image(1), model, cfg);
    CHECK(!res.report.skipped);
    CHECK(equal(snapshot(model, "encoder."), snapshot_encoder(res.encoder)));
    CHECK(res.report.ssl_loss.size() == 1);
    CHECK(res.report.encoder_passes == 0);
}

TEST_CASE("heads stay bit-identical and the source model is never touched") {
    Model<float> model = confident_model(4);
    auto heads_before = snapshot(model, "loc.");
    auto cls_before = snapshot(model, "cls.");
    auto enc_before = snapshot(model, "encoder.");
    TTTConfig cfg;
    cfg.steps = 3;
    cfg.query_batch = 4;
    cfg.lr = 1e-3;
    auto res = ttt_adapt(test_image(2), model, cfg);
    CHECK(!res.report.skipped);
    CHECK(equal(heads_before, snapshot(model, "loc.")));
    CHECK(equal(cls_before, snapshot(model, "cls.")));
    CHECK(equal(enc_before, snapshot(model, "encoder.")));            // source untouched
    CHECK(!equal(enc_before, snapshot_encoder(res.encoder)));         // copy adapted
}

TEST_CASE("per-image isolation: adapting A does not leak into B") {
    Model<float> model = confident_model(5);
    TTTConfig cfg;
    cfg.steps = 2;
    cfg.query_batch = 4;
    cfg.lr = 1e-3;
    RgbImage a = test_image(10), b = test_image(11);

    auto res_b_fresh = ttt_adapt(b, model, cfg);
    auto res_a = ttt_adapt(a, model, cfg);
    auto res_b_again = ttt_adapt(b, model, cfg);
    CHECK(equal(snapshot_encoder(res_b_fresh.encoder), snapshot_encoder(res_b_again.encoder)));
    for (std::size_t k = 0; k < res_b_fresh.report.ssl_loss.size(); ++k)
        CHECK(res_b_fresh.report.ssl_loss[k] == res_b_again.report.ssl_loss[k]);
}

TEST_CASE("all-authentic initial prediction skips without raising") {
    Model<float> model(small_config(), 6);
    model.visit_params([](const std::string& n, Tensor<float>& t) {
        if (n == "loc.pred.w")
            for (std::int64_t i = 0; i < t.size(); ++i) t[i] = 0.f;
        if (n == "loc.pred.b") t[0] = -10.f;  // prediction ~0 everywhere
    });
    TTTConfig cfg;
    cfg.steps = 3;
    cfg.query_batch = 4;
    auto res = ttt_adapt(test_image(3), model, cfg);
    CHECK(res.report.skipped);
    CHECK(equal(snapshot(model, "encoder."), snapshot_encoder(res.encoder)));

    auto [mask, rep] = predict_with_ttt(test_image(3), model, cfg);
    CHECK(rep.skipped);
    SoftMask plain = model.predict_mask(test_image(3));
    REQUIRE(mask.p.size() == plain.p.size());
    for (std::size_t i = 0; i < mask.p.size(); ++i) CHECK(mask.p[i] == plain.p[i]);
}

TEST_CASE("encoder pass accounting per strategy") {
    Model<float> model = confident_model(7);
    RgbImage img = test_image(4);
    const int B = 4, K = 3;
    for (auto [strategy, want] : std::initializer_list<std::pair<TTTStrategy, long>>{
             {TTTStrategy::ttt_base, static_cast<long>(B) * K},
             {TTTStrategy::ttt_td, static_cast<long>(B) * K},
             {TTTStrategy::ttt_obqg, static_cast<long>(K)}}) {
        TTTConfig cfg;
        cfg.steps = K;
        cfg.query_batch = B;
        cfg.strategy = strategy;
        cfg.lr = 1e-4;
        auto res = ttt_adapt(img, model, cfg);
        CHECK(!res.report.skipped);
        CHECK(res.report.encoder_passes == want);
        CHECK(res.report.ssl_loss.size() == static_cast<std::size_t>(K + 1));
        CHECK(res.report.mean_y.size() == static_cast<std::size_t>(K + 1));
    }
}

TEST_CASE("one-pass query batches differ across draws but share the grid") {
    Model<float> model = confident_model(8);
    TTTConfig cfg;
    cfg.steps = 1;
    cfg.query_batch = 8;
    cfg.strategy = TTTStrategy::ttt_obqg;
    auto res = ttt_adapt(test_image(5), model, cfg);
    CHECK(res.report.encoder_passes == 1);
}

TEST_CASE("memory proxy: obqg strictly below base") {
    Model<float> model = confident_model(9);
    RgbImage img = test_image(6);
    TTTConfig cfg;
    cfg.steps = 2;
    cfg.query_batch = 4;
    cfg.lr = 1e-4;
    cfg.strategy = TTTStrategy::ttt_obqg;
    auto obqg = ttt_adapt(img, model, cfg);
    cfg.strategy = TTTStrategy::ttt_base;
    auto base = ttt_adapt(img, model, cfg);
    REQUIRE(!obqg.report.skipped);
    REQUIRE(!base.report.skipped);
    CHECK(obqg.report.live_token_peak < base.report.live_token_peak);
}

TEST_CASE("adaptation pushes y toward the manipulated label and descends") {
    Model<float> model = confident_model(12);
    TTTConfig cfg;
    cfg.steps = 6;
    cfg.query_batch = 8;
    cfg.lr = 2e-3;  // strong enough to move a random tiny model
    auto res = ttt_adapt(test_image(7), model, cfg);
    REQUIRE(!res.report.skipped);
    REQUIRE(res.report.ssl_loss.size() == 7);
    CHECK(res.report.ssl_loss.back() < res.report.ssl_loss.front());
    CHECK(res.report.mean_y.back() > res.report.mean_y.front());
}

TEST_CASE("K=0 prediction equals plain inference") {
    Model<float> model = confident_model(13);
    RgbImage img = test_image(8);
    TTTConfig cfg;
    cfg.steps = 0;
    cfg.query_batch = 4;
    auto [mask, rep] = predict_with_ttt(img, model, cfg);
    SoftMask plain = model.predict_mask(img);
    REQUIRE(mask.p.size() == plain.p.size());
    for (std::size_t i = 0; i < mask.p.size(); ++i) CHECK(mask.p[i] == plain.p[i]);
}

TEST_CASE("same seed reproduces the adaptation bit for bit") {
    Model<float> model = confident_model(14);
    RgbImage img = test_image(9);
    TTTConfig cfg;
    cfg.steps = 3;
    cfg.query_batch = 4;
    cfg.lr = 1e-3;
    cfg.seed = 77;
    auto r1 = ttt_adapt(img, model, cfg);
    auto r2 = ttt_adapt(img, model, cfg);
    CHECK(equal(snapshot_encoder(r1.encoder), snapshot_encoder(r2.encoder)));
    cfg.seed = 78;
    auto r3 = ttt_adapt(img, model, cfg);
    CHECK(!equal(snapshot_encoder(r1.encoder), snapshot_encoder(r3.encoder)));
}

TEST_CASE("record_curve keeps K+1 masks") {
    Model<float> model = confident_model(15);
    TTTConfig cfg;
    cfg.steps = 2;
    cfg.query_batch = 4;
    cfg.record_curve = true;
    auto res = ttt_adapt(test_image(12), model, cfg);
    REQUIRE(!res.report.skipped);
    CHECK(res.report.curve_masks.size() == 3);
    CHECK(res.report.curve_masks[0].p == res.report.initial_mask.p);
    CHECK(res.report.curve_masks[2].p == res.report.final_mask.p);
}
