#include <doctest.h>

#include <cmath>

#include "fd_check.hpp"
#include "tamperlab/core/rng.hpp"
#include "tamperlab/model/encoder.hpp"
#include "tamperlab/model/loc_head.hpp"

using namespace tamperlab;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.image_size = 16;
    cfg.base_patch = 4;
    cfg.stage_dims = {8, 16};
    cfg.blocks_per_stage = 1;
    cfg.head_dim = 8;
    cfg.mlp_ratio = 2;
    cfg.loc_width = 8;
    cfg.cls_proj_width = 4;
    cfg.cls_patch = 8;
    cfg.cls_dim = 8;
    cfg.cls_blocks = 2;
    cfg.cls_heads = 2;
    return cfg;
}

template <typename T>
MultiScaleFeatures<T> fake_features(const ModelConfig& cfg, Graph<T>& g, std::uint64_t seed,
                                    T fill = T(-1)) {
    Prng rng(seed);
    MultiScaleFeatures<T> f;
    int h = cfg.grid_h(), w = cfg.grid_w();
    for (int s = 0; s < cfg.stages(); ++s) {
        const int c = cfg.stage_dims[static_cast<std::size_t>(s)];
        Tensor<T> t({h * w, c});
        for (std::int64_t i = 0; i < t.size(); ++i)
            t[i] = fill == T(-1) ? static_cast<T>(rng.normal()) : fill;
        f.scales.push_back({g.constant(t), h, w, c});
        h /= 2;
        w /= 2;
    }
    return f;
}

}  // namespace

TEST_CASE("outputs are probabilities at input resolution") {
    ModelConfig cfg = tiny_config();
    Prng rng(1);
    LocHead<float> head(cfg, rng);
    Graph<float> g;
    auto feats = fake_features<float>(cfg, g, 7);
    auto m = head.forward(g, feats);
    CHECK(m.rows() == 16 * 16);
    CHECK(m.cols() == 1);
    for (std::int64_t i = 0; i < m.val().size(); ++i) {
        CHECK(m.val()[i] >= 0.f);
        CHECK(m.val()[i] <= 1.f);
    }
}

TEST_CASE("zero weights give the logistic midpoint everywhere") {
    ModelConfig cfg = tiny_config();
    Prng rng(2);
    LocHead<float> head(cfg, rng);
    head.visit_params([](const std::string&, Tensor<float>& t) {
        for (std::int64_t i = 0; i < t.size(); ++i) t[i] = 0.f;
    });
    Graph<float> g;
    auto feats = fake_features<float>(cfg, g, 3, 0.f);
    auto m = head.forward(g, feats);
    for (std::int64_t i = 0; i < m.val().size(); ++i) CHECK(m.val()[i] == doctest::Approx(0.5f));
}

TEST_CASE("same features give identical masks") {
    ModelConfig cfg = tiny_config();
    Prng rng(3);
    LocHead<float> head(cfg, rng);
    Graph<float> g;
    auto feats = fake_features<float>(cfg, g, 11);
    auto m1 = head.forward(g, feats);
    auto m2 = head.forward(g, feats);
    for (std::int64_t i = 0; i < m1.val().size(); ++i) CHECK(m1.val()[i] == m2.val()[i]);
}

TEST_CASE("scale mismatch raises a shape error") {
    ModelConfig cfg = tiny_config();
    Prng rng(4);
    LocHead<float> head(cfg, rng);
    Graph<float> g;
    auto feats = fake_features<float>(cfg, g, 5);
    feats.scales.pop_back();
    CHECK_THROWS_AS(head.forward(g, feats), ShapeError);
}

TEST_CASE("bce values: analytic and hand-computed") {
    Graph<double> g;
    BinaryMask target(1, 2);
    target.at(0, 0) = 1;

    // uniform 0.5 -> ln 2
    auto mid = g.constant(Tensor<double>({2, 1}, {0.5, 0.5}));
    CHECK(loc_bce_loss(g, mid, target).val()[0] == doctest::Approx(std::log(2.0)).epsilon(1e-9));

    // pred = [0.9, 0.1], target = [1, 0] -> -(ln 0.9 + ln 0.9)/2
    auto p = g.constant(Tensor<double>({2, 1}, {0.9, 0.1}));
    CHECK(loc_bce_loss(g, p, target).val()[0] ==
          doctest::Approx(-0.5 * (std::log(0.9) + std::log(0.9))).epsilon(1e-9));
    CHECK(loc_bce_loss(g, p, target).val()[0] == doctest::Approx(0.10536).epsilon(1e-3));

    // perfect prediction (after clamping) ~ 0
    auto exact = g.constant(Tensor<double>({2, 1}, {1.0, 0.0}));
    CHECK(loc_bce_loss(g, exact, target).val()[0] <= 1e-6);

    // shape mismatch
    BinaryMask wrong(1, 3);
    CHECK_THROWS_AS(loc_bce_loss(g, p, wrong), ShapeError);
}

TEST_CASE("head gradients match finite differences through bce") {
    ModelConfig cfg = tiny_config();
    Prng rng(5);
    LocHead<double> head(cfg, rng);
    Prng mrng(6);
    BinaryMask target(16, 16);
    for (auto& v : target.px) v = mrng.bernoulli(0.3) ? 1 : 0;

    auto loss_of = [&]() {
        Graph<double> g;
        auto feats = fake_features<double>(cfg, g, 13);
        auto m = head.forward(g, feats);
        return loc_bce_loss(g, m, target).val()[0];  // read before the graph goes away
    };
    Graph<double> g;
    auto feats = fake_features<double>(cfg, g, 13);
    auto m = head.forward(g, feats);
    auto l = loc_bce_loss(g, m, target);
    g.backward(l);

    std::vector<std::pair<std::string, Tensor<double>*>> params;
    head.visit_params([&params](const std::string& n, Tensor<double>& t) { params.emplace_back(n, &t); });
    std::vector<Tensor<double>> analytic;
    for (auto& [n, p] : params) analytic.push_back(g.grad_of(*p));

    auto rep = testutil::check_gradients(loss_of, params, analytic, 1e-5, 1e-9, 32);
    INFO(rep.worst);
    CHECK(rep.max_rel_err < 1e-3);
}
