#include <doctest.h>

#include <cmath>
#include <memory>

#include "fd_check.hpp"
#include "tamperlab/core/autograd.hpp"
#include "tamperlab/core/rng.hpp"

using namespace tamperlab;

namespace {

Tensor<double> randn(std::vector<int> shape, Prng& rng, double s = 1.0) {
    Tensor<double> t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, s);
    return t;
}

}  // namespace

TEST_CASE("scalar op values") {
    Graph<double> g;
    auto x = g.constant(Tensor<double>({1, 3}, {0.0, 1.0, -1.0}));
    auto s = sigmoid(x);
    CHECK(s.val()[0] == doctest::Approx(0.5));
    CHECK(s.val()[1] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));

    auto sm = softmax_rows(g.constant(Tensor<double>({1, 3}, {1.0, 2.0, 3.0})));
    CHECK(sm.val()[0] + sm.val()[1] + sm.val()[2] == doctest::Approx(1.0));
    CHECK(sm.val()[2] > sm.val()[1]);

    // uniform 0.5 prediction has BCE ln 2 regardless of target
    auto p = g.constant(Tensor<double>({1, 4}, {0.5, 0.5, 0.5, 0.5}));
    auto l = bce_mean(p, Tensor<double>({1, 4}, {1.0, 0.0, 1.0, 0.0}));
    CHECK(l.val()[0] == doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("composite gradient matches finite differences") {
    Prng rng(7);
    Tensor<double> w1 = randn({6, 8}, rng, 0.5);
    Tensor<double> b1 = randn({8}, rng, 0.1);
    Tensor<double> w2 = randn({8, 4}, rng, 0.5);
    Tensor<double> gln = Tensor<double>::full({8}, 1.0);
    Tensor<double> bln = randn({8}, rng, 0.05);
    Tensor<double> x = randn({5, 6}, rng);
    Tensor<double> tgt({5 * 4, 1});
    for (std::int64_t i = 0; i < tgt.size(); ++i) tgt[i] = (i % 3 == 0) ? 1.0 : 0.0;
    auto plan = build_bilinear_plan(2, 2, 3, 3);  // exercise resize on a (4, c) map
    auto gmap = std::make_shared<const std::vector<std::int64_t>>(std::vector<std::int64_t>{
        3, 1, 0, 2, 7, 5, 4, 6, 11, 9, 8, 10, 15, 13, 12, 14, 19, 17, 16, 18});

    auto forward = [&](Graph<double>& g) {
        auto xv = g.constant(x);
        auto h = add_bias(matmul(xv, g.leaf(w1)), g.leaf(b1));      // (5,8)
        h = layer_norm(h, g.leaf(gln), g.leaf(bln));
        h = gelu(h);
        auto att = softmax_rows(scale(matmul(h, h, false, true), 0.3));  // (5,5)
        h = matmul(att, h);                                          // (5,8)
        h = gather_elems(h, gmap, {5, 4});                           // permute
        auto top = slice_rows(h, 0, 4);                              // (4,4)
        auto res = resize_rows(top, plan);                           // (9,4)
        auto both = concat_rows<double>({res, h});                   // (14,4)
        auto sq = mul(both, both);
        return slice_cols(add(both, sq), 0, 4);                      // (14,4)
    };
    auto loss_fn = [&]() {
        Graph<double> g;
        auto y = forward(g);
        auto z = matmul(y, g.leaf(w2), false, true);  // (14,8)
        auto p = sigmoid(reshape(slice_cols(z, 0, 4), {14 * 4, 1}));
        Tensor<double> t({14 * 4, 1});
        for (std::int64_t i = 0; i < t.size(); ++i) t[i] = (i % 2 == 0) ? 1.0 : 0.0;
        auto l = bce_mean(p, t);
        return l.val()[0];
    };

    Graph<double> g;
    auto y = forward(g);
    auto z = matmul(y, g.leaf(w2), false, true);
    auto p = sigmoid(reshape(slice_cols(z, 0, 4), {14 * 4, 1}));
    Tensor<double> t({14 * 4, 1});
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = (i % 2 == 0) ? 1.0 : 0.0;
    auto l = bce_mean(p, t);
    g.backward(l);

    std::vector<std::pair<std::string, Tensor<double>*>> params = {
        {"w1", &w1}, {"b1", &b1}, {"w2", &w2}, {"gln", &gln}, {"bln", &bln}};
    std::vector<Tensor<double>> analytic;
    for (auto& [name, pt] : params) analytic.push_back(g.grad_of(*pt));

    auto rep = testutil::check_gradients(loss_fn, params, analytic, 1e-6);
    INFO(rep.worst);
    CHECK(rep.max_rel_err < 1e-5);
}

TEST_CASE("matmul gradient, all transpose combinations") {
    Prng rng(21);
    for (bool ta : {false, true}) {
        for (bool tb : {false, true}) {
            Tensor<double> a = ta ? randn({3, 4}, rng) : randn({4, 3}, rng);
            Tensor<double> b = tb ? randn({5, 3}, rng) : randn({3, 5}, rng);
            auto loss_fn = [&]() {
                Graph<double> g;
                auto c = matmul(g.leaf(a), g.leaf(b), ta, tb);
                return mean_all(mul(c, c)).val()[0];
            };
            Graph<double> g;
            auto c = matmul(g.leaf(a), g.leaf(b), ta, tb);
            auto l = mean_all(mul(c, c));
            g.backward(l);
            std::vector<std::pair<std::string, Tensor<double>*>> params = {{"a", &a}, {"b", &b}};
            std::vector<Tensor<double>> analytic = {g.grad_of(a), g.grad_of(b)};
            auto rep = testutil::check_gradients(loss_fn, params, analytic, 1e-6);
            INFO("ta=", ta, " tb=", tb, " ", rep.worst);
            CHECK(rep.max_rel_err < 1e-6);
        }
    }
}

TEST_CASE("shared parameter accumulates both paths") {
    Tensor<double> w({2, 2}, {1.0, 2.0, 3.0, 4.0});
    Graph<double> g;
    auto wv1 = g.leaf(w);
    auto wv2 = g.leaf(w);  // same storage -> same node
    CHECK(wv1.node() == wv2.node());
    auto y = add(wv1, mul(wv2, wv2));  // y = w + w^2, dy/dw = 1 + 2w
    auto l = mean_all(y);
    g.backward(l);
    auto grad = g.grad_of(w);
    for (int i = 0; i < 4; ++i) CHECK(grad[i] == doctest::Approx((1.0 + 2.0 * w[i]) / 4.0));
}

TEST_CASE("gather_rows scatters gradient to source rows") {
    Tensor<double> a({3, 2}, {1, 2, 3, 4, 5, 6});
    Graph<double> g;
    auto idx = std::make_shared<const std::vector<int>>(std::vector<int>{2, 0, 2});
    auto out = gather_rows(g.leaf(a), idx);
    CHECK(out.val().at(0, 0) == 5);
    CHECK(out.val().at(1, 1) == 2);
    g.backward(mean_all(out));
    auto grad = g.grad_of(a);
    // row 2 appears twice, row 1 never
    CHECK(grad.at(2, 0) == doctest::Approx(2.0 / 6.0));
    CHECK(grad.at(0, 0) == doctest::Approx(1.0 / 6.0));
    CHECK(grad.at(1, 0) == 0.0);
}

TEST_CASE("bce clamp zeroes gradient outside the valid range") {
    Tensor<double> x({2, 1}, {1.0 - 1e-9, 0.3});
    Graph<double> g;
    auto xv = g.leaf(x);
    auto l = bce_mean(xv, Tensor<double>({2, 1}, {1.0, 1.0}));
    g.backward(l);
    auto grad = g.grad_of(x);
    CHECK(grad[0] == 0.0);  // clamped at 1 - eps
    CHECK(grad[1] == doctest::Approx(-1.0 / 0.3 / 2.0));
}

TEST_CASE("determinism: same graph twice gives identical values") {
    Prng rng(3);
    Tensor<double> w = randn({4, 4}, rng);
    Tensor<double> x = randn({4, 4}, rng);
    auto run = [&]() {
        Graph<double> g;
        auto y = gelu(matmul(g.leaf(w), g.constant(x)));
        g.backward(mean_all(y));
        return std::pair(y.val().clone(), g.grad_of(w));
    };
    auto [v1, g1] = run();
    auto [v2, g2] = run();
    for (std::int64_t i = 0; i < v1.size(); ++i) CHECK(v1[i] == v2[i]);
    for (std::int64_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == g2[i]);
}
