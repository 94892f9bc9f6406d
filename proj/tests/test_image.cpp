#include <doctest.h>

#include "tamperlab/core/image.hpp"
#include "tamperlab/core/rng.hpp"

using namespace tamperlab;

TEST_CASE("bilinear resize of a constant image is constant") {
    RgbImage img(8, 8, 0.37f);
    RgbImage up = resize_bilinear(img, 19, 13);
    CHECK(up.h == 19);
    CHECK(up.w == 13);
    for (float v : up.px) CHECK(v == doctest::Approx(0.37f).epsilon(1e-6));
}

TEST_CASE("resize to same size is the identity") {
    Prng rng(5);
    RgbImage img(6, 7);
    for (auto& v : img.px) v = static_cast<float>(rng.uniform());
    RgbImage same = resize_bilinear(img, 6, 7);
    CHECK(same.px == img.px);
}

TEST_CASE("bilinear plan weights are convex") {
    auto plan = build_bilinear_plan(5, 9, 16, 16);
    for (int i = 0; i < 16 * 16; ++i) {
        double sum = 0;
        for (int k = 0; k < 4; ++k) {
            const double w = plan->coeff[static_cast<std::size_t>(i) * 4 + k];
            CHECK(w >= 0.0);
            sum += w;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("nearest mask resize stays binary and keeps support") {
    BinaryMask m(4, 4);
    m.at(1, 1) = m.at(1, 2) = m.at(2, 1) = m.at(2, 2) = 1;
    BinaryMask up = resize_nearest(m, 8, 8);
    for (auto v : up.px) CHECK((v == 0 || v == 1));
    CHECK(up.count() == 16);  // center 2x2 becomes 4x4
    CHECK(up.at(3, 3) == 1);
    CHECK(up.at(0, 0) == 0);
}

TEST_CASE("horizontal flip is an involution") {
    Prng rng(8);
    RgbImage img(5, 6);
    for (auto& v : img.px) v = static_cast<float>(rng.uniform());
    CHECK(flip_horizontal(flip_horizontal(img)).px == img.px);
    CHECK(flip_horizontal(img).at(0, 0, 0) == img.at(0, 5, 0));
}

TEST_CASE("crop bounds are enforced") {
    RgbImage img(8, 8);
    CHECK_THROWS_AS(crop(img, 4, 4, 5, 5), ShapeError);
    RgbImage c = crop(img, 2, 3, 4, 5);
    CHECK(c.h == 4);
    CHECK(c.w == 5);
}

TEST_CASE("soft mask threshold and max") {
    SoftMask m(2, 2);
    m.at(0, 0) = 0.6f;
    m.at(1, 1) = 0.4f;
    auto b = m.threshold(0.5f);
    CHECK(b.at(0, 0) == 1);
    CHECK(b.at(1, 1) == 0);
    CHECK(m.max_value() == doctest::Approx(0.6f));
}
