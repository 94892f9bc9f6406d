#include <doctest.h>

#include "tamperlab/core/rng.hpp"
#include "tamperlab/eval/distort.hpp"

using namespace tamperlab;

namespace {

RgbImage random_image(int h, int w, std::uint64_t seed) {
    Prng rng(seed);
    RgbImage img(h, w);
    for (auto& v : img.px) v = static_cast<float>(rng.uniform());
    return img;
}

}  // namespace

TEST_CASE("zero-sigma noise is the exact identity") {
    RgbImage img = random_image(16, 16, 1);
    RgbImage out = distort(img, {DistortKind::gaussian_noise, 0}, 7);
    CHECK(out.px == img.px);
}

TEST_CASE("noise is seeded and deterministic") {
    RgbImage img = random_image(16, 16, 2);
    RgbImage a = distort(img, {DistortKind::gaussian_noise, 5}, 7);
    RgbImage b = distort(img, {DistortKind::gaussian_noise, 5}, 7);
    RgbImage c = distort(img, {DistortKind::gaussian_noise, 5}, 8);
    CHECK(a.px == b.px);
    CHECK(a.px != c.px);
    for (float v : a.px) {
        CHECK(v >= 0.f);
        CHECK(v <= 1.f);
    }
}

TEST_CASE("blur of a constant image is the same constant") {
    RgbImage img(12, 12, 0.63f);
    for (int k : {3, 5}) {
        RgbImage out = distort(img, {DistortKind::gaussian_blur, static_cast<double>(k)}, 0);
        for (float v : out.px) CHECK(v == doctest::Approx(0.63f).epsilon(1e-6));
    }
}

TEST_CASE("blur smooths a step edge and keeps range") {
    RgbImage img(8, 8, 0.f);
    for (int y = 0; y < 8; ++y)
        for (int x = 4; x < 8; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = 1.f;
    RgbImage out = gaussian_blur(img, 3);
    CHECK(out.at(0, 3, 0) > 0.f);   // bled left
    CHECK(out.at(0, 4, 0) < 1.f);   // bled right
    CHECK(out.at(0, 0, 0) == doctest::Approx(0.f).epsilon(1e-6));
    CHECK(out.at(0, 7, 0) == doctest::Approx(1.f).epsilon(1e-6));
}

TEST_CASE("jpeg at quality 100 keeps a mid-gray image within 2/255") {
    RgbImage img(32, 32, 0.5f);
    RgbImage out = distort(img, {DistortKind::jpeg, 100}, 0);
    float max_dev = 0.f;
    for (std::size_t i = 0; i < img.px.size(); ++i)
        max_dev = std::max(max_dev, std::abs(out.px[i] - img.px[i]));
    CHECK(max_dev <= 2.f / 255.f);
}

TEST_CASE("jpeg at quality 50 degrades but stays in range and shape") {
    RgbImage img = random_image(32, 32, 3);
    RgbImage out = distort(img, {DistortKind::jpeg, 50}, 0);
    CHECK(out.h == 32);
    CHECK(out.w == 32);
    for (float v : out.px) {
        CHECK(v >= 0.f);
        CHECK(v <= 1.f);
    }
    CHECK(out.px != img.px);
}

TEST_CASE("unsupported parameters are rejected") {
    RgbImage img = random_image(8, 8, 4);
    CHECK_THROWS(distort(img, {DistortKind::gaussian_blur, 4}, 0));   // even kernel
    CHECK_THROWS(distort(img, {DistortKind::gaussian_blur, -3}, 0));
    CHECK_THROWS(distort(img, {DistortKind::gaussian_noise, -1}, 0));
    CHECK_THROWS(distort(img, {DistortKind::jpeg, 0}, 0));
    CHECK_THROWS(distort(img, {DistortKind::jpeg, 101}, 0));
}

TEST_CASE("the robustness table has its six settings") {
    auto s = robustness_settings();
    REQUIRE(s.size() == 6);
    CHECK(s[0].kind == DistortKind::gaussian_blur);
    CHECK(s[5].param == 100);
}
