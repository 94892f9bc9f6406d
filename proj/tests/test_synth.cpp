#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "tamperlab/synth/dataset.hpp"
#include "tamperlab/synth/forge.hpp"

using namespace tamperlab;
namespace fs = std::filesystem;

namespace {

RgbImage constant_image(int h, int w, float v) { return RgbImage(h, w, v); }

std::vector<char> slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::vector<char>((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("splice: empty instance rejected") {
    RgbImage donor = constant_image(4, 4, 0.9f);
    BinaryMask inst(4, 4);  // all zero
    RgbImage host = constant_image(4, 4, 0.2f);
    CHECK_THROWS_AS(splice(donor, inst, host, 0, 0, 1.0, 1), InvalidInstanceError);
}

TEST_CASE("splice: self-composite with identity placement is a pixel no-op") {
    Prng rng(3);
    RgbImage img(8, 8);
    for (auto& v : img.px) v = static_cast<float>(rng.uniform());
    BinaryMask inst(8, 8);
    for (int y = 2; y < 6; ++y)
        for (int x = 2; x < 5; ++x) inst.at(y, x) = 1;
    auto s = splice(img, inst, img, 0, 0, 1.0, 7);
    CHECK(s.image.px == img.px);
    CHECK(s.mask.px == inst.px);
}

TEST_CASE("splice: hand-computed 2x2 paste into 4x4 host") {
    RgbImage donor = constant_image(2, 2, 0.9f);
    BinaryMask inst(2, 2, 1);
    RgbImage host = constant_image(4, 4, 0.2f);
    auto s = splice(donor, inst, host, 1, 1, 1.0, 5);
    int nines = 0;
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            const bool inside = y >= 1 && y <= 2 && x >= 1 && x <= 2;
            CHECK(s.image.at(y, x, 0) == doctest::Approx(inside ? 0.9f : 0.2f));
            CHECK(s.mask.at(y, x) == (inside ? 1 : 0));
            if (s.image.at(y, x, 0) > 0.5f) ++nines;
        }
    CHECK(nines == 4);
    CHECK(s.mask.count() == 4);
}

TEST_CASE("splice: placement outside the host is rejected") {
    RgbImage donor = constant_image(2, 2, 0.9f);
    BinaryMask inst(2, 2, 1);
    RgbImage host = constant_image(4, 4, 0.2f);
    CHECK_THROWS_AS(splice(donor, inst, host, 3, 3, 1.0, 5), RejectedPlacementError);
    CHECK_THROWS_AS(splice(donor, inst, host, -1, 0, 1.0, 5), RejectedPlacementError);
}

TEST_CASE("copy_move: hand-computed 2x2 block copy") {
    Prng rng(11);
    RgbImage img(8, 8);
    for (auto& v : img.px) v = static_cast<float>(rng.uniform());
    BinaryMask inst(8, 8);
    inst.at(0, 0) = inst.at(0, 1) = inst.at(1, 0) = inst.at(1, 1) = 1;
    auto s = copy_move(img, inst, 4, 4, 9);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x)
            for (int c = 0; c < 3; ++c)
                CHECK(s.image.at(4 + y, 4 + x, c) == img.at(y, x, c));
    CHECK(s.mask.count() == 4);
    CHECK(s.mask.at(4, 4) == 1);
    CHECK(s.mask.at(5, 5) == 1);
    CHECK(s.mask.at(0, 0) == 0);  // destination only
}

TEST_CASE("copy_move: degenerate and out-of-bounds offsets") {
    RgbImage img = constant_image(8, 8, 0.5f);
    BinaryMask inst(8, 8);
    inst.at(7, 7) = 1;
    CHECK_THROWS_AS(copy_move(img, inst, 0, 0, 1), DegenerateOffsetError);
    CHECK_THROWS_AS(copy_move(img, inst, 1, 0, 1), RejectedPlacementError);
}

TEST_CASE("remove: single pixel mean_fill equals its 8-neighbour mean") {
    Prng rng(13);
    RgbImage img(5, 5);
    for (auto& v : img.px) v = static_cast<float>(rng.uniform());
    BinaryMask inst(5, 5);
    inst.at(2, 2) = 1;
    auto s = remove(img, inst, RemovalMethod::mean_fill, 3);
    for (int c = 0; c < 3; ++c) {
        double mean = 0;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
                if (dy || dx) mean += img.at(2 + dy, 2 + dx, c);
        mean /= 8.0;
        CHECK(s.image.at(2, 2, c) == doctest::Approx(mean).epsilon(1e-5));
    }
}

TEST_CASE("remove: pixels outside the instance are bit-identical") {
    Prng rng(17);
    RgbImage img(16, 16);
    for (auto& v : img.px) v = static_cast<float>(rng.uniform());
    BinaryMask inst(16, 16);
    for (int y = 5; y < 10; ++y)
        for (int x = 4; x < 12; ++x) inst.at(y, x) = 1;
    for (auto method : {RemovalMethod::mean_fill, RemovalMethod::diffusion_fill}) {
        auto s = remove(img, inst, method, 3);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x)
                if (!inst.at(y, x))
                    for (int c = 0; c < 3; ++c) CHECK(s.image.at(y, x, c) == img.at(y, x, c));
        CHECK(s.mask.px == inst.px);
    }
}

TEST_CASE("remove: full-image instance rejected") {
    RgbImage img = constant_image(4, 4, 0.5f);
    BinaryMask inst(4, 4, 1);
    CHECK_THROWS_AS(remove(img, inst, RemovalMethod::mean_fill, 1), InvalidInstanceError);
    BinaryMask empty(4, 4);
    CHECK_THROWS_AS(remove(img, empty, RemovalMethod::mean_fill, 1), InvalidInstanceError);
}

TEST_CASE("generate_samples: counts, bounds, determinism") {
    SynthConfig cfg;
    cfg.count_splice = 4;
    cfg.count_copy_move = 4;
    cfg.count_removal = 4;
    cfg.width = cfg.height = 32;

    auto a = generate_samples(cfg, 99);
    auto b = generate_samples(cfg, 99);
    REQUIRE(a.size() == 12);
    int counts[3] = {0, 0, 0};
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++counts[static_cast<int>(a[i].kind)];
        CHECK(a[i].image.px == b[i].image.px);
        CHECK(a[i].mask.px == b[i].mask.px);
        const double f = a[i].mask.fraction();
        CHECK(f >= cfg.min_fraction);
        CHECK(f <= cfg.max_fraction);
        CHECK(a[i].mask.count() >= 1);
    }
    CHECK(counts[0] == 4);
    CHECK(counts[1] == 4);
    CHECK(counts[2] == 4);

    auto c = generate_samples(cfg, 100);
    bool differs = false;
    for (std::size_t i = 0; i < a.size() && !differs; ++i) differs = a[i].image.px != c[i].image.px;
    CHECK(differs);
}

TEST_CASE("generate_samples: zero count gives an empty set") {
    SynthConfig cfg;
    CHECK(generate_samples(cfg, 1).empty());
}

TEST_CASE("generate_dataset: deterministic byte-identical trees") {
    SynthConfig cfg;
    cfg.count_splice = 2;
    cfg.count_copy_move = 1;
    cfg.count_removal = 1;
    cfg.width = cfg.height = 32;
    const fs::path root = fs::temp_directory_path() / "tamperlab_test_synth";
    fs::remove_all(root);
    auto m1 = generate_dataset(cfg, 42, root / "a");
    auto m2 = generate_dataset(cfg, 42, root / "b");
    REQUIRE(m1.entries.size() == 4);
    REQUIRE(m2.entries.size() == 4);
    for (const auto& e : m1.entries) {
        CHECK(slurp(root / "a" / "images" / (e.id + ".png")) ==
              slurp(root / "b" / "images" / (e.id + ".png")));
        CHECK(slurp(root / "a" / "masks" / (e.id + ".png")) ==
              slurp(root / "b" / "masks" / (e.id + ".png")));
    }
    CHECK(slurp(root / "a" / "manifest.jsonl") == slurp(root / "b" / "manifest.jsonl"));

    auto loaded = load_dataset(root / "a");
    REQUIRE(loaded.size() == 4);
    CHECK(loaded[0].image.h == 32);
    auto manifest = read_manifest(root / "a");
    CHECK(manifest.entries.size() == 4);
    CHECK(manifest.entries[0].kind == ManipKind::splice);
    fs::remove_all(root);
}

TEST_CASE("empty explicit pool is an error") {
    SynthConfig cfg;
    cfg.count_splice = 1;
    std::vector<PoolEntry> pool;
    CHECK_THROWS_AS(generate_samples(cfg, 1, &pool), ExhaustedPoolError);
}
