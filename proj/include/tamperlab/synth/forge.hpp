#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "tamperlab/core/errors.hpp"
#include "tamperlab/core/image.hpp"
#include "tamperlab/core/rng.hpp"
#include "tamperlab/synth/texture.hpp"

namespace tamperlab {

enum class ManipKind { splice, copy_move, removal };

inline const char* manip_kind_name(ManipKind k) {
    switch (k) {
        case ManipKind::splice: return "splice";
        case ManipKind::copy_move: return "copy_move";
        case ManipKind::removal: return "removal";
    }
    return "?";
}

inline ManipKind manip_kind_from(const std::string& s) {
    if (s == "splice") return ManipKind::splice;
    if (s == "copy_move") return ManipKind::copy_move;
    if (s == "removal") return ManipKind::removal;
    throw std::invalid_argument("unknown manipulation kind: " + s);
}

enum class RemovalMethod { mean_fill, diffusion_fill };

struct ForgerySample {
    RgbImage image;
    BinaryMask mask;
    ManipKind kind = ManipKind::splice;
    std::uint64_t seed = 0;
    std::string provenance;
};

struct CompositeOptions {
    bool feather = false;  // 1-pixel gaussian feather on the blend; mask stays hard
};

namespace detail_synth {

// 3x3 gaussian blur of the binary support, used as a soft alpha when
// feathering is enabled.
inline std::vector<float> feather_alpha(const BinaryMask& m) {
    static const float k[3] = {0.25f, 0.5f, 0.25f};
    std::vector<float> tmp(m.px.size()), out(m.px.size());
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) {
            float acc = 0.f;
            for (int d = -1; d <= 1; ++d) {
                int xx = std::clamp(x + d, 0, m.w - 1);
                acc += k[d + 1] * static_cast<float>(m.at(y, xx));
            }
            tmp[static_cast<std::size_t>(y) * m.w + x] = acc;
        }
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) {
            float acc = 0.f;
            for (int d = -1; d <= 1; ++d) {
                int yy = std::clamp(y + d, 0, m.h - 1);
                acc += k[d + 1] * tmp[static_cast<std::size_t>(yy) * m.w + x];
            }
            out[static_cast<std::size_t>(y) * m.w + x] = acc;
        }
    return out;
}

}  // namespace detail_synth

// Paste the donor instance into the host at the given offset. The output
// mask is exactly the transformed instance support.
inline ForgerySample splice(const RgbImage& donor, const BinaryMask& donor_instance,
                            const RgbImage& host, int off_y, int off_x, double scale_factor,
                            std::uint64_t seed, const CompositeOptions& opt = {}) {
    if (donor.h != donor_instance.h || donor.w != donor_instance.w)
        throw ShapeError("splice: donor and instance dims differ");
    if (donor_instance.empty_mask()) throw InvalidInstanceError("splice: instance covers 0 pixels");

    RgbImage d = donor;
    BinaryMask inst = donor_instance;
    if (scale_factor != 1.0) {
        const int nh = std::max(1, static_cast<int>(std::lround(donor.h * scale_factor)));
        const int nw = std::max(1, static_cast<int>(std::lround(donor.w * scale_factor)));
        d = resize_bilinear(donor, nh, nw);
        inst = resize_nearest(donor_instance, nh, nw);
        if (inst.empty_mask()) throw InvalidInstanceError("splice: instance vanished after scaling");
    }

    for (int y = 0; y < inst.h; ++y)
        for (int x = 0; x < inst.w; ++x)
            if (inst.at(y, x)) {
                const int ty = y + off_y, tx = x + off_x;
                if (ty < 0 || tx < 0 || ty >= host.h || tx >= host.w)
                    throw RejectedPlacementError("splice: placement leaves the host image");
            }

    ForgerySample out;
    out.image = host;
    out.mask = BinaryMask(host.h, host.w);
    out.kind = ManipKind::splice;
    out.seed = seed;
    if (!opt.feather) {
        for (int y = 0; y < inst.h; ++y)
            for (int x = 0; x < inst.w; ++x)
                if (inst.at(y, x)) {
                    const int ty = y + off_y, tx = x + off_x;
                    for (int c = 0; c < 3; ++c) out.image.at(ty, tx, c) = d.at(y, x, c);
                    out.mask.at(ty, tx) = 1;
                }
    } else {
        const auto alpha = detail_synth::feather_alpha(inst);
        for (int y = 0; y < inst.h; ++y)
            for (int x = 0; x < inst.w; ++x) {
                const float a = alpha[static_cast<std::size_t>(y) * inst.w + x];
                const int ty = y + off_y, tx = x + off_x;
                if (ty < 0 || tx < 0 || ty >= host.h || tx >= host.w) continue;
                if (a > 0.f)
                    for (int c = 0; c < 3; ++c)
                        out.image.at(ty, tx, c) =
                            clamp01(a * d.at(y, x, c) + (1.f - a) * host.at(ty, tx, c));
                if (inst.at(y, x)) out.mask.at(ty, tx) = 1;
            }
    }
    return out;
}

// Copy the instance region to a different location in the same image.
// Ground truth marks the destination (pasted) region only.
inline ForgerySample copy_move(const RgbImage& image, const BinaryMask& instance, int off_y,
                               int off_x, std::uint64_t seed, const CompositeOptions& opt = {}) {
    if (image.h != instance.h || image.w != instance.w)
        throw ShapeError("copy_move: image and instance dims differ");
    if (instance.empty_mask()) throw InvalidInstanceError("copy_move: instance covers 0 pixels");
    if (off_y == 0 && off_x == 0)
        throw DegenerateOffsetError("copy_move: zero offset coincides with the source region");

    for (int y = 0; y < instance.h; ++y)
        for (int x = 0; x < instance.w; ++x)
            if (instance.at(y, x)) {
                const int ty = y + off_y, tx = x + off_x;
                if (ty < 0 || tx < 0 || ty >= image.h || tx >= image.w)
                    throw RejectedPlacementError("copy_move: destination leaves the image");
            }

    ForgerySample out;
    out.image = image;  // source pixels are read from the unmodified input
    out.mask = BinaryMask(image.h, image.w);
    out.kind = ManipKind::copy_move;
    out.seed = seed;
    if (!opt.feather) {
        for (int y = 0; y < instance.h; ++y)
            for (int x = 0; x < instance.w; ++x)
                if (instance.at(y, x)) {
                    const int ty = y + off_y, tx = x + off_x;
                    for (int c = 0; c < 3; ++c) out.image.at(ty, tx, c) = image.at(y, x, c);
                    out.mask.at(ty, tx) = 1;
                }
    } else {
        const auto alpha = detail_synth::feather_alpha(instance);
        for (int y = 0; y < instance.h; ++y)
            for (int x = 0; x < instance.w; ++x) {
                const float a = alpha[static_cast<std::size_t>(y) * instance.w + x];
                const int ty = y + off_y, tx = x + off_x;
                if (ty < 0 || tx < 0 || ty >= image.h || tx >= image.w) continue;
                if (a > 0.f)
                    for (int c = 0; c < 3; ++c)
                        out.image.at(ty, tx, c) =
                            clamp01(a * image.at(y, x, c) + (1.f - a) * image.at(ty, tx, c));
                if (instance.at(y, x)) out.mask.at(ty, tx) = 1;
            }
    }
    return out;
}

// Replace the instance region with an inpainted fill. mean_fill iterates
// 8-neighbour Jacobi averaging to a 1e-4 tolerance; diffusion_fill runs
// exactly 200 4-neighbour Laplacian smoothing sweeps. Pixels outside the
// instance are bit-identical to the input.
inline ForgerySample remove(const RgbImage& image, const BinaryMask& instance,
                            RemovalMethod method, std::uint64_t seed) {
    if (image.h != instance.h || image.w != instance.w)
        throw ShapeError("remove: image and instance dims differ");
    if (instance.empty_mask()) throw InvalidInstanceError("remove: instance covers 0 pixels");
    if (instance.count() == instance.h * static_cast<std::int64_t>(instance.w))
        throw InvalidInstanceError("remove: instance covers the entire image");

    std::vector<std::pair<int, int>> hole;
    for (int y = 0; y < instance.h; ++y)
        for (int x = 0; x < instance.w; ++x)
            if (instance.at(y, x)) hole.emplace_back(y, x);

    ForgerySample out;
    out.image = image;
    out.mask = instance;
    out.kind = ManipKind::removal;
    out.seed = seed;

    // initialize the hole with the mean of authentic pixels
    float init[3] = {0.f, 0.f, 0.f};
    std::int64_t n_auth = 0;
    for (int y = 0; y < image.h; ++y)
        for (int x = 0; x < image.w; ++x)
            if (!instance.at(y, x)) {
                for (int c = 0; c < 3; ++c) init[c] += image.at(y, x, c);
                ++n_auth;
            }
    for (int c = 0; c < 3; ++c) init[c] /= static_cast<float>(n_auth);
    for (auto [y, x] : hole)
        for (int c = 0; c < 3; ++c) out.image.at(y, x, c) = init[c];

    const bool eight = method == RemovalMethod::mean_fill;
    const int max_iters = method == RemovalMethod::mean_fill ? 20000 : 200;
    const float tol = 1e-4f;
    std::vector<float> next(hole.size() * 3);
    for (int it = 0; it < max_iters; ++it) {
        float max_delta = 0.f;
        for (std::size_t i = 0; i < hole.size(); ++i) {
            const auto [y, x] = hole[i];
            float acc[3] = {0.f, 0.f, 0.f};
            int cnt = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dy == 0 && dx == 0) continue;
                    if (!eight && dy != 0 && dx != 0) continue;
                    const int yy = y + dy, xx = x + dx;
                    if (yy < 0 || xx < 0 || yy >= image.h || xx >= image.w) continue;
                    for (int c = 0; c < 3; ++c) acc[c] += out.image.at(yy, xx, c);
                    ++cnt;
                }
            for (int c = 0; c < 3; ++c) {
                const float v = acc[c] / static_cast<float>(cnt);
                next[i * 3 + c] = v;
                max_delta = std::max(max_delta, std::abs(v - out.image.at(y, x, c)));
            }
        }
        for (std::size_t i = 0; i < hole.size(); ++i) {
            const auto [y, x] = hole[i];
            for (int c = 0; c < 3; ++c) out.image.at(y, x, c) = next[i * 3 + c];
        }
        if (method == RemovalMethod::mean_fill && max_delta < tol) break;
    }
    return out;
}

// ------------- self-contained sample factory -------------

struct SynthConfig {
    int width = 64, height = 64;
    int count_splice = 0, count_copy_move = 0, count_removal = 0;
    double min_fraction = 0.01, max_fraction = 0.5;     // accepted mask fraction bounds
    double target_min_fraction = 0.05, target_max_fraction = 0.30;  // instance sampling aims here
    int max_attempts = 20;
    bool feather = false;
    RemovalMethod removal_method = RemovalMethod::mean_fill;
    std::string split = "train";

    int total() const { return count_splice + count_copy_move + count_removal; }
};

// One procedural forgery; sub-streams are derived from the sample seed so the
// result is a pure function of (kind, config, seed). Returns nothing when
// max_attempts samples all fall outside the fraction bounds.
inline std::optional<ForgerySample> make_sample(ManipKind kind, const SynthConfig& cfg,
                                                std::uint64_t seed) {
    CompositeOptions copt{cfg.feather};
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        const std::uint64_t s = mix_seed(seed, static_cast<std::uint64_t>(attempt));
        Prng rng(mix_seed(s, 1));
        const double frac = rng.uniform(cfg.target_min_fraction, cfg.target_max_fraction);
        try {
            ForgerySample sample;
            switch (kind) {
                case ManipKind::splice: {
                    Prng trng(mix_seed(s, 2));
                    RgbImage donor = make_texture(cfg.height, cfg.width, trng);
                    RgbImage host = make_texture(cfg.height, cfg.width, trng);
                    BinaryMask inst = make_instance_mask(cfg.height, cfg.width, frac, rng);
                    const double sc = rng.uniform(0.75, 1.25);
                    // bounding box of the scaled support picks the placement range
                    const int nh = std::max(1, static_cast<int>(std::lround(cfg.height * sc)));
                    const int nw = std::max(1, static_cast<int>(std::lround(cfg.width * sc)));
                    BinaryMask scaled = resize_nearest(inst, nh, nw);
                    int y0 = nh, y1 = -1, x0 = nw, x1 = -1;
                    for (int y = 0; y < nh; ++y)
                        for (int x = 0; x < nw; ++x)
                            if (scaled.at(y, x)) {
                                y0 = std::min(y0, y);
                                y1 = std::max(y1, y);
                                x0 = std::min(x0, x);
                                x1 = std::max(x1, x);
                            }
                    if (y1 < 0) continue;
                    const int oy = -y0 + static_cast<int>(rng.uniform_int(
                                             static_cast<std::uint64_t>(cfg.height - (y1 - y0))));
                    const int ox = -x0 + static_cast<int>(rng.uniform_int(
                                             static_cast<std::uint64_t>(cfg.width - (x1 - x0))));
                    sample = splice(donor, inst, host, oy, ox, sc, seed, copt);
                    sample.provenance = "procedural";
                    break;
                }
                case ManipKind::copy_move: {
                    Prng trng(mix_seed(s, 2));
                    RgbImage img = make_texture(cfg.height, cfg.width, trng);
                    BinaryMask inst = make_instance_mask(cfg.height, cfg.width, frac, rng);
                    int y0 = cfg.height, y1 = -1, x0 = cfg.width, x1 = -1;
                    for (int y = 0; y < cfg.height; ++y)
                        for (int x = 0; x < cfg.width; ++x)
                            if (inst.at(y, x)) {
                                y0 = std::min(y0, y);
                                y1 = std::max(y1, y);
                                x0 = std::min(x0, x);
                                x1 = std::max(x1, x);
                            }
                    const int ry = cfg.height - (y1 - y0);
                    const int rx = cfg.width - (x1 - x0);
                    int oy = 0, ox = 0;
                    const int min_shift = std::max({4, (y1 - y0 + x1 - x0) / 3, cfg.height / 4});
                    for (int tries = 0; tries < 50 && oy + ox == 0; ++tries) {
                        oy = -y0 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(ry)));
                        ox = -x0 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(rx)));
                        // ask for a clearly visible displacement
                        if (std::abs(oy) + std::abs(ox) < min_shift) {
                            oy = 0;
                            ox = 0;
                        }
                    }
                    if (oy == 0 && ox == 0) continue;
                    sample = copy_move(img, inst, oy, ox, seed, copt);
                    sample.provenance = "procedural";
                    break;
                }
                case ManipKind::removal: {
                    Prng trng(mix_seed(s, 2));
                    RgbImage img = make_texture(cfg.height, cfg.width, trng);
                    BinaryMask inst = make_instance_mask(cfg.height, cfg.width, frac, rng);
                    sample = remove(img, inst, cfg.removal_method, seed);
                    sample.provenance = "procedural";
                    break;
                }
            }
            const double f = sample.mask.fraction();
            if (f >= cfg.min_fraction && f <= cfg.max_fraction) return sample;
        } catch (const InvalidInstanceError&) {
        } catch (const RejectedPlacementError&) {
        } catch (const DegenerateOffsetError&) {
        }
    }
    return std::nullopt;
}

}  // namespace tamperlab
