#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "tamperlab/core/image.hpp"
#include "tamperlab/core/rng.hpp"

namespace tamperlab {

// Procedural texture images: a directional two-color gradient, a few octaves
// of bilinear value noise, and occasional sinusoidal stripes. Smooth enough
// that composite boundaries carry signal, varied enough that no two sources
// look alike.
inline RgbImage make_texture(int h, int w, Prng& rng) {
    RgbImage img(h, w);

    float ca[3], cb[3];
    for (int c = 0; c < 3; ++c) {
        ca[c] = static_cast<float>(rng.uniform(0.15, 0.85));
        cb[c] = static_cast<float>(rng.uniform(0.15, 0.85));
    }
    const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double gx = std::cos(ang), gy = std::sin(ang);

    // octaves of value noise, coarse to fine
    struct Octave {
        int gh, gw;
        float amp;
        std::vector<float> grid;  // gh*gw per channel-agnostic field
    };
    std::vector<Octave> octaves;
    int g = 3;
    float amp = 0.28f;
    for (int o = 0; o < 4; ++o) {
        Octave oc;
        oc.gh = g;
        oc.gw = g;
        oc.amp = amp;
        oc.grid.resize(static_cast<std::size_t>(g) * g);
        for (auto& v : oc.grid) v = static_cast<float>(rng.uniform(-1.0, 1.0));
        octaves.push_back(std::move(oc));
        g = g * 2 + 1;
        amp *= 0.6f;  // keep the finest octave strong; infill smoothing must stand out
    }

    const bool stripes = rng.bernoulli(0.35);
    const double sfreq = rng.uniform(2.0, 7.0) * 2.0 * std::numbers::pi;
    const double sang = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double sphase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const float samp = static_cast<float>(rng.uniform(0.04, 0.12));

    auto sample_octave = [](const Octave& oc, double u, double v) {
        const double x = u * (oc.gw - 1), y = v * (oc.gh - 1);
        const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
        const int x1 = std::min(x0 + 1, oc.gw - 1), y1 = std::min(y0 + 1, oc.gh - 1);
        const double fx = x - x0, fy = y - y0;
        const auto at = [&oc](int yy, int xx) {
            return oc.grid[static_cast<std::size_t>(yy) * oc.gw + xx];
        };
        return static_cast<float>((1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) +
                                  fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1)));
    };

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double u = (x + 0.5) / w, v = (y + 0.5) / h;
            const float t = static_cast<float>(0.5 + 0.5 * (gx * (u - 0.5) + gy * (v - 0.5)) * 2.0);
            float n = 0.f;
            for (const auto& oc : octaves) n += oc.amp * sample_octave(oc, u, v);
            if (stripes)
                n += samp * static_cast<float>(
                                std::sin(sfreq * (u * std::cos(sang) + v * std::sin(sang)) + sphase));
            for (int c = 0; c < 3; ++c)
                img.at(y, x, c) = clamp01(ca[c] * (1.f - t) + cb[c] * t + n);
        }
    }
    return img;
}

// Star-convex blob mask: an ellipse whose radius is perturbed by a few
// low-frequency sinusoids. target_frac is the approximate area fraction.
// The support is kept strictly inside the image.
inline BinaryMask make_instance_mask(int h, int w, double target_frac, Prng& rng) {
    BinaryMask m(h, w);
    const double area = target_frac * h * w;
    const double aspect = rng.uniform(0.6, 1.6);
    double rx = std::sqrt(area / std::numbers::pi * aspect);
    double ry = std::sqrt(area / std::numbers::pi / aspect);
    rx = std::min(rx, w * 0.45);
    ry = std::min(ry, h * 0.45);
    const double cx = rng.uniform(rx + 1, w - rx - 1);
    const double cy = rng.uniform(ry + 1, h - ry - 1);
    const double rot = rng.uniform(0.0, 2.0 * std::numbers::pi);

    double wob_a[3], wob_p[3];
    for (int k = 0; k < 3; ++k) {
        wob_a[k] = rng.uniform(0.0, 0.18 / (k + 1));
        wob_p[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    const double cr = std::cos(rot), sr = std::sin(rot);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            const double ex = (dx * cr + dy * sr) / rx;
            const double ey = (-dx * sr + dy * cr) / ry;
            const double rad = std::sqrt(ex * ex + ey * ey);
            const double theta = std::atan2(ey, ex);
            double lim = 1.0;
            for (int k = 0; k < 3; ++k) lim += wob_a[k] * std::sin((k + 2) * theta + wob_p[k]);
            if (rad <= lim) m.at(y, x) = 1;
        }
    }
    return m;
}

}  // namespace tamperlab
