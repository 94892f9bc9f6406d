#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "tamperlab/core/autograd.hpp"  // BilinearPlan
#include "tamperlab/core/errors.hpp"

namespace tamperlab {

// RGB image, values in [0,1], row-major HWC.
struct RgbImage {
    int h = 0, w = 0;
    std::vector<float> px;  // h*w*3

    RgbImage() = default;
    RgbImage(int height, int width, float fill = 0.f)
        : h(height), w(width), px(static_cast<std::size_t>(height) * width * 3, fill) {}

    float& at(int y, int x, int c) { return px[(static_cast<std::size_t>(y) * w + x) * 3 + c]; }
    float at(int y, int x, int c) const { return px[(static_cast<std::size_t>(y) * w + x) * 3 + c]; }
    std::int64_t pixels() const { return static_cast<std::int64_t>(h) * w; }
};

// Binary mask, 1 = manipulated.
struct BinaryMask {
    int h = 0, w = 0;
    std::vector<std::uint8_t> px;  // h*w, values {0,1}

    BinaryMask() = default;
    BinaryMask(int height, int width, std::uint8_t fill = 0)
        : h(height), w(width), px(static_cast<std::size_t>(height) * width, fill) {}

    std::uint8_t& at(int y, int x) { return px[static_cast<std::size_t>(y) * w + x]; }
    std::uint8_t at(int y, int x) const { return px[static_cast<std::size_t>(y) * w + x]; }

    std::int64_t count() const {
        std::int64_t n = 0;
        for (auto v : px) n += v;
        return n;
    }
    double fraction() const {
        return px.empty() ? 0.0 : static_cast<double>(count()) / static_cast<double>(px.size());
    }
    bool empty_mask() const { return count() == 0; }
};

// Per-pixel manipulation probability in [0,1].
struct SoftMask {
    int h = 0, w = 0;
    std::vector<float> p;  // h*w

    SoftMask() = default;
    SoftMask(int height, int width, float fill = 0.f)
        : h(height), w(width), p(static_cast<std::size_t>(height) * width, fill) {}

    float& at(int y, int x) { return p[static_cast<std::size_t>(y) * w + x]; }
    float at(int y, int x) const { return p[static_cast<std::size_t>(y) * w + x]; }

    BinaryMask threshold(float t = 0.5f) const {
        BinaryMask m(h, w);
        for (std::size_t i = 0; i < p.size(); ++i) m.px[i] = p[i] > t ? 1 : 0;
        return m;
    }
    float max_value() const {
        float mx = 0.f;
        for (float v : p) mx = std::max(mx, v);
        return mx;
    }
};

inline RgbImage resize_bilinear(const RgbImage& img, int h_out, int w_out) {
    if (img.h == h_out && img.w == w_out) return img;
    auto plan = build_bilinear_plan(img.h, img.w, h_out, w_out);
    RgbImage out(h_out, w_out);
    const int n_out = h_out * w_out;
    for (int i = 0; i < n_out; ++i) {
        float acc[3] = {0.f, 0.f, 0.f};
        for (int k = 0; k < 4; ++k) {
            const float cw = static_cast<float>(plan->coeff[static_cast<std::size_t>(i) * 4 + k]);
            if (cw == 0.f) continue;
            const std::size_t src = static_cast<std::size_t>(plan->idx[static_cast<std::size_t>(i) * 4 + k]) * 3;
            for (int c = 0; c < 3; ++c) acc[c] += cw * img.px[src + c];
        }
        for (int c = 0; c < 3; ++c) out.px[static_cast<std::size_t>(i) * 3 + c] = acc[c];
    }
    return out;
}

// Nearest-neighbour resize; keeps masks strictly binary.
inline BinaryMask resize_nearest(const BinaryMask& m, int h_out, int w_out) {
    if (m.h == h_out && m.w == w_out) return m;
    BinaryMask out(h_out, w_out);
    for (int y = 0; y < h_out; ++y) {
        int sy = std::min(m.h - 1, static_cast<int>((y + 0.5) * m.h / h_out));
        for (int x = 0; x < w_out; ++x) {
            int sx = std::min(m.w - 1, static_cast<int>((x + 0.5) * m.w / w_out));
            out.at(y, x) = m.at(sy, sx);
        }
    }
    return out;
}

inline SoftMask resize_soft(const SoftMask& m, int h_out, int w_out) {
    if (m.h == h_out && m.w == w_out) return m;
    auto plan = build_bilinear_plan(m.h, m.w, h_out, w_out);
    SoftMask out(h_out, w_out);
    for (int i = 0; i < h_out * w_out; ++i) {
        float acc = 0.f;
        for (int k = 0; k < 4; ++k)
            acc += static_cast<float>(plan->coeff[static_cast<std::size_t>(i) * 4 + k]) *
                   m.p[static_cast<std::size_t>(plan->idx[static_cast<std::size_t>(i) * 4 + k])];
        out.p[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

inline RgbImage flip_horizontal(const RgbImage& img) {
    RgbImage out(img.h, img.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.w - 1 - x, c);
    return out;
}

inline BinaryMask flip_horizontal(const BinaryMask& m) {
    BinaryMask out(m.h, m.w);
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) out.at(y, x) = m.at(y, m.w - 1 - x);
    return out;
}

inline RgbImage crop(const RgbImage& img, int y0, int x0, int ch, int cw) {
    if (y0 < 0 || x0 < 0 || y0 + ch > img.h || x0 + cw > img.w)
        throw ShapeError("crop: window out of bounds");
    RgbImage out(ch, cw);
    for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
    return out;
}

inline BinaryMask crop(const BinaryMask& m, int y0, int x0, int ch, int cw) {
    if (y0 < 0 || x0 < 0 || y0 + ch > m.h || x0 + cw > m.w)
        throw ShapeError("crop: window out of bounds");
    BinaryMask out(ch, cw);
    for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x) out.at(y, x) = m.at(y0 + y, x0 + x);
    return out;
}

inline float clamp01(float v) { return v < 0.f ? 0.f : (v > 1.f ? 1.f : v); }

// Image as a (h*w, 3) tensor for the encoder.
template <typename T>
Tensor<T> image_to_tensor(const RgbImage& img) {
    Tensor<T> t({img.h * img.w, 3});
    for (std::size_t i = 0; i < img.px.size(); ++i) t[static_cast<std::int64_t>(i)] = static_cast<T>(img.px[i]);
    return t;
}

template <typename T>
SoftMask tensor_to_softmask(const Tensor<T>& t, int h, int w) {
    SoftMask m(h, w);
    for (std::int64_t i = 0; i < t.size(); ++i)
        m.p[static_cast<std::size_t>(i)] = clamp01(static_cast<float>(t[i]));
    return m;
}

template <typename T>
Tensor<T> mask_to_tensor(const BinaryMask& m) {
    Tensor<T> t({m.h * m.w, 1});
    for (std::size_t i = 0; i < m.px.size(); ++i) t[static_cast<std::int64_t>(i)] = static_cast<T>(m.px[i]);
    return t;
}

}  // namespace tamperlab
