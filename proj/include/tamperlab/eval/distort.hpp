#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "tamperlab/core/image.hpp"
#include "tamperlab/core/rng.hpp"
#include "tamperlab/io/image_io.hpp"

namespace tamperlab {

enum class DistortKind { gaussian_blur, gaussian_noise, jpeg };

struct Distortion {
    DistortKind kind = DistortKind::gaussian_noise;
    double param = 0.0;  // blur: odd kernel size; noise: sigma on 0-255 scale; jpeg: quality
};

inline std::string distortion_name(const Distortion& d) {
    switch (d.kind) {
        case DistortKind::gaussian_blur: return "blur_k" + std::to_string(static_cast<int>(d.param));
        case DistortKind::gaussian_noise:
            return "noise_s" + std::to_string(static_cast<int>(d.param));
        case DistortKind::jpeg: return "jpeg_q" + std::to_string(static_cast<int>(d.param));
    }
    return "?";
}

// The six robustness-table settings.
inline std::vector<Distortion> robustness_settings() {
    return {{DistortKind::gaussian_blur, 3},  {DistortKind::gaussian_blur, 5},
            {DistortKind::gaussian_noise, 3}, {DistortKind::gaussian_noise, 5},
            {DistortKind::jpeg, 50},          {DistortKind::jpeg, 100}};
}

namespace detail_distort {

// Normalized gaussian kernel; sigma follows the usual kernel-size heuristic.
inline std::vector<float> gaussian_kernel(int k) {
    const double sigma = 0.3 * ((k - 1) * 0.5 - 1.0) + 0.8;
    std::vector<float> ker(static_cast<std::size_t>(k));
    double sum = 0;
    const int c = k / 2;
    for (int i = 0; i < k; ++i) {
        const double d = i - c;
        ker[static_cast<std::size_t>(i)] = static_cast<float>(std::exp(-d * d / (2 * sigma * sigma)));
        sum += ker[static_cast<std::size_t>(i)];
    }
    for (auto& v : ker) v = static_cast<float>(v / sum);
    return ker;
}

inline int reflect101(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * (n - 1) - i;
    }
    return i;
}

}  // namespace detail_distort

inline RgbImage gaussian_blur(const RgbImage& img, int k) {
    if (k < 1 || k % 2 == 0) throw std::invalid_argument("gaussian_blur: kernel size must be odd");
    if (k == 1) return img;
    const auto ker = detail_distort::gaussian_kernel(k);
    const int c = k / 2;
    RgbImage tmp(img.h, img.w), out(img.h, img.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int ch = 0; ch < 3; ++ch) {
                float acc = 0.f;
                for (int d = -c; d <= c; ++d)
                    acc += ker[static_cast<std::size_t>(d + c)] *
                           img.at(y, detail_distort::reflect101(x + d, img.w), ch);
                tmp.at(y, x, ch) = acc;
            }
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int ch = 0; ch < 3; ++ch) {
                float acc = 0.f;
                for (int d = -c; d <= c; ++d)
                    acc += ker[static_cast<std::size_t>(d + c)] *
                           tmp.at(detail_distort::reflect101(y + d, img.h), x, ch);
                out.at(y, x, ch) = clamp01(acc);
            }
    return out;
}

inline RgbImage gaussian_noise(const RgbImage& img, double sigma_255, std::uint64_t seed) {
    if (sigma_255 < 0) throw std::invalid_argument("gaussian_noise: sigma must be >= 0");
    if (sigma_255 == 0) return img;  // exact identity
    RgbImage out = img;
    Prng rng(seed);
    const float s = static_cast<float>(sigma_255 / 255.0);
    for (auto& v : out.px) v = clamp01(v + s * static_cast<float>(rng.normal()));
    return out;
}

// Deterministic given seed; output stays in [0,1] and keeps the input shape.
inline RgbImage distort(const RgbImage& img, const Distortion& d, std::uint64_t seed) {
    switch (d.kind) {
        case DistortKind::gaussian_blur: {
            const int k = static_cast<int>(d.param);
            if (static_cast<double>(k) != d.param)
                throw std::invalid_argument("gaussian_blur: kernel size must be an integer");
            return gaussian_blur(img, k);
        }
        case DistortKind::gaussian_noise:
            return gaussian_noise(img, d.param, seed);
        case DistortKind::jpeg: {
            const int q = static_cast<int>(d.param);
            if (static_cast<double>(q) != d.param)
                throw std::invalid_argument("jpeg: quality must be an integer");
            return jpeg_roundtrip(img, q);
        }
    }
    throw std::invalid_argument("distort: unsupported kind");
}

}  // namespace tamperlab
