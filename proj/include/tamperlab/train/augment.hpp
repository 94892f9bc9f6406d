#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "tamperlab/core/image.hpp"
#include "tamperlab/core/rng.hpp"

namespace tamperlab {

struct AugmentOptions {
    bool hflip = true;
    bool crop = true;
    double crop_min_scale = 0.8;
};

// Seeded flip + random resized crop. The image and mask go through the same
// geometry: bilinear for pixels, nearest for labels.
inline std::pair<RgbImage, BinaryMask> augment(const RgbImage& image, const BinaryMask& mask,
                                               const AugmentOptions& opt, std::uint64_t seed) {
    Prng rng(seed);
    RgbImage img = image;
    BinaryMask m = mask;
    if (opt.hflip && rng.bernoulli(0.5)) {
        img = flip_horizontal(img);
        m = flip_horizontal(m);
    }
    if (opt.crop) {
        const double s = rng.uniform(opt.crop_min_scale, 1.0);
        const int ch = std::max(8, static_cast<int>(std::lround(img.h * s)));
        const int cw = std::max(8, static_cast<int>(std::lround(img.w * s)));
        if (ch < img.h || cw < img.w) {
            const int y0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(img.h - ch + 1)));
            const int x0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(img.w - cw + 1)));
            RgbImage ci = crop(img, y0, x0, ch, cw);
            BinaryMask cm = crop(m, y0, x0, ch, cw);
            img = resize_bilinear(ci, image.h, image.w);
            m = resize_nearest(cm, mask.h, mask.w);
        }
    }
    return {std::move(img), std::move(m)};
}

}  // namespace tamperlab
