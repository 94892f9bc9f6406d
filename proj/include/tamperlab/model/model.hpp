#pragma once

#include <cstdint>
#include <string>

#include "tamperlab/core/image.hpp"
#include "tamperlab/core/rng.hpp"
#include "tamperlab/model/cls_head.hpp"
#include "tamperlab/model/config.hpp"
#include "tamperlab/model/encoder.hpp"
#include "tamperlab/model/loc_head.hpp"

namespace tamperlab {

template <typename T>
struct Model {
    ModelConfig cfg;
    Encoder<T> encoder;
    LocHead<T> loc;
    ClsHead<T> cls;

    Model() = default;

    Model(const ModelConfig& config, std::uint64_t init_seed) : cfg(config) {
        Prng rng(mix_seed(init_seed, 0x7061726d73ull));  // independent init stream
        encoder = Encoder<T>(cfg, rng);
        loc = LocHead<T>(cfg, rng);
        cls = ClsHead<T>(cfg, rng);
    }

    void visit_params(const ParamFn<T>& fn) {
        encoder.visit_params(fn);
        loc.visit_params(fn);
        cls.visit_params(fn);
    }

    void visit_head_params(const ParamFn<T>& fn) {
        loc.visit_params(fn);
        cls.visit_params(fn);
    }

    Model clone_params() const {
        Model m = *this;
        m.encoder = encoder.clone_params();
        m.loc.visit_params([](const std::string&, Tensor<T>& t) { t = t.clone(); });
        m.cls.visit_params([](const std::string&, Tensor<T>& t) { t = t.clone(); });
        return m;
    }

    // Full inference path: resize to model resolution, encode, decode, and
    // resize the probability map back to the input dimensions.
    SoftMask predict_mask(const RgbImage& image) {
        RgbImage resized = resize_bilinear(image, cfg.image_size, cfg.image_size);
        Graph<T> g;
        auto feats = encoder.forward(g, image_to_tensor<T>(resized));
        SoftMask m = loc.predict(g, feats);
        return resize_soft(m, image.h, image.w);
    }
};

}  // namespace tamperlab
