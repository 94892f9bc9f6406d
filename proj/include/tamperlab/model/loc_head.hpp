#pragma once

#include <memory>
#include <string>
#include <vector>

#include "tamperlab/core/autograd.hpp"
#include "tamperlab/core/errors.hpp"
#include "tamperlab/core/image.hpp"
#include "tamperlab/model/blocks.hpp"
#include "tamperlab/model/config.hpp"
#include "tamperlab/model/encoder.hpp"

namespace tamperlab {

// All-MLP decoder: project every scale to a common width, upsample to the
// stage-1 grid, concatenate, fuse, predict one logistic channel, upsample
// to image resolution.
template <typename T>
class LocHead {
public:
    LocHead() = default;

    LocHead(const ModelConfig& cfg, Prng& rng) : cfg_(cfg) {
        const int width = cfg_.loc_width;
        proj_w_.resize(static_cast<std::size_t>(cfg_.stages()));
        proj_b_.resize(static_cast<std::size_t>(cfg_.stages()));
        for (int s = 0; s < cfg_.stages(); ++s) {
            proj_w_[static_cast<std::size_t>(s)] =
                init_linear<T>(cfg_.stage_dims[static_cast<std::size_t>(s)], width, rng);
            proj_b_[static_cast<std::size_t>(s)] = Tensor<T>::zeros({width});
        }
        cat_ln_g_ = Tensor<T>::full({cfg_.stages() * width}, T(1));
        cat_ln_b_ = Tensor<T>::zeros({cfg_.stages() * width});
        fuse_w_ = init_linear<T>(cfg_.stages() * width, width, rng);
        fuse_b_ = Tensor<T>::zeros({width});
        pred_w_ = init_normal<T>({width, 1}, rng, 0.02);  // first prediction ~ logistic(0)
        pred_b_ = Tensor<T>::zeros({1});
        const int gh = cfg_.grid_h(), gw = cfg_.grid_w();
        up_plans_.resize(static_cast<std::size_t>(cfg_.stages()));
        int h = gh, w = gw;
        for (int s = 0; s < cfg_.stages(); ++s) {
            if (h != gh || w != gw) up_plans_[static_cast<std::size_t>(s)] = build_bilinear_plan(h, w, gh, gw);
            h /= 2;
            w /= 2;
        }
        final_plan_ = build_bilinear_plan(gh, gw, cfg_.image_size, cfg_.image_size);
    }

    // Returns per-pixel probabilities as an (image_size^2, 1) var.
    Var<T> forward(Graph<T>& g, const MultiScaleFeatures<T>& feats) const {
        if (static_cast<int>(feats.scales.size()) != cfg_.stages())
            throw ShapeError("loc head: scale count mismatch");
        std::vector<Var<T>> ups;
        for (int s = 0; s < cfg_.stages(); ++s) {
            const auto& sc = feats.scales[static_cast<std::size_t>(s)];
            if (sc.c != cfg_.stage_dims[static_cast<std::size_t>(s)])
                throw ShapeError("loc head: channel mismatch at scale " + std::to_string(s));
            Var<T> p = add_bias(matmul(sc.map, g.leaf(proj_w_[static_cast<std::size_t>(s)])),
                                g.leaf(proj_b_[static_cast<std::size_t>(s)]));
            if (up_plans_[static_cast<std::size_t>(s)]) p = resize_rows(p, up_plans_[static_cast<std::size_t>(s)]);
            ups.push_back(p);
        }
        Var<T> x = ups.size() == 1 ? ups[0] : concat_cols(ups);
        x = layer_norm(x, g.leaf(cat_ln_g_), g.leaf(cat_ln_b_));
        x = gelu(add_bias(matmul(x, g.leaf(fuse_w_)), g.leaf(fuse_b_)));
        x = add_bias(matmul(x, g.leaf(pred_w_)), g.leaf(pred_b_));
        x = sigmoid(x);
        return resize_rows(x, final_plan_);  // convex weights keep values in [0,1]
    }

    SoftMask predict(Graph<T>& g, const MultiScaleFeatures<T>& feats) const {
        Var<T> m = forward(g, feats);
        return tensor_to_softmask(m.val(), cfg_.image_size, cfg_.image_size);
    }

    void visit_params(const ParamFn<T>& fn) {
        for (std::size_t s = 0; s < proj_w_.size(); ++s) {
            fn("loc.proj" + std::to_string(s) + ".w", proj_w_[s]);
            fn("loc.proj" + std::to_string(s) + ".b", proj_b_[s]);
        }
        fn("loc.cat_ln.g", cat_ln_g_);
        fn("loc.cat_ln.b", cat_ln_b_);
        fn("loc.fuse.w", fuse_w_);
        fn("loc.fuse.b", fuse_b_);
        fn("loc.pred.w", pred_w_);
        fn("loc.pred.b", pred_b_);
    }

private:
    ModelConfig cfg_;
    std::vector<Tensor<T>> proj_w_, proj_b_;
    Tensor<T> cat_ln_g_, cat_ln_b_, fuse_w_, fuse_b_, pred_w_, pred_b_;
    std::vector<std::shared_ptr<const BilinearPlan>> up_plans_;
    std::shared_ptr<const BilinearPlan> final_plan_;
};

// Mean binary cross-entropy between a predicted mask var and a ground-truth
// mask, clamped inside bce_mean.
template <typename T>
Var<T> loc_bce_loss(Graph<T>& g, const Var<T>& pred, const BinaryMask& target) {
    if (pred.val().size() != static_cast<std::int64_t>(target.px.size()))
        throw ShapeError("bce: prediction/mask size mismatch");
    (void)g;
    return bce_mean(pred, mask_to_tensor<T>(target));
}

}  // namespace tamperlab
