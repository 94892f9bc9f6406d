#pragma once

#include <array>
#include <atomic>
#include <memory>
#include <string>
#include <vector>

#include "tamperlab/core/autograd.hpp"
#include "tamperlab/core/errors.hpp"
#include "tamperlab/core/image.hpp"
#include "tamperlab/core/rng.hpp"
#include "tamperlab/model/blocks.hpp"
#include "tamperlab/model/config.hpp"

namespace tamperlab {

// Multi-scale feature maps f_s as autograd vars; each map is a
// (h_s * w_s, c_s) token matrix plus its spatial dims.
template <typename T>
struct MultiScaleFeatures {
    struct Scale {
        Var<T> map;
        int h = 0, w = 0, c = 0;
    };
    std::vector<Scale> scales;
};

// Counts encode invocations. One per Encoder value; copies of an Encoder
// share parameters (tensor storage) but carry their own counter. Atomic so
// a batch-parallel trainer can share one encoder.
struct PassCounter {
    std::atomic<long> count{0};
    PassCounter() = default;
    PassCounter(const PassCounter& o) : count(o.count.load()) {}
    PassCounter& operator=(const PassCounter& o) {
        count.store(o.count.load());
        return *this;
    }
    void reset() { count.store(0); }
    long get() const { return count.load(); }
};

// Hierarchical patch-token transformer. Stage s halves the spatial grid of
// stage s-1 via 2x2 patch merging and doubles (per config) the channel width.
template <typename T>
class Encoder {
public:
    Encoder() = default;

    Encoder(const ModelConfig& cfg, Prng& rng) : cfg_(cfg) {
        cfg_.validate();
        const int c1 = cfg_.stage_dims[0];
        const int pp = cfg_.base_patch * cfg_.base_patch * 3;
        patch_w_ = init_linear<T>(pp, c1, rng);
        patch_b_ = Tensor<T>::zeros({c1});
        embed_ln_g_ = Tensor<T>::full({c1}, T(1));
        embed_ln_b_ = Tensor<T>::zeros({c1});
        pos_ = init_normal<T>({cfg_.grid_h() * cfg_.grid_w(), c1}, rng);
        stages_.resize(static_cast<std::size_t>(cfg_.stages()));
        for (int s = 0; s < cfg_.stages(); ++s) {
            const int d = cfg_.stage_dims[static_cast<std::size_t>(s)];
            auto& st = stages_[static_cast<std::size_t>(s)];
            st.blocks.resize(static_cast<std::size_t>(cfg_.blocks_per_stage));
            for (auto& b : st.blocks) b.init(d, cfg_.heads_for(d), d * cfg_.mlp_ratio, rng);
            if (s + 1 < cfg_.stages()) {
                const int dn = cfg_.stage_dims[static_cast<std::size_t>(s + 1)];
                st.merge_ln_g = Tensor<T>::full({4 * d}, T(1));
                st.merge_ln_b = Tensor<T>::zeros({4 * d});
                st.merge_w = init_linear<T>(4 * d, dn, rng);
            }
        }
        build_maps();
    }

    const ModelConfig& config() const { return cfg_; }
    PassCounter& pass_counter() { return counter_; }
    const PassCounter& pass_counter() const { return counter_; }

    // Deep copy of all parameters; the copy adapts independently.
    Encoder clone_params() const {
        Encoder e = *this;  // shallow copy shares tensor storage
        e.counter_.reset();
        e.visit_params([](const std::string&, Tensor<T>& t) { t = t.clone(); });
        return e;
    }

    // image: (h*w, 3) tensor, values in [0,1], dims equal to config.
    MultiScaleFeatures<T> forward(Graph<T>& g, const Tensor<T>& image) {
        const int hw = cfg_.image_size * cfg_.image_size;
        if (image.ndim() != 2 || image.rows() != hw || image.cols() != 3)
            throw ShapeError("encode: image shape " + Tensor<T>::shape_str(image.shape()) +
                             " does not match configured size; resize first");
        ++counter_.count;
        Var<T> x = g.constant(image);
        x = gather_elems(x, patchify_map_, {cfg_.grid_h() * cfg_.grid_w(),
                                            cfg_.base_patch * cfg_.base_patch * 3});
        x = add_bias(matmul(x, g.leaf(patch_w_)), g.leaf(patch_b_));
        x = layer_norm(x, g.leaf(embed_ln_g_), g.leaf(embed_ln_b_));
        x = add(x, g.leaf(pos_));

        MultiScaleFeatures<T> out;
        int h = cfg_.grid_h(), w = cfg_.grid_w();
        for (int s = 0; s < cfg_.stages(); ++s) {
            auto& st = stages_[static_cast<std::size_t>(s)];
            for (auto& b : st.blocks) x = b.forward(g, x);
            out.scales.push_back({x, h, w, cfg_.stage_dims[static_cast<std::size_t>(s)]});
            if (s + 1 < cfg_.stages()) {
                const int d = cfg_.stage_dims[static_cast<std::size_t>(s)];
                x = gather_elems(x, st.merge_map, {h / 2 * (w / 2), 4 * d});
                x = layer_norm(x, g.leaf(st.merge_ln_g), g.leaf(st.merge_ln_b));
                x = matmul(x, g.leaf(st.merge_w));
                h /= 2;
                w /= 2;
            }
        }
        return out;
    }

    void visit_params(const ParamFn<T>& fn) { visit_params_impl(*this, fn); }

private:
    struct Stage {
        std::vector<TransformerBlock<T>> blocks;
        Tensor<T> merge_ln_g, merge_ln_b, merge_w;  // absent on the last stage
        std::shared_ptr<const std::vector<std::int64_t>> merge_map;
    };

    static void visit_params_impl(Encoder& e, const ParamFn<T>& fn) {
        fn("encoder.patch.w", e.patch_w_);
        fn("encoder.patch.b", e.patch_b_);
        fn("encoder.patch.ln.g", e.embed_ln_g_);
        fn("encoder.patch.ln.b", e.embed_ln_b_);
        fn("encoder.pos", e.pos_);
        for (std::size_t s = 0; s < e.stages_.size(); ++s) {
            auto& st = e.stages_[s];
            for (std::size_t b = 0; b < st.blocks.size(); ++b)
                st.blocks[b].visit_params(
                    "encoder.stage" + std::to_string(s) + ".block" + std::to_string(b), fn);
            if (!st.merge_w.empty()) {
                fn("encoder.stage" + std::to_string(s) + ".merge.ln.g", st.merge_ln_g);
                fn("encoder.stage" + std::to_string(s) + ".merge.ln.b", st.merge_ln_b);
                fn("encoder.stage" + std::to_string(s) + ".merge.w", st.merge_w);
            }
        }
    }

    void build_maps() {
        // image (h*w, 3) -> (grid, p*p*3) patch rows
        const int p = cfg_.base_patch;
        const int gw = cfg_.grid_w(), gh = cfg_.grid_h();
        const int iw = cfg_.image_size;
        auto pm = std::make_shared<std::vector<std::int64_t>>();
        pm->reserve(static_cast<std::size_t>(gh) * gw * p * p * 3);
        for (int gy = 0; gy < gh; ++gy)
            for (int gx = 0; gx < gw; ++gx)
                for (int dy = 0; dy < p; ++dy)
                    for (int dx = 0; dx < p; ++dx)
                        for (int c = 0; c < 3; ++c)
                            pm->push_back(
                                (static_cast<std::int64_t>(gy * p + dy) * iw + (gx * p + dx)) * 3 + c);
        patchify_map_ = pm;

        // token grid (h*w, c) -> (h/2*w/2, 4c); quadrant-major concat
        int h = gh, w = gw;
        for (int s = 0; s + 1 < cfg_.stages(); ++s) {
            const int c = cfg_.stage_dims[static_cast<std::size_t>(s)];
            auto mm = std::make_shared<std::vector<std::int64_t>>();
            mm->reserve(static_cast<std::size_t>(h / 2) * (w / 2) * 4 * c);
            for (int y = 0; y < h / 2; ++y)
                for (int x = 0; x < w / 2; ++x)
                    for (auto [dy, dx] : std::array<std::array<int, 2>, 4>{{{0, 0}, {0, 1}, {1, 0}, {1, 1}}})
                        for (int ch = 0; ch < c; ++ch)
                            mm->push_back(
                                (static_cast<std::int64_t>(2 * y + dy) * w + (2 * x + dx)) * c + ch);
            stages_[static_cast<std::size_t>(s)].merge_map = mm;
            h /= 2;
            w /= 2;
        }
    }

    ModelConfig cfg_;
    Tensor<T> patch_w_, patch_b_, embed_ln_g_, embed_ln_b_, pos_;
    std::vector<Stage> stages_;
    std::shared_ptr<const std::vector<std::int64_t>> patchify_map_;
    PassCounter counter_;
};

}  // namespace tamperlab
