#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "tamperlab/core/autograd.hpp"
#include "tamperlab/core/errors.hpp"
#include "tamperlab/core/image.hpp"
#include "tamperlab/core/rng.hpp"
#include "tamperlab/model/blocks.hpp"
#include "tamperlab/model/config.hpp"
#include "tamperlab/model/encoder.hpp"

namespace tamperlab {

// Per-token manipulated(1)/authentic(0) labels on the classifier token grid.
struct TokenLabels {
    int rows = 0, cols = 0;
    std::vector<std::uint8_t> lab;

    TokenLabels() = default;
    TokenLabels(int r, int c) : rows(r), cols(c), lab(static_cast<std::size_t>(r) * c, 0) {}
    std::uint8_t& at(int r, int c) { return lab[static_cast<std::size_t>(r) * cols + c]; }
    std::uint8_t at(int r, int c) const { return lab[static_cast<std::size_t>(r) * cols + c]; }
    int count_fg() const {
        int n = 0;
        for (auto v : lab) n += v;
        return n;
    }
};

// Token labeled manipulated iff any pixel of its p x p cell is manipulated.
inline TokenLabels downsample_mask(const BinaryMask& mask, int patch) {
    if (patch <= 0 || mask.h % patch != 0 || mask.w % patch != 0)
        throw ShapeError("downsample_mask: mask dims must be divisible by patch size");
    TokenLabels out(mask.h / patch, mask.w / patch);
    for (int y = 0; y < mask.h; ++y)
        for (int x = 0; x < mask.w; ++x)
            if (mask.at(y, x)) out.at(y / patch, x / patch) = 1;
    return out;
}

// Row-major disjoint partition of token indices into (foreground, background).
inline std::pair<std::vector<int>, std::vector<int>> group_tokens(const TokenLabels& labels) {
    std::vector<int> fg, bg;
    const int n = labels.rows * labels.cols;
    for (int i = 0; i < n; ++i) (labels.lab[static_cast<std::size_t>(i)] ? fg : bg).push_back(i);
    return {fg, bg};
}

// Number of tokens kept by dropout at ratio r; floor-guarded so a nonempty
// group never empties.
inline int dropout_keep_count(int n, double r) {
    return std::max(1, static_cast<int>(std::llround((1.0 - r) * n)));
}

// Uniform subset of the group, original order preserved.
inline std::vector<int> dropout_tokens(const std::vector<int>& group, double r, std::uint64_t seed) {
    if (group.empty()) throw EmptyGroupError("dropout_tokens: empty token group");
    if (r < 0.0 || r >= 1.0) throw std::invalid_argument("dropout_tokens: ratio must be in [0,1)");
    const int n = static_cast<int>(group.size());
    const int keep = dropout_keep_count(n, r);
    if (keep == n) return group;
    Prng rng(seed);
    std::vector<int> picked = rng.sample_indices(n, keep);
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(keep));
    for (int i : picked) out.push_back(group[static_cast<std::size_t>(i)]);
    return out;
}

enum class QueryKind { manipulated, authentic };

// An ordered token subset plus its pseudo-label. Indices refer to the
// row-major token grid the query was built from.
struct Query {
    std::vector<int> token_indices;
    QueryKind kind = QueryKind::manipulated;
    float pseudo_label() const { return kind == QueryKind::manipulated ? 1.f : 0.f; }
};

// Manipulated query = retained foreground followed by retained background;
// authentic query = retained background only.
inline Query build_query(const std::vector<int>& fg, const std::vector<int>& bg, QueryKind kind) {
    Query q;
    q.kind = kind;
    if (kind == QueryKind::manipulated) {
        if (fg.empty()) throw InvalidQueryError("manipulated query needs >=1 foreground token");
        q.token_indices = fg;
        q.token_indices.insert(q.token_indices.end(), bg.begin(), bg.end());
    } else {
        if (bg.empty()) throw InvalidQueryError("authentic query needs >=1 background token");
        q.token_indices = bg;
    }
    return q;
}

// Classification head: linear per-scale fusion, patch embedding into coarse
// tokens, and a class-token transformer that scores a query as manipulated.
template <typename T>
class ClsHead {
public:
    ClsHead() = default;

    ClsHead(const ModelConfig& cfg, Prng& rng) : cfg_(cfg) {
        const int width = cfg_.cls_proj_width;
        proj_w_.resize(static_cast<std::size_t>(cfg_.stages()));
        proj_b_.resize(static_cast<std::size_t>(cfg_.stages()));
        for (int s = 0; s < cfg_.stages(); ++s) {
            proj_w_[static_cast<std::size_t>(s)] =
                init_linear<T>(cfg_.stage_dims[static_cast<std::size_t>(s)], width, rng);
            proj_b_[static_cast<std::size_t>(s)] = Tensor<T>::zeros({width});
        }
        const int cells = cfg_.cls_patch / cfg_.base_patch;  // cells per token side
        embed_w_ = init_linear<T>(cells * cells * cfg_.stages() * width, cfg_.cls_dim, rng);
        embed_b_ = Tensor<T>::zeros({cfg_.cls_dim});
        class_token_ = init_normal<T>({1, cfg_.cls_dim}, rng);  // zero-mean gaussian, sigma 0.02
        if (cfg_.cls_positional)
            pos_ = init_normal<T>({cfg_.token_rows() * cfg_.token_cols(), cfg_.cls_dim}, rng);
        blocks_.resize(static_cast<std::size_t>(cfg_.cls_blocks));
        for (auto& b : blocks_) b.init(cfg_.cls_dim, cfg_.cls_heads, cfg_.cls_dim * cfg_.mlp_ratio, rng);
        out_ln_g_ = Tensor<T>::full({cfg_.cls_dim}, T(1));
        out_ln_b_ = Tensor<T>::zeros({cfg_.cls_dim});
        out_w_ = init_normal<T>({cfg_.cls_dim, 1}, rng, 0.01);  // first score ~ logistic(0)
        out_b_ = Tensor<T>::zeros({1});

        const int gh = cfg_.grid_h(), gw = cfg_.grid_w();
        up_plans_.resize(static_cast<std::size_t>(cfg_.stages()));
        int h = gh, w = gw;
        for (int s = 0; s < cfg_.stages(); ++s) {
            if (h != gh || w != gw) up_plans_[static_cast<std::size_t>(s)] = build_bilinear_plan(h, w, gh, gw);
            h /= 2;
            w /= 2;
        }
        build_patch_map();
    }

    // Per-scale linear projection, upsample to (h_1, w_1), channel concat.
    Var<T> fuse_multiscale(Graph<T>& g, const MultiScaleFeatures<T>& feats) const {
        if (static_cast<int>(feats.scales.size()) != cfg_.stages())
            throw ShapeError("cls head: scale count mismatch");
        std::vector<Var<T>> ups;
        for (int s = 0; s < cfg_.stages(); ++s) {
            const auto& sc = feats.scales[static_cast<std::size_t>(s)];
            if (sc.c != cfg_.stage_dims[static_cast<std::size_t>(s)])
                throw ShapeError("cls head: channel mismatch at scale " + std::to_string(s));
            Var<T> p = add_bias(matmul(sc.map, g.leaf(proj_w_[static_cast<std::size_t>(s)])),
                                g.leaf(proj_b_[static_cast<std::size_t>(s)]));
            if (up_plans_[static_cast<std::size_t>(s)]) p = resize_rows(p, up_plans_[static_cast<std::size_t>(s)]);
            ups.push_back(p);
        }
        return ups.size() == 1 ? ups[0] : concat_cols(ups);
    }

    // Fused map -> (token_rows*token_cols, d) token grid.
    Var<T> patch_embed(Graph<T>& g, const Var<T>& fused) const {
        const int cells = cfg_.cls_patch / cfg_.base_patch;
        const int expect_c = cfg_.stages() * cfg_.cls_proj_width;
        if (fused.rows() != cfg_.grid_h() * cfg_.grid_w() || fused.cols() != expect_c)
            throw ShapeError("patch_embed: fused map shape mismatch");
        Var<T> x = gather_elems(fused, patch_map_,
                                {cfg_.token_rows() * cfg_.token_cols(), cells * cells * expect_c});
        x = add_bias(matmul(x, g.leaf(embed_w_)), g.leaf(embed_b_));
        if (cfg_.cls_positional) x = add(x, g.leaf(pos_));
        return x;
    }

    // Convenience: encoder features -> token grid.
    Var<T> tokens_from_features(Graph<T>& g, const MultiScaleFeatures<T>& feats) const {
        return patch_embed(g, fuse_multiscale(g, feats));
    }

    // Scores one query: probability that it is manipulated. Returns a (1,1) var.
    Var<T> classify(Graph<T>& g, const Var<T>& token_grid, const Query& query) const {
        if (query.token_indices.empty()) throw InvalidQueryError("classify: empty query");
        if (token_grid.cols() != cfg_.cls_dim) throw ShapeError("classify: token dim mismatch");
        auto idx = std::make_shared<const std::vector<int>>(query.token_indices);
        Var<T> toks = gather_rows(token_grid, idx);
        Var<T> x = concat_rows<T>({g.leaf(class_token_), toks});
        for (const auto& b : blocks_) x = b.forward(g, x);
        Var<T> cls = slice_rows(x, 0, 1);
        cls = layer_norm(cls, g.leaf(out_ln_g_), g.leaf(out_ln_b_));
        return sigmoid(add_bias(matmul(cls, g.leaf(out_w_)), g.leaf(out_b_)));
    }

    void visit_params(const ParamFn<T>& fn) {
        for (std::size_t s = 0; s < proj_w_.size(); ++s) {
            fn("cls.proj" + std::to_string(s) + ".w", proj_w_[s]);
            fn("cls.proj" + std::to_string(s) + ".b", proj_b_[s]);
        }
        fn("cls.embed.w", embed_w_);
        fn("cls.embed.b", embed_b_);
        fn("cls.class_token", class_token_);
        if (!pos_.empty()) fn("cls.pos", pos_);
        for (std::size_t b = 0; b < blocks_.size(); ++b)
            blocks_[b].visit_params("cls.block" + std::to_string(b), fn);
        fn("cls.out_ln.g", out_ln_g_);
        fn("cls.out_ln.b", out_ln_b_);
        fn("cls.out.w", out_w_);
        fn("cls.out.b", out_b_);
    }

private:
    void build_patch_map() {
        // fused map rows are grid positions; token t gathers its cells x cells
        // block, channel-minor.
        const int cells = cfg_.cls_patch / cfg_.base_patch;
        const int gw = cfg_.grid_w();
        const int c = cfg_.stages() * cfg_.cls_proj_width;
        auto pm = std::make_shared<std::vector<std::int64_t>>();
        pm->reserve(static_cast<std::size_t>(cfg_.token_rows()) * cfg_.token_cols() * cells * cells * c);
        for (int ty = 0; ty < cfg_.token_rows(); ++ty)
            for (int tx = 0; tx < cfg_.token_cols(); ++tx)
                for (int dy = 0; dy < cells; ++dy)
                    for (int dx = 0; dx < cells; ++dx)
                        for (int ch = 0; ch < c; ++ch)
                            pm->push_back(
                                (static_cast<std::int64_t>(ty * cells + dy) * gw + (tx * cells + dx)) * c + ch);
        patch_map_ = pm;
    }

    ModelConfig cfg_;
    std::vector<Tensor<T>> proj_w_, proj_b_;
    Tensor<T> embed_w_, embed_b_, class_token_, pos_, out_ln_g_, out_ln_b_, out_w_, out_b_;
    std::vector<TransformerBlock<T>> blocks_;
    std::vector<std::shared_ptr<const BilinearPlan>> up_plans_;
    std::shared_ptr<const std::vector<std::int64_t>> patch_map_;
};

// Binary cross-entropy of a query score against its pseudo-label.
template <typename T>
Var<T> ssl_loss(const Var<T>& y, float pseudo_label) {
    return bce_mean(y, Tensor<T>::scalar(static_cast<T>(pseudo_label)));
}

}  // namespace tamperlab
