#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tamperlab/core/errors.hpp"
#include "tamperlab/core/image.hpp"
#include "tamperlab/model/model.hpp"
#include "tamperlab/train/adam.hpp"
#include "tamperlab/train/augment.hpp"

namespace tamperlab {

// Fig-6 strategies: encode a batch of augmented images (base), the same with
// token dropout (td), or encode once and draw a batch of dropout queries
// from the single token grid (obqg).
enum class TTTStrategy { ttt_base, ttt_td, ttt_obqg };

inline const char* ttt_strategy_name(TTTStrategy s) {
    switch (s) {
        case TTTStrategy::ttt_base: return "ttt_base";
        case TTTStrategy::ttt_td: return "ttt_td";
        case TTTStrategy::ttt_obqg: return "ttt_obqg";
    }
    return "?";
}

inline TTTStrategy ttt_strategy_from(const std::string& s) {
    if (s == "ttt_base" || s == "base") return TTTStrategy::ttt_base;
    if (s == "ttt_td" || s == "td") return TTTStrategy::ttt_td;
    if (s == "ttt_obqg" || s == "obqg") return TTTStrategy::ttt_obqg;
    throw std::invalid_argument("unknown TTT strategy: " + s);
}

enum class MaskRefresh { initial_mask, per_step };
enum class QueryMode { manipulated_only, authentic_only, both };

struct TTTConfig {
    int steps = 10;              // K optimizer updates
    double lr = 2e-5;            // fixed (no decay) during adaptation
    double dropout_ratio = 0.5;  // ignored by ttt_base (full retention)
    int query_batch = 32;        // B
    TTTStrategy strategy = TTTStrategy::ttt_obqg;
    MaskRefresh refresh = MaskRefresh::initial_mask;
    QueryMode query_mode = QueryMode::manipulated_only;
    std::uint64_t seed = 0;
    double grad_clip = 1.0;
    bool record_curve = false;  // keep the predicted mask after every step
};

struct TTTReport {
    // entry k = objective on a fixed evaluation query batch with the encoder
    // after k updates; entry 0 is pre-adaptation
    std::vector<double> ssl_loss;
    std::vector<double> mean_y;
    long encoder_passes = 0;    // adaptation passes only (not instrumentation)
    long live_token_peak = 0;   // nominal strategy footprint, see below
    double elapsed_ms = 0.0;
    bool skipped = false;       // no-foreground condition
    SoftMask initial_mask;      // at model resolution
    SoftMask final_mask;        // at model resolution
    std::vector<SoftMask> curve_masks;  // when record_curve: masks at k = 0..K
};

template <typename T>
struct TTTResult {
    Encoder<T> encoder;  // adapted copy; source checkpoint untouched
    TTTReport report;
};

namespace detail_ttt {

inline std::uint64_t step_seed(std::uint64_t seed, int k) {
    return mix_seed(mix_seed(seed, 0x577ull), static_cast<std::uint64_t>(k));
}

// One token-batch element costs (tokens + class token) * d; the encoder side
// costs the sum of all token-map elements. "Memory" here is a structural
// proxy: absolute bytes are hardware-dependent.
inline long encoder_token_cost(const ModelConfig& cfg) {
    long cost = 0;
    int h = cfg.grid_h(), w = cfg.grid_w();
    for (int s = 0; s < cfg.stages(); ++s) {
        cost += static_cast<long>(h) * w * cfg.stage_dims[static_cast<std::size_t>(s)];
        h /= 2;
        w /= 2;
    }
    return cost;
}

inline QueryKind kind_for(QueryMode mode, int b) {
    switch (mode) {
        case QueryMode::manipulated_only: return QueryKind::manipulated;
        case QueryMode::authentic_only: return QueryKind::authentic;
        case QueryMode::both: return b % 2 == 0 ? QueryKind::manipulated : QueryKind::authentic;
    }
    return QueryKind::manipulated;
}

}  // namespace detail_ttt

// Per-sample test-time adaptation: K optimizer steps on the self-supervised
// query objective, updating a private copy of the encoder only. The heads
// and the source model are never written.
template <typename T>
TTTResult<T> ttt_adapt(const RgbImage& image, Model<T>& model, const TTTConfig& cfg) {
    const auto t_start = std::chrono::steady_clock::now();
    const ModelConfig& mc = model.cfg;
    const double r_eff = cfg.strategy == TTTStrategy::ttt_base ? 0.0 : cfg.dropout_ratio;
    const int B = cfg.query_batch;

    RgbImage resized = resize_bilinear(image, mc.image_size, mc.image_size);
    Tensor<T> img_t = image_to_tensor<T>(resized);

    TTTResult<T> res{model.encoder.clone_params(), {}};
    Encoder<T>& enc = res.encoder;
    TTTReport& rep = res.report;
    Encoder<T> eval_enc = enc;  // shares adapted tensors; separate counter
    enc.pass_counter().reset();

    // fixed evaluation query batch: same seeds at every step, so the loss
    // entries are comparable across k
    const std::uint64_t eval_seed = mix_seed(cfg.seed, 0xE7A1ull);

    auto build_queries = [&](const TokenLabels& labels, std::uint64_t stream) {
        auto [fg, bg] = group_tokens(labels);
        std::vector<Query> qs;
        qs.reserve(static_cast<std::size_t>(B));
        for (int b = 0; b < B; ++b) {
            const QueryKind kind = detail_ttt::kind_for(cfg.query_mode, b);
            std::vector<int> kfg, kbg;
            if (!fg.empty())
                kfg = dropout_tokens(fg, r_eff, mix_seed(stream, static_cast<std::uint64_t>(2 * b)));
            if (!bg.empty())
                kbg = dropout_tokens(bg, r_eff, mix_seed(stream, static_cast<std::uint64_t>(2 * b + 1)));
            if (kind == QueryKind::manipulated && kfg.empty()) continue;
            if (kind == QueryKind::authentic && kbg.empty()) continue;
            qs.push_back(build_query(kfg, kbg, kind));
        }
        return qs;
    };

    // initial prediction (instrumentation pass, not counted)
    TokenLabels labels;
    {
        Graph<T> g;
        auto feats = eval_enc.forward(g, img_t);
        rep.initial_mask = model.loc.predict(g, feats);
    }
    labels = downsample_mask(rep.initial_mask.threshold(0.5f), mc.cls_patch);
    {
        auto [fg, bg] = group_tokens(labels);
        const bool need_fg = cfg.query_mode != QueryMode::authentic_only;
        const bool need_bg = cfg.query_mode != QueryMode::manipulated_only;
        if ((need_fg && fg.empty()) || (need_bg && bg.empty())) {
            rep.skipped = true;
            rep.final_mask = rep.initial_mask;
            rep.elapsed_ms = std::chrono::duration<double, std::milli>(
                                 std::chrono::steady_clock::now() - t_start)
                                 .count();
            return res;
        }
    }

    std::vector<Tensor<T>*> enc_params;
    enc.visit_params([&enc_params](const std::string&, Tensor<T>& t) { enc_params.push_back(&t); });
    AdamState<T> opt;  // fresh per image
    AdamOptions aopt;
    aopt.grad_clip = cfg.grad_clip;

    // objective + mask with the current encoder state (not counted)
    auto evaluate = [&](bool want_mask) {
        Graph<T> g;
        auto feats = eval_enc.forward(g, img_t);
        auto tokens = model.cls.tokens_from_features(g, feats);
        auto queries = build_queries(labels, eval_seed);
        double loss = 0, ysum = 0;
        for (const auto& q : queries) {
            auto y = model.cls.classify(g, tokens, q);
            loss += static_cast<double>(ssl_loss<T>(y, q.pseudo_label()).val()[0]);
            ysum += static_cast<double>(y.val()[0]);
        }
        const double n = queries.empty() ? 1.0 : static_cast<double>(queries.size());
        rep.ssl_loss.push_back(loss / n);
        rep.mean_y.push_back(ysum / n);
        if (want_mask) rep.final_mask = model.loc.predict(g, feats);
        if (cfg.record_curve) rep.curve_masks.push_back(rep.final_mask);
    };
    evaluate(true);

    const long enc_cost = detail_ttt::encoder_token_cost(mc);
    const AugmentOptions aug_opt{true, true, 0.8};

    for (int k = 1; k <= cfg.steps; ++k) {
        const std::uint64_t sseed = detail_ttt::step_seed(cfg.seed, k);
        if (cfg.strategy == TTTStrategy::ttt_obqg) {
            Graph<T> g;
            auto feats = enc.forward(g, img_t);  // the single counted pass
            if (cfg.refresh == MaskRefresh::per_step) {
                SoftMask m = model.loc.predict(g, feats);
                TokenLabels fresh = downsample_mask(m.threshold(0.5f), mc.cls_patch);
                if (fresh.count_fg() > 0 || cfg.query_mode == QueryMode::authentic_only)
                    labels = fresh;  // keep the previous labels if refresh lost all foreground
            }
            auto tokens = model.cls.tokens_from_features(g, feats);
            auto queries = build_queries(labels, sseed);
            if (queries.empty()) break;
            Var<T> loss;
            long tok_cost = 0;
            for (const auto& q : queries) {
                auto y = model.cls.classify(g, tokens, q);
                auto l = scale(ssl_loss<T>(y, q.pseudo_label()),
                               static_cast<T>(1.0 / static_cast<double>(queries.size())));
                loss = loss.valid() ? add(loss, l) : l;
                tok_cost += static_cast<long>(q.token_indices.size() + 1) * mc.cls_dim;
            }
            rep.live_token_peak = std::max(rep.live_token_peak, enc_cost + tok_cost);
            g.backward(loss);
            std::vector<Tensor<T>> grads;
            grads.reserve(enc_params.size());
            for (auto* p : enc_params) grads.push_back(g.grad_of(*p));
            adam_step(enc_params, grads, opt, cfg.lr, aopt);
        } else {
            // base / td: B augmented encodes, one query each
            std::vector<Tensor<T>> grads;
            grads.reserve(enc_params.size());
            for (auto* p : enc_params) grads.push_back(Tensor<T>::zeros(p->shape()));
            const BinaryMask init_binary = rep.initial_mask.threshold(0.5f);
            long tok_cost = 0;
            int used = 0;
            for (int b = 0; b < B; ++b) {
                RgbImage aug_img = resized;
                BinaryMask aug_mask = init_binary;
                if (b > 0) {
                    auto [ai, am] = augment(resized, init_binary, aug_opt,
                                            mix_seed(sseed, static_cast<std::uint64_t>(b)));
                    aug_img = std::move(ai);
                    aug_mask = std::move(am);
                }
                TokenLabels lab_b = downsample_mask(aug_mask, mc.cls_patch);
                auto [fg, bg] = group_tokens(lab_b);
                const QueryKind kind = detail_ttt::kind_for(cfg.query_mode, b);
                if ((kind == QueryKind::manipulated && fg.empty()) ||
                    (kind == QueryKind::authentic && bg.empty())) {
                    // augmentation lost the group; fall back to the identity view
                    aug_img = resized;
                    lab_b = labels;
                    std::tie(fg, bg) = group_tokens(lab_b);
                }
                Graph<T> g;
                auto feats = enc.forward(g, image_to_tensor<T>(aug_img));  // counted, B per step
                auto tokens = model.cls.tokens_from_features(g, feats);
                std::vector<int> kfg, kbg;
                if (!fg.empty())
                    kfg = dropout_tokens(fg, r_eff, mix_seed(sseed, static_cast<std::uint64_t>(1000 + 2 * b)));
                if (!bg.empty())
                    kbg = dropout_tokens(bg, r_eff, mix_seed(sseed, static_cast<std::uint64_t>(1001 + 2 * b)));
                if (kind == QueryKind::manipulated && kfg.empty()) continue;
                if (kind == QueryKind::authentic && kbg.empty()) continue;
                Query q = build_query(kfg, kbg, kind);
                auto y = model.cls.classify(g, tokens, q);
                auto l = scale(ssl_loss<T>(y, q.pseudo_label()), static_cast<T>(1.0 / B));
                tok_cost += static_cast<long>(q.token_indices.size() + 1) * mc.cls_dim;
                g.backward(l);
                for (std::size_t i = 0; i < enc_params.size(); ++i)
                    if (g.has_grad(*enc_params[i])) {
                        const Tensor<T> gt = g.grad_of(*enc_params[i]);
                        for (std::int64_t e = 0; e < gt.size(); ++e) grads[i][e] += gt[e];
                    }
                ++used;
            }
            rep.live_token_peak = std::max(rep.live_token_peak, B * enc_cost + tok_cost);
            if (used == 0) break;
            adam_step(enc_params, grads, opt, cfg.lr, aopt);
        }
        evaluate(true);
    }

    rep.encoder_passes = enc.pass_counter().get();
    rep.elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start).count();
    return res;
}

// Adapt, then predict with the adapted encoder. The mask comes back at the
// input image's resolution.
template <typename T>
std::pair<SoftMask, TTTReport> predict_with_ttt(const RgbImage& image, Model<T>& model,
                                                const TTTConfig& cfg) {
    TTTResult<T> res = ttt_adapt(image, model, cfg);
    SoftMask m = res.report.skipped ? res.report.initial_mask : res.report.final_mask;
    return {resize_soft(m, image.h, image.w), std::move(res.report)};
}

}  // namespace tamperlab
