#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "tamperlab/core/errors.hpp"
#include "tamperlab/model/model.hpp"
#include "tamperlab/synth/dataset.hpp"
#include "tamperlab/train/adam.hpp"
#include "tamperlab/train/augment.hpp"

namespace tamperlab {

struct TrainConfig {
    int epochs = 20;
    int batch_size = 32;
    double base_lr = 2e-4;
    double lr_decay = 0.9;       // exponential, applied per epoch
    double lambda_ssl = 0.01;    // weight of the self-supervised term
    double grad_clip = 1.0;
    double dropout_ratio = 0.5;  // token dropout in query construction
    bool aug_hflip = true;
    bool aug_crop = true;
    double crop_min_scale = 0.8;
    std::uint64_t seed = 0;
    int threads = 2;  // fixed in config: reductions are ordered per thread count
};

struct LossBreakdown {
    double loc = 0.0;
    double ssl = 0.0;
    double total = 0.0;
    int queries = 0;
};

namespace detail_train {

// All training randomness is a pure function of (seed, epoch, step, slot), so
// resuming from a checkpoint replays the identical stream.
inline std::uint64_t aug_seed(std::uint64_t seed, int epoch, int step, int slot) {
    return mix_seed(mix_seed(mix_seed(mix_seed(seed, 0xA06), static_cast<std::uint64_t>(epoch)),
                             static_cast<std::uint64_t>(step)),
                    static_cast<std::uint64_t>(slot));
}
inline std::uint64_t dropout_seed(std::uint64_t seed, int epoch, int step, int slot, int which) {
    return mix_seed(mix_seed(mix_seed(mix_seed(mix_seed(seed, 0xD07), static_cast<std::uint64_t>(epoch)),
                                      static_cast<std::uint64_t>(step)),
                             static_cast<std::uint64_t>(slot)),
                    static_cast<std::uint64_t>(which));
}

}  // namespace detail_train

// One optimizer update on a mini-batch: mean localization BCE plus
// lambda * mean query BCE, gradients through all three parameter sets.
template <typename T>
LossBreakdown train_step(Model<T>& model, const std::vector<const DataSample*>& batch,
                         AdamState<T>& opt, const TrainConfig& cfg, double lr, int epoch,
                         int step) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    const int bsz = static_cast<int>(batch.size());
    const AugmentOptions aug_opt{cfg.aug_hflip, cfg.aug_crop, cfg.crop_min_scale};

    // augment up front; query counts must be known before scaling the losses
    std::vector<RgbImage> images(static_cast<std::size_t>(bsz));
    std::vector<BinaryMask> masks(static_cast<std::size_t>(bsz));
    std::vector<TokenLabels> labels(static_cast<std::size_t>(bsz));
    int total_queries = 0;
    for (int i = 0; i < bsz; ++i) {
        auto [img, m] = augment(batch[static_cast<std::size_t>(i)]->image,
                                batch[static_cast<std::size_t>(i)]->mask, aug_opt,
                                detail_train::aug_seed(cfg.seed, epoch, step, i));
        if (img.h != model.cfg.image_size || img.w != model.cfg.image_size)
            img = resize_bilinear(img, model.cfg.image_size, model.cfg.image_size);
        if (m.h != model.cfg.image_size || m.w != model.cfg.image_size)
            m = resize_nearest(m, model.cfg.image_size, model.cfg.image_size);
        labels[static_cast<std::size_t>(i)] = downsample_mask(m, model.cfg.cls_patch);
        const int fg = labels[static_cast<std::size_t>(i)].count_fg();
        const int n = labels[static_cast<std::size_t>(i)].rows * labels[static_cast<std::size_t>(i)].cols;
        if (cfg.lambda_ssl > 0) total_queries += (fg > 0 ? 1 : 0) + (fg < n ? 1 : 0);
        images[static_cast<std::size_t>(i)] = std::move(img);
        masks[static_cast<std::size_t>(i)] = std::move(m);
    }

    std::vector<Tensor<T>*> params;
    model.visit_params([&params](const std::string&, Tensor<T>& t) { params.push_back(&t); });

    const int n_threads = std::max(1, std::min(cfg.threads, bsz));
    std::vector<std::vector<Tensor<T>>> grad_parts(static_cast<std::size_t>(n_threads));
    std::vector<double> loc_losses(static_cast<std::size_t>(bsz), 0.0);
    std::vector<double> ssl_sums(static_cast<std::size_t>(bsz), 0.0);
    std::vector<int> ssl_counts(static_cast<std::size_t>(bsz), 0);

    auto worker = [&](int tid, int lo, int hi) {
        auto& acc = grad_parts[static_cast<std::size_t>(tid)];
        acc.reserve(params.size());
        for (const auto* p : params) acc.push_back(Tensor<T>::zeros(p->shape()));
        for (int i = lo; i < hi; ++i) {
            Graph<T> g;
            auto feats = model.encoder.forward(g, image_to_tensor<T>(images[static_cast<std::size_t>(i)]));
            auto pred = model.loc.forward(g, feats);
            auto loc_l = loc_bce_loss(g, pred, masks[static_cast<std::size_t>(i)]);
            loc_losses[static_cast<std::size_t>(i)] = static_cast<double>(loc_l.val()[0]);
            Var<T> total = scale(loc_l, static_cast<T>(1.0 / bsz));

            if (cfg.lambda_ssl > 0 && total_queries > 0) {
                auto [fg, bg] = group_tokens(labels[static_cast<std::size_t>(i)]);
                Var<T> tokens;
                if (!fg.empty() || !bg.empty())
                    tokens = model.cls.tokens_from_features(g, feats);
                int which = 0;
                for (QueryKind kind : {QueryKind::manipulated, QueryKind::authentic}) {
                    const bool ok = kind == QueryKind::manipulated ? !fg.empty() : !bg.empty();
                    ++which;
                    if (!ok) continue;
                    std::vector<int> kfg, kbg;
                    if (!fg.empty())
                        kfg = dropout_tokens(fg, cfg.dropout_ratio,
                                             detail_train::dropout_seed(cfg.seed, epoch, step, i, 2 * which));
                    if (!bg.empty())
                        kbg = dropout_tokens(bg, cfg.dropout_ratio,
                                             detail_train::dropout_seed(cfg.seed, epoch, step, i, 2 * which + 1));
                    Query q = build_query(kfg, kbg, kind);
                    auto y = model.cls.classify(g, tokens, q);
                    auto ql = ssl_loss<T>(y, q.pseudo_label());
                    ssl_sums[static_cast<std::size_t>(i)] += static_cast<double>(ql.val()[0]);
                    ++ssl_counts[static_cast<std::size_t>(i)];
                    total = add(total, scale(ql, static_cast<T>(cfg.lambda_ssl / total_queries)));
                }
            }
            g.backward(total);
            for (std::size_t k = 0; k < params.size(); ++k)
                if (g.has_grad(*params[k])) {
                    const Tensor<T> gt = g.grad_of(*params[k]);
                    for (std::int64_t e = 0; e < gt.size(); ++e) acc[k][e] += gt[e];
                }
        }
    };

    if (n_threads == 1) {
        worker(0, 0, bsz);
    } else {
        std::vector<std::thread> pool;
        const int per = (bsz + n_threads - 1) / n_threads;
        for (int t = 0; t < n_threads; ++t) {
            const int lo = t * per, hi = std::min(bsz, (t + 1) * per);
            if (lo >= hi) { grad_parts[static_cast<std::size_t>(t)].resize(0); continue; }
            pool.emplace_back(worker, t, lo, hi);
        }
        for (auto& th : pool) th.join();
    }

    // ordered reduction: thread 0 buffer, then thread 1, ...
    std::vector<Tensor<T>> grads;
    grads.reserve(params.size());
    for (std::size_t k = 0; k < params.size(); ++k) grads.push_back(Tensor<T>::zeros(params[k]->shape()));
    for (const auto& part : grad_parts) {
        if (part.empty()) continue;
        for (std::size_t k = 0; k < params.size(); ++k)
            for (std::int64_t e = 0; e < grads[k].size(); ++e) grads[k][e] += part[k][e];
    }

    LossBreakdown out;
    for (int i = 0; i < bsz; ++i) out.loc += loc_losses[static_cast<std::size_t>(i)];
    out.loc /= bsz;
    int nq = 0;
    double ssl_sum = 0;
    for (int i = 0; i < bsz; ++i) {
        ssl_sum += ssl_sums[static_cast<std::size_t>(i)];
        nq += ssl_counts[static_cast<std::size_t>(i)];
    }
    out.queries = nq;
    out.ssl = nq > 0 ? ssl_sum / nq : 0.0;
    out.total = out.loc + cfg.lambda_ssl * out.ssl;
    if (!std::isfinite(out.total))
        throw TrainingDivergedError("train_step: non-finite loss at epoch " + std::to_string(epoch) +
                                    " step " + std::to_string(step));

    AdamOptions aopt;
    aopt.grad_clip = cfg.grad_clip;
    adam_step(params, grads, opt, lr, aopt);
    return out;
}

// Full training-time training loop. Writes CSV rows
// (epoch, step, loc_loss, ssl_loss, total, lr) when log is given. Epochs
// already recorded in start_epoch are skipped, which makes resume exact.
template <typename T>
void train(Model<T>& model, const std::vector<DataSample>& data, const TrainConfig& cfg,
           AdamState<T>& opt, int start_epoch = 0, std::ostream* log = nullptr) {
    if (data.empty()) throw std::invalid_argument("train: empty dataset");
    if (log && start_epoch == 0) *log << "epoch,step,loc_loss,ssl_loss,total,lr\n";
    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        const double lr = cfg.base_lr * std::pow(cfg.lr_decay, epoch);
        std::vector<int> order(data.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        Prng shuffle_rng(mix_seed(mix_seed(cfg.seed, 0x5F0), static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        const int steps = (static_cast<int>(data.size()) + cfg.batch_size - 1) / cfg.batch_size;
        for (int step = 0; step < steps; ++step) {
            std::vector<const DataSample*> batch;
            for (int i = step * cfg.batch_size;
                 i < std::min<int>((step + 1) * cfg.batch_size, static_cast<int>(data.size())); ++i)
                batch.push_back(&data[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
            LossBreakdown lb = train_step(model, batch, opt, cfg, lr, epoch, step);
            if (log)
                *log << epoch << "," << step << "," << lb.loc << "," << lb.ssl << "," << lb.total
                     << "," << lr << "\n";
        }
    }
}

}  // namespace tamperlab
