#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "tamperlab/core/errors.hpp"
#include "tamperlab/core/image.hpp"

namespace tamperlab {

struct Confusion {
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Confusion confusion_at(const SoftMask& pred, const BinaryMask& gt, double t) {
    if (pred.h != gt.h || pred.w != gt.w) throw MetricError("f1: prediction/gt shape mismatch");
    Confusion c;
    for (std::size_t i = 0; i < pred.p.size(); ++i) {
        const bool p = pred.p[i] > t;
        const bool g = gt.px[i] != 0;
        if (p && g) ++c.tp;
        else if (p && !g) ++c.fp;
        else if (!p && g) ++c.fn;
        else ++c.tn;
    }
    return c;
}

// Pixel F1 with positives = pred > t. Empty-ground-truth convention:
// 1 when the thresholded prediction is also empty, 0 otherwise.
inline double f1_at_threshold(const SoftMask& pred, const BinaryMask& gt, double t) {
    const Confusion c = confusion_at(pred, gt, t);
    if (c.tp + c.fn == 0) return (c.fp == 0) ? 1.0 : 0.0;  // gt empty
    const std::int64_t denom = 2 * c.tp + c.fp + c.fn;
    if (denom == 0) return 0.0;
    return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

inline double f_fix(const SoftMask& pred, const BinaryMask& gt) {
    return f1_at_threshold(pred, gt, 0.5);
}

// Max F1 over the fixed 256-point threshold grid t = k/256, k = 0..255.
inline double f_best(const SoftMask& pred, const BinaryMask& gt) {
    double best = 0.0;
    for (int k = 0; k < 256; ++k)
        best = std::max(best, f1_at_threshold(pred, gt, k / 256.0));
    return best;
}

struct ImageLevelMetrics {
    std::optional<double> auc;  // absent when only one class is present
    double acc = 0.0;           // balanced accuracy at threshold 0.5
};

// AUC as the rank-based (Mann-Whitney) statistic with half credit for ties;
// ACC as 0.5 * (TPR + TNR) at score threshold 0.5. With a single class, ACC
// degrades to the present class's rate and AUC is reported absent.
inline ImageLevelMetrics image_level_metrics(const std::vector<double>& scores,
                                             const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty())
        throw MetricError("image metrics: score/label size mismatch");
    std::int64_t pos = 0, neg = 0, tp = 0, tn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i]) {
            ++pos;
            if (scores[i] > 0.5) ++tp;
        } else {
            ++neg;
            if (scores[i] <= 0.5) ++tn;
        }
    }
    ImageLevelMetrics out;
    if (pos > 0 && neg > 0)
        out.acc = 0.5 * (static_cast<double>(tp) / pos + static_cast<double>(tn) / neg);
    else if (pos > 0)
        out.acc = static_cast<double>(tp) / pos;
    else
        out.acc = static_cast<double>(tn) / neg;

    if (pos == 0 || neg == 0) return out;  // AUC undefined

    // average ranks with tie handling
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(scores.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double r = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
        i = j + 1;
    }
    double rank_sum_pos = 0;
    for (std::size_t k = 0; k < scores.size(); ++k)
        if (labels[k]) rank_sum_pos += rank[k];
    const double u = rank_sum_pos - static_cast<double>(pos) * (pos + 1) / 2.0;
    out.auc = u / (static_cast<double>(pos) * static_cast<double>(neg));
    return out;
}

// Throwing variant matching the single-class error contract; ACC callers that
// must survive single-class sets use image_level_metrics directly.
inline double auc_or_throw(const std::vector<double>& scores, const std::vector<int>& labels) {
    auto m = image_level_metrics(scores, labels);
    if (!m.auc) throw MetricError("AUC undefined: labels contain a single class");
    return *m.auc;
}

// The image-level score of a predicted mask: its maximum response.
inline double image_score(const SoftMask& pred) { return static_cast<double>(pred.max_value()); }

}  // namespace tamperlab
