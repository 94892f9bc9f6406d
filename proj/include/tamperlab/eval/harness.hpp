#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "tamperlab/eval/metrics.hpp"
#include "tamperlab/model/model.hpp"
#include "tamperlab/synth/dataset.hpp"
#include "tamperlab/ttt/engine.hpp"

namespace tamperlab {

struct EvalRow {
    std::string id;
    double f_fix = 0;
    double f_best = 0;
    double image_score = 0;  // max response of the predicted mask
    int label = 1;           // 1 = forged (any manipulated pixel in gt)
};

struct EvalSummary {
    double mean_f_fix = 0;
    double mean_f_best = 0;
    std::optional<double> auc;
    double acc = 0;
    int count = 0;
};

inline EvalSummary summarize(const std::vector<EvalRow>& rows) {
    EvalSummary s;
    s.count = static_cast<int>(rows.size());
    if (rows.empty()) return s;
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& r : rows) {
        s.mean_f_fix += r.f_fix;
        s.mean_f_best += r.f_best;
        scores.push_back(r.image_score);
        labels.push_back(r.label);
    }
    s.mean_f_fix /= s.count;
    s.mean_f_best /= s.count;
    auto m = image_level_metrics(scores, labels);
    s.auc = m.auc;
    s.acc = m.acc;
    return s;
}

inline EvalRow eval_one(const SoftMask& pred, const DataSample& d) {
    EvalRow r;
    r.id = d.id;
    r.f_fix = f_fix(pred, d.mask);
    r.f_best = f_best(pred, d.mask);
    r.image_score = image_score(pred);
    r.label = d.mask.empty_mask() ? 0 : 1;
    return r;
}

// Plain forward-pass evaluation over a dataset, optionally on distorted
// copies prepared by the caller.
inline std::vector<EvalRow> evaluate_plain(Model<float>& model, const std::vector<DataSample>& data,
                                           int threads = 2) {
    std::vector<EvalRow> rows(data.size());
    auto worker = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i)
            rows[i] = eval_one(model.predict_mask(data[i].image), data[i]);
    };
    if (threads <= 1 || data.size() < 2) {
        worker(0, data.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t per = (data.size() + threads - 1) / static_cast<std::size_t>(threads);
        for (int t = 0; t < threads; ++t) {
            const std::size_t lo = static_cast<std::size_t>(t) * per;
            if (lo >= data.size()) break;
            pool.emplace_back(worker, lo, std::min(data.size(), lo + per));
        }
        for (auto& th : pool) th.join();
    }
    return rows;
}

struct TTTEvalResult {
    std::vector<EvalRow> rows;            // with the adapted encoder
    std::vector<TTTReport> reports;       // one per image
    std::vector<double> curve_mean_f_fix; // mean F_fix per step k (record_curve only)
};

// Per-sample adaptation across a dataset. Each image adapts a private
// encoder copy, so workers are independent; per-image seeds derive from
// cfg.seed and the dataset index.
inline TTTEvalResult evaluate_with_ttt(Model<float>& model, const std::vector<DataSample>& data,
                                       const TTTConfig& cfg, int threads = 2) {
    TTTEvalResult out;
    out.rows.resize(data.size());
    out.reports.resize(data.size());
    auto worker = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            TTTConfig c = cfg;
            c.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(i));
            auto [mask, report] = predict_with_ttt(data[i].image, model, c);
            out.rows[i] = eval_one(mask, data[i]);
            out.reports[i] = std::move(report);
        }
    };
    if (threads <= 1 || data.size() < 2) {
        worker(0, data.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t per = (data.size() + threads - 1) / static_cast<std::size_t>(threads);
        for (int t = 0; t < threads; ++t) {
            const std::size_t lo = static_cast<std::size_t>(t) * per;
            if (lo >= data.size()) break;
            pool.emplace_back(worker, lo, std::min(data.size(), lo + per));
        }
        for (auto& th : pool) th.join();
    }
    if (cfg.record_curve) {
        out.curve_mean_f_fix.assign(static_cast<std::size_t>(cfg.steps) + 1, 0.0);
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto& rep = out.reports[i];
            for (std::size_t k = 0; k <= static_cast<std::size_t>(cfg.steps); ++k) {
                const SoftMask& m = rep.skipped ? rep.initial_mask : rep.curve_masks[k];
                out.curve_mean_f_fix[k] +=
                    f_fix(resize_soft(m, data[i].mask.h, data[i].mask.w), data[i].mask);
            }
        }
        for (auto& v : out.curve_mean_f_fix) v /= static_cast<double>(data.size());
    }
    return out;
}

inline void write_eval_csv(const std::filesystem::path& path, const std::vector<EvalRow>& rows) {
    std::ofstream f(path, std::ios::trunc);
    f << "id,f_fix,f_best,image_score,label\n";
    for (const auto& r : rows)
        f << r.id << "," << r.f_fix << "," << r.f_best << "," << r.image_score << "," << r.label
          << "\n";
}

// One summary line formatted like the benchmark tables: x100, one decimal.
inline std::string format_summary_line(const std::string& name, const EvalSummary& s) {
    std::ostringstream os;
    os << std::left << std::setw(24) << name << std::right << std::fixed << std::setprecision(1);
    os << std::setw(8) << s.mean_f_best * 100.0 << std::setw(8) << s.mean_f_fix * 100.0;
    if (s.auc)
        os << std::setw(8) << *s.auc * 100.0;
    else
        os << std::setw(8) << "n/a";
    os << std::setw(8) << s.acc * 100.0;
    return os.str();
}

inline std::string summary_table_header() {
    std::ostringstream os;
    os << std::left << std::setw(24) << "setting" << std::right << std::setw(8) << "F_best"
       << std::setw(8) << "F_fix" << std::setw(8) << "AUC" << std::setw(8) << "ACC";
    return os.str();
}

}  // namespace tamperlab
