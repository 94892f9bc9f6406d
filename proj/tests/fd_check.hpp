#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tamperlab/core/tensor.hpp"

namespace tamperlab::testutil {

// Central finite differences against an analytic gradient, in double.
// loss_fn re-runs the full forward pass; grads come from one backward pass
// supplied by the caller. Comparison is per-component with a relative
// denominator, plus an absolute floor for near-zero pairs.
struct FdReport {
    double max_rel_err = 0.0;
    std::string worst;
};

inline FdReport check_gradients(const std::function<double()>& loss_fn,
                                const std::vector<std::pair<std::string, Tensor<double>*>>& params,
                                const std::vector<Tensor<double>>& analytic, double h = 1e-5,
                                double abs_floor = 1e-8, int max_components = -1) {
    FdReport rep;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor<double>& p = *params[k].second;
        const std::int64_t n =
            max_components > 0 ? std::min<std::int64_t>(p.size(), max_components) : p.size();
        for (std::int64_t i = 0; i < n; ++i) {
            const double orig = p[i];
            p[i] = orig + h;
            const double lp = loss_fn();
            p[i] = orig - h;
            const double lm = loss_fn();
            p[i] = orig;
            const double fd = (lp - lm) / (2 * h);
            const double an = analytic[k][i];
            const double denom = std::max({std::abs(fd), std::abs(an), abs_floor});
            const double rel = std::abs(fd - an) / denom;
            if (std::abs(fd - an) < abs_floor) continue;  // both ~zero
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst = params[k].first + "[" + std::to_string(i) + "] fd=" + std::to_string(fd) +
                            " an=" + std::to_string(an);
            }
        }
    }
    return rep;
}

}  // namespace tamperlab::testutil
