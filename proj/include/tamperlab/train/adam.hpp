#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "tamperlab/core/tensor.hpp"

namespace tamperlab {

template <typename T>
struct AdamState {
    std::vector<Tensor<T>> m, v;
    long step = 0;

    void init_like(const std::vector<Tensor<T>*>& params) {
        m.clear();
        v.clear();
        for (const auto* p : params) {
            m.push_back(Tensor<T>::zeros(p->shape()));
            v.push_back(Tensor<T>::zeros(p->shape()));
        }
        step = 0;
    }
    bool initialized() const { return !m.empty(); }
};

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double grad_clip = 1.0;  // global L2 norm; <= 0 disables
};

// One update over a parameter list with matching gradient tensors. Gradients
// are clipped by global norm before the moment update.
template <typename T>
void adam_step(const std::vector<Tensor<T>*>& params, std::vector<Tensor<T>>& grads,
               AdamState<T>& st, double lr, const AdamOptions& opt = {}) {
    if (!st.initialized()) st.init_like(params);
    if (params.size() != grads.size() || params.size() != st.m.size())
        throw std::invalid_argument("adam: state/parameter count mismatch");

    if (opt.grad_clip > 0) {
        double sq = 0;
        for (const auto& gt : grads)
            for (std::int64_t i = 0; i < gt.size(); ++i)
                sq += static_cast<double>(gt[i]) * static_cast<double>(gt[i]);
        const double norm = std::sqrt(sq);
        if (norm > opt.grad_clip) {
            const T s = static_cast<T>(opt.grad_clip / norm);
            for (auto& gt : grads)
                for (std::int64_t i = 0; i < gt.size(); ++i) gt[i] *= s;
        }
    }

    ++st.step;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(st.step));
    const T b1 = static_cast<T>(opt.beta1), b2 = static_cast<T>(opt.beta2);
    const T one_m_b1 = static_cast<T>(1.0 - opt.beta1), one_m_b2 = static_cast<T>(1.0 - opt.beta2);
    const T alpha = static_cast<T>(lr * std::sqrt(bc2) / bc1);
    const T eps = static_cast<T>(opt.eps * std::sqrt(bc2));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor<T>& p = *params[k];
        const Tensor<T>& gt = grads[k];
        Tensor<T>& m = st.m[k];
        Tensor<T>& v = st.v[k];
        for (std::int64_t i = 0; i < p.size(); ++i) {
            m[i] = b1 * m[i] + one_m_b1 * gt[i];
            v[i] = b2 * v[i] + one_m_b2 * gt[i] * gt[i];
            p[i] -= alpha * m[i] / (std::sqrt(v[i]) + eps);
        }
    }
}

}  // namespace tamperlab
