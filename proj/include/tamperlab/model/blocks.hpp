#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "tamperlab/core/autograd.hpp"
#include "tamperlab/core/rng.hpp"
#include "tamperlab/core/tensor.hpp"

namespace tamperlab {

template <typename T>
using ParamFn = std::function<void(const std::string&, Tensor<T>&)>;

template <typename T>
Tensor<T> init_normal(std::vector<int> shape, Prng& rng, double stddev = 0.02) {
    Tensor<T> t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.normal(0.0, stddev));
    return t;
}

// Fan-balanced init for (in, out) weight matrices; keeps activation scale
// roughly constant through depth.
template <typename T>
Tensor<T> init_linear(int fan_in, int fan_out, Prng& rng) {
    return init_normal<T>({fan_in, fan_out}, rng,
                          std::sqrt(2.0 / (static_cast<double>(fan_in) + fan_out)));
}

// Pre-LN transformer block: x + MHSA(LN(x)), then x + MLP(LN(x)).
template <typename T>
struct TransformerBlock {
    int dim = 0, heads = 1, hidden = 0;
    Tensor<T> ln1_g, ln1_b, w_qkv, b_qkv, w_o, b_o;
    Tensor<T> ln2_g, ln2_b, w_1, b_1, w_2, b_2;

    void init(int d, int n_heads, int mlp_hidden, Prng& rng) {
        dim = d;
        heads = n_heads;
        hidden = mlp_hidden;
        ln1_g = Tensor<T>::full({d}, T(1));
        ln1_b = Tensor<T>::zeros({d});
        w_qkv = init_linear<T>(d, 3 * d, rng);
        b_qkv = Tensor<T>::zeros({3 * d});
        w_o = init_linear<T>(d, d, rng);
        b_o = Tensor<T>::zeros({d});
        ln2_g = Tensor<T>::full({d}, T(1));
        ln2_b = Tensor<T>::zeros({d});
        w_1 = init_linear<T>(d, hidden, rng);
        b_1 = Tensor<T>::zeros({hidden});
        w_2 = init_linear<T>(hidden, d, rng);
        b_2 = Tensor<T>::zeros({d});
    }

    Var<T> forward(Graph<T>& g, const Var<T>& x) const {
        Var<T> h = layer_norm(x, g.leaf(ln1_g), g.leaf(ln1_b));
        Var<T> qkv = add_bias(matmul(h, g.leaf(w_qkv)), g.leaf(b_qkv));
        const int dh = dim / heads;
        const T att_scale = T(1) / static_cast<T>(std::sqrt(static_cast<double>(dh)));
        std::vector<Var<T>> head_outs;
        head_outs.reserve(static_cast<std::size_t>(heads));
        for (int i = 0; i < heads; ++i) {
            Var<T> q = slice_cols(qkv, i * dh, (i + 1) * dh);
            Var<T> k = slice_cols(qkv, dim + i * dh, dim + (i + 1) * dh);
            Var<T> v = slice_cols(qkv, 2 * dim + i * dh, 2 * dim + (i + 1) * dh);
            Var<T> att = softmax_rows(scale(matmul(q, k, false, true), att_scale));
            head_outs.push_back(matmul(att, v));
        }
        Var<T> o = heads == 1 ? head_outs[0] : concat_cols(head_outs);
        o = add_bias(matmul(o, g.leaf(w_o)), g.leaf(b_o));
        Var<T> y = add(x, o);
        Var<T> h2 = layer_norm(y, g.leaf(ln2_g), g.leaf(ln2_b));
        Var<T> m = add_bias(matmul(h2, g.leaf(w_1)), g.leaf(b_1));
        m = add_bias(matmul(gelu(m), g.leaf(w_2)), g.leaf(b_2));
        return add(y, m);
    }

    void visit_params(const std::string& prefix, const ParamFn<T>& fn) {
        fn(prefix + ".ln1.g", ln1_g);
        fn(prefix + ".ln1.b", ln1_b);
        fn(prefix + ".attn.w_qkv", w_qkv);
        fn(prefix + ".attn.b_qkv", b_qkv);
        fn(prefix + ".attn.w_o", w_o);
        fn(prefix + ".attn.b_o", b_o);
        fn(prefix + ".ln2.g", ln2_g);
        fn(prefix + ".ln2.b", ln2_b);
        fn(prefix + ".mlp.w_1", w_1);
        fn(prefix + ".mlp.b_1", b_1);
        fn(prefix + ".mlp.w_2", w_2);
        fn(prefix + ".mlp.b_2", b_2);
    }
};

}  // namespace tamperlab
