#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "tamperlab/core/tensor.hpp"

namespace tamperlab {

// Reverse-mode autodiff on a per-use tape. A Graph owns the nodes created
// during one forward pass; Var is a cheap handle. Parameters enter a graph
// through Graph::leaf(tensor), memoized by storage identity, so the same
// parameter tensor used twice maps to one leaf and its gradient accumulates.
//
// Graphs are single-threaded. Parameter tensors are shared read-only across
// graphs; updates between steps happen outside any live graph.

template <typename T>
class Graph;

template <typename T>
struct GraphNode {
    Tensor<T> val;
    Tensor<T> grad;  // allocated on demand
    bool needs_grad = false;
    std::function<void(GraphNode*)> backward;
    std::vector<GraphNode*> parents;
    std::int64_t id = -1;

    void ensure_grad() {
        if (grad.empty()) grad = Tensor<T>::zeros(val.shape());
    }
};

template <typename T>
class Var {
public:
    Var() = default;
    Var(Graph<T>* g, GraphNode<T>* n) : graph_(g), node_(n) {}

    const Tensor<T>& val() const { return node_->val; }
    const std::vector<int>& shape() const { return node_->val.shape(); }
    int rows() const { return node_->val.rows(); }
    int cols() const { return node_->val.cols(); }
    bool valid() const { return node_ != nullptr; }

    Graph<T>* graph() const { return graph_; }
    GraphNode<T>* node() const { return node_; }

private:
    Graph<T>* graph_ = nullptr;
    GraphNode<T>* node_ = nullptr;
};

template <typename T>
class Graph {
public:
    Var<T> leaf(const Tensor<T>& t) {
        auto it = leaves_.find(t.storage_id());
        if (it != leaves_.end()) return Var<T>(this, it->second);
        GraphNode<T>* n = new_node();
        n->val = t;
        n->needs_grad = true;
        leaves_.emplace(t.storage_id(), n);
        return Var<T>(this, n);
    }

    Var<T> constant(const Tensor<T>& t) {
        GraphNode<T>* n = new_node();
        n->val = t;
        n->needs_grad = false;
        return Var<T>(this, n);
    }

    Var<T> make(Tensor<T> val, std::vector<GraphNode<T>*> parents,
                std::function<void(GraphNode<T>*)> backward) {
        GraphNode<T>* n = new_node();
        n->val = std::move(val);
        for (auto* p : parents)
            if (p->needs_grad) n->needs_grad = true;
        if (n->needs_grad) {
            n->parents = std::move(parents);
            n->backward = std::move(backward);
        }
        return Var<T>(this, n);
    }

    // Backpropagate from a scalar. Seeds d(loss)/d(loss) = seed.
    void backward(const Var<T>& loss, T seed = T(1)) {
        if (loss.val().size() != 1) throw std::invalid_argument("backward: loss must be scalar");
        std::vector<GraphNode<T>*> order = topo_from(loss.node());
        loss.node()->ensure_grad();
        loss.node()->grad[0] += seed;
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            GraphNode<T>* n = *it;
            if (n->backward && !n->grad.empty()) n->backward(n);
        }
    }

    // Gradient accumulated at the leaf wrapping `param`, or zeros if the
    // parameter never entered this graph (or no gradient reached it).
    Tensor<T> grad_of(const Tensor<T>& param) const {
        auto it = leaves_.find(param.storage_id());
        if (it == leaves_.end() || it->second->grad.empty())
            return Tensor<T>::zeros(param.shape());
        return it->second->grad;
    }

    bool has_grad(const Tensor<T>& param) const {
        auto it = leaves_.find(param.storage_id());
        return it != leaves_.end() && !it->second->grad.empty();
    }

    std::size_t node_count() const { return nodes_.size(); }

private:
    GraphNode<T>* new_node() {
        nodes_.emplace_back();
        nodes_.back().id = static_cast<std::int64_t>(nodes_.size()) - 1;
        return &nodes_.back();
    }

    std::vector<GraphNode<T>*> topo_from(GraphNode<T>* root) {
        std::vector<char> seen(nodes_.size(), 0);
        std::vector<GraphNode<T>*> order;
        std::vector<std::pair<GraphNode<T>*, std::size_t>> stack;
        stack.emplace_back(root, 0);
        seen[static_cast<std::size_t>(root->id)] = 1;
        while (!stack.empty()) {
            auto& [n, next] = stack.back();
            if (next < n->parents.size()) {
                GraphNode<T>* p = n->parents[next++];
                if (!seen[static_cast<std::size_t>(p->id)] && p->needs_grad) {
                    seen[static_cast<std::size_t>(p->id)] = 1;
                    stack.emplace_back(p, 0);
                }
            } else {
                order.push_back(n);
                stack.pop_back();
            }
        }
        return order;
    }

    std::deque<GraphNode<T>> nodes_;
    std::unordered_map<const void*, GraphNode<T>*> leaves_;
};

namespace detail {

template <typename T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using EMap = Eigen::Map<EMat<T>>;
template <typename T>
using ECMap = Eigen::Map<const EMat<T>>;

template <typename T>
ECMap<T> cmap(const Tensor<T>& t) {
    return ECMap<T>(t.ptr(), t.rows(), t.cols());
}
template <typename T>
EMap<T> mmap(Tensor<T>& t) {
    return EMap<T>(t.ptr(), t.rows(), t.cols());
}

}  // namespace detail

// ---------------- elementwise ----------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    if (a.shape() != b.shape()) throw std::invalid_argument("add: shape mismatch");
    Tensor<T> out(a.shape());
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a.val()[i] + b.val()[i];
    auto *pa = a.node(), *pb = b.node();
    return a.graph()->make(std::move(out), {pa, pb}, [pa, pb](GraphNode<T>* self) {
        for (GraphNode<T>* p : {pa, pb}) {
            if (!p->needs_grad) continue;
            p->ensure_grad();
            for (std::int64_t i = 0; i < self->grad.size(); ++i) p->grad[i] += self->grad[i];
        }
    });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    if (a.shape() != b.shape()) throw std::invalid_argument("mul: shape mismatch");
    Tensor<T> out(a.shape());
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a.val()[i] * b.val()[i];
    auto *pa = a.node(), *pb = b.node();
    return a.graph()->make(std::move(out), {pa, pb}, [pa, pb](GraphNode<T>* self) {
        if (pa->needs_grad) {
            pa->ensure_grad();
            for (std::int64_t i = 0; i < self->grad.size(); ++i)
                pa->grad[i] += self->grad[i] * pb->val[i];
        }
        if (pb->needs_grad) {
            pb->ensure_grad();
            for (std::int64_t i = 0; i < self->grad.size(); ++i)
                pb->grad[i] += self->grad[i] * pa->val[i];
        }
    });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
    Tensor<T> out(a.shape());
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a.val()[i] * s;
    auto* pa = a.node();
    return a.graph()->make(std::move(out), {pa}, [pa, s](GraphNode<T>* self) {
        pa->ensure_grad();
        for (std::int64_t i = 0; i < self->grad.size(); ++i) pa->grad[i] += self->grad[i] * s;
    });
}

// out(i, j) = a(i, j) + bias(j); bias shape (1, n) or (n).
template <typename T>
Var<T> add_bias(const Var<T>& a, const Var<T>& bias) {
    const int m = a.rows(), n = a.cols();
    if (bias.val().size() != n) throw std::invalid_argument("add_bias: width mismatch");
    Tensor<T> out(a.shape());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<std::int64_t>(i) * n + j] =
                a.val()[static_cast<std::int64_t>(i) * n + j] + bias.val()[j];
    auto *pa = a.node(), *pb = bias.node();
    return a.graph()->make(std::move(out), {pa, pb}, [pa, pb, m, n](GraphNode<T>* self) {
        if (pa->needs_grad) {
            pa->ensure_grad();
            for (std::int64_t i = 0; i < self->grad.size(); ++i) pa->grad[i] += self->grad[i];
        }
        if (pb->needs_grad) {
            pb->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    pb->grad[j] += self->grad[static_cast<std::int64_t>(i) * n + j];
        }
    });
}

// ---------------- matmul ----------------

// out = op(a) * op(b) with optional transposes, via Eigen.
template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b, bool ta = false, bool tb = false) {
    const int am = a.rows(), an = a.cols();
    const int bm = b.rows(), bn = b.cols();
    const int m = ta ? an : am, k = ta ? am : an;
    const int k2 = tb ? bn : bm, n = tb ? bm : bn;
    if (k != k2) throw std::invalid_argument("matmul: inner dims mismatch");
    Tensor<T> out({m, n});
    {
        auto A = detail::cmap(a.val());
        auto B = detail::cmap(b.val());
        auto C = detail::mmap(out);
        if (!ta && !tb) C.noalias() = A * B;
        else if (ta && !tb) C.noalias() = A.transpose() * B;
        else if (!ta && tb) C.noalias() = A * B.transpose();
        else C.noalias() = A.transpose() * B.transpose();
    }
    auto *pa = a.node(), *pb = b.node();
    return a.graph()->make(std::move(out), {pa, pb}, [pa, pb, ta, tb](GraphNode<T>* self) {
        auto G = detail::cmap(self->grad);
        if (pa->needs_grad) {
            pa->ensure_grad();
            auto dA = detail::mmap(pa->grad);
            auto B = detail::cmap(pb->val);
            // dA' = G * B'^T, then undo the transpose on A.
            if (!ta && !tb) dA.noalias() += G * B.transpose();
            else if (!ta && tb) dA.noalias() += G * B;
            else if (ta && !tb) dA.noalias() += B * G.transpose();
            else dA.noalias() += B.transpose() * G.transpose();
        }
        if (pb->needs_grad) {
            pb->ensure_grad();
            auto dB = detail::mmap(pb->grad);
            auto A = detail::cmap(pa->val);
            if (!ta && !tb) dB.noalias() += A.transpose() * G;
            else if (!ta && tb) dB.noalias() += G.transpose() * A;
            else if (ta && !tb) dB.noalias() += A * G;
            else dB.noalias() += G.transpose() * A.transpose();
        }
    });
}

// ---------------- shape ops ----------------

template <typename T>
Var<T> reshape(const Var<T>& a, std::vector<int> shape) {
    Tensor<T> out = a.val().clone().reshaped(std::move(shape));
    auto* pa = a.node();
    return a.graph()->make(std::move(out), {pa}, [pa](GraphNode<T>* self) {
        pa->ensure_grad();
        for (std::int64_t i = 0; i < self->grad.size(); ++i) pa->grad[i] += self->grad[i];
    });
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
    const int m = parts[0].rows();
    int n = 0;
    for (const auto& p : parts) {
        if (p.rows() != m) throw std::invalid_argument("concat_cols: row mismatch");
        n += p.cols();
    }
    Tensor<T> out({m, n});
    std::vector<GraphNode<T>*> nodes;
    std::vector<int> offs;
    int off = 0;
    for (const auto& p : parts) {
        const int pc = p.cols();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < pc; ++j) out.at(i, off + j) = p.val().at(i, j);
        nodes.push_back(p.node());
        offs.push_back(off);
        off += pc;
    }
    Graph<T>* g = parts[0].graph();
    return g->make(std::move(out), nodes,
                   [nodes, offs, m, n](GraphNode<T>* self) {
                       for (std::size_t t = 0; t < nodes.size(); ++t) {
                           GraphNode<T>* p = nodes[t];
                           if (!p->needs_grad) continue;
                           p->ensure_grad();
                           const int pc = p->val.cols();
                           for (int i = 0; i < m; ++i)
                               for (int j = 0; j < pc; ++j)
                                   p->grad.at(i, j) += self->grad.at(i, offs[t] + j);
                       }
                   });
}

template <typename T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
    const int n = parts[0].cols();
    int m = 0;
    for (const auto& p : parts) {
        if (p.cols() != n) throw std::invalid_argument("concat_rows: col mismatch");
        m += p.rows();
    }
    Tensor<T> out({m, n});
    std::vector<GraphNode<T>*> nodes;
    std::vector<int> offs;
    int off = 0;
    for (const auto& p : parts) {
        const int pr = p.rows();
        std::copy(p.val().ptr(), p.val().ptr() + static_cast<std::int64_t>(pr) * n,
                  out.ptr() + static_cast<std::int64_t>(off) * n);
        nodes.push_back(p.node());
        offs.push_back(off);
        off += pr;
    }
    Graph<T>* g = parts[0].graph();
    return g->make(std::move(out), nodes, [nodes, offs, n](GraphNode<T>* self) {
        for (std::size_t t = 0; t < nodes.size(); ++t) {
            GraphNode<T>* p = nodes[t];
            if (!p->needs_grad) continue;
            p->ensure_grad();
            const std::int64_t cnt = static_cast<std::int64_t>(p->val.rows()) * n;
            const T* src = self->grad.ptr() + static_cast<std::int64_t>(offs[t]) * n;
            for (std::int64_t i = 0; i < cnt; ++i) p->grad[i] += src[i];
        }
    });
}

template <typename T>
Var<T> slice_cols(const Var<T>& a, int c0, int c1) {
    const int m = a.rows(), n = a.cols();
    if (c0 < 0 || c1 > n || c0 >= c1) throw std::invalid_argument("slice_cols: bad range");
    Tensor<T> out({m, c1 - c0});
    for (int i = 0; i < m; ++i)
        for (int j = c0; j < c1; ++j) out.at(i, j - c0) = a.val().at(i, j);
    auto* pa = a.node();
    return a.graph()->make(std::move(out), {pa}, [pa, m, c0, c1](GraphNode<T>* self) {
        pa->ensure_grad();
        for (int i = 0; i < m; ++i)
            for (int j = c0; j < c1; ++j) pa->grad.at(i, j) += self->grad.at(i, j - c0);
    });
}

template <typename T>
Var<T> slice_rows(const Var<T>& a, int r0, int r1) {
    const int m = a.rows(), n = a.cols();
    if (r0 < 0 || r1 > m || r0 >= r1) throw std::invalid_argument("slice_rows: bad range");
    Tensor<T> out({r1 - r0, n});
    std::copy(a.val().ptr() + static_cast<std::int64_t>(r0) * n,
              a.val().ptr() + static_cast<std::int64_t>(r1) * n, out.ptr());
    auto* pa = a.node();
    return a.graph()->make(std::move(out), {pa}, [pa, r0, r1, n](GraphNode<T>* self) {
        pa->ensure_grad();
        const std::int64_t cnt = static_cast<std::int64_t>(r1 - r0) * n;
        for (std::int64_t i = 0; i < cnt; ++i)
            pa->grad[static_cast<std::int64_t>(r0) * n + i] += self->grad[i];
    });
}

// out row i = a row indices[i]. Selection with gradient scatter-add.
template <typename T>
Var<T> gather_rows(const Var<T>& a, std::shared_ptr<const std::vector<int>> indices) {
    const int n = a.cols();
    const int m_out = static_cast<int>(indices->size());
    Tensor<T> out({m_out, n});
    for (int i = 0; i < m_out; ++i) {
        const int src = (*indices)[static_cast<std::size_t>(i)];
        std::copy(a.val().ptr() + static_cast<std::int64_t>(src) * n,
                  a.val().ptr() + static_cast<std::int64_t>(src + 1) * n,
                  out.ptr() + static_cast<std::int64_t>(i) * n);
    }
    auto* pa = a.node();
    return a.graph()->make(std::move(out), {pa}, [pa, indices, n, m_out](GraphNode<T>* self) {
        pa->ensure_grad();
        for (int i = 0; i < m_out; ++i) {
            const int dst = (*indices)[static_cast<std::size_t>(i)];
            for (int j = 0; j < n; ++j)
                pa->grad[static_cast<std::int64_t>(dst) * n + j] +=
                    self->grad[static_cast<std::int64_t>(i) * n + j];
        }
    });
}

// out flat[i] = a flat[map[i]]. Pure rearrangement (patchify, pixel unshuffle).
template <typename T>
Var<T> gather_elems(const Var<T>& a, std::shared_ptr<const std::vector<std::int64_t>> map,
                    std::vector<int> out_shape) {
    if (static_cast<std::int64_t>(map->size()) != Tensor<T>::count(out_shape))
        throw std::invalid_argument("gather_elems: map size mismatch");
    Tensor<T> out(std::move(out_shape));
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a.val()[(*map)[static_cast<std::size_t>(i)]];
    auto* pa = a.node();
    return a.graph()->make(std::move(out), {pa}, [pa, map](GraphNode<T>* self) {
        pa->ensure_grad();
        for (std::int64_t i = 0; i < self->grad.size(); ++i)
            pa->grad[(*map)[static_cast<std::size_t>(i)]] += self->grad[i];
    });
}

// ---------------- bilinear resize ----------------

// Precomputed half-pixel-center bilinear plan over row-indexed spatial grids.
// Each output row is a convex combination of up to 4 input rows; channels
// (columns) pass through untouched.
struct BilinearPlan {
    int h_in = 0, w_in = 0, h_out = 0, w_out = 0;
    std::vector<int> idx;       // 4 per output row
    std::vector<double> coeff;  // 4 per output row, sums to 1
};

inline std::shared_ptr<const BilinearPlan> build_bilinear_plan(int h_in, int w_in, int h_out,
                                                               int w_out) {
    auto plan = std::make_shared<BilinearPlan>();
    plan->h_in = h_in;
    plan->w_in = w_in;
    plan->h_out = h_out;
    plan->w_out = w_out;
    plan->idx.resize(static_cast<std::size_t>(h_out) * w_out * 4);
    plan->coeff.resize(static_cast<std::size_t>(h_out) * w_out * 4);
    auto axis = [](int out, int in, int o) {
        double src = (o + 0.5) * static_cast<double>(in) / out - 0.5;
        if (src < 0) src = 0;
        if (src > in - 1) src = in - 1;
        int lo = static_cast<int>(std::floor(src));
        int hi = lo < in - 1 ? lo + 1 : lo;
        double f = src - lo;
        return std::tuple<int, int, double>(lo, hi, f);
    };
    for (int y = 0; y < h_out; ++y) {
        auto [y0, y1, fy] = axis(h_out, h_in, y);
        for (int x = 0; x < w_out; ++x) {
            auto [x0, x1, fx] = axis(w_out, w_in, x);
            const std::size_t base = (static_cast<std::size_t>(y) * w_out + x) * 4;
            plan->idx[base + 0] = y0 * w_in + x0;
            plan->idx[base + 1] = y0 * w_in + x1;
            plan->idx[base + 2] = y1 * w_in + x0;
            plan->idx[base + 3] = y1 * w_in + x1;
            plan->coeff[base + 0] = (1 - fy) * (1 - fx);
            plan->coeff[base + 1] = (1 - fy) * fx;
            plan->coeff[base + 2] = fy * (1 - fx);
            plan->coeff[base + 3] = fy * fx;
        }
    }
    return plan;
}

// a: (h_in*w_in, C) -> (h_out*w_out, C).
template <typename T>
Var<T> resize_rows(const Var<T>& a, std::shared_ptr<const BilinearPlan> plan) {
    const int n = a.cols();
    if (a.rows() != plan->h_in * plan->w_in) throw std::invalid_argument("resize_rows: shape mismatch");
    const int m_out = plan->h_out * plan->w_out;
    Tensor<T> out({m_out, n});
    for (int i = 0; i < m_out; ++i) {
        T* dst = out.ptr() + static_cast<std::int64_t>(i) * n;
        std::fill(dst, dst + n, T(0));
        for (int k = 0; k < 4; ++k) {
            const T w = static_cast<T>(plan->coeff[static_cast<std::size_t>(i) * 4 + k]);
            if (w == T(0)) continue;
            const T* src = a.val().ptr() +
                           static_cast<std::int64_t>(plan->idx[static_cast<std::size_t>(i) * 4 + k]) * n;
            for (int j = 0; j < n; ++j) dst[j] += w * src[j];
        }
    }
    auto* pa = a.node();
    return a.graph()->make(std::move(out), {pa}, [pa, plan, n, m_out](GraphNode<T>* self) {
        pa->ensure_grad();
        for (int i = 0; i < m_out; ++i) {
            const T* g = self->grad.ptr() + static_cast<std::int64_t>(i) * n;
            for (int k = 0; k < 4; ++k) {
                const T w = static_cast<T>(plan->coeff[static_cast<std::size_t>(i) * 4 + k]);
                if (w == T(0)) continue;
                T* dst = pa->grad.ptr() +
                         static_cast<std::int64_t>(plan->idx[static_cast<std::size_t>(i) * 4 + k]) * n;
                for (int j = 0; j < n; ++j) dst[j] += w * g[j];
            }
        }
    });
}

// ---------------- normalization & nonlinearities ----------------

template <typename T>
Var<T> layer_norm(const Var<T>& a, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-5)) {
    const int m = a.rows(), n = a.cols();
    if (gamma.val().size() != n || beta.val().size() != n)
        throw std::invalid_argument("layer_norm: affine size mismatch");
    Tensor<T> out({m, n});
    auto xhat = std::make_shared<Tensor<T>>(std::vector<int>{m, n});
    auto inv_std = std::make_shared<std::vector<T>>(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        const T* x = a.val().ptr() + static_cast<std::int64_t>(i) * n;
        T mean = 0;
        for (int j = 0; j < n; ++j) mean += x[j];
        mean /= static_cast<T>(n);
        T var = 0;
        for (int j = 0; j < n; ++j) var += (x[j] - mean) * (x[j] - mean);
        var /= static_cast<T>(n);
        const T is = T(1) / std::sqrt(var + eps);
        (*inv_std)[static_cast<std::size_t>(i)] = is;
        for (int j = 0; j < n; ++j) {
            const T xh = (x[j] - mean) * is;
            xhat->at(i, j) = xh;
            out.at(i, j) = gamma.val()[j] * xh + beta.val()[j];
        }
    }
    auto *pa = a.node(), *pg = gamma.node(), *pb = beta.node();
    return a.graph()->make(
        std::move(out), {pa, pg, pb}, [pa, pg, pb, xhat, inv_std, m, n](GraphNode<T>* self) {
            if (pg->needs_grad) pg->ensure_grad();
            if (pb->needs_grad) pb->ensure_grad();
            if (pa->needs_grad) pa->ensure_grad();
            for (int i = 0; i < m; ++i) {
                const T* g = self->grad.ptr() + static_cast<std::int64_t>(i) * n;
                const T* xh = xhat->ptr() + static_cast<std::int64_t>(i) * n;
                if (pg->needs_grad)
                    for (int j = 0; j < n; ++j) pg->grad[j] += g[j] * xh[j];
                if (pb->needs_grad)
                    for (int j = 0; j < n; ++j) pb->grad[j] += g[j];
                if (pa->needs_grad) {
                    // dx = (gy - mean(gy) - xhat * mean(gy*xhat)) * inv_std
                    T mean_gy = 0, mean_gyx = 0;
                    for (int j = 0; j < n; ++j) {
                        const T gy = g[j] * pg->val[j];
                        mean_gy += gy;
                        mean_gyx += gy * xh[j];
                    }
                    mean_gy /= static_cast<T>(n);
                    mean_gyx /= static_cast<T>(n);
                    const T is = (*inv_std)[static_cast<std::size_t>(i)];
                    for (int j = 0; j < n; ++j) {
                        const T gy = g[j] * pg->val[j];
                        pa->grad[static_cast<std::int64_t>(i) * n + j] +=
                            (gy - mean_gy - xh[j] * mean_gyx) * is;
                    }
                }
            }
        });
}

template <typename T>
Var<T> softmax_rows(const Var<T>& a) {
    const int m = a.rows(), n = a.cols();
    Tensor<T> out({m, n});
    for (int i = 0; i < m; ++i) {
        const T* x = a.val().ptr() + static_cast<std::int64_t>(i) * n;
        T* y = out.ptr() + static_cast<std::int64_t>(i) * n;
        T mx = x[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, x[j]);
        T sum = 0;
        for (int j = 0; j < n; ++j) {
            y[j] = std::exp(x[j] - mx);
            sum += y[j];
        }
        for (int j = 0; j < n; ++j) y[j] /= sum;
    }
    auto* pa = a.node();
    return a.graph()->make(std::move(out), {pa}, [pa, m, n](GraphNode<T>* self) {
        pa->ensure_grad();
        for (int i = 0; i < m; ++i) {
            const T* g = self->grad.ptr() + static_cast<std::int64_t>(i) * n;
            const T* y = self->val.ptr() + static_cast<std::int64_t>(i) * n;
            T dot = 0;
            for (int j = 0; j < n; ++j) dot += g[j] * y[j];
            for (int j = 0; j < n; ++j)
                pa->grad[static_cast<std::int64_t>(i) * n + j] += y[j] * (g[j] - dot);
        }
    });
}

// tanh-approximation GELU.
template <typename T>
Var<T> gelu(const Var<T>& a) {
    constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
    constexpr double kA = 0.044715;
    Tensor<T> out(a.shape());
    for (std::int64_t i = 0; i < out.size(); ++i) {
        const T x = a.val()[i];
        const T t = std::tanh(static_cast<T>(kC) * (x + static_cast<T>(kA) * x * x * x));
        out[i] = T(0.5) * x * (T(1) + t);
    }
    auto* pa = a.node();
    return a.graph()->make(std::move(out), {pa}, [pa](GraphNode<T>* self) {
        pa->ensure_grad();
        for (std::int64_t i = 0; i < self->grad.size(); ++i) {
            const T x = pa->val[i];
            const T u = static_cast<T>(kC) * (x + static_cast<T>(kA) * x * x * x);
            const T t = std::tanh(u);
            const T du = static_cast<T>(kC) * (T(1) + T(3) * static_cast<T>(kA) * x * x);
            const T d = T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t * t) * du;
            pa->grad[i] += self->grad[i] * d;
        }
    });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
    Tensor<T> out(a.shape());
    for (std::int64_t i = 0; i < out.size(); ++i) {
        const T x = a.val()[i];
        out[i] = x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                           : std::exp(x) / (T(1) + std::exp(x));
    }
    auto* pa = a.node();
    return a.graph()->make(std::move(out), {pa}, [pa](GraphNode<T>* self) {
        pa->ensure_grad();
        for (std::int64_t i = 0; i < self->grad.size(); ++i) {
            const T y = self->val[i];
            pa->grad[i] += self->grad[i] * y * (T(1) - y);
        }
    });
}

// ---------------- reductions & losses ----------------

template <typename T>
Var<T> mean_all(const Var<T>& a) {
    T sum = 0;
    for (std::int64_t i = 0; i < a.val().size(); ++i) sum += a.val()[i];
    const T inv_n = T(1) / static_cast<T>(a.val().size());
    Tensor<T> out = Tensor<T>::scalar(sum * inv_n);
    auto* pa = a.node();
    return a.graph()->make(std::move(out), {pa}, [pa, inv_n](GraphNode<T>* self) {
        pa->ensure_grad();
        const T g = self->grad[0] * inv_n;
        for (std::int64_t i = 0; i < pa->grad.size(); ++i) pa->grad[i] += g;
    });
}

// Mean binary cross-entropy against a constant target, with the prediction
// clamped to [eps, 1-eps]. Gradient is zero where the clamp is active.
template <typename T>
Var<T> bce_mean(const Var<T>& pred, const Tensor<T>& target, T eps = T(1e-7)) {
    if (pred.val().size() != target.size())
        throw std::invalid_argument("bce_mean: shape mismatch");
    const std::int64_t n = pred.val().size();
    T loss = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        T p = std::min(std::max(pred.val()[i], eps), T(1) - eps);
        const T t = target[i];
        loss -= t * std::log(p) + (T(1) - t) * std::log(T(1) - p);
    }
    loss /= static_cast<T>(n);
    auto* pp = pred.node();
    Tensor<T> tgt = target;
    return pred.graph()->make(Tensor<T>::scalar(loss), {pp}, [pp, tgt, eps, n](GraphNode<T>* self) {
        pp->ensure_grad();
        const T g = self->grad[0] / static_cast<T>(n);
        for (std::int64_t i = 0; i < n; ++i) {
            const T praw = pp->val[i];
            if (praw < eps || praw > T(1) - eps) continue;
            const T t = tgt[i];
            pp->grad[i] += g * (-t / praw + (T(1) - t) / (T(1) - praw));
        }
    });
}

}  // namespace tamperlab
