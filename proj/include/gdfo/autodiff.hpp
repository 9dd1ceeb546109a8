#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "gdfo/errors.hpp"
#include "gdfo/random.hpp"

namespace gdfo {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// One tape entry. The tape is the DAG itself: nodes are created in forward
// order, each holding its parents and the closure that scatters the output
// gradient back into them. Leaves have no parents.
struct TapeNode {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // sized on first accumulation, kept until cleared
    bool requires_grad = false;
    bool consumed = false;  // set by backward(); reusing a consumed entry is an error
    const char* op = "leaf";
    std::vector<std::shared_ptr<TapeNode>> parents;
    std::function<void(TapeNode&)> backprop;

    void accumulate(const std::vector<double>& g) {
        if (grad.empty()) grad.assign(value.size(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
    }
};

// Value-semantics handle to a tape node. Copying a Tensor aliases the node,
// like the usual define-by-run autograd handles.
class Tensor {
  public:
    Tensor() : node_(std::make_shared<TapeNode>()) {}

    static Tensor from(Shape shape, std::vector<double> data) {
        if (shape_numel(shape) != data.size())
            throw DimensionError("tensor: shape " + shape_str(shape) + " does not match " +
                                 std::to_string(data.size()) + " values");
        Tensor t;
        t.node_->shape = std::move(shape);
        t.node_->value = std::move(data);
        return t;
    }

    static Tensor zeros(Shape shape) {
        std::vector<double> d(shape_numel(shape), 0.0);
        return from(std::move(shape), std::move(d));
    }

    static Tensor scalar(double v) { return from({}, {v}); }

    static Tensor randn(Shape shape, RandomEngine& rng, double stddev = 1.0) {
        std::vector<double> d(shape_numel(shape));
        for (auto& x : d) x = rng.normal(0.0, stddev);
        return from(std::move(shape), std::move(d));
    }

    const Shape& shape() const { return node_->shape; }
    std::size_t size() const { return node_->value.size(); }
    std::size_t rank() const { return node_->shape.size(); }

    const std::vector<double>& values() const { return node_->value; }
    std::vector<double>& mutable_values() { return node_->value; }
    double at(std::size_t i) const { return node_->value[i]; }

    double item() const {
        if (size() != 1) throw ContractError("item(): tensor is not scalar, shape " + shape_str(shape()));
        return node_->value[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    Tensor& set_requires_grad(bool on) {
        node_->requires_grad = on;
        return *this;
    }

    // Copying a Tensor aliases the node; clone() detaches into a fresh leaf.
    Tensor clone() const { return from(shape(), values()); }

    bool has_grad() const { return !node_->grad.empty(); }
    const std::vector<double>& grad() const {
        if (node_->grad.empty())
            throw ContractError(std::string("grad(): no gradient populated for '") + node_->op + "' tensor");
        return node_->grad;
    }
    void clear_grad() { node_->grad.clear(); }

    std::shared_ptr<TapeNode> node() const { return node_; }

  private:
    std::shared_ptr<TapeNode> node_;
};

namespace detail {

inline Tensor make_op(const char* op, Shape shape, std::vector<double> value,
                      std::vector<Tensor> parents, std::function<void(TapeNode&)> backprop) {
    Tensor out = Tensor::from(std::move(shape), std::move(value));
    bool needs_grad = false;
    for (const auto& p : parents) needs_grad |= p.requires_grad();
    if (needs_grad) {
        auto n = out.node();
        n->requires_grad = true;
        n->op = op;
        n->parents.reserve(parents.size());
        for (const auto& p : parents) n->parents.push_back(p.node());
        n->backprop = std::move(backprop);
    }
    return out;
}

inline void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
}

// Shared stable-softmax kernel so every softmax in the project (tensor op,
// teacher-side plain evaluation) produces bit-identical values.
inline void softmax_kernel(const double* x, double* y, std::size_t n) {
    double mx = x[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, x[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = std::exp(x[i] - mx);
        sum += y[i];
    }
    for (std::size_t i = 0; i < n; ++i) y[i] /= sum;
}

}  // namespace detail

inline std::vector<double> softmax_values(const std::vector<double>& x) {
    std::vector<double> y(x.size());
    if (!x.empty()) detail::softmax_kernel(x.data(), y.data(), x.size());
    return y;
}

// ---------------------------------------------------------------------------
// Primitives. Elementwise ops require equal shapes except for the documented
// leading-dimension broadcast: [m,n] op [n] applies the 1-D operand per row.
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) {
        std::vector<double> v(a.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.at(i) + b.at(i);
        return detail::make_op("add", a.shape(), std::move(v), {a, b}, [](TapeNode& n) {
            if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad);
            if (n.parents[1]->requires_grad) n.parents[1]->accumulate(n.grad);
        });
    }
    if (a.rank() == 2 && b.rank() == 1 && a.shape()[1] == b.shape()[0]) {
        const std::size_t rows = a.shape()[0], cols = a.shape()[1];
        std::vector<double> v(a.size());
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) v[r * cols + c] = a.at(r * cols + c) + b.at(c);
        return detail::make_op("add", a.shape(), std::move(v), {a, b}, [rows, cols](TapeNode& n) {
            if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad);
            if (n.parents[1]->requires_grad) {
                std::vector<double> gb(cols, 0.0);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < cols; ++c) gb[c] += n.grad[r * cols + c];
                n.parents[1]->accumulate(gb);
            }
        });
    }
    throw DimensionError("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::check_same_shape("sub", a, b);
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.at(i) - b.at(i);
    return detail::make_op("sub", a.shape(), std::move(v), {a, b}, [](TapeNode& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad);
        if (n.parents[1]->requires_grad) {
            std::vector<double> g(n.grad.size());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = -n.grad[i];
            n.parents[1]->accumulate(g);
        }
    });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::check_same_shape("mul", a, b);
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.at(i) * b.at(i);
    return detail::make_op("mul", a.shape(), std::move(v), {a, b}, [](TapeNode& n) {
        if (n.parents[0]->requires_grad) {
            std::vector<double> g(n.grad.size());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = n.grad[i] * n.parents[1]->value[i];
            n.parents[0]->accumulate(g);
        }
        if (n.parents[1]->requires_grad) {
            std::vector<double> g(n.grad.size());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = n.grad[i] * n.parents[0]->value[i];
            n.parents[1]->accumulate(g);
        }
    });
}

inline Tensor scale(const Tensor& a, double c) {
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.at(i) * c;
    return detail::make_op("scale", a.shape(), std::move(v), {a}, [c](TapeNode& n) {
        if (!n.parents[0]->requires_grad) return;
        std::vector<double> g(n.grad.size());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = n.grad[i] * c;
        n.parents[0]->accumulate(g);
    });
}

// matmul supports [m,k]x[k,n] -> [m,n], [k]x[k,n] -> [n] and [m,k]x[k] -> [m].
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    const bool a_vec = a.rank() == 1, b_vec = b.rank() == 1;
    if ((a.rank() != 1 && a.rank() != 2) || (b.rank() != 1 && b.rank() != 2))
        throw DimensionError("matmul: operands must be rank 1 or 2, got " +
                             shape_str(a.shape()) + " and " + shape_str(b.shape()));
    const std::size_t m = a_vec ? 1 : a.shape()[0];
    const std::size_t k = a_vec ? a.shape()[0] : a.shape()[1];
    const std::size_t k2 = b_vec ? b.shape()[0] : b.shape()[0];
    const std::size_t n = b_vec ? 1 : b.shape()[1];
    if (k != k2)
        throw DimensionError("matmul: inner dimensions differ, " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    std::vector<double> v(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a.at(i * k + p);
            for (std::size_t j = 0; j < n; ++j) v[i * n + j] += av * b.at(p * n + j);
        }
    Shape out_shape;
    if (a_vec && b_vec)
        out_shape = {};
    else if (a_vec)
        out_shape = {n};
    else if (b_vec)
        out_shape = {m};
    else
        out_shape = {m, n};
    return detail::make_op("matmul", std::move(out_shape), std::move(v), {a, b},
                           [m, k, n](TapeNode& nd) {
                               const auto& g = nd.grad;
                               const auto& av = nd.parents[0]->value;
                               const auto& bv = nd.parents[1]->value;
                               if (nd.parents[0]->requires_grad) {
                                   std::vector<double> ga(m * k, 0.0);
                                   for (std::size_t i = 0; i < m; ++i)
                                       for (std::size_t j = 0; j < n; ++j) {
                                           const double gv = g[i * n + j];
                                           for (std::size_t p = 0; p < k; ++p)
                                               ga[i * k + p] += gv * bv[p * n + j];
                                       }
                                   nd.parents[0]->accumulate(ga);
                               }
                               if (nd.parents[1]->requires_grad) {
                                   std::vector<double> gb(k * n, 0.0);
                                   for (std::size_t i = 0; i < m; ++i)
                                       for (std::size_t p = 0; p < k; ++p) {
                                           const double av_ip = av[i * k + p];
                                           for (std::size_t j = 0; j < n; ++j)
                                               gb[p * n + j] += av_ip * g[i * n + j];
                                       }
                                   nd.parents[1]->accumulate(gb);
                               }
                           });
}

inline Tensor relu(const Tensor& a) {
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.at(i) > 0.0 ? a.at(i) : 0.0;
    return detail::make_op("relu", a.shape(), std::move(v), {a}, [](TapeNode& n) {
        if (!n.parents[0]->requires_grad) return;
        std::vector<double> g(n.grad.size());
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] = n.parents[0]->value[i] > 0.0 ? n.grad[i] : 0.0;
        n.parents[0]->accumulate(g);
    });
}

inline Tensor tanh(const Tensor& a) {
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::tanh(a.at(i));
    return detail::make_op("tanh", a.shape(), std::move(v), {a}, [](TapeNode& n) {
        if (!n.parents[0]->requires_grad) return;
        std::vector<double> g(n.grad.size());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = n.grad[i] * (1.0 - n.value[i] * n.value[i]);
        n.parents[0]->accumulate(g);
    });
}

// Row-wise stable softmax over the last dimension (the whole vector for rank 1).
inline Tensor softmax(const Tensor& a) {
    if (a.rank() == 0 || a.size() == 0)
        throw DimensionError("softmax: needs at least one element, got shape " + shape_str(a.shape()));
    const std::size_t cols = a.shape().back();
    const std::size_t rows = a.size() / cols;
    std::vector<double> v(a.size());
    for (std::size_t r = 0; r < rows; ++r)
        detail::softmax_kernel(a.values().data() + r * cols, v.data() + r * cols, cols);
    return detail::make_op("softmax", a.shape(), std::move(v), {a}, [rows, cols](TapeNode& n) {
        if (!n.parents[0]->requires_grad) return;
        std::vector<double> g(n.grad.size());
        for (std::size_t r = 0; r < rows; ++r) {
            const double* y = n.value.data() + r * cols;
            const double* gy = n.grad.data() + r * cols;
            double dot = 0.0;
            for (std::size_t i = 0; i < cols; ++i) dot += gy[i] * y[i];
            for (std::size_t i = 0; i < cols; ++i) g[r * cols + i] = y[i] * (gy[i] - dot);
        }
        n.parents[0]->accumulate(g);
    });
}

inline Tensor log(const Tensor& a) {
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::log(a.at(i));
    return detail::make_op("log", a.shape(), std::move(v), {a}, [](TapeNode& n) {
        if (!n.parents[0]->requires_grad) return;
        std::vector<double> g(n.grad.size());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = n.grad[i] / n.parents[0]->value[i];
        n.parents[0]->accumulate(g);
    });
}

inline Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.at(i);
    return detail::make_op("sum", {}, {s}, {a}, [](TapeNode& n) {
        if (!n.parents[0]->requires_grad) return;
        std::vector<double> g(n.parents[0]->value.size(), n.grad[0]);
        n.parents[0]->accumulate(g);
    });
}

inline Tensor mean(const Tensor& a) {
    if (a.size() == 0) throw DimensionError("mean: empty tensor");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.at(i);
    const double inv = 1.0 / static_cast<double>(a.size());
    return detail::make_op("mean", {}, {s * inv}, {a}, [inv](TapeNode& n) {
        if (!n.parents[0]->requires_grad) return;
        std::vector<double> g(n.parents[0]->value.size(), n.grad[0] * inv);
        n.parents[0]->accumulate(g);
    });
}

// Mean over rows: [m,n] -> [n]. This is the pooling used by both encoders.
inline Tensor mean_rows(const Tensor& a) {
    if (a.rank() != 2) throw DimensionError("mean_rows: expects rank 2, got " + shape_str(a.shape()));
    const std::size_t rows = a.shape()[0], cols = a.shape()[1];
    if (rows == 0) throw DimensionError("mean_rows: zero rows");
    std::vector<double> v(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) v[c] += a.at(r * cols + c);
    const double inv = 1.0 / static_cast<double>(rows);
    for (auto& x : v) x *= inv;
    return detail::make_op("mean_rows", {cols}, std::move(v), {a}, [rows, cols, inv](TapeNode& n) {
        if (!n.parents[0]->requires_grad) return;
        std::vector<double> g(rows * cols);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] = n.grad[c] * inv;
        n.parents[0]->accumulate(g);
    });
}

inline Tensor concat_rows(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[1])
        throw DimensionError("concat: incompatible shapes " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()));
    const std::size_t cols = a.shape()[1];
    std::vector<double> v;
    v.reserve(a.size() + b.size());
    v.insert(v.end(), a.values().begin(), a.values().end());
    v.insert(v.end(), b.values().begin(), b.values().end());
    const std::size_t na = a.size();
    return detail::make_op("concat", {a.shape()[0] + b.shape()[0], cols}, std::move(v), {a, b},
                           [na](TapeNode& n) {
                               if (n.parents[0]->requires_grad)
                                   n.parents[0]->accumulate({n.grad.begin(),
                                                             n.grad.begin() + static_cast<long>(na)});
                               if (n.parents[1]->requires_grad)
                                   n.parents[1]->accumulate({n.grad.begin() + static_cast<long>(na),
                                                             n.grad.end()});
                           });
}

// Rows [r0, r1) of a rank-2 tensor.
inline Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t r1) {
    if (a.rank() != 2) throw DimensionError("slice: expects rank 2, got " + shape_str(a.shape()));
    if (r0 > r1 || r1 > a.shape()[0])
        throw DimensionError("slice: rows [" + std::to_string(r0) + "," + std::to_string(r1) +
                             ") out of range for " + shape_str(a.shape()));
    const std::size_t cols = a.shape()[1];
    std::vector<double> v(a.values().begin() + static_cast<long>(r0 * cols),
                          a.values().begin() + static_cast<long>(r1 * cols));
    return detail::make_op("slice", {r1 - r0, cols}, std::move(v), {a}, [r0, cols](TapeNode& n) {
        if (!n.parents[0]->requires_grad) return;
        std::vector<double> g(n.parents[0]->value.size(), 0.0);
        for (std::size_t i = 0; i < n.grad.size(); ++i) g[r0 * cols + i] = n.grad[i];
        n.parents[0]->accumulate(g);
    });
}

// Gather: rows of a rank-2 tensor (embedding lookup) or elements of a rank-1
// tensor (label-word selection). Backward scatter-adds, so repeated ids work.
inline Tensor take_rows(const Tensor& a, const std::vector<int>& ids) {
    if (a.rank() == 1) {
        std::vector<double> v(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= a.shape()[0])
                throw DimensionError("take: index " + std::to_string(ids[i]) +
                                     " out of range for " + shape_str(a.shape()));
            v[i] = a.at(static_cast<std::size_t>(ids[i]));
        }
        return detail::make_op("take", {ids.size()}, std::move(v), {a}, [ids](TapeNode& n) {
            if (!n.parents[0]->requires_grad) return;
            std::vector<double> g(n.parents[0]->value.size(), 0.0);
            for (std::size_t i = 0; i < ids.size(); ++i)
                g[static_cast<std::size_t>(ids[i])] += n.grad[i];
            n.parents[0]->accumulate(g);
        });
    }
    if (a.rank() != 2) throw DimensionError("take: expects rank 1 or 2, got " + shape_str(a.shape()));
    const std::size_t cols = a.shape()[1];
    std::vector<double> v(ids.size() * cols);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= a.shape()[0])
            throw DimensionError("take: row " + std::to_string(ids[i]) + " out of range for " +
                                 shape_str(a.shape()));
        const auto* src = a.values().data() + static_cast<std::size_t>(ids[i]) * cols;
        std::copy(src, src + cols, v.data() + i * cols);
    }
    return detail::make_op("take", {ids.size(), cols}, std::move(v), {a}, [ids, cols](TapeNode& n) {
        if (!n.parents[0]->requires_grad) return;
        std::vector<double> g(n.parents[0]->value.size(), 0.0);
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (std::size_t c = 0; c < cols; ++c)
                g[static_cast<std::size_t>(ids[i]) * cols + c] += n.grad[i * cols + c];
        n.parents[0]->accumulate(g);
    });
}

// Free reinterpretation of the value buffer; gradient passes through.
inline Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.size())
        throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                             shape_str(shape));
    return detail::make_op("reshape", std::move(shape), a.values(), {a}, [](TapeNode& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad);
    });
}

inline Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw DimensionError("transpose: expects rank 2, got " + shape_str(a.shape()));
    const std::size_t rows = a.shape()[0], cols = a.shape()[1];
    std::vector<double> v(a.size());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) v[c * rows + r] = a.at(r * cols + c);
    return detail::make_op("transpose", {cols, rows}, std::move(v), {a}, [rows, cols](TapeNode& n) {
        if (!n.parents[0]->requires_grad) return;
        std::vector<double> g(n.grad.size());
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] = n.grad[c * rows + r];
        n.parents[0]->accumulate(g);
    });
}

// ---------------------------------------------------------------------------
// backward / optimizer
// ---------------------------------------------------------------------------

// Reverse pass from a scalar loss. Gradients accumulate into every
// requires_grad ancestor; the traversed graph is consumed and cannot be
// backward()ed through again.
inline void backward(const Tensor& loss) {
    if (loss.size() != 1)
        throw ContractError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
    if (!loss.requires_grad()) return;  // constant loss: nothing reachable, no-op

    // Postorder DFS gives a topological order with parents first.
    std::vector<TapeNode*> order;
    std::unordered_set<TapeNode*> seen;
    std::vector<std::pair<TapeNode*, std::size_t>> stack{{loss.node().get(), 0}};
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TapeNode* parent = node->parents[next++].get();
            if (seen.insert(parent).second) stack.push_back({parent, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (TapeNode* n : order)
        if (!n->parents.empty() && n->consumed)
            throw UsageError(std::string("backward: tape entry '") + n->op +
                             "' already consumed by a previous backward pass");

    loss.node()->accumulate({1.0});
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TapeNode* n = *it;
        if (n->parents.empty()) continue;
        if (!n->grad.empty() && n->backprop) n->backprop(*n);
        n->consumed = true;
    }
    // Intermediate grads are only transport; drop them so leaves keep theirs.
    for (TapeNode* n : order)
        if (!n->parents.empty()) n->grad.clear();
}

// One plain SGD step: param -= lr * grad, then the grad buffer is cleared.
// A second step without a fresh backward() is a contract error.
inline void sgd_step(std::vector<Tensor>& params, double lr) {
    for (auto& p : params)
        if (!p.has_grad())
            throw ContractError(std::string("sgd_step: parameter '") + p.node()->op +
                                "' has no populated gradient");
    for (auto& p : params) {
        auto& v = p.mutable_values();
        const auto& g = p.grad();
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
        p.clear_grad();
    }
}

}  // namespace gdfo
