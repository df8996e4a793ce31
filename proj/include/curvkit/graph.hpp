#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "curvkit/activations.hpp"
#include "curvkit/kernels.hpp"
#include "curvkit/tensor.hpp"

namespace curvkit {

// Reverse-mode tape over a small set of tensor primitives, sufficient for
// the MLP stack and the quadratic/cubic test losses. Nodes are recorded in
// topological order (parents strictly before children) and replay
// bit-exactly. Differentiation is implemented once, generically over the
// scalar type: double for values/gradients, Dual<double> for
// forward-over-reverse HVPs, Dual<Dual<double>> for the third-order
// contraction needed by trace-penalty updates.

enum class Op : std::uint8_t {
    Param,      // the flattened parameter vector (one per graph)
    Const,      // constant tensor
    SliceMat,   // view of a param range as an r x c matrix
    MatMul,     // A (r x k) * B (k x c); vector B acts as a column
    Add,        // elementwise, same shape
    AddColVec,  // matrix + column vector broadcast over columns
    Sub,
    Scale,      // alpha * a
    Dot,        // <a, b> -> scalar
    Sum,        // sum of entries -> scalar
    CwiseMul,   // Hadamard product
    Act,        // elementwise activation
    MseLoss,    // batch-mean 0.5 * ||z_b - y_b||^2 over columns
    CeLoss,     // batch-mean cross-entropy from logits, integer labels
};

struct Node {
    Op op;
    int a = -1, b = -1;               // parent indices
    std::vector<std::size_t> shape;   // output shape
    double alpha = 0.0;               // Scale
    std::size_t offset = 0;           // SliceMat
    ActivationSpec act;               // Act
    Tensor value;                     // Const payload / MseLoss targets
    std::vector<int> labels;          // CeLoss class indices (one per column)
    std::string tag;                  // used in error messages
};

class Graph {
  public:
    int param(std::size_t n);
    int constant(Tensor t, std::string tag = {});
    int slice_mat(int p, std::size_t offset, std::size_t r, std::size_t c, std::string tag = {});
    int matmul(int a, int b, std::string tag = {});
    int add(int a, int b);
    int add_colvec(int m, int v);
    int sub(int a, int b);
    int scale(int a, double alpha);
    int dot(int a, int b);
    int sum(int a);
    int cwise_mul(int a, int b);
    int activation(int a, ActivationSpec spec);
    int mse_loss(int z, Tensor targets);
    int ce_loss(int z, std::vector<int> labels);

    const Node& node(int i) const { return nodes_[i]; }
    std::size_t num_nodes() const { return nodes_.size(); }
    int param_node() const { return param_node_; }
    std::size_t param_count() const { return param_count_; }

    void set_overrides(const OverrideRegistry* reg) { overrides_ = reg; }
    const OverrideRegistry* overrides() const { return overrides_; }

  private:
    int push(Node n);
    const Node& parent(int i) const { return nodes_[i]; }

    std::vector<Node> nodes_;
    int param_node_ = -1;
    std::size_t param_count_ = 0;
    const OverrideRegistry* overrides_ = nullptr;
};

/// Per-evaluation state; single-owner, reusable across evaluations of the
/// same graph. Distinct workspaces may run concurrently.
template <class T>
struct Workspace {
    std::vector<TensorT<T>> val;
    std::vector<TensorT<T>> adj;

    void forward(const Graph& g, std::span<const T> theta);
    void backward(const Graph& g, int root, const TensorT<T>& seed);
};

// ---- high-level derivative entry points ----

// forward values of one node (replays the whole graph)
Tensor eval(const Graph& g, std::span<const double> theta, int node);

// gradient of a scalar node with respect to the parameters
std::vector<double> grad(const Graph& g, int loss_node, std::span<const double> theta);

// J * tangent for an arbitrary output node
Tensor jvp(const Graph& g, int out_node, std::span<const double> theta,
           std::span<const double> tangent);

// J^T * seed
std::vector<double> vjp(const Graph& g, int out_node, std::span<const double> theta,
                        const Tensor& seed);

// Hessian-vector product of a scalar node (forward-over-reverse)
std::vector<double> hvp(const Graph& g, int loss_node, std::span<const double> theta,
                        std::span<const double> v);

// d/de [ J(theta + e v)^T seed ] with the seed held fixed; contracting the
// output-space cotangent into the tangent-differentiated pullback
std::vector<double> vjp_tangent(const Graph& g, int out_node, std::span<const double> theta,
                                std::span<const double> v, const Tensor& seed);

// d^2/da db [ grad L(theta + a u + b v) ]: the third-derivative tensor of a
// scalar node contracted with (u, v)
std::vector<double> third_order_contraction(const Graph& g, int loss_node,
                                            std::span<const double> theta,
                                            std::span<const double> u,
                                            std::span<const double> v);

// second derivative of a vector output contracted with two param directions:
// d^2/da db [ z(theta + a u + b v) ]
Tensor output_second_derivative(const Graph& g, int out_node, std::span<const double> theta,
                                std::span<const double> u, std::span<const double> v);

// ---- implementation ----

namespace detail {

template <class T>
void matmul_generic(const TensorT<T>& A, const TensorT<T>& B, TensorT<T>& C, bool accumulate) {
    const std::size_t r = A.rows(), k = A.cols(), c = B.cols();
    if constexpr (std::is_same_v<T, double>) {
        kernels::matmul(A.data.data(), B.data.data(), C.data.data(), r, k, c, accumulate);
    } else {
        if (!accumulate)
            for (auto& x : C.data) x = T{};
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t p = 0; p < k; ++p) {
                const T a = A.data[i * k + p];
                for (std::size_t j = 0; j < c; ++j)
                    C.data[i * c + j] += a * B.data[p * c + j];
            }
    }
}

// C += A^T * B, A is k x r
template <class T>
void matmul_tn_acc(const TensorT<T>& A, const TensorT<T>& B, TensorT<T>& C) {
    const std::size_t k = A.rows(), r = A.cols(), c = B.cols();
    if constexpr (std::is_same_v<T, double>) {
        kernels::matmul_tn(A.data.data(), B.data.data(), C.data.data(), r, k, c, true);
    } else {
        for (std::size_t p = 0; p < k; ++p)
            for (std::size_t i = 0; i < r; ++i) {
                const T a = A.data[p * r + i];
                for (std::size_t j = 0; j < c; ++j)
                    C.data[i * c + j] += a * B.data[p * c + j];
            }
    }
}

// C += A * B^T, B is c x k
template <class T>
void matmul_nt_acc(const TensorT<T>& A, const TensorT<T>& B, TensorT<T>& C) {
    const std::size_t r = A.rows(), k = A.cols(), c = B.rows();
    if constexpr (std::is_same_v<T, double>) {
        kernels::matmul_nt(A.data.data(), B.data.data(), C.data.data(), r, k, c, true);
    } else {
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) {
                T s{};
                for (std::size_t p = 0; p < k; ++p)
                    s += A.data[i * k + p] * B.data[j * k + p];
                C.data[i * c + j] += s;
            }
    }
}

template <class T>
bool tensor_finite(const TensorT<T>& t) {
    return t.finite();
}

}  // namespace detail

template <class T>
void Workspace<T>::forward(const Graph& g, std::span<const T> theta) {
    const std::size_t n = g.num_nodes();
    val.resize(n);
    const OverrideRegistry* reg = g.overrides();
    for (std::size_t i = 0; i < n; ++i) {
        const Node& nd = g.node(i);
        TensorT<T>& out = val[i];
        if (out.shape != nd.shape) out = TensorT<T>(nd.shape);
        switch (nd.op) {
            case Op::Param: {
                if (theta.size() != out.size())
                    throw std::invalid_argument("parameter vector length mismatch");
                for (std::size_t j = 0; j < out.size(); ++j) out.data[j] = theta[j];
                break;
            }
            case Op::Const: {
                for (std::size_t j = 0; j < out.size(); ++j) out.data[j] = T{nd.value.data[j]};
                break;
            }
            case Op::SliceMat: {
                const auto& p = val[nd.a];
                for (std::size_t j = 0; j < out.size(); ++j) out.data[j] = p.data[nd.offset + j];
                break;
            }
            case Op::MatMul:
                detail::matmul_generic(val[nd.a], val[nd.b], out, false);
                break;
            case Op::Add: {
                const auto& a = val[nd.a];
                const auto& b = val[nd.b];
                for (std::size_t j = 0; j < out.size(); ++j) out.data[j] = a.data[j] + b.data[j];
                break;
            }
            case Op::AddColVec: {
                const auto& m = val[nd.a];
                const auto& v = val[nd.b];
                const std::size_t r = m.rows(), c = m.cols();
                for (std::size_t ri = 0; ri < r; ++ri)
                    for (std::size_t ci = 0; ci < c; ++ci)
                        out.data[ri * c + ci] = m.data[ri * c + ci] + v.data[ri];
                break;
            }
            case Op::Sub: {
                const auto& a = val[nd.a];
                const auto& b = val[nd.b];
                for (std::size_t j = 0; j < out.size(); ++j) out.data[j] = a.data[j] - b.data[j];
                break;
            }
            case Op::Scale: {
                const auto& a = val[nd.a];
                for (std::size_t j = 0; j < out.size(); ++j) out.data[j] = nd.alpha * a.data[j];
                break;
            }
            case Op::Dot: {
                const auto& a = val[nd.a];
                const auto& b = val[nd.b];
                if constexpr (std::is_same_v<T, double>) {
                    out.data[0] = kernels::dot(a.data.data(), b.data.data(), a.size());
                } else {
                    T s{};
                    for (std::size_t j = 0; j < a.size(); ++j) s += a.data[j] * b.data[j];
                    out.data[0] = s;
                }
                break;
            }
            case Op::Sum: {
                const auto& a = val[nd.a];
                T s{};
                for (std::size_t j = 0; j < a.size(); ++j) s += a.data[j];
                out.data[0] = s;
                break;
            }
            case Op::CwiseMul: {
                const auto& a = val[nd.a];
                const auto& b = val[nd.b];
                for (std::size_t j = 0; j < out.size(); ++j) out.data[j] = a.data[j] * b.data[j];
                break;
            }
            case Op::Act: {
                const auto& a = val[nd.a];
                for (std::size_t j = 0; j < out.size(); ++j)
                    out.data[j] = activation_eval(nd.act, a.data[j], 0, reg);
                break;
            }
            case Op::MseLoss: {
                const auto& z = val[nd.a];
                const std::size_t k = z.rows(), c = z.cols();
                T s{};
                for (std::size_t j = 0; j < k * c; ++j) {
                    T d = z.data[j] - T{nd.value.data[j]};
                    s += d * d;
                }
                out.data[0] = s * (0.5 / static_cast<double>(c));
                break;
            }
            case Op::CeLoss: {
                const auto& z = val[nd.a];
                const std::size_t k = z.rows(), c = z.cols();
                T s{};
                for (std::size_t ci = 0; ci < c; ++ci) {
                    double m = value_of(z.data[ci]);
                    for (std::size_t ri = 1; ri < k; ++ri)
                        m = std::max(m, value_of(z.data[ri * c + ci]));
                    T acc{};
                    for (std::size_t ri = 0; ri < k; ++ri)
                        acc += exp_(z.data[ri * c + ci] - T{m});
                    s += log_(acc) + T{m} - z.data[nd.labels[ci] * c + ci];
                }
                out.data[0] = s / static_cast<double>(c);
                break;
            }
        }
        if (!detail::tensor_finite(out))
            throw std::runtime_error("non-finite value at node " + std::to_string(i) +
                                     (nd.tag.empty() ? "" : " (" + nd.tag + ")"));
    }
}

template <class T>
void Workspace<T>::backward(const Graph& g, int root, const TensorT<T>& seed) {
    const std::size_t n = g.num_nodes();
    if (val.size() != n) throw std::logic_error("backward before forward");
    adj.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (adj[i].shape != g.node(i).shape)
            adj[i] = TensorT<T>(g.node(i).shape);
        else
            for (auto& x : adj[i].data) x = T{};
    }
    if (seed.shape != g.node(root).shape)
        throw std::invalid_argument("seed shape does not match root node");
    adj[root] = seed;
    const OverrideRegistry* reg = g.overrides();
    for (int i = root; i >= 0; --i) {
        const Node& nd = g.node(i);
        const TensorT<T>& gy = adj[i];
        switch (nd.op) {
            case Op::Param:
            case Op::Const:
                break;
            case Op::SliceMat: {
                auto& gp = adj[nd.a];
                for (std::size_t j = 0; j < gy.size(); ++j) gp.data[nd.offset + j] += gy.data[j];
                break;
            }
            case Op::MatMul:
                detail::matmul_nt_acc(gy, val[nd.b], adj[nd.a]);   // gA += gY * B^T
                detail::matmul_tn_acc(val[nd.a], gy, adj[nd.b]);   // gB += A^T * gY
                break;
            case Op::Add: {
                auto& ga = adj[nd.a];
                auto& gb = adj[nd.b];
                for (std::size_t j = 0; j < gy.size(); ++j) {
                    ga.data[j] += gy.data[j];
                    gb.data[j] += gy.data[j];
                }
                break;
            }
            case Op::AddColVec: {
                auto& gm = adj[nd.a];
                auto& gv = adj[nd.b];
                const std::size_t r = gm.rows(), c = gm.cols();
                for (std::size_t ri = 0; ri < r; ++ri)
                    for (std::size_t ci = 0; ci < c; ++ci) {
                        gm.data[ri * c + ci] += gy.data[ri * c + ci];
                        gv.data[ri] += gy.data[ri * c + ci];
                    }
                break;
            }
            case Op::Sub: {
                auto& ga = adj[nd.a];
                auto& gb = adj[nd.b];
                for (std::size_t j = 0; j < gy.size(); ++j) {
                    ga.data[j] += gy.data[j];
                    gb.data[j] += -gy.data[j];
                }
                break;
            }
            case Op::Scale: {
                auto& ga = adj[nd.a];
                for (std::size_t j = 0; j < gy.size(); ++j) ga.data[j] += nd.alpha * gy.data[j];
                break;
            }
            case Op::Dot: {
                const T gs = gy.data[0];
                auto& ga = adj[nd.a];
                auto& gb = adj[nd.b];
                const auto& a = val[nd.a];
                const auto& b = val[nd.b];
                for (std::size_t j = 0; j < a.size(); ++j) {
                    ga.data[j] += gs * b.data[j];
                    gb.data[j] += gs * a.data[j];
                }
                break;
            }
            case Op::Sum: {
                const T gs = gy.data[0];
                auto& ga = adj[nd.a];
                for (std::size_t j = 0; j < ga.size(); ++j) ga.data[j] += gs;
                break;
            }
            case Op::CwiseMul: {
                auto& ga = adj[nd.a];
                auto& gb = adj[nd.b];
                const auto& a = val[nd.a];
                const auto& b = val[nd.b];
                for (std::size_t j = 0; j < gy.size(); ++j) {
                    ga.data[j] += gy.data[j] * b.data[j];
                    gb.data[j] += gy.data[j] * a.data[j];
                }
                break;
            }
            case Op::Act: {
                auto& ga = adj[nd.a];
                const auto& a = val[nd.a];
                for (std::size_t j = 0; j < gy.size(); ++j)
                    ga.data[j] += gy.data[j] * activation_eval(nd.act, a.data[j], 1, reg);
                break;
            }
            case Op::MseLoss: {
                const T gs = gy.data[0];
                auto& gz = adj[nd.a];
                const auto& z = val[nd.a];
                const double inv = 1.0 / static_cast<double>(z.cols());
                for (std::size_t j = 0; j < z.size(); ++j)
                    gz.data[j] += gs * ((z.data[j] - T{nd.value.data[j]}) * inv);
                break;
            }
            case Op::CeLoss: {
                const T gs = gy.data[0];
                auto& gz = adj[nd.a];
                const auto& z = val[nd.a];
                const std::size_t k = z.rows(), c = z.cols();
                const double inv = 1.0 / static_cast<double>(c);
                for (std::size_t ci = 0; ci < c; ++ci) {
                    double m = value_of(z.data[ci]);
                    for (std::size_t ri = 1; ri < k; ++ri)
                        m = std::max(m, value_of(z.data[ri * c + ci]));
                    T acc{};
                    for (std::size_t ri = 0; ri < k; ++ri)
                        acc += exp_(z.data[ri * c + ci] - T{m});
                    for (std::size_t ri = 0; ri < k; ++ri) {
                        T p = exp_(z.data[ri * c + ci] - T{m}) / acc;
                        if (static_cast<int>(ri) == nd.labels[ci]) p += T{-1.0};
                        gz.data[ri * c + ci] += gs * (p * inv);
                    }
                }
                break;
            }
        }
    }
}

}  // namespace curvkit
