#include "curvkit/graph.hpp"

namespace curvkit {

int Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Graph::param(std::size_t n) {
    if (param_node_ >= 0) throw std::logic_error("graph already has a parameter node");
    Node nd;
    nd.op = Op::Param;
    nd.shape = {n};
    param_node_ = push(std::move(nd));
    param_count_ = n;
    return param_node_;
}

int Graph::constant(Tensor t, std::string tag) {
    check_finite(t, "constant" + (tag.empty() ? "" : " " + tag));
    Node nd;
    nd.op = Op::Const;
    nd.shape = t.shape;
    nd.value = std::move(t);
    nd.tag = std::move(tag);
    return push(std::move(nd));
}

int Graph::slice_mat(int p, std::size_t offset, std::size_t r, std::size_t c, std::string tag) {
    if (p != param_node_) throw std::invalid_argument("slice_mat expects the parameter node");
    if (offset + r * c > param_count_)
        throw std::invalid_argument("slice_mat range exceeds parameter count");
    Node nd;
    nd.op = Op::SliceMat;
    nd.a = p;
    nd.offset = offset;
    nd.shape = {r, c};
    nd.tag = std::move(tag);
    return push(std::move(nd));
}

int Graph::matmul(int a, int b, std::string tag) {
    const Node& A = nodes_[a];
    const Node& B = nodes_[b];
    const std::size_t k = B.shape[0];
    if (A.shape.size() != 2 || A.shape[1] != k)
        throw std::invalid_argument("matmul shape mismatch" + (tag.empty() ? "" : " at " + tag));
    Node nd;
    nd.op = Op::MatMul;
    nd.a = a;
    nd.b = b;
    nd.shape = B.shape.size() < 2 ? std::vector<std::size_t>{A.shape[0]}
                                  : std::vector<std::size_t>{A.shape[0], B.shape[1]};
    nd.tag = std::move(tag);
    return push(std::move(nd));
}

int Graph::add(int a, int b) {
    if (nodes_[a].shape != nodes_[b].shape) throw std::invalid_argument("add shape mismatch");
    Node nd;
    nd.op = Op::Add;
    nd.a = a;
    nd.b = b;
    nd.shape = nodes_[a].shape;
    return push(std::move(nd));
}

int Graph::add_colvec(int m, int v) {
    if (nodes_[v].shape[0] != nodes_[m].shape[0])
        throw std::invalid_argument("add_colvec shape mismatch");
    Node nd;
    nd.op = Op::AddColVec;
    nd.a = m;
    nd.b = v;
    nd.shape = nodes_[m].shape;
    return push(std::move(nd));
}

int Graph::sub(int a, int b) {
    if (nodes_[a].shape != nodes_[b].shape) throw std::invalid_argument("sub shape mismatch");
    Node nd;
    nd.op = Op::Sub;
    nd.a = a;
    nd.b = b;
    nd.shape = nodes_[a].shape;
    return push(std::move(nd));
}

int Graph::scale(int a, double alpha) {
    Node nd;
    nd.op = Op::Scale;
    nd.a = a;
    nd.alpha = alpha;
    nd.shape = nodes_[a].shape;
    return push(std::move(nd));
}

int Graph::dot(int a, int b) {
    if (Tensor::numel(nodes_[a].shape) != Tensor::numel(nodes_[b].shape))
        throw std::invalid_argument("dot size mismatch");
    Node nd;
    nd.op = Op::Dot;
    nd.a = a;
    nd.b = b;
    nd.shape = {1};
    return push(std::move(nd));
}

int Graph::sum(int a) {
    Node nd;
    nd.op = Op::Sum;
    nd.a = a;
    nd.shape = {1};
    return push(std::move(nd));
}

int Graph::cwise_mul(int a, int b) {
    if (nodes_[a].shape != nodes_[b].shape)
        throw std::invalid_argument("cwise_mul shape mismatch");
    Node nd;
    nd.op = Op::CwiseMul;
    nd.a = a;
    nd.b = b;
    nd.shape = nodes_[a].shape;
    return push(std::move(nd));
}

int Graph::activation(int a, ActivationSpec spec) {
    Node nd;
    nd.op = Op::Act;
    nd.a = a;
    nd.act = spec;
    nd.shape = nodes_[a].shape;
    return push(std::move(nd));
}

int Graph::mse_loss(int z, Tensor targets) {
    if (targets.shape != nodes_[z].shape)
        throw std::invalid_argument("mse_loss target shape mismatch");
    Node nd;
    nd.op = Op::MseLoss;
    nd.a = z;
    nd.shape = {1};
    nd.value = std::move(targets);
    return push(std::move(nd));
}

int Graph::ce_loss(int z, std::vector<int> labels) {
    const Node& Z = nodes_[z];
    const std::size_t k = Z.shape[0];
    const std::size_t c = Z.shape.size() < 2 ? 1 : Z.shape[1];
    if (labels.size() != c) throw std::invalid_argument("ce_loss: one label per column required");
    for (int l : labels)
        if (l < 0 || static_cast<std::size_t>(l) >= k)
            throw std::invalid_argument("ce_loss: class index out of range");
    Node nd;
    nd.op = Op::CeLoss;
    nd.a = z;
    nd.shape = {1};
    nd.labels = std::move(labels);
    return push(std::move(nd));
}

namespace {

void require_scalar(const Graph& g, int node, const char* what) {
    if (Tensor::numel(g.node(node).shape) != 1)
        throw std::invalid_argument(std::string(what) + " requires a scalar node");
}

void require_param_len(const Graph& g, std::size_t len, const char* what) {
    if (len != g.param_count())
        throw std::invalid_argument(std::string(what) + ": vector length does not match parameter count");
}

std::vector<Dual1> dual1_params(std::span<const double> theta, std::span<const double> tangent) {
    std::vector<Dual1> p(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i)
        p[i] = {theta[i], tangent.empty() ? 0.0 : tangent[i]};
    return p;
}

}  // namespace

Tensor eval(const Graph& g, std::span<const double> theta, int node) {
    Workspace<double> ws;
    ws.forward(g, theta);
    return ws.val[node];
}

std::vector<double> grad(const Graph& g, int loss_node, std::span<const double> theta) {
    require_scalar(g, loss_node, "grad");
    Workspace<double> ws;
    ws.forward(g, theta);
    Tensor seed({1});
    seed.data[0] = 1.0;
    ws.backward(g, loss_node, seed);
    return ws.adj[g.param_node()].data;
}

Tensor jvp(const Graph& g, int out_node, std::span<const double> theta,
           std::span<const double> tangent) {
    require_param_len(g, tangent.size(), "jvp");
    Workspace<Dual1> ws;
    auto p = dual1_params(theta, tangent);
    ws.forward(g, p);
    const auto& out = ws.val[out_node];
    Tensor t(out.shape);
    for (std::size_t i = 0; i < out.size(); ++i) t.data[i] = out.data[i].d;
    return t;
}

std::vector<double> vjp(const Graph& g, int out_node, std::span<const double> theta,
                        const Tensor& seed) {
    Workspace<double> ws;
    ws.forward(g, theta);
    ws.backward(g, out_node, seed);
    return ws.adj[g.param_node()].data;
}

std::vector<double> hvp(const Graph& g, int loss_node, std::span<const double> theta,
                        std::span<const double> v) {
    require_scalar(g, loss_node, "hvp");
    require_param_len(g, v.size(), "hvp");
    Workspace<Dual1> ws;
    auto p = dual1_params(theta, v);
    ws.forward(g, p);
    TensorT<Dual1> seed({1});
    seed.data[0] = {1.0, 0.0};
    ws.backward(g, loss_node, seed);
    const auto& ga = ws.adj[g.param_node()];
    std::vector<double> out(ga.size());
    for (std::size_t i = 0; i < ga.size(); ++i) out[i] = ga.data[i].d;
    return out;
}

std::vector<double> vjp_tangent(const Graph& g, int out_node, std::span<const double> theta,
                                std::span<const double> v, const Tensor& seed) {
    require_param_len(g, v.size(), "vjp_tangent");
    Workspace<Dual1> ws;
    auto p = dual1_params(theta, v);
    ws.forward(g, p);
    TensorT<Dual1> s(seed.shape);
    for (std::size_t i = 0; i < seed.size(); ++i) s.data[i] = {seed.data[i], 0.0};
    ws.backward(g, out_node, s);
    const auto& ga = ws.adj[g.param_node()];
    std::vector<double> out(ga.size());
    for (std::size_t i = 0; i < ga.size(); ++i) out[i] = ga.data[i].d;
    return out;
}

std::vector<double> third_order_contraction(const Graph& g, int loss_node,
                                            std::span<const double> theta,
                                            std::span<const double> u,
                                            std::span<const double> v) {
    require_scalar(g, loss_node, "third_order_contraction");
    require_param_len(g, u.size(), "third_order_contraction");
    require_param_len(g, v.size(), "third_order_contraction");
    Workspace<Dual2> ws;
    std::vector<Dual2> p(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i)
        p[i] = {{theta[i], u[i]}, {v[i], 0.0}};
    ws.forward(g, p);
    TensorT<Dual2> seed({1});
    seed.data[0] = Dual2{{1.0, 0.0}, {0.0, 0.0}};
    ws.backward(g, loss_node, seed);
    const auto& ga = ws.adj[g.param_node()];
    std::vector<double> out(ga.size());
    for (std::size_t i = 0; i < ga.size(); ++i) out[i] = ga.data[i].d.d;
    return out;
}

Tensor output_second_derivative(const Graph& g, int out_node, std::span<const double> theta,
                                std::span<const double> u, std::span<const double> v) {
    require_param_len(g, u.size(), "output_second_derivative");
    require_param_len(g, v.size(), "output_second_derivative");
    Workspace<Dual2> ws;
    std::vector<Dual2> p(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i)
        p[i] = {{theta[i], u[i]}, {v[i], 0.0}};
    ws.forward(g, p);
    const auto& out = ws.val[out_node];
    Tensor t(out.shape);
    for (std::size_t i = 0; i < out.size(); ++i) t.data[i] = out.data[i].d.d;
    return t;
}

}  // namespace curvkit
