#include "curvkit/model.hpp"

#include <cmath>
#include <fstream>

#include "curvkit/rng.hpp"
#include "json.hpp"

namespace curvkit {

std::size_t Model::param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        n += widths[l + 1] * widths[l];
        if (bias) n += widths[l + 1];
    }
    return n;
}

std::size_t Model::weight_offset(std::size_t layer) const {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l) {
        off += widths[l + 1] * widths[l];
        if (bias) off += widths[l + 1];
    }
    return off;
}

std::size_t Model::bias_offset(std::size_t layer) const {
    return weight_offset(layer) + widths[layer + 1] * widths[layer];
}

std::size_t Model::weight_index(std::size_t layer, std::size_t i, std::size_t j) const {
    return weight_offset(layer) + i * widths[layer] + j;
}

Model make_model(std::vector<std::size_t> widths, ActivationSpec act, std::uint64_t seed,
                 bool bias, bool final_activation) {
    if (widths.size() < 2) throw std::invalid_argument("model needs at least one layer");
    Model m;
    m.widths = std::move(widths);
    m.activation = act;
    m.bias = bias;
    m.final_activation = final_activation;
    m.seed = seed;
    m.params.assign(m.param_count(), 0.0);
    CounterRng rng(seed);
    for (std::size_t l = 0; l + 1 < m.widths.size(); ++l) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(m.widths[l]));
        const std::size_t off = m.weight_offset(l);
        const std::size_t nw = m.widths[l + 1] * m.widths[l];
        for (std::size_t i = 0; i < nw; ++i)
            m.params[off + i] = scale * rng.normal(l, i);
        // biases start at zero
    }
    return m;
}

ForwardCache model_forward(const Model& m, const Tensor& X, const OverrideRegistry* reg) {
    if (X.rows() != m.widths[0])
        throw std::invalid_argument("input width " + std::to_string(X.rows()) +
                                    " does not match model input width " +
                                    std::to_string(m.widths[0]) + " at layer 0");
    const std::size_t L = m.depth();
    const std::size_t B = X.cols();
    ForwardCache c;
    c.x.push_back(X);
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t r = m.widths[l + 1], k = m.widths[l];
        Tensor h({r, B});
        kernels::matmul(m.params.data() + m.weight_offset(l), c.x.back().data.data(),
                        h.data.data(), r, k, B, false);
        if (m.bias) {
            const double* b = m.params.data() + m.bias_offset(l);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < B; ++j) h.at(i, j) += b[i];
        }
        check_finite(h, "preactivation of layer " + std::to_string(l));
        const bool apply_act = (l + 1 < L) || m.final_activation;
        Tensor xn = h;
        if (apply_act)
            for (auto& v : xn.data) v = activation_eval(m.activation, v, 0, reg);
        c.h.push_back(std::move(h));
        c.x.push_back(std::move(xn));
    }
    c.z = c.x.back();
    return c;
}

int build_model_graph(Graph& g, const Model& m, const Tensor& X) {
    if (X.rows() != m.widths[0])
        throw std::invalid_argument("input width " + std::to_string(X.rows()) +
                                    " does not match model input width " +
                                    std::to_string(m.widths[0]) + " at layer 0");
    const int p = g.param_node() >= 0 ? g.param_node() : g.param(m.param_count());
    int cur = g.constant(X, "input");
    const std::size_t L = m.depth();
    for (std::size_t l = 0; l < L; ++l) {
        const std::string tag = "layer " + std::to_string(l);
        int W = g.slice_mat(p, m.weight_offset(l), m.widths[l + 1], m.widths[l], "W_" + std::to_string(l));
        int h = g.matmul(W, cur, tag);
        if (m.bias) {
            int b = g.slice_mat(p, m.bias_offset(l), m.widths[l + 1], 1, "b_" + std::to_string(l));
            h = g.add_colvec(h, b);
        }
        const bool apply_act = (l + 1 < L) || m.final_activation;
        cur = apply_act ? g.activation(h, m.activation) : h;
    }
    return cur;
}

Recording record_forward(const Model& m, const Tensor& X, const OverrideRegistry* reg) {
    Recording r;
    r.graph.set_overrides(reg);
    r.output = build_model_graph(r.graph, m, X);
    r.output_value = eval(r.graph, m.params, r.output);
    return r;
}

LossGraph build_loss_graph(const Model& m, const Batch& batch, const OverrideRegistry* reg) {
    LossGraph lg;
    lg.graph.set_overrides(reg);
    lg.output = build_model_graph(lg.graph, m, batch.inputs);
    if (batch.loss == LossKind::Mse)
        lg.loss = lg.graph.mse_loss(lg.output, batch.targets);
    else
        lg.loss = lg.graph.ce_loss(lg.output, batch.labels);
    return lg;
}

void save_checkpoint(const Model& m, const std::string& path) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["widths"] = m.widths;
    j["activation"] = {{"kind", to_string(m.activation.kind)}, {"beta", m.activation.beta}};
    j["bias"] = m.bias;
    j["final_activation"] = m.final_activation;
    j["seed"] = m.seed;
    j["params"] = m.params;
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
    f << j.dump(2) << "\n";
}

Model load_checkpoint(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read checkpoint: " + path);
    nlohmann::json j;
    f >> j;
    Model m;
    m.widths = j.at("widths").get<std::vector<std::size_t>>();
    m.activation.kind = activation_kind_from_string(j.at("activation").at("kind").get<std::string>());
    m.activation.beta = j.at("activation").at("beta").get<double>();
    m.bias = j.at("bias").get<bool>();
    m.final_activation = j.at("final_activation").get<bool>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.params = j.at("params").get<std::vector<double>>();
    if (m.params.size() != m.param_count())
        throw std::runtime_error("checkpoint parameter count mismatch in " + path);
    return m;
}

}  // namespace curvkit
