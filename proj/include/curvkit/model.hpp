#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "curvkit/activations.hpp"
#include "curvkit/graph.hpp"
#include "curvkit/loss.hpp"
#include "curvkit/tensor.hpp"

namespace curvkit {

/// Fully connected stack h_l = W_l x_l, x_{l+1} = phi(h_l).
///
/// Parameter flattening is layer-major and row-major within each weight
/// matrix: W_0 rows first, then (if enabled) b_0, then W_1, ... This order is
/// fixed; ParamVector indices are stable across runs and checkpoints.
struct Model {
    std::vector<std::size_t> widths;  // [d_0, d_1, ..., d_L]
    ActivationSpec activation;
    bool bias = false;              // off by default; the analytic oracle is bias-free
    bool final_activation = false;  // apply phi after the last layer too
    std::uint64_t seed = 0;
    std::vector<double> params;

    std::size_t depth() const { return widths.size() - 1; }
    std::size_t param_count() const;
    std::size_t weight_offset(std::size_t layer) const;
    std::size_t bias_offset(std::size_t layer) const;  // valid only if bias
    // index of entry (i, j) of W_layer in the flattened vector
    std::size_t weight_index(std::size_t layer, std::size_t i, std::size_t j) const;
};

/// Random model; weights ~ N(0, 1/fan_in), deterministic in seed.
Model make_model(std::vector<std::size_t> widths, ActivationSpec act, std::uint64_t seed,
                 bool bias = false, bool final_activation = false);

/// Intermediates cached by the eager forward pass (the analytic oracle
/// consumes h_l and x_l directly).
struct ForwardCache {
    std::vector<Tensor> x;  // x_0 .. x_L, each d_l x B
    std::vector<Tensor> h;  // h_0 .. h_{L-1}
    Tensor z;               // output (k x B)
};

/// Eager forward pass with cached intermediates; bit-identical to replaying
/// the recorded graph.
ForwardCache model_forward(const Model& m, const Tensor& X,
                           const OverrideRegistry* reg = nullptr);

/// Recorded forward: builds the tape and evaluates it.
struct Recording {
    Graph graph;
    int output = -1;  // Z node (k x B)
    Tensor output_value;
};

Recording record_forward(const Model& m, const Tensor& X,
                         const OverrideRegistry* reg = nullptr);

/// Model output node appended to an existing graph holding the model's
/// parameter node.
int build_model_graph(Graph& g, const Model& m, const Tensor& X);

/// Full loss graph for a batch (batch-mean loss).
struct LossGraph {
    Graph graph;
    int output = -1;  // Z node
    int loss = -1;    // scalar node
};

LossGraph build_loss_graph(const Model& m, const Batch& batch,
                           const OverrideRegistry* reg = nullptr);

// checkpoint I/O: JSON header (widths, activation, seed, flags) plus the
// parameter array in flattening order
void save_checkpoint(const Model& m, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace curvkit
