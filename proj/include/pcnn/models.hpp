#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <variant>
#include <vector>

#include "pcnn/activation.hpp"
#include "pcnn/tensor.hpp"

namespace pcnn {

// Raw weights W of one layer; the network consumes a^W.
struct LayerParams {
    DenseMatrix weights;

    bool operator==(const LayerParams&) const = default;
};

// Exponential MLP. Layer k maps x (in x batch, samples as columns) to a^{W_k} x, where
// W_k is out x in. Hidden layers apply the activation; the last layer does not.
struct EmlpParams {
    std::vector<LayerParams> layers;
    double base = 2.0;
    Activation activation{ActivationKind::softplus};

    void validate() const;
    bool operator==(const EmlpParams&) const = default;
};

// Exponential GCN. Node features are rows; W_k is in x out so that layer k computes
// A X_k a^{W_k}. Hidden layers apply the activation; the last layer does not.
struct EgcnParams {
    std::vector<LayerParams> layers;
    double base = 2.0;
    Activation activation{ActivationKind::softplus};

    void validate() const;
    bool operator==(const EgcnParams&) const = default;
};

using Model = std::variant<EmlpParams, EgcnParams>;

// activations[0] is the input, activations[k + 1] the output of layer k.
// pre_activations[k] is the linear map of layer k before the activation.
// exp_weights[k] caches a^{W_k}.
struct ForwardTrace {
    std::vector<DenseMatrix> pre_activations;
    std::vector<DenseMatrix> activations;
    std::vector<DenseMatrix> exp_weights;
    // Inputs with a nonpositive entry void the convexity guarantees; the pass still runs.
    bool input_positive = true;

    const DenseMatrix& output() const { return activations.back(); }
};

// Plain MLP with weight matrices used as-is: x_{k+1} = act(W_k x_k), last layer linear.
ForwardTrace mlp_forward(const std::vector<DenseMatrix>& weights, const DenseMatrix& x,
                         const Activation& act);

ForwardTrace emlp_forward(const EmlpParams& params, const DenseMatrix& x);
ForwardTrace egcn_forward(const EgcnParams& params, const DenseMatrix& features,
                          const SparseMatrix& adjacency);

// Gradients with respect to the raw weights W, given dL/d(output).
std::vector<DenseMatrix> emlp_backward(const EmlpParams& params, const ForwardTrace& trace,
                                       const DenseMatrix& upstream);
std::vector<DenseMatrix> egcn_backward(const EgcnParams& params, const ForwardTrace& trace,
                                       const SparseMatrix& adjacency,
                                       const DenseMatrix& upstream);

// EMLP with the same effective maps as an EGCN over the identity adjacency.
EmlpParams transposed_as_emlp(const EgcnParams& params);

using Edge = std::pair<std::uint32_t, std::uint32_t>;

enum class AdjacencyMode { raw, self_loop_symmetric };

// raw: symmetric 0/1 adjacency. self_loop_symmetric: D^{-1/2} (A + I) D^{-1/2}.
SparseMatrix normalize_adjacency(const std::vector<Edge>& edges, std::size_t num_nodes,
                                 AdjacencyMode mode = AdjacencyMode::self_loop_symmetric);

// Checkpoint file: "PCNM", u32 version, f64 base, u32 layer count, per layer
// (u32 rows, u32 cols, row-major f64), then u8 activation tag and f64 shift. Little-endian.
struct Checkpoint {
    double base = 2.0;
    std::vector<LayerParams> layers;
    Activation activation{ActivationKind::softplus};

    bool operator==(const Checkpoint&) const = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

Checkpoint to_checkpoint(const Model& model);
EmlpParams emlp_from_checkpoint(const Checkpoint& checkpoint);
EgcnParams egcn_from_checkpoint(const Checkpoint& checkpoint);

}  // namespace pcnn
