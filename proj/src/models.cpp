#include "pcnn/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "binary_io.hpp"
#include "pcnn/error.hpp"

namespace pcnn {

namespace {

void validate_layers(const std::vector<LayerParams>& layers, double base, bool row_features,
                     const char* model) {
    if (layers.empty()) {
        throw DimensionError(std::string("models: ") + model + " needs at least one layer");
    }
    if (!(base > 0.0) || base == 1.0 || !std::isfinite(base)) {
        throw DomainError(std::string("models: ") + model + " base must be > 0 and != 1");
    }
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const auto& w = layers[k].weights;
        if (w.empty() || !w.all_finite()) {
            throw DomainError(std::string("models: ") + model + " layer " + std::to_string(k) +
                              " is empty or non-finite");
        }
        if (k == 0) continue;
        const auto& prev = layers[k - 1].weights;
        const bool composes = row_features ? prev.cols() == w.rows() : prev.rows() == w.cols();
        if (!composes) {
            throw DimensionError(std::string("models: ") + model + " layer " +
                                 std::to_string(k) + " shape " + w.shape_string() +
                                 " does not compose with " + prev.shape_string());
        }
    }
}

bool all_positive(const DenseMatrix& m) {
    return std::all_of(m.data().begin(), m.data().end(), [](double v) { return v > 0.0; });
}

DenseMatrix apply_activation(const Activation& act, const DenseMatrix& z) {
    DenseMatrix out(z.rows(), z.cols());
    auto o = out.data();
    auto in = z.data();
    for (std::size_t k = 0; k < o.size(); ++k) o[k] = act.value(in[k]);
    return out;
}

// g <- g * act'(z), entrywise.
void scale_by_derivative(const Activation& act, const DenseMatrix& z, DenseMatrix& g) {
    auto o = g.data();
    auto in = z.data();
    for (std::size_t k = 0; k < o.size(); ++k) o[k] *= act.deriv1(in[k]);
}

// dL/dW = dL/dV * ln(a) * a^W for V = a^W.
DenseMatrix raw_weight_gradient(const DenseMatrix& grad_v, const DenseMatrix& exp_w,
                                double base) {
    DenseMatrix g = hadamard(grad_v, exp_w);
    const double log_base = std::log(base);
    for (double& v : g.data()) v *= log_base;
    return g;
}

void check_trace(const ForwardTrace& trace, std::size_t layers, const DenseMatrix& upstream,
                 const char* model) {
    if (trace.exp_weights.size() != layers || trace.pre_activations.size() != layers ||
        trace.activations.size() != layers + 1) {
        throw DimensionError(std::string("models: ") + model +
                             " trace does not match the parameter layer count");
    }
    if (!upstream.same_shape(trace.output())) {
        throw DimensionError(std::string("models: ") + model + " upstream gradient " +
                             upstream.shape_string() + " does not match output " +
                             trace.output().shape_string());
    }
}

}  // namespace

void EmlpParams::validate() const { validate_layers(layers, base, false, "emlp"); }
void EgcnParams::validate() const { validate_layers(layers, base, true, "egcn"); }

ForwardTrace mlp_forward(const std::vector<DenseMatrix>& weights, const DenseMatrix& x,
                         const Activation& act) {
    if (weights.empty()) throw DimensionError("models: mlp needs at least one layer");
    ForwardTrace trace;
    trace.input_positive = all_positive(x);
    trace.activations.push_back(x);
    for (std::size_t k = 0; k < weights.size(); ++k) {
        DenseMatrix z = matmul(weights[k], trace.activations.back());
        const bool last = k + 1 == weights.size();
        trace.activations.push_back(last ? z : apply_activation(act, z));
        trace.pre_activations.push_back(std::move(z));
        trace.exp_weights.push_back(weights[k]);
    }
    return trace;
}

ForwardTrace emlp_forward(const EmlpParams& params, const DenseMatrix& x) {
    params.validate();
    if (x.rows() != params.layers.front().weights.cols()) {
        throw DimensionError("models: emlp input " + x.shape_string() +
                             " does not match first layer " +
                             params.layers.front().weights.shape_string());
    }
    ForwardTrace trace;
    trace.input_positive = all_positive(x);
    trace.activations.push_back(x);
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
        DenseMatrix v = elementwise_exp(params.base, params.layers[k].weights);
        DenseMatrix z = matmul(v, trace.activations.back());
        const bool last = k + 1 == params.layers.size();
        trace.activations.push_back(last ? z : apply_activation(params.activation, z));
        trace.pre_activations.push_back(std::move(z));
        trace.exp_weights.push_back(std::move(v));
    }
    return trace;
}

ForwardTrace egcn_forward(const EgcnParams& params, const DenseMatrix& features,
                          const SparseMatrix& adjacency) {
    params.validate();
    if (features.cols() != params.layers.front().weights.rows()) {
        throw DimensionError("models: egcn features " + features.shape_string() +
                             " do not match first layer " +
                             params.layers.front().weights.shape_string());
    }
    if (adjacency.rows() != features.rows() || adjacency.cols() != features.rows()) {
        throw DimensionError("models: egcn adjacency is " + std::to_string(adjacency.rows()) +
                             "x" + std::to_string(adjacency.cols()) + " for " +
                             std::to_string(features.rows()) + " nodes");
    }
    for (double v : adjacency.values()) {
        if (v < 0.0) throw DomainError("models: egcn adjacency has a negative entry");
    }

    ForwardTrace trace;
    trace.input_positive = all_positive(features);
    trace.activations.push_back(features);
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
        DenseMatrix v = elementwise_exp(params.base, params.layers[k].weights);
        DenseMatrix z = spmm(adjacency, matmul(trace.activations.back(), v));
        const bool last = k + 1 == params.layers.size();
        trace.activations.push_back(last ? z : apply_activation(params.activation, z));
        trace.pre_activations.push_back(std::move(z));
        trace.exp_weights.push_back(std::move(v));
    }
    return trace;
}

std::vector<DenseMatrix> emlp_backward(const EmlpParams& params, const ForwardTrace& trace,
                                       const DenseMatrix& upstream) {
    const std::size_t n = params.layers.size();
    check_trace(trace, n, upstream, "emlp");
    std::vector<DenseMatrix> grads(n);
    DenseMatrix g = upstream;
    for (std::size_t k = n; k-- > 0;) {
        if (!trace.exp_weights[k].same_shape(params.layers[k].weights)) {
            throw DimensionError("models: emlp trace is stale at layer " + std::to_string(k));
        }
        if (k + 1 < n) scale_by_derivative(params.activation, trace.pre_activations[k], g);
        const DenseMatrix grad_v = matmul_nt(g, trace.activations[k]);
        grads[k] = raw_weight_gradient(grad_v, trace.exp_weights[k], params.base);
        if (k > 0) g = matmul_tn(trace.exp_weights[k], g);
    }
    return grads;
}

std::vector<DenseMatrix> egcn_backward(const EgcnParams& params, const ForwardTrace& trace,
                                       const SparseMatrix& adjacency,
                                       const DenseMatrix& upstream) {
    const std::size_t n = params.layers.size();
    check_trace(trace, n, upstream, "egcn");
    if (adjacency.rows() != upstream.rows()) {
        throw DimensionError("models: egcn adjacency does not match the trace");
    }
    std::vector<DenseMatrix> grads(n);
    DenseMatrix g = upstream;
    for (std::size_t k = n; k-- > 0;) {
        if (!trace.exp_weights[k].same_shape(params.layers[k].weights)) {
            throw DimensionError("models: egcn trace is stale at layer " + std::to_string(k));
        }
        if (k + 1 < n) scale_by_derivative(params.activation, trace.pre_activations[k], g);
        const DenseMatrix propagated = spmm_transposed(adjacency, g);
        const DenseMatrix grad_v = matmul_tn(trace.activations[k], propagated);
        grads[k] = raw_weight_gradient(grad_v, trace.exp_weights[k], params.base);
        if (k > 0) g = matmul_nt(propagated, trace.exp_weights[k]);
    }
    return grads;
}

EmlpParams transposed_as_emlp(const EgcnParams& params) {
    EmlpParams out{{}, params.base, params.activation};
    for (const auto& layer : params.layers) out.layers.push_back({layer.weights.transpose()});
    return out;
}

SparseMatrix normalize_adjacency(const std::vector<Edge>& edges, std::size_t num_nodes,
                                 AdjacencyMode mode) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.reserve(2 * edges.size() + num_nodes);
    for (const auto& [u, v] : edges) {
        if (u >= num_nodes || v >= num_nodes) {
            throw DimensionError("models: edge (" + std::to_string(u) + "," + std::to_string(v) +
                                 ") out of range for " + std::to_string(num_nodes) + " nodes");
        }
        pairs.emplace_back(u, v);
        pairs.emplace_back(v, u);
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

    std::vector<Triplet> entries;
    entries.reserve(pairs.size() + num_nodes);
    for (const auto& [u, v] : pairs) entries.push_back({u, v, 1.0});
    if (mode == AdjacencyMode::raw) {
        return SparseMatrix::from_triplets(num_nodes, num_nodes, std::move(entries));
    }

    // A + I, where an explicit self-loop edge is not counted twice.
    std::vector<bool> has_loop(num_nodes, false);
    for (const auto& [u, v] : pairs)
        if (u == v) has_loop[u] = true;
    for (std::size_t i = 0; i < num_nodes; ++i)
        if (!has_loop[i]) entries.push_back({i, i, 1.0});

    std::vector<double> degree(num_nodes, 0.0);
    for (const auto& t : entries) degree[t.row] += t.value;
    for (auto& t : entries) t.value /= std::sqrt(degree[t.row] * degree[t.col]);
    return SparseMatrix::from_triplets(num_nodes, num_nodes, std::move(entries));
}

void write_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("models: cannot open checkpoint for writing: " + path.string());
    detail::write_magic(out, "PCNM");
    detail::write_le<std::uint32_t>(out, kCheckpointVersion);
    detail::write_le<double>(out, checkpoint.base);
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.layers.size()));
    for (const auto& layer : checkpoint.layers) {
        detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(layer.weights.rows()));
        detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(layer.weights.cols()));
        for (double v : layer.weights.data()) detail::write_le<double>(out, v);
    }
    detail::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(checkpoint.activation.kind()));
    detail::write_le<double>(out, checkpoint.activation.shift());
    if (!out) throw FormatError("models: failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("models: cannot open checkpoint " + path.string());
    constexpr std::string_view what = "models: checkpoint";
    detail::expect_magic(in, "PCNM", what);
    const auto version = detail::read_le<std::uint32_t>(in, what);
    if (version != kCheckpointVersion) {
        throw FormatError("models: unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint cp;
    cp.base = detail::read_le<double>(in, what);
    const auto count = detail::read_le<std::uint32_t>(in, what);
    for (std::uint32_t k = 0; k < count; ++k) {
        const auto rows = detail::read_le<std::uint32_t>(in, what);
        const auto cols = detail::read_le<std::uint32_t>(in, what);
        std::vector<double> data(static_cast<std::size_t>(rows) * cols);
        for (double& v : data) v = detail::read_le<double>(in, what);
        cp.layers.push_back({DenseMatrix(rows, cols, std::move(data))});
    }
    const auto tag = detail::read_le<std::uint8_t>(in, what);
    const auto shift = detail::read_le<double>(in, what);
    if (tag > static_cast<std::uint8_t>(ActivationKind::bend)) {
        throw FormatError("models: unknown activation tag " + std::to_string(tag));
    }
    cp.activation = Activation(static_cast<ActivationKind>(tag), shift);
    return cp;
}

Checkpoint to_checkpoint(const Model& model) {
    return std::visit(
        [](const auto& params) { return Checkpoint{params.base, params.layers, params.activation}; },
        model);
}

EmlpParams emlp_from_checkpoint(const Checkpoint& checkpoint) {
    EmlpParams p{checkpoint.layers, checkpoint.base, checkpoint.activation};
    p.validate();
    return p;
}

EgcnParams egcn_from_checkpoint(const Checkpoint& checkpoint) {
    EgcnParams p{checkpoint.layers, checkpoint.base, checkpoint.activation};
    p.validate();
    return p;
}

}  // namespace pcnn
