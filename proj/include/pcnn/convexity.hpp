#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pcnn/activation.hpp"
#include "pcnn/models.hpp"
#include "pcnn/tensor.hpp"

namespace pcnn {

using Rng = std::mt19937_64;

using ScalarField = std::function<double(std::span<const double>)>;

// Central differences; throws DomainError on a non-finite evaluation.
std::vector<double> fd_gradient(const ScalarField& f, std::span<const double> theta,
                                double h = 1e-5);
// Second-difference stencil at steps h and h/2, Richardson-extrapolated and symmetrized.
DenseMatrix fd_hessian(const ScalarField& f, std::span<const double> theta, double h = 4e-3);

// Blocks of the Hessian of f(W) = sum_i a^{W2_i} act(a^{W1_i} x) over theta = [W1; W2].
// All three blocks are diagonal.
struct HessianBlocks {
    DenseMatrix w2w2;
    DenseMatrix w2w1;
    DenseMatrix w1w1;
    DenseMatrix assembled;
};

HessianBlocks analytic_hessian_2layer(std::span<const double> w1, std::span<const double> w2,
                                      double x, double base, const Activation& act);
HessianBlocks analytic_hessian_2layer(std::span<const double> w1, std::span<const double> w2,
                                      double x, double base, const RawActivation& act);

// f(W) = sum_i a^{W2_i} act(a^{W1_i} x) with theta = [W1; W2], evaluated directly.
double two_layer_scalar_output(std::span<const double> theta, double x, double base,
                               const Activation& act);
double two_layer_scalar_output(std::span<const double> theta, double x, double base,
                               const RawActivation& act);

// Hessian of the plain two-layer MLP f = W1^T act(W0 x) over theta = [W1; W0].
struct MlpHessianBlocks {
    DenseMatrix w1w1;
    DenseMatrix w1w0;
    DenseMatrix w0w0;
    DenseMatrix assembled;
};

MlpHessianBlocks mlp_hessian_2layer(std::span<const double> w0, std::span<const double> w1,
                                    double x, const Activation& act);

// |det H| for block-diagonal H, as the product of per-coordinate 2x2 determinants.
// Throws DomainError if any block has an off-diagonal entry.
double determinant_metric(const HessianBlocks& blocks);

// Flattening of a layer list into theta, each layer column-stacked in order.
std::vector<double> flatten_layers(const std::vector<LayerParams>& layers);
std::vector<LayerParams> unflatten_layers(std::span<const double> theta,
                                          const std::vector<std::pair<std::size_t, std::size_t>>& shapes);

// A model output vector as a function of (theta, input).
using ModelFn = std::function<std::vector<double>(std::span<const double>, const DenseMatrix&)>;
using ThetaSampler = std::function<std::vector<double>(Rng&)>;
using PairSampler = std::function<std::pair<std::vector<double>, std::vector<double>>(Rng&)>;
using InputSampler = std::function<DenseMatrix(Rng&)>;

ThetaSampler uniform_theta_sampler(std::size_t dim, double lo = -2.0, double hi = 2.0);
InputSampler log_uniform_input_sampler(std::size_t rows, std::size_t cols, double lo = 0.1,
                                       double hi = 10.0);

// theta = [W1 (width); W2 (width)], input is 1x1.
ModelFn emlp_scalar_model(std::size_t width, double base, const Activation& act);
ModelFn emlp_scalar_model(std::size_t width, double base, const RawActivation& act);
// theta = [W1 (width); W0 (width)], input is 1x1.
ModelFn mlp_scalar_model(std::size_t width, const Activation& act);
// Two-layer EGCN over a fixed adjacency; theta = [vec(W0); vec(W1)].
ModelFn egcn_model(std::size_t features, std::size_t hidden, std::size_t outputs, double base,
                   const Activation& act, SparseMatrix adjacency);

struct ProbeOptions {
    std::size_t trials = 1000;
    double tol = 1e-9;
    std::uint64_t seed = 1;
    bool require_positive_input = true;
    double fd_step = 4e-3;
};

struct MidpointViolation {
    std::size_t trial;
    std::size_t output_index;
    double gap;
};

struct MidpointOutcome {
    std::size_t trials = 0;
    std::size_t violations = 0;
    double worst_gap = -std::numeric_limits<double>::infinity();
    std::vector<MidpointViolation> examples;
};

struct PsdOutcome {
    std::size_t points = 0;
    double min_eigenvalue = std::numeric_limits<double>::infinity();
    std::vector<double> worst_theta;
    std::size_t worst_output = 0;
};

// Checks f((a+b)/2) <= (f(a)+f(b))/2 + tol for every output coordinate.
// Each trial draws from an RNG seeded by (seed, trial).
MidpointOutcome midpoint_convexity_probe(const ModelFn& model, const ThetaSampler& theta_sampler,
                                         const InputSampler& input_sampler,
                                         const ProbeOptions& options);
MidpointOutcome midpoint_convexity_probe(const ModelFn& model, const PairSampler& pair_sampler,
                                         const InputSampler& input_sampler,
                                         const ProbeOptions& options);

// Minimum eigenvalue of the finite-difference Hessian of each output coordinate
// at options.trials sampled points.
PsdOutcome psd_probe(const ModelFn& model, const ThetaSampler& theta_sampler,
                     const InputSampler& input_sampler, const ProbeOptions& options);

inline constexpr double kPsdTolerance = 1e-6;

enum class Verdict { certified_at_probes, violation_found };

struct ConvexityReport {
    std::string model;
    std::size_t num_probes = 0;
    double min_eigenvalue_observed = 0.0;
    std::size_t midpoint_violations = 0;
    double worst_gap = 0.0;
    std::optional<double> determinant_metric;
    double psd_tolerance = kPsdTolerance;
    Verdict verdict = Verdict::certified_at_probes;
    std::vector<MidpointViolation> violations;

    std::string to_text() const;
};

ConvexityReport make_report(std::string model, const MidpointOutcome& midpoint,
                            const PsdOutcome& psd, std::optional<double> determinant,
                            double psd_tolerance = kPsdTolerance);

enum class VerifyTarget { emlp2, egcn2, mlp2 };

struct VerifyConfig {
    VerifyTarget target = VerifyTarget::emlp2;
    Activation activation{ActivationKind::softplus};
    double base = 2.0;
    std::size_t width = 3;
    std::size_t probes = 1000;
    std::size_t psd_points = 100;
    std::uint64_t seed = 1;
};

// Midpoint and PSD probes on one of the standard small configurations.
ConvexityReport run_verification(const VerifyConfig& config);

// Fixed 5-node graph used by the EGCN probes.
std::vector<Edge> five_node_fixture_edges();

}  // namespace pcnn
