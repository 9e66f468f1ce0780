#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcnn/activation.hpp"
#include "pcnn/dataset.hpp"
#include "pcnn/models.hpp"
#include "pcnn/tensor.hpp"

namespace pcnn {

struct LossAndGradient {
    double loss;
    DenseMatrix gradient;  // same shape as the logits, zero on unmasked rows
};

// Mean over masked rows of -log softmax(logits)[label]; stabilized by max-subtraction.
LossAndGradient softmax_cross_entropy(const DenseMatrix& logits,
                                      std::span<const std::uint16_t> labels,
                                      std::span<const std::uint32_t> mask);

// Fraction of masked rows whose argmax (lowest index on ties) equals the label.
double accuracy(const DenseMatrix& logits, std::span<const std::uint16_t> labels,
                std::span<const std::uint32_t> mask);

struct AdamConfig {
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<DenseMatrix> first_moment;
    std::vector<DenseMatrix> second_moment;
    std::size_t step = 0;

    static AdamState zeros_like(const std::vector<LayerParams>& params);
};

// Bias-corrected Adam update of the raw weights, in place.
void adam_step(std::vector<LayerParams>& params, const std::vector<DenseMatrix>& grads,
               AdamState& state, const AdamConfig& config);

enum class ModelKind { egcn, emlp };

struct TrainConfig {
    ModelKind model = ModelKind::egcn;
    double learning_rate = 0.01;
    std::size_t epochs = 200;
    std::size_t hidden_width = 16;
    double base = 2.0;
    std::uint64_t seed = 1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    Activation activation{ActivationKind::softplus};
    PreprocessConfig preprocess{2.0, 0.1};
    AdjacencyMode adjacency = AdjacencyMode::self_loop_symmetric;

    void validate() const;
    AdamConfig adam() const { return {learning_rate, beta1, beta2, adam_epsilon}; }
};

// Dataset after preprocessing and adjacency normalization.
struct PreparedGraph {
    DenseMatrix features;
    SparseMatrix adjacency;
    std::vector<std::uint16_t> labels;
    std::vector<std::uint32_t> train_mask;
    std::vector<std::uint32_t> val_mask;
    std::vector<std::uint32_t> test_mask;
    std::size_t num_classes = 0;
};

PreparedGraph prepare_graph(const GraphDataset& dataset, const PreprocessConfig& preprocess,
                            AdjacencyMode adjacency);

// Raw weights uniform on [-s, s], s = sqrt(6 / (fan_in + fan_out)), seeded.
Model init_model(ModelKind kind, std::size_t features, std::size_t hidden, std::size_t classes,
                 double base, const Activation& activation, std::uint64_t seed);

// Node logits (nodes x classes) for either model kind.
DenseMatrix predict_logits(const Model& model, const PreparedGraph& graph);

double evaluate(const Model& model, const PreparedGraph& graph,
                std::span<const std::uint32_t> mask);

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_accuracy;
    std::size_t best_epoch = 0;
    double best_val_accuracy = 0.0;
    double test_accuracy = 0.0;

    // epoch,train_loss,val_acc rows with a header line.
    std::string to_csv() const;
    std::string summary() const;
};

struct TrainResult {
    TrainHistory history;
    Model best;
};

// Full-batch Adam on the training mask, one step per epoch, keeping the parameters of the
// earliest epoch with the highest validation accuracy. Throws DivergenceError on a
// non-finite loss.
TrainResult train(Model model, const PreparedGraph& graph, const TrainConfig& config);
TrainResult train(Model model, const GraphDataset& dataset, const TrainConfig& config);
// Initializes from config.seed, then trains.
TrainResult train(const GraphDataset& dataset, const TrainConfig& config);

struct SweepRow {
    double shift = 0.0;
    double metric = 0.0;
    std::optional<double> test_accuracy;
    std::string error;
};

// One relu+c model per shift; rows are returned in input order. Divergence is recorded
// on the row. Rows run on up to `threads` worker threads.
std::vector<SweepRow> sweep_convexity(const GraphDataset& dataset, const TrainConfig& config,
                                      std::span<const double> shifts, std::size_t threads = 1);
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

// Spearman rank correlation (average ranks for ties).
double rank_correlation(std::span<const double> x, std::span<const double> y);

}  // namespace pcnn
