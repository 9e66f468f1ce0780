#include "pcnn/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "pcnn/error.hpp"

namespace pcnn {

namespace {

void check_mask(std::span<const std::uint32_t> mask, std::size_t rows, const char* op) {
    if (mask.empty()) throw DomainError(std::string("training: ") + op + " needs a non-empty mask");
    for (auto idx : mask) {
        if (idx >= rows) {
            throw DimensionError(std::string("training: ") + op + " mask index " +
                                 std::to_string(idx) + " >= " + std::to_string(rows));
        }
    }
}

std::size_t argmax_row(std::span<const double> row) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j)
        if (row[j] > row[best]) best = j;
    return best;
}

DenseMatrix glorot_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in,
                           std::size_t fan_out, std::mt19937_64& rng) {
    const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-s, s);
    DenseMatrix w(rows, cols);
    for (double& v : w.data()) v = dist(rng);
    return w;
}

std::vector<LayerParams>& layers_of(Model& model) {
    return std::visit([](auto& p) -> std::vector<LayerParams>& { return p.layers; }, model);
}

// Node logits plus the trace needed for the backward pass.
struct Evaluation {
    DenseMatrix logits;
    ForwardTrace trace;
};

Evaluation forward(const Model& model, const PreparedGraph& graph, const DenseMatrix& features_t) {
    if (const auto* egcn = std::get_if<EgcnParams>(&model)) {
        ForwardTrace trace = egcn_forward(*egcn, graph.features, graph.adjacency);
        DenseMatrix logits = trace.output();
        return {std::move(logits), std::move(trace)};
    }
    const auto& emlp = std::get<EmlpParams>(model);
    ForwardTrace trace = emlp_forward(emlp, features_t);
    DenseMatrix logits = trace.output().transpose();
    return {std::move(logits), std::move(trace)};
}

std::vector<DenseMatrix> backward(const Model& model, const PreparedGraph& graph,
                                  const ForwardTrace& trace, const DenseMatrix& grad_logits) {
    if (const auto* egcn = std::get_if<EgcnParams>(&model)) {
        return egcn_backward(*egcn, trace, graph.adjacency, grad_logits);
    }
    return emlp_backward(std::get<EmlpParams>(model), trace, grad_logits.transpose());
}

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

LossAndGradient softmax_cross_entropy(const DenseMatrix& logits,
                                      std::span<const std::uint16_t> labels,
                                      std::span<const std::uint32_t> mask) {
    check_mask(mask, logits.rows(), "softmax_cross_entropy");
    if (labels.size() != logits.rows()) {
        throw DimensionError("training: " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(logits.rows()) + " logit rows");
    }
    const std::size_t classes = logits.cols();
    const double inv = 1.0 / static_cast<double>(mask.size());
    LossAndGradient out{0.0, DenseMatrix(logits.rows(), classes)};
    std::vector<double> p(classes);
    for (auto idx : mask) {
        const std::size_t label = labels[idx];
        if (label >= classes) {
            throw DomainError("training: label " + std::to_string(label) + " out of range for " +
                              std::to_string(classes) + " classes");
        }
        const auto row = logits.row(idx);
        const double peak = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (std::size_t j = 0; j < classes; ++j) {
            p[j] = std::exp(row[j] - peak);
            sum += p[j];
        }
        out.loss += (std::log(sum) + peak - row[label]) * inv;
        auto g = out.gradient.row(idx);
        for (std::size_t j = 0; j < classes; ++j) g[j] = p[j] / sum * inv;
        g[label] -= inv;
    }
    return out;
}

double accuracy(const DenseMatrix& logits, std::span<const std::uint16_t> labels,
                std::span<const std::uint32_t> mask) {
    check_mask(mask, logits.rows(), "accuracy");
    std::size_t correct = 0;
    for (auto idx : mask)
        if (argmax_row(logits.row(idx)) == labels[idx]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(mask.size());
}

AdamState AdamState::zeros_like(const std::vector<LayerParams>& params) {
    AdamState state;
    for (const auto& p : params) {
        state.first_moment.emplace_back(p.weights.rows(), p.weights.cols());
        state.second_moment.emplace_back(p.weights.rows(), p.weights.cols());
    }
    return state;
}

void adam_step(std::vector<LayerParams>& params, const std::vector<DenseMatrix>& grads,
               AdamState& state, const AdamConfig& config) {
    if (grads.size() != params.size()) {
        throw DimensionError("training: adam got " + std::to_string(grads.size()) +
                             " gradients for " + std::to_string(params.size()) + " layers");
    }
    if (state.first_moment.empty() && state.step == 0) state = AdamState::zeros_like(params);
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (!grads[k].same_shape(params[k].weights) ||
            !state.first_moment[k].same_shape(params[k].weights)) {
            throw DimensionError("training: adam shape mismatch at layer " + std::to_string(k));
        }
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(config.beta1, t);
    const double correction2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto w = params[k].weights.data();
        auto g = grads[k].data();
        auto m = state.first_moment[k].data();
        auto v = state.second_moment[k].data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            w[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
        }
    }
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw DomainError("training: learning_rate must be > 0");
    if (epochs < 1) throw DomainError("training: epochs must be >= 1");
    if (hidden_width < 1) throw DomainError("training: hidden_width must be >= 1");
    if (!(base > 0.0) || base == 1.0) throw DomainError("training: base must be > 0 and != 1");
    preprocess.validate();
}

PreparedGraph prepare_graph(const GraphDataset& dataset, const PreprocessConfig& preprocess,
                            AdjacencyMode adjacency) {
    PreparedGraph g;
    g.features = preprocess_features(dataset.features, preprocess);
    g.adjacency = normalize_adjacency(dataset.edges, dataset.num_nodes(), adjacency);
    g.labels = dataset.labels;
    g.train_mask = dataset.train_mask;
    g.val_mask = dataset.val_mask;
    g.test_mask = dataset.test_mask;
    g.num_classes = dataset.num_classes;
    return g;
}

Model init_model(ModelKind kind, std::size_t features, std::size_t hidden, std::size_t classes,
                 double base, const Activation& activation, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    if (kind == ModelKind::egcn) {
        EgcnParams p{{}, base, activation};
        p.layers.push_back({glorot_uniform(features, hidden, features, hidden, rng)});
        p.layers.push_back({glorot_uniform(hidden, classes, hidden, classes, rng)});
        return p;
    }
    EmlpParams p{{}, base, activation};
    p.layers.push_back({glorot_uniform(hidden, features, features, hidden, rng)});
    p.layers.push_back({glorot_uniform(classes, hidden, hidden, classes, rng)});
    return p;
}

DenseMatrix predict_logits(const Model& model, const PreparedGraph& graph) {
    const DenseMatrix features_t =
        std::holds_alternative<EmlpParams>(model) ? graph.features.transpose() : DenseMatrix{};
    return forward(model, graph, features_t).logits;
}

double evaluate(const Model& model, const PreparedGraph& graph,
                std::span<const std::uint32_t> mask) {
    return accuracy(predict_logits(model, graph), graph.labels, mask);
}

std::string TrainHistory::to_csv() const {
    std::ostringstream out;
    out << "epoch,train_loss,val_acc\n";
    char buf[96];
    for (std::size_t e = 0; e < train_loss.size(); ++e) {
        std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.6f\n", e, train_loss[e], val_accuracy[e]);
        out << buf;
    }
    return out.str();
}

std::string TrainHistory::summary() const {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "summary: epochs=%zu best_epoch=%zu best_val_acc=%.4f test_acc=%.4f",
                  train_loss.size(), best_epoch, best_val_accuracy, test_accuracy);
    return buf;
}

TrainResult train(Model model, const PreparedGraph& graph, const TrainConfig& config) {
    config.validate();
    const std::size_t features = graph.features.cols();
    const bool is_emlp = std::holds_alternative<EmlpParams>(model);
    std::visit([](const auto& p) { p.validate(); }, model);
    const auto& first = layers_of(model).front().weights;
    if ((is_emlp ? first.cols() : first.rows()) != features) {
        throw DimensionError("training: model input width does not match " +
                             std::to_string(features) + " features");
    }
    check_mask(graph.train_mask, graph.features.rows(), "train (train mask)");
    check_mask(graph.val_mask, graph.features.rows(), "train (val mask)");
    check_mask(graph.test_mask, graph.features.rows(), "train (test mask)");

    const DenseMatrix features_t = is_emlp ? graph.features.transpose() : DenseMatrix{};
    const AdamConfig adam = config.adam();
    AdamState state = AdamState::zeros_like(layers_of(model));

    TrainHistory history;
    history.best_val_accuracy = -1.0;
    Model best = model;
    Evaluation current = forward(model, graph, features_t);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto [loss, grad_logits] =
            softmax_cross_entropy(current.logits, graph.labels, graph.train_mask);
        if (!std::isfinite(loss)) {
            throw DivergenceError("training: non-finite loss at epoch " + std::to_string(epoch),
                                  epoch);
        }
        const auto grads = backward(model, graph, current.trace, grad_logits);
        adam_step(layers_of(model), grads, state, adam);

        current = forward(model, graph, features_t);
        if (!current.logits.all_finite()) {
            throw DivergenceError(
                "training: non-finite logits after the update at epoch " + std::to_string(epoch),
                epoch);
        }
        const double val = accuracy(current.logits, graph.labels, graph.val_mask);
        history.train_loss.push_back(loss);
        history.val_accuracy.push_back(val);
        if (val > history.best_val_accuracy) {
            history.best_val_accuracy = val;
            history.best_epoch = epoch;
            best = model;
        }
    }
    history.test_accuracy = evaluate(best, graph, graph.test_mask);
    return {std::move(history), std::move(best)};
}

TrainResult train(Model model, const GraphDataset& dataset, const TrainConfig& config) {
    config.validate();
    return train(std::move(model), prepare_graph(dataset, config.preprocess, config.adjacency),
                 config);
}

TrainResult train(const GraphDataset& dataset, const TrainConfig& config) {
    config.validate();
    Model model = init_model(config.model, dataset.num_features(), config.hidden_width,
                             dataset.num_classes, config.base, config.activation, config.seed);
    return train(std::move(model), dataset, config);
}

std::vector<SweepRow> sweep_convexity(const GraphDataset& dataset, const TrainConfig& config,
                                      std::span<const double> shifts, std::size_t threads) {
    for (double c : shifts) {
        if (!(c >= 0.0)) throw DomainError("training: sweep shifts must be nonnegative");
    }
    config.validate();
    const PreparedGraph graph = prepare_graph(dataset, config.preprocess, config.adjacency);

    std::vector<SweepRow> rows(shifts.size());
    auto run_row = [&](std::size_t i) {
        SweepRow& row = rows[i];
        row.shift = shifts[i];
        TrainConfig row_config = config;
        row_config.activation = Activation(ActivationKind::relu, shifts[i]);
        row.metric = convexity_metric_integral(row_config.activation);
        try {
            Model model = init_model(row_config.model, graph.features.cols(),
                                     row_config.hidden_width, graph.num_classes, row_config.base,
                                     row_config.activation, row_config.seed);
            row.test_accuracy = train(std::move(model), graph, row_config).history.test_accuracy;
        } catch (const DivergenceError& e) {
            row.error = e.what();
        }
    };

    const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, rows.size()));
    if (workers == 1) {
        for (std::size_t i = 0; i < rows.size(); ++i) run_row(i);
        return rows;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < rows.size(); i = next++) run_row(i);
        });
    }
    pool.clear();
    return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "c,metric,test_accuracy\n";
    char buf[128];
    for (const auto& row : rows) {
        if (row.test_accuracy) {
            std::snprintf(buf, sizeof(buf), "%g,%.6f,%.6f\n", row.shift, row.metric,
                          *row.test_accuracy);
        } else {
            std::snprintf(buf, sizeof(buf), "%g,%.6f,nan\n", row.shift, row.metric);
        }
        out << buf;
    }
    return out.str();
}

double rank_correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw DimensionError("training: rank correlation needs two equal-length series (n >= 2)");
    }
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace pcnn
