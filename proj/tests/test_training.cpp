#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pcnn/convexity.hpp"
#include "pcnn/error.hpp"
#include "pcnn/training.hpp"
#include "test_support.hpp"

using namespace pcnn;
using pcnn::testing::random_matrix;
using pcnn::testing::synthetic_graph;

namespace {

std::vector<std::uint32_t> all_rows(std::size_t n) {
    std::vector<std::uint32_t> m(n);
    for (std::uint32_t i = 0; i < n; ++i) m[i] = i;
    return m;
}

// 3-node path with two separable classes; every node is used for fitting and reporting.
PreparedGraph toy_graph() {
    GraphDataset ds = pcnn::testing::three_node_fixture();
    PreparedGraph g = prepare_graph(ds, {2.0, 0.1}, AdjacencyMode::self_loop_symmetric);
    g.train_mask = all_rows(3);
    g.val_mask = all_rows(3);
    g.test_mask = all_rows(3);
    return g;
}

TrainConfig small_config(ModelKind kind = ModelKind::egcn) {
    TrainConfig c;
    c.model = kind;
    c.epochs = 60;
    c.hidden_width = 8;
    c.learning_rate = 0.05;
    return c;
}

}  // namespace

TEST(SoftmaxCrossEntropy, UniformLogitsGiveLogK) {
    const DenseMatrix logits(4, 5, 0.7);
    const std::vector<std::uint16_t> labels{0, 1, 2, 3};
    const std::vector<std::uint32_t> mask{0, 2, 3};
    EXPECT_NEAR(softmax_cross_entropy(logits, labels, mask).loss, std::log(5.0), 1e-14);
}

TEST(SoftmaxCrossEntropy, ConfidentCorrectLogitsGiveNearZero) {
    const auto logits = DenseMatrix::from_rows({{800, 0, 0}, {0, 900, 0}});
    const auto out = softmax_cross_entropy(logits, std::vector<std::uint16_t>{0, 1}, std::vector<std::uint32_t>{0, 1});
    EXPECT_TRUE(std::isfinite(out.loss));
    EXPECT_LT(out.loss, 1e-300 + 1e-12);
}

TEST(SoftmaxCrossEntropy, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 20; ++t) {
        const auto logits = random_matrix(rng, 4, 3, -3, 3);
        const std::vector<std::uint16_t> labels{2, 0, 1, 1};
        const std::vector<std::uint32_t> mask{0, 1, 3};
        const auto analytic = softmax_cross_entropy(logits, labels, mask).gradient;
        const ScalarField f = [&](std::span<const double> th) {
            return softmax_cross_entropy(DenseMatrix(4, 3, std::vector<double>(th.begin(), th.end())), labels, mask)
                .loss;
        };
        const auto numeric = fd_gradient(f, logits.data(), 1e-5);
        for (std::size_t i = 0; i < numeric.size(); ++i) {
            const double a = analytic.data()[i];
            EXPECT_LE(std::abs(a - numeric[i]), 1e-6 * std::max(std::abs(a), 1e-3));
        }
        for (double v : analytic.row(2)) EXPECT_EQ(v, 0.0);
    }
}

TEST(SoftmaxCrossEntropy, Errors) {
    const DenseMatrix logits(2, 2);
    EXPECT_THROW(softmax_cross_entropy(logits, std::vector<std::uint16_t>{0, 1}, std::vector<std::uint32_t>{}),
                 DomainError);
    EXPECT_THROW(softmax_cross_entropy(logits, std::vector<std::uint16_t>{0, 2}, std::vector<std::uint32_t>{1}),
                 DomainError);
}

TEST(Accuracy, PerfectAndConstantPredictors) {
    const auto logits = DenseMatrix::from_rows({{1, 0}, {0, 1}, {1, 0}, {0, 1}});
    const std::vector<std::uint16_t> labels{0, 1, 0, 1};
    const std::vector<std::uint32_t> mask{0, 1, 2, 3};
    EXPECT_EQ(accuracy(logits, labels, mask), 1.0);
    EXPECT_EQ(accuracy(DenseMatrix(4, 2, 3.0), labels, mask), 0.5);
}

TEST(Accuracy, TiesGoToLowestIndex) {
    const auto logits = DenseMatrix::from_rows({{2, 2, 1}});
    EXPECT_EQ(accuracy(logits, std::vector<std::uint16_t>{0}, std::vector<std::uint32_t>{0}), 1.0);
    EXPECT_EQ(accuracy(logits, std::vector<std::uint16_t>{1}, std::vector<std::uint32_t>{0}), 0.0);
}

TEST(Accuracy, MatchesBruteForceCount) {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> cls(0, 3);
    for (int t = 0; t < 10; ++t) {
        const auto logits = random_matrix(rng, 50, 4);
        std::vector<std::uint16_t> labels(50);
        for (auto& l : labels) l = static_cast<std::uint16_t>(cls(rng));
        std::vector<std::uint32_t> mask;
        for (std::uint32_t i = 0; i < 50; i += 2) mask.push_back(i);
        int correct = 0;
        for (auto i : mask) {
            int best = 0;
            for (int c = 1; c < 4; ++c)
                if (logits(i, c) > logits(i, best)) best = c;
            correct += best == labels[i];
        }
        EXPECT_DOUBLE_EQ(accuracy(logits, labels, mask), correct / 25.0);
    }
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
    std::vector<LayerParams> p{{DenseMatrix::from_rows({{0.3, -0.2}})}};
    const auto before = p;
    AdamState s = AdamState::zeros_like(p);
    adam_step(p, {DenseMatrix(1, 2)}, s, {});
    EXPECT_EQ(p, before);
    EXPECT_EQ(s.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRateTimesSign) {
    std::vector<LayerParams> p{{DenseMatrix::from_rows({{1.0, 1.0, 1.0}})}};
    AdamState s = AdamState::zeros_like(p);
    adam_step(p, {DenseMatrix::from_rows({{0.5, -3.0, 1e-3}})}, s, {0.01});
    EXPECT_NEAR(p[0].weights(0, 0), 0.99, 1e-7);
    EXPECT_NEAR(p[0].weights(0, 1), 1.01, 1e-7);
    EXPECT_NEAR(p[0].weights(0, 2), 0.99, 1e-7);
}

TEST(Adam, TwoStepHandTrace) {
    std::vector<LayerParams> p{{DenseMatrix::from_rows({{0.5}})}};
    AdamState s = AdamState::zeros_like(p);
    adam_step(p, {DenseMatrix::from_rows({{0.2}})}, s, {0.01});
    EXPECT_NEAR(p[0].weights(0, 0), 0.4900000005, 1e-12);
    adam_step(p, {DenseMatrix::from_rows({{-0.1}})}, s, {0.01});
    EXPECT_NEAR(p[0].weights(0, 0), 0.4873366302718676, 1e-12);
    EXPECT_NEAR(s.first_moment[0](0, 0), 0.008, 1e-15);
    EXPECT_NEAR(s.second_moment[0](0, 0), 4.996e-5, 1e-18);
}

TEST(Adam, ZeroLearningRateIsIdentity) {
    std::mt19937_64 rng(3);
    std::vector<LayerParams> p{{random_matrix(rng, 3, 2)}, {random_matrix(rng, 2, 2)}};
    const auto before = p;
    AdamState s = AdamState::zeros_like(p);
    for (int t = 0; t < 5; ++t) adam_step(p, {random_matrix(rng, 3, 2), random_matrix(rng, 2, 2)}, s, {0.0});
    EXPECT_EQ(p, before);
}

TEST(Adam, ShapeMismatchThrows) {
    std::vector<LayerParams> p{{DenseMatrix(2, 2)}};
    AdamState s = AdamState::zeros_like(p);
    EXPECT_THROW(adam_step(p, {DenseMatrix(2, 3)}, s, {}), DimensionError);
    EXPECT_THROW(adam_step(p, {}, s, {}), DimensionError);
}

TEST(TrainConfig, Validation) {
    TrainConfig c;
    c.hidden_width = 0;
    EXPECT_THROW(c.validate(), DomainError);
    c = TrainConfig{};
    c.epochs = 0;
    EXPECT_THROW(c.validate(), DomainError);
    c = TrainConfig{};
    c.learning_rate = 0.0;
    EXPECT_THROW(c.validate(), DomainError);
    c = TrainConfig{};
    c.preprocess.b = 1.0;
    EXPECT_THROW(c.validate(), DomainError);
}

TEST(InitModel, GlorotBoundsAndShapes) {
    const auto m = init_model(ModelKind::egcn, 10, 6, 3, 2.0, Activation(ActivationKind::softplus), 7);
    const auto& p = std::get<EgcnParams>(m);
    ASSERT_EQ(p.layers.size(), 2u);
    EXPECT_EQ(p.layers[0].weights.rows(), 10u);
    EXPECT_EQ(p.layers[1].weights.cols(), 3u);
    for (double v : p.layers[0].weights.data()) EXPECT_LE(std::abs(v), std::sqrt(6.0 / 16.0));
    const auto e = init_model(ModelKind::emlp, 10, 6, 3, 2.0, Activation(ActivationKind::softplus), 7);
    EXPECT_EQ(std::get<EmlpParams>(e).layers[0].weights.rows(), 6u);
    EXPECT_EQ(init_model(ModelKind::egcn, 10, 6, 3, 2.0, Activation(ActivationKind::softplus), 7), m);
}

TEST(Train, ToyNodesEmlpWidthTwoFitsTrainingSet) {
    const auto g = toy_graph();
    TrainConfig c;
    c.model = ModelKind::emlp;
    c.hidden_width = 2;
    c.epochs = 200;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        c.seed = seed;
        const auto model = init_model(ModelKind::emlp, 2, 2, 2, 2.0, c.activation, seed);
        const auto result = train(model, g, c);
        EXPECT_EQ(evaluate(result.best, g, g.train_mask), 1.0) << "seed " << seed;
    }
}

TEST(Train, WidthOnePredictsOneClassForEveryNode) {
    const auto g = toy_graph();
    TrainConfig c;
    c.hidden_width = 1;
    c.epochs = 200;
    const auto result = train(init_model(ModelKind::egcn, 2, 1, 2, 2.0, c.activation, 1), g, c);
    const auto logits = predict_logits(result.best, g);
    const bool first = logits(0, 1) > logits(0, 0);
    for (std::size_t i = 1; i < 3; ++i) EXPECT_EQ(logits(i, 1) > logits(i, 0), first);
    EXPECT_LT(evaluate(result.best, g, g.train_mask), 1.0);
}

TEST(Train, BitIdenticalForFixedSeed) {
    const auto ds = synthetic_graph(120, 3, 24, 5);
    for (auto kind : {ModelKind::egcn, ModelKind::emlp}) {
        const auto c = small_config(kind);
        const auto a = train(ds, c);
        const auto b = train(ds, c);
        EXPECT_EQ(a.history.train_loss, b.history.train_loss);
        EXPECT_EQ(a.history.val_accuracy, b.history.val_accuracy);
        EXPECT_EQ(a.history.best_epoch, b.history.best_epoch);
        EXPECT_EQ(a.history.test_accuracy, b.history.test_accuracy);
        EXPECT_EQ(a.best, b.best);
    }
}

TEST(Train, HistoryInvariants) {
    const auto ds = synthetic_graph(120, 3, 24, 6);
    const auto c = small_config();
    const auto result = train(ds, c);
    const auto& h = result.history;
    ASSERT_EQ(h.train_loss.size(), c.epochs);
    ASSERT_EQ(h.val_accuracy.size(), c.epochs);
    for (double l : h.train_loss) EXPECT_TRUE(std::isfinite(l));
    const double best = *std::max_element(h.val_accuracy.begin(), h.val_accuracy.end());
    EXPECT_EQ(h.best_val_accuracy, best);
    const auto first_best = std::find(h.val_accuracy.begin(), h.val_accuracy.end(), best) - h.val_accuracy.begin();
    EXPECT_EQ(h.best_epoch, static_cast<std::size_t>(first_best));
    const auto g = prepare_graph(ds, c.preprocess, c.adjacency);
    EXPECT_EQ(evaluate(result.best, g, g.val_mask), h.best_val_accuracy);
    EXPECT_EQ(evaluate(result.best, g, g.test_mask), h.test_accuracy);
}

TEST(Train, LearnsSyntheticCitationGraph) {
    const auto ds = synthetic_graph(300, 3, 30, 7);
    auto c = small_config();
    c.epochs = 100;
    EXPECT_GT(train(ds, c).history.test_accuracy, 0.8);
    c.model = ModelKind::emlp;
    EXPECT_GT(train(ds, c).history.test_accuracy, 0.6);
}

TEST(Train, LossDecreasesOverTraining) {
    const auto ds = synthetic_graph(150, 3, 24, 8);
    const auto h = train(ds, small_config()).history;
    EXPECT_LT(h.train_loss.back(), h.train_loss.front());
}

TEST(Train, DivergenceReportsEpoch) {
    const auto ds = synthetic_graph(60, 3, 12, 9);
    auto c = small_config();
    c.learning_rate = 1e4;
    c.base = 10.0;
    try {
        train(ds, c);
        FAIL() << "expected divergence";
    } catch (const DivergenceError& e) {
        EXPECT_LT(e.epoch, c.epochs);
        EXPECT_NE(std::string(e.what()).find("training:"), std::string::npos);
    }
}

TEST(Train, InputWidthMismatchThrows) {
    const auto ds = synthetic_graph(60, 3, 12, 10);
    const auto model = init_model(ModelKind::egcn, 7, 4, 3, 2.0, Activation(ActivationKind::softplus), 1);
    EXPECT_THROW(train(model, ds, small_config()), DimensionError);
}

TEST(TrainHistory, CsvAndSummaryFormat) {
    TrainHistory h;
    h.train_loss = {1.5, 1.25};
    h.val_accuracy = {0.5, 0.75};
    h.best_epoch = 1;
    h.best_val_accuracy = 0.75;
    h.test_accuracy = 0.7;
    EXPECT_EQ(h.to_csv(), "epoch,train_loss,val_acc\n0,1.5,0.500000\n1,1.25,0.750000\n");
    EXPECT_EQ(h.summary(), "summary: epochs=2 best_epoch=1 best_val_acc=0.7500 test_acc=0.7000");
}

TEST(Sweep, MetricEqualsShiftAndRowsInOrder) {
    const auto ds = synthetic_graph(90, 3, 18, 11);
    auto c = small_config();
    c.epochs = 20;
    const std::vector<double> shifts{5.0, 0.0, 2.5};
    const auto rows = sweep_convexity(ds, c, shifts);
    ASSERT_EQ(rows.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(rows[i].shift, shifts[i]);
        EXPECT_NEAR(rows[i].metric, shifts[i], 1e-6);
        EXPECT_TRUE(rows[i].test_accuracy.has_value());
    }
}

TEST(Sweep, ZeroShiftRowEqualsPlainReluRun) {
    const auto ds = synthetic_graph(90, 3, 18, 12);
    auto c = small_config();
    c.epochs = 20;
    const std::vector<double> shifts{0.0};
    const auto rows = sweep_convexity(ds, c, shifts);
    c.activation = Activation(ActivationKind::relu);
    EXPECT_EQ(rows[0].test_accuracy, train(ds, c).history.test_accuracy);
}

TEST(Sweep, ThreadedMatchesSequential) {
    const auto ds = synthetic_graph(90, 3, 18, 13);
    auto c = small_config();
    c.epochs = 15;
    const std::vector<double> shifts{0, 1, 2, 3, 4};
    const auto a = sweep_convexity(ds, c, shifts, 1);
    const auto b = sweep_convexity(ds, c, shifts, 3);
    for (std::size_t i = 0; i < shifts.size(); ++i) EXPECT_EQ(a[i].test_accuracy, b[i].test_accuracy);
}

TEST(Sweep, DivergenceRecordedPerRow) {
    const auto ds = synthetic_graph(60, 3, 12, 14);
    auto c = small_config();
    c.learning_rate = 1e4;
    c.base = 10.0;
    const std::vector<double> shifts{0.0, 1.0};
    const auto rows = sweep_convexity(ds, c, shifts);
    for (const auto& r : rows) {
        EXPECT_FALSE(r.test_accuracy.has_value());
        EXPECT_FALSE(r.error.empty());
    }
    EXPECT_EQ(sweep_to_csv(rows), "c,metric,test_accuracy\n0,0.000000,nan\n1,1.000000,nan\n");
}

TEST(Sweep, NegativeShiftThrows) {
    const auto ds = synthetic_graph(60, 3, 12, 15);
    const std::vector<double> shifts{-1.0};
    EXPECT_THROW(sweep_convexity(ds, small_config(), shifts), DomainError);
}

TEST(RankCorrelation, KnownValues) {
    const std::vector<double> x{1, 2, 3, 4, 5};
    const std::vector<double> up{0.1, 0.2, 0.5, 0.7, 0.9};
    const std::vector<double> down{5, 4, 3, 2, 1};
    EXPECT_DOUBLE_EQ(rank_correlation(x, up), 1.0);
    EXPECT_DOUBLE_EQ(rank_correlation(x, down), -1.0);
    const std::vector<double> a{1, 2, 2, 3, 5};
    const std::vector<double> b{5, 3, 4, 4, 1};
    EXPECT_NEAR(rank_correlation(a, b), -0.7631578947368421, 1e-12);
    EXPECT_THROW(rank_correlation(x, std::vector<double>{1.0}), DimensionError);
}
