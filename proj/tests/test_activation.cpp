#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pcnn/activation.hpp"
#include "pcnn/error.hpp"
#include "test_support.hpp"

using namespace pcnn;
using pcnn::testing::rel_err;

namespace {

// Trapezoid rule, 10^6 intervals, evaluated offline on the closed-form residuals.
constexpr double kSoftplusMetric = 0.523074064995;
constexpr double kBendMetric = 0.024330296270;

const std::vector<ActivationKind> kKinds = {ActivationKind::relu, ActivationKind::softplus,
                                            ActivationKind::bend};

}  // namespace

TEST(Activation, ReluAtTwo) {
    const auto v = Activation(ActivationKind::relu).eval(2.0);
    EXPECT_EQ(v.value, 2.0);
    EXPECT_EQ(v.deriv1, 1.0);
    EXPECT_EQ(v.deriv2, 0.0);
}

TEST(Activation, ReluAtZeroAndNegative) {
    const Activation relu(ActivationKind::relu);
    EXPECT_EQ(relu.eval(0.0).deriv1, 1.0);
    EXPECT_EQ(relu.eval(0.0).deriv2, 0.0);
    EXPECT_EQ(relu.eval(-3.0).value, 0.0);
    EXPECT_EQ(relu.eval(-3.0).deriv1, 0.0);
}

TEST(Activation, BendAtZero) {
    const auto v = Activation(ActivationKind::bend).eval(0.0);
    EXPECT_NEAR(v.value, 0.0, 1e-15);
    EXPECT_NEAR(v.deriv1, 1.0, 1e-15);
    EXPECT_NEAR(v.deriv2, 0.5, 1e-15);
}

TEST(Activation, SoftplusAtZero) {
    const auto v = Activation(ActivationKind::softplus).eval(0.0);
    EXPECT_NEAR(v.value, std::log(2.0), 1e-15);
    EXPECT_NEAR(v.deriv1, 0.5, 1e-15);
    EXPECT_NEAR(v.deriv2, 0.25, 1e-15);
}

TEST(Activation, SoftplusIsOverflowSafe) {
    const Activation sp(ActivationKind::softplus);
    const auto big = sp.eval(800.0);
    EXPECT_EQ(big.value, 800.0);
    EXPECT_EQ(big.deriv1, 1.0);
    EXPECT_TRUE(std::isfinite(big.deriv2));
    EXPECT_LT(std::abs(sp.value(31.0) - 31.0), 1e-13);
    const auto tiny = sp.eval(-800.0);
    EXPECT_GE(tiny.value, 0.0);
    EXPECT_TRUE(std::isfinite(tiny.value));
}

TEST(Activation, ShiftEntersValueOnly) {
    for (auto kind : kKinds) {
        const Activation plain(kind), shifted(kind, 2.5);
        for (double x : {0.1, 1.0, 4.0}) {
            EXPECT_DOUBLE_EQ(shifted.value(x), plain.value(x) + 2.5);
            EXPECT_EQ(shifted.eval(x).deriv1, plain.eval(x).deriv1);
            EXPECT_EQ(shifted.eval(x).deriv2, plain.eval(x).deriv2);
        }
    }
}

TEST(Activation, NegativeShiftThrows) {
    EXPECT_THROW(Activation(ActivationKind::relu, -0.1), DomainError);
}

TEST(Activation, NamesRoundTrip) {
    for (auto kind : kKinds) EXPECT_EQ(parse_activation_kind(to_string(kind)), kind);
    EXPECT_FALSE(parse_activation_kind("sigmoid").has_value());
}

TEST(Activation, DerivativesMatchFiniteDifferences) {
    const double h = 1e-5;
    for (auto kind : {ActivationKind::softplus, ActivationKind::bend, ActivationKind::relu}) {
        const Activation act(kind, 0.5);
        for (double x : log_grid(0.01, 20.0, 60)) {
            const auto v = act.eval(x);
            const double d1 = (act.value(x + h) - act.value(x - h)) / (2 * h);
            const double d2 = (act.deriv1(x + h) - act.deriv1(x - h)) / (2 * h);
            EXPECT_LE(rel_err(v.deriv1, d1, 1e-6), 1e-6) << act.name() << " x=" << x;
            EXPECT_LE(std::abs(v.deriv2 - d2), 1e-6 * std::max(std::abs(v.deriv2), 1e-3))
                << act.name() << " x=" << x;
        }
    }
}

TEST(Activation, PositiveValueAndSlopeOnPositiveAxis) {
    for (auto kind : kKinds) {
        const Activation act(kind);
        for (double x : log_grid(1e-6, 1e6, 200)) {
            EXPECT_GT(act.value(x), 0.0);
            EXPECT_GT(act.deriv1(x), 0.0);
        }
    }
}

TEST(ConditionOne, ReluIsExactlyZero) {
    const Activation relu(ActivationKind::relu);
    for (double x : {1e-3, 0.5, 3.0, 77.0}) EXPECT_EQ(condition_one_residual(relu, x), 0.0);
}

TEST(ConditionOne, ReluShiftGivesShift) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> shift(0.0, 100.0), xs(0.001, 100.0);
    for (int t = 0; t < 100; ++t) {
        const double c = shift(rng);
        const double x = xs(rng);
        EXPECT_NEAR(condition_one_residual(Activation(ActivationKind::relu, c), x), c,
                    1e-12 * std::max(1.0, c * x));
    }
}

TEST(ConditionOne, SigmoidIsNegativeAtThree) {
    const double r = condition_one_residual(sigmoid_activation(), 3.0);
    EXPECT_LT(r, 0.0);
    EXPECT_NEAR(r, -0.0799454426385, 1e-10);
}

TEST(ConditionTwo, ReluAtOne) {
    EXPECT_EQ(condition_two_residual(Activation(ActivationKind::relu), 1.0), -1.0);
}

TEST(ConditionTwo, SoftplusAtOneIsNegative) {
    const double r = condition_two_residual(Activation(ActivationKind::softplus), 1.0);
    EXPECT_LT(r, 0.0);
    EXPECT_NEAR(r, -0.276243726154, 1e-10);
}

TEST(ConditionTwo, EqualsDerivativeOfLogSlopeTimesValueSquared) {
    const double h = 1e-5;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> xs(0.1, 5.0);
    for (auto kind : {ActivationKind::softplus, ActivationKind::bend}) {
        const Activation act(kind);
        auto ratio = [&](double x) { return act.deriv1(x) / act.value(x); };
        for (int t = 0; t < 20; ++t) {
            const double x = xs(rng);
            const double fd = (ratio(x + h) - ratio(x - h)) / (2 * h);
            const double s = act.value(x);
            EXPECT_NEAR(condition_two_residual(act, x), fd * s * s, 1e-8);
        }
    }
}

TEST(CheckCondition, ReluAndSoftplusSatisfyConditionOne) {
    const auto grid = log_grid(1e-3, 1e2, 101);
    for (auto kind : {ActivationKind::relu, ActivationKind::softplus}) {
        for (double c : {0.0, 1.0, 50.0}) {
            const auto report = check_condition(Activation(kind, c), ConvexityCondition::one, grid);
            EXPECT_TRUE(report.satisfied) << to_string(kind) << " c=" << c;
            EXPECT_EQ(report.residuals.size(), grid.size());
        }
    }
}

// Unshifted bend: residual tends to -3/4 + 3/(2x), crossing zero near x = 1.10424.
TEST(CheckCondition, UnshiftedBendFailsConditionOneAboveCrossover) {
    const Activation bend(ActivationKind::bend);
    EXPECT_NEAR(condition_one_residual(bend, 100.0), -0.7350139970253906, 1e-12);
    EXPECT_GT(condition_one_residual(bend, 1.10), 0.0);
    EXPECT_LT(condition_one_residual(bend, 1.11), 0.0);
    EXPECT_TRUE(check_condition(bend, ConvexityCondition::one, log_grid(1e-3, 1.1, 60)).satisfied);
    const auto full = check_condition(bend, ConvexityCondition::one, log_grid(1e-3, 1e2, 101));
    EXPECT_FALSE(full.satisfied);
    EXPECT_NEAR(full.worst_residual, -0.7350139970253906, 1e-12);
}

TEST(CheckCondition, ShiftedBendSatisfiesConditionOne) {
    const auto grid = log_grid(1e-3, 1e2, 101);
    for (double c : {0.5, 1.0, 50.0})
        EXPECT_TRUE(check_condition(Activation(ActivationKind::bend, c), ConvexityCondition::one, grid).satisfied)
            << c;
    EXPECT_NEAR(check_condition(Activation(ActivationKind::bend, 1.0), ConvexityCondition::one, grid).worst_residual,
                0.7650109973503731, 1e-9);
}

TEST(CheckCondition, SoftplusFailsConditionTwo) {
    const auto report = check_condition(Activation(ActivationKind::softplus),
                                        ConvexityCondition::two, log_grid(1e-3, 1e2, 101));
    EXPECT_FALSE(report.satisfied);
    EXPECT_LT(report.worst_residual, -kConditionTolerance);
}

TEST(CheckCondition, SatisfiedIffMinResidualAboveTolerance) {
    const auto grid = log_grid(1e-3, 1e2, 50);
    for (auto kind : kKinds) {
        for (auto cond : {ConvexityCondition::one, ConvexityCondition::two}) {
            const auto report = check_condition(Activation(kind), cond, grid);
            const double lowest = *std::min_element(report.residuals.begin(), report.residuals.end());
            EXPECT_EQ(report.worst_residual, lowest);
            EXPECT_EQ(report.satisfied, lowest >= -kConditionTolerance);
        }
    }
}

TEST(CheckCondition, SigmoidFailsConditionOne) {
    const auto report =
        check_condition(sigmoid_activation(), ConvexityCondition::one, log_grid(1e-3, 1e2, 101));
    EXPECT_FALSE(report.satisfied);
}

TEST(CheckCondition, RejectsEmptyOrNonPositiveGrid) {
    const Activation act(ActivationKind::softplus);
    EXPECT_THROW(check_condition(act, ConvexityCondition::one, {}), DomainError);
    EXPECT_THROW(check_condition(act, ConvexityCondition::one, {1.0, 0.0}), DomainError);
}

TEST(LogGrid, EndpointsAndSpacing) {
    const auto g = log_grid(1e-3, 1e2, 6);
    ASSERT_EQ(g.size(), 6u);
    EXPECT_DOUBLE_EQ(g.front(), 1e-3);
    EXPECT_DOUBLE_EQ(g.back(), 1e2);
    EXPECT_NEAR(g[1], 1e-2, 1e-15);
}

TEST(GaussLegendre, IntegratesPolynomialsExactly) {
    const auto rule = gauss_legendre(16);
    for (int degree = 0; degree <= 31; ++degree) {
        double sum = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i)
            sum += rule.weights[i] * std::pow(rule.nodes[i], degree);
        const double exact = degree % 2 == 1 ? 0.0 : 2.0 / (degree + 1);
        EXPECT_NEAR(sum, exact, 1e-14) << "degree " << degree;
    }
}

TEST(ConvexityMetric, ReluIsZero) {
    EXPECT_NEAR(convexity_metric_integral(Activation(ActivationKind::relu)), 0.0, 1e-9);
}

TEST(ConvexityMetric, ReluShiftIsShift) {
    for (double c : {1.0, 7.0, 50.0, 99.0}) {
        EXPECT_NEAR(convexity_metric_integral(Activation(ActivationKind::relu, c)), c, 1e-6);
    }
}

TEST(ConvexityMetric, AdditiveInShiftForRelu) {
    const double base = convexity_metric_integral(Activation(ActivationKind::relu));
    for (double c : {0.25, 3.0, 42.0}) {
        EXPECT_NEAR(convexity_metric_integral(Activation(ActivationKind::relu, c)) - base, c, 1e-6);
    }
}

TEST(ConvexityMetric, SoftplusRegressionConstant) {
    EXPECT_NEAR(convexity_metric_integral(Activation(ActivationKind::softplus)), kSoftplusMetric,
                1e-10);
}

TEST(ConvexityMetric, BendRegressionConstant) {
    EXPECT_NEAR(convexity_metric_integral(Activation(ActivationKind::bend)), kBendMetric, 1e-10);
}

TEST(ConvexityMetric, DeterministicAndStableAcrossPointCounts) {
    const Activation sp(ActivationKind::softplus);
    EXPECT_EQ(convexity_metric_integral(sp, 64), convexity_metric_integral(sp, 64));
    EXPECT_NEAR(convexity_metric_integral(sp, 16), convexity_metric_integral(sp, 256), 1e-12);
}

TEST(ConvexityMetric, TooFewPointsThrows) {
    EXPECT_THROW(convexity_metric_integral(Activation(ActivationKind::relu), 8), DomainError);
}
