#pragma once

#include <concepts>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pcnn {

enum class ActivationKind : std::uint8_t { relu = 0, softplus = 1, bend = 2 };

std::string_view to_string(ActivationKind kind);
std::optional<ActivationKind> parse_activation_kind(std::string_view name);

struct ActivationValue {
    double value;
    double deriv1;
    double deriv2;
};

// One of the catalogued activations plus a nonnegative additive shift c.
// The shift enters the value only; derivatives are those of the unshifted function.
class Activation {
public:
    // Throws DomainError if shift < 0 or the positivity checks on x > 0 fail.
    Activation(ActivationKind kind, double shift = 0.0);

    ActivationKind kind() const { return kind_; }
    double shift() const { return shift_; }
    std::string name() const;

    ActivationValue eval(double x) const;
    double value(double x) const;
    double deriv1(double x) const;

    bool operator==(const Activation&) const = default;

private:
    ActivationKind kind_;
    double shift_;
};

// Diagnostic escape hatch: user-supplied callables, no positivity checks.
struct RawActivation {
    std::string name;
    std::function<double(double)> value;
    std::function<double(double)> deriv1;
    std::function<double(double)> deriv2;

    ActivationValue eval(double x) const { return {value(x), deriv1(x), deriv2(x)}; }
};

RawActivation sigmoid_activation();

template <class A>
concept ActivationLike = requires(const A& act, double x) {
    { act.eval(x) } -> std::same_as<ActivationValue>;
};

// x s'' s + s s' - x s'^2, nonnegative where the two-layer condition holds.
template <ActivationLike A>
double condition_one_residual(const A& act, double x) {
    const auto [s, d1, d2] = act.eval(x);
    return x * d2 * s + s * d1 - x * d1 * d1;
}

// s'' s - s'^2, nonnegative where the deep-network condition holds.
template <ActivationLike A>
double condition_two_residual(const A& act, double x) {
    const auto [s, d1, d2] = act.eval(x);
    return d2 * s - d1 * d1;
}

enum class ConvexityCondition { one = 1, two = 2 };

struct ConditionReport {
    ConvexityCondition condition;
    std::vector<double> grid;
    std::vector<double> residuals;
    bool satisfied;
    double worst_x;
    double worst_residual;
};

inline constexpr double kConditionTolerance = 1e-12;

ConditionReport check_condition(const Activation& act, ConvexityCondition condition,
                                const std::vector<double>& grid);
ConditionReport check_condition(const RawActivation& act, ConvexityCondition condition,
                                const std::vector<double>& grid);

// n points log-spaced from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, std::size_t n);

// Integral of the condition-one residual over [0, 1] by composite 16-point
// Gauss-Legendre panels; quadrature_points / 16 panels are used.
double convexity_metric_integral(const Activation& act, std::size_t quadrature_points = 64);

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Gauss-Legendre nodes and weights on [-1, 1].
QuadratureRule gauss_legendre(std::size_t n);

}  // namespace pcnn
