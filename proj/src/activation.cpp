#include "pcnn/activation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pcnn/error.hpp"

namespace pcnn {

namespace {

constexpr double kSoftplusCutoff = 30.0;

ActivationValue relu_eval(double x) {
    // s'(0) = 1 and s'' = 0 everywhere.
    if (x >= 0.0) return {x, 1.0, 0.0};
    return {0.0, 0.0, 0.0};
}

ActivationValue softplus_eval(double x) {
    if (x > kSoftplusCutoff) {
        const double tail = std::exp(-x);
        return {x, 1.0, tail};
    }
    if (x < -kSoftplusCutoff) {
        const double e = std::exp(x);
        return {e, e, e};
    }
    const double sig = 1.0 / (1.0 + std::exp(-x));
    return {std::log1p(std::exp(x)), sig, sig * (1.0 - sig)};
}

ActivationValue bend_eval(double x) {
    const double r = std::sqrt(x * x + 1.0);
    return {(r - 1.0) / 2.0 + x, x / (2.0 * r) + 1.0, 1.0 / (2.0 * r * r * r)};
}

template <ActivationLike A>
ConditionReport check_condition_impl(const A& act, ConvexityCondition condition,
                                     const std::vector<double>& grid) {
    if (grid.empty()) {
        throw DomainError("activations: check_condition needs a non-empty grid");
    }
    ConditionReport report{condition, grid, {}, true, grid.front(), 0.0};
    report.residuals.reserve(grid.size());
    double worst = std::numeric_limits<double>::infinity();
    for (double x : grid) {
        if (!(x > 0.0)) {
            throw DomainError("activations: condition grid point must be > 0, got " +
                              std::to_string(x));
        }
        const double r = condition == ConvexityCondition::one ? condition_one_residual(act, x)
                                                              : condition_two_residual(act, x);
        report.residuals.push_back(r);
        if (r < worst) {
            worst = r;
            report.worst_x = x;
        }
    }
    report.worst_residual = worst;
    report.satisfied = worst >= -kConditionTolerance;
    return report;
}

}  // namespace

std::string_view to_string(ActivationKind kind) {
    switch (kind) {
        case ActivationKind::relu: return "relu";
        case ActivationKind::softplus: return "softplus";
        case ActivationKind::bend: return "bend";
    }
    return "unknown";
}

std::optional<ActivationKind> parse_activation_kind(std::string_view name) {
    if (name == "relu") return ActivationKind::relu;
    if (name == "softplus") return ActivationKind::softplus;
    if (name == "bend") return ActivationKind::bend;
    return std::nullopt;
}

Activation::Activation(ActivationKind kind, double shift) : kind_(kind), shift_(shift) {
    if (!(shift >= 0.0) || !std::isfinite(shift)) {
        throw DomainError("activations: shift must be finite and >= 0, got " +
                          std::to_string(shift));
    }
    for (double x : log_grid(1e-6, 1e6, 121)) {
        const auto v = eval(x);
        if (!(v.value > 0.0) || !(v.deriv1 > 0.0)) {
            throw DomainError("activations: " + name() + " is not positive and increasing at x=" +
                              std::to_string(x));
        }
    }
}

std::string Activation::name() const {
    std::string n(to_string(kind_));
    if (shift_ != 0.0) n += "+" + std::to_string(shift_);
    return n;
}

ActivationValue Activation::eval(double x) const {
    ActivationValue v{};
    switch (kind_) {
        case ActivationKind::relu: v = relu_eval(x); break;
        case ActivationKind::softplus: v = softplus_eval(x); break;
        case ActivationKind::bend: v = bend_eval(x); break;
    }
    v.value += shift_;
    return v;
}

double Activation::value(double x) const {
    switch (kind_) {
        case ActivationKind::relu: return std::max(x, 0.0) + shift_;
        case ActivationKind::softplus: return softplus_eval(x).value + shift_;
        case ActivationKind::bend: return bend_eval(x).value + shift_;
    }
    return 0.0;
}

double Activation::deriv1(double x) const { return eval(x).deriv1; }

RawActivation sigmoid_activation() {
    auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    return RawActivation{
        "sigmoid",
        sig,
        [sig](double x) {
            const double s = sig(x);
            return s * (1.0 - s);
        },
        [sig](double x) {
            const double s = sig(x);
            return s * (1.0 - s) * (1.0 - 2.0 * s);
        },
    };
}

ConditionReport check_condition(const Activation& act, ConvexityCondition condition,
                                const std::vector<double>& grid) {
    return check_condition_impl(act, condition, grid);
}

ConditionReport check_condition(const RawActivation& act, ConvexityCondition condition,
                                const std::vector<double>& grid) {
    return check_condition_impl(act, condition, grid);
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
    if (!(lo > 0.0) || !(hi >= lo) || n == 0) {
        throw DomainError("activations: invalid log grid bounds");
    }
    std::vector<double> grid(n);
    if (n == 1) {
        grid[0] = lo;
        return grid;
    }
    const double l0 = std::log(lo);
    const double step = (std::log(hi) - l0) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) grid[i] = std::exp(l0 + step * static_cast<double>(i));
    grid.back() = hi;
    return grid;
}

QuadratureRule gauss_legendre(std::size_t n) {
    if (n == 0) throw DomainError("activations: Gauss-Legendre needs n >= 1");
    QuadratureRule rule{std::vector<double>(n), std::vector<double>(n)};
    // Newton iteration on P_n from the Chebyshev-like initial guesses; roots are symmetric.
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = 0.0;
            for (std::size_t k = 1; k <= n; ++k) {
                const double p2 = p1;
                p1 = p0;
                const double kk = static_cast<double>(k);
                p0 = ((2.0 * kk - 1.0) * z * p1 - (kk - 1.0) * p2) / kk;
            }
            dp = static_cast<double>(n) * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        rule.nodes[i] = -z;
        rule.nodes[n - 1 - i] = z;
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

double convexity_metric_integral(const Activation& act, std::size_t quadrature_points) {
    if (quadrature_points < 16) {
        throw DomainError("activations: convexity metric needs at least 16 quadrature points");
    }
    static const QuadratureRule rule = gauss_legendre(16);
    const std::size_t panels = quadrature_points / 16;
    const double width = 1.0 / static_cast<double>(panels);
    double total = 0.0;
    for (std::size_t p = 0; p < panels; ++p) {
        const double mid = (static_cast<double>(p) + 0.5) * width;
        double panel = 0.0;
        for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
            const double x = mid + 0.5 * width * rule.nodes[k];
            panel += rule.weights[k] * condition_one_residual(act, x);
        }
        total += 0.5 * width * panel;
    }
    return total;
}

}  // namespace pcnn
