#include "pcnn/convexity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "pcnn/error.hpp"

namespace pcnn {

namespace {

double checked_eval(const ScalarField& f, std::span<const double> theta) {
    const double v = f(theta);
    if (!std::isfinite(v)) throw DomainError("convexity: non-finite function evaluation");
    return v;
}

template <ActivationLike A>
HessianBlocks analytic_hessian_impl(std::span<const double> w1, std::span<const double> w2,
                                    double x, double base, const A& act) {
    if (w1.size() != w2.size()) {
        throw DimensionError("convexity: W1 and W2 lengths differ (" + std::to_string(w1.size()) +
                             " vs " + std::to_string(w2.size()) + ")");
    }
    if (!(x > 0.0)) throw DomainError("convexity: analytic Hessian needs x > 0");
    if (!(base > 0.0) || base == 1.0) throw DomainError("convexity: base must be > 0 and != 1");

    const std::size_t m = w1.size();
    const double ln = std::log(base);
    const double ln2 = ln * ln;
    std::vector<double> d22(m), d21(m), d11(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double p1 = std::pow(base, w1[i]);
        const double p2 = std::pow(base, w2[i]);
        const auto [s, s1, s2] = act.eval(p1 * x);
        d22[i] = ln2 * s * p2;
        d21[i] = ln2 * x * s1 * p2 * p1;
        d11[i] = ln2 * x * x * s2 * p2 * p1 * p1 + ln2 * x * s1 * p2 * p1;
    }

    HessianBlocks blocks{DenseMatrix::diagonal(d22), DenseMatrix::diagonal(d21),
                         DenseMatrix::diagonal(d11), DenseMatrix(2 * m, 2 * m)};
    DenseMatrix raw(2 * m, 2 * m);
    for (std::size_t i = 0; i < m; ++i) {
        raw(i, i) = d11[i];
        raw(m + i, m + i) = d22[i];
        raw(i, m + i) = d21[i];
        raw(m + i, i) = d21[i];
    }
    blocks.assembled = symmetrize(raw);
    return blocks;
}

template <ActivationLike A>
double two_layer_scalar_impl(std::span<const double> theta, double x, double base,
                             const A& act) {
    if (theta.size() % 2 != 0) {
        throw DimensionError("convexity: two-layer theta must have even length");
    }
    const std::size_t m = theta.size() / 2;
    const double ln = std::log(base);
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        total += std::exp(theta[m + i] * ln) * act.eval(std::exp(theta[i] * ln) * x).value;
    }
    return total;
}

DenseMatrix scalar_input_of(const DenseMatrix& input) {
    if (input.rows() != 1 || input.cols() != 1) {
        throw DimensionError("convexity: scalar model expects a 1x1 input, got " +
                             input.shape_string());
    }
    return input;
}

template <ActivationLike A>
ModelFn emlp_scalar_model_impl(std::size_t width, double base, A act) {
    return [width, base, act](std::span<const double> theta, const DenseMatrix& input) {
        if (theta.size() != 2 * width) throw DimensionError("convexity: theta length mismatch");
        const double x = scalar_input_of(input)(0, 0);
        return std::vector<double>{two_layer_scalar_output(theta, x, base, act)};
    };
}

std::seed_seq trial_seed(std::uint64_t seed, std::size_t trial) {
    return std::seed_seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                         static_cast<std::uint32_t>(trial)};
}

void check_input(const DenseMatrix& input, const ProbeOptions& options) {
    if (!options.require_positive_input) return;
    for (double v : input.data()) {
        if (!(v > 0.0)) {
            throw DomainError("convexity: input sampler produced a nonpositive entry " +
                              std::to_string(v));
        }
    }
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6e", v);
    return buf;
}

}  // namespace

std::vector<double> fd_gradient(const ScalarField& f, std::span<const double> theta, double h) {
    if (!(h > 0.0)) throw DomainError("convexity: finite-difference step must be > 0");
    std::vector<double> point(theta.begin(), theta.end());
    std::vector<double> grad(point.size());
    for (std::size_t i = 0; i < point.size(); ++i) {
        const double orig = point[i];
        point[i] = orig + h;
        const double fp = checked_eval(f, point);
        point[i] = orig - h;
        const double fm = checked_eval(f, point);
        point[i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

namespace {

DenseMatrix second_differences(const ScalarField& f, std::span<const double> theta, double h) {
    const std::size_t n = theta.size();
    std::vector<double> point(theta.begin(), theta.end());
    const double f0 = checked_eval(f, point);
    DenseMatrix hess(n, n);

    auto eval_at = [&](std::size_t i, double di, std::size_t j, double dj) {
        const double oi = point[i];
        const double oj = point[j];
        point[i] += di;
        point[j] += dj;
        const double v = checked_eval(f, point);
        point[i] = oi;
        point[j] = oj;
        return v;
    };

    for (std::size_t i = 0; i < n; ++i) {
        const double oi = point[i];
        point[i] = oi + h;
        const double fp = checked_eval(f, point);
        point[i] = oi - h;
        const double fm = checked_eval(f, point);
        point[i] = oi;
        hess(i, i) = (fp - 2.0 * f0 + fm) / (h * h);
        for (std::size_t j = 0; j < i; ++j) {
            const double fpp = eval_at(i, h, j, h);
            const double fpm = eval_at(i, h, j, -h);
            const double fmp = eval_at(i, -h, j, h);
            const double fmm = eval_at(i, -h, j, -h);
            const double v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            hess(i, j) = v;
            hess(j, i) = v;
        }
    }
    return hess;
}

}  // namespace

DenseMatrix fd_hessian(const ScalarField& f, std::span<const double> theta, double h) {
    if (!(h > 0.0)) throw DomainError("convexity: finite-difference step must be > 0");
    const DenseMatrix coarse = second_differences(f, theta, h);
    const DenseMatrix fine = second_differences(f, theta, 0.5 * h);
    return symmetrize(subtract(scale(fine, 4.0 / 3.0), scale(coarse, 1.0 / 3.0)));
}

HessianBlocks analytic_hessian_2layer(std::span<const double> w1, std::span<const double> w2,
                                      double x, double base, const Activation& act) {
    return analytic_hessian_impl(w1, w2, x, base, act);
}

HessianBlocks analytic_hessian_2layer(std::span<const double> w1, std::span<const double> w2,
                                      double x, double base, const RawActivation& act) {
    return analytic_hessian_impl(w1, w2, x, base, act);
}

double two_layer_scalar_output(std::span<const double> theta, double x, double base,
                               const Activation& act) {
    return two_layer_scalar_impl(theta, x, base, act);
}

double two_layer_scalar_output(std::span<const double> theta, double x, double base,
                               const RawActivation& act) {
    return two_layer_scalar_impl(theta, x, base, act);
}

MlpHessianBlocks mlp_hessian_2layer(std::span<const double> w0, std::span<const double> w1,
                                    double x, const Activation& act) {
    if (w0.size() != w1.size()) {
        throw DimensionError("convexity: W0 and W1 lengths differ (" + std::to_string(w0.size()) +
                             " vs " + std::to_string(w1.size()) + ")");
    }
    const std::size_t m = w0.size();
    std::vector<double> cross(m), curv(m);
    for (std::size_t i = 0; i < m; ++i) {
        const auto v = act.eval(w0[i] * x);
        cross[i] = x * v.deriv1;
        curv[i] = x * x * v.deriv2 * w1[i];
    }
    MlpHessianBlocks blocks{DenseMatrix(m, m), DenseMatrix::diagonal(cross),
                            DenseMatrix::diagonal(curv), DenseMatrix(2 * m, 2 * m)};
    DenseMatrix raw(2 * m, 2 * m);
    for (std::size_t i = 0; i < m; ++i) {
        raw(i, m + i) = cross[i];
        raw(m + i, i) = cross[i];
        raw(m + i, m + i) = curv[i];
    }
    blocks.assembled = symmetrize(raw);
    return blocks;
}

double determinant_metric(const HessianBlocks& blocks) {
    const std::size_t m = blocks.w1w1.rows();
    for (const DenseMatrix* b : {&blocks.w1w1, &blocks.w2w1, &blocks.w2w2}) {
        if (b->rows() != m || b->cols() != m) {
            throw DimensionError("convexity: Hessian blocks have inconsistent shapes");
        }
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                if (i != j && (*b)(i, j) != 0.0) {
                    throw DomainError("convexity: determinant metric needs diagonal blocks");
                }
    }
    double product = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double d = blocks.w2w2(i, i) * blocks.w1w1(i, i) - blocks.w2w1(i, i) * blocks.w2w1(i, i);
        product *= std::abs(d);
    }
    return product;
}

std::vector<double> flatten_layers(const std::vector<LayerParams>& layers) {
    std::vector<double> theta;
    for (const auto& layer : layers) {
        const DenseMatrix v = vec(layer.weights);
        theta.insert(theta.end(), v.data().begin(), v.data().end());
    }
    return theta;
}

std::vector<LayerParams> unflatten_layers(
    std::span<const double> theta, const std::vector<std::pair<std::size_t, std::size_t>>& shapes) {
    std::size_t total = 0;
    for (const auto& [r, c] : shapes) total += r * c;
    if (total != theta.size()) {
        throw DimensionError("convexity: theta length " + std::to_string(theta.size()) +
                             " does not match layer shapes (" + std::to_string(total) + ")");
    }
    std::vector<LayerParams> layers;
    std::size_t offset = 0;
    for (const auto& [r, c] : shapes) {
        DenseMatrix w(r, c);
        for (std::size_t j = 0; j < c; ++j)
            for (std::size_t i = 0; i < r; ++i) w(i, j) = theta[offset + i + j * r];
        offset += r * c;
        layers.push_back({std::move(w)});
    }
    return layers;
}

ThetaSampler uniform_theta_sampler(std::size_t dim, double lo, double hi) {
    return [dim, lo, hi](Rng& rng) {
        std::uniform_real_distribution<double> dist(lo, hi);
        std::vector<double> theta(dim);
        for (double& v : theta) v = dist(rng);
        return theta;
    };
}

InputSampler log_uniform_input_sampler(std::size_t rows, std::size_t cols, double lo, double hi) {
    return [rows, cols, lo, hi](Rng& rng) {
        std::uniform_real_distribution<double> dist(std::log(lo), std::log(hi));
        DenseMatrix x(rows, cols);
        for (double& v : x.data()) v = std::exp(dist(rng));
        return x;
    };
}

ModelFn emlp_scalar_model(std::size_t width, double base, const Activation& act) {
    return emlp_scalar_model_impl(width, base, act);
}

ModelFn emlp_scalar_model(std::size_t width, double base, const RawActivation& act) {
    return emlp_scalar_model_impl(width, base, act);
}

ModelFn mlp_scalar_model(std::size_t width, const Activation& act) {
    return [width, act](std::span<const double> theta, const DenseMatrix& input) {
        if (theta.size() != 2 * width) throw DimensionError("convexity: theta length mismatch");
        const double x = scalar_input_of(input)(0, 0);
        double total = 0.0;
        for (std::size_t i = 0; i < width; ++i) total += theta[i] * act.value(theta[width + i] * x);
        return std::vector<double>{total};
    };
}

ModelFn egcn_model(std::size_t features, std::size_t hidden, std::size_t outputs, double base,
                   const Activation& act, SparseMatrix adjacency) {
    const std::vector<std::pair<std::size_t, std::size_t>> shapes{{features, hidden},
                                                                   {hidden, outputs}};
    return [shapes, base, act, adjacency = std::move(adjacency)](std::span<const double> theta,
                                                                 const DenseMatrix& input) {
        const EgcnParams params{unflatten_layers(theta, shapes), base, act};
        const ForwardTrace trace = egcn_forward(params, input, adjacency);
        const auto out = trace.output().data();
        return std::vector<double>(out.begin(), out.end());
    };
}

MidpointOutcome midpoint_convexity_probe(const ModelFn& model, const ThetaSampler& theta_sampler,
                                         const InputSampler& input_sampler,
                                         const ProbeOptions& options) {
    const PairSampler pairs = [&theta_sampler](Rng& rng) {
        auto a = theta_sampler(rng);
        auto b = theta_sampler(rng);
        return std::make_pair(std::move(a), std::move(b));
    };
    return midpoint_convexity_probe(model, pairs, input_sampler, options);
}

MidpointOutcome midpoint_convexity_probe(const ModelFn& model, const PairSampler& pair_sampler,
                                         const InputSampler& input_sampler,
                                         const ProbeOptions& options) {
    if (options.trials == 0) throw DomainError("convexity: midpoint probe needs trials >= 1");
    constexpr std::size_t kMaxExamples = 20;
    MidpointOutcome outcome;
    for (std::size_t trial = 0; trial < options.trials; ++trial) {
        auto seq = trial_seed(options.seed, trial);
        Rng rng(seq);
        const auto [theta_a, theta_b] = pair_sampler(rng);
        if (theta_a.size() != theta_b.size()) {
            throw DimensionError("convexity: sampled parameter vectors differ in length");
        }
        const DenseMatrix input = input_sampler(rng);
        check_input(input, options);

        std::vector<double> mid(theta_a.size());
        for (std::size_t i = 0; i < mid.size(); ++i) mid[i] = 0.5 * (theta_a[i] + theta_b[i]);
        const auto fa = model(theta_a, input);
        const auto fb = model(theta_b, input);
        const auto fm = model(mid, input);
        for (std::size_t k = 0; k < fm.size(); ++k) {
            const double gap = fm[k] - 0.5 * (fa[k] + fb[k]);
            if (!std::isfinite(gap)) throw DomainError("convexity: non-finite model output");
            outcome.worst_gap = std::max(outcome.worst_gap, gap);
            if (gap > options.tol) {
                ++outcome.violations;
                if (outcome.examples.size() < kMaxExamples) {
                    outcome.examples.push_back({trial, k, gap});
                }
            }
        }
        ++outcome.trials;
    }
    return outcome;
}

PsdOutcome psd_probe(const ModelFn& model, const ThetaSampler& theta_sampler,
                     const InputSampler& input_sampler, const ProbeOptions& options) {
    if (options.trials == 0) throw DomainError("convexity: PSD probe needs n_points >= 1");
    PsdOutcome outcome;
    for (std::size_t point = 0; point < options.trials; ++point) {
        auto seq = trial_seed(options.seed, point);
        Rng rng(seq);
        const auto theta = theta_sampler(rng);
        const DenseMatrix input = input_sampler(rng);
        check_input(input, options);
        const std::size_t outputs = model(theta, input).size();
        for (std::size_t k = 0; k < outputs; ++k) {
            const ScalarField coordinate = [&](std::span<const double> t) {
                return model(t, input)[k];
            };
            const double lambda = sym_min_eigenvalue(fd_hessian(coordinate, theta, options.fd_step));
            if (lambda < outcome.min_eigenvalue) {
                outcome.min_eigenvalue = lambda;
                outcome.worst_theta = theta;
                outcome.worst_output = k;
            }
        }
        ++outcome.points;
    }
    return outcome;
}

std::string ConvexityReport::to_text() const {
    std::ostringstream out;
    out << "model: " << model << "\n"
        << "num_probes: " << num_probes << "\n"
        << "min_eigenvalue_observed: " << format_double(min_eigenvalue_observed) << "\n"
        << "psd_tolerance: " << format_double(psd_tolerance) << "\n"
        << "midpoint_violations: " << midpoint_violations << "\n"
        << "worst_midpoint_gap: " << format_double(worst_gap) << "\n"
        << "determinant_metric: "
        << (determinant_metric ? format_double(*determinant_metric) : std::string("n/a")) << "\n"
        << "verdict: "
        << (verdict == Verdict::violation_found ? "violation-found" : "certified-at-probes")
        << "\n\nviolations:\n"
        << "trial\toutput\tgap\n";
    for (const auto& v : violations) {
        out << v.trial << "\t" << v.output_index << "\t" << format_double(v.gap) << "\n";
    }
    return out.str();
}

ConvexityReport make_report(std::string model, const MidpointOutcome& midpoint,
                            const PsdOutcome& psd, std::optional<double> determinant,
                            double psd_tolerance) {
    ConvexityReport report;
    report.model = std::move(model);
    report.num_probes = midpoint.trials;
    report.min_eigenvalue_observed = psd.min_eigenvalue;
    report.midpoint_violations = midpoint.violations;
    report.worst_gap = midpoint.worst_gap;
    report.determinant_metric = determinant;
    report.psd_tolerance = psd_tolerance;
    report.violations = midpoint.examples;
    const bool bad = midpoint.violations > 0 || psd.min_eigenvalue < -psd_tolerance;
    report.verdict = bad ? Verdict::violation_found : Verdict::certified_at_probes;
    return report;
}

std::vector<Edge> five_node_fixture_edges() {
    return {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 2}, {1, 4}};
}

ConvexityReport run_verification(const VerifyConfig& config) {
    ProbeOptions midpoint_options;
    midpoint_options.trials = config.probes;
    midpoint_options.seed = config.seed;
    ProbeOptions psd_options = midpoint_options;
    psd_options.trials = config.psd_points;
    psd_options.seed = config.seed + 0x9e3779b97f4a7c15ULL;

    const std::size_t m = config.width;
    std::ostringstream name;
    std::optional<double> determinant;
    ModelFn model;
    ThetaSampler theta;
    InputSampler input;
    switch (config.target) {
        case VerifyTarget::emlp2: {
            name << "emlp2";
            model = emlp_scalar_model(m, config.base, config.activation);
            theta = uniform_theta_sampler(2 * m);
            input = log_uniform_input_sampler(1, 1);
            const std::vector<double> zeros(m, 0.0);
            determinant = determinant_metric(
                analytic_hessian_2layer(zeros, zeros, 1.0, config.base, config.activation));
            break;
        }
        case VerifyTarget::mlp2:
            name << "mlp2";
            model = mlp_scalar_model(m, config.activation);
            theta = uniform_theta_sampler(2 * m);
            input = log_uniform_input_sampler(1, 1);
            break;
        case VerifyTarget::egcn2: {
            name << "egcn2";
            constexpr std::size_t kNodes = 5;
            constexpr std::size_t kFeatures = 2;
            constexpr std::size_t kClasses = 2;
            model = egcn_model(kFeatures, m, kClasses, config.base, config.activation,
                               normalize_adjacency(five_node_fixture_edges(), kNodes));
            theta = uniform_theta_sampler(kFeatures * m + m * kClasses);
            input = log_uniform_input_sampler(kNodes, kFeatures);
            break;
        }
    }
    name << " activation=" << config.activation.name() << " base=" << config.base
         << " width=" << m << " seed=" << config.seed;

    const auto midpoint = midpoint_convexity_probe(model, theta, input, midpoint_options);
    const auto psd = psd_probe(model, theta, input, psd_options);
    return make_report(name.str(), midpoint, psd, determinant);
}

}  // namespace pcnn
