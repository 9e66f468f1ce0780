#include "pcnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pcnn/error.hpp"

namespace pcnn {

namespace {

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string("tensor: ") + op + " shape mismatch " + a.shape_string() +
                             " vs " + b.shape_string());
    }
}

void require_base(double base) {
    if (!(base > 0.0) || base == 1.0 || !std::isfinite(base)) {
        throw DomainError("tensor: exponential base must be positive and != 1, got " +
                          std::to_string(base));
    }
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw DimensionError("tensor: data length " + std::to_string(data_.size()) +
                             " does not match " + shape_string());
    }
    if (!all_finite()) {
        throw DomainError("tensor: non-finite entry in matrix data");
    }
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) {
            throw DimensionError("tensor: ragged initializer rows");
        }
        data.insert(data.end(), row.begin(), row.end());
    }
    return DenseMatrix(r, c, std::move(data));
}

DenseMatrix DenseMatrix::column(std::span<const double> values) {
    return DenseMatrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> values) {
    DenseMatrix m(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
    return m;
}

DenseMatrix DenseMatrix::transpose() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

bool DenseMatrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string DenseMatrix::shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), offsets_(rows + 1, 0) {}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> entries) {
    for (const auto& t : entries) {
        if (t.row >= rows || t.col >= cols) {
            throw DimensionError("tensor: triplet (" + std::to_string(t.row) + "," +
                                 std::to_string(t.col) + ") outside " + std::to_string(rows) +
                                 "x" + std::to_string(cols));
        }
        if (!std::isfinite(t.value)) {
            throw DomainError("tensor: non-finite sparse value");
        }
    }
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });

    SparseMatrix m(rows, cols);
    for (std::size_t k = 0; k < entries.size(); ++k) {
        const auto& t = entries[k];
        if (!m.indices_.empty() && k > 0 && entries[k - 1].row == t.row &&
            entries[k - 1].col == t.col) {
            m.values_.back() += t.value;
            continue;
        }
        m.indices_.push_back(t.col);
        m.values_.push_back(t.value);
        ++m.offsets_[t.row + 1];
    }
    for (std::size_t i = 0; i < rows; ++i) m.offsets_[i + 1] += m.offsets_[i];
    return m;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
    std::vector<Triplet> entries;
    entries.reserve(n);
    for (std::size_t i = 0; i < n; ++i) entries.push_back({i, i, 1.0});
    return from_triplets(n, n, std::move(entries));
}

SparseMatrix SparseMatrix::from_dense(const DenseMatrix& dense) {
    std::vector<Triplet> entries;
    for (std::size_t i = 0; i < dense.rows(); ++i)
        for (std::size_t j = 0; j < dense.cols(); ++j)
            if (dense(i, j) != 0.0) entries.push_back({i, j, dense(i, j)});
    return from_triplets(dense.rows(), dense.cols(), std::move(entries));
}

double SparseMatrix::at(std::size_t i, std::size_t j) const {
    const auto begin = indices_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]);
    const auto end = indices_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]);
    const auto it = std::lower_bound(begin, end, j);
    if (it == end || *it != j) return 0.0;
    return values_[static_cast<std::size_t>(it - indices_.begin())];
}

DenseMatrix SparseMatrix::to_dense() const {
    DenseMatrix d(rows_, cols_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) d(i, indices_[k]) = values_[k];
    return d;
}

SparseMatrix SparseMatrix::transpose() const {
    std::vector<Triplet> entries;
    entries.reserve(values_.size());
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k)
            entries.push_back({indices_[k], i, values_[k]});
    return from_triplets(cols_, rows_, std::move(entries));
}

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "hadamard");
    DenseMatrix out(a.rows(), a.cols());
    auto o = out.data();
    auto x = a.data();
    auto y = b.data();
    for (std::size_t k = 0; k < o.size(); ++k) o[k] = x[k] * y[k];
    return out;
}

DenseMatrix elementwise_exp(double base, const DenseMatrix& w) {
    require_base(base);
    DenseMatrix out(w.rows(), w.cols());
    auto o = out.data();
    auto in = w.data();
    for (std::size_t k = 0; k < o.size(); ++k) o[k] = std::pow(base, in[k]);
    return out;
}

DenseMatrix elementwise_log(double base, const DenseMatrix& v) {
    require_base(base);
    const double log_base = std::log(base);
    DenseMatrix out(v.rows(), v.cols());
    auto o = out.data();
    auto in = v.data();
    for (std::size_t k = 0; k < o.size(); ++k) {
        if (!(in[k] > 0.0)) {
            throw DomainError("tensor: elementwise_log of nonpositive entry " +
                              std::to_string(in[k]));
        }
        o[k] = std::log(in[k]) / log_base;
    }
    return out;
}

DenseMatrix vec(const DenseMatrix& w) {
    DenseMatrix out(w.size(), 1);
    for (std::size_t j = 0; j < w.cols(); ++j)
        for (std::size_t i = 0; i < w.rows(); ++i) out(i + j * w.rows(), 0) = w(i, j);
    return out;
}

DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const double s = a(i, j);
            for (std::size_t k = 0; k < b.rows(); ++k)
                for (std::size_t l = 0; l < b.cols(); ++l)
                    out(i * b.rows() + k, j * b.cols() + l) = s * b(k, l);
        }
    return out;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("tensor: matmul " + a.shape_string() + " * " + b.shape_string());
    }
    DenseMatrix out(a.rows(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* o = out.row(i).data();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double s = a(i, k);
            if (s == 0.0) continue;
            const double* br = b.row(k).data();
            for (std::size_t j = 0; j < n; ++j) o[j] += s * br[j];
        }
    }
    return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows()) {
        throw DimensionError("tensor: matmul_tn " + a.shape_string() + "^T * " +
                             b.shape_string());
    }
    DenseMatrix out(a.cols(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const double* br = b.row(r).data();
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double s = a(r, i);
            if (s == 0.0) continue;
            double* o = out.row(i).data();
            for (std::size_t j = 0; j < n; ++j) o[j] += s * br[j];
        }
    }
    return out;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.cols()) {
        throw DimensionError("tensor: matmul_nt " + a.shape_string() + " * " +
                             b.shape_string() + "^T");
    }
    DenseMatrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ar = a.row(i).data();
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* br = b.row(j).data();
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += ar[k] * br[k];
            out(i, j) = s;
        }
    }
    return out;
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "add");
    DenseMatrix out = a;
    auto o = out.data();
    auto y = b.data();
    for (std::size_t k = 0; k < o.size(); ++k) o[k] += y[k];
    return out;
}

DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "subtract");
    DenseMatrix out = a;
    auto o = out.data();
    auto y = b.data();
    for (std::size_t k = 0; k < o.size(); ++k) o[k] -= y[k];
    return out;
}

DenseMatrix scale(const DenseMatrix& a, double factor) {
    DenseMatrix out = a;
    for (double& v : out.data()) v *= factor;
    return out;
}

DenseMatrix map(const DenseMatrix& a, const std::function<double(double)>& fn) {
    DenseMatrix out(a.rows(), a.cols());
    auto o = out.data();
    auto in = a.data();
    for (std::size_t k = 0; k < o.size(); ++k) o[k] = fn(in[k]);
    return out;
}

double max_abs_difference(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "max_abs_difference");
    double worst = 0.0;
    auto x = a.data();
    auto y = b.data();
    for (std::size_t k = 0; k < x.size(); ++k) worst = std::max(worst, std::abs(x[k] - y[k]));
    return worst;
}

DenseMatrix spmm(const SparseMatrix& a, const DenseMatrix& x) {
    if (a.cols() != x.rows()) {
        throw DimensionError("tensor: spmm " + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + " * " + x.shape_string());
    }
    DenseMatrix out(a.rows(), x.cols());
    const auto offsets = a.row_offsets();
    const auto indices = a.col_indices();
    const auto values = a.values();
    const std::size_t n = x.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* o = out.row(i).data();
        for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) {
            const double s = values[k];
            const double* xr = x.row(indices[k]).data();
            for (std::size_t j = 0; j < n; ++j) o[j] += s * xr[j];
        }
    }
    return out;
}

DenseMatrix spmm_transposed(const SparseMatrix& a, const DenseMatrix& x) {
    if (a.rows() != x.rows()) {
        throw DimensionError("tensor: spmm_transposed (" + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + ")^T * " + x.shape_string());
    }
    DenseMatrix out(a.cols(), x.cols());
    const auto offsets = a.row_offsets();
    const auto indices = a.col_indices();
    const auto values = a.values();
    const std::size_t n = x.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* xr = x.row(i).data();
        for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) {
            const double s = values[k];
            double* o = out.row(indices[k]).data();
            for (std::size_t j = 0; j < n; ++j) o[j] += s * xr[j];
        }
    }
    return out;
}

DenseMatrix symmetrize(const DenseMatrix& h) {
    if (h.rows() != h.cols()) {
        throw DimensionError("tensor: symmetrize needs a square matrix, got " + h.shape_string());
    }
    DenseMatrix s(h.rows(), h.cols());
    for (std::size_t i = 0; i < h.rows(); ++i)
        for (std::size_t j = 0; j < h.cols(); ++j) s(i, j) = 0.5 * (h(i, j) + h(j, i));
    return s;
}

std::vector<double> sym_eigenvalues(const DenseMatrix& h, const JacobiOptions& options) {
    DenseMatrix a = symmetrize(h);
    const std::size_t n = a.rows();
    if (!a.all_finite()) {
        throw DomainError("tensor: eigen-analysis of non-finite matrix");
    }

    auto off_norm = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) s += a(i, j) * a(i, j);
        return std::sqrt(s);
    };
    double frob = 0.0;
    for (double v : a.data()) frob += v * v;
    frob = std::sqrt(frob);
    // Rotations cannot push the off-diagonal mass below the rounding floor of the matrix.
    const double threshold = std::max(options.off_diagonal_threshold,
                                      8.0 * std::numeric_limits<double>::epsilon() * frob);

    int sweep = 0;
    while (off_norm() > threshold) {
        if (sweep++ >= options.max_sweeps) {
            throw ConvergenceError("tensor: Jacobi eigensolver did not converge in " +
                                   std::to_string(options.max_sweeps) + " sweeps");
        }
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = std::copysign(1.0, theta) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
            }
        }
    }

    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
    std::sort(eig.begin(), eig.end());
    return eig;
}

double sym_min_eigenvalue(const DenseMatrix& h, double tol) {
    if (h.rows() != h.cols() || h.rows() == 0) {
        throw DimensionError("tensor: sym_min_eigenvalue needs a non-empty square matrix, got " +
                             h.shape_string());
    }
    JacobiOptions options;
    options.off_diagonal_threshold = tol;
    return sym_eigenvalues(h, options).front();
}

}  // namespace pcnn
