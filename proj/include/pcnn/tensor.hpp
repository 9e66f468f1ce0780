#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace pcnn {

// Dense row-major matrix of doubles. Column vectors are n x 1 matrices.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    // Takes ownership of row-major data; throws unless size matches and all entries are finite.
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static DenseMatrix column(std::span<const double> values);
    static DenseMatrix identity(std::size_t n);
    static DenseMatrix diagonal(std::span<const double> values);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    DenseMatrix transpose() const;
    bool all_finite() const;
    bool same_shape(const DenseMatrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    std::string shape_string() const;

    bool operator==(const DenseMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct Triplet {
    std::size_t row;
    std::size_t col;
    double value;
};

// Compressed sparse row matrix. Column indices are strictly increasing within a row.
class SparseMatrix {
public:
    SparseMatrix() = default;
    SparseMatrix(std::size_t rows, std::size_t cols);
    // Duplicate coordinates are summed.
    static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries);
    static SparseMatrix identity(std::size_t n);
    static SparseMatrix from_dense(const DenseMatrix& dense);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t nonzeros() const { return values_.size(); }

    std::span<const std::size_t> row_offsets() const { return offsets_; }
    std::span<const std::size_t> col_indices() const { return indices_; }
    std::span<const double> values() const { return values_; }

    // Stored value at (i, j) or 0.
    double at(std::size_t i, std::size_t j) const;
    DenseMatrix to_dense() const;
    SparseMatrix transpose() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::size_t> offsets_{0};
    std::vector<std::size_t> indices_;
    std::vector<double> values_;
};

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b);

// a^W entrywise; a > 0 and a != 1.
DenseMatrix elementwise_exp(double base, const DenseMatrix& w);
// log_a(V) entrywise; every entry of V must be strictly positive.
DenseMatrix elementwise_log(double base, const DenseMatrix& v);

// Column-stacking vectorization.
DenseMatrix vec(const DenseMatrix& w);
DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b);

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
// a^T * b without forming the transpose.
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
// a * b^T without forming the transpose.
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix scale(const DenseMatrix& a, double factor);
DenseMatrix map(const DenseMatrix& a, const std::function<double(double)>& fn);
double max_abs_difference(const DenseMatrix& a, const DenseMatrix& b);

DenseMatrix spmm(const SparseMatrix& a, const DenseMatrix& x);
// a^T * x using the CSR structure of a.
DenseMatrix spmm_transposed(const SparseMatrix& a, const DenseMatrix& x);

DenseMatrix symmetrize(const DenseMatrix& h);

struct JacobiOptions {
    double off_diagonal_threshold = 1e-12;
    int max_sweeps = 100;
};

// Eigenvalues of (H + H^T)/2 in ascending order, by cyclic Jacobi rotations.
std::vector<double> sym_eigenvalues(const DenseMatrix& h, const JacobiOptions& options = {});
double sym_min_eigenvalue(const DenseMatrix& h, double tol = 1e-12);

}  // namespace pcnn
