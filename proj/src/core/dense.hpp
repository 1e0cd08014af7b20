#pragma once

#include <span>
#include <vector>

#include "core/vec.hpp"

namespace dds {

// Row-major dense matrix.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(int rows, int cols) : rows_(rows), cols_(cols), data_(std::size_t(rows) * cols, 0.0) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    double& operator()(int i, int j) { return data_[std::size_t(i) * cols_ + j]; }
    double operator()(int i, int j) const { return data_[std::size_t(i) * cols_ + j]; }
    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    Vector apply(std::span<const double> x) const;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

// LU factorization with partial (row) pivoting, P A = L U.
// A pivot whose magnitude falls below 1e-14 times the infinity norm of its
// original row raises SingularMatrixError.
class DenseLu {
public:
    DenseLu() = default;
    explicit DenseLu(const DenseMatrix& a);

    int dim() const { return n_; }
    Vector solve(std::span<const double> b) const;

    // Factors recombined as P^T L U, for reconstruction checks.
    DenseMatrix reconstruct() const;
    std::span<const int> permutation() const { return perm_; }

private:
    int n_ = 0;
    DenseMatrix lu_;        // L below diagonal (unit), U on and above
    std::vector<int> perm_; // row i of LU came from row perm_[i] of A
};

Vector lu_solve(const DenseLu& f, std::span<const double> b);

} // namespace dds
