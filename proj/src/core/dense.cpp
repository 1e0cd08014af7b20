#include "core/dense.hpp"

#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "core/errors.hpp"

namespace dds {

Vector DenseMatrix::apply(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != cols_) throw InvalidArgument("dense: matvec size mismatch");
    Vector y(rows_, 0.0);
    for (int i = 0; i < rows_; ++i) {
        double s = 0.0;
        for (int j = 0; j < cols_; ++j) s += (*this)(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

DenseLu::DenseLu(const DenseMatrix& a) {
    if (a.rows() != a.cols()) throw InvalidArgument("lu: matrix must be square");
    n_ = a.rows();
    lu_ = a;
    perm_.resize(n_);
    std::iota(perm_.begin(), perm_.end(), 0);

    // Row scales of the original matrix set the singularity threshold.
    std::vector<double> row_scale(n_, 0.0);
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) row_scale[i] = std::max(row_scale[i], std::abs(a(i, j)));

    for (int k = 0; k < n_; ++k) {
        int piv = k;
        double best = std::abs(lu_(k, k));
        for (int i = k + 1; i < n_; ++i) {
            const double v = std::abs(lu_(i, k));
            if (v > best) {
                best = v;
                piv = i;
            }
        }
        if (piv != k) {
            for (int j = 0; j < n_; ++j) std::swap(lu_(k, j), lu_(piv, j));
            std::swap(perm_[k], perm_[piv]);
        }
        const double scale = std::max(row_scale[perm_[k]], 1e-300);
        if (std::abs(lu_(k, k)) < 1e-14 * scale)
            throw SingularMatrixError("lu: singular pivot at step " + std::to_string(k));
        const double inv_piv = 1.0 / lu_(k, k);
        for (int i = k + 1; i < n_; ++i) {
            const double m = lu_(i, k) * inv_piv;
            lu_(i, k) = m;
            if (m != 0.0)
                for (int j = k + 1; j < n_; ++j) lu_(i, j) -= m * lu_(k, j);
        }
    }
}

Vector DenseLu::solve(std::span<const double> b) const {
    if (static_cast<int>(b.size()) != n_) throw InvalidArgument("lu: rhs size mismatch");
    Vector y(n_);
    for (int i = 0; i < n_; ++i) y[i] = b[perm_[i]];
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < i; ++j) y[i] -= lu_(i, j) * y[j];
    for (int i = n_ - 1; i >= 0; --i) {
        for (int j = i + 1; j < n_; ++j) y[i] -= lu_(i, j) * y[j];
        y[i] /= lu_(i, i);
    }
    return y;
}

DenseMatrix DenseLu::reconstruct() const {
    DenseMatrix pa(n_, n_);
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) {
            double s = 0.0;
            const int kmax = std::min(i, j);
            for (int k = 0; k <= kmax; ++k) {
                const double l = (k == i) ? 1.0 : lu_(i, k);
                s += l * lu_(k, j);
            }
            pa(i, j) = s;
        }
    // Undo the permutation so the result compares against A directly.
    DenseMatrix out(n_, n_);
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) out(perm_[i], j) = pa(i, j);
    return out;
}

Vector lu_solve(const DenseLu& f, std::span<const double> b) { return f.solve(b); }

} // namespace dds
