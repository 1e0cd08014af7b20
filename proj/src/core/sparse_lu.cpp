#include "core/sparse_lu.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "core/errors.hpp"

namespace dds {

struct SparseLu::Impl {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
    int n = 0;
};

SparseLu::SparseLu(const CsrMatrix& a) : impl_(std::make_unique<Impl>()) {
    if (a.rows() != a.cols()) throw InvalidArgument("sparse lu: matrix must be square");
    impl_->n = a.rows();
    Eigen::SparseMatrix<double> m(a.rows(), a.cols());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(a.nnz());
    auto rp = a.row_ptr();
    auto ci = a.col_idx();
    auto va = a.values();
    for (index_t i = 0; i < a.rows(); ++i)
        for (index_t k = rp[i]; k < rp[i + 1]; ++k) trip.emplace_back(i, ci[k], va[k]);
    m.setFromTriplets(trip.begin(), trip.end());
    m.makeCompressed();
    impl_->solver.compute(m);
    if (impl_->solver.info() != Eigen::Success)
        throw SingularMatrixError("sparse lu: factorization failed");
}

SparseLu::~SparseLu() = default;
SparseLu::SparseLu(SparseLu&&) noexcept = default;
SparseLu& SparseLu::operator=(SparseLu&&) noexcept = default;

int SparseLu::dim() const { return impl_->n; }

Vector SparseLu::solve(std::span<const double> b) const {
    if (static_cast<int>(b.size()) != impl_->n) throw InvalidArgument("sparse lu: rhs size mismatch");
    Eigen::Map<const Eigen::VectorXd> bm(b.data(), b.size());
    Eigen::VectorXd x = impl_->solver.solve(bm);
    if (impl_->solver.info() != Eigen::Success)
        throw SingularMatrixError("sparse lu: solve failed");
    return Vector(x.data(), x.data() + x.size());
}

} // namespace dds
