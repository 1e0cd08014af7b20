#pragma once

#include <memory>
#include <span>

#include "core/csr.hpp"
#include "core/vec.hpp"

namespace dds {

// Exact sparse direct factorization of a square CSR matrix.
// Used for subdomain blocks and reference solves; throws
// SingularMatrixError when the factorization detects singularity.
class SparseLu {
public:
    explicit SparseLu(const CsrMatrix& a);
    ~SparseLu();
    SparseLu(SparseLu&&) noexcept;
    SparseLu& operator=(SparseLu&&) noexcept;
    SparseLu(const SparseLu&) = delete;
    SparseLu& operator=(const SparseLu&) = delete;

    int dim() const;
    Vector solve(std::span<const double> b) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace dds
