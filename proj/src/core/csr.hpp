#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "core/vec.hpp"

namespace dds {

using index_t = std::int32_t;

// Sparsity pattern of a sparse matrix: row offsets plus column indices,
// columns strictly increasing within each row.
struct Pattern {
    index_t rows = 0;
    index_t cols = 0;
    std::vector<index_t> row_ptr; // size rows+1, nondecreasing
    std::vector<index_t> col_idx; // size row_ptr.back()

    index_t nnz() const { return row_ptr.empty() ? 0 : row_ptr.back(); }
};

struct Triplet {
    index_t row;
    index_t col;
    double value;
};

// Compressed sparse row matrix with double values.
// Invariants, checked on construction: offsets start at 0 and are
// nondecreasing, column indices are in range and strictly increasing
// per row (no duplicates).
class CsrMatrix {
public:
    CsrMatrix() = default;
    CsrMatrix(index_t rows, index_t cols, std::vector<index_t> row_ptr,
              std::vector<index_t> col_idx, std::vector<double> values);

    // Duplicate (row,col) pairs are summed.
    static CsrMatrix from_triplets(index_t rows, index_t cols, std::vector<Triplet> entries);

    index_t rows() const { return rows_; }
    index_t cols() const { return cols_; }
    index_t nnz() const { return static_cast<index_t>(values_.size()); }

    std::span<const index_t> row_ptr() const { return row_ptr_; }
    std::span<const index_t> col_idx() const { return col_idx_; }
    std::span<const double> values() const { return values_; }

    std::span<const index_t> row_cols(index_t i) const {
        return {col_idx_.data() + row_ptr_[i], static_cast<std::size_t>(row_ptr_[i + 1] - row_ptr_[i])};
    }
    std::span<const double> row_values(index_t i) const {
        return {values_.data() + row_ptr_[i], static_cast<std::size_t>(row_ptr_[i + 1] - row_ptr_[i])};
    }

    Pattern pattern() const;

    // y = A x. Throws on size mismatch.
    Vector apply(std::span<const double> x) const;

private:
    void validate() const;

    index_t rows_ = 0;
    index_t cols_ = 0;
    std::vector<index_t> row_ptr_{0};
    std::vector<index_t> col_idx_;
    std::vector<double> values_;
};

Vector csr_matvec(const CsrMatrix& a, std::span<const double> x);

// Square submatrix A(rows, rows) with indices remapped to local positions.
// rows must be sorted and duplicate free.
CsrMatrix extract_principal_submatrix(const CsrMatrix& a, std::span<const index_t> rows);

// Row slice A(rows, :) keeping global column indices.
CsrMatrix extract_rows(const CsrMatrix& a, std::span<const index_t> rows);

} // namespace dds
