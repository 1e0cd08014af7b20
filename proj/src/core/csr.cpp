#include "core/csr.hpp"

#include <algorithm>
#include <string>

#include "core/errors.hpp"

namespace dds {

CsrMatrix::CsrMatrix(index_t rows, index_t cols, std::vector<index_t> row_ptr,
                     std::vector<index_t> col_idx, std::vector<double> values)
    : rows_(rows), cols_(cols), row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)),
      values_(std::move(values)) {
    validate();
}

void CsrMatrix::validate() const {
    if (rows_ < 0 || cols_ < 0) throw InvalidArgument("csr: negative dimensions");
    if (row_ptr_.size() != static_cast<std::size_t>(rows_) + 1)
        throw InvalidArgument("csr: row_ptr size must be rows+1");
    if (row_ptr_.front() != 0) throw InvalidArgument("csr: row_ptr must start at 0");
    if (col_idx_.size() != values_.size()) throw InvalidArgument("csr: col/value size mismatch");
    if (row_ptr_.back() != static_cast<index_t>(col_idx_.size()))
        throw InvalidArgument("csr: row_ptr end must equal nnz");
    for (index_t i = 0; i < rows_; ++i) {
        if (row_ptr_[i + 1] < row_ptr_[i]) throw InvalidArgument("csr: row_ptr not monotone");
        for (index_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
            if (col_idx_[k] < 0 || col_idx_[k] >= cols_)
                throw InvalidArgument("csr: column index out of range at row " + std::to_string(i));
            if (k > row_ptr_[i] && col_idx_[k] <= col_idx_[k - 1])
                throw InvalidArgument("csr: columns not strictly increasing in row " +
                                      std::to_string(i));
        }
    }
}

CsrMatrix CsrMatrix::from_triplets(index_t rows, index_t cols, std::vector<Triplet> entries) {
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<index_t> row_ptr(rows + 1, 0);
    std::vector<index_t> col_idx;
    std::vector<double> values;
    col_idx.reserve(entries.size());
    values.reserve(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) {
        const Triplet& t = entries[k];
        if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
            throw InvalidArgument("csr: triplet index out of range");
        if (!values.empty() && entries[k - 1].row == t.row && entries[k - 1].col == t.col) {
            values.back() += t.value;
        } else {
            col_idx.push_back(t.col);
            values.push_back(t.value);
            row_ptr[t.row + 1] = static_cast<index_t>(values.size());
        }
    }
    for (index_t i = 1; i <= rows; ++i)
        row_ptr[i] = std::max(row_ptr[i], row_ptr[i - 1]);
    return CsrMatrix(rows, cols, std::move(row_ptr), std::move(col_idx), std::move(values));
}

Pattern CsrMatrix::pattern() const {
    return Pattern{rows_, cols_, row_ptr_, col_idx_};
}

Vector CsrMatrix::apply(std::span<const double> x) const {
    if (static_cast<index_t>(x.size()) != cols_)
        throw InvalidArgument("csr: matvec size mismatch");
    Vector y(rows_, 0.0);
    for (index_t i = 0; i < rows_; ++i) {
        double s = 0.0;
        for (index_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += values_[k] * x[col_idx_[k]];
        y[i] = s;
    }
    return y;
}

Vector csr_matvec(const CsrMatrix& a, std::span<const double> x) { return a.apply(x); }

CsrMatrix extract_principal_submatrix(const CsrMatrix& a, std::span<const index_t> rows) {
    std::vector<index_t> local_of(a.cols(), -1);
    for (std::size_t i = 0; i < rows.size(); ++i) local_of[rows[i]] = static_cast<index_t>(i);
    const index_t n = static_cast<index_t>(rows.size());
    std::vector<index_t> row_ptr(n + 1, 0);
    std::vector<index_t> col_idx;
    std::vector<double> values;
    for (index_t li = 0; li < n; ++li) {
        const index_t gi = rows[li];
        auto cols = a.row_cols(gi);
        auto vals = a.row_values(gi);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            const index_t lc = local_of[cols[k]];
            if (lc >= 0) {
                col_idx.push_back(lc);
                values.push_back(vals[k]);
            }
        }
        row_ptr[li + 1] = static_cast<index_t>(values.size());
    }
    return CsrMatrix(n, n, std::move(row_ptr), std::move(col_idx), std::move(values));
}

CsrMatrix extract_rows(const CsrMatrix& a, std::span<const index_t> rows) {
    const index_t n = static_cast<index_t>(rows.size());
    std::vector<index_t> row_ptr(n + 1, 0);
    std::vector<index_t> col_idx;
    std::vector<double> values;
    for (index_t li = 0; li < n; ++li) {
        const index_t gi = rows[li];
        auto cols = a.row_cols(gi);
        auto vals = a.row_values(gi);
        col_idx.insert(col_idx.end(), cols.begin(), cols.end());
        values.insert(values.end(), vals.begin(), vals.end());
        row_ptr[li + 1] = static_cast<index_t>(values.size());
    }
    return CsrMatrix(n, a.cols(), std::move(row_ptr), std::move(col_idx), std::move(values));
}

} // namespace dds
