#ifndef FAUN_MATRIX_HPP_
#define FAUN_MATRIX_HPP_

#include <cstdint>
#include <initializer_list>
#include <span>
#include <variant>
#include <vector>

namespace faun {

using Index = std::int64_t;

/**
 * Dense column-major matrix. Holds A in the dense case and every factor
 * block (W, H, their row/column sub-blocks, V_ij, Y_ij).
 *
 * A default-constructed matrix is 0x0 and only serves as a placeholder;
 * every sized constructor requires rows, cols >= 1.
 */
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(Index rows, Index cols, double fill = 0.0);
  DenseMatrix(Index rows, Index cols, std::vector<double> values);

  /// Row-wise literal, for tests and small examples.
  static DenseMatrix from_rows(
      std::initializer_list<std::initializer_list<double>> rows);
  static DenseMatrix identity(Index n);

  Index rows() const noexcept { return rows_; }
  Index cols() const noexcept { return cols_; }
  Index size() const noexcept { return rows_ * cols_; }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(Index r, Index c) noexcept {
    return values_[static_cast<std::size_t>(c * rows_ + r)];
  }
  double operator()(Index r, Index c) const noexcept {
    return values_[static_cast<std::size_t>(c * rows_ + r)];
  }

  std::span<double> col(Index c) noexcept {
    return {values_.data() + c * rows_, static_cast<std::size_t>(rows_)};
  }
  std::span<const double> col(Index c) const noexcept {
    return {values_.data() + c * rows_, static_cast<std::size_t>(rows_)};
  }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<double> values_;
};

/// Compressed-sparse-column matrix.
class SparseMatrix {
 public:
  struct Triplet {
    Index row;
    Index col;
    double value;
  };

  SparseMatrix() = default;
  /// Validates the CSC invariants; throws InvalidArgument otherwise.
  SparseMatrix(Index rows, Index cols, std::vector<Index> col_ptr,
               std::vector<Index> row_idx, std::vector<double> values);

  /// Duplicate (row, col) entries are summed.
  static SparseMatrix from_triplets(Index rows, Index cols,
                                    std::vector<Triplet> triplets);
  /// Stores every entry that is not exactly zero.
  static SparseMatrix from_dense(const DenseMatrix& dense);

  Index rows() const noexcept { return rows_; }
  Index cols() const noexcept { return cols_; }
  Index nnz() const noexcept { return col_ptr_.empty() ? 0 : col_ptr_.back(); }

  std::span<const Index> col_ptr() const noexcept { return col_ptr_; }
  std::span<const Index> row_idx() const noexcept { return row_idx_; }
  std::span<const double> values() const noexcept { return values_; }

  DenseMatrix to_dense() const;

  friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Index> col_ptr_;
  std::vector<Index> row_idx_;
  std::vector<double> values_;
};

/// The input matrix A is either dense or sparse.
using DataMatrix = std::variant<DenseMatrix, SparseMatrix>;

Index rows_of(const DataMatrix& a) noexcept;
Index cols_of(const DataMatrix& a) noexcept;
bool is_sparse(const DataMatrix& a) noexcept;
/// Number of stored entries; rows*cols for dense.
Index stored_entries(const DataMatrix& a) noexcept;

/**
 * k x k symmetric Gram matrix (HH^T or W^TW). Only gram() and
 * GramMatrix::from_dense create one; the latter checks exact symmetry.
 */
class GramMatrix {
 public:
  GramMatrix() = default;
  static GramMatrix from_dense(DenseMatrix m);

  Index k() const noexcept { return m_.rows(); }
  double operator()(Index a, Index b) const noexcept { return m_(a, b); }
  const DenseMatrix& dense() const noexcept { return m_; }
  double trace() const noexcept;

  friend bool operator==(const GramMatrix&, const GramMatrix&) = default;

 private:
  explicit GramMatrix(DenseMatrix m) : m_(std::move(m)) {}
  friend GramMatrix gram_of_columns(const DenseMatrix& mt);
  DenseMatrix m_;
};

DenseMatrix transpose(const DenseMatrix& m);

/// M^T M for an m x k matrix M; result(a,b) = sum_r M(r,a) M(r,b).
GramMatrix gram(const DenseMatrix& m);
/// Same Gram from the transposed k x r layout: sum over columns r of
/// mt(:,r) mt(:,r)^T. Summation order is identical to gram().
GramMatrix gram_of_columns(const DenseMatrix& mt);

/// A * Ht where Ht is n x k (H^T passed explicitly).
DenseMatrix mm_a_ht(const DataMatrix& a, const DenseMatrix& ht);
/// A * H^T taking H itself (k x n); avoids the caller-side transpose.
DenseMatrix mm_a_h(const DataMatrix& a, const DenseMatrix& h);

/// W^T * A for W m x k.
DenseMatrix mm_wt_a(const DenseMatrix& w, const DataMatrix& a);
/// W^T * A taking W^T (k x m) directly.
DenseMatrix mm_wt_a_from_t(const DenseMatrix& wt, const DataMatrix& a);

double frobenius_sq(const DenseMatrix& m) noexcept;
double frobenius_sq(const SparseMatrix& m) noexcept;
double frobenius_sq(const DataMatrix& m) noexcept;

/// Floating-point operations performed by one mm_a_ht / mm_wt_a with
/// inner rank k: 2*rows*cols*k dense, 2*nnz*k sparse.
double mm_flops(const DataMatrix& a, Index k) noexcept;

}  // namespace faun

#endif  // FAUN_MATRIX_HPP_
