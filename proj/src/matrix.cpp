#include "faun/matrix.hpp"

#include <algorithm>
#include <string>

#include "faun/errors.hpp"

namespace faun {
namespace {

void require_dims(Index rows, Index cols, const char* what) {
  if (rows < 1 || cols < 1) {
    throw InvalidArgument(std::string(what) + ": dimensions must be >= 1, got " +
                          std::to_string(rows) + "x" + std::to_string(cols));
  }
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidArgument(msg);
}

std::string dims(Index r, Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

// Rows of the output block kept hot while streaming over the inner index.
constexpr Index kRowBlock = 256;

// C (m x k) += A_dense (m x n) * H^T, H given as k x n. Each output entry
// accumulates in ascending inner index l.
void dense_a_h(const DenseMatrix& a, const DenseMatrix& h, DenseMatrix& c) {
  const Index m = a.rows(), n = a.cols(), k = h.rows();
  for (Index r0 = 0; r0 < m; r0 += kRowBlock) {
    const Index rb = std::min(kRowBlock, m - r0);
    for (Index l = 0; l < n; ++l) {
      const double* acol = a.data() + l * m + r0;
      const double* hcol = h.data() + l * k;
      for (Index j = 0; j < k; ++j) {
        const double s = hcol[j];
        double* ccol = c.data() + j * m + r0;
        for (Index i = 0; i < rb; ++i) ccol[i] += acol[i] * s;
      }
    }
  }
}

void sparse_a_h(const SparseMatrix& a, const DenseMatrix& h, DenseMatrix& c) {
  const Index m = a.rows(), n = a.cols(), k = h.rows();
  DenseMatrix ct(k, m);
  const auto cp = a.col_ptr();
  const auto ri = a.row_idx();
  const auto va = a.values();
  for (Index l = 0; l < n; ++l) {
    const double* hcol = h.data() + l * k;
    for (Index p = cp[l]; p < cp[l + 1]; ++p) {
      const double v = va[p];
      double* out = ct.data() + ri[p] * k;
      for (Index j = 0; j < k; ++j) out[j] += v * hcol[j];
    }
  }
  for (Index j = 0; j < k; ++j)
    for (Index i = 0; i < m; ++i) c(i, j) = ct(j, i);
}

// out (k x n) = W^T A with W^T given as k x m. Ascending r per entry.
void dense_wt_a(const DenseMatrix& wt, const DenseMatrix& a, DenseMatrix& out) {
  const Index k = wt.rows(), m = a.rows(), n = a.cols();
  Index c = 0;
  for (; c + 4 <= n; c += 4) {
    const double* a0 = a.data() + c * m;
    const double* a1 = a0 + m;
    const double* a2 = a1 + m;
    const double* a3 = a2 + m;
    double* o0 = out.data() + c * k;
    double* o1 = o0 + k;
    double* o2 = o1 + k;
    double* o3 = o2 + k;
    for (Index r = 0; r < m; ++r) {
      const double* w = wt.data() + r * k;
      const double s0 = a0[r], s1 = a1[r], s2 = a2[r], s3 = a3[r];
      for (Index j = 0; j < k; ++j) {
        o0[j] += s0 * w[j];
        o1[j] += s1 * w[j];
        o2[j] += s2 * w[j];
        o3[j] += s3 * w[j];
      }
    }
  }
  for (; c < n; ++c) {
    const double* acol = a.data() + c * m;
    double* o = out.data() + c * k;
    for (Index r = 0; r < m; ++r) {
      const double* w = wt.data() + r * k;
      const double s = acol[r];
      for (Index j = 0; j < k; ++j) o[j] += s * w[j];
    }
  }
}

void sparse_wt_a(const DenseMatrix& wt, const SparseMatrix& a, DenseMatrix& out) {
  const Index k = wt.rows(), n = a.cols();
  const auto cp = a.col_ptr();
  const auto ri = a.row_idx();
  const auto va = a.values();
  for (Index c = 0; c < n; ++c) {
    double* o = out.data() + c * k;
    for (Index p = cp[c]; p < cp[c + 1]; ++p) {
      const double* w = wt.data() + ri[p] * k;
      const double s = va[p];
      for (Index j = 0; j < k; ++j) o[j] += s * w[j];
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// DenseMatrix

DenseMatrix::DenseMatrix(Index rows, Index cols, double fill)
    : rows_(rows), cols_(cols) {
  require_dims(rows, cols, "DenseMatrix");
  values_.assign(static_cast<std::size_t>(rows * cols), fill);
}

DenseMatrix::DenseMatrix(Index rows, Index cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  require_dims(rows, cols, "DenseMatrix");
  require(static_cast<Index>(values_.size()) == rows * cols,
          "DenseMatrix: expected " + std::to_string(rows * cols) +
              " values, got " + std::to_string(values_.size()));
}

DenseMatrix DenseMatrix::from_rows(
    std::initializer_list<std::initializer_list<double>> rows) {
  const auto nr = static_cast<Index>(rows.size());
  require(nr >= 1, "DenseMatrix::from_rows: no rows");
  const auto nc = static_cast<Index>(rows.begin()->size());
  DenseMatrix m(nr, nc);
  Index r = 0;
  for (const auto& row : rows) {
    require(static_cast<Index>(row.size()) == nc,
            "DenseMatrix::from_rows: ragged rows");
    Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

DenseMatrix DenseMatrix::identity(Index n) {
  DenseMatrix m(n, n);
  for (Index i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

// ---------------------------------------------------------------------------
// SparseMatrix

SparseMatrix::SparseMatrix(Index rows, Index cols, std::vector<Index> col_ptr,
                           std::vector<Index> row_idx,
                           std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      col_ptr_(std::move(col_ptr)),
      row_idx_(std::move(row_idx)),
      values_(std::move(values)) {
  require_dims(rows, cols, "SparseMatrix");
  require(static_cast<Index>(col_ptr_.size()) == cols + 1,
          "SparseMatrix: column pointer array must have cols+1 entries");
  require(col_ptr_.front() == 0, "SparseMatrix: col_ptr[0] must be 0");
  for (Index c = 0; c < cols; ++c) {
    require(col_ptr_[c] <= col_ptr_[c + 1],
            "SparseMatrix: column pointers must be nondecreasing");
  }
  const Index nz = col_ptr_.back();
  require(static_cast<Index>(row_idx_.size()) == nz &&
              static_cast<Index>(values_.size()) == nz,
          "SparseMatrix: nnz must equal the last column pointer");
  for (Index c = 0; c < cols; ++c) {
    for (Index p = col_ptr_[c]; p < col_ptr_[c + 1]; ++p) {
      require(row_idx_[p] >= 0 && row_idx_[p] < rows,
              "SparseMatrix: row index out of range");
      require(p == col_ptr_[c] || row_idx_[p - 1] < row_idx_[p],
              "SparseMatrix: row indices must be strictly increasing "
              "within a column");
    }
  }
}

SparseMatrix SparseMatrix::from_triplets(Index rows, Index cols,
                                         std::vector<Triplet> triplets) {
  require_dims(rows, cols, "SparseMatrix");
  for (const auto& t : triplets) {
    require(t.row >= 0 && t.row < rows && t.col >= 0 && t.col < cols,
            "SparseMatrix::from_triplets: entry (" + std::to_string(t.row) +
                "," + std::to_string(t.col) + ") outside " + dims(rows, cols));
  }
  std::stable_sort(triplets.begin(), triplets.end(),
                   [](const Triplet& x, const Triplet& y) {
                     return x.col != y.col ? x.col < y.col : x.row < y.row;
                   });
  std::vector<Index> col_ptr(static_cast<std::size_t>(cols + 1), 0);
  std::vector<Index> row_idx;
  std::vector<double> values;
  row_idx.reserve(triplets.size());
  values.reserve(triplets.size());
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const auto& t = triplets[i];
    if (i > 0 && triplets[i - 1].col == t.col && triplets[i - 1].row == t.row) {
      values.back() += t.value;
      continue;
    }
    row_idx.push_back(t.row);
    values.push_back(t.value);
    ++col_ptr[static_cast<std::size_t>(t.col + 1)];
  }
  for (Index c = 0; c < cols; ++c) col_ptr[c + 1] += col_ptr[c];
  return SparseMatrix(rows, cols, std::move(col_ptr), std::move(row_idx),
                      std::move(values));
}

SparseMatrix SparseMatrix::from_dense(const DenseMatrix& dense) {
  std::vector<Index> col_ptr(static_cast<std::size_t>(dense.cols() + 1), 0);
  std::vector<Index> row_idx;
  std::vector<double> values;
  for (Index c = 0; c < dense.cols(); ++c) {
    for (Index r = 0; r < dense.rows(); ++r) {
      if (dense(r, c) != 0.0) {
        row_idx.push_back(r);
        values.push_back(dense(r, c));
      }
    }
    col_ptr[c + 1] = static_cast<Index>(row_idx.size());
  }
  return SparseMatrix(dense.rows(), dense.cols(), std::move(col_ptr),
                      std::move(row_idx), std::move(values));
}

DenseMatrix SparseMatrix::to_dense() const {
  DenseMatrix d(rows_, cols_);
  for (Index c = 0; c < cols_; ++c)
    for (Index p = col_ptr_[c]; p < col_ptr_[c + 1]; ++p)
      d(row_idx_[p], c) = values_[p];
  return d;
}

// ---------------------------------------------------------------------------

Index rows_of(const DataMatrix& a) noexcept {
  return std::visit([](const auto& m) { return m.rows(); }, a);
}
Index cols_of(const DataMatrix& a) noexcept {
  return std::visit([](const auto& m) { return m.cols(); }, a);
}
bool is_sparse(const DataMatrix& a) noexcept {
  return std::holds_alternative<SparseMatrix>(a);
}
Index stored_entries(const DataMatrix& a) noexcept {
  if (const auto* s = std::get_if<SparseMatrix>(&a)) return s->nnz();
  return std::get<DenseMatrix>(a).size();
}

GramMatrix GramMatrix::from_dense(DenseMatrix m) {
  require(m.rows() == m.cols() && m.rows() >= 1,
          "GramMatrix: must be square and non-empty, got " +
              dims(m.rows(), m.cols()));
  for (Index b = 0; b < m.cols(); ++b)
    for (Index a = 0; a < b; ++a)
      require(m(a, b) == m(b, a), "GramMatrix: input is not symmetric");
  return GramMatrix(std::move(m));
}

double GramMatrix::trace() const noexcept {
  double t = 0.0;
  for (Index i = 0; i < k(); ++i) t += m_(i, i);
  return t;
}

DenseMatrix transpose(const DenseMatrix& m) {
  if (m.empty()) return {};
  DenseMatrix t(m.cols(), m.rows());
  for (Index c = 0; c < m.cols(); ++c)
    for (Index r = 0; r < m.rows(); ++r) t(c, r) = m(r, c);
  return t;
}

GramMatrix gram_of_columns(const DenseMatrix& mt) {
  require_dims(mt.rows(), mt.cols(), "gram");
  const Index k = mt.rows(), r = mt.cols();
  DenseMatrix g(k, k);
  for (Index i = 0; i < r; ++i) {
    const double* x = mt.data() + i * k;
    for (Index b = 0; b < k; ++b) {
      const double xb = x[b];
      double* gcol = g.data() + b * k;
      for (Index a = 0; a <= b; ++a) gcol[a] += x[a] * xb;
    }
  }
  for (Index b = 0; b < k; ++b)
    for (Index a = b + 1; a < k; ++a) g(a, b) = g(b, a);
  return GramMatrix(std::move(g));
}

GramMatrix gram(const DenseMatrix& m) {
  require_dims(m.rows(), m.cols(), "gram");
  return gram_of_columns(transpose(m));
}

DenseMatrix mm_a_h(const DataMatrix& a, const DenseMatrix& h) {
  require(!h.empty() && cols_of(a) == h.cols(),
          "mm_a_ht: inner dimensions disagree (A is " +
              dims(rows_of(a), cols_of(a)) + ", H is " +
              dims(h.rows(), h.cols()) + ")");
  DenseMatrix c(rows_of(a), h.rows());
  if (const auto* s = std::get_if<SparseMatrix>(&a)) {
    sparse_a_h(*s, h, c);
  } else {
    dense_a_h(std::get<DenseMatrix>(a), h, c);
  }
  return c;
}

DenseMatrix mm_a_ht(const DataMatrix& a, const DenseMatrix& ht) {
  require(!ht.empty() && cols_of(a) == ht.rows(),
          "mm_a_ht: inner dimensions disagree (A is " +
              dims(rows_of(a), cols_of(a)) + ", Ht is " +
              dims(ht.rows(), ht.cols()) + ")");
  return mm_a_h(a, transpose(ht));
}

DenseMatrix mm_wt_a_from_t(const DenseMatrix& wt, const DataMatrix& a) {
  require(!wt.empty() && wt.cols() == rows_of(a),
          "mm_wt_a: inner dimensions disagree (W^T is " +
              dims(wt.rows(), wt.cols()) + ", A is " +
              dims(rows_of(a), cols_of(a)) + ")");
  DenseMatrix out(wt.rows(), cols_of(a));
  if (const auto* s = std::get_if<SparseMatrix>(&a)) {
    sparse_wt_a(wt, *s, out);
  } else {
    dense_wt_a(wt, std::get<DenseMatrix>(a), out);
  }
  return out;
}

DenseMatrix mm_wt_a(const DenseMatrix& w, const DataMatrix& a) {
  require(!w.empty() && w.rows() == rows_of(a),
          "mm_wt_a: inner dimensions disagree (W is " +
              dims(w.rows(), w.cols()) + ", A is " +
              dims(rows_of(a), cols_of(a)) + ")");
  return mm_wt_a_from_t(transpose(w), a);
}

double frobenius_sq(const DenseMatrix& m) noexcept {
  double s = 0.0;
  for (double v : m.values()) s += v * v;
  return s;
}

double frobenius_sq(const SparseMatrix& m) noexcept {
  double s = 0.0;
  for (double v : m.values()) s += v * v;
  return s;
}

double frobenius_sq(const DataMatrix& m) noexcept {
  return std::visit([](const auto& x) { return frobenius_sq(x); }, m);
}

double mm_flops(const DataMatrix& a, Index k) noexcept {
  return 2.0 * static_cast<double>(stored_entries(a)) * static_cast<double>(k);
}

}  // namespace faun
