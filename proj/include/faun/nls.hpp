#ifndef FAUN_NLS_HPP_
#define FAUN_NLS_HPP_

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "faun/matrix.hpp"

namespace faun {

/**
 * Multiple right-hand-side nonnegative least squares problem in normal
 * equation form: min_{X >= 0} ||C X - B||_F given gram = C^T C (k x k)
 * and rhs = C^T B (k x c). Each column of rhs is an independent problem.
 */
struct NlsProblem {
  GramMatrix gram;
  DenseMatrix rhs;
};

/// Floor on the MU denominator.
inline constexpr double kMuFloor = 1e-16;
/// Columns whose global squared norm is below this are not normalized.
inline constexpr double kNormalizeFloor = 1e-24;

// ---------------------------------------------------------------------------
// Local update computations. Blocks are r x k: one row per item (a row of W,
// or a column of H stored transposed), one column per rank-one component.

/**
 * Multiplicative update:
 *   out(i,j) = current(i,j) * rhs(i,j) / max((current * gram)(i,j), kMuFloor)
 * Throws InvalidArgument if current has a negative entry.
 */
DenseMatrix update_mu(const GramMatrix& gram, const DenseMatrix& rhs,
                      const DenseMatrix& current);

/// Step applied to the HALS column residual.
enum class HalsStep {
  kUnit,      ///< col_i + rhs_i - current*gram_i, taken literally
  kDiagonal,  ///< residual divided by gram(i,i) (exact coordinate minimizer)
};

struct HalsResult {
  DenseMatrix block;
  /// Per-column sum of squares of the updated block (local contribution).
  std::vector<double> col_sum_sq;
  /// Columns with gram(i,i) == 0. In kDiagonal mode they are left unchanged.
  std::vector<Index> degenerate;
};

/**
 * One HALS sweep over the k columns in order 0..k-1, each column using the
 * already-updated preceding columns:
 *   col_i <- [col_i + (rhs_i - current * gram_i) / s_i]_+
 * with s_i = 1 (kUnit) or gram(i,i) (kDiagonal). Rows are independent.
 */
HalsResult update_hals(const GramMatrix& gram, const DenseMatrix& rhs,
                       const DenseMatrix& current,
                       HalsStep step = HalsStep::kUnit);

struct NormalizeResult {
  DenseMatrix block;
  /// true where the global sum was below kNormalizeFloor (column untouched).
  std::vector<bool> flagged;
};

/// Divides each column by sqrt(global_col_sum_sq[c]).
NormalizeResult normalize_columns(const DenseMatrix& block,
                                  std::span<const double> global_col_sum_sq);

/// Fills column c with DBL_EPSILON on rows [0, valid_rows) for every c with
/// reset[c] set. Rows at or past valid_rows (grid padding) stay zero.
void reset_degenerate_columns(DenseMatrix& block, const std::vector<bool>& reset,
                              Index valid_rows);

// ---------------------------------------------------------------------------
// Block principal pivoting

/// Raised when a column exceeds the pivoting iteration cap (5k).
class NoConvergence : public std::runtime_error {
 public:
  NoConvergence(const std::string& what, Index column, DenseMatrix best)
      : std::runtime_error(what), column_(column), best_(std::move(best)) {}
  Index column() const noexcept { return column_; }
  /// Current iterate for every column; the failing column holds the
  /// iterate with the fewest KKT violations seen.
  const DenseMatrix& best() const noexcept { return best_; }

 private:
  Index column_;
  DenseMatrix best_;
};

struct BppResult {
  DenseMatrix solution;  ///< k x c, entrywise >= 0
  /// Columns whose passive-set system was numerically singular; returned as 0.
  std::vector<Index> degenerate;
  Index max_iterations = 0;  ///< largest pivoting iteration count of a column
  double flops = 0.0;
};

/**
 * Solves the NLS problem column by column with block principal pivoting.
 * Passive sets are exchanged in full while the number of KKT violations
 * keeps decreasing; after three non-improving exchanges a column falls back
 * to swapping only its lowest violating index. Columns sharing a passive
 * set share one Cholesky factorization of the passive principal submatrix.
 *
 * warm_start (k x c, optional) seeds each passive set with its positive
 * entries.
 *
 * Throws InvalidArgument if gram is not positive definite (a Cholesky pivot
 * <= 1e-10 * trace) or dimensions disagree; NoConvergence past 5k
 * iterations for some column.
 */
BppResult solve_bpp(const NlsProblem& problem,
                    const DenseMatrix* warm_start = nullptr);

/// max over entries of max(-min(x,0), -min(y,0), |x*y|), y = gram*x - rhs.
double kkt_residual(const NlsProblem& problem, const DenseMatrix& x);

/**
 * AU-NMF wrapper around solve_bpp for an r x k block: solves
 * gram * x_i = rhs_i^T with x >= 0 for every row i, warm-started from
 * current. Components with gram(i,i) <= 1e-13 * trace are pinned to zero.
 */
DenseMatrix update_bpp(const GramMatrix& gram, const DenseMatrix& rhs,
                       const DenseMatrix& current, double* flops = nullptr);

}  // namespace faun

#endif  // FAUN_NLS_HPP_
