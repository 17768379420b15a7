#ifndef FAUN_ENGINE_HPP_
#define FAUN_ENGINE_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "faun/comm.hpp"
#include "faun/matrix.hpp"
#include "faun/nls.hpp"

namespace faun {

enum class Algo { kMu, kHals, kBpp };

std::string to_string(Algo algo);
/// Accepts "mu", "hals", "bpp" (also "abpp"); throws InvalidArgument.
Algo parse_algo(const std::string& name);

struct NmfConfig {
  Index k = 1;
  Index max_iters = 1;
  Algo algo = Algo::kBpp;
  std::uint64_t seed = 0;
  /// Stop once an iteration improves the relative error by less than this.
  std::optional<double> tolerance;
};

/// Wall-time breakdown, seconds. Three local computation tasks and three
/// communication tasks; W and H phases are summed.
struct PhaseTimes {
  double mm = 0.0;
  double luc = 0.0;
  double gram = 0.0;
  double all_gather = 0.0;
  double reduce_scatter = 0.0;
  double all_reduce = 0.0;

  double total() const noexcept {
    return mm + luc + gram + all_gather + reduce_scatter + all_reduce;
  }
  PhaseTimes& operator+=(const PhaseTimes& o);
};

/// Local flops of one rank (or of the sequential run).
struct FlopCounts {
  double mm = 0.0;
  double gram = 0.0;
  double luc = 0.0;
  double total() const noexcept { return mm + gram + luc; }
};

struct IterationRecord {
  Index iteration = 0;  // 1-based
  double rel_error = 0.0;
  PhaseTimes times;
  FlopCounts flops;
  /// Counter delta for this iteration (zero for the sequential engine).
  CommCounters comm;
};

struct IterationTrace {
  /// Error of the initial factors.
  double initial_error = 0.0;
  std::vector<IterationRecord> iterations;
  /// Collectives issued before the first iteration.
  CommCounters setup_comm;

  PhaseTimes total_times() const;
  double final_error() const;
};

struct Factors {
  DenseMatrix W;  // m x k
  DenseMatrix H;  // k x n
};

struct NmfResult {
  Factors factors;
  IterationTrace trace;
};

/// Uniform [0,1) factors from CounterRng(seed): W(r,c) uses stream kInitW at
/// (r, c), H(c, j) stream kInitH at (c, j).
Factors init_factors(Index m, Index n, Index k, std::uint64_t seed);

/**
 * rows x cols block of a generated matrix whose top-left entry has global
 * index (row0, col0). Entries with global row >= valid_rows or global column
 * >= valid_cols (grid padding) are zero.
 */
DenseMatrix init_block(std::uint64_t seed, std::uint64_t stream, Index row0,
                       Index rows, Index col0, Index cols, Index valid_rows,
                       Index valid_cols);

/**
 * ||A - WH||_F / ||A||_F from the trace identity
 *   ||A - WH||^2 = ||A||^2 - 2 t + sum(gramW .* gramH),  t = <W^T A, H>.
 * Throws InvalidArgument if normA_sq <= 0.
 */
double relative_error(double normA_sq, const GramMatrix& gramW,
                      const GramMatrix& gramH, double WtAHt_trace);

/// Sum of entrywise products of two equally shaped matrices.
double inner_product(const DenseMatrix& a, const DenseMatrix& b);

// ---------------------------------------------------------------------------
// Building blocks shared by the sequential and the distributed drivers.

enum class Side { kW, kH };

struct BlockUpdate {
  DenseMatrix block;  ///< r x k
  double flops = 0.0;
  /// HALS only: local per-column sums of squares of the new block.
  std::vector<double> col_sum_sq;
};

/// Applies the configured kernel to an r x k block (rows of W, or columns
/// of H stored transposed).
BlockUpdate update_block(Algo algo, Side side, const GramMatrix& gram,
                         const DenseMatrix& rhs, const DenseMatrix& current);

/**
 * HALS post-processing of a W block given the global column sums: columns
 * whose global sum is exactly zero are refilled with DBL_EPSILON on rows
 * [0, valid_rows), then every column with sum >= kNormalizeFloor is
 * normalized. Returns the factor to apply to the matching row of H so that
 * W H is unchanged: the column norm, 0 for refilled columns, 1 otherwise.
 */
std::vector<double> finish_hals_w(DenseMatrix& w,
                                  std::span<const double> global_col_sum_sq,
                                  Index valid_rows);

/// Multiplies row i of a k x c block by scale[i].
void scale_rows(DenseMatrix& h, std::span<const double> scale);

/// Per-column sums of squares of the rows of a k x r (transposed) block.
std::vector<double> row_sum_sq(const DenseMatrix& t);

/**
 * Sequential AU-NMF. Starts from `initial` if given, otherwise from
 * init_factors(m, n, k, seed). Requires 1 <= k <= min(m, n) and A >= 0.
 * Kernel failures are rethrown with the iteration index prepended.
 */
NmfResult aunmf_run(const DataMatrix& a, const NmfConfig& config,
                    const Factors* initial = nullptr);

/// Validates config against an m x n input; throws InvalidArgument.
void check_config(const NmfConfig& config, Index m, Index n);

/// Returns true when the tolerance rule says to stop after `record`.
bool should_stop(const NmfConfig& config, double previous_error,
                 double current_error);

}  // namespace faun

#endif  // FAUN_ENGINE_HPP_
