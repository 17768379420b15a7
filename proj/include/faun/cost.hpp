#ifndef FAUN_COST_HPP_
#define FAUN_COST_HPP_

#include <optional>
#include <string>

#include "faun/comm.hpp"
#include "faun/dist.hpp"
#include "faun/engine.hpp"

namespace faun {

enum class ParallelAlgo { kNaive, kFaun };

std::string to_string(ParallelAlgo algo);

/**
 * Flops F(m, n, k) of the local update computation for an m x k and a
 * k x n factor. MU and HALS: 2(m+n)k^2. BPP has no closed form; we use the
 * upper-bound surrogate k^3/3 + k^2 per right-hand side, i.e.
 * 2 k^3/3 + (m+n) k^2 for both factors, and flag it as such.
 */
struct LucFlopModel {
  Algo algo = Algo::kMu;

  double flops(double m, double n, double k) const noexcept;
  bool surrogate() const noexcept { return algo == Algo::kBpp; }
};

struct CostReport {
  double flops = 0.0;
  double words = 0.0;
  double messages = 0.0;
  double memory_words = 0.0;
  /// Per-collective words/messages; `calls` is the number of collectives.
  CollectiveTally all_gather;
  CollectiveTally reduce_scatter;
  CollectiveTally all_reduce;
  /// Latency of HALS normalization if done as k separate reductions,
  /// k log p (0 unless faun + HALS). Reported only; not part of messages.
  double hals_unbatched_messages = 0.0;
  bool luc_surrogate = false;

  double modeled_seconds(double alpha, double beta, double gamma) const noexcept {
    return gamma * flops + beta * words + alpha * messages;
  }
};

/**
 * Leading-order per-iteration costs of one rank.
 *   faun:  flops 4mnk/p + (m+n)k^2/p + F(m/p, n/p, k); gathers of H_j and
 *          W_i^T, reduce-scatters of V_ij and Y_ij, two k^2 all-reduces
 *          (+ one of k for HALS normalization).
 *   naive: flops 4mnk/p + (m+n)k^2 + F(m/p, n/p, k); all-gathers of H and W.
 * With nnz given, 4mnk/p becomes 4 nnz k/p. Words and messages use exactly
 * the collective sizes the engines issue, so they match the counters.
 * Throws InvalidArgument if grid.size() != p.
 */
CostReport per_iter_cost(ParallelAlgo algo, Index m, Index n, Index k, int p,
                         ProcessorGrid grid, const LucFlopModel& luc,
                         std::optional<double> nnz = {});

/**
 * Words lower bound min(sqrt(m n k^2 / p), n k) with n <= m (labels are
 * swapped otherwise). Empty unless k < n and k < sqrt(m n / p).
 */
std::optional<double> bandwidth_lower_bound(Index m, Index n, Index k, int p);

/// Divisor pair of p minimizing per_iter_cost(kFaun).words; values within
/// a relative 1e-12 count as ties and go to the smaller p_r.
ProcessorGrid optimize_grid_exhaustive(Index m, Index n, Index k, int p);

}  // namespace faun

#endif  // FAUN_COST_HPP_
