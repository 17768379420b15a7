#include "faun/cost.hpp"

#include <algorithm>
#include <cmath>

#include "faun/errors.hpp"

namespace faun {

std::string to_string(ParallelAlgo algo) {
  return algo == ParallelAlgo::kNaive ? "naive" : "faun";
}

double LucFlopModel::flops(double m, double n, double k) const noexcept {
  if (algo == Algo::kBpp) return 2.0 * k * k * k / 3.0 + (m + n) * k * k;
  return 2.0 * (m + n) * k * k;
}

namespace {

void add(CollectiveTally& t, CollectiveKind kind, double n, int p) {
  const CollectiveCost c = collective_cost(kind, n, p);
  ++t.calls;
  t.words += c.words;
  t.messages += c.messages;
}

}  // namespace

CostReport per_iter_cost(ParallelAlgo algo, Index m, Index n, Index k, int p,
                         ProcessorGrid grid, const LucFlopModel& luc,
                         std::optional<double> nnz) {
  if (m < 1 || n < 1 || k < 1 || p < 1) {
    throw InvalidArgument("per_iter_cost: dimensions must be >= 1");
  }
  if (grid.rows < 1 || grid.cols < 1 || grid.size() != p) {
    throw InvalidArgument("per_iter_cost: grid " + grid.to_string() +
                          " is inconsistent with p = " + std::to_string(p));
  }
  const double dm = static_cast<double>(m), dn = static_cast<double>(n);
  const double dk = static_cast<double>(k), dp = p;
  const double mn = nnz ? *nnz : dm * dn;

  CostReport r;
  r.luc_surrogate = luc.surrogate();
  const double local_luc = luc.flops(dm / dp, dn / dp, dk);
  if (algo == ParallelAlgo::kFaun) {
    const int pr = grid.rows, pc = grid.cols;
    r.flops = 4.0 * mn * dk / dp + (dm + dn) * dk * dk / dp + local_luc;
    // W step: gather H_j (k x n/p_c) over p_r, scatter V_ij (m/p_r x k) over p_c.
    add(r.all_gather, CollectiveKind::kAllGather, dk * dn / pc, pr);
    add(r.reduce_scatter, CollectiveKind::kReduceScatter, dm / pr * dk, pc);
    // H step: gather W_i^T (k x m/p_r) over p_c, scatter Y_ij over p_r.
    add(r.all_gather, CollectiveKind::kAllGather, dk * dm / pr, pc);
    add(r.reduce_scatter, CollectiveKind::kReduceScatter, dk * dn / pc, pr);
    add(r.all_reduce, CollectiveKind::kAllReduce, dk * dk, p);
    add(r.all_reduce, CollectiveKind::kAllReduce, dk * dk, p);
    if (luc.algo == Algo::kHals) {
      add(r.all_reduce, CollectiveKind::kAllReduce, dk, p);
      r.hals_unbatched_messages = dk * ceil_log2(p);
    }
    r.memory_words = mn / dp + (dm + dn) * dk / dp + 2.0 * dm * dk / pr +
                     2.0 * dn * dk / pc;
  } else {
    r.flops = 4.0 * mn * dk / dp + (dm + dn) * dk * dk + local_luc;
    add(r.all_gather, CollectiveKind::kAllGather, dn * dk, p);
    add(r.all_gather, CollectiveKind::kAllGather, dm * dk, p);
    r.memory_words = 2.0 * mn / dp + (dm + dn) * dk / dp + (dm + dn) * dk;
  }
  r.words = r.all_gather.words + r.reduce_scatter.words + r.all_reduce.words;
  r.messages =
      r.all_gather.messages + r.reduce_scatter.messages + r.all_reduce.messages;
  return r;
}

std::optional<double> bandwidth_lower_bound(Index m, Index n, Index k, int p) {
  if (m < 1 || n < 1 || k < 1 || p < 1) {
    throw InvalidArgument("bandwidth_lower_bound: arguments must be >= 1");
  }
  if (n > m) std::swap(m, n);
  const double dm = static_cast<double>(m), dn = static_cast<double>(n);
  const double dk = static_cast<double>(k);
  if (!(k < n) || !(dk < std::sqrt(dm * dn / p))) return std::nullopt;
  return std::min(std::sqrt(dm * dn * dk * dk / p), dn * dk);
}

ProcessorGrid optimize_grid_exhaustive(Index m, Index n, Index k, int p) {
  const LucFlopModel mu{Algo::kMu};
  ProcessorGrid best;
  double best_words = 0.0;
  bool first = true;
  for (const auto& g : divisor_grids(p)) {
    const double w = per_iter_cost(ParallelAlgo::kFaun, m, n, k, p, g, mu).words;
    if (first || w < best_words - 1e-12 * std::max(1.0, best_words)) {
      best = g;
      best_words = w;
      first = false;
    }
  }
  return best;
}

}  // namespace faun
