#ifndef FAUN_COMM_HPP_
#define FAUN_COMM_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace faun {

enum class CollectiveKind { kAllGather, kReduceScatter, kAllReduce };

/// words / messages for one collective on `p` ranks moving `n` words in
/// total, under the alpha-beta model with optimal collectives:
///   all-gather, reduce-scatter: ((p-1)/p) n words, ceil(log2 p) messages
///   all-reduce:                2((p-1)/p) n words, 2 ceil(log2 p) messages
/// Both are zero when p == 1.
struct CollectiveCost {
  double words = 0.0;
  double messages = 0.0;
};
CollectiveCost collective_cost(CollectiveKind kind, double n, int p);
int ceil_log2(int p);

struct CollectiveTally {
  std::uint64_t calls = 0;
  double words = 0.0;
  double messages = 0.0;

  CollectiveTally& operator+=(const CollectiveTally& o);
  friend CollectiveTally operator-(CollectiveTally a, const CollectiveTally& b);
  friend bool operator==(const CollectiveTally&, const CollectiveTally&) = default;
};

/**
 * Modeled communication volume seen by one rank. `diagnostic` holds
 * collectives issued only to report the error metric; they are kept out of
 * words() / messages() so totals compare against the algorithm's cost.
 */
struct CommCounters {
  CollectiveTally all_gather;
  CollectiveTally reduce_scatter;
  CollectiveTally all_reduce;
  CollectiveTally diagnostic;

  double words() const noexcept;
  double messages() const noexcept;

  CommCounters& operator+=(const CommCounters& o);
  friend CommCounters operator-(CommCounters a, const CommCounters& b);
  friend bool operator==(const CommCounters&, const CommCounters&) = default;
};

enum class Scope { kGlobal, kGridRow, kGridColumn };

/// Whether a collective counts toward the algorithm or the diagnostics.
enum class Accounting { kAlgorithm, kDiagnostic };

namespace detail {
struct Group;
}

/**
 * One rank's handle on a group of ranks. All collectives are blocking and
 * must be entered by every member in the same order. Reductions sum in
 * ascending rank order, so results do not depend on thread scheduling.
 *
 * Handles are cheap to copy; copies share the rank's counters.
 */
class Communicator {
 public:
  int size() const noexcept;
  int rank() const noexcept { return rank_; }
  Scope scope() const noexcept { return scope_; }

  /// Concatenation of every rank's `local` in rank order.
  std::vector<double> all_gather(std::span<const double> local);
  /// Rank r receives elements [r n/p, (r+1) n/p) of the elementwise sum.
  std::vector<double> reduce_scatter(std::span<const double> local);
  /// Elementwise sum on every rank.
  std::vector<double> all_reduce(std::span<const double> local,
                                 Accounting accounting = Accounting::kAlgorithm);
  /// Uncounted synchronization point.
  void barrier();

  /**
   * Splits a communicator laid out as a grid_rows x grid_cols grid into
   * (row communicator, column communicator). The row communicator holds the
   * grid_cols ranks sharing grid_row, ordered by grid_col; the column
   * communicator the grid_rows ranks sharing grid_col, ordered by grid_row.
   * Throws ProtocolError on every rank if the ranks disagree on the grid.
   */
  std::pair<Communicator, Communicator> split(int grid_rows, int grid_cols,
                                              int grid_row, int grid_col);

  /// Counters of the owning rank, summed over this handle and every
  /// communicator split from it.
  const CommCounters& counters() const noexcept { return *counters_; }

 private:
  friend void run_spmd(int, const std::function<void(Communicator&)>&);
  Communicator(std::shared_ptr<detail::Group> group, int rank, Scope scope,
               std::shared_ptr<CommCounters> counters);

  // Posts `local`, waits for all ranks, returns every rank's buffer.
  std::vector<std::span<const double>> exchange(std::span<const double> local);

  std::shared_ptr<detail::Group> group_;
  int rank_ = 0;
  Scope scope_ = Scope::kGlobal;
  std::shared_ptr<CommCounters> counters_;
};

/**
 * Runs `body` on p in-process ranks, one thread each, and joins them.
 * If any rank throws, the communicator is torn down (peers blocked in a
 * collective get CommAborted) and the first original exception is
 * rethrown to the caller.
 */
void run_spmd(int p, const std::function<void(Communicator&)>& body);

}  // namespace faun

#endif  // FAUN_COMM_HPP_
