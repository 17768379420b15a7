#ifndef FAUN_DIST_HPP_
#define FAUN_DIST_HPP_

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "faun/comm.hpp"
#include "faun/engine.hpp"
#include "faun/matrix.hpp"

namespace faun {

/// p_r x p_c processor grid; rank = i * p_c + j (row-major).
struct ProcessorGrid {
  int rows = 1;
  int cols = 1;

  int size() const noexcept { return rows * cols; }
  std::pair<int, int> coord(int rank) const noexcept {
    return {rank / cols, rank % cols};
  }
  int rank_of(int i, int j) const noexcept { return i * cols + j; }
  std::string to_string() const;

  friend bool operator==(const ProcessorGrid&, const ProcessorGrid&) = default;
};

/// Parses "PRxPC"; throws InvalidArgument.
ProcessorGrid parse_grid(const std::string& text);

/// All (p_r, p_c) with p_r * p_c = p, p_r ascending.
std::vector<ProcessorGrid> divisor_grids(int p);

/**
 * Grid minimizing the per-iteration words (p_r-1) n + (p_c-1) m, ties to
 * the smaller p_r. A matrix that is tall enough (m >= n p) gets (p, 1),
 * wide enough (n >= m p) gets (1, p).
 */
ProcessorGrid make_grid(Index m, Index n, int p);

enum class Distribution { kTwoD, kNaive };

/**
 * Everything one rank owns. Global dims are the padded ones; valid_m and
 * valid_n are the sizes before padding.
 *
 * 2D:    a = A_ij (m/p_r x n/p_c); W rows [w_row0, +m/p), H cols [h_col0, +n/p)
 *        with w_row0 = i m/p_r + j m/p and h_col0 = j n/p_c + i n/p.
 * naive: a = A_r (m/p x n), a_cols = A^r (m x n/p); W rows and H cols are
 *        the r-th blocks of m/p and n/p.
 */
struct RankBlocks {
  int rank = 0;
  int grid_row = 0;
  int grid_col = 0;
  ProcessorGrid grid;
  Distribution mode = Distribution::kTwoD;
  Index m = 0, n = 0;
  Index valid_m = 0, valid_n = 0;
  DataMatrix a;
  DataMatrix a_cols;  // naive only
  Index a_row0 = 0, a_col0 = 0;
  Index w_row0 = 0, w_rows = 0;
  Index h_col0 = 0, h_cols = 0;
};

struct DistributedBlocks {
  ProcessorGrid grid;
  Distribution mode = Distribution::kTwoD;
  Index m = 0, n = 0;
  Index valid_m = 0, valid_n = 0;
  std::vector<RankBlocks> ranks;
};

/**
 * Splits A over the grid. m and n must be multiples of p (pad first);
 * valid_m / valid_n default to the full dims.
 */
DistributedBlocks distribute(const DataMatrix& a, ProcessorGrid grid,
                             Distribution mode, Index valid_m = -1,
                             Index valid_n = -1);

/// Rows [r0, r0+rows) x cols [c0, c0+cols) of a dense or sparse matrix.
DataMatrix slice(const DataMatrix& a, Index r0, Index rows, Index c0,
                 Index cols);

/// Reassembles A from 2D blocks (inverse of distribute, padding kept).
DataMatrix assemble(const DistributedBlocks& blocks);

struct GridComms {
  Communicator row;  ///< p_c ranks sharing grid row i, ordered by j
  Communicator col;  ///< p_r ranks sharing grid column j, ordered by i
};
GridComms make_grid_comms(Communicator& world, const RankBlocks& blocks);

struct RankFactors {
  DenseMatrix w;  ///< w_rows x k
  DenseMatrix h;  ///< k x h_cols
  Index w_row0 = 0;
  Index h_col0 = 0;
};

struct RankResult {
  RankFactors factors;
  IterationTrace trace;
};

/**
 * 2D-distributed AU-NMF on one rank; collective over `world`. `initial` (global, padded
 * or unpadded) overrides the seeded initialization.
 */
RankResult mpifaun_run(const RankBlocks& blocks, const NmfConfig& config,
                       Communicator& world, GridComms& comms,
                       const Factors* initial = nullptr);

/// Naive parallel AU-NMF on one rank; collective over `comm`.
RankResult naive_run(const RankBlocks& blocks, const NmfConfig& config,
                     Communicator& comm, const Factors* initial = nullptr);

/// Assembles the global factors from every rank's blocks and drops rows of
/// W / columns of H at or beyond (valid_m, valid_n).
Factors gather_factors(const std::vector<RankFactors>& parts, Index valid_m,
                       Index valid_n);

struct DistributedResult {
  Factors factors;
  /// Errors from rank 0; times are the per-iteration maxima over ranks,
  /// flops and counters those of rank 0.
  IterationTrace trace;
  std::vector<IterationTrace> rank_traces;
  ProcessorGrid grid;
  Index padded_m = 0, padded_n = 0;
};

/**
 * Pads A to multiples of p, distributes it, runs the chosen algorithm on p
 * in-process ranks and gathers the factors. The grid defaults to
 * make_grid(m, n, p) for 2D and is ignored (p x 1) for naive.
 */
DistributedResult run_distributed(const DataMatrix& a, const NmfConfig& config,
                                  int p, Distribution mode,
                                  std::optional<ProcessorGrid> grid = {},
                                  const Factors* initial = nullptr);

}  // namespace faun

#endif  // FAUN_DIST_HPP_
