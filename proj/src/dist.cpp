#include "faun/dist.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "faun/errors.hpp"
#include "faun/io.hpp"
#include "faun/random.hpp"
#include "timer.hpp"

namespace faun {

std::string ProcessorGrid::to_string() const {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

ProcessorGrid parse_grid(const std::string& text) {
  const auto x = text.find_first_of("xX");
  const auto digits = [](const std::string& s) {
    return !s.empty() && s.size() < 9 &&
           std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isdigit(c) != 0; });
  };
  if (x == std::string::npos || !digits(text.substr(0, x)) ||
      !digits(text.substr(x + 1))) {
    throw InvalidArgument("grid must look like PRxPC, got '" + text + "'");
  }
  ProcessorGrid g{std::stoi(text.substr(0, x)), std::stoi(text.substr(x + 1))};
  if (g.rows < 1 || g.cols < 1) {
    throw InvalidArgument("grid dimensions must be >= 1, got '" + text + "'");
  }
  return g;
}

std::vector<ProcessorGrid> divisor_grids(int p) {
  if (p < 1) throw InvalidArgument("number of ranks must be >= 1");
  std::vector<ProcessorGrid> out;
  for (int r = 1; r <= p; ++r)
    if (p % r == 0) out.push_back({r, p / r});
  return out;
}

ProcessorGrid make_grid(Index m, Index n, int p) {
  if (p < 1) throw InvalidArgument("make_grid: p must be >= 1");
  if (m < 1 || n < 1) throw InvalidArgument("make_grid: m, n must be >= 1");
  if (m >= n * p) return {p, 1};
  if (n >= m * p) return {1, p};
  // Words per iteration are proportional to (p_r - 1) n + (p_c - 1) m.
  ProcessorGrid best;
  Index best_cost = std::numeric_limits<Index>::max();
  for (const auto& g : divisor_grids(p)) {
    const Index cost = (g.rows - 1) * n + (g.cols - 1) * m;
    if (cost < best_cost) {
      best_cost = cost;
      best = g;
    }
  }
  return best;
}

DataMatrix slice(const DataMatrix& a, Index r0, Index rows, Index c0,
                 Index cols) {
  if (r0 < 0 || c0 < 0 || rows < 1 || cols < 1 || r0 + rows > rows_of(a) ||
      c0 + cols > cols_of(a)) {
    throw InvalidArgument("slice: block out of range");
  }
  if (const auto* d = std::get_if<DenseMatrix>(&a)) {
    DenseMatrix out(rows, cols);
    for (Index c = 0; c < cols; ++c) {
      const double* src = d->data() + (c0 + c) * d->rows() + r0;
      std::copy(src, src + rows, out.data() + c * rows);
    }
    return out;
  }
  const auto& s = std::get<SparseMatrix>(a);
  const auto cp = s.col_ptr();
  const auto ri = s.row_idx();
  const auto vs = s.values();
  std::vector<Index> ptr{0};
  std::vector<Index> idx;
  std::vector<double> val;
  for (Index c = c0; c < c0 + cols; ++c) {
    const auto first = ri.begin() + cp[c];
    const auto last = ri.begin() + cp[c + 1];
    auto lo = std::lower_bound(first, last, r0);
    const auto hi = std::lower_bound(lo, last, r0 + rows);
    for (; lo != hi; ++lo) {
      idx.push_back(*lo - r0);
      val.push_back(vs[static_cast<std::size_t>(lo - ri.begin())]);
    }
    ptr.push_back(static_cast<Index>(idx.size()));
  }
  return SparseMatrix(rows, cols, std::move(ptr), std::move(idx), std::move(val));
}

DistributedBlocks distribute(const DataMatrix& a, ProcessorGrid grid,
                             Distribution mode, Index valid_m, Index valid_n) {
  const int p = grid.size();
  if (grid.rows < 1 || grid.cols < 1) {
    throw InvalidArgument("distribute: grid dimensions must be >= 1");
  }
  const Index m = rows_of(a), n = cols_of(a);
  if (m % p != 0 || n % p != 0) {
    throw InvalidArgument("distribute: " + std::to_string(m) + "x" +
                          std::to_string(n) + " is not divisible by p = " +
                          std::to_string(p) + " (pad first)");
  }
  if (valid_m < 0) valid_m = m;
  if (valid_n < 0) valid_n = n;
  if (valid_m > m || valid_n > n) {
    throw InvalidArgument("distribute: valid dims exceed the matrix");
  }
  DistributedBlocks out{grid, mode, m, n, valid_m, valid_n, {}};
  out.ranks.reserve(static_cast<std::size_t>(p));
  for (int r = 0; r < p; ++r) {
    RankBlocks b;
    b.rank = r;
    b.grid = grid;
    b.mode = mode;
    b.m = m;
    b.n = n;
    b.valid_m = valid_m;
    b.valid_n = valid_n;
    b.w_rows = m / p;
    b.h_cols = n / p;
    if (mode == Distribution::kTwoD) {
      const auto [i, j] = grid.coord(r);
      b.grid_row = i;
      b.grid_col = j;
      const Index mi = m / grid.rows, nj = n / grid.cols;
      b.a_row0 = i * mi;
      b.a_col0 = j * nj;
      b.a = slice(a, b.a_row0, mi, b.a_col0, nj);
      b.w_row0 = i * mi + j * (m / p);
      b.h_col0 = j * nj + i * (n / p);
    } else {
      b.grid_row = r;
      b.a_row0 = r * (m / p);
      b.a_col0 = r * (n / p);
      b.a = slice(a, b.a_row0, m / p, 0, n);
      b.a_cols = slice(a, 0, m, b.a_col0, n / p);
      b.w_row0 = b.a_row0;
      b.h_col0 = b.a_col0;
    }
    out.ranks.push_back(std::move(b));
  }
  return out;
}

DataMatrix assemble(const DistributedBlocks& blocks) {
  const bool sparse = !blocks.ranks.empty() && is_sparse(blocks.ranks[0].a);
  DenseMatrix dense(blocks.m, blocks.n);
  std::vector<SparseMatrix::Triplet> trips;
  for (const auto& b : blocks.ranks) {
    // Naive row blocks span every column.
    const Index c0 = blocks.mode == Distribution::kTwoD ? b.a_col0 : 0;
    if (const auto* d = std::get_if<DenseMatrix>(&b.a)) {
      for (Index c = 0; c < d->cols(); ++c)
        for (Index r = 0; r < d->rows(); ++r) dense(b.a_row0 + r, c0 + c) = (*d)(r, c);
    } else {
      const auto& s = std::get<SparseMatrix>(b.a);
      for (Index c = 0; c < s.cols(); ++c)
        for (Index q = s.col_ptr()[c]; q < s.col_ptr()[c + 1]; ++q)
          trips.push_back({b.a_row0 + s.row_idx()[q], c0 + c, s.values()[q]});
    }
  }
  if (sparse) return SparseMatrix::from_triplets(blocks.m, blocks.n, std::move(trips));
  return dense;
}

GridComms make_grid_comms(Communicator& world, const RankBlocks& blocks) {
  auto [row, col] = world.split(blocks.grid.rows, blocks.grid.cols,
                                blocks.grid_row, blocks.grid_col);
  return {std::move(row), std::move(col)};
}

namespace {

// Rows [row0, row0+rows) of a global W; rows past its end are zero.
DenseMatrix take_rows(const DenseMatrix& w, Index row0, Index rows) {
  DenseMatrix out(rows, w.cols());
  for (Index c = 0; c < w.cols(); ++c)
    for (Index r = 0; r < rows && row0 + r < w.rows(); ++r)
      out(r, c) = w(row0 + r, c);
  return out;
}

// Columns [col0, col0+cols) of a global H; columns past its end are zero.
DenseMatrix take_cols(const DenseMatrix& h, Index col0, Index cols) {
  DenseMatrix out(h.rows(), cols);
  for (Index c = 0; c < cols && col0 + c < h.cols(); ++c)
    for (Index r = 0; r < h.rows(); ++r) out(r, c) = h(r, col0 + c);
  return out;
}

// Source of initial factor blocks: the seeded generator or given factors.
struct InitSource {
  const RankBlocks& b;
  const NmfConfig& config;
  const Factors* initial;

  DenseMatrix w(Index row0, Index rows) const {
    if (initial != nullptr) {
      DenseMatrix out = take_rows(initial->W, row0, rows);
      for (Index r = 0; r < rows; ++r)
        if (row0 + r >= b.valid_m)
          for (Index c = 0; c < out.cols(); ++c) out(r, c) = 0.0;
      return out;
    }
    return init_block(config.seed, streams::kInitW, row0, rows, 0, config.k,
                      b.valid_m, config.k);
  }
  DenseMatrix h(Index col0, Index cols) const {
    if (initial != nullptr) {
      DenseMatrix out = take_cols(initial->H, col0, cols);
      for (Index c = 0; c < cols; ++c)
        if (col0 + c >= b.valid_n)
          for (Index r = 0; r < out.rows(); ++r) out(r, c) = 0.0;
      return out;
    }
    return init_block(config.seed, streams::kInitH, 0, config.k, col0, cols,
                      config.k, b.valid_n);
  }
};

void check_initial(const Factors* initial, const RankBlocks& b, Index k) {
  if (initial == nullptr) return;
  const bool ok = initial->W.cols() == k && initial->H.rows() == k &&
                  initial->W.rows() >= b.valid_m && initial->W.rows() <= b.m &&
                  initial->H.cols() >= b.valid_n && initial->H.cols() <= b.n;
  if (!ok) throw InvalidArgument("initial factors have the wrong shape");
}

GramMatrix reduce_gram(Communicator& comm, const GramMatrix& local) {
  auto sum = comm.all_reduce(local.dense().values());
  return GramMatrix::from_dense(DenseMatrix(local.k(), local.k(), std::move(sum)));
}

DenseMatrix as_matrix(Index rows, Index cols, std::vector<double> v) {
  return DenseMatrix(rows, cols, std::move(v));
}

// Error from globally reduced pieces; zero A reports zero.
double error_from(double norm_a, const GramMatrix& ww, const GramMatrix& hh,
                  double t) {
  return norm_a > 0.0 ? relative_error(norm_a, ww, hh, t) : 0.0;
}

[[noreturn]] void rethrow_kernel(const NoConvergence& e, int rank, Index it) {
  throw NoConvergence("rank " + std::to_string(rank) + ", iteration " +
                          std::to_string(it) + ": " + e.what(),
                      e.column(), e.best());
}

Index clamp_valid(Index valid, Index row0, Index rows) {
  return std::clamp<Index>(valid - row0, 0, rows);
}

}  // namespace

RankResult mpifaun_run(const RankBlocks& b, const NmfConfig& config,
                       Communicator& world, GridComms& comms,
                       const Factors* initial) {
  if (b.mode != Distribution::kTwoD) {
    throw InvalidArgument("mpifaun_run: blocks must use the 2D distribution");
  }
  if (world.size() != b.grid.size() || comms.row.size() != b.grid.cols ||
      comms.col.size() != b.grid.rows) {
    throw InvalidArgument("mpifaun_run: communicators do not match the grid");
  }
  check_config(config, b.valid_m, b.valid_n);
  const Index k = config.k;
  check_initial(initial, b, k);
  const Index mi = b.m / b.grid.rows, nj = b.n / b.grid.cols;
  const Index w_valid = clamp_valid(b.valid_m, b.w_row0, b.w_rows);

  const InitSource src{b, config, initial};
  DenseMatrix w = src.w(b.w_row0, b.w_rows);  // (W_i)_j
  DenseMatrix h = src.h(b.h_col0, b.h_cols);  // (H_j)_i

  RankResult res;
  const CommCounters start = world.counters();

  // Setup: Gram of the initial H, and the initial error. The error uses the
  // full W_i and H_j, which every rank can regenerate from the source.
  GramMatrix hh = reduce_gram(world, gram_of_columns(h));
  double norm_a = 0.0;
  {
    const DenseMatrix wi = src.w(b.a_row0, mi);
    const DenseMatrix hj = src.h(b.a_col0, nj);
    const GramMatrix wl = gram(w);
    std::vector<double> diag{frobenius_sq(b.a),
                             inner_product(mm_wt_a(wi, b.a), hj)};
    diag.insert(diag.end(), wl.dense().values().begin(), wl.dense().values().end());
    const auto sum = world.all_reduce(diag, Accounting::kDiagnostic);
    norm_a = sum[0];
    const GramMatrix ww = GramMatrix::from_dense(
        DenseMatrix(k, k, std::vector<double>(sum.begin() + 2, sum.end())));
    res.trace.initial_error = error_from(norm_a, ww, hh, sum[1]);
  }
  res.trace.setup_comm = world.counters() - start;

  double previous = res.trace.initial_error;
  for (Index it = 1; it <= config.max_iters; ++it) {
    const CommCounters before = world.counters();
    IterationRecord rec;
    rec.iteration = it;
    Stopwatch sw;
    try {
      // W given H: gather H_j over the column, V_ij = A_ij H_j^T, then sum
      // and scatter the rows of V over the grid row.
      const DenseMatrix hj = as_matrix(k, nj, comms.col.all_gather(h.values()));
      rec.times.all_gather += sw.lap();
      const DenseMatrix vt = transpose(mm_a_h(b.a, hj));
      rec.times.mm += sw.lap();
      const DenseMatrix aht =
          as_matrix(k, b.w_rows, comms.row.reduce_scatter(vt.values()));
      rec.times.reduce_scatter += sw.lap();
      BlockUpdate wu = update_block(config.algo, Side::kW, hh, transpose(aht), w);
      w = std::move(wu.block);
      rec.times.luc += sw.lap();
      if (config.algo == Algo::kHals) {
        const auto sums = world.all_reduce(wu.col_sum_sq);
        rec.times.all_reduce += sw.lap();
        scale_rows(h, finish_hals_w(w, sums, w_valid));
        rec.times.luc += sw.lap();
      }
      const GramMatrix wl = gram(w);
      rec.times.gram += sw.lap();
      const GramMatrix ww = reduce_gram(world, wl);
      rec.times.all_reduce += sw.lap();

      // H given W: gather W_i^T over the row, Y_ij = W_i^T A_ij, then sum
      // and scatter the columns of Y over the grid column.
      const DenseMatrix wit =
          as_matrix(k, mi, comms.row.all_gather(transpose(w).values()));
      rec.times.all_gather += sw.lap();
      const DenseMatrix y = mm_wt_a_from_t(wit, b.a);
      rec.times.mm += sw.lap();
      const DenseMatrix wta =
          as_matrix(k, b.h_cols, comms.col.reduce_scatter(y.values()));
      rec.times.reduce_scatter += sw.lap();
      BlockUpdate hu =
          update_block(config.algo, Side::kH, ww, transpose(wta), transpose(h));
      h = transpose(hu.block);
      rec.times.luc += sw.lap();
      const GramMatrix hl = gram_of_columns(h);
      rec.times.gram += sw.lap();
      hh = reduce_gram(world, hl);
      rec.times.all_reduce += sw.lap();

      const double t = world.all_reduce(std::vector<double>{inner_product(wta, h)},
                                        Accounting::kDiagnostic)[0];
      rec.rel_error = error_from(norm_a, ww, hh, t);

      rec.flops.mm = 2.0 * mm_flops(b.a, k);
      rec.flops.gram = 2.0 * static_cast<double>((b.w_rows + b.h_cols) * k * k);
      rec.flops.luc = wu.flops + hu.flops;
    } catch (const NoConvergence& e) {
      rethrow_kernel(e, world.rank(), it);
    }
    rec.comm = world.counters() - before;
    res.trace.iterations.push_back(rec);
    if (should_stop(config, previous, rec.rel_error)) break;
    previous = rec.rel_error;
  }
  res.factors = {std::move(w), std::move(h), b.w_row0, b.h_col0};
  return res;
}

RankResult naive_run(const RankBlocks& b, const NmfConfig& config,
                     Communicator& comm, const Factors* initial) {
  if (b.mode != Distribution::kNaive) {
    throw InvalidArgument("naive_run: blocks must use the naive distribution");
  }
  const int p = comm.size();
  if (p != b.grid.size()) {
    throw InvalidArgument("naive_run: communicator does not match the layout");
  }
  check_config(config, b.valid_m, b.valid_n);
  const Index k = config.k;
  check_initial(initial, b, k);
  const InitSource src{b, config, initial};
  DenseMatrix w = src.w(b.w_row0, b.w_rows);  // W_r
  DenseMatrix h = src.h(b.h_col0, b.h_cols);  // H^r

  RankResult res;
  const CommCounters start = comm.counters();
  double norm_a = 0.0;
  {
    const DenseMatrix hfull = src.h(0, b.n);
    const GramMatrix wl = gram(w);
    std::vector<double> diag{frobenius_sq(b.a),
                             inner_product(mm_wt_a(w, b.a), hfull)};
    diag.insert(diag.end(), wl.dense().values().begin(), wl.dense().values().end());
    const auto sum = comm.all_reduce(diag, Accounting::kDiagnostic);
    norm_a = sum[0];
    const GramMatrix ww = GramMatrix::from_dense(
        DenseMatrix(k, k, std::vector<double>(sum.begin() + 2, sum.end())));
    res.trace.initial_error = error_from(norm_a, ww, gram_of_columns(hfull), sum[1]);
  }
  res.trace.setup_comm = comm.counters() - start;

  double previous = res.trace.initial_error;
  for (Index it = 1; it <= config.max_iters; ++it) {
    const CommCounters before = comm.counters();
    IterationRecord rec;
    rec.iteration = it;
    Stopwatch sw;
    try {
      const DenseMatrix hfull = as_matrix(k, b.n, comm.all_gather(h.values()));
      rec.times.all_gather += sw.lap();
      const GramMatrix hh = gram_of_columns(hfull);
      rec.times.gram += sw.lap();
      const DenseMatrix aht = mm_a_h(b.a, hfull);
      rec.times.mm += sw.lap();
      BlockUpdate wu = update_block(config.algo, Side::kW, hh, aht, w);
      rec.times.luc += sw.lap();

      DenseMatrix wt_full =
          as_matrix(k, b.m, comm.all_gather(transpose(wu.block).values()));
      rec.times.all_gather += sw.lap();
      if (config.algo == Algo::kHals) {
        // Column norms come from the gathered W; no extra collective.
        DenseMatrix wfull = transpose(wt_full);
        scale_rows(h, finish_hals_w(wfull, row_sum_sq(wt_full), b.valid_m));
        wt_full = transpose(wfull);
        w = take_rows(wfull, b.w_row0, b.w_rows);
        rec.times.luc += sw.lap();
      } else {
        w = std::move(wu.block);
      }
      const GramMatrix ww = gram_of_columns(wt_full);
      rec.times.gram += sw.lap();
      const DenseMatrix wta = mm_wt_a_from_t(wt_full, b.a_cols);
      rec.times.mm += sw.lap();
      BlockUpdate hu =
          update_block(config.algo, Side::kH, ww, transpose(wta), transpose(h));
      h = transpose(hu.block);
      rec.times.luc += sw.lap();

      // Error bookkeeping only: the next iteration regathers H.
      const GramMatrix hl = gram_of_columns(h);
      std::vector<double> diag{inner_product(wta, h)};
      diag.insert(diag.end(), hl.dense().values().begin(), hl.dense().values().end());
      const auto sum = comm.all_reduce(diag, Accounting::kDiagnostic);
      const GramMatrix hh_new = GramMatrix::from_dense(
          DenseMatrix(k, k, std::vector<double>(sum.begin() + 1, sum.end())));
      rec.rel_error = error_from(norm_a, ww, hh_new, sum[0]);

      rec.flops.mm = mm_flops(b.a, k) + mm_flops(b.a_cols, k);
      rec.flops.gram = 2.0 * static_cast<double>((b.m + b.n) * k * k);
      rec.flops.luc = wu.flops + hu.flops;
    } catch (const NoConvergence& e) {
      rethrow_kernel(e, comm.rank(), it);
    }
    rec.comm = comm.counters() - before;
    res.trace.iterations.push_back(rec);
    if (should_stop(config, previous, rec.rel_error)) break;
    previous = rec.rel_error;
  }
  res.factors = {std::move(w), std::move(h), b.w_row0, b.h_col0};
  return res;
}

Factors gather_factors(const std::vector<RankFactors>& parts, Index valid_m,
                       Index valid_n) {
  if (parts.empty()) throw InvalidArgument("gather_factors: no blocks");
  const Index k = parts.front().w.cols();
  Factors out{DenseMatrix(valid_m, k), DenseMatrix(k, valid_n)};
  for (const auto& part : parts) {
    for (Index c = 0; c < k; ++c)
      for (Index r = 0; r < part.w.rows() && part.w_row0 + r < valid_m; ++r)
        out.W(part.w_row0 + r, c) = part.w(r, c);
    for (Index c = 0; c < part.h.cols() && part.h_col0 + c < valid_n; ++c)
      for (Index r = 0; r < k; ++r) out.H(r, part.h_col0 + c) = part.h(r, c);
  }
  return out;
}

DistributedResult run_distributed(const DataMatrix& a, const NmfConfig& config,
                                  int p, Distribution mode,
                                  std::optional<ProcessorGrid> grid,
                                  const Factors* initial) {
  if (p < 1) throw InvalidArgument("number of ranks must be >= 1");
  const Index m = rows_of(a), n = cols_of(a);
  check_config(config, m, n);
  ProcessorGrid g;
  if (mode == Distribution::kNaive) {
    g = {p, 1};
  } else {
    g = grid ? *grid : make_grid(m, n, p);
    if (g.size() != p) {
      throw InvalidArgument("grid " + g.to_string() + " does not have " +
                            std::to_string(p) + " ranks");
    }
  }
  const Padded padded = pad_to_grid(a, p);
  const DistributedBlocks blocks = distribute(padded.matrix, g, mode, m, n);

  std::vector<RankResult> results(static_cast<std::size_t>(p));
  run_spmd(p, [&](Communicator& world) {
    const RankBlocks& rb = blocks.ranks[world.rank()];
    if (mode == Distribution::kTwoD) {
      GridComms comms = make_grid_comms(world, rb);
      results[world.rank()] = mpifaun_run(rb, config, world, comms, initial);
    } else {
      results[world.rank()] = naive_run(rb, config, world, initial);
    }
  });

  DistributedResult out;
  out.grid = g;
  out.padded_m = blocks.m;
  out.padded_n = blocks.n;
  std::vector<RankFactors> parts;
  parts.reserve(results.size());
  for (auto& r : results) {
    parts.push_back(std::move(r.factors));
    out.rank_traces.push_back(std::move(r.trace));
  }
  out.factors = gather_factors(parts, m, n);
  out.trace = out.rank_traces.front();
  for (std::size_t i = 0; i < out.trace.iterations.size(); ++i) {
    PhaseTimes& t = out.trace.iterations[i].times;
    for (const auto& rt : out.rank_traces) {
      const PhaseTimes& o = rt.iterations[i].times;
      t.mm = std::max(t.mm, o.mm);
      t.luc = std::max(t.luc, o.luc);
      t.gram = std::max(t.gram, o.gram);
      t.all_gather = std::max(t.all_gather, o.all_gather);
      t.reduce_scatter = std::max(t.reduce_scatter, o.reduce_scatter);
      t.all_reduce = std::max(t.all_reduce, o.all_reduce);
    }
  }
  return out;
}

}  // namespace faun
