#include "faun/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "faun/errors.hpp"
#include "faun/random.hpp"
#include "timer.hpp"

namespace faun {

std::string to_string(Algo algo) {
  switch (algo) {
    case Algo::kMu:
      return "mu";
    case Algo::kHals:
      return "hals";
    case Algo::kBpp:
      return "bpp";
  }
  return "?";
}

Algo parse_algo(const std::string& name) {
  if (name == "mu") return Algo::kMu;
  if (name == "hals") return Algo::kHals;
  if (name == "bpp" || name == "abpp") return Algo::kBpp;
  throw InvalidArgument("unknown algorithm '" + name + "' (mu, hals, bpp)");
}

PhaseTimes& PhaseTimes::operator+=(const PhaseTimes& o) {
  mm += o.mm;
  luc += o.luc;
  gram += o.gram;
  all_gather += o.all_gather;
  reduce_scatter += o.reduce_scatter;
  all_reduce += o.all_reduce;
  return *this;
}

PhaseTimes IterationTrace::total_times() const {
  PhaseTimes t;
  for (const auto& it : iterations) t += it.times;
  return t;
}

double IterationTrace::final_error() const {
  return iterations.empty() ? initial_error : iterations.back().rel_error;
}

DenseMatrix init_block(std::uint64_t seed, std::uint64_t stream, Index row0,
                       Index rows, Index col0, Index cols, Index valid_rows,
                       Index valid_cols) {
  const CounterRng rng(seed);
  DenseMatrix out(rows, cols);
  for (Index c = 0; c < cols; ++c) {
    const Index gc = col0 + c;
    if (gc >= valid_cols) break;
    for (Index r = 0; r < rows; ++r) {
      const Index gr = row0 + r;
      if (gr >= valid_rows) break;
      out(r, c) = rng.uniform(stream, static_cast<std::uint64_t>(gr),
                              static_cast<std::uint64_t>(gc));
    }
  }
  return out;
}

Factors init_factors(Index m, Index n, Index k, std::uint64_t seed) {
  if (m < 1 || n < 1 || k < 1) {
    throw InvalidArgument("init_factors: dimensions must be >= 1");
  }
  return {init_block(seed, streams::kInitW, 0, m, 0, k, m, k),
          init_block(seed, streams::kInitH, 0, k, 0, n, k, n)};
}

double inner_product(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument("inner_product: shapes differ");
  }
  double s = 0.0;
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
  return s;
}

double relative_error(double normA_sq, const GramMatrix& gramW,
                      const GramMatrix& gramH, double WtAHt_trace) {
  if (!(normA_sq > 0.0)) {
    throw InvalidArgument("relative_error: ||A||^2 must be positive");
  }
  if (gramW.k() != gramH.k()) {
    throw InvalidArgument("relative_error: Gram sizes differ");
  }
  const double s = inner_product(gramW.dense(), gramH.dense());
  const double resid = std::max(0.0, normA_sq - 2.0 * WtAHt_trace + s);
  return std::sqrt(resid) / std::sqrt(normA_sq);
}

BlockUpdate update_block(Algo algo, Side side, const GramMatrix& gram,
                         const DenseMatrix& rhs, const DenseMatrix& current) {
  const auto r = static_cast<double>(current.rows());
  const auto k = static_cast<double>(current.cols());
  BlockUpdate out;
  switch (algo) {
    case Algo::kMu:
      out.block = update_mu(gram, rhs, current);
      out.flops = 2.0 * r * k * k + 3.0 * r * k;
      break;
    case Algo::kHals: {
      // The W step is the exact coordinate minimizer; the H step is taken
      // literally since W's columns were just normalized.
      HalsResult h = update_hals(gram, rhs, current,
                                 side == Side::kW ? HalsStep::kDiagonal
                                                  : HalsStep::kUnit);
      out.block = std::move(h.block);
      out.col_sum_sq = std::move(h.col_sum_sq);
      out.flops = 2.0 * r * k * k + 4.0 * r * k;
      break;
    }
    case Algo::kBpp:
      out.block = update_bpp(gram, rhs, current, &out.flops);
      break;
  }
  return out;
}

std::vector<double> finish_hals_w(DenseMatrix& w,
                                  std::span<const double> global_col_sum_sq,
                                  Index valid_rows) {
  std::vector<bool> reset(global_col_sum_sq.size());
  for (std::size_t c = 0; c < reset.size(); ++c)
    reset[c] = global_col_sum_sq[c] == 0.0;
  reset_degenerate_columns(w, reset, valid_rows);
  // Reset columns keep their zero sum and are therefore left unnormalized.
  NormalizeResult nr = normalize_columns(w, global_col_sum_sq);
  w = std::move(nr.block);
  std::vector<double> scale(reset.size(), 1.0);
  for (std::size_t c = 0; c < scale.size(); ++c) {
    if (reset[c]) {
      scale[c] = 0.0;
    } else if (!nr.flagged[c]) {
      scale[c] = std::sqrt(global_col_sum_sq[c]);
    }
  }
  return scale;
}

void scale_rows(DenseMatrix& h, std::span<const double> scale) {
  if (static_cast<Index>(scale.size()) != h.rows()) {
    throw InvalidArgument("scale_rows: need one factor per row");
  }
  for (Index c = 0; c < h.cols(); ++c)
    for (Index r = 0; r < h.rows(); ++r) h(r, c) *= scale[r];
}

std::vector<double> row_sum_sq(const DenseMatrix& t) {
  std::vector<double> s(static_cast<std::size_t>(t.rows()), 0.0);
  for (Index c = 0; c < t.cols(); ++c)
    for (Index r = 0; r < t.rows(); ++r) s[r] += t(r, c) * t(r, c);
  return s;
}

void check_config(const NmfConfig& config, Index m, Index n) {
  if (config.k < 1) throw InvalidArgument("k must be >= 1");
  if (config.max_iters < 1) throw InvalidArgument("max_iters must be >= 1");
  if (config.k > std::min(m, n)) {
    throw InvalidArgument("k = " + std::to_string(config.k) +
                          " exceeds min(m, n) = " +
                          std::to_string(std::min(m, n)));
  }
  if (config.tolerance && !(*config.tolerance >= 0.0)) {
    throw InvalidArgument("tolerance must be >= 0");
  }
}

bool should_stop(const NmfConfig& config, double previous_error,
                 double current_error) {
  return config.tolerance && previous_error - current_error < *config.tolerance;
}

namespace {

void require_nonnegative(const DataMatrix& a) {
  const auto bad = [](std::span<const double> v) {
    return std::any_of(v.begin(), v.end(),
                       [](double x) { return !(x >= 0.0); });
  };
  const bool neg = std::visit([&](const auto& m) { return bad(m.values()); }, a);
  if (neg) throw InvalidArgument("input matrix has negative or NaN entries");
}

}  // namespace

NmfResult aunmf_run(const DataMatrix& a, const NmfConfig& config,
                    const Factors* initial) {
  const Index m = rows_of(a), n = cols_of(a), k = config.k;
  check_config(config, m, n);
  require_nonnegative(a);

  Factors f = initial != nullptr ? *initial : init_factors(m, n, k, config.seed);
  if (f.W.rows() != m || f.W.cols() != k || f.H.rows() != k || f.H.cols() != n) {
    throw InvalidArgument("aunmf_run: initial factors have the wrong shape");
  }
  DenseMatrix& w = f.W;
  DenseMatrix& h = f.H;

  const double norm_a = frobenius_sq(a);
  const auto error_of = [&](const GramMatrix& ww, const GramMatrix& hh,
                            const DenseMatrix& wta) {
    return norm_a > 0.0 ? relative_error(norm_a, ww, hh, inner_product(wta, h))
                        : 0.0;
  };

  NmfResult res;
  GramMatrix hh = gram_of_columns(h);
  res.trace.initial_error = error_of(gram(w), hh, mm_wt_a(w, a));

  double previous = res.trace.initial_error;
  for (Index it = 1; it <= config.max_iters; ++it) {
    IterationRecord rec;
    rec.iteration = it;
    Stopwatch sw;
    try {
      // W given H.
      DenseMatrix aht = mm_a_h(a, h);
      rec.times.mm += sw.lap();
      BlockUpdate wu = update_block(config.algo, Side::kW, hh, aht, w);
      w = std::move(wu.block);
      if (config.algo == Algo::kHals) {
        scale_rows(h, finish_hals_w(w, wu.col_sum_sq, m));
      }
      rec.times.luc += sw.lap();
      const GramMatrix ww = gram(w);
      rec.times.gram += sw.lap();

      // H given W.
      const DenseMatrix wta = mm_wt_a(w, a);
      rec.times.mm += sw.lap();
      BlockUpdate hu =
          update_block(config.algo, Side::kH, ww, transpose(wta), transpose(h));
      h = transpose(hu.block);
      rec.times.luc += sw.lap();
      hh = gram_of_columns(h);
      rec.times.gram += sw.lap();

      rec.rel_error = error_of(ww, hh, wta);
      rec.flops.mm = 2.0 * mm_flops(a, k);
      rec.flops.gram = 2.0 * static_cast<double>((m + n) * k * k);
      rec.flops.luc = wu.flops + hu.flops;
    } catch (const NoConvergence& e) {
      throw NoConvergence("iteration " + std::to_string(it) + ": " + e.what(),
                          e.column(), e.best());
    }
    res.trace.iterations.push_back(rec);
    if (should_stop(config, previous, rec.rel_error)) break;
    previous = rec.rel_error;
  }
  res.factors = std::move(f);
  return res;
}

}  // namespace faun
