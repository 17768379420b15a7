#include "faun/nls.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <map>

#include "faun/errors.hpp"

namespace faun {
namespace {

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b,
                        const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.empty()) {
    throw InvalidArgument(std::string(what) + ": rhs and current must have the "
                          "same non-empty shape");
  }
}

void require_gram_matches(const GramMatrix& g, Index k, const char* what) {
  if (g.k() != k) {
    throw InvalidArgument(std::string(what) + ": gram is " +
                          std::to_string(g.k()) + "x" + std::to_string(g.k()) +
                          " but the block has " + std::to_string(k) +
                          " columns");
  }
}

// den = current * gram, accumulated in ascending inner index.
DenseMatrix times_gram(const DenseMatrix& x, const GramMatrix& g) {
  const Index r = x.rows(), k = x.cols();
  DenseMatrix out(r, k);
  for (Index j = 0; j < k; ++j) {
    double* o = out.data() + j * r;
    for (Index l = 0; l < k; ++l) {
      const double s = g(l, j);
      const double* xc = x.data() + l * r;
      for (Index i = 0; i < r; ++i) o[i] += xc[i] * s;
    }
  }
  return out;
}

// In-place Cholesky of an n x n column-major matrix (lower factor).
// Returns false when a pivot falls below `floor`.
bool cholesky(std::vector<double>& a, Index n, double floor) {
  for (Index j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (Index p = 0; p < j; ++p) d -= a[p * n + j] * a[p * n + j];
    if (!(d > floor)) return false;
    const double ljj = std::sqrt(d);
    a[j * n + j] = ljj;
    for (Index i = j + 1; i < n; ++i) {
      double s = a[j * n + i];
      for (Index p = 0; p < j; ++p) s -= a[p * n + i] * a[p * n + j];
      a[j * n + i] = s / ljj;
    }
  }
  return true;
}

// Solves L L^T x = b in place given the lower factor from cholesky().
void cholesky_solve(const std::vector<double>& l, Index n, double* b) {
  for (Index i = 0; i < n; ++i) {
    double s = b[i];
    for (Index p = 0; p < i; ++p) s -= l[p * n + i] * b[p];
    b[i] = s / l[i * n + i];
  }
  for (Index i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (Index p = i + 1; p < n; ++p) s -= l[i * n + p] * b[p];
    b[i] = s / l[i * n + i];
  }
}

constexpr int kFullExchangeBackoff = 3;

struct ColumnState {
  std::vector<char> passive;
  Index best_violations;
  int backoff = kFullExchangeBackoff;
  Index iterations = 0;
  std::vector<double> best_x;
};

}  // namespace

DenseMatrix update_mu(const GramMatrix& gram, const DenseMatrix& rhs,
                      const DenseMatrix& current) {
  require_same_shape(rhs, current, "update_mu");
  require_gram_matches(gram, current.cols(), "update_mu");
  for (double v : current.values()) {
    if (v < 0.0 || std::isnan(v)) {
      throw InvalidArgument("update_mu: current factor has a negative entry");
    }
  }
  const DenseMatrix den = times_gram(current, gram);
  DenseMatrix out(current.rows(), current.cols());
  const auto c = current.values();
  const auto b = rhs.values();
  const auto d = den.values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i)
    o[i] = c[i] * b[i] / std::max(d[i], kMuFloor);
  return out;
}

HalsResult update_hals(const GramMatrix& gram, const DenseMatrix& rhs,
                       const DenseMatrix& current, HalsStep step) {
  require_same_shape(rhs, current, "update_hals");
  require_gram_matches(gram, current.cols(), "update_hals");
  const Index r = current.rows(), k = current.cols();
  HalsResult res{current, std::vector<double>(static_cast<std::size_t>(k), 0.0),
                 {}};
  DenseMatrix& x = res.block;
  std::vector<double> col(static_cast<std::size_t>(r));
  for (Index i = 0; i < k; ++i) {
    const double diag = gram(i, i);
    if (diag == 0.0) res.degenerate.push_back(i);
    if (step == HalsStep::kDiagonal && !(diag > 0.0)) {
      // Nothing to scale by; keep the column as it is.
    } else {
      // col = rhs_i - x * gram_i, ascending l.
      const double* b = rhs.data() + i * r;
      std::copy(b, b + r, col.begin());
      for (Index l = 0; l < k; ++l) {
        const double s = gram(l, i);
        const double* xc = x.data() + l * r;
        for (Index q = 0; q < r; ++q) col[q] -= xc[q] * s;
      }
      double* xi = x.data() + i * r;
      if (step == HalsStep::kDiagonal) {
        for (Index q = 0; q < r; ++q) xi[q] = std::max(xi[q] + col[q] / diag, 0.0);
      } else {
        for (Index q = 0; q < r; ++q) xi[q] = std::max(xi[q] + col[q], 0.0);
      }
    }
    double ss = 0.0;
    for (double v : x.col(i)) ss += v * v;
    res.col_sum_sq[i] = ss;
  }
  return res;
}

NormalizeResult normalize_columns(const DenseMatrix& block,
                                  std::span<const double> global_col_sum_sq) {
  if (static_cast<Index>(global_col_sum_sq.size()) != block.cols()) {
    throw InvalidArgument("normalize_columns: need one sum per column");
  }
  NormalizeResult res{block,
                      std::vector<bool>(static_cast<std::size_t>(block.cols()))};
  for (Index c = 0; c < block.cols(); ++c) {
    const double s = global_col_sum_sq[c];
    if (s < 0.0) throw InvalidArgument("normalize_columns: negative sum");
    if (s < kNormalizeFloor) {
      res.flagged[c] = true;
      continue;
    }
    const double norm = std::sqrt(s);
    for (double& v : res.block.col(c)) v /= norm;
  }
  return res;
}

void reset_degenerate_columns(DenseMatrix& block, const std::vector<bool>& reset,
                              Index valid_rows) {
  const Index rows = std::min(valid_rows, block.rows());
  for (Index c = 0; c < block.cols(); ++c) {
    if (!reset[c]) continue;
    for (Index r = 0; r < rows; ++r) block(r, c) = DBL_EPSILON;
  }
}

BppResult solve_bpp(const NlsProblem& problem, const DenseMatrix* warm_start) {
  const GramMatrix& g = problem.gram;
  const DenseMatrix& b = problem.rhs;
  const Index k = g.k();
  if (k < 1 || b.empty() || b.rows() != k) {
    throw InvalidArgument("solve_bpp: rhs must be k x c with k = gram size");
  }
  if (warm_start != nullptr &&
      (warm_start->rows() != k || warm_start->cols() != b.cols())) {
    throw InvalidArgument("solve_bpp: warm start must match rhs shape");
  }
  const double trace = g.trace();
  {
    std::vector<double> full(g.dense().values().begin(),
                             g.dense().values().end());
    if (!(trace > 0.0) || !cholesky(full, k, 1e-10 * trace)) {
      throw InvalidArgument("solve_bpp: gram is not positive definite");
    }
  }
  const double singular_floor = 1e-13 * trace;
  const Index c = b.cols();
  const Index cap = 5 * k;

  BppResult res;
  res.solution = DenseMatrix(k, c);
  res.flops = static_cast<double>(k * k * k) / 3.0;
  DenseMatrix& x = res.solution;
  DenseMatrix y(k, c);

  std::vector<ColumnState> state(static_cast<std::size_t>(c));
  std::vector<Index> open;
  open.reserve(static_cast<std::size_t>(c));
  for (Index j = 0; j < c; ++j) {
    auto& s = state[j];
    s.passive.assign(static_cast<std::size_t>(k), 0);
    if (warm_start != nullptr) {
      for (Index i = 0; i < k; ++i) s.passive[i] = (*warm_start)(i, j) > 0.0;
    }
    s.best_violations = k + 1;
    open.push_back(j);
  }

  std::vector<double> factor;
  std::vector<double> rhs_sub;
  std::vector<Index> idx;
  while (!open.empty()) {
    // Group open columns by passive set; each group shares one factorization.
    std::map<std::vector<char>, std::vector<Index>> groups;
    for (Index j : open) groups[state[j].passive].push_back(j);

    for (const auto& [mask, cols] : groups) {
      idx.clear();
      for (Index i = 0; i < k; ++i)
        if (mask[i]) idx.push_back(i);
      const auto np = static_cast<Index>(idx.size());
      bool singular = false;
      if (np > 0) {
        factor.assign(static_cast<std::size_t>(np * np), 0.0);
        for (Index q = 0; q < np; ++q)
          for (Index p = 0; p < np; ++p) factor[q * np + p] = g(idx[p], idx[q]);
        singular = !cholesky(factor, np, singular_floor);
        res.flops += static_cast<double>(np * np * np) / 3.0;
      }
      for (Index j : cols) {
        double* xj = x.data() + j * k;
        double* yj = y.data() + j * k;
        const double* bj = b.data() + j * k;
        std::fill(xj, xj + k, 0.0);
        if (singular) {
          std::fill(yj, yj + k, 0.0);
          state[j].passive.assign(static_cast<std::size_t>(k), 0);
          state[j].best_violations = -1;  // marks degenerate
          continue;
        }
        if (np > 0) {
          rhs_sub.resize(static_cast<std::size_t>(np));
          for (Index p = 0; p < np; ++p) rhs_sub[p] = bj[idx[p]];
          cholesky_solve(factor, np, rhs_sub.data());
          for (Index p = 0; p < np; ++p) xj[idx[p]] = rhs_sub[p];
        }
        // y = gram * x - b on the active set, zero on the passive set.
        for (Index i = 0; i < k; ++i) {
          if (mask[i]) {
            yj[i] = 0.0;
            continue;
          }
          double s = -bj[i];
          for (Index p = 0; p < np; ++p) s += g(i, idx[p]) * xj[idx[p]];
          yj[i] = s;
        }
        res.flops += static_cast<double>(2 * np * np + 2 * (k - np) * np);
      }
    }

    std::vector<Index> still_open;
    for (Index j : open) {
      auto& s = state[j];
      if (s.best_violations < 0) {
        res.degenerate.push_back(j);
        continue;
      }
      const double* xj = x.data() + j * k;
      const double* yj = y.data() + j * k;
      double bmax = 0.0;
      for (Index i = 0; i < k; ++i) bmax = std::max(bmax, std::abs(b(i, j)));
      const double ytol = 1e-12 * (1.0 + bmax);
      Index violations = 0;
      Index lowest = -1;
      for (Index i = 0; i < k; ++i) {
        const bool bad = s.passive[i] ? xj[i] < 0.0 : yj[i] < -ytol;
        if (bad) {
          ++violations;
          if (lowest < 0) lowest = i;
        }
      }
      ++s.iterations;
      res.max_iterations = std::max(res.max_iterations, s.iterations);
      if (violations == 0) continue;

      if (violations < s.best_violations) {
        s.best_violations = violations;
        s.backoff = kFullExchangeBackoff;
        s.best_x.assign(xj, xj + k);
      } else if (s.backoff > 0) {
        --s.backoff;
      } else {
        s.passive[lowest] = !s.passive[lowest];
        violations = -1;  // single exchange done
      }
      if (violations > 0) {
        for (Index i = 0; i < k; ++i) {
          const bool bad = s.passive[i] ? xj[i] < 0.0 : yj[i] < -ytol;
          if (bad) s.passive[i] = !s.passive[i];
        }
      }
      if (s.iterations >= cap) {
        DenseMatrix best = x;
        for (Index i = 0; i < k; ++i) best(i, j) = s.best_x[i];
        throw NoConvergence("solve_bpp: column " + std::to_string(j) +
                                " did not converge in " + std::to_string(cap) +
                                " pivoting iterations",
                            j, std::move(best));
      }
      still_open.push_back(j);
    }
    open.swap(still_open);
  }
  std::sort(res.degenerate.begin(), res.degenerate.end());
  return res;
}

double kkt_residual(const NlsProblem& problem, const DenseMatrix& x) {
  const GramMatrix& g = problem.gram;
  const DenseMatrix& b = problem.rhs;
  const Index k = g.k();
  if (x.rows() != k || b.rows() != k || x.cols() != b.cols()) {
    throw InvalidArgument("kkt_residual: dimensions disagree");
  }
  double worst = 0.0;
  for (Index j = 0; j < x.cols(); ++j) {
    for (Index i = 0; i < k; ++i) {
      double y = -b(i, j);
      for (Index l = 0; l < k; ++l) y += g(i, l) * x(l, j);
      const double xi = x(i, j);
      worst = std::max({worst, -std::min(xi, 0.0), -std::min(y, 0.0),
                        std::abs(xi * y)});
    }
  }
  return worst;
}

DenseMatrix update_bpp(const GramMatrix& gram, const DenseMatrix& rhs,
                       const DenseMatrix& current, double* flops) {
  require_same_shape(rhs, current, "update_bpp");
  require_gram_matches(gram, current.cols(), "update_bpp");
  const Index r = rhs.rows(), k = rhs.cols();
  const double trace = gram.trace();
  std::vector<Index> keep;
  for (Index i = 0; i < k; ++i)
    if (gram(i, i) > 1e-13 * trace) keep.push_back(i);
  DenseMatrix out(r, k);
  if (keep.empty()) {
    if (flops != nullptr) *flops = 0.0;
    return out;
  }
  const auto kk = static_cast<Index>(keep.size());
  DenseMatrix g(kk, kk);
  for (Index q = 0; q < kk; ++q)
    for (Index p = 0; p < kk; ++p) g(p, q) = gram(keep[p], keep[q]);
  DenseMatrix b(kk, r);
  DenseMatrix warm(kk, r);
  for (Index p = 0; p < kk; ++p) {
    for (Index i = 0; i < r; ++i) {
      b(p, i) = rhs(i, keep[p]);
      warm(p, i) = current(i, keep[p]);
    }
  }
  const BppResult sol =
      solve_bpp(NlsProblem{GramMatrix::from_dense(std::move(g)), std::move(b)},
                &warm);
  for (Index p = 0; p < kk; ++p)
    for (Index i = 0; i < r; ++i) out(i, keep[p]) = sol.solution(p, i);
  if (flops != nullptr) *flops = sol.flops;
  return out;
}

}  // namespace faun
