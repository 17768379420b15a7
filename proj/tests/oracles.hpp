// Independent reference computations used by the unit and acceptance tests.
// They deliberately share no code with the library kernels.
#ifndef FAUN_TESTS_ORACLES_HPP_
#define FAUN_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "faun/matrix.hpp"

namespace oracle {

using faun::DenseMatrix;
using faun::Index;

// Row-major square / rectangular helper for the oracles.
using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const DenseMatrix& m) {
  Mat out(static_cast<std::size_t>(m.rows()),
          std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
  return out;
}

/// C = A * B, plain triple loop with ascending inner index.
inline Mat matmul(const Mat& a, const Mat& b) {
  const std::size_t n = a.size(), k = b.size(), m = b.empty() ? 0 : b[0].size();
  Mat c(n, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) s += a[i][l] * b[l][j];
      c[i][j] = s;
    }
  return c;
}

inline Mat transpose(const Mat& a) {
  if (a.empty()) return {};
  Mat t(a[0].size(), std::vector<double>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) t[j][i] = a[i][j];
  return t;
}

/// ||A - W H||_F / ||A||_F computed from the explicit residual.
inline double explicit_rel_error(const Mat& a, const Mat& w, const Mat& h) {
  const Mat wh = matmul(w, h);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) {
      const double d = a[i][j] - wh[i][j];
      num += d * d;
      den += a[i][j] * a[i][j];
    }
  return std::sqrt(num / den);
}

/// Solves M x = b by Gaussian elimination with partial pivoting.
/// Returns nullopt when a pivot is (numerically) zero.
inline std::optional<std::vector<double>> gauss_solve(Mat m, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    if (std::abs(m[piv][c]) < 1e-14) return std::nullopt;
    std::swap(m[c], m[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = m[r][c] / m[c][c];
      for (std::size_t q = c; q < n; ++q) m[r][q] -= f * m[c][q];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t q = i + 1; q < n; ++q) s -= m[i][q] * x[q];
    x[i] = s / m[i][i];
  }
  return x;
}

/**
 * Exhaustive active-set NNLS: min_{x>=0} 1/2 x'Gx - b'x by enumerating all
 * 2^k passive sets, keeping those whose solution satisfies KKT, and
 * returning the one with the lowest objective.
 */
inline std::vector<double> exhaustive_nnls(const Mat& g, const std::vector<double>& b) {
  const std::size_t k = b.size();
  double bmax = 0.0;
  for (double v : b) bmax = std::max(bmax, std::abs(v));
  const double tol = 1e-9 * (1.0 + bmax);
  std::vector<double> best(k, 0.0);
  double best_obj = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << k); ++mask) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < k; ++i)
      if (mask & (1u << i)) idx.push_back(i);
    std::vector<double> x(k, 0.0);
    if (!idx.empty()) {
      Mat sub(idx.size(), std::vector<double>(idx.size()));
      std::vector<double> rhs(idx.size());
      for (std::size_t p = 0; p < idx.size(); ++p) {
        rhs[p] = b[idx[p]];
        for (std::size_t q = 0; q < idx.size(); ++q) sub[p][q] = g[idx[p]][idx[q]];
      }
      const auto sol = gauss_solve(sub, rhs);
      if (!sol) continue;
      for (std::size_t p = 0; p < idx.size(); ++p) x[idx[p]] = (*sol)[p];
    }
    bool ok = true;
    double obj = 0.0;
    for (std::size_t i = 0; i < k && ok; ++i) {
      double y = -b[i];
      for (std::size_t q = 0; q < k; ++q) y += g[i][q] * x[q];
      if (x[i] < -tol || y < -tol) ok = false;
    }
    if (!ok) continue;
    for (std::size_t i = 0; i < k; ++i) {
      double gx = 0.0;
      for (std::size_t q = 0; q < k; ++q) gx += g[i][q] * x[q];
      obj += 0.5 * x[i] * gx - b[i] * x[i];
    }
    if (obj < best_obj) {
      best_obj = obj;
      best = x;
    }
  }
  return best;
}

/// Random k x k SPD matrix C^T C with C (k+2) x k standard normal, and a
/// k x c right-hand side C^T B with B standard normal (so some constraints
/// are active).
struct SpdProblem {
  DenseMatrix gram;
  DenseMatrix rhs;
};

inline SpdProblem random_spd_problem(std::mt19937_64& rng, Index k, Index c) {
  std::normal_distribution<double> nd;
  const Index rows = k + 2;
  DenseMatrix cm(rows, k), bm(rows, c);
  for (double& v : cm.values()) v = nd(rng);
  for (double& v : bm.values()) v = nd(rng);
  DenseMatrix g(k, k), b(k, c);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j) {
      double s = 0.0;
      for (Index r = 0; r < rows; ++r) s += cm(r, i) * cm(r, j);
      g(i, j) = s;
    }
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < i; ++j) g(j, i) = g(i, j);  // exact symmetry
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < c; ++j) {
      double s = 0.0;
      for (Index r = 0; r < rows; ++r) s += cm(r, i) * bm(r, j);
      b(i, j) = s;
    }
  return {g, b};
}

inline DenseMatrix random_uniform(std::mt19937_64& rng, Index r, Index c,
                                  double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> ud(lo, hi);
  DenseMatrix m(r, c);
  for (double& v : m.values()) v = ud(rng);
  return m;
}

inline double rel_frobenius_diff(const DenseMatrix& a, const DenseMatrix& ref) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    const double d = a.values()[i] - ref.values()[i];
    num += d * d;
    den += ref.values()[i] * ref.values()[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace oracle

#endif  // FAUN_TESTS_ORACLES_HPP_
