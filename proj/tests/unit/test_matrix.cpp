#include <random>

#include "doctest.h"
#include "faun/errors.hpp"
#include "faun/matrix.hpp"
#include "oracles.hpp"

using namespace faun;

TEST_CASE("gram examples") {
  CHECK(gram(DenseMatrix::identity(2)).dense() == DenseMatrix::identity(2));
  const GramMatrix g = gram(DenseMatrix::from_rows({{1, 2}, {3, 4}}));
  CHECK(g.dense() == DenseMatrix::from_rows({{10, 14}, {14, 20}}));
  CHECK(gram(DenseMatrix(5, 1, 1.0)).dense() == DenseMatrix(1, 1, 5.0));
  CHECK_THROWS_AS(gram(DenseMatrix()), InvalidArgument);
}

TEST_CASE("gram_of_columns equals gram of the transpose bitwise") {
  std::mt19937_64 rng(1);
  const DenseMatrix m = oracle::random_uniform(rng, 17, 4);
  CHECK(gram_of_columns(transpose(m)) == gram(m));
}

TEST_CASE("gram matches W^T W through mm_wt_a") {
  std::mt19937_64 rng(2);
  for (Index size : {1, 7, 64}) {
    const DenseMatrix m = oracle::random_uniform(rng, size, 5);
    const DenseMatrix g = gram(m).dense();
    const DenseMatrix ref = mm_wt_a(m, m);
    for (Index a = 0; a < 5; ++a)
      for (Index b = 0; b < 5; ++b) CHECK(std::abs(g(a, b) - ref(a, b)) <= 1e-12);
  }
}

TEST_CASE("mm_a_ht examples") {
  std::mt19937_64 rng(3);
  const DenseMatrix ht = oracle::random_uniform(rng, 3, 2);
  CHECK(mm_a_ht(DenseMatrix::identity(3), ht) == ht);

  const SparseMatrix single = SparseMatrix::from_triplets(3, 3, {{1, 2, 5.0}});
  const DenseMatrix h2 = DenseMatrix::from_rows({{0, 0}, {0, 0}, {1, 2}});
  const DenseMatrix r = mm_a_ht(single, h2);
  CHECK(r == DenseMatrix::from_rows({{0, 0}, {5, 10}, {0, 0}}));

  const DenseMatrix a = oracle::random_uniform(rng, 4, 3);
  const DenseMatrix h = oracle::random_uniform(rng, 3, 2);
  const auto ref = oracle::matmul(oracle::to_mat(a), oracle::to_mat(h));
  const DenseMatrix got = mm_a_ht(a, h);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 2; ++j) CHECK(got(i, j) == ref[i][j]);

  CHECK_THROWS_AS(mm_a_ht(a, DenseMatrix(4, 2)), InvalidArgument);
}

TEST_CASE("sparse and dense products agree exactly") {
  std::mt19937_64 rng(4);
  std::bernoulli_distribution keep(0.3);
  DenseMatrix a = oracle::random_uniform(rng, 9, 7);
  for (double& v : a.values())
    if (!keep(rng)) v = 0.0;
  const SparseMatrix s = SparseMatrix::from_dense(a);
  const DenseMatrix ht = oracle::random_uniform(rng, 7, 3);
  const DenseMatrix w = oracle::random_uniform(rng, 9, 3);
  CHECK(mm_a_ht(s, ht) == mm_a_ht(a, ht));
  CHECK(mm_a_h(s, transpose(ht)) == mm_a_ht(a, ht));
  CHECK(mm_wt_a(w, s) == mm_wt_a(w, a));
  CHECK(mm_wt_a_from_t(transpose(w), s) == mm_wt_a(w, a));
  CHECK(s.to_dense() == a);
}

TEST_CASE("mm_wt_a examples") {
  const DenseMatrix a = DenseMatrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  CHECK(mm_wt_a(DenseMatrix::identity(2), a) == a);
  CHECK(mm_wt_a(DenseMatrix(2, 1, 1.0), a) == DenseMatrix::from_rows({{5, 7, 9}}));
}

TEST_CASE("frobenius_sq examples") {
  CHECK(frobenius_sq(DenseMatrix(3, 2)) == 0.0);
  CHECK(frobenius_sq(DenseMatrix::from_rows({{3, 4}})) == 25.0);
  std::mt19937_64 rng(5);
  const DenseMatrix m = oracle::random_uniform(rng, 5, 4);
  double ref = 0.0;
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 4; ++j) ref += m(i, j) * m(i, j);
  CHECK(std::abs(frobenius_sq(m) - ref) <= 1e-14 * ref);
  CHECK(std::abs(frobenius_sq(m) - gram(m).trace()) <= 1e-12 * ref);
  CHECK(frobenius_sq(DataMatrix(SparseMatrix::from_dense(m))) == doctest::Approx(ref));
}

TEST_CASE("sparse construction") {
  const SparseMatrix s = SparseMatrix::from_triplets(2, 2, {{0, 0, 1}, {0, 0, 2}, {1, 1, 4}});
  CHECK(s.nnz() == 2);
  CHECK(s.to_dense() == DenseMatrix::from_rows({{3, 0}, {0, 4}}));
  CHECK_THROWS_AS(SparseMatrix(2, 2, {0, 1}, {0}, {1.0}), InvalidArgument);
  CHECK(stored_entries(DataMatrix(s)) == 2);
  CHECK(stored_entries(DataMatrix(DenseMatrix(3, 4))) == 12);
  CHECK(mm_flops(DataMatrix(s), 5) == 20.0);
}

TEST_CASE("GramMatrix::from_dense rejects asymmetric input") {
  CHECK_THROWS_AS(GramMatrix::from_dense(DenseMatrix::from_rows({{1, 2}, {3, 4}})),
                  InvalidArgument);
}
