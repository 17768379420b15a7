#include <cfloat>
#include <random>

#include "doctest.h"
#include "faun/errors.hpp"
#include "faun/engine.hpp"
#include "oracles.hpp"

using namespace faun;

TEST_CASE("init_factors is deterministic and in range") {
  const Factors a = init_factors(7, 5, 3, 42);
  const Factors b = init_factors(7, 5, 3, 42);
  CHECK(a.W == b.W);
  CHECK(a.H == b.H);
  for (double v : a.W.values()) CHECK((v >= 0.0 && v < 1.0));
  for (double v : a.H.values()) CHECK((v >= 0.0 && v < 1.0));
  CHECK_THROWS_AS(init_factors(0, 5, 3, 1), InvalidArgument);
}

TEST_CASE("different seeds differ in at least 99% of entries") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Factors a = init_factors(40, 30, 5, s);
    const Factors b = init_factors(40, 30, 5, s + 100);
    int same = 0, total = 0;
    for (std::size_t i = 0; i < a.W.values().size(); ++i, ++total)
      same += a.W.values()[i] == b.W.values()[i];
    for (std::size_t i = 0; i < a.H.values().size(); ++i, ++total)
      same += a.H.values()[i] == b.H.values()[i];
    CHECK(same <= total / 100);
  }
}

TEST_CASE("init_block matches the sequential layout") {
  const Factors f = init_factors(10, 8, 3, 9);
  const DenseMatrix blk = init_block(9, 0, 4, 3, 0, 3, 10, 3);
  for (Index r = 0; r < 3; ++r)
    for (Index c = 0; c < 3; ++c) CHECK(blk(r, c) == f.W(4 + r, c));
  const DenseMatrix padded = init_block(9, 0, 8, 4, 0, 3, 10, 3);
  CHECK(padded(1, 2) == f.W(9, 2));
  CHECK(padded(2, 0) == 0.0);
}

TEST_CASE("relative_error examples") {
  std::mt19937_64 rng(1);
  const DenseMatrix w = oracle::random_uniform(rng, 6, 2);
  const DenseMatrix h = oracle::random_uniform(rng, 2, 5);
  const DenseMatrix a = mm_a_h(w, transpose(h));
  const double na = frobenius_sq(a);
  const auto err = [&](const DenseMatrix& ww, const DenseMatrix& hh, const DenseMatrix& aa) {
    return relative_error(frobenius_sq(aa), gram(ww), gram_of_columns(hh),
                          inner_product(mm_wt_a(ww, aa), hh));
  };
  CHECK(err(w, h, a) <= 1e-7);
  CHECK(relative_error(na, gram(DenseMatrix(6, 2)), gram_of_columns(h), 0.0) == 1.0);
  CHECK_THROWS_AS(relative_error(0.0, gram(w), gram_of_columns(h), 0.0), InvalidArgument);

  const DenseMatrix ar = oracle::random_uniform(rng, 6, 5);
  const DenseMatrix wr = oracle::random_uniform(rng, 6, 2);
  const DenseMatrix hr = oracle::random_uniform(rng, 2, 5);
  const double ref =
      oracle::explicit_rel_error(oracle::to_mat(ar), oracle::to_mat(wr), oracle::to_mat(hr));
  CHECK(std::abs(err(wr, hr, ar) - ref) <= 1e-10 * ref);
}

TEST_CASE("BPP from the true H recovers an exact factorization in one iteration") {
  std::mt19937_64 rng(2);
  const DenseMatrix w = oracle::random_uniform(rng, 20, 3);
  const DenseMatrix h = oracle::random_uniform(rng, 3, 15);
  const DenseMatrix a = mm_a_h(w, transpose(h));
  const Factors start{oracle::random_uniform(rng, 20, 3), h};
  const auto r = aunmf_run(a, {3, 1, Algo::kBpp, 0, {}}, &start);
  CHECK(oracle::explicit_rel_error(oracle::to_mat(a), oracle::to_mat(r.factors.W),
                                   oracle::to_mat(r.factors.H)) <= 1e-10);
  CHECK(r.trace.final_error() <= 1e-7);
}

TEST_CASE("zero input is guarded to zero error") {
  const auto r = aunmf_run(DenseMatrix(6, 4), {2, 3, Algo::kMu, 1, {}});
  CHECK(r.trace.final_error() == 0.0);
  for (double v : r.factors.W.values()) CHECK(std::isfinite(v));
  for (double v : r.factors.H.values()) CHECK(std::isfinite(v));
}

TEST_CASE("traces are monotone, deterministic and match the explicit residual") {
  std::mt19937_64 rng(3);
  const DenseMatrix a = oracle::random_uniform(rng, 30, 20);
  for (Algo algo : {Algo::kMu, Algo::kHals, Algo::kBpp}) {
    CAPTURE(to_string(algo));
    const NmfConfig cfg{4, 15, algo, 11, {}};
    const auto r = aunmf_run(a, cfg);
    REQUIRE(r.trace.iterations.size() == 15);
    double prev = r.trace.initial_error;
    for (const auto& it : r.trace.iterations) {
      CHECK(it.rel_error <= prev + 1e-10 * r.trace.initial_error);
      prev = it.rel_error;
    }
    const double explicit_err = oracle::explicit_rel_error(
        oracle::to_mat(a), oracle::to_mat(r.factors.W), oracle::to_mat(r.factors.H));
    CHECK(std::abs(r.trace.final_error() - explicit_err) <= 1e-10 * explicit_err);
    const auto again = aunmf_run(a, cfg);
    CHECK(again.factors.W == r.factors.W);
    CHECK(again.factors.H == r.factors.H);
    CHECK(again.trace.final_error() == r.trace.final_error());
  }
}

TEST_CASE("tolerance stops early") {
  std::mt19937_64 rng(4);
  const DenseMatrix a = oracle::random_uniform(rng, 20, 15);
  const auto r = aunmf_run(a, {3, 200, Algo::kBpp, 1, 1e-3});
  CHECK(r.trace.iterations.size() < 200);
}

TEST_CASE("config validation") {
  const DenseMatrix a(4, 3, 1.0);
  CHECK_THROWS_AS(aunmf_run(a, {4, 1, Algo::kMu, 0, {}}), InvalidArgument);
  CHECK_THROWS_AS(aunmf_run(a, {0, 1, Algo::kMu, 0, {}}), InvalidArgument);
  CHECK_THROWS_AS(aunmf_run(a, {2, 0, Algo::kMu, 0, {}}), InvalidArgument);
  DenseMatrix neg = a;
  neg(0, 0) = -1.0;
  CHECK_THROWS_AS(aunmf_run(neg, {2, 1, Algo::kMu, 0, {}}), InvalidArgument);
  CHECK(parse_algo("abpp") == Algo::kBpp);
  CHECK_THROWS_AS(parse_algo("als"), InvalidArgument);
}

TEST_CASE("HALS normalization keeps W H unchanged") {
  DenseMatrix w = DenseMatrix::from_rows({{3, 0}, {4, 0}});
  DenseMatrix h = DenseMatrix::from_rows({{1, 2}, {5, 6}});
  const std::vector<double> sums = {25.0, 0.0};
  scale_rows(h, finish_hals_w(w, sums, 2));
  CHECK(w(0, 0) == doctest::Approx(0.6));
  CHECK(h(0, 1) == doctest::Approx(10.0));
  CHECK(w(0, 1) == DBL_EPSILON);  // reset column
  CHECK(h(1, 0) == 0.0);          // and its H row cleared
}

TEST_CASE("flop counts") {
  std::mt19937_64 rng(5);
  const DenseMatrix a = oracle::random_uniform(rng, 10, 8);
  const auto r = aunmf_run(a, {2, 1, Algo::kMu, 0, {}});
  const auto& f = r.trace.iterations[0].flops;
  CHECK(f.mm == 2.0 * 2 * 10 * 8 * 2);
  CHECK(f.gram == 2.0 * (10 + 8) * 4);
  CHECK(f.luc == 2.0 * (10 + 8) * 4 + 3.0 * (10 + 8) * 2);
}
