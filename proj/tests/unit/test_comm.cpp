#include <atomic>
#include <mutex>
#include <set>

#include "doctest.h"
#include "faun/comm.hpp"
#include "faun/errors.hpp"

using namespace faun;

TEST_CASE("collective_cost examples") {
  CHECK(collective_cost(CollectiveKind::kAllGather, 8, 4).words == 6.0);
  CHECK(collective_cost(CollectiveKind::kAllGather, 8, 4).messages == 2.0);
  CHECK(collective_cost(CollectiveKind::kAllReduce, 4, 4).words == 6.0);
  CHECK(collective_cost(CollectiveKind::kAllReduce, 4, 4).messages == 4.0);
  for (auto kind : {CollectiveKind::kAllGather, CollectiveKind::kReduceScatter,
                    CollectiveKind::kAllReduce}) {
    CHECK(collective_cost(kind, 100, 1).words == 0.0);
    CHECK(collective_cost(kind, 100, 1).messages == 0.0);
  }
  CHECK(ceil_log2(1) == 0);
  CHECK(ceil_log2(6) == 3);
  CHECK(ceil_log2(8) == 3);
}

TEST_CASE("two-rank collectives") {
  run_spmd(2, [](Communicator& c) {
    const double base = c.rank() == 0 ? 1.0 : 3.0;
    const std::vector<double> g = c.all_gather(std::vector<double>{base, base + 1});
    CHECK(g == std::vector<double>{1, 2, 3, 4});
    const std::vector<double> mine =
        c.rank() == 0 ? std::vector<double>{1, 2, 3, 4} : std::vector<double>{5, 6, 7, 8};
    const auto rs = c.reduce_scatter(mine);
    CHECK(rs == (c.rank() == 0 ? std::vector<double>{6, 8} : std::vector<double>{10, 12}));
    const auto ar = c.all_reduce(std::vector<double>{base, base + 1});
    CHECK(ar == std::vector<double>{4, 6});
  });
}

TEST_CASE("p = 1 collectives are identities with zero cost") {
  run_spmd(1, [](Communicator& c) {
    const std::vector<double> v = {1, 2, 3};
    CHECK(c.all_gather(v) == v);
    CHECK(c.reduce_scatter(v) == v);
    CHECK(c.all_reduce(v) == v);
    CHECK(c.counters().words() == 0.0);
    CHECK(c.counters().messages() == 0.0);
  });
}

TEST_CASE("p = 4 word counters") {
  run_spmd(4, [](Communicator& c) {
    c.all_gather(std::vector<double>(2, 1.0));
    CHECK(c.counters().words() == 6.0);
    c.reduce_scatter(std::vector<double>(8, 1.0));
    CHECK(c.counters().words() == 12.0);
    c.all_reduce(std::vector<double>(4, 1.0));
    CHECK(c.counters().words() == 18.0);
    CHECK(c.counters().messages() == 2.0 + 2.0 + 4.0);
    c.all_reduce(std::vector<double>(4, 1.0), Accounting::kDiagnostic);
    CHECK(c.counters().words() == 18.0);
  });
}

TEST_CASE("reduce_scatter then all_gather equals all_reduce") {
  run_spmd(4, [](Communicator& c) {
    std::vector<double> v(8);
    for (int i = 0; i < 8; ++i) v[i] = 0.1 * (i + 1) * (c.rank() + 1) + 1.0 / 3.0;
    const auto full = c.all_gather(c.reduce_scatter(v));
    CHECK(full == c.all_reduce(v));
  });
}

TEST_CASE("mismatched lengths are protocol errors") {
  CHECK_THROWS_AS(run_spmd(2, [](Communicator& c) {
                    c.all_gather(std::vector<double>(c.rank() + 1, 0.0));
                  }),
                  ProtocolError);
  CHECK_THROWS_AS(run_spmd(2, [](Communicator& c) {
                    c.all_reduce(std::vector<double>(c.rank() + 1, 0.0));
                  }),
                  ProtocolError);
  CHECK_THROWS_AS(run_spmd(2, [](Communicator& c) {
                    c.reduce_scatter(std::vector<double>(3, 0.0));
                  }),
                  ProtocolError);
}

TEST_CASE("a failing rank aborts its peers") {
  CHECK_THROWS_AS(run_spmd(3, [](Communicator& c) {
                    if (c.rank() == 1) throw InvalidArgument("boom");
                    c.barrier();
                    c.all_reduce(std::vector<double>{1.0});
                  }),
                  InvalidArgument);
}

TEST_CASE("split shapes and partitions") {
  run_spmd(6, [](Communicator& c) {
    const int i = c.rank() / 2, j = c.rank() % 2;  // 3 x 2
    auto [row, col] = c.split(3, 2, i, j);
    CHECK(row.size() == 2);
    CHECK(col.size() == 3);
    CHECK(row.rank() == j);
    CHECK(col.rank() == i);
    CHECK(row.scope() == Scope::kGridRow);
    // Row members share i: gathering global ranks gives a contiguous pair.
    const auto members = row.all_gather(std::vector<double>{double(c.rank())});
    CHECK(members == std::vector<double>{double(2 * i), double(2 * i + 1)});
    const auto colm = col.all_gather(std::vector<double>{double(c.rank())});
    CHECK(colm == std::vector<double>{double(j), double(j + 2), double(j + 4)});
  });
  run_spmd(6, [](Communicator& c) {
    const int i = c.rank() / 3, j = c.rank() % 3;  // 2 x 3
    auto [row, col] = c.split(2, 3, i, j);
    const auto m = row.all_gather(std::vector<double>{double(c.rank())});
    std::set<int> s;
    for (double v : m) s.insert(int(v));
    CHECK(s.size() == 3);
    for (int r : s) CHECK(r / 3 == i);
  });
  run_spmd(4, [](Communicator& c) {
    auto [row, col] = c.split(1, 4, 0, c.rank());
    CHECK(row.size() == 4);
    CHECK(col.size() == 1);
  });
}

TEST_CASE("inconsistent grids are protocol errors") {
  CHECK_THROWS_AS(run_spmd(4, [](Communicator& c) {
                    if (c.rank() == 0) c.split(4, 1, 0, 0);
                    else c.split(2, 2, c.rank() / 2, c.rank() % 2);
                  }),
                  ProtocolError);
}

TEST_CASE("reductions are bitwise reproducible across runs") {
  std::vector<double> first;
  std::mutex mu;
  for (int rep = 0; rep < 5; ++rep) {
    run_spmd(5, [&](Communicator& c) {
      std::vector<double> v(3);
      for (int i = 0; i < 3; ++i) v[i] = 1.0 / (c.rank() + 3 + i) + 1e-17 * c.rank();
      const auto r = c.all_reduce(v);
      if (c.rank() == 0) {
        std::lock_guard lock(mu);
        if (first.empty()) first = r;
        CHECK(r == first);
      }
    });
  }
}
