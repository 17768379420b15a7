#include "faun/comm.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <condition_variable>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "faun/errors.hpp"

namespace faun {

int ceil_log2(int p) {
  int levels = 0;
  for (long long span = 1; span < p; span *= 2) ++levels;
  return levels;
}

CollectiveCost collective_cost(CollectiveKind kind, double n, int p) {
  if (p < 1) throw InvalidArgument("collective_cost: p must be >= 1");
  if (n < 0) throw InvalidArgument("collective_cost: n must be >= 0");
  if (p == 1) return {};
  const double frac = static_cast<double>(p - 1) * n / static_cast<double>(p);
  const double lat = ceil_log2(p);
  switch (kind) {
    case CollectiveKind::kAllGather:
    case CollectiveKind::kReduceScatter:
      return {frac, lat};
    case CollectiveKind::kAllReduce:
      return {2.0 * frac, 2.0 * lat};
  }
  throw InvalidArgument("collective_cost: unknown collective kind");
}

CollectiveTally& CollectiveTally::operator+=(const CollectiveTally& o) {
  calls += o.calls;
  words += o.words;
  messages += o.messages;
  return *this;
}

CollectiveTally operator-(CollectiveTally a, const CollectiveTally& b) {
  a.calls -= b.calls;
  a.words -= b.words;
  a.messages -= b.messages;
  return a;
}

double CommCounters::words() const noexcept {
  return all_gather.words + reduce_scatter.words + all_reduce.words;
}

double CommCounters::messages() const noexcept {
  return all_gather.messages + reduce_scatter.messages + all_reduce.messages;
}

CommCounters& CommCounters::operator+=(const CommCounters& o) {
  all_gather += o.all_gather;
  reduce_scatter += o.reduce_scatter;
  all_reduce += o.all_reduce;
  diagnostic += o.diagnostic;
  return *this;
}

CommCounters operator-(CommCounters a, const CommCounters& b) {
  a.all_gather = a.all_gather - b.all_gather;
  a.reduce_scatter = a.reduce_scatter - b.reduce_scatter;
  a.all_reduce = a.all_reduce - b.all_reduce;
  a.diagnostic = a.diagnostic - b.diagnostic;
  return a;
}

namespace detail {

struct Group;

// Shared by every group of one SPMD launch; carries the abort flag.
struct World {
  std::atomic<bool> aborted{false};
  std::mutex mu;
  std::vector<std::weak_ptr<Group>> groups;

  void track(const std::shared_ptr<Group>& g) {
    std::lock_guard lock(mu);
    groups.push_back(g);
  }
  void abort();
};

struct Group {
  Group(int n, std::shared_ptr<World> w)
      : size(n),
        world(std::move(w)),
        slots(static_cast<std::size_t>(n)),
        meta(static_cast<std::size_t>(n)),
        created(static_cast<std::size_t>(n)) {}

  // Generation-counting barrier that can be broken by World::abort().
  void arrive_and_wait() {
    std::unique_lock lock(mu);
    if (world->aborted) throw CommAborted("communicator aborted by a peer rank");
    const std::uint64_t gen = generation;
    if (++arrived == size) {
      arrived = 0;
      ++generation;
      cv.notify_all();
      return;
    }
    cv.wait(lock, [&] { return generation != gen || world->aborted.load(); });
    if (generation == gen) throw CommAborted("communicator aborted by a peer rank");
  }

  const int size;
  std::shared_ptr<World> world;
  std::mutex mu;
  std::condition_variable cv;
  int arrived = 0;
  std::uint64_t generation = 0;

  std::vector<std::span<const double>> slots;
  std::vector<std::array<int, 4>> meta;
  std::vector<std::pair<std::shared_ptr<Group>, std::shared_ptr<Group>>> created;
};

void World::abort() {
  aborted = true;
  std::vector<std::shared_ptr<Group>> live;
  {
    std::lock_guard lock(mu);
    for (auto& w : groups)
      if (auto g = w.lock()) live.push_back(std::move(g));
  }
  for (auto& g : live) {
    std::lock_guard lock(g->mu);
    g->cv.notify_all();
  }
}

}  // namespace detail

Communicator::Communicator(std::shared_ptr<detail::Group> group, int rank,
                           Scope scope, std::shared_ptr<CommCounters> counters)
    : group_(std::move(group)),
      rank_(rank),
      scope_(scope),
      counters_(std::move(counters)) {}

int Communicator::size() const noexcept { return group_->size; }

std::vector<std::span<const double>> Communicator::exchange(
    std::span<const double> local) {
  group_->slots[rank_] = local;
  group_->arrive_and_wait();
  return group_->slots;
}

namespace {

void require_equal_lengths(const std::vector<std::span<const double>>& bufs,
                           const char* what) {
  for (const auto& b : bufs) {
    if (b.size() != bufs.front().size()) {
      throw ProtocolError(std::string(what) +
                          ": ranks contributed buffers of different lengths");
    }
  }
}

void add(CollectiveTally& t, CollectiveCost c) {
  ++t.calls;
  t.words += c.words;
  t.messages += c.messages;
}

}  // namespace

std::vector<double> Communicator::all_gather(std::span<const double> local) {
  const int p = size();
  const auto bufs = exchange(local);
  require_equal_lengths(bufs, "all_gather");
  std::vector<double> out;
  out.reserve(local.size() * static_cast<std::size_t>(p));
  for (const auto& b : bufs) out.insert(out.end(), b.begin(), b.end());
  group_->arrive_and_wait();
  add(counters_->all_gather,
      collective_cost(CollectiveKind::kAllGather,
                      static_cast<double>(out.size()), p));
  return out;
}

std::vector<double> Communicator::reduce_scatter(std::span<const double> local) {
  const int p = size();
  const auto bufs = exchange(local);
  require_equal_lengths(bufs, "reduce_scatter");
  const std::size_t n = local.size();
  if (n % static_cast<std::size_t>(p) != 0) {
    throw ProtocolError("reduce_scatter: length " + std::to_string(n) +
                        " is not divisible by " + std::to_string(p) + " ranks");
  }
  const std::size_t chunk = n / static_cast<std::size_t>(p);
  const std::size_t off = chunk * static_cast<std::size_t>(rank_);
  std::vector<double> out(bufs[0].begin() + static_cast<std::ptrdiff_t>(off),
                          bufs[0].begin() + static_cast<std::ptrdiff_t>(off + chunk));
  for (int q = 1; q < p; ++q)
    for (std::size_t i = 0; i < chunk; ++i) out[i] += bufs[q][off + i];
  group_->arrive_and_wait();
  add(counters_->reduce_scatter,
      collective_cost(CollectiveKind::kReduceScatter, static_cast<double>(n), p));
  return out;
}

std::vector<double> Communicator::all_reduce(std::span<const double> local,
                                             Accounting accounting) {
  const int p = size();
  const auto bufs = exchange(local);
  require_equal_lengths(bufs, "all_reduce");
  std::vector<double> out(bufs[0].begin(), bufs[0].end());
  for (int q = 1; q < p; ++q)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bufs[q][i];
  group_->arrive_and_wait();
  add(accounting == Accounting::kAlgorithm ? counters_->all_reduce
                                           : counters_->diagnostic,
      collective_cost(CollectiveKind::kAllReduce,
                      static_cast<double>(local.size()), p));
  return out;
}

void Communicator::barrier() { group_->arrive_and_wait(); }

std::pair<Communicator, Communicator> Communicator::split(int grid_rows,
                                                          int grid_cols,
                                                          int grid_row,
                                                          int grid_col) {
  const int p = size();
  group_->meta[rank_] = {grid_rows, grid_cols, grid_row, grid_col};
  group_->arrive_and_wait();
  const auto meta = group_->meta;

  // Every rank validates the same table, so all of them throw together.
  const auto& first = meta.front();
  if (static_cast<long long>(first[0]) * first[1] != p || first[0] < 1 ||
      first[1] < 1) {
    throw ProtocolError("split: grid " + std::to_string(first[0]) + "x" +
                        std::to_string(first[1]) + " does not cover " +
                        std::to_string(p) + " ranks");
  }
  std::vector<int> owner(static_cast<std::size_t>(p), -1);
  for (int q = 0; q < p; ++q) {
    const auto& m = meta[q];
    if (m[0] != first[0] || m[1] != first[1]) {
      throw ProtocolError("split: ranks disagree on the grid shape");
    }
    if (m[2] < 0 || m[2] >= m[0] || m[3] < 0 || m[3] >= m[1]) {
      throw ProtocolError("split: grid coordinates out of range on rank " +
                          std::to_string(q));
    }
    int& slot = owner[static_cast<std::size_t>(m[2] * m[1] + m[3])];
    if (slot >= 0) {
      throw ProtocolError("split: two ranks claimed the same grid position");
    }
    slot = q;
  }

  // Position (r, 0) creates row group r; position (0, c) creates column
  // group c. Others pick up their groups from the creators' slots.
  auto& mine = group_->created[rank_];
  mine = {};
  if (grid_col == 0) {
    mine.first = std::make_shared<detail::Group>(grid_cols, group_->world);
    group_->world->track(mine.first);
  }
  if (grid_row == 0) {
    mine.second = std::make_shared<detail::Group>(grid_rows, group_->world);
    group_->world->track(mine.second);
  }
  group_->arrive_and_wait();
  const int row_leader = owner[static_cast<std::size_t>(grid_row * grid_cols)];
  const int col_leader = owner[static_cast<std::size_t>(grid_col)];
  auto row_group = group_->created[row_leader].first;
  auto col_group = group_->created[col_leader].second;
  group_->arrive_and_wait();

  return {Communicator(std::move(row_group), grid_col, Scope::kGridRow, counters_),
          Communicator(std::move(col_group), grid_row, Scope::kGridColumn,
                       counters_)};
}

void run_spmd(int p, const std::function<void(Communicator&)>& body) {
  if (p < 1) throw InvalidArgument("run_spmd: need at least one rank");
  auto world = std::make_shared<detail::World>();
  auto group = std::make_shared<detail::Group>(p, world);
  world->track(group);

  std::mutex err_mu;
  std::exception_ptr first_error;
  bool first_is_abort = false;

  auto rank_main = [&](int r) {
    Communicator comm(group, r, Scope::kGlobal, std::make_shared<CommCounters>());
    try {
      body(comm);
    } catch (const CommAborted&) {
      std::lock_guard lock(err_mu);
      if (!first_error) {
        first_error = std::current_exception();
        first_is_abort = true;
      }
      world->abort();
    } catch (...) {
      {
        std::lock_guard lock(err_mu);
        if (!first_error || first_is_abort) {
          first_error = std::current_exception();
          first_is_abort = false;
        }
      }
      world->abort();
    }
  };

  if (p == 1) {
    rank_main(0);
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(static_cast<std::size_t>(p));
    for (int r = 0; r < p; ++r) threads.emplace_back(rank_main, r);
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace faun
