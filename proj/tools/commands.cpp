#include "commands.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "faun/cost.hpp"
#include "faun/dist.hpp"
#include "faun/engine.hpp"
#include "faun/errors.hpp"
#include "faun/io.hpp"

namespace faun::cli {
namespace {

using nlohmann::ordered_json;

// Desk-scale synthetic defaults are 1/100 (linear) of the full-scale sizes.
constexpr Index kDeskM = 2074, kDeskN = 1382;
constexpr Index kFullM = 207360, kFullN = 138240;
constexpr Index kLowRank = 100;
constexpr double kSparseDensity = 0.001;

struct RunOptions {
  std::string algo = "bpp";
  std::string impl = "faun";
  int ranks = 1;
  std::string grid;
  std::uint64_t seed = 1;
  Index k = 10;
  Index iters = 10;
  std::optional<double> tolerance;
  std::string input;
  std::vector<std::string> synthetic;
  bool full_scale = false;
  std::string trace;
  std::string report;
  std::string output;
  std::string format = "mm";
  double max_memory_gb = 4.0;
};

struct Problem {
  DataMatrix a;
  std::string source;
};

struct Outcome {
  Factors factors;
  IterationTrace trace;
  ProcessorGrid grid;
  Index padded_m = 0, padded_n = 0;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// The --synthetic argument: kind followed by up to three size parameters.
struct Synthetic {
  std::string kind;
  Index m = 0, n = 0;
  Index rank = 0;        // dense-lowrank
  double density = 0.0;  // sparse-uniform
};

Synthetic parse_synthetic(const RunOptions& o) {
  Synthetic s;
  s.kind = o.synthetic.at(0);
  if (s.kind != "dense-lowrank" && s.kind != "sparse-uniform") {
    throw InvalidArgument("--synthetic kind must be dense-lowrank or sparse-uniform");
  }
  s.m = o.full_scale ? kFullM : kDeskM;
  s.n = o.full_scale ? kFullN : kDeskN;
  s.rank = kLowRank;
  s.density = kSparseDensity;
  if (o.synthetic.size() != 1 && o.synthetic.size() != 4) {
    throw InvalidArgument("--synthetic takes KIND or KIND M N PARAM");
  }
  if (o.synthetic.size() == 4) {
    try {
      s.m = std::stoll(o.synthetic[1]);
      s.n = std::stoll(o.synthetic[2]);
      if (s.kind == "dense-lowrank") {
        s.rank = std::stoll(o.synthetic[3]);
      } else {
        s.density = std::stod(o.synthetic[3]);
      }
    } catch (const std::logic_error&) {
      throw InvalidArgument("--synthetic sizes must be numbers");
    }
  }
  return s;
}

ParallelAlgo parallel_of(const std::string& impl) {
  return impl == "naive" ? ParallelAlgo::kNaive : ParallelAlgo::kFaun;
}

ProcessorGrid grid_for(const RunOptions& o, Index m, Index n) {
  if (o.impl == "seq") return {1, 1};
  if (o.impl == "naive") return {o.ranks, 1};
  if (!o.grid.empty()) {
    const ProcessorGrid g = parse_grid(o.grid);
    if (g.size() != o.ranks) {
      throw InvalidArgument("grid " + g.to_string() + " has " +
                            std::to_string(g.size()) + " ranks but --ranks is " +
                            std::to_string(o.ranks));
    }
    return g;
  }
  return make_grid(m, n, o.ranks);
}

// Refuses requests whose modeled footprint (all in-process ranks plus the
// input) exceeds the memory budget.
void check_memory(const RunOptions& o, Index m, Index n, double stored_words) {
  const int p = o.impl == "seq" ? 1 : o.ranks;
  const ProcessorGrid g = grid_for(o, m, n);
  const Index pm = (m + p - 1) / p * p, pn = (n + p - 1) / p * p;
  // The m*n term of the model becomes the stored words for sparse input.
  const CostReport r = per_iter_cost(parallel_of(o.impl), pm, pn, o.k, p, g,
                                     LucFlopModel{parse_algo(o.algo)}, stored_words);
  const double bytes = 8.0 * (r.memory_words * p + stored_words);
  const double limit = o.max_memory_gb * 1e9;
  if (bytes > limit) {
    std::ostringstream msg;
    msg << "refusing: estimated memory " << bytes / 1e9 << " GB exceeds the "
        << o.max_memory_gb << " GB budget (--max-memory-gb)";
    throw InvalidArgument(msg.str());
  }
}

Problem load_problem(const RunOptions& o) {
  if (o.input.empty() == o.synthetic.empty()) {
    throw InvalidArgument("give exactly one of --input or --synthetic");
  }
  if (!o.input.empty()) {
    MatrixFile f = read_matrix(o.input);
    if (f.has_negative) {
      throw InvalidArgument("'" + o.input + "' has negative entries; NMF needs A >= 0");
    }
    const double stored = is_sparse(f.matrix)
                              ? 2.0 * static_cast<double>(stored_entries(f.matrix))
                              : static_cast<double>(stored_entries(f.matrix));
    check_memory(o, rows_of(f.matrix), cols_of(f.matrix), stored);
    return {std::move(f.matrix), o.input};
  }
  const Synthetic s = parse_synthetic(o);
  if (s.kind == "dense-lowrank") {
    check_memory(o, s.m, s.n, static_cast<double>(s.m) * static_cast<double>(s.n));
    return {gen_dense_lowrank(s.m, s.n, s.rank, o.seed),
            "dense-lowrank " + std::to_string(s.m) + " " + std::to_string(s.n) +
                " " + std::to_string(s.rank)};
  }
  if (!(s.density > 0.0 && s.density <= 1.0)) {
    throw InvalidArgument("sparse density must be in (0, 1]");
  }
  check_memory(o, s.m, s.n,
               2.0 * s.density * static_cast<double>(s.m) * static_cast<double>(s.n));
  return {gen_sparse_uniform(s.m, s.n, s.density, o.seed),
          "sparse-uniform " + std::to_string(s.m) + " " + std::to_string(s.n) +
              " " + fmt(s.density)};
}

int thread_cap() {
  const char* env = std::getenv("FAUN_THREADS");
  if (env == nullptr || *env == '\0') return 0;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw InvalidArgument("FAUN_THREADS must be a positive integer");
  return static_cast<int>(v);
}

void validate(const RunOptions& o) {
  if (o.impl != "seq" && o.impl != "naive" && o.impl != "faun") {
    throw InvalidArgument("--impl must be seq, naive or faun");
  }
  parse_algo(o.algo);
  if (o.ranks < 1) throw InvalidArgument("--ranks must be >= 1");
  if (o.impl == "seq" && o.ranks != 1) {
    throw InvalidArgument("--impl seq runs on one rank");
  }
  const int cap = thread_cap();
  if (cap > 0 && o.ranks > cap) {
    throw InvalidArgument("--ranks " + std::to_string(o.ranks) +
                          " exceeds FAUN_THREADS=" + std::to_string(cap));
  }
  if (o.format != "mm" && o.format != "csv") throw InvalidArgument("--format must be mm or csv");
}

NmfConfig config_of(const RunOptions& o) {
  return {o.k, o.iters, parse_algo(o.algo), o.seed, o.tolerance};
}

Outcome execute(const DataMatrix& a, const RunOptions& o) {
  const NmfConfig config = config_of(o);
  if (o.impl == "seq") {
    NmfResult r = aunmf_run(a, config);
    return {std::move(r.factors), std::move(r.trace), {1, 1}, rows_of(a), cols_of(a)};
  }
  const Distribution mode =
      o.impl == "naive" ? Distribution::kNaive : Distribution::kTwoD;
  DistributedResult r = run_distributed(a, config, o.ranks, mode,
                                        grid_for(o, rows_of(a), cols_of(a)));
  return {std::move(r.factors), std::move(r.trace), r.grid, r.padded_m, r.padded_n};
}

ordered_json breakdown_json(const PhaseTimes& t) {
  return {{"mm", t.mm},
          {"luc", t.luc},
          {"gram", t.gram},
          {"allgather", t.all_gather},
          {"reducescatter", t.reduce_scatter},
          {"allreduce", t.all_reduce}};
}

CommCounters total_comm(const IterationTrace& t) {
  CommCounters c;
  for (const auto& it : t.iterations) c += it.comm;
  return c;
}

ordered_json report_json(const RunOptions& o, const Problem& p, const Outcome& r) {
  const CommCounters comm = total_comm(r.trace);
  const auto iters = static_cast<double>(r.trace.iterations.size());
  const int ranks = o.impl == "seq" ? 1 : o.ranks;
  const CostReport model =
      per_iter_cost(parallel_of(o.impl), r.padded_m, r.padded_n, o.k, ranks, r.grid,
                    LucFlopModel{parse_algo(o.algo)});
  const auto& first = r.trace.iterations.front();
  ordered_json j;
  j["config"] = {{"algo", o.algo},
                 {"impl", o.impl},
                 {"ranks", ranks},
                 {"grid", r.grid.to_string()},
                 {"m", rows_of(p.a)},
                 {"n", cols_of(p.a)},
                 {"padded_m", r.padded_m},
                 {"padded_n", r.padded_n},
                 {"k", o.k},
                 {"iterations", r.trace.iterations.size()},
                 {"seed", o.seed},
                 {"source", p.source}};
  j["breakdown"] = breakdown_json(r.trace.total_times());
  j["words"] = comm.words();
  j["messages"] = comm.messages();
  j["words_per_iteration"] = comm.words() / iters;
  j["messages_per_iteration"] = comm.messages() / iters;
  j["collectives"] = {
      {"allgather", {{"calls", comm.all_gather.calls}, {"words", comm.all_gather.words}}},
      {"reducescatter",
       {{"calls", comm.reduce_scatter.calls}, {"words", comm.reduce_scatter.words}}},
      {"allreduce", {{"calls", comm.all_reduce.calls}, {"words", comm.all_reduce.words}}}};
  j["flops_per_iteration"] = {{"mm", first.flops.mm},
                              {"gram", first.flops.gram},
                              {"luc", first.flops.luc}};
  j["model"] = {{"flops", model.flops},
                {"words", model.words},
                {"messages", model.messages},
                {"memory_words", model.memory_words},
                {"luc_surrogate", model.luc_surrogate}};
  j["initial_error"] = r.trace.initial_error;
  j["final_error"] = r.trace.final_error();
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw IoError("write to '" + path + "' failed");
}

std::string trace_csv(const IterationTrace& t) {
  std::string s = "iter,rel_error\n";
  for (const auto& it : t.iterations)
    s += std::to_string(it.iteration) + "," + fmt(it.rel_error) + "\n";
  return s;
}

int cmd_run(const RunOptions& o, std::ostream& out) {
  validate(o);
  const Problem p = load_problem(o);
  const Outcome r = execute(p.a, o);
  if (!o.trace.empty()) write_text(o.trace, trace_csv(r.trace));
  if (!o.report.empty()) write_text(o.report, report_json(o, p, r).dump(2) + "\n");
  if (!o.output.empty()) {
    const auto paths = write_factors(
        r.factors.W, r.factors.H, o.output,
        o.format == "csv" ? FactorFormat::kCsv : FactorFormat::kMatrixMarket);
    out << "factors: " << paths.w.string() << " " << paths.h.string() << "\n";
  }
  out << o.impl << " " << o.algo << " grid " << r.grid.to_string() << " iterations "
      << r.trace.iterations.size() << " final relative error "
      << fmt(r.trace.final_error()) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// cost

struct CostOptions {
  Index m = 0, n = 0, k = 0;
  int p = 1;
  std::string algo = "mu";
  std::string grid;
  double alpha = 1e-6;
  double beta = 1e-9;
  double gamma = 1e-11;
  std::string format = "csv";
  bool sweep = false;
};

struct CostRow {
  ParallelAlgo algo;
  Index m, n, k;
  int p;
  ProcessorGrid grid;
  CostReport report;
  std::optional<double> lower_bound;
};

const char* kCostHeader =
    "algo,m,n,k,p,grid,flops,words,messages,memory_words,modeled_seconds,"
    "lower_bound,ratio,luc_surrogate,hals_unbatched_messages";

std::string cost_csv(const CostRow& r, const CostOptions& o) {
  std::ostringstream s;
  s << to_string(r.algo) << ',' << r.m << ',' << r.n << ',' << r.k << ',' << r.p
    << ',' << r.grid.to_string() << ',' << fmt(r.report.flops) << ','
    << fmt(r.report.words) << ',' << fmt(r.report.messages) << ','
    << fmt(r.report.memory_words) << ','
    << fmt(r.report.modeled_seconds(o.alpha, o.beta, o.gamma)) << ',';
  if (r.lower_bound) {
    s << fmt(*r.lower_bound) << ',' << fmt(r.report.words / *r.lower_bound);
  } else {
    s << "na,na";
  }
  s << ',' << (r.report.luc_surrogate ? 1 : 0) << ','
    << fmt(r.report.hals_unbatched_messages);
  return s.str();
}

ordered_json cost_json(const CostRow& r, const CostOptions& o) {
  ordered_json j = {{"algo", to_string(r.algo)},
                    {"m", r.m},
                    {"n", r.n},
                    {"k", r.k},
                    {"p", r.p},
                    {"grid", r.grid.to_string()},
                    {"flops", r.report.flops},
                    {"words", r.report.words},
                    {"messages", r.report.messages},
                    {"memory_words", r.report.memory_words},
                    {"modeled_seconds", r.report.modeled_seconds(o.alpha, o.beta, o.gamma)},
                    {"luc_surrogate", r.report.luc_surrogate},
                    {"hals_unbatched_messages", r.report.hals_unbatched_messages},
                    {"per_collective",
                     {{"allgather", r.report.all_gather.words},
                      {"reducescatter", r.report.reduce_scatter.words},
                      {"allreduce", r.report.all_reduce.words}}}};
  j["lower_bound"] = r.lower_bound ? ordered_json(*r.lower_bound) : ordered_json(nullptr);
  j["ratio"] = r.lower_bound ? ordered_json(r.report.words / *r.lower_bound)
                             : ordered_json(nullptr);
  return j;
}

std::vector<CostRow> cost_rows(const CostOptions& o, bool faun_only) {
  const LucFlopModel luc{parse_algo(o.algo)};
  std::vector<CostRow> rows;
  const auto add = [&](Index m, Index n, Index k, int p, std::optional<ProcessorGrid> g) {
    const auto lb = bandwidth_lower_bound(m, n, k, p);
    const ProcessorGrid fg = g ? *g : optimize_grid_exhaustive(m, n, k, p);
    if (!faun_only) {
      rows.push_back({ParallelAlgo::kNaive, m, n, k, p, {p, 1},
                      per_iter_cost(ParallelAlgo::kNaive, m, n, k, p, {p, 1}, luc), lb});
    }
    rows.push_back({ParallelAlgo::kFaun, m, n, k, p, fg,
                    per_iter_cost(ParallelAlgo::kFaun, m, n, k, p, fg, luc), lb});
  };
  if (o.sweep) {
    // Lower-bound sweep: k = 16 wherever the bound's hypothesis holds.
    for (Index m : {256, 1024, 4096})
      for (Index n : {256, 1024, 4096})
        for (int p : {4, 16, 64})
          if (bandwidth_lower_bound(m, n, 16, p)) add(m, n, 16, p, std::nullopt);
  } else {
    std::optional<ProcessorGrid> g;
    if (!o.grid.empty()) {
      g = parse_grid(o.grid);
      if (g->size() != o.p) throw InvalidArgument("--grid does not have p ranks");
    }
    add(o.m, o.n, o.k, o.p, g);
  }
  return rows;
}

int cmd_cost(const CostOptions& o, std::ostream& out) {
  if (o.format != "csv" && o.format != "json") throw InvalidArgument("--format must be csv or json");
  if (!o.sweep && (o.m < 1 || o.n < 1 || o.k < 1 || o.p < 1)) {
    throw InvalidArgument("cost needs --m, --n, --k, --p >= 1 (or --sweep)");
  }
  const auto rows = cost_rows(o, o.sweep);
  if (o.format == "csv") {
    out << kCostHeader << "\n";
    for (const auto& r : rows) out << cost_csv(r, o) << "\n";
    return kOk;
  }
  ordered_json j;
  if (!o.sweep) {
    j["optimal_grid"] = optimize_grid_exhaustive(o.m, o.n, o.k, o.p).to_string();
    j["make_grid"] = make_grid(o.m, o.n, o.p).to_string();
  }
  j["alpha"] = o.alpha;
  j["beta"] = o.beta;
  j["gamma"] = o.gamma;
  j["rows"] = ordered_json::array();
  for (const auto& r : rows) j["rows"].push_back(cost_json(r, o));
  out << j.dump(2) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// sweep

const char* kSweepHeader =
    "axis,value,impl,algo,ranks,grid,k,iterations,mm,luc,gram,allgather,"
    "reducescatter,allreduce,words_per_iter,messages_per_iter,"
    "allgather_words_per_iter,flops_per_iter,model_words,auto_grid,final_error";

int cmd_sweep(RunOptions base, const std::string& axis,
              const std::vector<std::string>& values, const std::string& out_path,
              std::ostream& out) {
  if (axis != "ranks" && axis != "k" && axis != "grid") {
    throw InvalidArgument("--axis must be ranks, k or grid");
  }
  std::vector<RunOptions> runs;
  if (axis == "grid") {
    if (base.impl != "faun") throw InvalidArgument("grid sweeps need --impl faun");
    for (const auto& g : divisor_grids(base.ranks)) {
      RunOptions o = base;
      o.grid = g.to_string();
      runs.push_back(o);
    }
  } else {
    if (values.empty()) throw InvalidArgument("--values is required for this axis");
    for (const auto& v : values) {
      RunOptions o = base;
      try {
        if (axis == "ranks") {
          o.ranks = std::stoi(v);
          o.grid.clear();
        } else {
          o.k = std::stoll(v);
        }
      } catch (const std::logic_error&) {
        throw InvalidArgument("--values must be integers");
      }
      runs.push_back(o);
    }
  }
  for (const auto& o : runs) validate(o);

  const Problem p = load_problem(base);
  std::ostringstream csv;
  csv << kSweepHeader << "\n";
  for (const auto& o : runs) {
    const Outcome r = execute(p.a, o);
    const CommCounters c = total_comm(r.trace);
    const auto iters = static_cast<double>(r.trace.iterations.size());
    const PhaseTimes t = r.trace.total_times();
    const int ranks = o.impl == "seq" ? 1 : o.ranks;
    const CostReport model = per_iter_cost(parallel_of(o.impl), r.padded_m, r.padded_n,
                                           o.k, ranks, r.grid,
                                           LucFlopModel{parse_algo(o.algo)});
    const std::string value = axis == "grid"    ? r.grid.to_string()
                              : axis == "ranks" ? std::to_string(o.ranks)
                                                : std::to_string(o.k);
    const bool is_auto = o.impl == "faun" &&
                         r.grid == make_grid(rows_of(p.a), cols_of(p.a), ranks);
    csv << axis << ',' << value << ',' << o.impl << ',' << o.algo << ',' << ranks
        << ',' << r.grid.to_string() << ',' << o.k << ',' << iters << ','
        << fmt(t.mm) << ',' << fmt(t.luc) << ',' << fmt(t.gram) << ','
        << fmt(t.all_gather) << ',' << fmt(t.reduce_scatter) << ','
        << fmt(t.all_reduce) << ',' << fmt(c.words() / iters) << ','
        << fmt(c.messages() / iters) << ',' << fmt(c.all_gather.words / iters)
        << ',' << fmt(r.trace.iterations.front().flops.total()) << ','
        << fmt(model.words) << ',' << (is_auto ? 1 : 0) << ','
        << fmt(r.trace.final_error()) << "\n";
  }
  if (out_path.empty()) {
    out << csv.str();
  } else {
    write_text(out_path, csv.str());
  }
  return kOk;
}

void add_problem_flags(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("--algo", o.algo, "mu | hals | bpp")->capture_default_str();
  cmd->add_option("--impl", o.impl, "seq | naive | faun")->capture_default_str();
  cmd->add_option("--ranks", o.ranks, "in-process ranks p")->capture_default_str();
  cmd->add_option("--grid", o.grid, "processor grid PRxPC (default: automatic)");
  cmd->add_option("--seed", o.seed, "seed for data and initialization")
      ->capture_default_str();
  cmd->add_option("-k,--rank", o.k, "factorization rank")->capture_default_str();
  cmd->add_option("--iters", o.iters, "maximum iterations")->capture_default_str();
  cmd->add_option("--tolerance", o.tolerance,
                  "stop when an iteration improves the error by less than this");
  cmd->add_option("--input", o.input, "Matrix Market (.mtx) or CSV (.csv) file");
  cmd->add_option("--synthetic", o.synthetic,
                  "dense-lowrank [M N R] | sparse-uniform [M N DENSITY]")
      ->expected(1, 4);
  cmd->add_flag("--full-scale", o.full_scale,
                "full-scale synthetic sizes (207360 x 138240) instead of the desk-scale defaults");
  cmd->add_option("--max-memory-gb", o.max_memory_gb, "refuse larger requests")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distributed alternating-updating NMF (in-process ranks)", "faun"};
  app.require_subcommand(1);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "factorize one matrix");
  add_problem_flags(run_cmd, run);
  run_cmd->add_option("--trace", run.trace, "per-iteration error CSV (iter,rel_error)");
  run_cmd->add_option("--report", run.report, "time breakdown and counters JSON");
  run_cmd->add_option("--output", run.output, "directory for W and H");
  run_cmd->add_option("--format", run.format, "factor format: mm | csv")
      ->capture_default_str();

  CostOptions cost;
  auto* cost_cmd = app.add_subcommand("cost", "closed-form per-iteration costs");
  cost_cmd->add_option("--m", cost.m, "rows");
  cost_cmd->add_option("--n", cost.n, "columns");
  cost_cmd->add_option("-k,--rank", cost.k, "rank");
  cost_cmd->add_option("--p", cost.p, "processors")->capture_default_str();
  cost_cmd->add_option("--algo", cost.algo, "update kernel for F(m,n,k)")
      ->capture_default_str();
  cost_cmd->add_option("--grid", cost.grid, "faun grid (default: optimal)");
  cost_cmd->add_option("--alpha", cost.alpha, "seconds per message")->capture_default_str();
  cost_cmd->add_option("--beta", cost.beta, "seconds per word")->capture_default_str();
  cost_cmd->add_option("--gamma", cost.gamma, "seconds per flop")->capture_default_str();
  cost_cmd->add_option("--format", cost.format, "csv | json")->capture_default_str();
  cost_cmd->add_flag("--sweep", cost.sweep, "built-in lower-bound sweep");

  RunOptions sweep;
  std::string axis;
  std::vector<std::string> values;
  std::string sweep_out;
  auto* sweep_cmd = app.add_subcommand("sweep", "one run per configuration");
  add_problem_flags(sweep_cmd, sweep);
  sweep_cmd->add_option("--axis", axis, "ranks | k | grid")->required();
  sweep_cmd->add_option("--values", values, "comma separated values")->delimiter(',');
  sweep_cmd->add_option("--out", sweep_out, "CSV file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run, out);
    if (*cost_cmd) return cmd_cost(cost, out);
    return cmd_sweep(sweep, axis, values, sweep_out, out);
  } catch (const InvalidArgument& e) {
    err << "faun: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "faun: " << e.what() << "\n";
    return kRuntime;
  }
}

}  // namespace faun::cli
