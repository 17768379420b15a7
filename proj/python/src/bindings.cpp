// numpy-facing wrappers around the C++ library.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "faun/cost.hpp"
#include "faun/dist.hpp"
#include "faun/engine.hpp"
#include "faun/errors.hpp"
#include "faun/io.hpp"

namespace py = pybind11;
using namespace faun;

namespace {

using FArray = py::array_t<double, py::array::f_style | py::array::forcecast>;

DenseMatrix to_dense(const FArray& a) {
  if (a.ndim() != 2) throw InvalidArgument("expected a 2-D array");
  const Index r = a.shape(0), c = a.shape(1);
  return DenseMatrix(r, c, std::vector<double>(a.data(), a.data() + r * c));
}

FArray to_numpy(const DenseMatrix& m) {
  FArray out({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

py::dict trace_dict(const IterationTrace& t) {
  std::vector<double> errors;
  CommCounters comm;
  for (const auto& it : t.iterations) {
    errors.push_back(it.rel_error);
    comm += it.comm;
  }
  const PhaseTimes times = t.total_times();
  py::dict breakdown;
  breakdown["mm"] = times.mm;
  breakdown["luc"] = times.luc;
  breakdown["gram"] = times.gram;
  breakdown["allgather"] = times.all_gather;
  breakdown["reducescatter"] = times.reduce_scatter;
  breakdown["allreduce"] = times.all_reduce;
  py::dict d;
  d["initial_error"] = t.initial_error;
  d["errors"] = errors;
  d["breakdown"] = breakdown;
  d["words"] = comm.words();
  d["messages"] = comm.messages();
  return d;
}

py::tuple nmf(const FArray& a, Index k, const std::string& algo, Index iters,
              std::uint64_t seed, const std::string& impl, int ranks,
              const std::string& grid) {
  const DataMatrix data = to_dense(a);
  const NmfConfig cfg{k, iters, parse_algo(algo), seed, {}};
  Factors f;
  IterationTrace trace;
  {
    py::gil_scoped_release release;
    if (impl == "seq") {
      NmfResult r = aunmf_run(data, cfg);
      f = std::move(r.factors);
      trace = std::move(r.trace);
    } else if (impl == "faun" || impl == "naive") {
      std::optional<ProcessorGrid> g;
      if (!grid.empty()) g = parse_grid(grid);
      DistributedResult r = run_distributed(
          data, cfg, ranks, impl == "faun" ? Distribution::kTwoD : Distribution::kNaive, g);
      f = std::move(r.factors);
      trace = std::move(r.trace);
    } else {
      throw InvalidArgument("impl must be seq, naive or faun");
    }
  }
  return py::make_tuple(to_numpy(f.W), to_numpy(f.H), trace_dict(trace));
}

py::dict cost(const std::string& algo, Index m, Index n, Index k, int p,
              std::optional<std::pair<int, int>> grid, const std::string& kernel) {
  const ParallelAlgo pa = algo == "naive" ? ParallelAlgo::kNaive : ParallelAlgo::kFaun;
  if (algo != "naive" && algo != "faun") throw InvalidArgument("algo must be naive or faun");
  const ProcessorGrid g = grid ? ProcessorGrid{grid->first, grid->second}
                          : pa == ParallelAlgo::kNaive ? ProcessorGrid{p, 1}
                                                       : optimize_grid_exhaustive(m, n, k, p);
  const CostReport r = per_iter_cost(pa, m, n, k, p, g, LucFlopModel{parse_algo(kernel)});
  py::dict d;
  d["grid"] = py::make_tuple(g.rows, g.cols);
  d["flops"] = r.flops;
  d["words"] = r.words;
  d["messages"] = r.messages;
  d["memory_words"] = r.memory_words;
  d["luc_surrogate"] = r.luc_surrogate;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "Alternating-updating NMF with in-process distributed ranks";

  py::register_exception<InvalidArgument>(mod, "InvalidArgument", PyExc_ValueError);
  py::register_exception<ParseError>(mod, "ParseError", PyExc_ValueError);
  py::register_exception<IoError>(mod, "IoError", PyExc_OSError);
  py::register_exception<NoConvergence>(mod, "NoConvergence", PyExc_RuntimeError);

  mod.def("nmf", &nmf, py::arg("a"), py::arg("k"), py::arg("algo") = "bpp",
          py::arg("iters") = 10, py::arg("seed") = 0, py::arg("impl") = "seq",
          py::arg("ranks") = 1, py::arg("grid") = "",
          "Factorize a nonnegative matrix; returns (W, H, trace).");
  mod.def("cost", &cost, py::arg("algo"), py::arg("m"), py::arg("n"), py::arg("k"),
          py::arg("p"), py::arg("grid") = py::none(), py::arg("kernel") = "mu",
          "Modeled per-iteration costs of one rank.");
  mod.def(
      "make_grid",
      [](Index m, Index n, int p) {
        const ProcessorGrid g = make_grid(m, n, p);
        return py::make_tuple(g.rows, g.cols);
      },
      py::arg("m"), py::arg("n"), py::arg("p"));
  mod.def("bandwidth_lower_bound", &bandwidth_lower_bound, py::arg("m"), py::arg("n"),
          py::arg("k"), py::arg("p"));
  mod.def(
      "gen_dense_lowrank",
      [](Index m, Index n, Index r, std::uint64_t seed) {
        return to_numpy(gen_dense_lowrank(m, n, r, seed));
      },
      py::arg("m"), py::arg("n"), py::arg("r"), py::arg("seed"));
  mod.def(
      "gen_sparse_uniform",
      [](Index m, Index n, double density, std::uint64_t seed) {
        return to_numpy(gen_sparse_uniform(m, n, density, seed).to_dense());
      },
      py::arg("m"), py::arg("n"), py::arg("density"), py::arg("seed"),
      "Sparse synthetic matrix, returned densified.");
  mod.def(
      "read_matrix",
      [](const std::string& path) {
        const MatrixFile f = read_matrix(path);
        return std::visit(
            [](const auto& m) {
              if constexpr (std::is_same_v<std::decay_t<decltype(m)>, SparseMatrix>) {
                return to_numpy(m.to_dense());
              } else {
                return to_numpy(m);
              }
            },
            f.matrix);
      },
      py::arg("path"), "Matrix Market or CSV file as a dense array.");
  mod.def(
      "relative_error",
      [](const FArray& a, const FArray& w, const FArray& h) {
        const DenseMatrix am = to_dense(a), wm = to_dense(w), hm = to_dense(h);
        return relative_error(frobenius_sq(am), gram(wm), gram_of_columns(hm),
                              inner_product(mm_wt_a(wm, am), hm));
      },
      py::arg("a"), py::arg("w"), py::arg("h"));
}
