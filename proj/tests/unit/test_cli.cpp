#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "faun");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = faun::cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "faun_cli_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

// CSV rows as column-name -> value maps.
std::vector<std::map<std::string, std::string>> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> head;
  {
    std::istringstream h(line);
    std::string cell;
    while (std::getline(h, cell, ',')) head.push_back(cell);
  }
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream r(line);
    std::string cell;
    std::map<std::string, std::string> row;
    for (const auto& h : head) {
      std::getline(r, cell, ',');
      row[h] = cell;
    }
    rows.push_back(row);
  }
  return rows;
}

const std::vector<std::string> kSmall = {"--synthetic", "dense-lowrank", "48", "32", "4",
                                         "-k", "4", "--iters", "10", "--seed", "7"};

std::vector<std::string> with(std::vector<std::string> head,
                              const std::vector<std::string>& tail = kSmall) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

}  // namespace

TEST_CASE("run writes a monotone trace and a report with the breakdown keys") {
  const auto trace = scratch("t.csv"), report = scratch("r.json");
  const auto r = cli(with({"run", "--algo", "bpp", "--impl", "faun", "--ranks", "4", "--grid",
                           "2x2", "--trace", trace.string(), "--report", report.string()}));
  REQUIRE(r.code == 0);
  const auto rows = parse_csv(slurp(trace));
  REQUIRE(rows.size() == 10);
  double prev = 1e300;
  for (const auto& row : rows) {
    const double e = std::stod(row.at("rel_error"));
    CHECK(e <= prev + 1e-10);
    prev = e;
  }
  const auto j = nlohmann::json::parse(slurp(report));
  std::vector<std::string> keys;
  for (const auto& [k, v] : j["breakdown"].items()) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  CHECK(keys == std::vector<std::string>{"allgather", "allreduce", "gram", "luc", "mm",
                                         "reducescatter"});
  CHECK(j["words_per_iteration"].get<double>() == j["model"]["words"].get<double>());
  CHECK(j["config"]["grid"] == "2x2");
}

TEST_CASE("seq and faun on one rank give identical traces") {
  const auto a = scratch("seq.csv"), b = scratch("faun1.csv");
  REQUIRE(cli(with({"run", "--impl", "seq", "--algo", "hals", "--trace", a.string()})).code == 0);
  REQUIRE(cli(with({"run", "--impl", "faun", "--ranks", "1", "--algo", "hals", "--trace",
                    b.string()}))
              .code == 0);
  CHECK(slurp(a) == slurp(b));
}

TEST_CASE("factor output in both formats") {
  const auto dir = scratch("factors");
  fs::remove_all(dir);
  REQUIRE(cli(with({"run", "--impl", "naive", "--ranks", "2", "--output", dir.string(),
                    "--format", "csv"}))
              .code == 0);
  CHECK(fs::exists(dir / "W.csv"));
  CHECK(fs::exists(dir / "H.csv"));
  REQUIRE(cli(with({"run", "--output", dir.string()})).code == 0);
  CHECK(fs::exists(dir / "W.mtx"));
}

TEST_CASE("exit codes") {
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({}).code == 1);
  CHECK(cli({"run", "--bogus"}).code == 1);
  const auto bad_grid = cli(with({"run", "--ranks", "4", "--grid", "3x1"}));
  CHECK(bad_grid.code == 1);
  CHECK(bad_grid.err.find("3x1") != std::string::npos);
  const auto missing = cli({"run", "--input", "/nonexistent/matrix.mtx", "-k", "2"});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("/nonexistent/matrix.mtx") != std::string::npos);
  CHECK(cli(with({"run", "-k", "100"})).code == 1);
  CHECK(cli({"run", "--full-scale", "--synthetic", "dense-lowrank"}).code == 1);
}

TEST_CASE("malformed input reports the line") {
  const auto p = scratch("bad.mtx");
  std::ofstream(p) << "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 q 1\n";
  const auto r = cli({"run", "--input", p.string(), "-k", "1"});
  CHECK(r.code == 2);
  CHECK(r.err.find(":3:") != std::string::npos);
}

TEST_CASE("cost finds the optimal grid for a large problem") {
  const auto r = cli({"cost", "--m", "172800", "--n", "115200", "-k", "50", "--p", "1536"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("48x32") != std::string::npos);
  const auto j = cli({"cost", "--m", "172800", "--n", "115200", "-k", "50", "--p", "1536",
                      "--format", "json"});
  CHECK(nlohmann::json::parse(j.out)["optimal_grid"] == "48x32");
  const auto one = parse_csv(cli({"cost", "--m", "100", "--n", "80", "-k", "5", "--p", "1"}).out);
  REQUIRE(one.size() == 2);
  for (const auto& row : one) CHECK(std::stod(row.at("words")) == 0.0);
}

TEST_CASE("cost sweep ratios stay within 8") {
  const auto rows = parse_csv(cli({"cost", "--sweep"}).out);
  REQUIRE(!rows.empty());
  for (const auto& row : rows) CHECK(std::stod(row.at("ratio")) <= 8.0);
}

TEST_CASE("grid sweep is minimized at the automatic grid") {
  const auto rows = parse_csv(
      cli({"sweep", "--axis", "grid", "--impl", "faun", "--ranks", "16", "--algo", "mu",
           "--synthetic", "dense-lowrank", "256", "160", "8", "-k", "8", "--iters", "1"})
          .out);
  REQUIRE(rows.size() == 5);
  double best = 1e300, at_auto = -1;
  for (const auto& row : rows) {
    const double w = std::stod(row.at("words_per_iter"));
    best = std::min(best, w);
    if (row.at("auto_grid") == "1") at_auto = w;
  }
  CHECK(at_auto == best);
}

TEST_CASE("k sweep: all-gather words grow like k for both algorithms") {
  // Words are linear in k for a fixed grid; sqrt(k)-like growth appears
  // only when the grid is re-optimized per k.
  for (const std::string impl : {"faun", "naive"}) {
    const auto rows = parse_csv(
        cli({"sweep", "--axis", "k", "--values", "2,4,8", "--impl", impl, "--ranks", "4",
             "--algo", "mu", "--synthetic", "dense-lowrank", "64", "64", "8", "--iters", "1"})
            .out);
    REQUIRE(rows.size() == 3);
    const double w2 = std::stod(rows[0].at("allgather_words_per_iter"));
    CHECK(std::stod(rows[1].at("allgather_words_per_iter")) == 2 * w2);
    CHECK(std::stod(rows[2].at("allgather_words_per_iter")) == 4 * w2);
  }
}

TEST_CASE("ranks sweep halves per-rank matrix-multiply flops") {
  const auto rows = parse_csv(
      cli({"sweep", "--axis", "ranks", "--values", "1,2,4", "--impl", "faun", "--algo", "mu",
           "--synthetic", "dense-lowrank", "64", "64", "8", "-k", "4", "--iters", "1"})
          .out);
  REQUIRE(rows.size() == 3);
  const double f1 = std::stod(rows[0].at("flops_per_iter"));
  const double f2 = std::stod(rows[1].at("flops_per_iter"));
  const double f4 = std::stod(rows[2].at("flops_per_iter"));
  CHECK(f2 == doctest::Approx(f1 / 2).epsilon(0.02));
  CHECK(f4 == doctest::Approx(f2 / 2).epsilon(0.02));
}
