#include "faun/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "faun/errors.hpp"
#include "faun/random.hpp"

namespace fs = std::filesystem;

namespace faun {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string> tokens(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

// Line reader that tracks 1-based line numbers and skips MM comments.
class LineReader {
 public:
  LineReader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  bool next(std::string& line, bool skip_comments = true) {
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (skip_comments && (blank(line) || line[0] == '%')) continue;
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(path_, line_no_, what);
  }
  std::size_t line() const noexcept { return line_no_; }

 private:
  std::istream& in_;
  std::string path_;
  std::size_t line_no_ = 0;
};

double parse_real(const std::string& s, const LineReader& rd) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  if (*b == '+') ++b;
  const auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) rd.fail("expected a number, got '" + s + "'");
  return v;
}

Index parse_count(const std::string& s, const LineReader& rd, Index lo) {
  Index v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v < lo) {
    rd.fail("expected an integer >= " + std::to_string(lo) + ", got '" + s + "'");
  }
  return v;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

MatrixFile read_matrix_market(const fs::path& path) {
  std::ifstream in = open_in(path);
  LineReader rd(in, path.string());
  std::string line;
  if (!rd.next(line, false)) rd.fail("empty file");
  const auto head = tokens(lower(line));
  if (head.size() != 5 || head[0] != "%%matrixmarket" || head[1] != "matrix") {
    rd.fail("expected '%%MatrixMarket matrix <format> <field> <symmetry>'");
  }
  const std::string& format = head[2];
  const std::string& field = head[3];
  const std::string& sym = head[4];
  if (format != "coordinate" && format != "array") rd.fail("unknown format '" + format + "'");
  if (field != "real" && field != "integer" && field != "double" && field != "pattern") {
    rd.fail("unsupported field '" + field + "'");
  }
  if (field == "pattern" && format == "array") rd.fail("pattern requires coordinate format");
  if (sym != "general" && sym != "symmetric") rd.fail("unsupported symmetry '" + sym + "'");
  const bool symmetric = sym == "symmetric";

  if (!rd.next(line)) rd.fail("missing size line");
  const auto size = tokens(line);
  MatrixFile out;

  if (format == "array") {
    if (size.size() != 2) rd.fail("array size line needs 'rows cols'");
    const Index rows = parse_count(size[0], rd, 1);
    const Index cols = parse_count(size[1], rd, 1);
    if (symmetric && rows != cols) rd.fail("symmetric matrix must be square");
    DenseMatrix m(rows, cols);
    // Symmetric arrays list the lower triangle column by column.
    for (Index c = 0; c < cols; ++c) {
      for (Index r = symmetric ? c : 0; r < rows; ++r) {
        if (!rd.next(line)) rd.fail("expected more values");
        const auto t = tokens(line);
        if (t.size() != 1) rd.fail("expected one value per line");
        const double v = parse_real(t[0], rd);
        m(r, c) = v;
        if (symmetric) m(c, r) = v;
        out.has_negative = out.has_negative || v < 0.0;
      }
    }
    if (rd.next(line)) rd.fail("unexpected trailing data");
    out.matrix = std::move(m);
    return out;
  }

  if (size.size() != 3) rd.fail("coordinate size line needs 'rows cols nnz'");
  const Index rows = parse_count(size[0], rd, 1);
  const Index cols = parse_count(size[1], rd, 1);
  const Index nnz = parse_count(size[2], rd, 0);
  if (symmetric && rows != cols) rd.fail("symmetric matrix must be square");
  std::vector<SparseMatrix::Triplet> trips;
  trips.reserve(static_cast<std::size_t>(symmetric ? 2 * nnz : nnz));
  const std::size_t want = field == "pattern" ? 2 : 3;
  for (Index e = 0; e < nnz; ++e) {
    if (!rd.next(line)) rd.fail("expected " + std::to_string(nnz) + " entries");
    const auto t = tokens(line);
    if (t.size() != want) rd.fail("entry needs " + std::to_string(want) + " fields");
    const Index r = parse_count(t[0], rd, 1) - 1;
    const Index c = parse_count(t[1], rd, 1) - 1;
    if (r >= rows || c >= cols) rd.fail("index out of range");
    const double v = field == "pattern" ? 1.0 : parse_real(t[2], rd);
    out.has_negative = out.has_negative || v < 0.0;
    trips.push_back({r, c, v});
    if (symmetric && r != c) trips.push_back({c, r, v});
  }
  if (rd.next(line)) rd.fail("unexpected trailing data");
  out.matrix = SparseMatrix::from_triplets(rows, cols, std::move(trips));
  return out;
}

void write_matrix_market(const fs::path& path, const DataMatrix& m) {
  std::ofstream out = open_out(path);
  if (const auto* d = std::get_if<DenseMatrix>(&m)) {
    out << "%%MatrixMarket matrix array real general\n";
    out << d->rows() << ' ' << d->cols() << '\n';
    for (double v : d->values()) out << fmt17(v) << '\n';
  } else {
    const auto& s = std::get<SparseMatrix>(m);
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << s.rows() << ' ' << s.cols() << ' ' << s.nnz() << '\n';
    for (Index c = 0; c < s.cols(); ++c)
      for (Index q = s.col_ptr()[c]; q < s.col_ptr()[c + 1]; ++q)
        out << s.row_idx()[q] + 1 << ' ' << c + 1 << ' ' << fmt17(s.values()[q])
            << '\n';
  }
  finish(out, path);
}

DenseMatrix read_csv(const fs::path& path) {
  std::ifstream in = open_in(path);
  LineReader rd(in, path.string());
  std::string line;
  if (!rd.next(line, false) || lower(line) != "rows,cols") {
    rd.fail("expected header 'rows,cols'");
  }
  if (!rd.next(line, false)) rd.fail("missing dimension line");
  const auto comma = line.find(',');
  if (comma == std::string::npos) rd.fail("dimension line needs 'rows,cols'");
  const Index rows = parse_count(line.substr(0, comma), rd, 1);
  const Index cols = parse_count(line.substr(comma + 1), rd, 1);
  DenseMatrix m(rows, cols);
  for (double& v : m.values()) {
    if (!rd.next(line, false)) rd.fail("expected more values");
    const auto t = tokens(line);
    if (t.size() != 1) rd.fail("expected one value per line");
    v = parse_real(t[0], rd);
  }
  while (rd.next(line, false))
    if (!blank(line)) rd.fail("unexpected trailing data");
  return m;
}

void write_csv(const fs::path& path, const DenseMatrix& m) {
  std::ofstream out = open_out(path);
  out << "rows,cols\n" << m.rows() << ',' << m.cols() << '\n';
  for (double v : m.values()) out << fmt17(v) << '\n';
  finish(out, path);
}

MatrixFile read_matrix(const fs::path& path) {
  if (lower(path.extension().string()) == ".csv") return {read_csv(path), false};
  return read_matrix_market(path);
}

DenseMatrix gen_dense_lowrank(Index m, Index n, Index r, std::uint64_t seed) {
  if (m < 1 || n < 1 || r < 1 || r > std::min(m, n)) {
    throw InvalidArgument("gen_dense_lowrank: need 1 <= r <= min(m, n)");
  }
  const CounterRng rng(seed);
  DenseMatrix left(m, r);
  for (Index c = 0; c < r; ++c)
    for (Index i = 0; i < m; ++i)
      left(i, c) = rng.uniform(streams::kLowRankLeft, static_cast<std::uint64_t>(i),
                               static_cast<std::uint64_t>(c));
  DenseMatrix right(r, n);
  for (Index j = 0; j < n; ++j)
    for (Index c = 0; c < r; ++c)
      right(c, j) = rng.uniform(streams::kLowRankRight, static_cast<std::uint64_t>(c),
                                static_cast<std::uint64_t>(j));
  return mm_a_h(DataMatrix(std::move(left)), transpose(right));
}

SparseMatrix gen_sparse_uniform(Index m, Index n, double density,
                                std::uint64_t seed) {
  if (m < 1 || n < 1) throw InvalidArgument("gen_sparse_uniform: dims must be >= 1");
  if (!(density > 0.0 && density <= 1.0)) {
    throw InvalidArgument("gen_sparse_uniform: density must be in (0, 1]");
  }
  const CounterRng rng(seed);
  std::vector<Index> ptr{0};
  std::vector<Index> idx;
  std::vector<double> val;
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < m; ++i) {
      const auto ui = static_cast<std::uint64_t>(i);
      const auto uj = static_cast<std::uint64_t>(j);
      if (rng.uniform(streams::kSparsePattern, ui, uj) < density) {
        idx.push_back(i);
        val.push_back(1.0 - rng.uniform(streams::kSparseValue, ui, uj));
      }
    }
    ptr.push_back(static_cast<Index>(idx.size()));
  }
  return SparseMatrix(m, n, std::move(ptr), std::move(idx), std::move(val));
}

FactorPaths write_factors(const DenseMatrix& w, const DenseMatrix& h,
                          const fs::path& dir, FactorFormat format) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
  }
  const std::string ext = format == FactorFormat::kCsv ? ".csv" : ".mtx";
  FactorPaths paths{dir / ("W" + ext), dir / ("H" + ext)};
  if (format == FactorFormat::kCsv) {
    write_csv(paths.w, w);
    write_csv(paths.h, h);
  } else {
    write_matrix_market(paths.w, w);
    write_matrix_market(paths.h, h);
  }
  return paths;
}

DataMatrix pad_to(const DataMatrix& m, Index rows, Index cols) {
  if (rows < rows_of(m) || cols < cols_of(m)) {
    throw InvalidArgument("pad_to: target is smaller than the matrix");
  }
  if (rows == rows_of(m) && cols == cols_of(m)) return m;
  if (const auto* d = std::get_if<DenseMatrix>(&m)) {
    DenseMatrix out(rows, cols);
    for (Index c = 0; c < d->cols(); ++c)
      std::copy(d->col(c).begin(), d->col(c).end(), out.data() + c * rows);
    return out;
  }
  const auto& s = std::get<SparseMatrix>(m);
  std::vector<Index> ptr(s.col_ptr().begin(), s.col_ptr().end());
  ptr.resize(static_cast<std::size_t>(cols + 1), s.nnz());
  return SparseMatrix(rows, cols, std::move(ptr),
                      {s.row_idx().begin(), s.row_idx().end()},
                      {s.values().begin(), s.values().end()});
}

Padded pad_to_grid(const DataMatrix& m, int p) {
  if (p < 1) throw InvalidArgument("pad_to_grid: p must be >= 1");
  const Index rows = rows_of(m), cols = cols_of(m);
  const auto up = [p](Index x) { return (x + p - 1) / p * p; };
  return {pad_to(m, up(rows), up(cols)), rows, cols};
}

}  // namespace faun
