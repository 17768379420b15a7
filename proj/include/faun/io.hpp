#ifndef FAUN_IO_HPP_
#define FAUN_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>

#include "faun/matrix.hpp"

namespace faun {

struct MatrixFile {
  DataMatrix matrix;
  /// Set when some stored value is negative (NMF expects A >= 0).
  bool has_negative = false;
};

/**
 * Matrix Market reader. "coordinate" files become SparseMatrix (duplicates
 * summed, pattern entries = 1.0), "array" files DenseMatrix. Supports the
 * real / integer / pattern fields and general / symmetric symmetry.
 * Throws IoError if the file cannot be opened, ParseError (with line) on
 * malformed content.
 */
MatrixFile read_matrix_market(const std::filesystem::path& path);

/// Writes "array" (dense) or "coordinate" (sparse) with 17 significant
/// digits, so reading back is lossless.
void write_matrix_market(const std::filesystem::path& path,
                         const DataMatrix& m);

/// CSV: header line "rows,cols", then "<rows>,<cols>", then one value per
/// line in column-major order.
DenseMatrix read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const DenseMatrix& m);

/// Reads .csv as CSV and anything else as Matrix Market.
MatrixFile read_matrix(const std::filesystem::path& path);

/// Product of m x r and r x n uniform [0,1) factors (streams kLowRankLeft,
/// kLowRankRight of CounterRng(seed)). Requires 1 <= r <= min(m, n).
DenseMatrix gen_dense_lowrank(Index m, Index n, Index r, std::uint64_t seed);

/**
 * Erdos-Renyi pattern: entry (i, j) is stored iff
 * uniform(kSparsePattern, i, j) < density; its value is
 * 1 - uniform(kSparseValue, i, j), which lies in (0, 1].
 */
SparseMatrix gen_sparse_uniform(Index m, Index n, double density,
                                std::uint64_t seed);

enum class FactorFormat { kMatrixMarket, kCsv };

struct FactorPaths {
  std::filesystem::path w;
  std::filesystem::path h;
};

/// Writes W.mtx/H.mtx (or W.csv/H.csv) into `dir`, creating it if needed.
FactorPaths write_factors(const DenseMatrix& w, const DenseMatrix& h,
                          const std::filesystem::path& dir,
                          FactorFormat format);

struct Padded {
  DataMatrix matrix;
  Index rows = 0;  ///< original dims
  Index cols = 0;
};

/// Appends zero rows / columns until p divides both dimensions.
Padded pad_to_grid(const DataMatrix& m, int p);

/// Zero-extends to exactly rows x cols (>= the current dims).
DataMatrix pad_to(const DataMatrix& m, Index rows, Index cols);

}  // namespace faun

#endif  // FAUN_IO_HPP_
