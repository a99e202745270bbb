#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pdml/matrix.hpp"
#include "pdml/rng.hpp"

namespace pdml {

// Dataset ingestion and party partitioning for the experiment drivers.

enum class MatrixFormat { Csv, MatrixMarket };

// Format from a file name: .mtx means matrix-market, anything else csv.
MatrixFormat detect_matrix_format(const std::string& path);

// Parses a dense matrix. Csv: one row per line, comma-separated numbers.
// Matrix-market: "coordinate" or "array" layout, real or integer field,
// general symmetry only. Malformed input raises a data error naming the
// line and column; NaN entries are always rejected.
DenseMatrix load_matrix(const std::string& path, MatrixFormat format);
DenseMatrix load_matrix(const std::string& path);  // format from extension

// Rejects matrices with negative entries (factorization inputs must be
// nonnegative); `what` names the destination in the error message.
void require_nonnegative(const DenseMatrix& m, const std::string& what);

enum class PartitionMode {
  Disjoint,     // parties draw without replacement from a shared permutation
  Independent,  // each party draws its rows independently (overlap allowed)
};

// Splits X into `parties` local databases of ceil(fraction * rows) rows
// each, drawn without replacement within a party. Disjoint mode requires
// parties * ceil(fraction * rows) <= rows.
std::vector<DenseMatrix> partition(const DenseMatrix& x, std::size_t parties,
                                   double fraction, SeededRng& rng,
                                   PartitionMode mode = PartitionMode::Disjoint);

// Same split, but also reports the chosen row indices per party.
std::vector<DenseMatrix> partition_indexed(
    const DenseMatrix& x, std::size_t parties, double fraction, SeededRng& rng,
    PartitionMode mode, std::vector<std::vector<std::size_t>>* indices);

// Term-frequency re-weighting with the party's own document frequencies:
// out_ij = x_ij * (ln((1 + n) / (1 + df_j)) + 1) where df_j counts the
// party's rows with x_ij > 0. Nonnegative input stays nonnegative.
DenseMatrix tfidf_transform(const DenseMatrix& counts);

}  // namespace pdml
