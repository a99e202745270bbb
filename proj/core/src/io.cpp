#include "pdml/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "pdml/errors.hpp"

namespace pdml {
namespace {

[[noreturn]] void parse_fail(const std::string& path, std::size_t line,
                             std::size_t col, const std::string& what) {
  throw DataError(path + ":" + std::to_string(line) + ":" +
                  std::to_string(col) + ": " + what);
}

// One csv cell at 1-based (line, col) for error reporting.
double parse_cell(const std::string& cell, const std::string& path,
                  std::size_t line, std::size_t col) {
  std::size_t consumed = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &consumed);
  } catch (const std::exception&) {
    parse_fail(path, line, col, "not a number: '" + cell + "'");
  }
  // Allow trailing spaces only.
  for (std::size_t i = consumed; i < cell.size(); ++i) {
    if (!std::isspace(static_cast<unsigned char>(cell[i]))) {
      parse_fail(path, line, col, "trailing garbage: '" + cell + "'");
    }
  }
  if (std::isnan(v)) parse_fail(path, line, col, "NaN entry");
  return v;
}

DenseMatrix load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("load_matrix: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream cells(line);
    std::string cell;
    std::size_t col_no = 0;
    while (std::getline(cells, cell, ',')) {
      ++col_no;
      row.push_back(parse_cell(cell, path, line_no, col_no));
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      parse_fail(path, line_no, row.size(), "expected " +
                 std::to_string(rows.front().size()) + " columns, got " +
                 std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("load_matrix: " + path + " has no rows");
  DenseMatrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  }
  return m;
}

DenseMatrix load_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("load_matrix: cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) parse_fail(path, 1, 1, "empty file");
  ++line_no;
  std::istringstream banner(line);
  std::string magic, object, layout, field, symmetry;
  banner >> magic >> object >> layout >> field >> symmetry;
  if (magic != "%%MatrixMarket" || object != "matrix") {
    parse_fail(path, 1, 1, "not a matrix-market file");
  }
  const bool coordinate = layout == "coordinate";
  if (!coordinate && layout != "array") {
    parse_fail(path, 1, 1, "unsupported layout '" + layout + "'");
  }
  if (field != "real" && field != "integer") {
    parse_fail(path, 1, 1, "unsupported field '" + field + "'");
  }
  if (symmetry != "general") {
    parse_fail(path, 1, 1, "unsupported symmetry '" + symmetry + "'");
  }
  // Skip comments, then read the size line.
  do {
    if (!std::getline(in, line)) parse_fail(path, line_no, 1, "missing size line");
    ++line_no;
  } while (!line.empty() && line[0] == '%');
  std::istringstream size_line(line);
  std::size_t rows = 0, cols = 0, nnz = 0;
  if (!(size_line >> rows >> cols)) parse_fail(path, line_no, 1, "bad size line");
  if (coordinate && !(size_line >> nnz)) {
    parse_fail(path, line_no, 1, "coordinate size line needs an entry count");
  }
  if (rows == 0 || cols == 0) parse_fail(path, line_no, 1, "empty dimensions");

  DenseMatrix m(rows, cols);
  if (coordinate) {
    std::vector<bool> seen(rows * cols, false);
    for (std::size_t e = 0; e < nnz; ++e) {
      do {
        if (!std::getline(in, line)) {
          parse_fail(path, line_no, 1, "expected " + std::to_string(nnz) +
                     " entries, got " + std::to_string(e));
        }
        ++line_no;
      } while (line.empty() || line[0] == '%');
      std::istringstream entry(line);
      std::size_t i = 0, j = 0;
      double v = 0.0;
      if (!(entry >> i >> j >> v)) parse_fail(path, line_no, 1, "bad entry line");
      if (i < 1 || i > rows || j < 1 || j > cols) {
        parse_fail(path, line_no, 1, "index out of range");
      }
      if (std::isnan(v)) parse_fail(path, line_no, 3, "NaN entry");
      if (seen[(i - 1) * cols + (j - 1)]) {
        parse_fail(path, line_no, 1, "duplicate entry for (" +
                   std::to_string(i) + ", " + std::to_string(j) + ")");
      }
      seen[(i - 1) * cols + (j - 1)] = true;
      m(i - 1, j - 1) = v;
    }
  } else {
    // Array layout stores dense values column-major.
    for (std::size_t j = 0; j < cols; ++j) {
      for (std::size_t i = 0; i < rows; ++i) {
        do {
          if (!std::getline(in, line)) {
            parse_fail(path, line_no, 1, "truncated array data");
          }
          ++line_no;
        } while (line.empty() || line[0] == '%');
        std::istringstream entry(line);
        double v = 0.0;
        if (!(entry >> v)) parse_fail(path, line_no, 1, "bad value line");
        if (std::isnan(v)) parse_fail(path, line_no, 1, "NaN entry");
        m(i, j) = v;
      }
    }
  }
  return m;
}

}  // namespace

MatrixFormat detect_matrix_format(const std::string& path) {
  const std::size_t dot = path.rfind('.');
  if (dot != std::string::npos && path.substr(dot) == ".mtx") {
    return MatrixFormat::MatrixMarket;
  }
  return MatrixFormat::Csv;
}

DenseMatrix load_matrix(const std::string& path, MatrixFormat format) {
  return format == MatrixFormat::Csv ? load_csv(path)
                                     : load_matrix_market(path);
}

DenseMatrix load_matrix(const std::string& path) {
  return load_matrix(path, detect_matrix_format(path));
}

void require_nonnegative(const DenseMatrix& m, const std::string& what) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (m(i, j) < 0.0) {
        throw DataError(what + ": negative entry at row " + std::to_string(i) +
                        ", col " + std::to_string(j));
      }
    }
  }
}

std::vector<DenseMatrix> partition_indexed(
    const DenseMatrix& x, std::size_t parties, double fraction, SeededRng& rng,
    PartitionMode mode, std::vector<std::vector<std::size_t>>* indices) {
  if (parties == 0) throw ConfigError("partition: need at least one party");
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw ConfigError("partition: fraction must be in (0, 1]");
  }
  const std::size_t n = x.rows();
  const auto per_party = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(n)));
  if (per_party == 0) throw ConfigError("partition: parties would be empty");
  if (mode == PartitionMode::Disjoint && parties * per_party > n) {
    throw ConfigError("partition: " + std::to_string(parties) + " parties of " +
                      std::to_string(per_party) + " rows need more than " +
                      std::to_string(n) + " available rows");
  }

  std::vector<std::vector<std::size_t>> chosen(parties);
  if (mode == PartitionMode::Disjoint) {
    const std::vector<std::size_t> perm = rng.permutation(n);
    for (std::size_t m = 0; m < parties; ++m) {
      chosen[m].assign(perm.begin() + static_cast<std::ptrdiff_t>(m * per_party),
                       perm.begin() + static_cast<std::ptrdiff_t>((m + 1) * per_party));
    }
  } else {
    if (per_party > n) throw ConfigError("partition: fraction too large");
    for (std::size_t m = 0; m < parties; ++m) {
      const std::vector<std::size_t> perm = rng.permutation(n);
      chosen[m].assign(perm.begin(),
                       perm.begin() + static_cast<std::ptrdiff_t>(per_party));
    }
  }

  std::vector<DenseMatrix> blocks;
  blocks.reserve(parties);
  for (std::size_t m = 0; m < parties; ++m) {
    blocks.push_back(take_rows(x, chosen[m]));
  }
  if (indices != nullptr) *indices = std::move(chosen);
  return blocks;
}

std::vector<DenseMatrix> partition(const DenseMatrix& x, std::size_t parties,
                                   double fraction, SeededRng& rng,
                                   PartitionMode mode) {
  return partition_indexed(x, parties, fraction, rng, mode, nullptr);
}

DenseMatrix tfidf_transform(const DenseMatrix& counts) {
  const std::size_t n = counts.rows();
  const std::size_t d = counts.cols();
  std::vector<double> idf(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    std::size_t df = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (counts(i, j) > 0.0) ++df;
    }
    idf[j] = std::log((1.0 + static_cast<double>(n)) /
                      (1.0 + static_cast<double>(df))) + 1.0;
  }
  DenseMatrix out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      out(i, j) = counts(i, j) * idf[j];
    }
  }
  return out;
}

}  // namespace pdml
