#include "pdml/matrix.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pdml {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw std::invalid_argument("DenseMatrix: data size does not match shape");
  }
}

double& DenseMatrix::at(std::size_t i, std::size_t j) {
  if (i >= rows_ || j >= cols_) throw std::out_of_range("DenseMatrix::at");
  return data_[i * cols_ + j];
}

double DenseMatrix::at(std::size_t i, std::size_t j) const {
  if (i >= rows_ || j >= cols_) throw std::out_of_range("DenseMatrix::at");
  return data_[i * cols_ + j];
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimensions disagree (" +
                                std::to_string(a.cols()) + " vs " +
                                std::to_string(b.rows()) + ")");
  }
  DenseMatrix c(a.rows(), b.cols());
  // (i,k,j) loop order: same ascending-k accumulation per entry as the naive
  // triple loop, better locality on row-major data.
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.data().data() + k * b.cols();
      double* crow = c.data().data() + i * c.cols();
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

namespace {

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "add");
  DenseMatrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
  return c;
}

DenseMatrix sub(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "sub");
  DenseMatrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] -= b.data()[i];
  return c;
}

DenseMatrix scale(const DenseMatrix& a, double alpha) {
  DenseMatrix c = a;
  for (double& v : c.data()) v *= alpha;
  return c;
}

double frobenius_norm(const DenseMatrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

double frobenius_distance(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "frobenius_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::fabs(a.data()[i] - b.data()[i]);
    if (d > m) m = d;
  }
  return m;
}

double dot(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double norm2(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

double norm1(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += std::fabs(v);
  return s;
}

DenseMatrix take_rows(const DenseMatrix& a, const std::vector<std::size_t>& idx) {
  DenseMatrix out(idx.size(), a.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= a.rows()) throw std::out_of_range("take_rows: index out of range");
    auto src = a.row(idx[r]);
    auto dst = out.row(r);
    for (std::size_t j = 0; j < a.cols(); ++j) dst[j] = src[j];
  }
  return out;
}

DenseMatrix vstack(const std::vector<DenseMatrix>& blocks) {
  if (blocks.empty()) throw std::invalid_argument("vstack: no blocks");
  const std::size_t cols = blocks.front().cols();
  std::size_t rows = 0;
  for (const auto& b : blocks) {
    if (b.cols() != cols) throw std::invalid_argument("vstack: column mismatch");
    rows += b.rows();
  }
  DenseMatrix out(rows, cols);
  std::size_t r = 0;
  for (const auto& b : blocks) {
    for (std::size_t i = 0; i < b.rows(); ++i, ++r) {
      auto src = b.row(i);
      auto dst = out.row(r);
      for (std::size_t j = 0; j < cols; ++j) dst[j] = src[j];
    }
  }
  return out;
}

DenseMatrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev,
                            SeededRng& rng) {
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal(stddev);
  return m;
}

DenseMatrix uniform_matrix(std::size_t rows, std::size_t cols, SeededRng& rng) {
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = rng.real01();
  return m;
}

}  // namespace pdml
