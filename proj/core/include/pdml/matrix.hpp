#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pdml/rng.hpp"

namespace pdml {

// Dense row-major real matrix. Every reduction over entries (matmul, norms,
// dot products) runs in a fixed row-major, left-to-right order so that
// distributed and centralized runs of the same arithmetic round identically.
// This is a deliberately small kernel; BLAS-grade performance is a non-goal.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  // Bounds-checked access; throws std::out_of_range.
  double& at(std::size_t i, std::size_t j);
  double at(std::size_t i, std::size_t j) const;

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const DenseMatrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// C = A * B. Accumulates each C(i,j) over k in ascending order; shape
// mismatch raises std::invalid_argument.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

DenseMatrix transpose(const DenseMatrix& a);

// A + B, A - B, alpha * A.
DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix sub(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix scale(const DenseMatrix& a, double alpha);

double frobenius_norm(const DenseMatrix& a);
double frobenius_distance(const DenseMatrix& a, const DenseMatrix& b);

// Largest absolute entry difference; shapes must match.
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);

double dot(std::span<const double> x, std::span<const double> y);
double norm2(std::span<const double> x);
double norm1(std::span<const double> x);

// Rows of `a` selected by `idx`, in the given order.
DenseMatrix take_rows(const DenseMatrix& a, const std::vector<std::size_t>& idx);

// Vertical concatenation; all blocks must share a column count.
DenseMatrix vstack(const std::vector<DenseMatrix>& blocks);

// i.i.d. N(0, stddev^2) entries drawn row-major.
DenseMatrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev,
                            SeededRng& rng);

// i.i.d. U[0,1) entries drawn row-major.
DenseMatrix uniform_matrix(std::size_t rows, std::size_t cols, SeededRng& rng);

}  // namespace pdml
