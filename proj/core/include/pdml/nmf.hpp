#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pdml/matrix.hpp"
#include "pdml/rng.hpp"

namespace pdml {

// Rank-one residual NMF with L1/L2 regularization on both factors and an
// optional per-row simplex constraint on T. The same update kernels drive
// both this centralized solver and the multi-party protocol, so a one-party
// distributed run reproduces the centralized arithmetic operation for
// operation.
struct NmfParams {
  std::size_t k = 2;
  double alpha = 0.0;  // L1 weight on T
  double beta = 0.0;   // L2 weight on T
  double gamma = 0.0;  // L1 weight on W
  double delta = 0.0;  // L2 weight on W
  std::size_t max_iters = 200;
  double tol = 1e-6;  // stop when the relative Frobenius change of T drops below
  bool project_simplex = true;
};

struct NmfModel {
  DenseMatrix w;  // n x k, nonnegative
  DenseMatrix t;  // k x d, nonnegative; rows sum to 1 when projection is on
};

// 0.5*||X - WT||_F^2 + alpha*||T||_1 + 0.5*beta*||T||_F^2
//                    + gamma*||W||_1 + 0.5*delta*||W||_F^2.
double nmf_objective(const DenseMatrix& x, const DenseMatrix& w,
                     const DenseMatrix& t, const NmfParams& params);

// Residual for topic t computed from scratch: X - sum_{l != t} W_:l T_l:.
// The sweep below maintains the same quantity incrementally; the two must
// agree to rounding.
DenseMatrix nmf_residual(const DenseMatrix& x, const DenseMatrix& w,
                         const DenseMatrix& t_mat, std::size_t t);

// [R T_t:^T - gamma]_+ / (||T_t:||^2 + delta), evaluated rowwise over R.
// A dead topic (zero denominator) gets a 1e-12 guard and so yields the zero
// column.
std::vector<double> update_w_column(const DenseMatrix& r,
                                    std::span<const double> t_row, double gamma,
                                    double delta);

// W_:t^T R, accumulated over rows in ascending order. This is exactly the
// quantity each party contributes to the summed T-update numerator.
std::vector<double> topic_correlation(const DenseMatrix& r,
                                      std::span<const double> w_col);

// [num - alpha]_+ / (den + beta) with the same dead-topic guard. `num` and
// `den` are topic_correlation(R, W_:t) and ||W_:t||^2, either local or summed
// across parties.
std::vector<double> finish_t_row(std::span<const double> num, double den,
                                 double alpha, double beta);

// finish_t_row applied to the local correlation: the centralized T update.
std::vector<double> update_t_row(std::span<const double> w_col,
                                 const DenseMatrix& r, double alpha,
                                 double beta);

// Euclidean projection onto the probability simplex {x >= 0, sum x = 1},
// by the exact sort-and-threshold method.
std::vector<double> simplex_project(std::span<const double> v);

// In-place L1 normalization of each row; an all-zero row becomes uniform.
// Requires nonnegative entries.
void normalize_rows_l1(DenseMatrix& t);

// Alternating rank-one residual sweeps from T0: for each topic, form the
// residual, update W's column, then T's row (projected if enabled). Stops on
// relative T change < tol or after max_iters sweeps. Negative entries in X or
// T0 are a data error.
//
// When objective_trace is non-null the objective value is appended after
// every column and every row update (2k entries per sweep).
NmfModel rri_nmf(const DenseMatrix& x, const NmfParams& params,
                 const DenseMatrix& t0,
                 std::vector<double>* objective_trace = nullptr);

// SVD-based initialization: for each of the top-k singular pairs, keep the
// dominant sign-consistent part of the right singular vector (the positive
// and negative parts compete by the product of their norms with the matching
// left parts). Rows are L1-normalized. k > min(n, d) is a data error.
DenseMatrix nnsvd_init(const DenseMatrix& x, std::size_t k);

// U[0,1) entries, rows L1-normalized.
DenseMatrix random_init(std::size_t k, std::size_t d, SeededRng& rng);

// Exact nonnegative least squares min_{w >= 0} 0.5*||y - w Z||^2 for a single
// row y (Z is k x d), by exhaustive active-set enumeration over all 2^k
// supports. Intended for small k; k > 16 is a config error.
struct NnlsResult {
  std::vector<double> w;
  double objective;
};
NnlsResult nnls_row(std::span<const double> y, const DenseMatrix& z);

// Reconstruction error of Y against the row basis Z under the best
// nonnegative weights: sum over rows of nnls_row objectives.
double min_reconstruction_error(const DenseMatrix& y, const DenseMatrix& z);

}  // namespace pdml
