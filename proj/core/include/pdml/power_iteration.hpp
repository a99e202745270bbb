#pragma once

#include <cstddef>
#include <vector>

#include "pdml/matrix.hpp"
#include "pdml/rng.hpp"

namespace pdml {

// In-place column normalization: v /= ||v||_2. Throws DataError on a
// (numerically) zero column. Shared by the centralized iteration and the
// distributed protocol so both paths round identically.
void normalize_column(DenseMatrix& m, std::size_t col);

// Modified Gram-Schmidt over columns, followed by a sign canonicalization:
// each column is flipped so its first nonzero component is positive
// (eigenvectors are sign-ambiguous; a fixed convention makes cross-run
// comparisons well-posed). Sign flips commute with the projections, so
// flipping per column as it is produced is exact. Throws DataError when a
// column degenerates to numerical zero (rank deficiency).
void orthonormalize_columns(DenseMatrix& m);

// Centralized block power iteration on a symmetric matrix S (d x d):
// V ~ N(0, (1/d)^2) entries, then tau rounds of V <- S V with per-column
// normalization and orthonormalization. Returns V (d x k), columns spanning
// the dominant k-dimensional invariant subspace. Asymmetry beyond 1e-8 is a
// data error.
//
// early_stop_tol > 0 stops once max entry change of V between rounds falls
// below it (deterministic for a given input).
DenseMatrix block_power_iteration(const DenseMatrix& s, std::size_t k,
                                  std::size_t tau, SeededRng& rng,
                                  double early_stop_tol = 0.0);

// Same iteration from a caller-supplied starting block (orthonormalized
// in place before the first round). Reference route for protocol runs that
// assemble V0 from summed per-party draws.
DenseMatrix block_power_iteration_from(const DenseMatrix& s, DenseMatrix v0,
                                       std::size_t tau,
                                       double early_stop_tol = 0.0);

// Largest eigenvalue of a symmetric PSD matrix by the power method.
double spectral_norm_sym(const DenseMatrix& s, std::size_t iters = 200);

// Top-k singular triples of X via block power iteration on X^T X.
// Deterministic for a given X (internal fixed seed).
struct SvdTopK {
  DenseMatrix u;              // n x k
  std::vector<double> sigma;  // k, nonincreasing
  DenseMatrix v;              // d x k
};
SvdTopK svd_topk(const DenseMatrix& x, std::size_t k, std::size_t tau = 400);

// Relative low-rank approximation error ||X - X V V^T||_F / ||X||_F for an
// orthonormal V (d x k).
double lra_error(const DenseMatrix& x, const DenseMatrix& v);

// Principal-component regression: least squares of the mean-centered y on
// the projected coordinates Z = X V. Returns the k coefficients; the model
// carries no explicit intercept (centering plays that role in evaluation
// too). Near-singular normal equations fall back to a 1e-10 ridge.
std::vector<double> pcr_fit(const DenseMatrix& x, const std::vector<double>& y,
                            const DenseMatrix& v);

// Root-mean-square prediction error of a PCR model on (X, y), with y
// centered by its mean as in pcr_fit.
double pcr_rmse(const DenseMatrix& x, const std::vector<double>& y,
                const DenseMatrix& v, const std::vector<double>& coef);

}  // namespace pdml
