#include "pdml/power_iteration.hpp"

#include <cmath>
#include <stdexcept>

#include "pdml/errors.hpp"

namespace pdml {

namespace {

void require_symmetric_shape(const DenseMatrix& s) {
  if (s.rows() != s.cols()) {
    throw std::invalid_argument("block_power_iteration: matrix must be square");
  }
}

void require_symmetric_values(const DenseMatrix& s, double tol = 1e-8) {
  require_symmetric_shape(s);
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t j = i + 1; j < s.cols(); ++j) {
      if (std::fabs(s(i, j) - s(j, i)) > tol) {
        throw DataError("block_power_iteration: matrix is not symmetric");
      }
    }
  }
}

// w = S * V(:,col), ascending-index accumulation.
std::vector<double> apply_sym(const DenseMatrix& s, const DenseMatrix& v,
                              std::size_t col) {
  std::vector<double> w(s.rows(), 0.0);
  for (std::size_t i = 0; i < s.rows(); ++i) {
    double acc = 0.0;
    const double* row = s.data().data() + i * s.cols();
    for (std::size_t j = 0; j < s.cols(); ++j) acc += row[j] * v(j, col);
    w[i] = acc;
  }
  return w;
}

}  // namespace

void normalize_column(DenseMatrix& m, std::size_t col) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) s += m(i, col) * m(i, col);
  const double n = std::sqrt(s);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw DataError("normalize_column: zero or non-finite column norm");
  }
  for (std::size_t i = 0; i < m.rows(); ++i) m(i, col) /= n;
}

void orthonormalize_columns(DenseMatrix& m) {
  const std::size_t d = m.rows(), k = m.cols();
  for (std::size_t i = 0; i < k; ++i) {
    double before = 0.0;
    for (std::size_t r = 0; r < d; ++r) before += m(r, i) * m(r, i);
    for (std::size_t j = 0; j < i; ++j) {
      double proj = 0.0;
      for (std::size_t r = 0; r < d; ++r) proj += m(r, j) * m(r, i);
      for (std::size_t r = 0; r < d; ++r) m(r, i) -= proj * m(r, j);
    }
    double after = 0.0;
    for (std::size_t r = 0; r < d; ++r) after += m(r, i) * m(r, i);
    // A column (numerically) inside the span of its predecessors leaves only
    // cancellation noise after the projections; normalizing that noise would
    // manufacture a garbage basis vector.
    if (!(std::sqrt(after) > 1e-13 * std::sqrt(before))) {
      throw DataError("orthonormalize_columns: rank-deficient block");
    }
    normalize_column(m, i);
    // Canonical sign: first nonzero component positive.
    for (std::size_t r = 0; r < d; ++r) {
      if (m(r, i) == 0.0) continue;
      if (m(r, i) < 0.0) {
        for (std::size_t q = 0; q < d; ++q) m(q, i) = -m(q, i);
      }
      break;
    }
  }
}

DenseMatrix block_power_iteration_from(const DenseMatrix& s, DenseMatrix v0,
                                       std::size_t tau,
                                       double early_stop_tol) {
  require_symmetric_values(s);
  const std::size_t d = s.rows();
  if (v0.rows() != d || v0.cols() == 0 || v0.cols() > d) {
    throw std::invalid_argument("block_power_iteration: bad starting block");
  }
  const std::size_t k = v0.cols();
  orthonormalize_columns(v0);
  DenseMatrix prev = v0;
  for (std::size_t it = 0; it < tau; ++it) {
    for (std::size_t c = 0; c < k; ++c) {
      auto w = apply_sym(s, v0, c);
      for (std::size_t r = 0; r < d; ++r) v0(r, c) = w[r];
      normalize_column(v0, c);
    }
    orthonormalize_columns(v0);
    if (early_stop_tol > 0.0) {
      if (max_abs_diff(v0, prev) < early_stop_tol) break;
      prev = v0;
    }
  }
  return v0;
}

DenseMatrix block_power_iteration(const DenseMatrix& s, std::size_t k,
                                  std::size_t tau, SeededRng& rng,
                                  double early_stop_tol) {
  require_symmetric_shape(s);
  const std::size_t d = s.rows();
  if (k == 0 || k > d) {
    throw std::invalid_argument("block_power_iteration: need 0 < k <= d");
  }
  DenseMatrix v = gaussian_matrix(d, k, 1.0 / static_cast<double>(d), rng);
  return block_power_iteration_from(s, std::move(v), tau, early_stop_tol);
}

double spectral_norm_sym(const DenseMatrix& s, std::size_t iters) {
  require_symmetric_shape(s);
  const std::size_t d = s.rows();
  SeededRng rng(0x5eC70a1ULL, 17);
  DenseMatrix v = gaussian_matrix(d, 1, 1.0, rng);
  normalize_column(v, 0);
  double lambda = 0.0;
  for (std::size_t it = 0; it < iters; ++it) {
    auto w = apply_sym(s, v, 0);
    lambda = norm2(w);
    if (lambda == 0.0) return 0.0;
    for (std::size_t r = 0; r < d; ++r) v(r, 0) = w[r] / lambda;
  }
  return lambda;
}

SvdTopK svd_topk(const DenseMatrix& x, std::size_t k, std::size_t tau) {
  if (k == 0 || k > std::min(x.rows(), x.cols())) {
    throw DataError("svd_topk: k must satisfy 0 < k <= min(n, d)");
  }
  const DenseMatrix xt = transpose(x);
  const DenseMatrix gram = matmul(xt, x);
  SeededRng rng(0x51d70cULL, 3);
  SvdTopK out;
  out.v = block_power_iteration(gram, k, tau, rng, 1e-13);
  out.sigma.resize(k);
  out.u = DenseMatrix(x.rows(), k);
  for (std::size_t c = 0; c < k; ++c) {
    // sigma_c = ||X v_c||, u_c = X v_c / sigma_c.
    std::vector<double> xv(x.rows(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      double acc = 0.0;
      const double* row = x.data().data() + i * x.cols();
      for (std::size_t j = 0; j < x.cols(); ++j) acc += row[j] * out.v(j, c);
      xv[i] = acc;
    }
    const double sig = norm2(xv);
    out.sigma[c] = sig;
    if (sig <= 0.0) {
      throw DataError("svd_topk: zero singular value (rank deficient input)");
    }
    for (std::size_t i = 0; i < x.rows(); ++i) out.u(i, c) = xv[i] / sig;
  }
  return out;
}

double lra_error(const DenseMatrix& x, const DenseMatrix& v) {
  if (v.rows() != x.cols()) {
    throw std::invalid_argument("lra_error: V rows must equal X cols");
  }
  const DenseMatrix z = matmul(x, v);              // n x k
  const DenseMatrix recon = matmul(z, transpose(v));
  const double nx = frobenius_norm(x);
  if (nx == 0.0) throw DataError("lra_error: zero input matrix");
  return frobenius_distance(x, recon) / nx;
}

namespace {

std::vector<double> center_by_mean(const std::vector<double>& y) {
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] - mean;
  return out;
}

// Gauss-Jordan with partial pivoting on the augmented k x (k+1) system.
// Returns false when a pivot falls under the threshold.
bool gauss_jordan(DenseMatrix& a, double pivot_tol) {
  const std::size_t k = a.rows();
  for (std::size_t col = 0; col < k; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < k; ++r) {
      if (std::fabs(a(r, col)) > std::fabs(a(piv, col))) piv = r;
    }
    if (std::fabs(a(piv, col)) < pivot_tol) return false;
    if (piv != col) {
      for (std::size_t j = 0; j <= k; ++j) std::swap(a(piv, j), a(col, j));
    }
    for (std::size_t r = 0; r < k; ++r) {
      if (r == col) continue;
      const double f = a(r, col) / a(col, col);
      for (std::size_t j = col; j <= k; ++j) a(r, j) -= f * a(col, j);
    }
  }
  return true;
}

}  // namespace

std::vector<double> pcr_fit(const DenseMatrix& x, const std::vector<double>& y,
                            const DenseMatrix& v) {
  if (y.size() != x.rows()) throw std::invalid_argument("pcr_fit: y length mismatch");
  if (y.empty()) throw std::invalid_argument("pcr_fit: empty sample");
  const std::vector<double> y0 = center_by_mean(y);
  const DenseMatrix z = matmul(x, v);
  const std::size_t k = z.cols();
  // Normal equations (Z^T Z) g = Z^T y0; k is small by construction.
  DenseMatrix a(k, k + 1);
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t q = 0; q < k; ++q) {
      double acc = 0.0;
      for (std::size_t i = 0; i < z.rows(); ++i) acc += z(i, p) * z(i, q);
      a(p, q) = acc;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) acc += z(i, p) * y0[i];
    a(p, k) = acc;
  }
  DenseMatrix trial = a;
  if (!gauss_jordan(trial, 1e-10)) {
    // Rank-deficient projection: ridge the diagonal and solve again.
    trial = a;
    for (std::size_t p = 0; p < k; ++p) trial(p, p) += 1e-10;
    if (!gauss_jordan(trial, 1e-300)) {
      throw DataError("pcr_fit: singular normal equations");
    }
  }
  std::vector<double> coef(k);
  for (std::size_t p = 0; p < k; ++p) coef[p] = trial(p, k) / trial(p, p);
  return coef;
}

double pcr_rmse(const DenseMatrix& x, const std::vector<double>& y,
                const DenseMatrix& v, const std::vector<double>& coef) {
  if (y.empty()) throw std::invalid_argument("pcr_rmse: empty sample");
  const std::vector<double> y0 = center_by_mean(y);
  const DenseMatrix z = matmul(x, v);
  double se = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    double pred = 0.0;
    for (std::size_t c = 0; c < z.cols(); ++c) pred += z(i, c) * coef[c];
    const double e = pred - y0[i];
    se += e * e;
  }
  return std::sqrt(se / static_cast<double>(z.rows()));
}

}  // namespace pdml
