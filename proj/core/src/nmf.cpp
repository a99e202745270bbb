#include "pdml/nmf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "pdml/errors.hpp"
#include "pdml/power_iteration.hpp"

namespace pdml {

namespace {

// Denominator substitute for a dead topic (zero norm and zero L2 weight).
// The thresholded numerator is then nonpositive, so the update still returns
// an all-zero row or column.
constexpr double kDeadTopicGuard = 1e-12;

void check_nonnegative(const DenseMatrix& m, const char* what) {
  for (double v : m.data()) {
    if (std::isnan(v)) throw DataError(std::string(what) + ": NaN entry");
    if (v < 0.0) throw DataError(std::string(what) + ": negative entry");
  }
}

void check_params(const NmfParams& p) {
  if (p.k == 0) throw ConfigError("nmf: rank k must be at least 1");
  if (p.alpha < 0 || p.beta < 0 || p.gamma < 0 || p.delta < 0)
    throw ConfigError("nmf: regularization weights must be nonnegative");
}

// In-place Gaussian elimination with partial pivoting on a dense m x m
// system stored row-major. Returns false on a (near-)singular pivot.
bool solve_small(std::vector<double>& a, std::vector<double>& rhs,
                 std::size_t m) {
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < m; ++r)
      if (std::fabs(a[r * m + col]) > std::fabs(a[piv * m + col])) piv = r;
    if (std::fabs(a[piv * m + col]) < 1e-12) return false;
    if (piv != col) {
      for (std::size_t c = 0; c < m; ++c)
        std::swap(a[col * m + c], a[piv * m + c]);
      std::swap(rhs[col], rhs[piv]);
    }
    const double inv = 1.0 / a[col * m + col];
    for (std::size_t r = col + 1; r < m; ++r) {
      const double f = a[r * m + col] * inv;
      if (f == 0.0) continue;
      for (std::size_t c = col; c < m; ++c) a[r * m + c] -= f * a[col * m + c];
      rhs[r] -= f * rhs[col];
    }
  }
  for (std::size_t r = m; r-- > 0;) {
    double v = rhs[r];
    for (std::size_t c = r + 1; c < m; ++c) v -= a[r * m + c] * rhs[c];
    rhs[r] = v / a[r * m + r];
  }
  return true;
}

}  // namespace

double nmf_objective(const DenseMatrix& x, const DenseMatrix& w,
                     const DenseMatrix& t, const NmfParams& params) {
  if (w.rows() != x.rows() || t.cols() != x.cols() || w.cols() != t.rows())
    throw std::invalid_argument("nmf_objective: shape mismatch");
  const DenseMatrix wt = matmul(w, t);
  double fit = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = x.data()[i] - wt.data()[i];
    fit += e * e;
  }
  double t_l1 = 0.0, t_sq = 0.0;
  for (double v : t.data()) {
    t_l1 += std::fabs(v);
    t_sq += v * v;
  }
  double w_l1 = 0.0, w_sq = 0.0;
  for (double v : w.data()) {
    w_l1 += std::fabs(v);
    w_sq += v * v;
  }
  return 0.5 * fit + params.alpha * t_l1 + 0.5 * params.beta * t_sq +
         params.gamma * w_l1 + 0.5 * params.delta * w_sq;
}

DenseMatrix nmf_residual(const DenseMatrix& x, const DenseMatrix& w,
                         const DenseMatrix& t_mat, std::size_t t) {
  if (w.rows() != x.rows() || t_mat.cols() != x.cols() ||
      w.cols() != t_mat.rows())
    throw std::invalid_argument("nmf_residual: shape mismatch");
  if (t >= t_mat.rows())
    throw std::invalid_argument("nmf_residual: topic index out of range");
  DenseMatrix r = x;
  for (std::size_t l = 0; l < t_mat.rows(); ++l) {
    if (l == t) continue;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double wi = w(i, l);
      for (std::size_t c = 0; c < x.cols(); ++c) r(i, c) -= wi * t_mat(l, c);
    }
  }
  return r;
}

std::vector<double> update_w_column(const DenseMatrix& r,
                                    std::span<const double> t_row, double gamma,
                                    double delta) {
  if (r.cols() != t_row.size())
    throw std::invalid_argument("update_w_column: shape mismatch");
  double den = dot(t_row, t_row) + delta;
  if (den == 0.0) den = kDeadTopicGuard;
  std::vector<double> col(r.rows());
  for (std::size_t i = 0; i < r.rows(); ++i) {
    const double v = dot(r.row(i), t_row) - gamma;
    col[i] = v > 0.0 ? v / den : 0.0;
  }
  return col;
}

std::vector<double> topic_correlation(const DenseMatrix& r,
                                      std::span<const double> w_col) {
  if (r.rows() != w_col.size())
    throw std::invalid_argument("topic_correlation: shape mismatch");
  std::vector<double> num(r.cols(), 0.0);
  for (std::size_t i = 0; i < r.rows(); ++i) {
    const double wi = w_col[i];
    for (std::size_t c = 0; c < r.cols(); ++c) num[c] += wi * r(i, c);
  }
  return num;
}

std::vector<double> finish_t_row(std::span<const double> num, double den,
                                 double alpha, double beta) {
  double dd = den + beta;
  if (dd == 0.0) dd = kDeadTopicGuard;
  std::vector<double> row(num.size());
  for (std::size_t c = 0; c < num.size(); ++c) {
    const double v = num[c] - alpha;
    row[c] = v > 0.0 ? v / dd : 0.0;
  }
  return row;
}

std::vector<double> update_t_row(std::span<const double> w_col,
                                 const DenseMatrix& r, double alpha,
                                 double beta) {
  return finish_t_row(topic_correlation(r, w_col), dot(w_col, w_col), alpha,
                      beta);
}

std::vector<double> simplex_project(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("simplex_project: empty vector");
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0, theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    css += u[j];
    const double cand = (css - 1.0) / static_cast<double>(j + 1);
    if (u[j] > cand) theta = cand;
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = std::max(v[i] - theta, 0.0);
  return out;
}

void normalize_rows_l1(DenseMatrix& t) {
  for (std::size_t j = 0; j < t.rows(); ++j) {
    auto row = t.row(j);
    double s = 0.0;
    for (double v : row) s += v;
    if (s > 0.0) {
      for (double& v : row) v /= s;
    } else {
      const double u = 1.0 / static_cast<double>(t.cols());
      for (double& v : row) v = u;
    }
  }
}

NmfModel rri_nmf(const DenseMatrix& x, const NmfParams& params,
                 const DenseMatrix& t0, std::vector<double>* objective_trace) {
  check_params(params);
  if (t0.rows() != params.k || t0.cols() != x.cols())
    throw std::invalid_argument("rri_nmf: T0 shape mismatch");
  check_nonnegative(x, "rri_nmf: X");
  check_nonnegative(t0, "rri_nmf: T0");

  const std::size_t n = x.rows(), d = x.cols(), k = params.k;
  DenseMatrix w(n, k, 0.0);
  DenseMatrix t = t0;
  DenseMatrix e = x;  // E = X - WT, maintained incrementally (W starts at 0)
  DenseMatrix r(n, d);

  for (std::size_t iter = 0; iter < params.max_iters; ++iter) {
    const DenseMatrix t_prev = t;
    for (std::size_t tt = 0; tt < k; ++tt) {
      // R_t = E + W_:t T_t:  (add the topic back in).
      for (std::size_t i = 0; i < n; ++i) {
        const double wi = w(i, tt);
        for (std::size_t c = 0; c < d; ++c) r(i, c) = e(i, c) + wi * t(tt, c);
      }
      const std::vector<double> w_col =
          update_w_column(r, t.row(tt), params.gamma, params.delta);
      for (std::size_t i = 0; i < n; ++i) w(i, tt) = w_col[i];
      if (objective_trace)
        objective_trace->push_back(nmf_objective(x, w, t, params));

      const std::vector<double> num = topic_correlation(r, w_col);
      const double den = dot(w_col, w_col);
      std::vector<double> t_row =
          finish_t_row(num, den, params.alpha, params.beta);
      if (params.project_simplex) t_row = simplex_project(t_row);
      for (std::size_t c = 0; c < d; ++c) t(tt, c) = t_row[c];
      if (objective_trace)
        objective_trace->push_back(nmf_objective(x, w, t, params));

      for (std::size_t i = 0; i < n; ++i) {
        const double wi = w_col[i];
        for (std::size_t c = 0; c < d; ++c) e(i, c) = r(i, c) - wi * t(tt, c);
      }
    }
    const double dist = frobenius_distance(t, t_prev);
    const double base = frobenius_norm(t_prev);
    if ((base > 0.0 ? dist / base : dist) < params.tol) break;
  }
  return {std::move(w), std::move(t)};
}

DenseMatrix nnsvd_init(const DenseMatrix& x, std::size_t k) {
  if (k == 0) throw ConfigError("nnsvd_init: rank k must be at least 1");
  if (k > std::min(x.rows(), x.cols()))
    throw DataError("nnsvd_init: rank k exceeds matrix dimensions");
  check_nonnegative(x, "nnsvd_init: X");
  const SvdTopK svd = svd_topk(x, k);

  DenseMatrix t0(k, x.cols(), 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    double up = 0.0, un = 0.0, vp = 0.0, vn = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double v = svd.u(i, j);
      (v >= 0.0 ? up : un) += v * v;
    }
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double v = svd.v(c, j);
      (v >= 0.0 ? vp : vn) += v * v;
    }
    // Keep whichever sign-consistent part carries more of the singular
    // direction; the row is normalized afterwards, so scale is irrelevant.
    const bool positive = std::sqrt(up) * std::sqrt(vp) >=
                          std::sqrt(un) * std::sqrt(vn);
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double v = svd.v(c, j);
      t0(j, c) = positive ? std::max(v, 0.0) : std::max(-v, 0.0);
    }
  }
  normalize_rows_l1(t0);
  return t0;
}

DenseMatrix random_init(std::size_t k, std::size_t d, SeededRng& rng) {
  DenseMatrix t0 = uniform_matrix(k, d, rng);
  normalize_rows_l1(t0);
  return t0;
}

NnlsResult nnls_row(std::span<const double> y, const DenseMatrix& z) {
  const std::size_t k = z.rows(), d = z.cols();
  if (y.size() != d) throw std::invalid_argument("nnls_row: shape mismatch");
  if (k > 16)
    throw ConfigError("nnls_row: exhaustive solver is limited to k <= 16");

  // Normal-equation pieces: G = Z Z^T, b = Z y, yy = y.y.
  std::vector<double> g(k * k), b(k);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t c = 0; c < k; ++c) g[a * k + c] = dot(z.row(a), z.row(c));
    b[a] = dot(y, z.row(a));
  }
  const double yy = dot(y, y);

  NnlsResult best{std::vector<double>(k, 0.0), 0.5 * yy};
  std::vector<std::size_t> idx;
  std::vector<double> sub, rhs, w_full(k);
  for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
    idx.clear();
    for (std::size_t a = 0; a < k; ++a)
      if (mask & (1u << a)) idx.push_back(a);
    const std::size_t m = idx.size();
    sub.assign(m * m, 0.0);
    rhs.assign(m, 0.0);
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t c = 0; c < m; ++c) sub[a * m + c] = g[idx[a] * k + idx[c]];
      rhs[a] = b[idx[a]];
    }
    if (!solve_small(sub, rhs, m)) continue;
    bool feasible = true;
    for (double v : rhs) feasible = feasible && v > -1e-9;
    if (!feasible) continue;

    std::fill(w_full.begin(), w_full.end(), 0.0);
    for (std::size_t a = 0; a < m; ++a) w_full[idx[a]] = std::max(rhs[a], 0.0);
    // 0.5||y - wZ||^2 = 0.5 yy - w.b + 0.5 w G w, valid for any w.
    double quad = 0.0, lin = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
      lin += w_full[a] * b[a];
      for (std::size_t c = 0; c < k; ++c)
        quad += w_full[a] * g[a * k + c] * w_full[c];
    }
    const double obj = 0.5 * yy - lin + 0.5 * quad;
    if (obj < best.objective) {
      best.objective = obj;
      best.w = w_full;
    }
  }
  return best;
}

double min_reconstruction_error(const DenseMatrix& y, const DenseMatrix& z) {
  if (y.cols() != z.cols())
    throw std::invalid_argument("min_reconstruction_error: shape mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < y.rows(); ++i)
    total += nnls_row(y.row(i), z).objective;
  return total;
}

}  // namespace pdml
