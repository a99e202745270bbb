#include "pdml/ksdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "pdml/errors.hpp"

namespace pdml {
namespace {

constexpr std::size_t kMinSide = 8;          // KS asymptotics floor
constexpr std::size_t kBoxLsMaxIters = 500;  // projected-gradient budget
constexpr double kBoxLsTol = 1e-8;

// Per-run substream tags under the measurement seed. Spaced so the four
// streams of run i never collide for any realistic t.
constexpr std::uint64_t kWithDbStream = 0x100000;
constexpr std::uint64_t kWithMechStream = 0x200000;
constexpr std::uint64_t kWithoutDbStream = 0x300000;
constexpr std::uint64_t kSimStream = 0x400000;

}  // namespace

Ecdf::Ecdf(std::vector<double> sample) : sorted_(std::move(sample)) {
  if (sorted_.empty()) throw DataError("Ecdf: empty sample");
  std::sort(sorted_.begin(), sorted_.end());
}

double Ecdf::operator()(double x) const {
  const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
  return static_cast<double>(it - sorted_.begin()) /
         static_cast<double>(sorted_.size());
}

double ks_statistic(const Ecdf& f, const Ecdf& g) {
  const std::vector<double>& a = f.sorted();
  const std::vector<double>& b = g.sorted();
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  // Walk the merged grid; at each distinct value advance both sides past it
  // so ties contribute a single evaluation point.
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na -
                             static_cast<double>(j) / nb));
  }
  // Once one side is exhausted its CDF sits at 1, and the gap to the other
  // side only shrinks from the last evaluated point, so `d` is final.
  return d;
}

double ks_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  const double a2 = -2.0 * lambda * lambda;
  double fac = 2.0;
  double sum = 0.0;
  double prev_term = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = fac * std::exp(a2 * static_cast<double>(j) *
                                       static_cast<double>(j));
    sum += term;
    if (std::abs(term) <= 0.001 * prev_term ||
        std::abs(term) <= 1e-12 * std::abs(sum)) {
      return std::clamp(sum, 0.0, 1.0);
    }
    fac = -fac;
    prev_term = std::abs(term);
  }
  return 1.0;  // series failed to settle: no evidence against equality
}

double ks_2sample_pvalue(const std::vector<double>& a,
                         const std::vector<double>& b) {
  if (a.size() < kMinSide || b.size() < kMinSide) {
    throw DataError("ks_2sample_pvalue: need at least 8 samples per side");
  }
  const Ecdf fa(a);
  const Ecdf fb(b);
  const double d = ks_statistic(fa, fb);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ne = na * nb / (na + nb);
  const double sqrt_ne = std::sqrt(ne);
  const double lambda = (sqrt_ne + 0.12 + 0.11 / sqrt_ne) * d;
  return ks_survival(lambda);
}

namespace {

// First n_take rows of a uniformly random permutation of X's rows with
// x_row removed.
std::vector<std::size_t> sample_other_rows(std::size_t rows, std::size_t x_row,
                                           std::size_t n_take, SeededRng& rng) {
  std::vector<std::size_t> perm = rng.permutation(rows - 1);
  std::vector<std::size_t> out(n_take);
  for (std::size_t i = 0; i < n_take; ++i) {
    out[i] = perm[i] < x_row ? perm[i] : perm[i] + 1;
  }
  return out;
}

void check_draw(const DenseMatrix& x_db, std::size_t x_row, std::size_t n_sub) {
  if (x_row >= x_db.rows()) throw DataError("sub-database draw: target row out of range");
  if (n_sub == 0) throw DataError("sub-database draw: size must be positive");
  if (n_sub > x_db.rows() - 1) {
    throw DataError("sub-database draw: size must leave at least one row out");
  }
}

}  // namespace

DenseMatrix draw_with_side(const DenseMatrix& x_db, std::size_t x_row,
                           std::size_t n_sub, SeededRng& rng) {
  check_draw(x_db, x_row, n_sub);
  std::vector<std::size_t> idx =
      sample_other_rows(x_db.rows(), x_row, n_sub - 1, rng);
  const std::size_t pos = static_cast<std::size_t>(rng.below(n_sub));
  idx.insert(idx.begin() + static_cast<std::ptrdiff_t>(pos), x_row);
  return take_rows(x_db, idx);
}

DenseMatrix draw_without_side(const DenseMatrix& x_db, std::size_t x_row,
                              std::size_t n_sub, SeededRng& rng) {
  check_draw(x_db, x_row, n_sub);
  return take_rows(x_db, sample_other_rows(x_db.rows(), x_row, n_sub, rng));
}

DenseMatrix draw_random_db(std::size_t rows, std::size_t cols, SeededRng& rng) {
  return uniform_matrix(rows, cols, rng);
}

KsdpResult ksdp_from_records(std::vector<SampleRecord> records,
                             std::size_t n_stats) {
  if (n_stats == 0) throw ConfigError("ksdp: need at least one statistic");
  std::vector<std::vector<double>> with_samples(n_stats);
  std::vector<std::vector<double>> without_samples(n_stats);
  for (const SampleRecord& rec : records) {
    if (rec.values.size() != n_stats) {
      throw DataError("ksdp: record width does not match statistic count");
    }
    auto& side = rec.with_side ? with_samples : without_samples;
    for (std::size_t s = 0; s < n_stats; ++s) side[s].push_back(rec.values[s]);
  }
  KsdpResult res;
  res.records = std::move(records);
  res.p_values.resize(n_stats);
  res.pi = 1.0;
  for (std::size_t s = 0; s < n_stats; ++s) {
    res.p_values[s] = ks_2sample_pvalue(with_samples[s], without_samples[s]);
    res.pi = std::min(res.pi, res.p_values[s]);
  }
  return res;
}

KsdpResult measure_ksdp(const Mechanism& mech, const Mechanism& sim,
                        const std::vector<NamedStatistic>& stats,
                        const DenseMatrix& x_db, std::size_t x_row,
                        const KsdpOptions& opt) {
  if (stats.empty()) throw ConfigError("ksdp: need at least one statistic");
  if (opt.t < kMinSide) throw ConfigError("ksdp: need at least 8 runs per side");
  if (x_row >= x_db.rows()) throw DataError("ksdp: target row out of range");
  const std::size_t n = x_db.rows();
  const std::size_t n_sub =
      opt.n_sub > 0 ? opt.n_sub : (4 * n + 4) / 5;  // ceil(0.8 n)
  const std::vector<double> x(x_db.row(x_row).begin(), x_db.row(x_row).end());

  const SeededRng base(opt.seed);
  std::vector<SampleRecord> records;
  records.reserve(2 * opt.t);
  for (std::size_t i = 0; i < opt.t; ++i) {
    SeededRng db_rng = base.derive(kWithDbStream + i);
    SeededRng mech_rng = base.derive(kWithMechStream + i);
    const DenseMatrix db = draw_with_side(x_db, x_row, n_sub, db_rng);
    const ObservableTrace trace = mech(db, mech_rng);
    SampleRecord rec{true, i, {}};
    rec.values.reserve(stats.size());
    for (const NamedStatistic& s : stats) rec.values.push_back(s.fn(trace, x));
    records.push_back(std::move(rec));
  }
  for (std::size_t i = 0; i < opt.t; ++i) {
    SeededRng db_rng = base.derive(kWithoutDbStream + i);
    SeededRng sim_rng = base.derive(kSimStream + i);
    const DenseMatrix db = opt.simulator == SimulatorKind::Subsample
                               ? draw_without_side(x_db, x_row, n_sub, db_rng)
                               : draw_random_db(n_sub, x_db.cols(), db_rng);
    const ObservableTrace trace = sim(db, sim_rng);
    SampleRecord rec{false, i, {}};
    rec.values.reserve(stats.size());
    for (const NamedStatistic& s : stats) rec.values.push_back(s.fn(trace, x));
    records.push_back(std::move(rec));
  }

  if (!opt.cache_path.empty()) {
    std::vector<std::string> names;
    names.reserve(stats.size());
    for (const NamedStatistic& s : stats) names.push_back(s.name);
    save_sample_cache(opt.cache_path, names, records);
  }
  return ksdp_from_records(std::move(records), stats.size());
}

void save_sample_cache(const std::string& path,
                       const std::vector<std::string>& stat_names,
                       const std::vector<SampleRecord>& records) {
  for (const std::string& name : stat_names) {
    if (name.empty() || name.find_first_of(" \t\n") != std::string::npos) {
      throw std::invalid_argument("save_sample_cache: statistic names must be "
                                  "nonempty and whitespace-free");
    }
  }
  std::ofstream out(path);
  if (!out) throw DataError("save_sample_cache: cannot open " + path);
  out << "ksdp-samples 1\n";
  out << "statistics " << stat_names.size() << "\n";
  for (const std::string& name : stat_names) out << "stat " << name << "\n";
  out << "records " << records.size() << "\n";
  out << std::setprecision(17);
  for (const SampleRecord& rec : records) {
    out << (rec.with_side ? "with " : "without ") << rec.run;
    for (double v : rec.values) out << ' ' << v;
    out << '\n';
  }
  if (!out) throw DataError("save_sample_cache: write failed for " + path);
}

std::vector<SampleRecord> load_sample_cache(const std::string& path,
                                            std::vector<std::string>* stat_names) {
  std::ifstream in(path);
  if (!in) throw DataError("load_sample_cache: cannot open " + path);
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != "ksdp-samples" || version != 1) {
    throw DataError("load_sample_cache: not a ksdp sample cache: " + path);
  }
  std::size_t n_stats = 0;
  if (!(in >> word >> n_stats) || word != "statistics") {
    throw DataError("load_sample_cache: malformed statistics header in " + path);
  }
  std::vector<std::string> names(n_stats);
  for (std::size_t s = 0; s < n_stats; ++s) {
    if (!(in >> word >> names[s]) || word != "stat") {
      throw DataError("load_sample_cache: malformed statistic name in " + path);
    }
  }
  std::size_t n_records = 0;
  if (!(in >> word >> n_records) || word != "records") {
    throw DataError("load_sample_cache: malformed record header in " + path);
  }
  std::vector<SampleRecord> records(n_records);
  for (std::size_t r = 0; r < n_records; ++r) {
    SampleRecord& rec = records[r];
    if (!(in >> word >> rec.run) || (word != "with" && word != "without")) {
      throw DataError("load_sample_cache: malformed record " +
                      std::to_string(r) + " in " + path);
    }
    rec.with_side = word == "with";
    rec.values.resize(n_stats);
    for (std::size_t s = 0; s < n_stats; ++s) {
      if (!(in >> rec.values[s])) {
        throw DataError("load_sample_cache: truncated record " +
                        std::to_string(r) + " in " + path);
      }
    }
  }
  if (stat_names != nullptr) *stat_names = std::move(names);
  return records;
}

namespace {

// Largest eigenvalue of a small symmetric PSD matrix by plain power
// iteration from the all-ones vector.
double psd_spectral_norm(const DenseMatrix& g) {
  const std::size_t k = g.rows();
  std::vector<double> v(k, 1.0);
  std::vector<double> gv(k, 0.0);
  double lambda = 0.0;
  for (int iter = 0; iter < 100; ++iter) {
    for (std::size_t i = 0; i < k; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) acc += g(i, j) * v[j];
      gv[i] = acc;
    }
    const double nrm = norm2(gv);
    if (nrm == 0.0) return 0.0;
    for (std::size_t i = 0; i < k; ++i) v[i] = gv[i] / nrm;
    lambda = nrm;
  }
  return lambda;
}

}  // namespace

std::vector<double> box_ls_weights(std::span<const double> x,
                                   const DenseMatrix& t) {
  const std::size_t k = t.rows();
  const std::size_t d = t.cols();
  if (x.size() != d) {
    throw std::invalid_argument("box_ls_weights: document length mismatch");
  }
  DenseMatrix g(k, k);  // T T^T
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      g(i, j) = dot(t.row(i), t.row(j));
    }
  }
  std::vector<double> b(k, 0.0);  // T x
  for (std::size_t i = 0; i < k; ++i) b[i] = dot(t.row(i), x);

  const double lip = psd_spectral_norm(g);
  std::vector<double> u(k, 0.0);
  if (lip == 0.0) return u;  // T is all zero: any weights fit equally badly
  const double step = 1.0 / lip;
  std::vector<double> next(k, 0.0);
  for (std::size_t iter = 0; iter < kBoxLsMaxIters; ++iter) {
    double shift = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      double grad = -b[i];
      for (std::size_t j = 0; j < k; ++j) grad += g(i, j) * u[j];
      next[i] = std::clamp(u[i] - step * grad, 0.0, 1.0);
      shift = std::max(shift, std::abs(next[i] - u[i]));
    }
    u.swap(next);
    if (shift < kBoxLsTol) break;
  }
  return u;
}

double nmf_adversary_statistic(const DenseMatrix& t, std::span<const double> w_den,
                               std::span<const double> x) {
  if (w_den.size() != t.rows()) {
    throw std::invalid_argument("nmf_adversary_statistic: denominator count "
                                "must match topic count");
  }
  const std::vector<double> a = box_ls_weights(x, t);
  double sigma = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    sigma += a[j] * w_den[j] * w_den[j];
  }
  return sigma;
}

NamedStatistic make_nmf_trace_statistic(std::size_t k,
                                        const std::string& prefix) {
  Statistic fn = [k, prefix](const ObservableTrace& trace,
                             std::span<const double> x) {
    const std::vector<double>& t_flat = trace.values(prefix + "T_final");
    if (t_flat.size() % k != 0 || t_flat.empty()) {
      throw DataError("nmf trace statistic: final topic matrix has wrong size");
    }
    const std::size_t d = t_flat.size() / k;
    DenseMatrix t(k, d);
    std::copy(t_flat.begin(), t_flat.end(), t.data().begin());

    // Per-topic denominators from the trace's last sweep.
    const std::string den_tag = prefix + "den.s";
    long last_sweep = -1;
    for (const ObservableTrace::Entry& e : trace.entries()) {
      if (e.label.rfind(den_tag, 0) != 0) continue;
      const std::size_t dot_pos = e.label.find(".t", den_tag.size());
      if (dot_pos == std::string::npos) continue;
      const long sweep = std::stol(e.label.substr(den_tag.size(),
                                                  dot_pos - den_tag.size()));
      last_sweep = std::max(last_sweep, sweep);
    }
    if (last_sweep < 0) {
      throw DataError("nmf trace statistic: no denominator entries in trace");
    }
    std::vector<double> w(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
      const std::string label = den_tag + std::to_string(last_sweep) + ".t" +
                                std::to_string(j);
      const std::vector<double>& v = trace.values(label);
      if (v.size() != 1) {
        throw DataError("nmf trace statistic: malformed denominator entry " +
                        label);
      }
      w[j] = v[0];
    }
    return nmf_adversary_statistic(t, w, x);
  };
  return NamedStatistic{"nmf.sigma", std::move(fn)};
}

std::vector<double> estimate_sigma_sq(std::span<const double> sigma_a,
                                      double n_v, double n_a) {
  if (!(n_a > 0.0) || n_v < 0.0) {
    throw DataError("estimate_sigma_sq: row counts must be positive");
  }
  const double factor = (n_v + n_a) / n_a;
  std::vector<double> out(sigma_a.size());
  for (std::size_t i = 0; i < sigma_a.size(); ++i) {
    out[i] = factor * sigma_a[i] * sigma_a[i];
  }
  return out;
}

namespace {

// S = V diag(sigma_sq) V^T with V given column-wise (d x k).
DenseMatrix spectrum_matrix(const DenseMatrix& v_k,
                            std::span<const double> sigma_sq) {
  const std::size_t d = v_k.rows();
  const std::size_t k = v_k.cols();
  if (sigma_sq.size() != k) {
    throw std::invalid_argument("svd statistics: spectrum length must match "
                                "the column count of V");
  }
  DenseMatrix s(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        acc += v_k(i, c) * sigma_sq[c] * v_k(j, c);
      }
      s(i, j) = acc;
    }
  }
  return s;
}

void check_doc(const DenseMatrix& v_k, std::span<const double> x) {
  if (x.size() != v_k.rows()) {
    throw std::invalid_argument("svd statistics: document length must match "
                                "the row count of V");
  }
}

std::vector<double> reduce3(const DenseMatrix& m) {
  double mx = 0.0;
  double sum = 0.0;
  double sumsq = 0.0;
  for (double v : m.data()) {
    mx = std::max(mx, v);
    sum += v;
    sumsq += v * v;
  }
  return {mx, sum, sumsq};
}

}  // namespace

std::vector<double> svd_weighted_statistics(const DenseMatrix& v_k,
                                            std::span<const double> sigma_sq,
                                            std::span<const double> x) {
  check_doc(v_k, x);
  const DenseMatrix s = spectrum_matrix(v_k, sigma_sq);
  const std::size_t d = s.rows();
  DenseMatrix w(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      w(i, j) = std::abs(s(i, j) * x[i] * x[j]);
    }
  }
  return reduce3(w);
}

std::vector<double> svd_deviation_statistics(const DenseMatrix& v_k,
                                             std::span<const double> sigma_sq,
                                             std::span<const double> x) {
  check_doc(v_k, x);
  const double xn = norm2(x);
  if (xn == 0.0) {
    throw DataError("svd deviation statistics: need a nonzero document");
  }
  const DenseMatrix s = spectrum_matrix(v_k, sigma_sq);
  const double sn = frobenius_norm(s);
  if (sn == 0.0) {
    throw DataError("svd deviation statistics: need a nonzero spectrum");
  }
  const std::size_t d = s.rows();
  DenseMatrix dev(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      dev(i, j) = std::abs(s(i, j) / sn - x[i] * x[j] / xn);
    }
  }
  return reduce3(dev);
}

std::vector<double> svd_statistics(const DenseMatrix& v_k,
                                   std::span<const double> sigma_sq,
                                   std::span<const double> x) {
  std::vector<double> out = svd_weighted_statistics(v_k, sigma_sq, x);
  const std::vector<double> dev = svd_deviation_statistics(v_k, sigma_sq, x);
  out.insert(out.end(), dev.begin(), dev.end());
  return out;
}

}  // namespace pdml
