#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pdml/matrix.hpp"
#include "pdml/net.hpp"
#include "pdml/rng.hpp"

namespace pdml {

// Empirical privacy measurement: how well can an adversary holding a
// mechanism's observable trace tell whether a particular document was in
// the input? Two mechanism output populations (document present / absent)
// are compared per summary statistic by the two-sample KS test; the privacy
// estimate is the worst (minimum) p-value across statistics.

// Empirical CDF over a stored sorted sample.
class Ecdf {
 public:
  explicit Ecdf(std::vector<double> sample);  // empty sample is a data error
  double operator()(double x) const;          // fraction of samples <= x
  const std::vector<double>& sorted() const { return sorted_; }
  std::size_t size() const { return sorted_.size(); }

 private:
  std::vector<double> sorted_;
};

// sup_x |F(x) - G(x)| over the merged sample grid.
double ks_statistic(const Ecdf& f, const Ecdf& g);

// Kolmogorov survival function Q(lambda) = 2*sum_{j>=1} (-1)^(j-1) e^(-2 j^2 lambda^2),
// clamped to [0,1].
double ks_survival(double lambda);

// Asymptotic two-sample p-value with the standard small-sample correction:
// lambda = (sqrt(ne) + 0.12 + 0.11/sqrt(ne)) * D, ne = |a||b|/(|a|+|b|).
// Requires at least 8 samples on each side.
double ks_2sample_pvalue(const std::vector<double>& a,
                         const std::vector<double>& b);

// A mechanism maps a database to the trace its run reveals; all randomness
// comes from the supplied generator, so runs are reproducible.
using Mechanism =
    std::function<ObservableTrace(const DenseMatrix& database, SeededRng& rng)>;

// An adversary's summary of one trace with respect to the target document.
using Statistic =
    std::function<double(const ObservableTrace&, std::span<const double> x)>;

struct NamedStatistic {
  std::string name;
  Statistic fn;
};

// Sub-database draws for the two sides. With-side: n_sub-1 distinct rows of
// X excluding row x_row, plus that row at a random position. Without-side:
// n_sub distinct rows excluding x_row, or a fully synthetic U[0,1) database
// of the same shape. n_sub > rows-1 is a data error.
DenseMatrix draw_with_side(const DenseMatrix& x_db, std::size_t x_row,
                           std::size_t n_sub, SeededRng& rng);
DenseMatrix draw_without_side(const DenseMatrix& x_db, std::size_t x_row,
                              std::size_t n_sub, SeededRng& rng);
DenseMatrix draw_random_db(std::size_t rows, std::size_t cols, SeededRng& rng);

enum class SimulatorKind { Subsample, RandomDb };

struct KsdpOptions {
  std::size_t t = 100;   // mechanism runs per side (>= 8)
  std::size_t n_sub = 0; // sub-database rows; 0 means ceil(0.8 * rows)
  SimulatorKind simulator = SimulatorKind::Subsample;
  std::uint64_t seed = 1;
  std::string cache_path;  // when nonempty, per-run statistic values are saved
};

// One evaluated run: which side it belongs to, the per-run substream index,
// and the statistic values in configured order.
struct SampleRecord {
  bool with_side = false;
  std::uint64_t run = 0;
  std::vector<double> values;
};

struct KsdpResult {
  double pi = 1.0;                // min p-value over statistics
  std::vector<double> p_values;   // per statistic
  std::vector<SampleRecord> records;
};

// The measurement loop: t with-side databases through mech, t without-side
// databases through sim, every statistic evaluated on every trace, KS
// p-value per statistic, minimum returned. Deterministic given opt.seed.
KsdpResult measure_ksdp(const Mechanism& mech, const Mechanism& sim,
                        const std::vector<NamedStatistic>& stats,
                        const DenseMatrix& x_db, std::size_t x_row,
                        const KsdpOptions& opt);

// Recomputes the KS aggregation from stored records (e.g. a loaded cache),
// so statistics need not be re-run against fresh mechanism executions.
KsdpResult ksdp_from_records(std::vector<SampleRecord> records,
                             std::size_t n_stats);

// Sample cache file: text, self-describing header naming the statistics,
// then one line per record.
void save_sample_cache(const std::string& path,
                       const std::vector<std::string>& stat_names,
                       const std::vector<SampleRecord>& records);
std::vector<SampleRecord> load_sample_cache(const std::string& path,
                                            std::vector<std::string>* stat_names = nullptr);

// Box-constrained least squares a = argmin_{u in [0,1]^k} ||x - u T||^2 by
// projected gradient: fixed step 1/||T T^T||_2, up to 500 iterations,
// stopping when an iterate moves by less than 1e-8.
std::vector<double> box_ls_weights(std::span<const double> x,
                                   const DenseMatrix& t);

// sigma = sum_j a_j w_j^2: the fitted topic weights of x against T, weighted
// by the squared per-topic denominators an observer collects from the trace.
double nmf_adversary_statistic(const DenseMatrix& t, std::span<const double> w_den,
                               std::span<const double> x);

// Builds the trace-driven form of the statistic above for a protocol run
// with k topics under the given label prefix: T from "<prefix>T_final", w_j
// from the last sweep's "<prefix>den.s<s>.t<j>" entries.
NamedStatistic make_nmf_trace_statistic(std::size_t k,
                                        const std::string& prefix = "");

// Adversary's estimate of the global squared singular values from its own
// share: (n_v + n_a)/n_a * sigma_a^2 per component.
std::vector<double> estimate_sigma_sq(std::span<const double> sigma_a,
                                      double n_v, double n_a);

// Correlation-family statistics of a revealed (or estimated) spectrum:
// S = V diag(sigma_sq) V^T; the weighted family reduces |S .* x x^T| by
// (max, sum, sum-of-squares); the deviation family reduces
// |S/||S||_F - x x^T / ||x||| the same way (zero x is a data error there).
std::vector<double> svd_weighted_statistics(const DenseMatrix& v_k,
                                            std::span<const double> sigma_sq,
                                            std::span<const double> x);
std::vector<double> svd_deviation_statistics(const DenseMatrix& v_k,
                                             std::span<const double> sigma_sq,
                                             std::span<const double> x);
// All six, weighted family first.
std::vector<double> svd_statistics(const DenseMatrix& v_k,
                                   std::span<const double> sigma_sq,
                                   std::span<const double> x);

}  // namespace pdml
