#include "pdml/pd_nmf.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "pdml/errors.hpp"

namespace pdml {

namespace {

// Stream tag for the per-party T0 draws (the channel reserves 0x10000 and
// 0x20000 for share and noise randomness).
constexpr std::uint64_t kInitDrawStream = 0x30000;

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

// Pseudo-corpus of a locally fitted model: topic row j scaled by the norm of
// W's column j, so the row carries the topic's total weight in the corpus.
DenseMatrix weighted_topic_rows(const NmfModel& m) {
  DenseMatrix pseudo(m.t.rows(), m.t.cols());
  for (std::size_t j = 0; j < m.t.rows(); ++j) {
    double sq = 0.0;
    for (std::size_t i = 0; i < m.w.rows(); ++i) sq += m.w(i, j) * m.w(i, j);
    const double vjj = std::sqrt(sq);
    for (std::size_t c = 0; c < m.t.cols(); ++c)
      pseudo(j, c) = vjj * m.t(j, c);
  }
  return pseudo;
}

std::uint64_t feature_digest(std::size_t k, std::size_t d,
                             const std::vector<std::string>& features) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  const auto mix_byte = [&h](std::uint8_t b) {
    h ^= b;
    h *= 1099511628211ull;
  };
  const auto mix_u64 = [&](std::uint64_t w) {
    for (int i = 0; i < 8; ++i) mix_byte(static_cast<std::uint8_t>(w >> (8 * i)));
  };
  mix_u64(k);
  mix_u64(d);
  mix_u64(features.size());
  for (const auto& name : features) {
    for (char c : name) mix_byte(static_cast<std::uint8_t>(c));
    mix_byte(0);
  }
  return h;
}

}  // namespace

SecSumChannel make_channel(Party& p, const PdNmfConfig& cfg) {
  return SecSumChannel(p, cfg.mode,
                       FixedCodec(cfg.f, cfg.value_bound, p.count()), cfg.seed);
}

void verify_feature_agreement(Party& p, std::size_t k, std::size_t d,
                              const std::vector<std::string>& features) {
  const std::uint64_t mine = feature_digest(k, d, features);
  const std::uint64_t round = p.alloc_round();
  const std::uint64_t words[] = {mine};
  p.broadcast_u64s(round, topic::kSetup, words);
  for (PartyIndex i = 0; i < p.count(); ++i) {
    if (i == p.index()) continue;
    const auto theirs = p.recv_u64s(i, round, topic::kSetup);
    if (theirs.size() != 1 || theirs[0] != mine)
      throw ProtocolError(
          "parties disagree on the feature list or problem dimensions");
  }
}

NmfModel pd_nmf_iter(Party& p, const DenseMatrix& x_local,
                     const DenseMatrix& t0, const NmfParams& params,
                     SecSumChannel& ch, const std::string& label_prefix) {
  check_params(params);
  if (t0.rows() != params.k || t0.cols() != x_local.cols())
    throw std::invalid_argument("pd_nmf_iter: T0 shape mismatch");
  check_nonnegative(x_local, "pd_nmf_iter: X");
  check_nonnegative(t0, "pd_nmf_iter: T0");

  // Same sweep as the centralized solver, with the two topic reductions
  // routed through the channel. A one-party float-path run therefore
  // reproduces the centralized arithmetic exactly.
  const std::size_t n = x_local.rows(), d = x_local.cols(), k = params.k;
  DenseMatrix w(n, k, 0.0);
  DenseMatrix t = t0;
  DenseMatrix e = x_local;
  DenseMatrix r(n, d);

  for (std::size_t iter = 0; iter < params.max_iters; ++iter) {
    const DenseMatrix t_prev = t;
    for (std::size_t tt = 0; tt < k; ++tt) {
      for (std::size_t i = 0; i < n; ++i) {
        const double wi = w(i, tt);
        for (std::size_t c = 0; c < d; ++c) r(i, c) = e(i, c) + wi * t(tt, c);
      }
      const std::vector<double> w_col =
          update_w_column(r, t.row(tt), params.gamma, params.delta);
      for (std::size_t i = 0; i < n; ++i) w(i, tt) = w_col[i];

      const std::string tag =
          ".s" + std::to_string(iter) + ".t" + std::to_string(tt);
      const std::vector<double> num =
          ch.sum(p, topic_correlation(r, w_col), label_prefix + "num" + tag);
      const double den_sum =
          ch.sum(p, {dot(w_col, w_col)}, label_prefix + "den" + tag)[0];
      // Injected noise can push the summed denominator negative; clamping is
      // the identity on noiseless runs.
      const double den = den_sum > 0.0 ? den_sum : 0.0;

      std::vector<double> t_row =
          finish_t_row(num, den, params.alpha, params.beta);
      if (params.project_simplex) t_row = simplex_project(t_row);
      for (std::size_t c = 0; c < d; ++c) t(tt, c) = t_row[c];

      for (std::size_t i = 0; i < n; ++i) {
        const double wi = w_col[i];
        for (std::size_t c = 0; c < d; ++c) e(i, c) = r(i, c) - wi * t(tt, c);
      }
    }
    const double dist = frobenius_distance(t, t_prev);
    const double base = frobenius_norm(t_prev);
    if ((base > 0.0 ? dist / base : dist) < params.tol) break;
  }
  p.reveal(label_prefix + "T_final", t.data());
  return {std::move(w), std::move(t)};
}

DenseMatrix pd_nmf_init(Party& p, const DenseMatrix& x_local,
                        const PdNmfConfig& cfg, SecSumChannel& ch) {
  const std::size_t k = cfg.params.k, d = x_local.cols();

  // Local phase: SVD-seeded solve on this party's rows only.
  NmfParams local = cfg.params;
  local.max_iters = cfg.local_max_iters;
  const DenseMatrix t_loc = nnsvd_init(x_local, k);
  const DenseMatrix pseudo = weighted_topic_rows(rri_nmf(x_local, local, t_loc));

  // Shared T0: every party contributes a uniform draw scaled by 1/M; the
  // revealed sum (rows normalized) seeds the merge solve.
  SeededRng draw_rng = SeededRng(cfg.seed).derive(kInitDrawStream + p.index());
  DenseMatrix draw = uniform_matrix(k, d, draw_rng);
  const double m_parties = static_cast<double>(p.count());
  for (double& v : draw.data()) v = v / m_parties;
  DenseMatrix t0(k, d, ch.sum(p, draw.data(), "init.T0"));
  // Channel noise can push summed draws negative; the clamp is the identity
  // on noiseless runs because every contribution is nonnegative.
  for (double& v : t0.data()) v = v > 0.0 ? v : 0.0;
  normalize_rows_l1(t0);

  NmfParams merge = cfg.params;
  merge.max_iters = cfg.init_max_iters;
  return pd_nmf_iter(p, pseudo, t0, merge, ch, "init.").t;
}

NmfModel pd_nmf(Party& p, const DenseMatrix& x_local, const PdNmfConfig& cfg) {
  SecSumChannel ch = make_channel(p, cfg);
  verify_feature_agreement(p, cfg.params.k, x_local.cols(), cfg.features);
  const DenseMatrix t_init = pd_nmf_init(p, x_local, cfg, ch);
  return pd_nmf_iter(p, x_local, t_init, cfg.params, ch, "");
}

double gaussian_mechanism_sigma(double epsilon, double delta,
                                double sensitivity) {
  if (epsilon <= 0.0)
    throw ConfigError("dp baseline: epsilon must be positive");
  if (!(delta > 0.0 && delta < 1.0))
    throw ConfigError("dp baseline: delta must lie in (0, 1)");
  if (sensitivity <= 0.0)
    throw ConfigError("dp baseline: sensitivity must be positive");
  return sensitivity * std::sqrt(2.0 * std::log(1.25 / delta)) / epsilon;
}

NmfModel dp_noised_pd_nmf(Party& p, const DenseMatrix& x_local,
                          const PdNmfConfig& cfg, double epsilon, double delta,
                          double sensitivity) {
  const double sigma = gaussian_mechanism_sigma(epsilon, delta, sensitivity);
  SecSumChannel ch = make_channel(p, cfg);
  ch.enable_noise(sigma);
  verify_feature_agreement(p, cfg.params.k, x_local.cols(), cfg.features);
  const DenseMatrix t_init = pd_nmf_init(p, x_local, cfg, ch);
  return pd_nmf_iter(p, x_local, t_init, cfg.params, ch, "");
}

CentralPipelineResult central_nmf_pipeline(
    const std::vector<DenseMatrix>& x_blocks, const PdNmfConfig& cfg) {
  if (x_blocks.empty())
    throw ConfigError("central pipeline: no corpus blocks");
  const std::size_t k = cfg.params.k, d = x_blocks.front().cols();
  for (const auto& b : x_blocks)
    if (b.cols() != d)
      throw DataError("central pipeline: blocks disagree on column count");

  NmfParams local = cfg.params;
  local.max_iters = cfg.local_max_iters;
  std::vector<DenseMatrix> pseudos;
  pseudos.reserve(x_blocks.size());
  for (const auto& block : x_blocks) {
    const DenseMatrix t_loc = nnsvd_init(block, k);
    pseudos.push_back(weighted_topic_rows(rri_nmf(block, local, t_loc)));
  }

  // T0 exactly as the parties compute it: per-block draws from the same
  // derived streams, divided by M, added in block order.
  std::vector<double> total(k * d, 0.0);
  const double m_parties = static_cast<double>(x_blocks.size());
  for (std::size_t m = 0; m < x_blocks.size(); ++m) {
    SeededRng draw_rng = SeededRng(cfg.seed).derive(kInitDrawStream + m);
    DenseMatrix draw = uniform_matrix(k, d, draw_rng);
    for (std::size_t i = 0; i < total.size(); ++i)
      total[i] += draw.data()[i] / m_parties;
  }
  DenseMatrix t0(k, d, std::move(total));
  normalize_rows_l1(t0);

  NmfParams merge = cfg.params;
  merge.max_iters = cfg.init_max_iters;
  const DenseMatrix t_init = rri_nmf(vstack(pseudos), merge, t0).t;
  NmfModel model = rri_nmf(vstack(x_blocks), cfg.params, t_init);
  return {t_init, std::move(model)};
}

}  // namespace pdml
