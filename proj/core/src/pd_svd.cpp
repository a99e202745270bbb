#include "pdml/pd_svd.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "pdml/errors.hpp"

namespace pdml {

namespace {

// Stream tags under the shared seed: V0 draws, and the share randomness of
// the normalized sums. Channel domains 1 (SVD), 2 (PCA), and 3 (caller-side
// scale channels) occupy the shifted 0x110000/0x210000/0x310000 ranges so no
// two channels built from one seed replay the same share masks.
constexpr std::uint64_t kSvdDrawStream = 0x60000;
constexpr std::uint64_t kSvdNssStream = 0x70000;
constexpr std::uint64_t kSvdChannelDomain = 1;
constexpr std::uint64_t kPcaChannelDomain = 2;
constexpr std::uint64_t kScaleChannelDomain = 3;

void check_svd_config(const PdSvdConfig& cfg, std::size_t d) {
  if (cfg.k == 0 || cfg.k > d)
    throw ConfigError("pd_svd: need 0 < k <= d");
  if (cfg.tau == 0) throw ConfigError("pd_svd: need at least one iteration");
}

void check_covariance_block(const DenseMatrix& s_local) {
  if (s_local.rows() != s_local.cols())
    throw std::invalid_argument("pd_svd: covariance block must be square");
  for (std::size_t i = 0; i < s_local.rows(); ++i)
    for (std::size_t j = i + 1; j < s_local.cols(); ++j)
      if (std::fabs(s_local(i, j) - s_local(j, i)) > 1e-8)
        throw DataError("pd_svd: covariance block is not symmetric");
}

SecSumMode plain_mode(const NssConfig& nss) {
  return nss.mode == NssMode::Float ? SecSumMode::Float : SecSumMode::Fixed;
}

// Per-party stddev for the starting block: the M draws sum to N(0, 1/d^2)
// entries, the same law the central iteration starts from.
double init_stddev(unsigned parties, std::size_t d) {
  return 1.0 / (std::sqrt(static_cast<double>(parties)) *
                static_cast<double>(d));
}

// y = S * V(:,col), ascending-index accumulation (the central iteration's
// kernel, repeated here so both routes round identically).
std::vector<double> apply_block(const DenseMatrix& s, const DenseMatrix& v,
                                std::size_t col) {
  std::vector<double> y(s.rows(), 0.0);
  for (std::size_t i = 0; i < s.rows(); ++i) {
    double acc = 0.0;
    const double* row = s.data().data() + i * s.cols();
    for (std::size_t j = 0; j < s.cols(); ++j) acc += row[j] * v(j, col);
    y[i] = acc;
  }
  return y;
}

std::vector<double> column_sums(const DenseMatrix& x) {
  std::vector<double> out(x.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t c = 0; c < x.cols(); ++c) out[c] += x(i, c);
  return out;
}

}  // namespace

DealerCounts pd_svd_budget(std::size_t d, const PdSvdConfig& cfg,
                           unsigned parties) {
  return nss_budget(d, cfg.nss, parties) *
         static_cast<std::uint64_t>(cfg.k * cfg.tau);
}

double scale_bound(Party& p, const DenseMatrix& s_local, SecSumChannel& ch) {
  const double s = ch.sum(p, {frobenius_norm(s_local)}, "scale")[0];
  if (!(s > 0.0)) throw DataError("scale bound: all-zero data");
  return s;
}

double scale_bound(Party& p, const DenseMatrix& s_local,
                   const PdSvdConfig& cfg) {
  SecSumChannel ch(p, plain_mode(cfg.nss),
                   FixedCodec(cfg.nss.f, cfg.sum_bound, p.count()), cfg.seed,
                   kScaleChannelDomain);
  return scale_bound(p, s_local, ch);
}

DenseMatrix pd_svd(Party& p, const DenseMatrix& s_local, const PdSvdConfig& cfg,
                   DealerMaterial* material) {
  check_covariance_block(s_local);
  const std::size_t d = s_local.rows();
  check_svd_config(cfg, d);

  SecSumChannel ch(p, plain_mode(cfg.nss),
                   FixedCodec(cfg.nss.f, 8.0, p.count()), cfg.seed,
                   kSvdChannelDomain);

  SeededRng draw_rng = SeededRng(cfg.seed).derive(kSvdDrawStream + p.index());
  const DenseMatrix draw =
      gaussian_matrix(d, cfg.k, init_stddev(p.count(), d), draw_rng);
  DenseMatrix v(d, cfg.k, ch.sum(p, draw.data(), "V0"));
  orthonormalize_columns(v);

  SeededRng nss_rng = SeededRng(cfg.seed).derive(kSvdNssStream + p.index());
  for (std::size_t it = 0; it < cfg.tau; ++it) {
    for (std::size_t c = 0; c < cfg.k; ++c) {
      const std::vector<double> y = apply_block(s_local, v, c);
      const std::string label =
          "iter" + std::to_string(it) + ".col" + std::to_string(c);
      const NssResult res =
          normed_secsum(p, y, cfg.nss, nss_rng, material, label);
      for (std::size_t r = 0; r < d; ++r) v(r, c) = res.z[r];
    }
    orthonormalize_columns(v);
  }
  return v;
}

DenseMatrix central_svd_reference(const std::vector<DenseMatrix>& s_blocks,
                                  const PdSvdConfig& cfg) {
  if (s_blocks.empty())
    throw ConfigError("central reference: no covariance blocks");
  const std::size_t d = s_blocks.front().rows();
  for (const auto& b : s_blocks) {
    check_covariance_block(b);
    if (b.rows() != d)
      throw DataError("central reference: blocks disagree on dimension");
  }
  check_svd_config(cfg, d);
  const std::size_t m_count = s_blocks.size();

  // Scale and stacked scaled covariance, summed in party order as the
  // protocol announces them.
  double s = 0.0;
  for (const auto& b : s_blocks) s += frobenius_norm(b);
  if (!(s > 0.0)) throw DataError("scale bound: all-zero data");
  DenseMatrix total(d, d, 0.0);
  for (const auto& b : s_blocks)
    for (std::size_t i = 0; i < total.size(); ++i)
      total.data()[i] += b.data()[i] / s;

  DenseMatrix v0(d, cfg.k, 0.0);
  const double stddev = init_stddev(static_cast<unsigned>(m_count), d);
  for (std::size_t m = 0; m < m_count; ++m) {
    SeededRng draw_rng = SeededRng(cfg.seed).derive(kSvdDrawStream + m);
    const DenseMatrix draw = gaussian_matrix(d, cfg.k, stddev, draw_rng);
    for (std::size_t i = 0; i < v0.size(); ++i)
      v0.data()[i] += draw.data()[i];
  }
  return block_power_iteration_from(total, std::move(v0), cfg.tau);
}

PdPcaResult pd_pca(Party& p, const DenseMatrix& x_local, const PdSvdConfig& cfg,
                   DealerMaterial* material) {
  const std::size_t d = x_local.cols();
  if (d == 0) throw DataError("pd_pca: empty feature set");
  check_svd_config(cfg, d);

  SecSumChannel ch(p, plain_mode(cfg.nss),
                   FixedCodec(cfg.nss.f, cfg.sum_bound, p.count()), cfg.seed,
                   kPcaChannelDomain);

  const double n =
      ch.sum(p, {static_cast<double>(x_local.rows())}, "n")[0];
  if (!(n > 0.0)) throw DataError("pd_pca: corpus has no rows");

  std::vector<double> mu(d, 0.0);
  const std::vector<double> local_sums = column_sums(x_local);
  if (cfg.literal_centering) {
    // As printed in the source algorithm: each party centers by its own
    // (n_m/n)-weighted local mean. Does not globally center the data.
    const double w = static_cast<double>(x_local.rows()) / n;
    for (std::size_t c = 0; c < d; ++c) mu[c] = w * local_sums[c];
  } else {
    const std::vector<double> total = ch.sum(p, local_sums, "colsum");
    for (std::size_t c = 0; c < d; ++c) mu[c] = total[c] / n;
  }

  DenseMatrix centered = x_local;
  for (std::size_t i = 0; i < centered.rows(); ++i)
    for (std::size_t c = 0; c < d; ++c) centered(i, c) -= mu[c];

  DenseMatrix cov = matmul(transpose(centered), centered);
  const double s = scale_bound(p, cov, ch);
  for (double& v : cov.data()) v /= s;

  PdPcaResult out;
  out.v = pd_svd(p, cov, cfg, material);
  out.x_centered = std::move(centered);
  out.scale = s;
  out.n_total = n;
  return out;
}

DenseMatrix central_pca_reference(const std::vector<DenseMatrix>& x_blocks,
                                  const PdSvdConfig& cfg) {
  if (x_blocks.empty())
    throw ConfigError("central reference: no corpus blocks");
  const std::size_t d = x_blocks.front().cols();
  for (const auto& b : x_blocks)
    if (b.cols() != d)
      throw DataError("central reference: blocks disagree on column count");

  double n = 0.0;
  for (const auto& b : x_blocks) n += static_cast<double>(b.rows());
  if (!(n > 0.0)) throw DataError("central reference: corpus has no rows");

  std::vector<double> total(d, 0.0);
  for (const auto& b : x_blocks) {
    const std::vector<double> local = column_sums(b);
    for (std::size_t c = 0; c < d; ++c) total[c] += local[c];
  }

  std::vector<DenseMatrix> covs;
  covs.reserve(x_blocks.size());
  for (const auto& b : x_blocks) {
    DenseMatrix centered = b;
    for (std::size_t i = 0; i < centered.rows(); ++i)
      for (std::size_t c = 0; c < d; ++c) centered(i, c) -= total[c] / n;
    covs.push_back(matmul(transpose(centered), centered));
  }
  return central_svd_reference(covs, cfg);
}

}  // namespace pdml
