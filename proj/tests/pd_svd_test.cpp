#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <bit>
#include <cmath>
#include <regex>
#include <string>
#include <vector>

#include "pdml/beaver.hpp"
#include "pdml/errors.hpp"
#include "pdml/matrix.hpp"
#include "pdml/net.hpp"
#include "pdml/pd_svd.hpp"
#include "pdml/rng.hpp"

using namespace pdml;

namespace {

Eigen::MatrixXd to_eigen(const DenseMatrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j);
  return out;
}

double subspace_angle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::MatrixXd qa = Eigen::HouseholderQR<Eigen::MatrixXd>(a)
                                 .householderQ() *
                             Eigen::MatrixXd::Identity(a.rows(), a.cols());
  const Eigen::MatrixXd qb = Eigen::HouseholderQR<Eigen::MatrixXd>(b)
                                 .householderQ() *
                             Eigen::MatrixXd::Identity(b.rows(), b.cols());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(qa.transpose() * qb);
  const double c = std::min(1.0, svd.singularValues().minCoeff());
  return std::acos(c);
}

std::vector<DenseMatrix> wishart_blocks(std::size_t parties, std::size_t rows,
                                        std::size_t d, SeededRng& rng) {
  std::vector<DenseMatrix> out;
  for (std::size_t m = 0; m < parties; ++m) {
    const DenseMatrix x = gaussian_matrix(rows, d, 1.0, rng);
    out.push_back(matmul(transpose(x), x));
  }
  return out;
}

// Runs the caller-side composition of the protocol: announce the scale, feed
// the scaled block into the iteration.
std::vector<DenseMatrix> run_protocol(const std::vector<DenseMatrix>& blocks,
                                      const PdSvdConfig& cfg,
                                      std::vector<DealerMaterial>* mats =
                                          nullptr) {
  std::vector<DenseMatrix> vs(blocks.size());
  run_parties(static_cast<PartyIndex>(blocks.size()), [&](Party& p) {
    const double s = scale_bound(p, blocks[p.index()], cfg);
    DenseMatrix scaled = blocks[p.index()];
    for (double& v : scaled.data()) v /= s;
    vs[p.index()] =
        pd_svd(p, scaled, cfg, mats ? &(*mats)[p.index()] : nullptr);
  });
  return vs;
}

}  // namespace

TEST_CASE("a single party float run equals the central reference bit for bit") {
  SeededRng rng(1001, 0);
  const auto blocks = wishart_blocks(1, 20, 10, rng);
  PdSvdConfig cfg;
  cfg.k = 3;
  cfg.tau = 40;
  cfg.nss.mode = NssMode::Float;
  cfg.seed = 3;

  const auto vs = run_protocol(blocks, cfg);
  const DenseMatrix central = central_svd_reference(blocks, cfg);
  CHECK(max_abs_diff(vs[0], central) == 0.0);
}

TEST_CASE("three party float runs track the central reference and the truth") {
  // Gapped spectrum split across parties in known proportions, so the power
  // iteration has a certified convergence rate against the eigensolver.
  SeededRng rng(1002, 0);
  const std::size_t d = 12, k = 3;
  const DenseMatrix g = gaussian_matrix(d, d, 1.0, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(to_eigen(g));
  const Eigen::MatrixXd q =
      qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd lambda(d);
  for (std::size_t i = 0; i < d; ++i)
    lambda(i) = std::pow(0.6, static_cast<double>(i));
  const Eigen::MatrixXd total = q * lambda.asDiagonal() * q.transpose();

  const double weights[] = {0.4, 0.35, 0.25};
  std::vector<DenseMatrix> blocks;
  for (double w : weights) {
    DenseMatrix b(d, d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        b(i, j) = w * 0.5 * (total(i, j) + total(j, i));
    blocks.push_back(b);
  }

  PdSvdConfig cfg;
  cfg.k = k;
  cfg.tau = 120;
  cfg.nss.mode = NssMode::Float;
  cfg.seed = 11;

  const auto vs = run_protocol(blocks, cfg);
  CHECK(max_abs_diff(vs[0], vs[1]) == 0.0);
  CHECK(max_abs_diff(vs[0], vs[2]) == 0.0);

  const DenseMatrix central = central_svd_reference(blocks, cfg);
  CHECK(max_abs_diff(vs[0], central) <= 1e-6);

  // Orthonormal output.
  const Eigen::MatrixXd ev = to_eigen(vs[0]);
  CHECK((ev.transpose() * ev - Eigen::MatrixXd::Identity(k, k))
            .cwiseAbs()
            .maxCoeff() < 1e-10);

  // Against the eigensolver ground truth of the summed matrix.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(total);
  const Eigen::MatrixXd truth = eig.eigenvectors().rightCols(k);
  CHECK(subspace_angle(ev, truth) < 1e-6);
}

TEST_CASE("fixed backends agree with each other exactly and with float closely") {
  SeededRng rng(1003, 0);
  const auto blocks = wishart_blocks(2, 12, 8, rng);
  PdSvdConfig base;
  base.k = 2;
  base.tau = 5;
  base.seed = 23;

  PdSvdConfig float_cfg = base;
  float_cfg.nss.mode = NssMode::Float;
  const auto float_vs = run_protocol(blocks, float_cfg);

  PdSvdConfig ideal_cfg = base;
  ideal_cfg.nss.mode = NssMode::FixedIdeal;
  const auto ideal_vs = run_protocol(blocks, ideal_cfg);

  PdSvdConfig shared_cfg = base;
  shared_cfg.nss.mode = NssMode::FixedShared;
  SeededRng deal_rng(1004, 0);
  auto mats = generate_dealer_material(
      2, pd_svd_budget(8, shared_cfg, 2), shared_cfg.nss.f, deal_rng);
  const auto shared_vs = run_protocol(blocks, shared_cfg, &mats);

  CHECK(max_abs_diff(ideal_vs[0], shared_vs[0]) == 0.0);
  CHECK(max_abs_diff(ideal_vs[0], float_vs[0]) <= 1e-4);

  // The dealer budget is sized exactly for one run.
  for (const auto& m : mats) CHECK(m.consumed() == m.stocked());
}

TEST_CASE("the shared transcript does not carry the spectrum") {
  SeededRng rng(1005, 0);
  const auto blocks = wishart_blocks(2, 12, 8, rng);
  PdSvdConfig cfg;
  cfg.k = 2;
  cfg.tau = 4;
  cfg.seed = 29;
  cfg.nss.mode = NssMode::FixedShared;

  // The hidden quantities: eigenvalues of the summed scaled matrix and their
  // roots (the limits of the per-column norms), plus the unscaled versions.
  double s = 0.0;
  for (const auto& b : blocks) s += frobenius_norm(b);
  Eigen::MatrixXd total = to_eigen(blocks[0]) + to_eigen(blocks[1]);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(total);
  std::vector<double> secrets;
  for (int i = 0; i < eig.eigenvalues().size(); ++i) {
    const double unscaled = eig.eigenvalues()(i);
    for (double v : {unscaled, unscaled / s}) {
      secrets.push_back(v);
      if (v > 0.0) secrets.push_back(std::sqrt(v));
    }
  }

  SeededRng deal_rng(1006, 0);
  auto mats = generate_dealer_material(2, pd_svd_budget(8, cfg, 2), cfg.nss.f,
                                       deal_rng);
  std::vector<DenseMatrix> vs(2);
  const RunResult run = run_parties(2, [&](Party& p) {
    const double sc = scale_bound(p, blocks[p.index()], cfg);
    DenseMatrix scaled = blocks[p.index()];
    for (double& v : scaled.data()) v /= sc;
    vs[p.index()] = pd_svd(p, scaled, cfg, &mats[p.index()]);
  });

  const double tol = 8.0 * std::ldexp(1.0, -cfg.nss.f);
  std::size_t words = 0;
  for (const auto& e : run.transcript) {
    for (std::size_t off = 0; off + 8 <= e.payload.size(); off += 8) {
      std::uint64_t w = 0;
      for (int b = 7; b >= 0; --b)
        w = (w << 8) | e.payload[off + static_cast<std::size_t>(b)];
      ++words;
      const double as_double = std::bit_cast<double>(w);
      const double as_fixed =
          static_cast<double>(static_cast<std::int64_t>(w)) *
          std::ldexp(1.0, -cfg.nss.f);
      for (double candidate : {as_double, as_fixed}) {
        if (!std::isfinite(candidate)) continue;
        for (double secret : secrets)
          CHECK(std::abs(candidate - secret) > tol);
      }
    }
  }
  CHECK(words > 1000);
}

TEST_CASE("pca centers globally and matches its central reference") {
  SeededRng rng(1007, 0);
  std::vector<DenseMatrix> blocks;
  for (int m = 0; m < 3; ++m) {
    DenseMatrix x = gaussian_matrix(15, 6, 1.0, rng);
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t c = 0; c < x.cols(); ++c)
        x(i, c) += 2.0 * static_cast<double>(c);  // common offset to remove
    blocks.push_back(x);
  }

  PdSvdConfig cfg;
  cfg.k = 2;
  cfg.tau = 80;
  cfg.nss.mode = NssMode::Float;
  cfg.seed = 41;

  std::vector<PdPcaResult> res(3);
  run_parties(3, [&](Party& p) {
    res[p.index()] = pd_pca(p, blocks[p.index()], cfg);
  });

  CHECK(res[0].n_total == 45.0);
  CHECK(res[0].scale == res[1].scale);

  // Global centering: the stacked centered rows sum to zero per column.
  for (std::size_t c = 0; c < 6; ++c) {
    double colsum = 0.0;
    for (const auto& r : res)
      for (std::size_t i = 0; i < r.x_centered.rows(); ++i)
        colsum += r.x_centered(i, c);
    CHECK(std::abs(colsum) < 1e-9);
  }

  // Exact mean-subtraction formula per entry.
  std::vector<double> mu(6, 0.0);
  for (const auto& b : blocks)
    for (std::size_t i = 0; i < b.rows(); ++i)
      for (std::size_t c = 0; c < 6; ++c) mu[c] += b(i, c);
  for (double& v : mu) v /= 45.0;
  for (std::size_t i = 0; i < blocks[0].rows(); ++i)
    for (std::size_t c = 0; c < 6; ++c)
      CHECK(res[0].x_centered(i, c) ==
            doctest::Approx(blocks[0](i, c) - mu[c]).epsilon(1e-12));

  const DenseMatrix central = central_pca_reference(blocks, cfg);
  CHECK(max_abs_diff(res[0].v, central) <= 1e-6);
}

TEST_CASE("literal centering reproduces the printed weighting and differs") {
  SeededRng rng(1008, 0);
  std::vector<DenseMatrix> blocks;
  for (int m = 0; m < 2; ++m) {
    DenseMatrix x = gaussian_matrix(8 + 4 * m, 5, 1.0, rng);
    for (double& v : x.data()) v += 1.5;
    blocks.push_back(x);
  }
  PdSvdConfig cfg;
  cfg.k = 2;
  cfg.tau = 30;
  cfg.nss.mode = NssMode::Float;
  cfg.seed = 43;

  PdSvdConfig literal = cfg;
  literal.literal_centering = true;

  std::vector<PdPcaResult> global(2), printed(2);
  run_parties(2, [&](Party& p) {
    global[p.index()] = pd_pca(p, blocks[p.index()], cfg);
  });
  run_parties(2, [&](Party& p) {
    printed[p.index()] = pd_pca(p, blocks[p.index()], literal);
  });

  // Printed rule: subtract (n_m / n) times the local column sum.
  const double n = 20.0;
  for (std::size_t m = 0; m < 2; ++m) {
    const double w = static_cast<double>(blocks[m].rows()) / n;
    for (std::size_t c = 0; c < 5; ++c) {
      double colsum = 0.0;
      for (std::size_t i = 0; i < blocks[m].rows(); ++i)
        colsum += blocks[m](i, c);
      for (std::size_t i = 0; i < blocks[m].rows(); ++i)
        CHECK(printed[m].x_centered(i, c) ==
              doctest::Approx(blocks[m](i, c) - w * colsum).epsilon(1e-12));
    }
  }
  CHECK(max_abs_diff(global[0].x_centered, printed[0].x_centered) > 1e-3);
  CHECK(max_abs_diff(global[0].v, printed[0].v) > 1e-6);
}

TEST_CASE("the scale announcement is the party ordered norm sum") {
  SeededRng rng(1009, 0);
  const auto blocks = wishart_blocks(3, 10, 6, rng);
  PdSvdConfig cfg;
  cfg.nss.mode = NssMode::Float;
  double expected = 0.0;
  for (const auto& b : blocks) expected += frobenius_norm(b);
  run_parties(3, [&](Party& p) {
    CHECK(scale_bound(p, blocks[p.index()], cfg) == expected);
  });

  CHECK_THROWS_AS(run_parties(2,
                              [&](Party& p) {
                                scale_bound(p, DenseMatrix(4, 4, 0.0), cfg);
                              }),
                  DataError);
}

TEST_CASE("a spectrum thinner than the block fails loudly") {
  // Rank one data with k = 2: after one multiply both columns collapse onto
  // the dominant direction and orthonormalization has nothing left.
  std::vector<double> u{1.0, 0.5, -0.25, 2.0, 1.5};
  DenseMatrix s(5, 5);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) s(i, j) = u[i] * u[j];
  PdSvdConfig cfg;
  cfg.k = 2;
  cfg.tau = 10;
  cfg.nss.mode = NssMode::Float;
  CHECK_THROWS_AS(run_protocol({s}, cfg), DataError);
}

TEST_CASE("configuration and shape errors are rejected") {
  PdSvdConfig cfg;
  cfg.nss.mode = NssMode::Float;
  DenseMatrix sym(4, 4, 0.1);
  DenseMatrix asym = sym;
  asym(0, 1) = 0.9;

  run_parties(1, [&](Party& p) {
    PdSvdConfig bad = cfg;
    bad.k = 0;
    CHECK_THROWS_AS(pd_svd(p, sym, bad), ConfigError);
    bad.k = 5;
    CHECK_THROWS_AS(pd_svd(p, sym, bad), ConfigError);
    bad.k = 2;
    bad.tau = 0;
    CHECK_THROWS_AS(pd_svd(p, sym, bad), ConfigError);
    CHECK_THROWS_AS(pd_svd(p, DenseMatrix(3, 4, 0.1), cfg),
                    std::invalid_argument);
    CHECK_THROWS_AS(pd_svd(p, asym, cfg), DataError);
    CHECK_THROWS_AS(pd_pca(p, DenseMatrix(3, 0), cfg), DataError);
  });
}

TEST_CASE("iteration labels are the only observables") {
  SeededRng rng(1010, 0);
  const auto blocks = wishart_blocks(2, 8, 5, rng);
  PdSvdConfig cfg;
  cfg.k = 2;
  cfg.tau = 3;
  cfg.nss.mode = NssMode::Float;

  const RunResult svd_run = run_parties(2, [&](Party& p) {
    const double s = scale_bound(p, blocks[p.index()], cfg);
    DenseMatrix scaled = blocks[p.index()];
    for (double& v : scaled.data()) v /= s;
    pd_svd(p, scaled, cfg);
  });
  const std::regex svd_allowed("V0|scale|iter\\d+\\.col\\d+");
  std::size_t iter_labels = 0;
  for (const auto& label : svd_run.traces[0].labels()) {
    CHECK(std::regex_match(label, svd_allowed));
    if (label.rfind("iter", 0) == 0) ++iter_labels;
  }
  CHECK(iter_labels == cfg.k * cfg.tau);
  CHECK(svd_run.traces[0].has("V0"));
  CHECK(svd_run.traces[0].has("scale"));

  std::vector<DenseMatrix> rows;
  for (int m = 0; m < 2; ++m) rows.push_back(gaussian_matrix(6, 5, 1.0, rng));
  const RunResult pca_run = run_parties(2, [&](Party& p) {
    pd_pca(p, rows[p.index()], cfg);
  });
  const std::regex pca_allowed("n|colsum|scale|V0|iter\\d+\\.col\\d+");
  for (const auto& label : pca_run.traces[0].labels())
    CHECK(std::regex_match(label, pca_allowed));
  CHECK(pca_run.traces[0].has("n"));
  CHECK(pca_run.traces[0].has("colsum"));
}
