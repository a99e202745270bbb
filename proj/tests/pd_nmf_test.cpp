#include <doctest.h>

#include <cmath>
#include <regex>
#include <string>
#include <vector>

#include "pdml/errors.hpp"
#include "pdml/matrix.hpp"
#include "pdml/net.hpp"
#include "pdml/nmf.hpp"
#include "pdml/pd_nmf.hpp"
#include "pdml/rng.hpp"

using namespace pdml;

namespace {

std::vector<std::string> feature_names(std::size_t d) {
  std::vector<std::string> out;
  out.reserve(d);
  for (std::size_t c = 0; c < d; ++c) out.push_back("w" + std::to_string(c));
  return out;
}

// Topic rows on disjoint column spans: mutually orthogonal, trivially
// separable, and exactly recoverable by the local solves.
DenseMatrix disjoint_topics(std::size_t k, std::size_t span, SeededRng& rng) {
  DenseMatrix t(k, k * span, 0.0);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t c = j * span; c < (j + 1) * span; ++c)
      t(j, c) = rng.uniform(0.5, 1.0);
  normalize_rows_l1(t);
  return t;
}

DenseMatrix mix_block(const DenseMatrix& topics, std::size_t rows,
                      SeededRng& rng) {
  DenseMatrix w(rows, topics.rows());
  for (double& v : w.data()) v = rng.uniform(0.2, 1.2);
  return matmul(w, topics);
}

// Each row is a single scaled topic. Unlike dense mixtures, such blocks are
// fit exactly by the local solves, which the merge bound requires.
DenseMatrix pure_block(const DenseMatrix& topics, std::size_t rows,
                       SeededRng& rng) {
  DenseMatrix w(rows, topics.rows(), 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    w(i, i % topics.rows()) = rng.uniform(0.5, 1.5);
  return matmul(w, topics);
}

// The initialization's pseudo-corpus, rebuilt from the standalone kernels:
// local SVD-seeded solve, then each topic row scaled by its W column norm.
DenseMatrix pseudo_corpus(const DenseMatrix& block, const PdNmfConfig& cfg) {
  NmfParams local = cfg.params;
  local.max_iters = cfg.local_max_iters;
  const NmfModel m =
      rri_nmf(block, local, nnsvd_init(block, cfg.params.k));
  DenseMatrix pseudo(m.t.rows(), m.t.cols());
  for (std::size_t j = 0; j < m.t.rows(); ++j) {
    double sq = 0.0;
    for (std::size_t i = 0; i < m.w.rows(); ++i) sq += m.w(i, j) * m.w(i, j);
    for (std::size_t c = 0; c < m.t.cols(); ++c)
      pseudo(j, c) = std::sqrt(sq) * m.t(j, c);
  }
  return pseudo;
}

double local_fit(const DenseMatrix& block, const PdNmfConfig& cfg) {
  NmfParams local = cfg.params;
  local.max_iters = cfg.local_max_iters;
  const NmfModel m =
      rri_nmf(block, local, nnsvd_init(block, cfg.params.k));
  NmfParams plain = cfg.params;
  plain.alpha = plain.beta = plain.gamma = plain.delta = 0.0;
  return nmf_objective(block, m.w, m.t, plain);
}

}  // namespace

TEST_CASE("a single party reproduces the centralized solver bit for bit") {
  SeededRng rng(901, 0);
  const DenseMatrix x = uniform_matrix(25, 12, rng);
  const DenseMatrix t0 = random_init(3, 12, rng);
  NmfParams params;
  params.k = 3;
  params.max_iters = 20;
  params.tol = 1e-9;

  NmfModel central = rri_nmf(x, params, t0);
  NmfModel dist;
  PdNmfConfig cfg;
  cfg.params = params;
  run_parties(1, [&](Party& p) {
    SecSumChannel ch = make_channel(p, cfg);
    dist = pd_nmf_iter(p, x, t0, params, ch);
  });
  CHECK(max_abs_diff(dist.w, central.w) == 0.0);
  CHECK(max_abs_diff(dist.t, central.t) == 0.0);
}

TEST_CASE("three parties match the central pipeline to float reassociation") {
  SeededRng rng(902, 0);
  const DenseMatrix topics = disjoint_topics(3, 4, rng);
  std::vector<DenseMatrix> blocks;
  for (int m = 0; m < 3; ++m) blocks.push_back(mix_block(topics, 18, rng));

  PdNmfConfig cfg;
  cfg.params.k = 3;
  cfg.params.max_iters = 40;
  cfg.params.tol = 1e-7;
  cfg.local_max_iters = 40;
  cfg.init_max_iters = 60;
  cfg.seed = 42;
  cfg.features = feature_names(12);

  const CentralPipelineResult central = central_nmf_pipeline(blocks, cfg);

  std::vector<NmfModel> models(3);
  const RunResult run = run_parties(3, [&](Party& p) {
    models[p.index()] = pd_nmf(p, blocks[p.index()], cfg);
  });

  // Replicated T is bitwise identical across parties, and the whole trace is.
  CHECK(max_abs_diff(models[0].t, models[1].t) == 0.0);
  CHECK(max_abs_diff(models[0].t, models[2].t) == 0.0);
  CHECK(run.traces[0] == run.traces[1]);
  CHECK(run.traces[0] == run.traces[2]);

  // Final topics and the initialization agree with the one-process pipeline
  // up to float reassociation of the three-way sums.
  CHECK(max_abs_diff(models[0].t, central.model.t) <= 1e-6);
  const std::vector<double> t_init = run.traces[0].values("init.T_final");
  REQUIRE(t_init.size() == central.t_init.size());
  double init_dev = 0.0;
  for (std::size_t i = 0; i < t_init.size(); ++i)
    init_dev = std::max(init_dev,
                        std::abs(t_init[i] - central.t_init.data()[i]));
  CHECK(init_dev <= 1e-6);

  // The stacked W blocks solve the same problem: objectives agree.
  const DenseMatrix w_stacked =
      vstack({models[0].w, models[1].w, models[2].w});
  const double obj_dist =
      nmf_objective(vstack(blocks), w_stacked, models[0].t, cfg.params);
  const double obj_central = nmf_objective(vstack(blocks), central.model.w,
                                           central.model.t, cfg.params);
  CHECK(obj_dist == doctest::Approx(obj_central).epsilon(1e-6));
}

TEST_CASE("fixed point channels track the float channel and each other") {
  SeededRng rng(903, 0);
  const DenseMatrix topics = disjoint_topics(2, 4, rng);
  std::vector<DenseMatrix> blocks;
  for (int m = 0; m < 2; ++m) blocks.push_back(mix_block(topics, 10, rng));

  PdNmfConfig base;
  base.params.k = 2;
  base.params.max_iters = 6;
  base.params.tol = 0.0;
  base.local_max_iters = 8;
  base.init_max_iters = 6;
  base.seed = 7;
  base.features = feature_names(8);

  DenseMatrix by_mode[3];
  int at = 0;
  for (SecSumMode mode :
       {SecSumMode::Float, SecSumMode::Fixed, SecSumMode::FixedPrf}) {
    PdNmfConfig cfg = base;
    cfg.mode = mode;
    std::vector<NmfModel> models(2);
    run_parties(2, [&](Party& p) {
      models[p.index()] = pd_nmf(p, blocks[p.index()], cfg);
    });
    by_mode[at++] = models[0].t;
  }
  // Masked and PRF share expansions produce the same sums, so whole runs
  // are bit identical; quantization keeps fixed near float.
  CHECK(max_abs_diff(by_mode[1], by_mode[2]) == 0.0);
  CHECK(max_abs_diff(by_mode[0], by_mode[1]) <= 1e-6);
}

TEST_CASE("feature disagreement aborts the run") {
  SeededRng rng(904, 0);
  const DenseMatrix x = uniform_matrix(6, 4, rng);
  PdNmfConfig cfg;
  cfg.params.k = 2;
  cfg.params.max_iters = 2;
  CHECK_THROWS_AS(
      run_parties(2,
                  [&](Party& p) {
                    PdNmfConfig mine = cfg;
                    mine.features = feature_names(4);
                    if (p.index() == 1) mine.features[2] = "renamed";
                    pd_nmf(p, x, mine);
                  }),
      ProtocolError);

  // Dimension disagreement is caught by the same digest.
  CHECK_THROWS_AS(
      run_parties(2,
                  [&](Party& p) {
                    SecSumChannel ch = make_channel(p, cfg);
                    verify_feature_agreement(p, 2, p.index() == 0 ? 4 : 5,
                                             feature_names(4));
                  }),
      ProtocolError);
}

TEST_CASE("merge initialization upper bounds the stacked reconstruction error") {
  for (std::uint64_t instance = 0; instance < 3; ++instance) {
    SeededRng rng(905 + instance, 0);
    const std::size_t k = 2 + rng.below(2);
    const std::size_t parties = 2 + rng.below(2);
    const DenseMatrix topics = disjoint_topics(k, 4, rng);
    std::vector<DenseMatrix> blocks;
    for (std::size_t m = 0; m < parties; ++m)
      blocks.push_back(pure_block(topics, 12 + rng.below(5), rng));

    PdNmfConfig cfg;
    cfg.params.k = k;
    cfg.params.tol = 1e-13;
    cfg.local_max_iters = 3000;
    cfg.init_max_iters = 25;  // deliberately crude merge, the bound must hold
    cfg.seed = 100 + instance;
    cfg.features = feature_names(topics.cols());

    // Precondition of the bound: the local models fit their blocks exactly.
    for (const auto& block : blocks) CHECK(local_fit(block, cfg) <= 1e-9);

    const DenseMatrix t_init = central_nmf_pipeline(blocks, cfg).t_init;
    std::vector<DenseMatrix> pseudos;
    for (const auto& block : blocks)
      pseudos.push_back(pseudo_corpus(block, cfg));

    const double e_pseudo =
        min_reconstruction_error(vstack(pseudos), t_init);
    const double e_full = min_reconstruction_error(vstack(blocks), t_init);
    CHECK(e_pseudo >= e_full - 1e-8);
  }
}

TEST_CASE("the bound is tight when party topics are mutually orthogonal") {
  // One topic per party, each on its own column span: the pseudo-corpus rows
  // are orthogonal and the per-row errors decouple, so fitting the weighted
  // topics costs exactly as much as fitting the stacked corpus.
  SeededRng rng(908, 0);
  const std::size_t parties = 3, span = 5;
  std::vector<DenseMatrix> blocks;
  for (std::size_t m = 0; m < parties; ++m) {
    DenseMatrix topic(1, parties * span, 0.0);
    for (std::size_t c = m * span; c < (m + 1) * span; ++c)
      topic(0, c) = rng.uniform(0.5, 1.0);
    normalize_rows_l1(topic);
    blocks.push_back(mix_block(topic, 14, rng));
  }

  PdNmfConfig cfg;
  cfg.params.k = 1;
  cfg.params.tol = 1e-13;
  cfg.local_max_iters = 3000;
  cfg.init_max_iters = 200;
  cfg.seed = 17;
  cfg.features = feature_names(parties * span);

  for (const auto& block : blocks) CHECK(local_fit(block, cfg) <= 1e-9);

  const DenseMatrix t_init = central_nmf_pipeline(blocks, cfg).t_init;
  std::vector<DenseMatrix> pseudos;
  for (const auto& block : blocks) pseudos.push_back(pseudo_corpus(block, cfg));

  const double e_pseudo = min_reconstruction_error(vstack(pseudos), t_init);
  const double e_full = min_reconstruction_error(vstack(blocks), t_init);
  CHECK(e_full > 0.01);  // one row cannot span three orthogonal topics
  CHECK(e_pseudo >= e_full - 1e-8);
  CHECK(e_pseudo - e_full <= 1e-6 * e_full);
}

TEST_CASE("gaussian mechanism sigma follows the analytic calibration") {
  const double sigma = gaussian_mechanism_sigma(0.25, 0.01, 2.0);
  CHECK(sigma ==
        doctest::Approx(2.0 * std::sqrt(2.0 * std::log(125.0)) / 0.25));
  CHECK_THROWS_AS(gaussian_mechanism_sigma(0.0, 0.01, 1.0), ConfigError);
  CHECK_THROWS_AS(gaussian_mechanism_sigma(-1.0, 0.01, 1.0), ConfigError);
  CHECK_THROWS_AS(gaussian_mechanism_sigma(1.0, 0.0, 1.0), ConfigError);
  CHECK_THROWS_AS(gaussian_mechanism_sigma(1.0, 1.0, 1.0), ConfigError);
  CHECK_THROWS_AS(gaussian_mechanism_sigma(1.0, 0.01, 0.0), ConfigError);
}

TEST_CASE("a huge privacy budget reproduces the noiseless protocol") {
  SeededRng rng(909, 0);
  const DenseMatrix topics = disjoint_topics(2, 3, rng);
  std::vector<DenseMatrix> blocks;
  for (int m = 0; m < 2; ++m) blocks.push_back(mix_block(topics, 8, rng));

  PdNmfConfig cfg;
  cfg.params.k = 2;
  cfg.params.max_iters = 5;
  cfg.params.tol = 0.0;
  cfg.local_max_iters = 6;
  cfg.init_max_iters = 5;
  cfg.seed = 31;
  cfg.features = feature_names(6);

  std::vector<NmfModel> clean(2), generous(2), tight(2);
  run_parties(2, [&](Party& p) {
    clean[p.index()] = pd_nmf(p, blocks[p.index()], cfg);
  });
  run_parties(2, [&](Party& p) {
    generous[p.index()] =
        dp_noised_pd_nmf(p, blocks[p.index()], cfg, 1e9, 0.01, 1.0);
  });
  run_parties(2, [&](Party& p) {
    tight[p.index()] =
        dp_noised_pd_nmf(p, blocks[p.index()], cfg, 0.5, 0.01, 1.0);
  });

  CHECK(max_abs_diff(clean[0].t, generous[0].t) <= 1e-6);

  NmfParams plain = cfg.params;
  const DenseMatrix x = vstack(blocks);
  const double obj_clean =
      nmf_objective(x, vstack({clean[0].w, clean[1].w}), clean[0].t, plain);
  const double obj_tight =
      nmf_objective(x, vstack({tight[0].w, tight[1].w}), tight[0].t, plain);
  CHECK(obj_tight > obj_clean);
}

TEST_CASE("protocol runs are deterministic and seed sensitive") {
  SeededRng rng(910, 0);
  const DenseMatrix topics = disjoint_topics(2, 3, rng);
  std::vector<DenseMatrix> blocks;
  for (int m = 0; m < 2; ++m) blocks.push_back(mix_block(topics, 7, rng));

  PdNmfConfig cfg;
  cfg.params.k = 2;
  cfg.params.max_iters = 4;
  cfg.params.tol = 0.0;
  cfg.local_max_iters = 5;
  cfg.init_max_iters = 4;
  cfg.seed = 55;
  cfg.features = feature_names(6);

  std::vector<NmfModel> a(2), b(2);
  const RunResult ra = run_parties(2, [&](Party& p) {
    a[p.index()] = pd_nmf(p, blocks[p.index()], cfg);
  });
  const RunResult rb = run_parties(2, [&](Party& p) {
    b[p.index()] = pd_nmf(p, blocks[p.index()], cfg);
  });
  CHECK(max_abs_diff(a[0].t, b[0].t) == 0.0);
  CHECK(max_abs_diff(a[0].w, b[0].w) == 0.0);
  CHECK(ra.traces[0] == rb.traces[0]);

  PdNmfConfig other = cfg;
  other.seed = 56;
  run_parties(2, [&](Party& p) {
    b[p.index()] = pd_nmf(p, blocks[p.index()], other);
  });
  CHECK(max_abs_diff(a[0].t, b[0].t) > 0.0);
}

TEST_CASE("the trace shows only the summed reductions and the final topics") {
  SeededRng rng(911, 0);
  const DenseMatrix topics = disjoint_topics(2, 3, rng);
  std::vector<DenseMatrix> blocks;
  for (int m = 0; m < 2; ++m) blocks.push_back(mix_block(topics, 7, rng));

  PdNmfConfig cfg;
  cfg.params.k = 2;
  cfg.params.max_iters = 3;
  cfg.params.tol = 0.0;
  cfg.local_max_iters = 5;
  cfg.init_max_iters = 3;
  cfg.seed = 77;
  cfg.features = feature_names(6);

  const RunResult run = run_parties(2, [&](Party& p) {
    pd_nmf(p, blocks[p.index()], cfg);
  });

  const std::regex allowed(
      "(init\\.)?(num|den)\\.s\\d+\\.t\\d+|init\\.T0|init\\.T_final|T_final");
  const auto labels = run.traces[0].labels();
  bool saw_t0 = false, saw_init_final = false, saw_final = false;
  for (const auto& label : labels) {
    CHECK(std::regex_match(label, allowed));
    saw_t0 = saw_t0 || label == "init.T0";
    saw_init_final = saw_init_final || label == "init.T_final";
    saw_final = saw_final || label == "T_final";
  }
  CHECK(saw_t0);
  CHECK(saw_init_final);
  CHECK(saw_final);
  CHECK(run.traces[0] == run.traces[1]);
}

TEST_CASE("zero corpora settle on uniform topics") {
  PdNmfConfig cfg;
  cfg.params.k = 2;
  cfg.params.max_iters = 3;
  const DenseMatrix t0 = [] {
    SeededRng rng(912, 0);
    return random_init(2, 4, rng);
  }();
  std::vector<NmfModel> models(2);
  run_parties(2, [&](Party& p) {
    SecSumChannel ch = make_channel(p, cfg);
    models[p.index()] =
        pd_nmf_iter(p, DenseMatrix(6, 4, 0.0), t0, cfg.params, ch);
  });
  for (std::size_t j = 0; j < 2; ++j)
    for (double v : models[0].t.row(j)) CHECK(v == doctest::Approx(0.25));
  for (double v : models[0].w.data()) CHECK(v == 0.0);
}
