#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pdml/matrix.hpp"
#include "pdml/net.hpp"
#include "pdml/nmf.hpp"
#include "pdml/secsum.hpp"

namespace pdml {

// Multi-party NMF over row-partitioned corpora. Each party keeps its rows
// and its W block; the global T is driven entirely by summed reductions, so
// the only values any party observes are the per-topic numerator and
// denominator sums (plus the shared initialization draw and the final T,
// which are functions of those sums).

struct PdNmfConfig {
  NmfParams params;                  // main-phase solver settings
  std::size_t local_max_iters = 50;  // init: per-party local solves
  std::size_t init_max_iters = 200;  // init: merge solve over pseudo-corpora
  SecSumMode mode = SecSumMode::Float;
  int f = 31;                 // fraction bits (fixed payload paths)
  double value_bound = 64.0;  // per-summand magnitude bound (fixed paths)
  std::uint64_t seed = 1;     // shared protocol seed
  std::vector<std::string> features;  // agreed ordered feature names
};

// Builds the channel a config describes (codec sized for p.count() parties).
SecSumChannel make_channel(Party& p, const PdNmfConfig& cfg);

// Broadcasts a digest of (k, d, ordered feature names) and compares across
// parties; any mismatch aborts with a protocol error.
void verify_feature_agreement(Party& p, std::size_t k, std::size_t d,
                              const std::vector<std::string>& features);

// One party's run of the summed alternating solver from a shared T0. Per
// topic: local residual and W-column update, then the T row is rebuilt from
// sum(W_:t^T R_t) and sum(||W_:t||^2) and projected. Sweeps stop on the same
// relative-change rule as the centralized solver. Returns the local W block
// and the (replicated) final T.
//
// Trace labels: "<prefix>num.s<sweep>.t<topic>", "<prefix>den.s<sweep>.t<topic>",
// and "<prefix>T_final".
NmfModel pd_nmf_iter(Party& p, const DenseMatrix& x_local,
                     const DenseMatrix& t0, const NmfParams& params,
                     SecSumChannel& ch, const std::string& label_prefix = "");

// Merge-based initialization: each party runs the SVD init and a local solve
// on its own rows, scales the local topic rows by their W column norms into a
// pseudo-corpus, parties jointly draw T0 (sum of per-party uniform draws,
// rows normalized, label "init.T0"), and the summed solver runs over the
// pseudo-corpora (labels under "init."). Returns the shared T_init.
DenseMatrix pd_nmf_init(Party& p, const DenseMatrix& x_local,
                        const PdNmfConfig& cfg, SecSumChannel& ch);

// Full workflow: feature-agreement check, initialization, then the main
// summed solve on the real corpora.
NmfModel pd_nmf(Party& p, const DenseMatrix& x_local, const PdNmfConfig& cfg);

// Total noise stddev of the Gaussian mechanism at (epsilon, delta) for the
// given sensitivity.
double gaussian_mechanism_sigma(double epsilon, double delta,
                                double sensitivity);

// Differential-privacy baseline: the same workflow with every summed
// observable carrying additive Gaussian noise of total stddev
// sensitivity*sqrt(2 ln(1.25/delta))/epsilon, contributed as per-party
// N(0, sigma^2/M). epsilon <= 0 or delta outside (0,1) is a config error.
NmfModel dp_noised_pd_nmf(Party& p, const DenseMatrix& x_local,
                          const PdNmfConfig& cfg, double epsilon, double delta,
                          double sensitivity);

// Centralized analogue of the full workflow on an already-partitioned
// corpus: per-block local solves and merge in one process, then the
// centralized solver on the stacked corpus. Reference route for
// protocol-equivalence checks; uses the same seed-derived draws as the
// protocol.
struct CentralPipelineResult {
  DenseMatrix t_init;
  NmfModel model;
};
CentralPipelineResult central_nmf_pipeline(
    const std::vector<DenseMatrix>& x_blocks, const PdNmfConfig& cfg);

}  // namespace pdml
