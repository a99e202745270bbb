#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pdml/beaver.hpp"
#include "pdml/matrix.hpp"
#include "pdml/net.hpp"
#include "pdml/normed_secsum.hpp"
#include "pdml/power_iteration.hpp"
#include "pdml/secsum.hpp"

namespace pdml {

// Distributed truncated SVD / PCA over row-partitioned data. Each party
// holds a local covariance block S_m = X_m^T X_m, pre-scaled so the summed
// matrix has spectral norm at most 1. The replicated iterate advances only
// through per-column normalized sums, so no party observes the column norms
// that would expose the singular values.

struct PdSvdConfig {
  std::size_t k = 1;      // truncation rank
  std::size_t tau = 100;  // fixed iteration count (transcript-deterministic)
  NssConfig nss;          // backend for the normalized column sums
  std::uint64_t seed = 1;
  // Codec bound for the plain sums a run needs besides the normalized ones
  // (row counts, column sums, the covariance scale) on the fixed paths.
  double sum_bound = 1e6;
  // PCA only: use each party's (n_m/n)-weighted local mean instead of the
  // summed global mean. Kept for comparison; does not globally center X.
  bool literal_centering = false;
};

// Dealer material one party consumes across a full run (k*tau normalized
// sums of d-vectors) in the shared-circuit backend.
DealerCounts pd_svd_budget(std::size_t d, const PdSvdConfig& cfg,
                           unsigned parties);

// Scale factor s = sum_m ||S_m||_F, revealed under label "scale". Dividing
// every local S_m by s bounds the summed spectral norm by 1. All-zero data
// is a data error.
double scale_bound(Party& p, const DenseMatrix& s_local, SecSumChannel& ch);

// Same, but builds the channel itself (codec bound cfg.sum_bound, its own
// stream domain). Use this when composing scale_bound with pd_svd rather
// than inside a protocol that already owns a channel.
double scale_bound(Party& p, const DenseMatrix& s_local,
                   const PdSvdConfig& cfg);

// One party's run on its scaled covariance block: V0 is the sum of
// per-party N(0, 1/(sqrt(M)*d)) draws (label "V0"), then tau rounds of
// per-column normalized sums of S_m V_:c (labels "iter<t>.col<c>") followed
// by local orthonormalization. material feeds the shared-circuit backend.
DenseMatrix pd_svd(Party& p, const DenseMatrix& s_local, const PdSvdConfig& cfg,
                   DealerMaterial* material = nullptr);

// Central reference for the same run: the scale, starting block, and
// iteration mirror the protocol arithmetic on the stacked (unscaled)
// covariance blocks. A one-party float-path protocol run matches this
// exactly.
DenseMatrix central_svd_reference(const std::vector<DenseMatrix>& s_blocks,
                                  const PdSvdConfig& cfg);

struct PdPcaResult {
  DenseMatrix v;           // d x k principal axes of the centered data
  DenseMatrix x_centered;  // this party's rows after mean subtraction
  double scale = 0.0;      // covariance scale factor
  double n_total = 0.0;    // summed row count
};

// Distributed PCA: n = sum(n_m) (label "n"), global column mean from summed
// local column sums (label "colsum"), local mean subtraction, covariance
// scaling, then the iteration above on the centered blocks.
PdPcaResult pd_pca(Party& p, const DenseMatrix& x_local, const PdSvdConfig& cfg,
                   DealerMaterial* material = nullptr);

// Central reference: exact global centering of the stacked rows, then the
// same scaled iteration.
DenseMatrix central_pca_reference(const std::vector<DenseMatrix>& x_blocks,
                                  const PdSvdConfig& cfg);

}  // namespace pdml
