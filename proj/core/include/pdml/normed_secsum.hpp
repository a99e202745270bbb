#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pdml/beaver.hpp"
#include "pdml/circuit.hpp"
#include "pdml/net.hpp"
#include "pdml/rng.hpp"

namespace pdml {

// Normalized secure sum: parties hold x^(0..M-1) in R^d and jointly learn
// z = sum(x) / ||sum(x)||_2 without revealing the unnormalized sum or its
// norm. Three interchangeable backends:
//   Float       broadcast doubles, deterministic central-order arithmetic;
//               reveals the raw sum in transit. Reference semantics for
//               protocol-equivalence runs.
//   FixedIdeal  secure-sum the fixed-point encodings, then every party runs
//               the normalization circuit centrally on the opened sum.
//   FixedShared the same circuit evaluated gate-by-gate on secret shares
//               with dealer material; the only values ever opened are the
//               normalized components and a one-bit degenerate-input flag.
//               The norm itself stays shared.
// The two fixed modes execute the identical instruction stream and agree on
// every output word bit-for-bit.
enum class NssMode { Float, FixedIdeal, FixedShared };

struct NssConfig {
  NssMode mode = NssMode::FixedShared;
  int f = 31;          // fractional bits
  double bound = 1.0;  // per-party per-component magnitude bound
  FixedSqrtParams sqrt_params{};
};

struct NssResult {
  std::vector<double> z;           // normalized sum
  std::vector<std::uint64_t> raw;  // scale-f words (empty in Float mode)
};

// One invocation. rng feeds the FixedIdeal share split; material supplies
// the FixedShared backend (and must match cfg.f). The decoded result is
// recorded in the party trace under `label`; nothing else is recorded.
NssResult normed_secsum(Party& p, const std::vector<double>& x,
                        const NssConfig& cfg, SeededRng& rng,
                        DealerMaterial* material, const std::string& label);

// Central reference for the fixed modes: encode each party's vector, sum
// the encodings, run the circuit in one address space. Test oracle and
// dry-run sizer.
NssResult normed_secsum_ideal_local(const std::vector<std::vector<double>>& inputs,
                                    const NssConfig& cfg);

// Abstract op counts of one invocation on d components (schedule is data
// independent, so this is exact), and the dealer material it prices out to
// for a given party count.
PlainEngine nss_op_counts(std::size_t d, const NssConfig& cfg);
DealerCounts nss_budget(std::size_t d, const NssConfig& cfg, unsigned parties);

}  // namespace pdml
