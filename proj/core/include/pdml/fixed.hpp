#pragma once

#include <cstdint>
#include <vector>

#include "pdml/errors.hpp"

namespace pdml {

using u128 = unsigned __int128;
using i128 = __int128;

// Fixed-point layout: a real x is carried as round(x * 2^f) in two's
// complement. The transport interface is 64-bit words; the normed-sum
// circuit computes in a wider ring (mod 2^128, values kept inside a 112-bit
// window) so scale-2f products and reciprocal intermediates never wrap.
inline constexpr int kCircuitBits = 112;

// Values processed by the circuit must stay strictly inside this magnitude
// so the sign bit at position kCircuitBits-1 is meaningful.
inline constexpr int kCircuitValueBits = kCircuitBits - 2;

inline u128 circuit_mask() {
  return (u128(1) << kCircuitBits) - 1;
}

// Sign-extend a kCircuitBits-wide pattern into the full mod-2^128 ring.
inline u128 sign_extend_circuit(u128 x) {
  const int spare = 128 - kCircuitBits;
  return static_cast<u128>((static_cast<i128>(x << spare)) >> spare);
}

// Arithmetic shift right by k of a circuit value, with round-half-up
// (add 2^(k-1) first). This is the single rescaling primitive; the shared
// backend reproduces it bit-for-bit via bit decomposition.
u128 trunc_round_plain(u128 x, int k);

// Sign bit of a circuit value (1 iff negative).
inline int signbit_plain(u128 x) {
  return static_cast<int>((x >> (kCircuitBits - 1)) & 1);
}

// 1 iff x >= c for nonnegative-representable operands: negated sign of x-c.
inline int ge_const_plain(u128 x, u128 c) {
  return 1 - signbit_plain((x - c) & ~u128(0));
}

// 64-bit fixed-point codec for secure-sum payloads. The caller declares a
// per-component magnitude bound; encode fails loudly outside it, and the
// constructor rejects (bound, f, parties) combinations whose sum could
// overflow the 63-bit signed window.
class FixedCodec {
 public:
  FixedCodec(int f, double bound, unsigned parties);

  int f() const { return f_; }
  double bound() const { return bound_; }

  std::uint64_t encode(double x) const;
  double decode(std::uint64_t raw) const;

  std::vector<std::uint64_t> encode_vec(const std::vector<double>& xs) const;
  std::vector<double> decode_vec(const std::vector<std::uint64_t>& raws) const;

 private:
  int f_;
  double bound_;
  unsigned parties_;
};

// Decade-based initial guesses for sqrt and reciprocal. Thresholds are the
// encodings of 10^e for consecutive e; band j is [10^(E0+j), 10^(E0+j+1)),
// plus a catch-all band below 10^E0. The sqrt guess for a value in decade e
// is 2*10^(e/2) (e even) or 6*10^((e-1)/2) (e odd); by construction the
// guess-to-root ratio stays in (0.55, 2], which the Newton schedules rely
// on. The reciprocal guess for band e is 1/guess-ish from below.
struct DecadeTable {
  int f = 0;
  std::vector<int> exps;           // threshold exponents E0..E1
  std::vector<u128> thresholds;    // enc(10^e), ascending
  std::vector<u128> sqrt_guess;    // size exps.size()+1; last = catch-low
  std::vector<u128> sqrt_guess_recip;  // enc(1/guess), same indexing
  std::vector<u128> recip_guess;   // enc(10^-(e+1)) per band; catch-low last

  static const DecadeTable& get(int f);  // cached per f
};

// Scalar Newton iteration counts. Data-independent by design: every run of
// the circuit executes exactly the same schedule.
struct FixedSqrtParams {
  int f = 31;
  int babylonian_iters = 16;
  int first_recip_iters = 9;  // full-error warm start after the first step
  int warm_recip_iters = 6;   // steady-state warm starts
};

// Plain (centrally evaluated) circuit results. These define the reference
// semantics; the shared-circuit backend must match them bit-for-bit.
u128 fixed_sqrt_plain(u128 s, const FixedSqrtParams& p);
u128 fixed_recip_plain(u128 v, int f, int newton_iters);
u128 fixed_div_plain(u128 u, u128 v, int f);

// Convenience: double -> circuit value at scale f (round-half-away), with
// range check against the circuit window.
u128 circuit_encode(double x, int f);
double circuit_decode(u128 v, int f);

}  // namespace pdml
