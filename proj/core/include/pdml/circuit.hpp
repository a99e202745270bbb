#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "pdml/fixed.hpp"

namespace pdml {

// The scalar fixed-point circuit (decade guess, Babylonian sqrt, Newton
// reciprocal) is written once, templated over an evaluation engine, so the
// centrally-evaluated backend and the shared-circuit backend execute the
// exact same instruction stream and agree bit-for-bit.
//
// Engine contract (V = arithmetic value mod 2^128, B = 112-bit Boolean word;
// for the MPC engine both are this party's share):
//   V add(V,V), sub(V,V), add_pub(V,u128), mul_pub(V,u128)
//   V mul(V,V);  std::vector<V> mul_batch(span<pair<V,V>>)
//   V trunc_round(V, int k)
//   B a2b(V)                          bits of the value mod 2^112
//   B b_and(B,B);  std::vector<B> b_and_batch(span<pair<B,B>>)
//   B b_xor(B,B), b_xor_pub(B,u128), b_and_pub(B,u128), b_not(B)
//   B b_shl(B,int), b_shr(B,int)      logical, inside the 112-bit window
//   B b_zero()
//   std::vector<V> bits_to_arith(B, span<const int> positions)
//
// Every engine op counts toward the instrumentation totals used to size the
// offline dealer material.

// Indicator bits x >= c for a batch of public ascending constants, all known
// nonnegative. Computed as the carry-out of x + (2^112 - c) by a Kogge-Stone
// prefix over (G, P) pairs; with a public addend the initial G, P are linear,
// so each threshold costs 2 shared word-ANDs per level, batched across
// thresholds. Returns one Boolean word with bit j = (x >= consts[j]).
template <class E>
typename E::B thresholds_ge(E& eng, typename E::V x, std::span<const u128> consts) {
  using B = typename E::B;
  const B xb = eng.a2b(x);
  const std::size_t n = consts.size();
  std::vector<B> g(n), p(n);
  for (std::size_t t = 0; t < n; ++t) {
    const u128 k = (u128(1) << kCircuitBits) - consts[t];  // addend for x - c
    g[t] = eng.b_and_pub(xb, k);
    p[t] = eng.b_xor_pub(xb, k);
  }
  for (int sh = 1; sh < kCircuitBits; sh <<= 1) {
    // G' = G ^ (P & (G << sh)); P' = P & (P << sh). G and P stay disjoint,
    // so XOR implements OR exactly.
    std::vector<std::pair<B, B>> jobs;
    jobs.reserve(2 * n);
    for (std::size_t t = 0; t < n; ++t) {
      jobs.emplace_back(p[t], eng.b_shl(g[t], sh));
      jobs.emplace_back(p[t], eng.b_shl(p[t], sh));
    }
    auto res = eng.b_and_batch(jobs);
    for (std::size_t t = 0; t < n; ++t) {
      g[t] = eng.b_xor(g[t], res[2 * t]);
      p[t] = res[2 * t + 1];
    }
  }
  // Carry-out = top bit of the final generate word; repack across thresholds.
  B out = eng.b_zero();
  for (std::size_t t = 0; t < n; ++t) {
    B bit = eng.b_shr(g[t], kCircuitBits - 1);  // bit 0 = carry-out
    out = eng.b_xor(out, eng.b_shl(bit, static_cast<int>(t)));
  }
  return out;
}

// Decade band selection: one arithmetic 0/1 indicator per band (bands
// 0..n_t-1 from the threshold table, band n_t = catch-all below the lowest
// threshold). Exactly one indicator is 1 for any in-range input.
template <class E>
std::vector<typename E::V> decade_bands(E& eng, typename E::V x, const DecadeTable& tab) {
  using B = typename E::B;
  const int n = static_cast<int>(tab.thresholds.size());
  const B t = thresholds_ge(eng, x, tab.thresholds);
  // band j (j < n): t_j & ~t_{j+1}; top band reduces to t_{n-1}.
  B sel = eng.b_and(t, eng.b_not(eng.b_shr(t, 1)));
  sel = eng.b_and_pub(sel, (u128(1) << n) - 1);
  // catch-low at position n: ~t_0.
  const B low = eng.b_and_pub(eng.b_not(t), 1);
  sel = eng.b_xor(sel, eng.b_shl(low, n));
  std::vector<int> positions(static_cast<std::size_t>(n) + 1);
  for (int j = 0; j <= n; ++j) positions[static_cast<std::size_t>(j)] = j;
  return eng.bits_to_arith(sel, positions);
}

// Weighted sum of indicators with public constants (linear).
template <class E>
typename E::V select_const(E& eng, const std::vector<typename E::V>& ind,
                           std::span<const u128> consts) {
  typename E::V acc = eng.mul_pub(ind[0], consts[0]);
  for (std::size_t j = 1; j < ind.size(); ++j) {
    acc = eng.add(acc, eng.mul_pub(ind[j], consts[j]));
  }
  return acc;
}

// One Newton step toward 1/v: r <- r * (2 - v*r), both products rescaled.
template <class E>
typename E::V newton_recip_step(E& eng, typename E::V v, typename E::V r, int f) {
  auto t = eng.trunc_round(eng.mul(v, r), f);
  // u = 2 - t, as (-1)*t + enc(2).
  auto u = eng.add_pub(eng.mul_pub(t, ~u128(0)), u128(2) << f);
  return eng.trunc_round(eng.mul(r, u), f);
}

// Babylonian square root with decade-selected initial guess and reciprocal
// warm starts. Returns (sqrt, reciprocal-of-last-iterate) so callers can
// warm-start a following division. Iteration counts are fixed up front:
// the schedule is data-independent.
template <class E>
std::pair<typename E::V, typename E::V> fixed_sqrt_circuit_warm(
    E& eng, typename E::V s, const FixedSqrtParams& p) {
  const DecadeTable& tab = DecadeTable::get(p.f);
  auto ind = decade_bands(eng, s, tab);
  auto g = select_const(eng, ind, tab.sqrt_guess);
  auto r = select_const(eng, ind, tab.sqrt_guess_recip);
  for (int it = 0; it < p.babylonian_iters; ++it) {
    if (it > 0) {
      // Refresh r toward 1/g. The first refresh absorbs the band-guess error
      // (the table construction keeps g1*r0 below 2, the Newton convergence
      // region) and gets a longer schedule; afterwards g moves only a little
      // per average, so a short warm schedule suffices.
      const int iters = (it == 1) ? p.first_recip_iters : p.warm_recip_iters;
      for (int k = 0; k < iters; ++k) r = newton_recip_step(eng, g, r, p.f);
    }
    auto q = eng.trunc_round(eng.mul(s, r), p.f);  // ~ s / g
    g = eng.trunc_round(eng.add(g, q), 1);         // (g + q) / 2
  }
  // Gate the output by [s >= 2^-f]: the iteration above cannot reach zero
  // from a positive guess (the rounding average has a fixed point at one
  // ulp), but sqrt(0) must be exactly 0. The indicator is a scale-0 integer,
  // so the product needs no rescale.
  const u128 one = 1;
  auto nz = thresholds_ge(eng, s, std::span<const u128>(&one, 1));
  const int pos0[] = {0};
  auto gate = eng.bits_to_arith(eng.b_and_pub(nz, 1), pos0);
  g = eng.mul(g, gate[0]);
  return {g, r};
}

template <class E>
typename E::V fixed_sqrt_circuit(E& eng, typename E::V s, const FixedSqrtParams& p) {
  return fixed_sqrt_circuit_warm(eng, s, p).first;
}

// Reciprocal with decade-selected initial guess.
template <class E>
typename E::V fixed_recip_circuit(E& eng, typename E::V v, int f, int newton_iters) {
  const DecadeTable& tab = DecadeTable::get(f);
  auto ind = decade_bands(eng, v, tab);
  auto r = select_const(eng, ind, tab.recip_guess);
  for (int k = 0; k < newton_iters; ++k) r = newton_recip_step(eng, v, r, f);
  return r;
}

// Plain engine: direct evaluation on mod-2^128 values. Counters mirror the
// MPC engine's dealer consumption so one dry run sizes the offline material.
struct PlainEngine {
  using V = u128;
  using B = u128;

  // Instrumentation (identical meaning in both engines). Truncations are
  // counted separately from explicit a2b calls: in the shared backend each
  // truncation internally runs one bit decomposition plus a full-width
  // bit-to-arithmetic conversion, and the offline-material budget accounts
  // for that from these same counters.
  std::uint64_t n_mul = 0;
  std::uint64_t n_word_and = 0;
  std::uint64_t n_dabit = 0;
  std::uint64_t n_a2b = 0;
  std::uint64_t n_trunc = 0;

  V add(V a, V b) { return a + b; }
  V sub(V a, V b) { return a - b; }
  V add_pub(V a, u128 c) { return a + c; }
  V mul_pub(V a, u128 c) { return a * c; }
  V mul(V a, V b) {
    ++n_mul;
    return a * b;
  }
  std::vector<V> mul_batch(std::span<const std::pair<V, V>> jobs) {
    std::vector<V> out;
    out.reserve(jobs.size());
    for (auto& [a, b] : jobs) out.push_back(mul(a, b));
    return out;
  }
  V trunc_round(V x, int k) {
    ++n_trunc;
    return trunc_round_plain(x, k);
  }
  B a2b(V x) {
    ++n_a2b;
    return x & circuit_mask();
  }
  B b_and(B a, B b) {
    ++n_word_and;
    return a & b & circuit_mask();
  }
  std::vector<B> b_and_batch(std::span<const std::pair<B, B>> jobs) {
    std::vector<B> out;
    out.reserve(jobs.size());
    for (auto& [a, b] : jobs) out.push_back(b_and(a, b));
    return out;
  }
  B b_xor(B a, B b) { return (a ^ b) & circuit_mask(); }
  B b_xor_pub(B a, u128 c) { return (a ^ c) & circuit_mask(); }
  B b_and_pub(B a, u128 c) { return a & c & circuit_mask(); }
  B b_not(B a) { return (~a) & circuit_mask(); }
  B b_shl(B a, int k) { return (a << k) & circuit_mask(); }
  B b_shr(B a, int k) { return (a & circuit_mask()) >> k; }
  B b_zero() { return 0; }
  std::vector<V> bits_to_arith(B w, std::span<const int> positions) {
    n_dabit += positions.size();
    std::vector<V> out;
    out.reserve(positions.size());
    for (int j : positions) out.push_back((w >> j) & 1);
    return out;
  }
};

}  // namespace pdml
