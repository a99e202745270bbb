#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "pdml/beaver.hpp"
#include "pdml/circuit.hpp"
#include "pdml/net.hpp"

namespace pdml {

// Shared-circuit evaluation engine: every value is an additive share mod
// 2^128 (arithmetic) or an XOR share of a 112-bit word (Boolean), and every
// nonlinear gate spends dealer material and one keyed communication round.
// All parties call the same methods in the same order, so round numbers,
// material cursors, and instruction streams agree by construction; the
// results match PlainEngine bit-for-bit because both run the identical
// templated circuit over the identical integer semantics.
//
// Truncation is exact, not probabilistic: add the rounding constant, bit-
// decompose the sum of shares with a carry-save reduction into a Kogge-Stone
// adder, shift with sign replication (all XOR-linear), and convert back with
// one daBit per bit position. Exactness is what lets the centrally-evaluated
// and shared backends produce identical raw words.
class MpcEngine {
 public:
  using V = u128;
  using B = u128;

  MpcEngine(Party& party, DealerMaterial& material);

  // Instrumentation, same meaning as PlainEngine: abstract circuit ops, not
  // raw material items (a truncation's internal decomposition is priced by
  // dealer_budget, not counted here).
  std::uint64_t n_mul = 0;
  std::uint64_t n_word_and = 0;
  std::uint64_t n_dabit = 0;
  std::uint64_t n_a2b = 0;
  std::uint64_t n_trunc = 0;

  V add(V a, V b) { return a + b; }
  V sub(V a, V b) { return a - b; }
  V add_pub(V a, u128 c) { return party_.index() == 0 ? a + c : a; }
  V mul_pub(V a, u128 c) { return a * c; }
  V mul(V a, V b);
  std::vector<V> mul_batch(std::span<const std::pair<V, V>> jobs);
  V trunc_round(V x, int k);
  B a2b(V x);
  B b_and(B a, B b);
  std::vector<B> b_and_batch(std::span<const std::pair<B, B>> jobs);
  B b_xor(B a, B b) { return (a ^ b) & circuit_mask(); }
  B b_xor_pub(B a, u128 c) {
    return party_.index() == 0 ? (a ^ c) & circuit_mask() : a & circuit_mask();
  }
  B b_and_pub(B a, u128 c) { return a & c & circuit_mask(); }
  B b_not(B a) { return b_xor_pub(a, circuit_mask()); }
  B b_shl(B a, int k) { return (a << k) & circuit_mask(); }
  B b_shr(B a, int k) { return (a & circuit_mask()) >> k; }
  B b_zero() { return 0; }
  std::vector<V> bits_to_arith(B w, std::span<const int> positions);

  // Share of a public constant: party 0 holds it, everyone else zero.
  V from_public(u128 c) { return party_.index() == 0 ? c : 0; }

  // Opens shares to all parties (intended outputs only).
  u128 open(V x);
  std::vector<u128> open_batch(std::span<const V> xs);

  Party& party() { return party_; }
  DealerMaterial& material() { return material_; }

 private:
  // Boolean addition of the party shares of x mod 2^112. Used by both the
  // public a2b gate and the truncation internals; does not touch counters.
  B decompose(V x);
  std::vector<B> and_words(std::span<const std::pair<B, B>> jobs);
  std::vector<u128> open_words(std::span<const u128> words, std::uint16_t topic,
                               bool xor_mode);
  std::vector<V> bits_to_arith_internal(B w, std::span<const int> positions,
                                        std::span<const u128> weights);

  Party& party_;
  DealerMaterial& material_;
};

// Offline material needed to run a circuit whose PlainEngine dry-run counted
// these ops, for a given party count. Each a2b or truncation decomposes M
// share words: a carry-save reduction to two words costs M-2 word-ANDs, and
// the 112-bit Kogge-Stone sum costs 1 + 2*7 more; a truncation additionally
// converts all 112 bit positions back with one daBit each.
DealerCounts dealer_budget(const PlainEngine& counted, unsigned parties);

}  // namespace pdml
