#include <doctest.h>

#include <cmath>
#include <utility>
#include <vector>

#include "pdml/beaver.hpp"
#include "pdml/circuit.hpp"
#include "pdml/errors.hpp"
#include "pdml/fixed.hpp"
#include "pdml/net.hpp"
#include "pdml/rng.hpp"
#include "pdml/shared_circuit.hpp"

using namespace pdml;

namespace {

// Additive sharing of a circuit value for a fixed party count.
std::vector<u128> share_value(u128 v, unsigned parties, SeededRng& rng) {
  std::vector<u128> out(parties, 0);
  u128 acc = 0;
  for (unsigned i = 0; i + 1 < parties; ++i) {
    out[i] = (u128(rng.next_u64()) << 64) | rng.next_u64();
    acc += out[i];
  }
  out[parties - 1] = v - acc;
  return out;
}

// XOR sharing of a Boolean word.
std::vector<u128> share_word(u128 w, unsigned parties, SeededRng& rng) {
  std::vector<u128> out(parties, 0);
  u128 acc = 0;
  for (unsigned i = 0; i + 1 < parties; ++i) {
    out[i] = ((u128(rng.next_u64()) << 64) | rng.next_u64()) & circuit_mask();
    acc ^= out[i];
  }
  out[parties - 1] = (w ^ acc) & circuit_mask();
  return out;
}

}  // namespace

TEST_CASE("shared multiplication and opening match plain arithmetic") {
  const unsigned m = 3;
  SeededRng seed_rng(601, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const u128 a = circuit_encode(seed_rng.uniform(-100.0, 100.0), 20);
    const u128 b = circuit_encode(seed_rng.uniform(-100.0, 100.0), 20);
    SeededRng share_rng(602 + trial, 0);
    const auto sa = share_value(a, m, share_rng);
    const auto sb = share_value(b, m, share_rng);

    SeededRng deal_rng(603 + trial, 0);
    auto mats = generate_dealer_material(m, {1, 0, 0}, 20, deal_rng);
    run_parties(m, [&](Party& p) {
      MpcEngine eng(p, mats[p.index()]);
      const u128 prod = eng.open(eng.mul(sa[p.index()], sb[p.index()]));
      CHECK(prod == static_cast<u128>(a * b));
      CHECK(eng.n_mul == 1);
    });
  }
}

TEST_CASE("shared truncation reproduces the plain rounding bit-for-bit") {
  const unsigned m = 3;
  SeededRng rng(604, 0);
  for (int trial = 0; trial < 8; ++trial) {
    const u128 v = circuit_encode(rng.uniform(-1000.0, 1000.0), 31);
    const int k = 1 + static_cast<int>(rng.below(40));
    SeededRng share_rng(605 + trial, 0);
    const auto sv = share_value(v, m, share_rng);

    PlainEngine sizer;
    sizer.trunc_round(v, k);
    SeededRng deal_rng(606 + trial, 0);
    auto mats = generate_dealer_material(m, dealer_budget(sizer, m), 31, deal_rng);
    run_parties(m, [&](Party& p) {
      MpcEngine eng(p, mats[p.index()]);
      const u128 got = eng.open(eng.trunc_round(sv[p.index()], k));
      CHECK(got == trunc_round_plain(v, k));
    });
  }
}

TEST_CASE("shared boolean gates match plain word logic") {
  const unsigned m = 2;
  SeededRng rng(607, 0);
  const u128 a = ((u128(rng.next_u64()) << 64) | rng.next_u64()) & circuit_mask();
  const u128 b = ((u128(rng.next_u64()) << 64) | rng.next_u64()) & circuit_mask();
  SeededRng share_rng(608, 0);
  const auto sa = share_word(a, m, share_rng);
  const auto sb = share_word(b, m, share_rng);

  SeededRng deal_rng(609, 0);
  auto mats = generate_dealer_material(m, {0, 1, 2 * kCircuitBits}, 31, deal_rng);
  run_parties(m, [&](Party& p) {
    MpcEngine eng(p, mats[p.index()]);
    const auto x = eng.b_and(sa[p.index()], sb[p.index()]);
    // Open via bit->arith on every position and reassemble.
    std::vector<int> pos;
    for (int i = 0; i < kCircuitBits; ++i) pos.push_back(i);
    auto arith = eng.bits_to_arith(x, pos);
    u128 word = 0;
    for (int i = 0; i < kCircuitBits; ++i) {
      const u128 bit = eng.open(arith[static_cast<std::size_t>(i)]);
      REQUIRE((bit == 0 || bit == 1));
      word |= bit << i;
    }
    CHECK(word == (a & b));
  });
}

TEST_CASE("a2b decomposes the shared value into its bits") {
  const unsigned m = 3;
  SeededRng rng(610, 0);
  const u128 v = circuit_encode(rng.uniform(-50.0, 50.0), 31);
  SeededRng share_rng(611, 0);
  const auto sv = share_value(v, m, share_rng);

  PlainEngine sizer;
  sizer.a2b(v);
  // Reassembling costs one daBit per inspected position.
  std::vector<int> pos;
  for (int i = 0; i < kCircuitBits; ++i) pos.push_back(i);

  SeededRng deal_rng(612, 0);
  DealerCounts budget = dealer_budget(sizer, m);
  budget.dabits += kCircuitBits;
  auto mats = generate_dealer_material(m, budget, 31, deal_rng);
  run_parties(m, [&](Party& p) {
    MpcEngine eng(p, mats[p.index()]);
    const auto bits = eng.a2b(sv[p.index()]);
    auto arith = eng.bits_to_arith(bits, pos);
    u128 word = 0;
    for (int i = 0; i < kCircuitBits; ++i) {
      word |= eng.open(arith[static_cast<std::size_t>(i)]) << i;
    }
    CHECK(word == (v & circuit_mask()));
  });
}

TEST_CASE("sqrt circuit output is identical under both backends") {
  // The load-bearing invariant: centrally evaluated and share-evaluated
  // executions of the same instruction stream agree on every output word.
  for (int f : {10, 20, 31}) {
    SeededRng rng(613 + f, 0);
    FixedSqrtParams params;
    params.f = f;
    const unsigned m = 3;
    for (int trial = 0; trial < 4; ++trial) {
      const double s = rng.uniform(0.0001, 0.9999);
      const u128 enc = circuit_encode(s, f);
      const u128 plain = fixed_sqrt_plain(enc, params);

      PlainEngine sizer;
      fixed_sqrt_circuit(sizer, enc, params);
      SeededRng deal_rng(650 + trial, 0);
      auto mats = generate_dealer_material(m, dealer_budget(sizer, m), f, deal_rng);
      SeededRng share_rng(660 + trial, 0);
      const auto sv = share_value(enc, m, share_rng);
      run_parties(m, [&](Party& p) {
        MpcEngine eng(p, mats[p.index()]);
        const u128 got = eng.open(fixed_sqrt_circuit(eng, sv[p.index()], params));
        CHECK(got == plain);
        // The dry-run budget is exact: everything dealt was consumed.
        CHECK(eng.material().consumed() == eng.material().stocked());
      });
    }
  }
}

TEST_CASE("engines count abstract ops identically") {
  const u128 enc = circuit_encode(0.37, 31);
  FixedSqrtParams params;
  PlainEngine plain;
  fixed_sqrt_circuit(plain, enc, params);

  const unsigned m = 2;
  SeededRng deal_rng(620, 0);
  auto mats = generate_dealer_material(m, dealer_budget(plain, m), 31, deal_rng);
  SeededRng share_rng(621, 0);
  const auto sv = share_value(enc, m, share_rng);
  run_parties(m, [&](Party& p) {
    MpcEngine eng(p, mats[p.index()]);
    fixed_sqrt_circuit(eng, sv[p.index()], params);
    CHECK(eng.n_mul == plain.n_mul);
    CHECK(eng.n_word_and == plain.n_word_and);
    CHECK(eng.n_dabit == plain.n_dabit);
    CHECK(eng.n_a2b == plain.n_a2b);
    CHECK(eng.n_trunc == plain.n_trunc);
  });
}

TEST_CASE("starving the engine of material is a protocol error") {
  const unsigned m = 2;
  SeededRng deal_rng(622, 0);
  auto mats = generate_dealer_material(m, {0, 0, 0}, 31, deal_rng);
  CHECK_THROWS_AS(run_parties(m,
                              [&](Party& p) {
                                MpcEngine eng(p, mats[p.index()]);
                                eng.mul(1, 2);
                              }),
                  ProtocolError);
}
