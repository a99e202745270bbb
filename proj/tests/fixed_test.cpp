#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "pdml/errors.hpp"
#include "pdml/fixed.hpp"
#include "pdml/rng.hpp"

using namespace pdml;

TEST_CASE("codec round-trip error stays within half an ulp") {
  SeededRng rng(301, 0);
  for (int f : {10, 20, 31}) {
    const double bound = 64.0;
    const FixedCodec codec(f, bound, 3);
    const double half_ulp = std::ldexp(0.5, -f);
    for (int i = 0; i < 2000; ++i) {
      const double x = rng.uniform(-bound, bound);
      const double back = codec.decode(codec.encode(x));
      CHECK(std::abs(back - x) <= half_ulp);
    }
    // Encoded twice is the identity: the grid is a fixed point.
    const double on_grid = codec.decode(codec.encode(rng.uniform(-1.0, 1.0)));
    CHECK(codec.decode(codec.encode(on_grid)) == on_grid);
  }
}

TEST_CASE("codec vector interface matches scalar calls") {
  const FixedCodec codec(20, 8.0, 2);
  const std::vector<double> xs{0.125, -7.5, 3.14159, 0.0};
  const auto raws = codec.encode_vec(xs);
  REQUIRE(raws.size() == xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(raws[i] == codec.encode(xs[i]));
  CHECK(codec.decode_vec(raws) == [&] {
    std::vector<double> out;
    for (auto r : raws) out.push_back(codec.decode(r));
    return out;
  }());
}

TEST_CASE("codec rejects out-of-range values and bad configurations") {
  const FixedCodec codec(31, 2.0, 3);
  CHECK_THROWS_AS(codec.encode(2.5), DataError);
  CHECK_THROWS_AS(codec.encode(-2.5), DataError);
  CHECK_THROWS_AS(codec.encode(std::nan("")), DataError);
  CHECK_NOTHROW(codec.encode(2.0));

  CHECK_THROWS_AS(FixedCodec(0, 1.0, 3), ConfigError);
  CHECK_THROWS_AS(FixedCodec(62, 1.0, 3), ConfigError);
  CHECK_THROWS_AS(FixedCodec(31, -1.0, 3), ConfigError);
  CHECK_THROWS_AS(FixedCodec(31, 1.0, 0), ConfigError);
  // parties * bound * 2^f spilling past the signed 63-bit window.
  CHECK_THROWS_AS(FixedCodec(61, 4.0, 2), ConfigError);
}

TEST_CASE("negative sums survive the unsigned ring") {
  // Encoded negatives live as two's complement; summing with wraparound and
  // decoding must return the signed total.
  const FixedCodec codec(20, 10.0, 2);
  const std::uint64_t a = codec.encode(-3.25);
  const std::uint64_t b = codec.encode(1.0);
  CHECK(codec.decode(a + b) == doctest::Approx(-2.25).epsilon(1e-9));
}

TEST_CASE("trunc_round_plain is shift with round-half-up on signed values") {
  auto enc = [](long long v) { return sign_extend_circuit(static_cast<u128>(v) & circuit_mask()); };
  // 13 / 4 = 3.25 -> 3;  14 / 4 = 3.5 -> 4 (half rounds up);  15 / 4 -> 4.
  CHECK(trunc_round_plain(enc(13), 2) == enc(3));
  CHECK(trunc_round_plain(enc(14), 2) == enc(4));
  CHECK(trunc_round_plain(enc(15), 2) == enc(4));
  // -13 / 4 = -3.25 -> -3;  -14 / 4 = -3.5 -> -3 (half-up moves toward +inf).
  CHECK(trunc_round_plain(enc(-13), 2) == enc(-3));
  CHECK(trunc_round_plain(enc(-14), 2) == enc(-3));
  CHECK(trunc_round_plain(enc(-15), 2) == enc(-4));
  CHECK(trunc_round_plain(enc(0), 5) == enc(0));

  SeededRng rng(302, 0);
  for (int i = 0; i < 2000; ++i) {
    const long long v = static_cast<long long>(rng.next_u64() % (1ULL << 40)) -
                        (1LL << 39);
    const int k = 1 + static_cast<int>(rng.below(20));
    const long long oracle = static_cast<long long>(
        std::floor((static_cast<double>(v) + std::ldexp(0.5, k) * 1.0) /
                   std::ldexp(1.0, k)));
    // floor((v + 2^(k-1)) / 2^k) computed exactly in integers.
    const long long exact = (v + (1LL << (k - 1))) >> k;
    CHECK(exact == oracle);
    CHECK(trunc_round_plain(enc(v), k) == enc(exact));
  }
}

TEST_CASE("circuit sign helpers agree with two's complement") {
  CHECK(signbit_plain(circuit_encode(-0.5, 31)) == 1);
  CHECK(signbit_plain(circuit_encode(0.5, 31)) == 0);
  CHECK(signbit_plain(circuit_encode(0.0, 31)) == 0);
  CHECK(ge_const_plain(circuit_encode(3.0, 10), circuit_encode(2.0, 10)) == 1);
  CHECK(ge_const_plain(circuit_encode(2.0, 10), circuit_encode(2.0, 10)) == 1);
  CHECK(ge_const_plain(circuit_encode(1.5, 10), circuit_encode(2.0, 10)) == 0);
  CHECK(sign_extend_circuit(circuit_mask()) == ~u128(0));
}

TEST_CASE("circuit encode rejects values outside the window") {
  CHECK_THROWS_AS(circuit_encode(std::ldexp(1.0, 90), 31), DataError);
  CHECK_THROWS_AS(circuit_encode(std::nan(""), 31), DataError);
  CHECK(circuit_decode(circuit_encode(-1234.5, 20), 20) ==
        doctest::Approx(-1234.5).epsilon(1e-9));
}

TEST_CASE("decade table brackets every magnitude with a usable guess") {
  for (int f : {10, 20, 31}) {
    const DecadeTable& tab = DecadeTable::get(f);
    REQUIRE(tab.f == f);
    REQUIRE(tab.thresholds.size() == tab.exps.size());
    REQUIRE(tab.sqrt_guess.size() == tab.thresholds.size() + 1);
    for (std::size_t i = 0; i + 1 < tab.thresholds.size(); ++i) {
      CHECK(tab.thresholds[i] < tab.thresholds[i + 1]);
      CHECK(tab.exps[i] + 1 == tab.exps[i + 1]);
    }
    // Within each band, guess / sqrt(value) stays inside (0.55, 2]: the
    // regime the Newton schedules are sized for.
    SeededRng rng(303, 0);
    for (std::size_t band = 0; band + 1 < tab.thresholds.size(); ++band) {
      const double lo = std::pow(10.0, tab.exps[band]);
      const double hi = std::pow(10.0, tab.exps[band] + 1);
      const double guess = circuit_decode(tab.sqrt_guess[band], f);
      for (int i = 0; i < 50; ++i) {
        const double v = rng.uniform(lo, hi);
        const double ratio = guess / std::sqrt(v);
        CHECK(ratio > 0.55);
        CHECK(ratio <= 2.0);
      }
    }
  }
}

TEST_CASE("fixed sqrt error at f=31 stays within two ulp on (0,1]") {
  const FixedSqrtParams p;
  const double tol = 2.0 * std::ldexp(1.0, -31);
  SeededRng rng(304, 0);
  for (int i = 0; i < 1000; ++i) {
    const u128 enc = circuit_encode(rng.uniform(1e-9, 1.0), 31);
    const double s = circuit_decode(enc, 31);  // the value the circuit sees
    const double r = circuit_decode(fixed_sqrt_plain(enc, p), p.f);
    CHECK(std::abs(r - std::sqrt(s)) <= tol);
  }
  // Exact zero maps to exact zero via the output gate.
  CHECK(fixed_sqrt_plain(0, p) == 0);
  CHECK_THROWS_AS(fixed_sqrt_plain(circuit_encode(-1.0, 31), p), DataError);
}

TEST_CASE("fixed sqrt keeps relative accuracy on large inputs") {
  const FixedSqrtParams p;
  SeededRng rng(305, 0);
  for (int i = 0; i < 500; ++i) {
    const u128 enc = circuit_encode(rng.uniform(1.0, 9000.0), 31);
    const double s = circuit_decode(enc, 31);
    const double r = circuit_decode(fixed_sqrt_plain(enc, p), p.f);
    CHECK(std::abs(r - std::sqrt(s)) / std::sqrt(s) < 1e-7);
  }
}

TEST_CASE("fixed reciprocal and division meet their error budgets") {
  SeededRng rng(306, 0);
  for (int i = 0; i < 500; ++i) {
    const u128 enc = circuit_encode(rng.uniform(0.01, 100.0), 31);
    const double v = circuit_decode(enc, 31);
    const double r = circuit_decode(fixed_recip_plain(enc, 31, 24), 31);
    CHECK(std::abs(r - 1.0 / v) / (1.0 / v) < 1e-7);
  }
  for (int i = 0; i < 500; ++i) {
    const u128 ue = circuit_encode(rng.uniform(-50.0, 50.0), 31);
    const u128 ve = circuit_encode(rng.uniform(0.1, 100.0), 31);
    const double u = circuit_decode(ue, 31), v = circuit_decode(ve, 31);
    const double q = circuit_decode(fixed_div_plain(ue, ve, 31), 31);
    CHECK(std::abs(q - u / v) / std::max(1.0, std::abs(u / v)) < 1e-7);
  }
}
