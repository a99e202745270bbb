#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "pdml/beaver.hpp"
#include "pdml/errors.hpp"
#include "pdml/matrix.hpp"
#include "pdml/net.hpp"
#include "pdml/normed_secsum.hpp"
#include "pdml/rng.hpp"

using namespace pdml;

namespace {

std::vector<std::vector<double>> fuzz_inputs(std::size_t parties, std::size_t d,
                                             double bound, SeededRng& rng) {
  std::vector<std::vector<double>> xs(parties, std::vector<double>(d));
  for (auto& x : xs)
    for (auto& v : x) v = rng.uniform(-bound, bound);
  return xs;
}

std::vector<double> true_sum(const std::vector<std::vector<double>>& xs) {
  std::vector<double> s(xs.front().size(), 0.0);
  for (const auto& x : xs)
    for (std::size_t c = 0; c < s.size(); ++c) s[c] += x[c];
  return s;
}

}  // namespace

TEST_CASE("float backend normalizes the exact sum") {
  const PartyIndex m = 3;
  SeededRng data_rng(701, 0);
  const auto xs = fuzz_inputs(m, 10, 0.9, data_rng);
  const auto sum = true_sum(xs);
  const double n = norm2(sum);
  run_parties(m, [&](Party& p) {
    NssConfig cfg;
    cfg.mode = NssMode::Float;
    SeededRng rng(702 + p.index(), 0);
    const NssResult res = normed_secsum(p, xs[p.index()], cfg, rng, nullptr, "z");
    REQUIRE(res.z.size() == sum.size());
    CHECK(res.raw.empty());
    for (std::size_t c = 0; c < sum.size(); ++c) {
      CHECK(res.z[c] == sum[c] / n);  // bitwise: same operation order
    }
  });
}

TEST_CASE("fixed backends agree with the local reference and each other bitwise") {
  for (int f : {10, 20, 31}) {
    SeededRng data_rng(703 + f, 0);
    const PartyIndex m = 3;
    for (int trial = 0; trial < 3; ++trial) {
      const std::size_t d = 4 + data_rng.below(8);
      const auto xs = fuzz_inputs(m, d, 0.9, data_rng);
      NssConfig cfg;
      cfg.f = f;
      cfg.sqrt_params.f = f;
      cfg.bound = 1.0;

      cfg.mode = NssMode::FixedIdeal;
      const NssResult oracle = normed_secsum_ideal_local(xs, cfg);

      std::vector<std::uint64_t> ideal_raw, shared_raw;
      run_parties(m, [&](Party& p) {
        SeededRng rng(710 + p.index() + trial, 0);
        NssConfig c2 = cfg;
        c2.mode = NssMode::FixedIdeal;
        const NssResult res = normed_secsum(p, xs[p.index()], c2, rng, nullptr, "z");
        if (p.index() == 0) ideal_raw = res.raw;
      });

      SeededRng deal_rng(720 + trial, 0);
      auto mats = generate_dealer_material(
          m, nss_budget(d, cfg, m), f, deal_rng);
      run_parties(m, [&](Party& p) {
        SeededRng rng(730 + p.index() + trial, 0);
        NssConfig c2 = cfg;
        c2.mode = NssMode::FixedShared;
        const NssResult res =
            normed_secsum(p, xs[p.index()], c2, rng, &mats[p.index()], "z");
        if (p.index() == 0) shared_raw = res.raw;
        // The budget sizing is exact.
        CHECK(mats[p.index()].consumed() == mats[p.index()].stocked());
      });

      REQUIRE(ideal_raw.size() == d);
      CHECK(ideal_raw == shared_raw);
      CHECK(oracle.raw == ideal_raw);
    }
  }
}

TEST_CASE("normalized output deviates from the real quotient by at most d ulp") {
  SeededRng data_rng(740, 0);
  const PartyIndex m = 3;
  const int f = 31;
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t d = 8 + data_rng.below(56);
    const auto xs = fuzz_inputs(m, d, 0.9, data_rng);
    const auto sum = true_sum(xs);
    const double n = norm2(sum);
    if (n < 0.1) continue;  // stay away from the degenerate-flag region
    NssConfig cfg;
    cfg.f = f;
    cfg.sqrt_params.f = f;
    run_parties(m, [&](Party& p) {
      SeededRng rng(741 + p.index() + trial, 0);
      NssConfig c2 = cfg;
      c2.mode = NssMode::FixedIdeal;
      const NssResult res = normed_secsum(p, xs[p.index()], c2, rng, nullptr, "z");
      double dev = 0.0;
      for (std::size_t c = 0; c < d; ++c) dev += std::abs(res.z[c] - sum[c] / n);
      CHECK(dev <= static_cast<double>(d) * std::ldexp(1.0, -f));
    });
  }
}

TEST_CASE("shared transcript never carries the hidden norm") {
  const PartyIndex m = 3;
  const int f = 31;
  SeededRng data_rng(750, 0);
  const std::size_t d = 12;
  const auto xs = fuzz_inputs(m, d, 0.9, data_rng);
  const auto sum = true_sum(xs);
  const double n = norm2(sum);
  const double nsq = n * n;
  REQUIRE(n > 0.05);

  NssConfig cfg;
  cfg.f = f;
  cfg.sqrt_params.f = f;
  cfg.mode = NssMode::FixedShared;
  SeededRng deal_rng(751, 0);
  auto mats = generate_dealer_material(m, nss_budget(d, cfg, m), f, deal_rng);
  auto result = run_parties(m, [&](Party& p) {
    SeededRng rng(752 + p.index(), 0);
    normed_secsum(p, xs[p.index()], cfg, rng, &mats[p.index()], "z");
  });

  // Scan every word of every payload, interpreted both as an IEEE double and
  // as a scale-f fixed-point value, for anything close to ||s|| or ||s||^2.
  const double tol = 64.0 * std::ldexp(1.0, -f);
  std::size_t words_scanned = 0;
  for (const auto& e : result.transcript) {
    REQUIRE(e.payload.size() % 8 == 0);
    for (std::size_t off = 0; off < e.payload.size(); off += 8) {
      std::uint64_t w = 0;
      for (int b = 7; b >= 0; --b) w = (w << 8) | e.payload[off + static_cast<std::size_t>(b)];
      ++words_scanned;
      const double as_double = std::bit_cast<double>(w);
      const double as_fixed =
          static_cast<double>(static_cast<std::int64_t>(w)) * std::ldexp(1.0, -f);
      for (double candidate : {as_double, as_fixed}) {
        if (!std::isfinite(candidate)) continue;
        CHECK(std::abs(candidate - n) > tol);
        CHECK(std::abs(candidate - nsq) > tol);
      }
    }
  }
  CHECK(words_scanned > 100);  // the scan actually saw the protocol

  // The trace records exactly the normalized vector, nothing else.
  for (const auto& tr : result.traces) {
    CHECK(tr.labels() == std::vector<std::string>{"z"});
    CHECK(tr.values("z").size() == d);
  }
}

TEST_CASE("degenerate inputs fail loudly in every backend") {
  const PartyIndex m = 2;
  const std::vector<double> zeros(5, 0.0);
  NssConfig cfg;

  cfg.mode = NssMode::Float;
  CHECK_THROWS_AS(run_parties(m,
                              [&](Party& p) {
                                SeededRng rng(760 + p.index(), 0);
                                normed_secsum(p, zeros, cfg, rng, nullptr, "z");
                              }),
                  DataError);

  cfg.mode = NssMode::FixedIdeal;
  CHECK_THROWS_AS(run_parties(m,
                              [&](Party& p) {
                                SeededRng rng(761 + p.index(), 0);
                                normed_secsum(p, zeros, cfg, rng, nullptr, "z");
                              }),
                  DataError);

  cfg.mode = NssMode::FixedShared;
  SeededRng deal_rng(762, 0);
  auto mats = generate_dealer_material(m, nss_budget(5, cfg, m), cfg.f, deal_rng);
  CHECK_THROWS_AS(run_parties(m,
                              [&](Party& p) {
                                SeededRng rng(763 + p.index(), 0);
                                normed_secsum(p, zeros, cfg, rng, &mats[p.index()], "z");
                              }),
                  DataError);
}

TEST_CASE("configuration errors are rejected up front") {
  const PartyIndex m = 2;
  NssConfig cfg;
  cfg.mode = NssMode::FixedShared;
  // Shared mode without material.
  CHECK_THROWS_AS(run_parties(m,
                              [&](Party& p) {
                                SeededRng rng(770 + p.index(), 0);
                                normed_secsum(p, {0.5}, cfg, rng, nullptr, "z");
                              }),
                  ConfigError);
  // Material dealt at a different precision.
  SeededRng deal_rng(771, 0);
  auto mats = generate_dealer_material(m, nss_budget(1, cfg, m), 20, deal_rng);
  CHECK_THROWS_AS(run_parties(m,
                              [&](Party& p) {
                                SeededRng rng(772 + p.index(), 0);
                                normed_secsum(p, {0.5}, cfg, rng, &mats[p.index()], "z");
                              }),
                  DataError);
  // Empty input.
  CHECK_THROWS_AS(run_parties(m,
                              [&](Party& p) {
                                SeededRng rng(773 + p.index(), 0);
                                NssConfig c2;
                                c2.mode = NssMode::Float;
                                normed_secsum(p, {}, c2, rng, nullptr, "z");
                              }),
                  DataError);
}

TEST_CASE("op counts are data independent") {
  NssConfig cfg;
  const PlainEngine a = nss_op_counts(16, cfg);
  const PlainEngine b = nss_op_counts(16, cfg);
  CHECK(a.n_mul == b.n_mul);
  CHECK(a.n_trunc == b.n_trunc);
  const PlainEngine c = nss_op_counts(32, cfg);
  CHECK(c.n_mul > a.n_mul);  // more components, more normalization products
  const DealerCounts budget = nss_budget(16, cfg, 3);
  CHECK(budget.muls >= a.n_mul);
  CHECK(budget.dabits > 0);
}
