// Microbenchmarks for the aggregation primitives and the local solvers.
// Protocol benchmarks run all parties over the in-memory network, so one
// iteration is one full multi-party invocation.

#include <benchmark/benchmark.h>

#include <cstddef>
#include <string>
#include <vector>

#include "pdml/beaver.hpp"
#include "pdml/fixed.hpp"
#include "pdml/matrix.hpp"
#include "pdml/net.hpp"
#include "pdml/nmf.hpp"
#include "pdml/normed_secsum.hpp"
#include "pdml/power_iteration.hpp"
#include "pdml/rng.hpp"
#include "pdml/secsum.hpp"

namespace {

constexpr pdml::PartyIndex kParties = 3;

std::vector<double> bench_input(std::size_t d, std::uint64_t stream,
                                double bound) {
  pdml::SeededRng rng(7, stream);
  std::vector<double> x(d);
  for (double& v : x) v = rng.uniform(-bound, bound);
  return x;
}

void bench_secsum(benchmark::State& state, pdml::SecSumMode mode) {
  const auto d = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    pdml::run_parties(kParties, [&](pdml::Party& p) {
      const std::vector<double> x = bench_input(d, p.index(), 1.0);
      pdml::SecSumChannel ch(p, mode, pdml::FixedCodec(31, 2.0, p.count()), 7);
      benchmark::DoNotOptimize(ch.sum(p, x, "s"));
    });
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(d));
}

void BM_SecSumFloat(benchmark::State& state) {
  bench_secsum(state, pdml::SecSumMode::Float);
}
void BM_SecSumFixed(benchmark::State& state) {
  bench_secsum(state, pdml::SecSumMode::Fixed);
}
void BM_SecSumFixedPrf(benchmark::State& state) {
  bench_secsum(state, pdml::SecSumMode::FixedPrf);
}

void bench_nss(benchmark::State& state, pdml::NssMode mode) {
  const auto d = static_cast<std::size_t>(state.range(0));
  pdml::NssConfig cfg;
  cfg.mode = mode;
  const double bound = 0.9 / kParties;
  for (auto _ : state) {
    std::vector<pdml::DealerMaterial> material;
    if (mode == pdml::NssMode::FixedShared) {
      state.PauseTiming();
      const pdml::DealerCounts budget = pdml::nss_budget(d, cfg, kParties);
      pdml::SeededRng deal_rng(7, 0xDEA1);
      material =
          pdml::generate_dealer_material(kParties, budget, cfg.f, deal_rng);
      state.ResumeTiming();
    }
    pdml::run_parties(kParties, [&](pdml::Party& p) {
      const std::vector<double> x = bench_input(d, p.index(), bound);
      pdml::SeededRng share_rng(7, 0x900 + p.index());
      pdml::DealerMaterial* mat =
          material.empty() ? nullptr : &material[p.index()];
      benchmark::DoNotOptimize(
          pdml::normed_secsum(p, x, cfg, share_rng, mat, "z"));
    });
  }
}

void BM_NssFloat(benchmark::State& state) {
  bench_nss(state, pdml::NssMode::Float);
}
void BM_NssFixedIdeal(benchmark::State& state) {
  bench_nss(state, pdml::NssMode::FixedIdeal);
}
void BM_NssFixedShared(benchmark::State& state) {
  bench_nss(state, pdml::NssMode::FixedShared);
}

void BM_RriNmfSweep(benchmark::State& state) {
  pdml::SeededRng rng(7, 1);
  const pdml::DenseMatrix x = pdml::uniform_matrix(50, 20, rng);
  pdml::NmfParams params;
  params.k = 5;
  params.max_iters = 1;  // one full sweep per iteration
  params.tol = 0.0;
  const pdml::DenseMatrix t0 = pdml::nnsvd_init(x, params.k);
  for (auto _ : state) {
    benchmark::DoNotOptimize(pdml::rri_nmf(x, params, t0));
  }
}

void BM_BlockPowerIteration(benchmark::State& state) {
  pdml::SeededRng rng(7, 2);
  const pdml::DenseMatrix a = pdml::uniform_matrix(64, 64, rng);
  const pdml::DenseMatrix s = pdml::matmul(pdml::transpose(a), a);
  for (auto _ : state) {
    pdml::SeededRng iter_rng(7, 3);
    benchmark::DoNotOptimize(pdml::block_power_iteration(s, 5, 20, iter_rng));
  }
}

}  // namespace

BENCHMARK(BM_SecSumFloat)->Arg(100)->Arg(1000);
BENCHMARK(BM_SecSumFixed)->Arg(100)->Arg(1000);
BENCHMARK(BM_SecSumFixedPrf)->Arg(100)->Arg(1000);
BENCHMARK(BM_NssFloat)->Arg(64)->Arg(256);
BENCHMARK(BM_NssFixedIdeal)->Arg(64)->Arg(256);
BENCHMARK(BM_NssFixedShared)->Arg(64);
BENCHMARK(BM_RriNmfSweep);
BENCHMARK(BM_BlockPowerIteration);

BENCHMARK_MAIN();
