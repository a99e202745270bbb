#include "pdml/normed_secsum.hpp"

#include <cmath>
#include <utility>

#include "pdml/secsum.hpp"
#include "pdml/shared_circuit.hpp"

namespace pdml {

namespace {

u128 sign_extend_word(std::uint64_t w) {
  return static_cast<u128>(static_cast<i128>(static_cast<std::int64_t>(w)));
}

template <class E>
struct CircuitOut {
  std::vector<typename E::V> products;  // x_i / ||x|| at scale 2f
  typename E::V degenerate;             // 1 iff norm below sqrt resolution
};

// The normalization circuit on scale-f inputs. Identical instruction stream
// in both engines; every data-dependent branch lives behind oblivious
// selection inside the sqrt/reciprocal building blocks. The norm is an
// intermediate only: callers get the quotients plus a one-bit degeneracy
// indicator, never the norm.
template <class E>
CircuitOut<E> nss_circuit(E& eng, const std::vector<typename E::V>& s,
                          const NssConfig& cfg) {
  using V = typename E::V;
  using B = typename E::B;
  FixedSqrtParams sp = cfg.sqrt_params;
  sp.f = cfg.f;

  // Sum of squares at scale 2f, one batched round; the scale bound keeps the
  // total inside the circuit window, so only one rescale is needed.
  std::vector<std::pair<V, V>> jobs;
  jobs.reserve(s.size());
  for (const V& v : s) jobs.emplace_back(v, v);
  const auto squares = eng.mul_batch(jobs);
  V acc = squares[0];
  for (std::size_t i = 1; i < squares.size(); ++i) acc = eng.add(acc, squares[i]);
  const V total = eng.trunc_round(acc, cfg.f);

  auto [norm, recip] = fixed_sqrt_circuit_warm(eng, total, sp);
  // recip tracks the reciprocal of the previous sqrt iterate; finish it
  // toward 1/norm with the warm schedule.
  for (int k = 0; k < sp.warm_recip_iters; ++k) {
    recip = newton_recip_step(eng, norm, recip, cfg.f);
  }

  // Below sqrt resolution the quotient carries no significant bits; flag the
  // input as degenerate instead of emitting noise. Computed obliviously so
  // the norm never has to be opened.
  const u128 floor_raw = u128(1) << (cfg.f / 2);
  const B above = thresholds_ge(eng, norm, std::span<const u128>(&floor_raw, 1));
  const int pos0[] = {0};
  const V flag = eng.bits_to_arith(eng.b_and_pub(eng.b_not(above), 1), pos0)[0];

  jobs.clear();
  for (const V& v : s) jobs.emplace_back(v, recip);
  return {eng.mul_batch(jobs), flag};
}

// Turns opened quotients into the protocol result. The products are public
// at scale 2f; the final rescale to f is public arithmetic, so both fixed
// backends finish through this exact code.
NssResult finalize_fixed(const std::vector<u128>& products, const NssConfig& cfg) {
  NssResult out;
  out.raw.reserve(products.size());
  out.z.reserve(products.size());
  for (const u128 t : products) {
    const std::uint64_t w = static_cast<std::uint64_t>(trunc_round_plain(t, cfg.f));
    out.raw.push_back(w);
    out.z.push_back(static_cast<double>(static_cast<std::int64_t>(w)) /
                    std::ldexp(1.0, cfg.f));
  }
  return out;
}

NssResult run_float(Party& p, const std::vector<double>& x,
                    const std::string& label) {
  const std::uint64_t round = p.alloc_round();
  p.broadcast_doubles(round, topic::kOpen, x);
  std::vector<double> total(x.size(), 0.0);
  for (PartyIndex i = 0; i < p.count(); ++i) {
    const auto xs = i == p.index() ? x : p.recv_doubles(i, round, topic::kOpen);
    if (xs.size() != x.size()) {
      throw ProtocolError("normed sum: announcement length mismatch");
    }
    for (std::size_t c = 0; c < x.size(); ++c) total[c] += xs[c];
  }
  // Same operation order as the centralized column normalization, so a
  // single-party run reproduces it exactly.
  double sq = 0.0;
  for (const double v : total) sq += v * v;
  const double n = std::sqrt(sq);
  if (n == 0.0) throw DataError("normed sum: zero norm");
  NssResult out;
  out.z = std::move(total);
  for (double& v : out.z) v /= n;
  p.reveal(label, out.z);
  return out;
}

}  // namespace

NssResult normed_secsum(Party& p, const std::vector<double>& x,
                        const NssConfig& cfg, SeededRng& rng,
                        DealerMaterial* material, const std::string& label) {
  if (x.empty()) throw DataError("normed sum: empty input");
  if (cfg.mode == NssMode::Float) return run_float(p, x, label);

  const FixedCodec codec(cfg.f, cfg.bound, p.count());
  NssResult out;
  if (cfg.mode == NssMode::FixedIdeal) {
    const auto summed = secsum_raw(p, codec.encode_vec(x), rng);
    std::vector<u128> values(summed.size());
    for (std::size_t i = 0; i < summed.size(); ++i) {
      values[i] = sign_extend_word(summed[i]);
    }
    PlainEngine eng;
    auto res = nss_circuit(eng, values, cfg);
    if (res.degenerate != 0) {
      throw DataError("normed sum: norm below fixed-point resolution");
    }
    out = finalize_fixed(res.products, cfg);
  } else {
    if (material == nullptr) {
      throw ConfigError("normed sum: shared mode needs dealer material");
    }
    if (material->f() != cfg.f) {
      throw DataError("normed sum: dealer material fractional bits mismatch");
    }
    const auto enc = codec.encode_vec(x);
    std::vector<u128> shares(enc.size());
    for (std::size_t i = 0; i < enc.size(); ++i) {
      shares[i] = sign_extend_word(enc[i]);
    }
    MpcEngine eng(p, *material);
    auto res = nss_circuit(eng, shares, cfg);
    // Check degeneracy before opening anything else; the quotients would be
    // meaningless (and their magnitudes data-dependent) in that case.
    if (eng.open(res.degenerate) != 0) {
      throw DataError("normed sum: norm below fixed-point resolution");
    }
    out = finalize_fixed(eng.open_batch(res.products), cfg);
  }
  p.reveal(label, out.z);
  return out;
}

NssResult normed_secsum_ideal_local(const std::vector<std::vector<double>>& inputs,
                                    const NssConfig& cfg) {
  if (inputs.empty() || inputs.front().empty()) {
    throw DataError("normed sum: empty input");
  }
  const FixedCodec codec(cfg.f, cfg.bound, static_cast<unsigned>(inputs.size()));
  const std::size_t d = inputs.front().size();
  std::vector<u128> values(d, 0);
  for (const auto& x : inputs) {
    if (x.size() != d) throw DataError("normed sum: ragged party inputs");
    const auto enc = codec.encode_vec(x);
    for (std::size_t i = 0; i < d; ++i) values[i] += sign_extend_word(enc[i]);
  }
  PlainEngine eng;
  auto res = nss_circuit(eng, values, cfg);
  if (res.degenerate != 0) {
    throw DataError("normed sum: norm below fixed-point resolution");
  }
  return finalize_fixed(res.products, cfg);
}

PlainEngine nss_op_counts(std::size_t d, const NssConfig& cfg) {
  PlainEngine eng;
  const std::vector<u128> dummy(d, 0);
  nss_circuit(eng, dummy, cfg);
  return eng;
}

DealerCounts nss_budget(std::size_t d, const NssConfig& cfg, unsigned parties) {
  return dealer_budget(nss_op_counts(d, cfg), parties);
}

}  // namespace pdml
