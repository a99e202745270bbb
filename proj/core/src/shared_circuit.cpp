#include "pdml/shared_circuit.hpp"

namespace pdml {

namespace {

void append_u128(std::vector<std::uint64_t>& out, u128 v) {
  out.push_back(static_cast<std::uint64_t>(v));
  out.push_back(static_cast<std::uint64_t>(v >> 64));
}

std::vector<u128> to_u128s(const std::vector<std::uint64_t>& words) {
  if (words.size() % 2 != 0) {
    throw ProtocolError("shared circuit: odd opening payload");
  }
  std::vector<u128> out(words.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (u128(words[2 * i + 1]) << 64) | words[2 * i];
  }
  return out;
}

}  // namespace

MpcEngine::MpcEngine(Party& party, DealerMaterial& material)
    : party_(party), material_(material) {}

std::vector<u128> MpcEngine::open_words(std::span<const u128> words,
                                        std::uint16_t topic, bool xor_mode) {
  const std::uint64_t round = party_.alloc_round();
  std::vector<std::uint64_t> mine;
  mine.reserve(words.size() * 2);
  for (u128 w : words) append_u128(mine, w);
  party_.broadcast_u64s(round, topic, mine);

  std::vector<u128> total(words.begin(), words.end());
  for (PartyIndex i = 0; i < party_.count(); ++i) {
    if (i == party_.index()) continue;
    const auto theirs = to_u128s(party_.recv_u64s(i, round, topic));
    if (theirs.size() != total.size()) {
      throw ProtocolError("shared circuit: opening length mismatch");
    }
    for (std::size_t j = 0; j < total.size(); ++j) {
      if (xor_mode) {
        total[j] ^= theirs[j];
      } else {
        total[j] += theirs[j];
      }
    }
  }
  return total;
}

MpcEngine::V MpcEngine::mul(V a, V b) {
  const std::pair<V, V> job[] = {{a, b}};
  return mul_batch(job)[0];
}

std::vector<MpcEngine::V> MpcEngine::mul_batch(
    std::span<const std::pair<V, V>> jobs) {
  n_mul += jobs.size();
  std::vector<Triple128> trips;
  trips.reserve(jobs.size());
  std::vector<u128> masked;
  masked.reserve(jobs.size() * 2);
  for (auto& [x, y] : jobs) {
    const Triple128& t = material_.take_mul();
    trips.push_back(t);
    masked.push_back(x - t.a);
    masked.push_back(y - t.b);
  }
  const auto opened = open_words(masked, topic::kBeaverOpen, /*xor_mode=*/false);
  std::vector<V> out(jobs.size());
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const u128 d = opened[2 * j];
    const u128 e = opened[2 * j + 1];
    out[j] = trips[j].c + d * trips[j].b + e * trips[j].a;
    if (party_.index() == 0) out[j] += d * e;
  }
  return out;
}

std::vector<MpcEngine::B> MpcEngine::and_words(
    std::span<const std::pair<B, B>> jobs) {
  std::vector<Triple128> trips;
  trips.reserve(jobs.size());
  std::vector<u128> masked;
  masked.reserve(jobs.size() * 2);
  for (auto& [x, y] : jobs) {
    const Triple128& t = material_.take_word();
    trips.push_back(t);
    masked.push_back((x ^ t.a) & circuit_mask());
    masked.push_back((y ^ t.b) & circuit_mask());
  }
  const auto opened = open_words(masked, topic::kBitOpen, /*xor_mode=*/true);
  std::vector<B> out(jobs.size());
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const u128 d = opened[2 * j];
    const u128 e = opened[2 * j + 1];
    out[j] = trips[j].c ^ (d & trips[j].b) ^ (e & trips[j].a);
    if (party_.index() == 0) out[j] ^= d & e;
    out[j] &= circuit_mask();
  }
  return out;
}

MpcEngine::B MpcEngine::b_and(B a, B b) {
  ++n_word_and;
  const std::pair<B, B> job[] = {{a, b}};
  return and_words(job)[0];
}

std::vector<MpcEngine::B> MpcEngine::b_and_batch(
    std::span<const std::pair<B, B>> jobs) {
  n_word_and += jobs.size();
  return and_words(jobs);
}

MpcEngine::B MpcEngine::decompose(V x) {
  // The M share words, each known in full to one party, summed mod 2^112
  // with Boolean gates: carry-save reduction to two addends, then one
  // Kogge-Stone carry chain.
  std::vector<B> words(party_.count(), 0);
  words[party_.index()] = x & circuit_mask();

  while (words.size() > 2) {
    std::vector<B> next;
    std::vector<std::pair<B, B>> jobs;
    std::vector<std::pair<B, B>> groups;  // (a^b^c, b) per group, for carries
    std::size_t i = 0;
    for (; i + 2 < words.size(); i += 3) {
      const B a = words[i], b = words[i + 1], c = words[i + 2];
      jobs.emplace_back(b_xor(a, b), b_xor(b, c));
      groups.emplace_back(b_xor(b_xor(a, b), c), b);
    }
    const auto maj_parts = and_words(jobs);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      next.push_back(groups[g].first);  // bitwise sum
      next.push_back(b_shl(b_xor(maj_parts[g], groups[g].second), 1));
    }
    for (; i < words.size(); ++i) next.push_back(words[i]);
    words = std::move(next);
  }
  if (words.size() == 1) return words[0];

  const B a = words[0], b = words[1];
  const B p0 = b_xor(a, b);
  const std::pair<B, B> init[] = {{a, b}};
  B g = and_words(init)[0];
  B p = p0;
  for (int sh = 1; sh < kCircuitBits; sh <<= 1) {
    const std::pair<B, B> jobs[] = {{p, b_shl(g, sh)}, {p, b_shl(p, sh)}};
    const auto res = and_words(jobs);
    g = b_xor(g, res[0]);
    p = res[1];
  }
  return b_xor(p0, b_shl(g, 1));
}

MpcEngine::B MpcEngine::a2b(V x) {
  ++n_a2b;
  return decompose(x);
}

std::vector<MpcEngine::V> MpcEngine::bits_to_arith_internal(
    B w, std::span<const int> positions, std::span<const u128> weights) {
  std::vector<DaBit> bits;
  bits.reserve(positions.size());
  u128 masked = 0;
  for (std::size_t t = 0; t < positions.size(); ++t) {
    const DaBit& d = material_.take_dabit();
    bits.push_back(d);
    const u128 share_bit = ((w >> positions[t]) & 1) ^ (d.boolean & 1);
    masked |= share_bit << t;
  }
  const u128 one[] = {masked};
  const u128 v = open_words(one, topic::kDabitOpen, /*xor_mode=*/true)[0];

  std::vector<V> out(positions.size());
  for (std::size_t t = 0; t < positions.size(); ++t) {
    // bit = v xor r: with v public, that's r or (1 - r) on shares.
    V bit = ((v >> t) & 1) ? (from_public(1) - bits[t].arithmetic)
                           : bits[t].arithmetic;
    out[t] = bit * weights[t];
  }
  return out;
}

std::vector<MpcEngine::V> MpcEngine::bits_to_arith(
    B w, std::span<const int> positions) {
  n_dabit += positions.size();
  const std::vector<u128> weights(positions.size(), 1);
  return bits_to_arith_internal(w, positions, weights);
}

MpcEngine::V MpcEngine::trunc_round(V x, int k) {
  ++n_trunc;
  const V y = add_pub(x, u128(1) << (k - 1));
  const B w = decompose(y);

  // Arithmetic shift right by k inside the 112-bit window: logical shift,
  // then replicate the (shared) sign bit into the vacated top bits. Both
  // steps are XOR-linear, hence local.
  const u128 s = w & circuit_mask();
  const u128 sign = (s >> (kCircuitBits - 1)) & 1;
  const u128 top = ((u128(1) << k) - 1) << (kCircuitBits - k);
  const B shifted = (s >> k) ^ (sign ? top : 0);

  // Back to an additive sharing with two's-complement weights; the negative
  // weight on the top bit sign-extends the result into the mod-2^128 ring.
  std::vector<int> positions(kCircuitBits);
  std::vector<u128> weights(kCircuitBits);
  for (int j = 0; j < kCircuitBits; ++j) {
    positions[static_cast<std::size_t>(j)] = j;
    weights[static_cast<std::size_t>(j)] = u128(1) << j;
  }
  weights.back() = u128(0) - (u128(1) << (kCircuitBits - 1));
  const auto parts = bits_to_arith_internal(shifted, positions, weights);
  V z = 0;
  for (const V& part : parts) z += part;
  return z;
}

u128 MpcEngine::open(V x) {
  const V xs[] = {x};
  return open_batch(xs)[0];
}

std::vector<u128> MpcEngine::open_batch(std::span<const V> xs) {
  return open_words(xs, topic::kOpen, /*xor_mode=*/false);
}

DealerCounts dealer_budget(const PlainEngine& counted, unsigned parties) {
  // One decomposition feeds M words through the carry-save tree (M-2 ANDs;
  // each group of three collapses to two) into the 112-bit carry chain
  // (1 AND for the initial generate word, 2 per prefix level). A single
  // share word needs no gates at all.
  std::uint64_t per_decompose = 0;
  if (parties >= 2) {
    int levels = 0;
    for (int sh = 1; sh < kCircuitBits; sh <<= 1) ++levels;
    per_decompose = (parties - 2) + 1 + 2 * static_cast<std::uint64_t>(levels);
  }
  DealerCounts out;
  out.muls = counted.n_mul;
  out.word_ands =
      counted.n_word_and + (counted.n_a2b + counted.n_trunc) * per_decompose;
  out.dabits = counted.n_dabit +
               counted.n_trunc * static_cast<std::uint64_t>(kCircuitBits);
  return out;
}

}  // namespace pdml
