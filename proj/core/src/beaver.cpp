#include "pdml/beaver.hpp"

#include <fstream>

#include "pdml/errors.hpp"
#include "pdml/serialize.hpp"

namespace pdml {

namespace {

constexpr std::uint32_t kMagic = 0x53544450;  // "PDTS"
constexpr std::uint32_t kVersion = 1;

u128 rand128(SeededRng& rng) {
  const std::uint64_t hi = rng.next_u64();
  const std::uint64_t lo = rng.next_u64();
  return (u128(hi) << 64) | lo;
}

// Splits v into `parties` additive shares mod 2^128, appending share i to
// out[i].
template <typename Push>
void share_additive(u128 v, unsigned parties, SeededRng& rng, Push&& push) {
  u128 acc = 0;
  for (unsigned i = 0; i + 1 < parties; ++i) {
    const u128 s = rand128(rng);
    push(i, s);
    acc += s;
  }
  push(parties - 1, v - acc);
}

template <typename Push>
void share_xor(u128 v, unsigned parties, SeededRng& rng, Push&& push) {
  u128 acc = 0;
  for (unsigned i = 0; i + 1 < parties; ++i) {
    const u128 s = rand128(rng) & circuit_mask();
    push(i, s);
    acc ^= s;
  }
  push(parties - 1, v ^ acc);
}

void put_u128(std::vector<std::uint8_t>& out, u128 v) {
  put_u64(out, static_cast<std::uint64_t>(v));
  put_u64(out, static_cast<std::uint64_t>(v >> 64));
}

u128 get_u128(std::span<const std::uint8_t> in, std::size_t off) {
  const std::uint64_t lo = get_u64(in, off);
  const std::uint64_t hi = get_u64(in, off + 8);
  return (u128(hi) << 64) | lo;
}

}  // namespace

const Triple128& DealerMaterial::take_mul() {
  if (mul_at_ >= muls_.size()) {
    throw ProtocolError("dealer material exhausted: multiplication triples");
  }
  return muls_[mul_at_++];
}

const Triple128& DealerMaterial::take_word() {
  if (word_at_ >= words_.size()) {
    throw ProtocolError("dealer material exhausted: word triples");
  }
  return words_[word_at_++];
}

const DaBit& DealerMaterial::take_dabit() {
  if (dabit_at_ >= dabits_.size()) {
    throw ProtocolError("dealer material exhausted: daBits");
  }
  return dabits_[dabit_at_++];
}

std::vector<DealerMaterial> generate_dealer_material(unsigned parties,
                                                     const DealerCounts& counts,
                                                     int f, SeededRng& rng) {
  if (parties == 0) throw ConfigError("dealer: party count must be positive");

  std::vector<std::vector<Triple128>> muls(parties), words(parties);
  std::vector<std::vector<DaBit>> dabits(parties);
  for (unsigned i = 0; i < parties; ++i) {
    muls[i].resize(counts.muls);
    words[i].resize(counts.word_ands);
    dabits[i].resize(counts.dabits);
  }

  for (std::uint64_t t = 0; t < counts.muls; ++t) {
    const u128 a = rand128(rng);
    const u128 b = rand128(rng);
    const u128 c = a * b;
    share_additive(a, parties, rng, [&](unsigned i, u128 s) { muls[i][t].a = s; });
    share_additive(b, parties, rng, [&](unsigned i, u128 s) { muls[i][t].b = s; });
    share_additive(c, parties, rng, [&](unsigned i, u128 s) { muls[i][t].c = s; });
  }
  for (std::uint64_t t = 0; t < counts.word_ands; ++t) {
    const u128 a = rand128(rng) & circuit_mask();
    const u128 b = rand128(rng) & circuit_mask();
    const u128 c = a & b;
    share_xor(a, parties, rng, [&](unsigned i, u128 s) { words[i][t].a = s; });
    share_xor(b, parties, rng, [&](unsigned i, u128 s) { words[i][t].b = s; });
    share_xor(c, parties, rng, [&](unsigned i, u128 s) { words[i][t].c = s; });
  }
  for (std::uint64_t t = 0; t < counts.dabits; ++t) {
    const u128 r = rng.next_u64() & 1;
    share_xor(r, parties, rng,
              [&](unsigned i, u128 s) { dabits[i][t].boolean = s; });
    share_additive(r, parties, rng,
                   [&](unsigned i, u128 s) { dabits[i][t].arithmetic = s; });
  }

  std::vector<DealerMaterial> out;
  out.reserve(parties);
  for (unsigned i = 0; i < parties; ++i) {
    out.emplace_back(f, std::move(muls[i]), std::move(words[i]),
                     std::move(dabits[i]));
  }
  return out;
}

std::vector<std::uint8_t> serialize_dealer_material(const DealerMaterial& m) {
  std::vector<std::uint8_t> out;
  out.reserve(32 + 48 * (m.muls_.size() + m.words_.size()) + 32 * m.dabits_.size());
  put_u32(out, kMagic);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(m.f_));
  put_u32(out, 0);  // reserved
  put_u64(out, m.muls_.size());
  put_u64(out, m.words_.size());
  put_u64(out, m.dabits_.size());
  for (const auto* vec : {&m.muls_, &m.words_}) {
    for (const Triple128& t : *vec) {
      put_u128(out, t.a);
      put_u128(out, t.b);
      put_u128(out, t.c);
    }
  }
  for (const DaBit& d : m.dabits_) {
    put_u128(out, d.boolean);
    put_u128(out, d.arithmetic);
  }
  return out;
}

DealerMaterial deserialize_dealer_material(const std::vector<std::uint8_t>& bytes) {
  try {
    if (get_u32(bytes, 0) != kMagic) {
      throw DataError("triple store: bad magic");
    }
    if (get_u32(bytes, 4) != kVersion) {
      throw DataError("triple store: unsupported version");
    }
    DealerMaterial m;
    m.f_ = static_cast<int>(get_u32(bytes, 8));
    const std::uint64_t n_mul = get_u64(bytes, 16);
    const std::uint64_t n_word = get_u64(bytes, 24);
    const std::uint64_t n_dabit = get_u64(bytes, 32);
    const std::uint64_t need = 40 + 48 * (n_mul + n_word) + 32 * n_dabit;
    if (bytes.size() != need) {
      throw DataError("triple store: size does not match header counts");
    }
    std::size_t off = 40;
    auto read_triples = [&](std::uint64_t n) {
      std::vector<Triple128> v(n);
      for (std::uint64_t t = 0; t < n; ++t) {
        v[t].a = get_u128(bytes, off);
        v[t].b = get_u128(bytes, off + 16);
        v[t].c = get_u128(bytes, off + 32);
        off += 48;
      }
      return v;
    };
    m.muls_ = read_triples(n_mul);
    m.words_ = read_triples(n_word);
    m.dabits_.resize(n_dabit);
    for (std::uint64_t t = 0; t < n_dabit; ++t) {
      m.dabits_[t].boolean = get_u128(bytes, off);
      m.dabits_[t].arithmetic = get_u128(bytes, off + 16);
      off += 32;
    }
    return m;
  } catch (const std::out_of_range&) {
    throw DataError("triple store: truncated file");
  }
}

void save_dealer_material(const std::string& path, const DealerMaterial& m) {
  const auto bytes = serialize_dealer_material(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open triple store for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to triple store: " + path);
}

DealerMaterial load_dealer_material(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open triple store: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_dealer_material(bytes);
}

}  // namespace pdml
