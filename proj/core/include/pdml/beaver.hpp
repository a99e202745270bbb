#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pdml/fixed.hpp"
#include "pdml/rng.hpp"

namespace pdml {

// Offline (dealer-issued) correlated randomness for the shared-circuit
// backend. Three kinds of material, all consumed strictly in issue order:
//   - multiplication triples over Z_2^128: c = a * b, additively shared
//   - word triples over 112-bit Boolean words: c = a & b, XOR-shared
//   - daBits: a random bit r held both XOR-shared and additively shared
// The dealer is a trusted local generator (simulation setting); parties
// never learn each other's shares.

struct Triple128 {
  u128 a = 0;
  u128 b = 0;
  u128 c = 0;
};

struct DaBit {
  u128 boolean = 0;     // share of r in bit 0
  u128 arithmetic = 0;  // additive share of r mod 2^128
};

struct DealerCounts {
  std::uint64_t muls = 0;
  std::uint64_t word_ands = 0;
  std::uint64_t dabits = 0;

  DealerCounts operator+(const DealerCounts& o) const {
    return {muls + o.muls, word_ands + o.word_ands, dabits + o.dabits};
  }
  DealerCounts operator*(std::uint64_t n) const {
    return {muls * n, word_ands * n, dabits * n};
  }
  bool operator==(const DealerCounts&) const = default;
};

// One party's stock of offline material. take_* hand out the next item and
// throw ProtocolError when the stock runs dry: the online phase must never
// improvise randomness.
class DealerMaterial {
 public:
  DealerMaterial() = default;
  DealerMaterial(int f, std::vector<Triple128> muls, std::vector<Triple128> words,
                 std::vector<DaBit> dabits)
      : f_(f), muls_(std::move(muls)), words_(std::move(words)),
        dabits_(std::move(dabits)) {}

  int f() const { return f_; }

  const Triple128& take_mul();
  const Triple128& take_word();
  const DaBit& take_dabit();

  DealerCounts consumed() const { return {mul_at_, word_at_, dabit_at_}; }
  DealerCounts stocked() const {
    return {muls_.size(), words_.size(), dabits_.size()};
  }

 private:
  friend std::vector<std::uint8_t> serialize_dealer_material(const DealerMaterial&);
  friend DealerMaterial deserialize_dealer_material(const std::vector<std::uint8_t>&);

  int f_ = 0;
  std::vector<Triple128> muls_;
  std::vector<Triple128> words_;
  std::vector<DaBit> dabits_;
  std::uint64_t mul_at_ = 0;
  std::uint64_t word_at_ = 0;
  std::uint64_t dabit_at_ = 0;
};

// Deals fresh material for all parties at once. Deterministic in the seed.
std::vector<DealerMaterial> generate_dealer_material(unsigned parties,
                                                     const DealerCounts& counts,
                                                     int f, SeededRng& rng);

// Triple-store file: a fixed header (magic, version, fractional bits, item
// counts) followed by the items as little-endian u64 words, each 128-bit
// value as a (lo, hi) pair. One file holds one party's shares.
std::vector<std::uint8_t> serialize_dealer_material(const DealerMaterial& m);
DealerMaterial deserialize_dealer_material(const std::vector<std::uint8_t>& bytes);

void save_dealer_material(const std::string& path, const DealerMaterial& m);
DealerMaterial load_dealer_material(const std::string& path);

}  // namespace pdml
