#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pdml/fixed.hpp"
#include "pdml/net.hpp"
#include "pdml/prf.hpp"
#include "pdml/rng.hpp"

namespace pdml {

// M-out-of-M additive secret sharing over Z_2^w (w = word width). Wrapping
// unsigned arithmetic is the ring reduction. Word is a template parameter so
// the identity reconstruct(share(x)) == x can be checked exhaustively in a
// reduced ring (e.g. 8-bit) as well as fuzzed at full width.

template <typename Word>
std::vector<std::vector<Word>> share_vector(const std::vector<Word>& secret,
                                            unsigned parties, SeededRng& rng) {
  if (parties == 0) throw std::invalid_argument("share_vector: no parties");
  std::vector<std::vector<Word>> shares(parties,
                                        std::vector<Word>(secret.size()));
  for (std::size_t c = 0; c < secret.size(); ++c) {
    Word acc = 0;
    for (unsigned i = 0; i + 1 < parties; ++i) {
      const Word s = static_cast<Word>(rng.next_u64());
      shares[i][c] = s;
      acc = static_cast<Word>(acc + s);
    }
    shares[parties - 1][c] = static_cast<Word>(secret[c] - acc);
  }
  return shares;
}

template <typename Word>
std::vector<Word> reconstruct(const std::vector<std::vector<Word>>& shares) {
  if (shares.empty()) throw std::invalid_argument("reconstruct: no shares");
  std::vector<Word> out(shares.front().size(), 0);
  for (const auto& sh : shares) {
    if (sh.size() != out.size()) {
      throw std::invalid_argument("reconstruct: ragged shares");
    }
    for (std::size_t c = 0; c < out.size(); ++c) {
      out[c] = static_cast<Word>(out[c] + sh[c]);
    }
  }
  return out;
}

// One secure-sum invocation over the raw u64 ring: each party splits its
// input into M additive shares, distributes them, announces the sum of the
// shares it holds, and everyone adds the M announcements. 2 rounds,
// M*(M-1) + M messages.
std::vector<std::uint64_t> secsum_raw(Party& p, const std::vector<std::uint64_t>& x,
                                      SeededRng& rng);

// Fixed-point secure sum: encode with the codec, run the ring protocol,
// decode, and record the decoded sum in the trace under `label`.
std::vector<double> secsum_fixed(Party& p, const std::vector<double>& x,
                                 const FixedCodec& codec, SeededRng& rng,
                                 const std::string& label);

// Float path: parties announce raw doubles and everyone sums them in party
// order. Exact real addition semantics for protocol-equivalence runs; hides
// nothing, by design.
std::vector<double> secsum_float(Party& p, const std::vector<double>& x,
                                 const std::string& label);

// PRF-compressed sharing: pairwise keys let both ends of every ordered pair
// derive the share locally, so an invocation needs only the M sum-share
// announcements. Keys are exchanged once at setup (M*(M-1) messages).
class PrfShareSchedule {
 public:
  // Runs the key exchange. rng supplies this party's outgoing keys.
  static PrfShareSchedule setup(Party& p, SeededRng& rng);

  // Current invocation counter (advances by one per secsum call).
  std::uint64_t invocations() const { return counter_; }

  friend std::vector<std::uint64_t> secsum_raw_prf(Party& p, PrfShareSchedule& sched,
                                                   const std::vector<std::uint64_t>& x);

 private:
  PrfShareSchedule() = default;
  std::vector<std::optional<Aes128Prf>> out_;  // key for my share toward i
  std::vector<std::optional<Aes128Prf>> in_;   // key for i's share toward me
  std::uint64_t counter_ = 0;
};

std::vector<std::uint64_t> secsum_raw_prf(Party& p, PrfShareSchedule& sched,
                                          const std::vector<std::uint64_t>& x);

std::vector<double> secsum_fixed_prf(Party& p, PrfShareSchedule& sched,
                                     const std::vector<double>& x,
                                     const FixedCodec& codec,
                                     const std::string& label);

// Payload path for a summed observable: exact real sums for equivalence
// runs, or masked fixed-point ring sums (with or without the PRF key
// schedule compressing share traffic).
enum class SecSumMode { Float, Fixed, FixedPrf };

SecSumMode parse_secsum_mode(const std::string& name);
std::string to_string(SecSumMode mode);

// One party's handle for running summed reductions: payload mode, codec,
// share randomness (derived per party from the shared seed), the PRF key
// schedule when used, and optional per-party Gaussian noise for the
// differential-privacy baseline.
//
// Channels built from the same seed must use distinct stream domains, or
// they would replay the same share masks against different inputs.
class SecSumChannel {
 public:
  SecSumChannel(Party& p, SecSumMode mode, FixedCodec codec,
                std::uint64_t seed, std::uint64_t stream_domain = 0);

  // Every subsequent sum() adds N(0, sigma_total^2 / M) noise per component
  // to the local input, so the revealed total carries N(0, sigma_total^2).
  void enable_noise(double sigma_total);

  std::vector<double> sum(Party& p, std::vector<double> x,
                          const std::string& label);

  SecSumMode mode() const { return mode_; }
  const FixedCodec& codec() const { return codec_; }

 private:
  SecSumMode mode_;
  FixedCodec codec_;
  SeededRng share_rng_;
  SeededRng noise_rng_;
  std::optional<PrfShareSchedule> prf_;
  double party_sigma_ = 0.0;
};

}  // namespace pdml
