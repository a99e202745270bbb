#include "pdml/secsum.hpp"

#include <array>
#include <cmath>

namespace pdml {

namespace {

// Adds the M sum-share announcements. Everyone broadcasts, everyone adds;
// ring addition is order-independent, so party order is immaterial here.
std::vector<std::uint64_t> open_sum(Party& p, std::uint64_t round,
                                    const std::vector<std::uint64_t>& my_sum_share) {
  p.broadcast_u64s(round, topic::kOpen, my_sum_share);
  std::vector<std::uint64_t> total = my_sum_share;
  for (PartyIndex i = 0; i < p.count(); ++i) {
    if (i == p.index()) continue;
    const auto sh = p.recv_u64s(i, round, topic::kOpen);
    if (sh.size() != total.size()) {
      throw ProtocolError("secure sum: announcement length mismatch");
    }
    for (std::size_t c = 0; c < total.size(); ++c) total[c] += sh[c];
  }
  return total;
}

}  // namespace

std::vector<std::uint64_t> secsum_raw(Party& p, const std::vector<std::uint64_t>& x,
                                      SeededRng& rng) {
  const std::uint64_t r_share = p.alloc_round();
  const std::uint64_t r_open = p.alloc_round();

  const auto shares = share_vector<std::uint64_t>(x, p.count(), rng);
  for (PartyIndex i = 0; i < p.count(); ++i) {
    if (i == p.index()) continue;
    p.send_u64s(i, r_share, topic::kShare, shares[i]);
  }

  std::vector<std::uint64_t> sum_share = shares[p.index()];
  for (PartyIndex i = 0; i < p.count(); ++i) {
    if (i == p.index()) continue;
    const auto sh = p.recv_u64s(i, r_share, topic::kShare);
    if (sh.size() != x.size()) {
      throw ProtocolError("secure sum: share length mismatch");
    }
    for (std::size_t c = 0; c < x.size(); ++c) sum_share[c] += sh[c];
  }

  return open_sum(p, r_open, sum_share);
}

std::vector<double> secsum_fixed(Party& p, const std::vector<double>& x,
                                 const FixedCodec& codec, SeededRng& rng,
                                 const std::string& label) {
  const auto raw = secsum_raw(p, codec.encode_vec(x), rng);
  auto out = codec.decode_vec(raw);
  p.reveal(label, out);
  return out;
}

std::vector<double> secsum_float(Party& p, const std::vector<double>& x,
                                 const std::string& label) {
  const std::uint64_t round = p.alloc_round();
  p.broadcast_doubles(round, topic::kOpen, x);

  // Sum in ascending party order so every party (and a central reference
  // implementation looping the same way) performs the identical float ops.
  std::vector<double> total(x.size(), 0.0);
  for (PartyIndex i = 0; i < p.count(); ++i) {
    const auto xs = i == p.index() ? x : p.recv_doubles(i, round, topic::kOpen);
    if (xs.size() != x.size()) {
      throw ProtocolError("secure sum: announcement length mismatch");
    }
    for (std::size_t c = 0; c < x.size(); ++c) total[c] += xs[c];
  }
  p.reveal(label, total);
  return total;
}

PrfShareSchedule PrfShareSchedule::setup(Party& p, SeededRng& rng) {
  PrfShareSchedule sched;
  sched.out_.resize(p.count());
  sched.in_.resize(p.count());

  const std::uint64_t round = p.alloc_round();
  for (PartyIndex i = 0; i < p.count(); ++i) {
    if (i == p.index()) continue;
    std::array<std::uint8_t, 16> key{};
    for (int half = 0; half < 2; ++half) {
      const std::uint64_t w = rng.next_u64();
      for (int b = 0; b < 8; ++b) {
        key[static_cast<std::size_t>(8 * half + b)] =
            static_cast<std::uint8_t>(w >> (8 * b));
      }
    }
    std::vector<std::uint8_t> payload(key.begin(), key.end());
    p.send(i, round, topic::kSetup, std::move(payload));
    sched.out_[i].emplace(key);
  }
  for (PartyIndex i = 0; i < p.count(); ++i) {
    if (i == p.index()) continue;
    const auto payload = p.recv(i, round, topic::kSetup);
    if (payload.size() != 16) {
      throw ProtocolError("secure sum: bad key exchange payload");
    }
    std::array<std::uint8_t, 16> key{};
    std::copy(payload.begin(), payload.end(), key.begin());
    sched.in_[i].emplace(key);
  }
  return sched;
}

std::vector<std::uint64_t> secsum_raw_prf(Party& p, PrfShareSchedule& sched,
                                          const std::vector<std::uint64_t>& x) {
  if (sched.out_.size() != p.count()) {
    throw ProtocolError("secure sum: schedule party count mismatch");
  }
  const std::uint64_t inv = sched.counter_++;
  const std::uint64_t round = p.alloc_round();

  // My kept share is my input minus every share I virtually sent; my
  // sum-share adds back every share virtually sent to me. No share traffic.
  std::vector<std::uint64_t> sum_share = x;
  for (PartyIndex i = 0; i < p.count(); ++i) {
    if (i == p.index()) continue;
    for (std::size_t c = 0; c < x.size(); ++c) {
      sum_share[c] -= sched.out_[i]->word(inv, c);
      sum_share[c] += sched.in_[i]->word(inv, c);
    }
  }
  return open_sum(p, round, sum_share);
}

std::vector<double> secsum_fixed_prf(Party& p, PrfShareSchedule& sched,
                                     const std::vector<double>& x,
                                     const FixedCodec& codec,
                                     const std::string& label) {
  const auto raw = secsum_raw_prf(p, sched, codec.encode_vec(x));
  auto out = codec.decode_vec(raw);
  p.reveal(label, out);
  return out;
}

SecSumMode parse_secsum_mode(const std::string& name) {
  if (name == "float") return SecSumMode::Float;
  if (name == "fixed") return SecSumMode::Fixed;
  if (name == "fixed-prf") return SecSumMode::FixedPrf;
  throw ConfigError("unknown secure-sum mode: " + name +
                    " (expected float, fixed, or fixed-prf)");
}

std::string to_string(SecSumMode mode) {
  switch (mode) {
    case SecSumMode::Float: return "float";
    case SecSumMode::Fixed: return "fixed";
    case SecSumMode::FixedPrf: return "fixed-prf";
  }
  return "?";
}

namespace {
// Stream tags for the channel's derived generators. Protocol code deriving
// its own streams from the same seed must stay clear of these (and of any
// shifted stream_domain copies).
constexpr std::uint64_t kShareStreamBase = 0x10000;
constexpr std::uint64_t kNoiseStreamBase = 0x20000;
}  // namespace

SecSumChannel::SecSumChannel(Party& p, SecSumMode mode, FixedCodec codec,
                             std::uint64_t seed, std::uint64_t stream_domain)
    : mode_(mode),
      codec_(std::move(codec)),
      share_rng_(SeededRng(seed).derive((stream_domain << 20) +
                                        kShareStreamBase + p.index())),
      noise_rng_(SeededRng(seed).derive((stream_domain << 20) +
                                        kNoiseStreamBase + p.index())) {
  if (mode_ == SecSumMode::FixedPrf) prf_.emplace(PrfShareSchedule::setup(p, share_rng_));
}

void SecSumChannel::enable_noise(double sigma_total) {
  if (sigma_total < 0.0)
    throw ConfigError("secure sum: noise stddev must be nonnegative");
  party_sigma_ = sigma_total;  // scaled by 1/sqrt(M) at use
}

std::vector<double> SecSumChannel::sum(Party& p, std::vector<double> x,
                                       const std::string& label) {
  if (party_sigma_ > 0.0) {
    const double s = party_sigma_ / std::sqrt(static_cast<double>(p.count()));
    for (double& v : x) v += noise_rng_.normal(s);
  }
  switch (mode_) {
    case SecSumMode::Float:
      return secsum_float(p, x, label);
    case SecSumMode::Fixed:
      return secsum_fixed(p, x, codec_, share_rng_, label);
    case SecSumMode::FixedPrf:
      return secsum_fixed_prf(p, *prf_, x, codec_, label);
  }
  throw ProtocolError("secure sum: bad mode");
}

}  // namespace pdml
