#pragma once

#include <cstdint>
#include <vector>

namespace pdml {

// Counter-based deterministic generator. State is (seed, stream, counter);
// output i is a fixed mix of the three, so identical (seed, stream) give
// identical sequences on every run and platform, and parties can derive
// independent streams from one broadcast seed without coordination.
//
// The mix is the splitmix64 finalizer over state0 + counter * golden ratio,
// with state0 derived from (seed, stream).
class SeededRng {
 public:
  SeededRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();

  // Uniform double in [0, 1) with 53 random bits.
  double real01();

  // Uniform double in [lo, hi).
  double uniform(double lo, double hi);

  // N(0, stddev^2) via the polar method (no trig, deterministic consumption).
  double normal(double stddev = 1.0);

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  // Derived independent stream, e.g. one per party or per experiment phase.
  SeededRng derive(std::uint64_t substream) const;

  // Fisher-Yates shuffle of indices 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t state0_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace pdml
