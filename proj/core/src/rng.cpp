#include "pdml/rng.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pdml {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream) {
  // Decorrelate streams sharing a seed: the stream id passes through the
  // finalizer before entering the base state.
  state0_ = mix64(seed + kGolden) ^ mix64(stream * 0xda942042e4dd58b5ULL + 1);
}

std::uint64_t SeededRng::next_u64() {
  return mix64(state0_ + (++counter_) * kGolden);
}

double SeededRng::real01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform(double lo, double hi) {
  return lo + (hi - lo) * real01();
}

double SeededRng::normal(double stddev) {
  if (have_spare_) {
    have_spare_ = false;
    return spare_ * stddev;
  }
  double u, v, s;
  do {
    u = 2.0 * real01() - 1.0;
    v = 2.0 * real01() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * m;
  have_spare_ = true;
  return u * m * stddev;
}

std::uint64_t SeededRng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("SeededRng::below: n must be > 0");
  // Rejection sampling to avoid modulo bias.
  const std::uint64_t limit = n * (UINT64_MAX / n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

SeededRng SeededRng::derive(std::uint64_t substream) const {
  return SeededRng(seed_, mix64(stream_ + kGolden) + substream);
}

std::vector<std::size_t> SeededRng::permutation(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(below(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace pdml
