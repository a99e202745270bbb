#include "pdml/fixed.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "pdml/circuit.hpp"

namespace pdml {

u128 trunc_round_plain(u128 x, int k) {
  if (k < 1 || k >= kCircuitBits) {
    throw std::invalid_argument("trunc_round_plain: bad shift");
  }
  x += (u128(1) << (k - 1));  // round half up
  const int spare = 128 - kCircuitBits;
  i128 s = static_cast<i128>(x << spare) >> spare;  // sign at bit 111
  s >>= k;
  return static_cast<u128>(s);
}

FixedCodec::FixedCodec(int f, double bound, unsigned parties)
    : f_(f), bound_(bound), parties_(parties) {
  if (f < 1 || f > 61) throw ConfigError("FixedCodec: f must be in [1, 61]");
  if (!(bound > 0.0) || !std::isfinite(bound)) {
    throw ConfigError("FixedCodec: bound must be positive and finite");
  }
  if (parties == 0) throw ConfigError("FixedCodec: need at least one party");
  // The ring sum of `parties` encodings must stay inside the signed 63-bit
  // window; one bit of margin absorbs per-party rounding.
  const double capacity = std::ldexp(1.0, 62 - f);
  if (static_cast<double>(parties) * bound >= capacity) {
    throw ConfigError("FixedCodec: parties * bound exceeds fixed-point capacity");
  }
}

std::uint64_t FixedCodec::encode(double x) const {
  if (!std::isfinite(x)) throw DataError("FixedCodec::encode: non-finite value");
  if (std::fabs(x) > bound_ * (1.0 + 1e-12)) {
    throw DataError("FixedCodec::encode: value exceeds declared bound");
  }
  const long long raw = llround(std::ldexp(x, f_));
  return static_cast<std::uint64_t>(raw);
}

double FixedCodec::decode(std::uint64_t raw) const {
  return std::ldexp(static_cast<double>(static_cast<std::int64_t>(raw)), -f_);
}

std::vector<std::uint64_t> FixedCodec::encode_vec(const std::vector<double>& xs) const {
  std::vector<std::uint64_t> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back(encode(x));
  return out;
}

std::vector<double> FixedCodec::decode_vec(const std::vector<std::uint64_t>& raws) const {
  std::vector<double> out;
  out.reserve(raws.size());
  for (std::uint64_t r : raws) out.push_back(decode(r));
  return out;
}

namespace {

u128 pow10_u128(int e) {
  u128 v = 1;
  for (int i = 0; i < e; ++i) v *= 10;
  return v;
}

// Exact round-half-up encode of c * 10^p at scale f, all in integers so the
// tables are platform independent.
u128 encode_exact(u128 c, int p, int f) {
  if (p >= 0) return (c * pow10_u128(p)) << f;
  const u128 den = pow10_u128(-p);
  return ((c << f) + den / 2) / den;
}

// enc(1 / (c * 10^p)).
u128 encode_exact_recip(u128 c, int p, int f) {
  if (p <= 0) {
    const u128 den = c;
    return ((pow10_u128(-p) << f) + den / 2) / den;
  }
  const u128 den = c * pow10_u128(p);
  return ((u128(1) << f) + den / 2) / den;
}

int floor_div2(int e) { return (e >= 0) ? e / 2 : -((-e + 1) / 2); }

// Guess for sqrt of a value in decade [10^e, 10^(e+1)): 2*10^(e/2) for even
// e, 6*10^((e-1)/2) for odd. Ratio to the true root stays in (0.55, 2].
std::pair<u128, u128> sqrt_guess_pair(int e, int f) {
  u128 c;
  int p;
  if (((e % 2) + 2) % 2 == 0) {
    c = 2;
    p = floor_div2(e);
  } else {
    c = 6;
    p = floor_div2(e - 1);
  }
  return {encode_exact(c, p, f), encode_exact_recip(c, p, f)};
}

DecadeTable build_table(int f) {
  DecadeTable tab;
  tab.f = f;
  // Supported input range tops out at 2^f (not the full ring capacity): the
  // reciprocal of a larger value's root would round to zero at scale f and
  // the warm start could never recover. At f=31 this coincides with the
  // codec capacity anyway.
  const u128 cap = u128(1) << std::min(62, 2 * f);
  for (int e = -18; e <= 18; ++e) {
    const u128 enc = encode_exact(1, e, f);
    if (enc >= 1 && enc <= cap) {
      tab.exps.push_back(e);
      tab.thresholds.push_back(enc);
    }
  }
  if (tab.exps.size() < 3) throw ConfigError("DecadeTable: f leaves too few decades");
  const int e0 = tab.exps.front();
  const std::size_t n = tab.exps.size();
  tab.sqrt_guess.resize(n + 1);
  tab.sqrt_guess_recip.resize(n + 1);
  tab.recip_guess.resize(n + 1);
  const auto at_least_one = [](u128 v) { return v == 0 ? u128(1) : v; };
  for (std::size_t j = 0; j < n; ++j) {
    auto [g, r] = sqrt_guess_pair(tab.exps[j], f);
    tab.sqrt_guess[j] = g;
    tab.sqrt_guess_recip[j] = at_least_one(r);
    tab.recip_guess[j] = at_least_one(encode_exact(1, -(tab.exps[j] + 1), f));
  }
  // Catch-all band below the lowest threshold.
  auto [gl, rl] = sqrt_guess_pair(e0 - 1, f);
  tab.sqrt_guess[n] = gl;
  tab.sqrt_guess_recip[n] = at_least_one(rl);
  tab.recip_guess[n] = at_least_one(encode_exact(1, -e0, f));

  // Build-time sanity. The first warm refresh runs Newton on g1 * r0 where
  // g1/g0 = (1 + ratio^-2)/2, so keeping the guess-to-root ratio within
  // [0.59, 2.05] bounds that product by 1.94 < 2, inside the convergence
  // region. Checked on every band, including the catch-all down to the
  // smallest positive input 2^-f.
  const double ulp = std::ldexp(1.0, -f);
  for (std::size_t j = 0; j <= n; ++j) {
    const double guess = std::ldexp(static_cast<double>(tab.sqrt_guess[j]), -f);
    double lo, hi;  // band value range
    if (j < n) {
      lo = std::pow(10.0, tab.exps[j]);
      hi = (j + 1 < n) ? std::pow(10.0, tab.exps[j + 1])
                       : std::ldexp(static_cast<double>(cap), -f);
    } else {
      lo = ulp;
      hi = std::pow(10.0, e0);
    }
    const double rmin = guess / std::sqrt(hi), rmax = guess / std::sqrt(lo);
    if (rmin < 0.59 || rmax > 2.05) {
      throw std::logic_error("DecadeTable: sqrt guess ratio out of range");
    }
  }
  return tab;
}

}  // namespace

const DecadeTable& DecadeTable::get(int f) {
  static std::mutex mu;
  static std::map<int, DecadeTable> cache;
  std::lock_guard lk(mu);
  auto it = cache.find(f);
  if (it == cache.end()) it = cache.emplace(f, build_table(f)).first;
  return it->second;
}

u128 circuit_encode(double x, int f) {
  if (!std::isfinite(x)) throw DataError("circuit_encode: non-finite value");
  const long double scaled = static_cast<long double>(x) * std::ldexp(1.0L, f);
  if (fabsl(scaled) >= std::ldexp(1.0L, kCircuitValueBits)) {
    throw DataError("circuit_encode: value exceeds circuit window");
  }
  const long double r = roundl(scaled);
  const bool neg = r < 0;
  const u128 mag = static_cast<u128>(neg ? -r : r);
  return neg ? (u128(0) - mag) : mag;
}

double circuit_decode(u128 v, int f) {
  const i128 s = static_cast<i128>(v);
  return static_cast<double>(static_cast<long double>(s) * std::ldexp(1.0L, -f));
}

u128 fixed_sqrt_plain(u128 s, const FixedSqrtParams& p) {
  if (signbit_plain(s)) throw DataError("fixed_sqrt: negative input");
  PlainEngine eng;
  return fixed_sqrt_circuit(eng, s, p);
}

u128 fixed_recip_plain(u128 v, int f, int newton_iters) {
  PlainEngine eng;
  return fixed_recip_circuit(eng, v, f, newton_iters);
}

u128 fixed_div_plain(u128 u, u128 v, int f) {
  PlainEngine eng;
  auto r = fixed_recip_circuit(eng, v, f, 10);
  return eng.trunc_round(eng.mul(u, r), f);
}

}  // namespace pdml
