#pragma once

#include <array>
#include <cstdint>
#include <memory>

namespace pdml {

// Pseudorandom function F_k : (invocation, component) -> u64, instantiated
// as a 128-bit-key block cipher applied to the counter block
// [invocation | component]. Used to derive secret-sharing masks locally so
// a secure sum needs only the M sum-share announcements.
class Aes128Prf {
 public:
  explicit Aes128Prf(const std::array<std::uint8_t, 16>& key);
  ~Aes128Prf();
  Aes128Prf(Aes128Prf&&) noexcept;
  Aes128Prf& operator=(Aes128Prf&&) noexcept;
  Aes128Prf(const Aes128Prf&) = delete;
  Aes128Prf& operator=(const Aes128Prf&) = delete;

  std::uint64_t word(std::uint64_t invocation, std::uint64_t component) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace pdml
