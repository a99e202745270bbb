#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdml {

// Little-endian payload packing. All protocol payloads are u64 words;
// doubles travel as their IEEE-754 bit patterns.

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t off) {
  if (off + 4 > in.size()) throw std::out_of_range("get_u32: short buffer");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | in[off + static_cast<std::size_t>(i)];
  return v;
}

inline std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t off) {
  if (off + 8 > in.size()) throw std::out_of_range("get_u64: short buffer");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | in[off + static_cast<std::size_t>(i)];
  return v;
}

inline std::vector<std::uint8_t> pack_u64s(std::span<const std::uint64_t> words) {
  std::vector<std::uint8_t> out;
  out.reserve(words.size() * 8);
  for (std::uint64_t w : words) put_u64(out, w);
  return out;
}

inline std::vector<std::uint64_t> unpack_u64s(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 8 != 0) {
    throw std::invalid_argument("unpack_u64s: payload not a whole number of words");
  }
  std::vector<std::uint64_t> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = get_u64(bytes, i * 8);
  return out;
}

inline std::vector<std::uint8_t> pack_doubles(std::span<const double> xs) {
  std::vector<std::uint8_t> out;
  out.reserve(xs.size() * 8);
  for (double x : xs) put_u64(out, std::bit_cast<std::uint64_t>(x));
  return out;
}

inline std::vector<double> unpack_doubles(std::span<const std::uint8_t> bytes) {
  auto words = unpack_u64s(bytes);
  std::vector<double> out(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) out[i] = std::bit_cast<double>(words[i]);
  return out;
}

}  // namespace pdml
