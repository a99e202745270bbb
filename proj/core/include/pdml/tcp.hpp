#pragma once

#include <cstdint>
#include <functional>

#include "pdml/net.hpp"

namespace pdml {

// Wire framing for TCP transport, little-endian:
//   [u32 length][u64 round][u16 sender][u16 receiver][u16 topic][payload]
// where length counts everything after itself (14 header bytes + payload).
inline constexpr std::size_t kTcpHeaderAfterLength = 14;

std::vector<std::uint8_t> tcp_encode_frame(const Envelope& e);

// Parses one complete frame (length prefix included). A short buffer or a
// length field that disagrees with the buffer is a protocol error.
Envelope tcp_decode_frame(std::span<const std::uint8_t> frame);

// Runs fn as `parties` threads connected by a loopback TCP mesh: party i
// listens on base_port + i and dials every lower-indexed party. Framing,
// keying and failure semantics match the in-memory network; a dropped peer
// surfaces as a TransportError at the blocked recv, never a deadlock.
//
// Throws TransportError if a listening port cannot be bound.
RunResult run_parties_tcp(PartyIndex parties, std::uint16_t base_port,
                          const std::function<void(Party&)>& fn,
                          std::chrono::milliseconds recv_timeout =
                              std::chrono::milliseconds(60000));

}  // namespace pdml
