#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "pdml/serialize.hpp"

namespace pdml {

using PartyIndex = std::uint16_t;

// Receiver value addressing every party at once.
inline constexpr PartyIndex kBroadcast = 0xFFFF;

// One protocol message. (round, sender, receiver, topic) uniquely keys an
// envelope; a duplicate key is a protocol error.
struct Envelope {
  std::uint64_t round = 0;
  PartyIndex sender = 0;
  PartyIndex receiver = 0;
  std::uint16_t topic = 0;
  std::vector<std::uint8_t> payload;
};

// Topic tags. Nested protocol instances are disambiguated by round, so a
// small fixed set suffices.
namespace topic {
inline constexpr std::uint16_t kShare = 1;       // secret-share delivery
inline constexpr std::uint16_t kOpen = 2;        // sum-share announcement
inline constexpr std::uint16_t kBeaverOpen = 3;  // masked (d, e) word opening
inline constexpr std::uint16_t kBitOpen = 4;     // Boolean gate opening
inline constexpr std::uint16_t kDabitOpen = 5;   // bit-to-arithmetic opening
inline constexpr std::uint16_t kSetup = 6;       // seeds, keys, dimensions
inline constexpr std::uint16_t kData = 7;        // experiment plumbing
}  // namespace topic

// Ordered record of everything a protocol run reveals to all parties.
// Each party keeps its own trace; a run is leak-free exactly when the traces
// contain only intended observables and agree across parties.
class ObservableTrace {
 public:
  struct Entry {
    std::string label;
    std::vector<double> values;
    bool operator==(const Entry&) const = default;
  };

  void record(std::string label, std::vector<double> values);
  const std::vector<Entry>& entries() const { return entries_; }

  // Values of the single entry with this label; throws if absent/ambiguous.
  const std::vector<double>& values(const std::string& label) const;
  bool has(const std::string& label) const;
  std::vector<std::string> labels() const;

  // Canonical byte serialization (label length, label, count, IEEE bits).
  std::vector<std::uint8_t> to_bytes() const;

  bool operator==(const ObservableTrace&) const = default;

 private:
  std::vector<Entry> entries_;
};

// Transport endpoint owned by one party.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(const Envelope& e) = 0;
  virtual std::vector<std::uint8_t> recv(std::uint64_t round, PartyIndex sender,
                                         std::uint16_t topic,
                                         std::chrono::milliseconds timeout) = 0;
  virtual PartyIndex index() const = 0;
  virtual PartyIndex party_count() const = 0;
};

// In-memory network for M co-resident party threads. Delivery is keyed, so
// protocol results cannot depend on thread interleaving: a recv blocks until
// exactly the requested (round, sender, topic) arrives.
class SimNetwork {
 public:
  explicit SimNetwork(PartyIndex parties, bool record_transcript = true);

  Transport& endpoint(PartyIndex i);

  std::uint64_t messages_sent() const { return messages_sent_.load(); }

  // Full copy of every envelope sent (for leak scans in tests). Only
  // meaningful when record_transcript was true.
  std::vector<Envelope> transcript() const;

  // Marks the run failed; all blocked and future recvs throw TransportError.
  void poison(const std::string& why);

  // Test hook invoked on every send (e.g. to inject scheduling jitter).
  void set_send_hook(std::function<void(PartyIndex sender)> hook);

 private:
  friend class SimEndpoint;
  using Key = std::tuple<std::uint64_t, PartyIndex, std::uint16_t>;

  struct Mailbox {
    std::map<Key, std::vector<std::uint8_t>> pending;
    std::set<Key> seen;
    std::condition_variable cv;
  };

  void deliver(const Envelope& e);
  std::vector<std::uint8_t> take(PartyIndex receiver, const Key& key,
                                 std::chrono::milliseconds timeout);

  PartyIndex parties_;
  bool record_transcript_;
  std::mutex mu_;
  std::vector<Mailbox> boxes_;
  std::vector<Envelope> transcript_;
  std::atomic<std::uint64_t> messages_sent_{0};
  bool poisoned_ = false;
  std::string poison_reason_;
  std::function<void(PartyIndex)> send_hook_;
  std::vector<std::unique_ptr<Transport>> endpoints_;
};

// Per-party protocol context: transport + trace + deterministic round
// allocator. All parties run the same code path, so their allocators agree.
class Party {
 public:
  Party(Transport& transport, std::chrono::milliseconds recv_timeout =
                                  std::chrono::milliseconds(60000))
      : transport_(transport), recv_timeout_(recv_timeout) {}

  PartyIndex index() const { return transport_.index(); }
  PartyIndex count() const { return transport_.party_count(); }

  std::uint64_t alloc_round() { return next_round_++; }

  void send(PartyIndex receiver, std::uint64_t round, std::uint16_t topic,
            std::vector<std::uint8_t> payload);
  void broadcast(std::uint64_t round, std::uint16_t topic,
                 std::vector<std::uint8_t> payload);
  std::vector<std::uint8_t> recv(PartyIndex sender, std::uint64_t round,
                                 std::uint16_t topic);

  void send_u64s(PartyIndex receiver, std::uint64_t round, std::uint16_t topic,
                 std::span<const std::uint64_t> words);
  std::vector<std::uint64_t> recv_u64s(PartyIndex sender, std::uint64_t round,
                                       std::uint16_t topic);
  void broadcast_u64s(std::uint64_t round, std::uint16_t topic,
                      std::span<const std::uint64_t> words);
  void broadcast_doubles(std::uint64_t round, std::uint16_t topic,
                         std::span<const double> xs);
  std::vector<double> recv_doubles(PartyIndex sender, std::uint64_t round,
                                   std::uint16_t topic);

  void reveal(std::string label, std::vector<double> values) {
    trace_.record(std::move(label), std::move(values));
  }
  ObservableTrace& trace() { return trace_; }
  const ObservableTrace& trace() const { return trace_; }

  void set_recv_timeout(std::chrono::milliseconds t) { recv_timeout_ = t; }

 private:
  Transport& transport_;
  ObservableTrace trace_;
  std::uint64_t next_round_ = 0;
  std::chrono::milliseconds recv_timeout_;
};

struct RunResult {
  std::vector<ObservableTrace> traces;
  std::uint64_t messages_sent = 0;
  std::vector<Envelope> transcript;
};

// Runs fn concurrently as M parties over an in-memory network and collects
// the per-party traces. A throwing party poisons the network so peers fail
// fast instead of deadlocking; the originating failure (the first
// non-transport error, else the lowest-index one) is rethrown.
RunResult run_parties(PartyIndex parties, const std::function<void(Party&)>& fn,
                      bool record_transcript = true,
                      std::chrono::milliseconds recv_timeout =
                          std::chrono::milliseconds(60000),
                      std::function<void(PartyIndex)> send_hook = nullptr);

}  // namespace pdml
