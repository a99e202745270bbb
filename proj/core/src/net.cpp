#include "pdml/net.hpp"

#include <algorithm>
#include <thread>

#include "pdml/errors.hpp"

namespace pdml {

void ObservableTrace::record(std::string label, std::vector<double> values) {
  entries_.push_back({std::move(label), std::move(values)});
}

const std::vector<double>& ObservableTrace::values(const std::string& label) const {
  const Entry* found = nullptr;
  for (const auto& e : entries_) {
    if (e.label == label) {
      if (found) throw ProtocolError("trace label not unique: " + label);
      found = &e;
    }
  }
  if (!found) throw ProtocolError("trace label missing: " + label);
  return found->values;
}

bool ObservableTrace::has(const std::string& label) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const Entry& e) { return e.label == label; });
}

std::vector<std::string> ObservableTrace::labels() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.label);
  return out;
}

std::vector<std::uint8_t> ObservableTrace::to_bytes() const {
  std::vector<std::uint8_t> out;
  for (const auto& e : entries_) {
    put_u32(out, static_cast<std::uint32_t>(e.label.size()));
    out.insert(out.end(), e.label.begin(), e.label.end());
    put_u64(out, e.values.size());
    for (double v : e.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

namespace {

class SimEndpointImpl;

}  // namespace

// Endpoint handing a party's sends/recvs to the shared SimNetwork.
class SimEndpoint : public Transport {
 public:
  SimEndpoint(SimNetwork& net, PartyIndex idx, PartyIndex count)
      : net_(net), idx_(idx), count_(count) {}

  void send(const Envelope& e) override {
    if (e.sender != idx_) throw ProtocolError("send: sender index spoofed");
    net_.deliver(e);
  }

  std::vector<std::uint8_t> recv(std::uint64_t round, PartyIndex sender,
                                 std::uint16_t topic,
                                 std::chrono::milliseconds timeout) override {
    return net_.take(idx_, {round, sender, topic}, timeout);
  }

  PartyIndex index() const override { return idx_; }
  PartyIndex party_count() const override { return count_; }

 private:
  SimNetwork& net_;
  PartyIndex idx_;
  PartyIndex count_;
};

SimNetwork::SimNetwork(PartyIndex parties, bool record_transcript)
    : parties_(parties), record_transcript_(record_transcript), boxes_(parties) {
  if (parties == 0 || parties >= kBroadcast) {
    throw ConfigError("SimNetwork: party count must be in [1, 65534]");
  }
  for (PartyIndex i = 0; i < parties; ++i) {
    endpoints_.push_back(std::make_unique<SimEndpoint>(*this, i, parties));
  }
}

Transport& SimNetwork::endpoint(PartyIndex i) {
  if (i >= parties_) throw ConfigError("SimNetwork::endpoint: no such party");
  return *endpoints_[i];
}

std::vector<Envelope> SimNetwork::transcript() const {
  std::lock_guard lk(const_cast<std::mutex&>(mu_));
  return transcript_;
}

void SimNetwork::poison(const std::string& why) {
  std::lock_guard lk(mu_);
  if (!poisoned_) {
    poisoned_ = true;
    poison_reason_ = why;
  }
  for (auto& box : boxes_) box.cv.notify_all();
}

void SimNetwork::set_send_hook(std::function<void(PartyIndex)> hook) {
  std::lock_guard lk(mu_);
  send_hook_ = std::move(hook);
}

void SimNetwork::deliver(const Envelope& e) {
  std::function<void(PartyIndex)> hook;
  {
    std::lock_guard lk(mu_);
    hook = send_hook_;
  }
  if (hook) hook(e.sender);

  std::lock_guard lk(mu_);
  if (poisoned_) throw TransportError("network poisoned: " + poison_reason_);
  const Key key{e.round, e.sender, e.topic};
  auto deposit = [&](PartyIndex r) {
    auto& box = boxes_[r];
    if (!box.seen.insert(key).second) {
      throw ProtocolError("duplicate envelope (round " + std::to_string(e.round) +
                          ", sender " + std::to_string(e.sender) + ", topic " +
                          std::to_string(e.topic) + ") for receiver " +
                          std::to_string(r));
    }
    box.pending.emplace(key, e.payload);
    box.cv.notify_all();
  };
  if (e.receiver == kBroadcast) {
    for (PartyIndex r = 0; r < parties_; ++r) deposit(r);
  } else {
    if (e.receiver >= parties_) throw ProtocolError("send: no such receiver");
    deposit(e.receiver);
  }
  if (record_transcript_) transcript_.push_back(e);
  messages_sent_.fetch_add(1);
}

std::vector<std::uint8_t> SimNetwork::take(PartyIndex receiver, const Key& key,
                                           std::chrono::milliseconds timeout) {
  std::unique_lock lk(mu_);
  auto& box = boxes_[receiver];
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    if (poisoned_) throw TransportError("network poisoned: " + poison_reason_);
    auto it = box.pending.find(key);
    if (it != box.pending.end()) {
      auto payload = std::move(it->second);
      box.pending.erase(it);
      return payload;
    }
    if (box.cv.wait_until(lk, deadline) == std::cv_status::timeout) {
      throw TransportError("recv timeout (round " + std::to_string(std::get<0>(key)) +
                           ", sender " + std::to_string(std::get<1>(key)) +
                           ", topic " + std::to_string(std::get<2>(key)) + ")");
    }
  }
}

void Party::send(PartyIndex receiver, std::uint64_t round, std::uint16_t topic,
                 std::vector<std::uint8_t> payload) {
  transport_.send({round, index(), receiver, topic, std::move(payload)});
}

void Party::broadcast(std::uint64_t round, std::uint16_t topic,
                      std::vector<std::uint8_t> payload) {
  send(kBroadcast, round, topic, std::move(payload));
}

std::vector<std::uint8_t> Party::recv(PartyIndex sender, std::uint64_t round,
                                      std::uint16_t topic) {
  return transport_.recv(round, sender, topic, recv_timeout_);
}

void Party::send_u64s(PartyIndex receiver, std::uint64_t round, std::uint16_t topic,
                      std::span<const std::uint64_t> words) {
  send(receiver, round, topic, pack_u64s(words));
}

std::vector<std::uint64_t> Party::recv_u64s(PartyIndex sender, std::uint64_t round,
                                            std::uint16_t topic) {
  return unpack_u64s(recv(sender, round, topic));
}

void Party::broadcast_u64s(std::uint64_t round, std::uint16_t topic,
                           std::span<const std::uint64_t> words) {
  broadcast(round, topic, pack_u64s(words));
}

void Party::broadcast_doubles(std::uint64_t round, std::uint16_t topic,
                              std::span<const double> xs) {
  broadcast(round, topic, pack_doubles(xs));
}

std::vector<double> Party::recv_doubles(PartyIndex sender, std::uint64_t round,
                                        std::uint16_t topic) {
  return unpack_doubles(recv(sender, round, topic));
}

RunResult run_parties(PartyIndex parties, const std::function<void(Party&)>& fn,
                      bool record_transcript, std::chrono::milliseconds recv_timeout,
                      std::function<void(PartyIndex)> send_hook) {
  SimNetwork net(parties, record_transcript);
  if (send_hook) net.set_send_hook(std::move(send_hook));

  std::vector<ObservableTrace> traces(parties);
  std::vector<std::exception_ptr> errors(parties);
  std::vector<std::thread> threads;
  threads.reserve(parties);
  for (PartyIndex i = 0; i < parties; ++i) {
    threads.emplace_back([&, i] {
      Party p(net.endpoint(i), recv_timeout);
      try {
        fn(p);
      } catch (...) {
        errors[i] = std::current_exception();
        net.poison("party " + std::to_string(i) + " failed");
      }
      traces[i] = p.trace();
    });
  }
  for (auto& t : threads) t.join();
  // Prefer the originating failure over poison fallout: a party that died on
  // its own raises a domain error, while its peers only ever see the
  // TransportError injected by poison().  Rethrowing the first non-transport
  // error keeps the root cause visible.
  std::exception_ptr first;
  for (PartyIndex i = 0; i < parties; ++i) {
    if (!errors[i]) continue;
    if (!first) first = errors[i];
    try {
      std::rethrow_exception(errors[i]);
    } catch (const TransportError&) {
    } catch (...) {
      first = errors[i];
      break;
    }
  }
  if (first) std::rethrow_exception(first);
  return {std::move(traces), net.messages_sent(), net.transcript()};
}

}  // namespace pdml
