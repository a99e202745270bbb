#include "pdml/tcp.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <condition_variable>
#include <cstring>
#include <map>
#include <mutex>
#include <set>
#include <thread>
#include <tuple>

#include "pdml/errors.hpp"

namespace pdml {

namespace {

struct Fd {
  int fd = -1;
  Fd() = default;
  explicit Fd(int f) : fd(f) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  Fd(Fd&& o) noexcept : fd(o.fd) { o.fd = -1; }
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd = o.fd;
      o.fd = -1;
    }
    return *this;
  }
  ~Fd() { reset(); }
  void reset() {
    if (fd >= 0) {
      ::shutdown(fd, SHUT_RDWR);
      ::close(fd);
      fd = -1;
    }
  }
};

void write_all(int fd, const std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
    if (n <= 0) throw TransportError("tcp send failed");
    data += static_cast<std::size_t>(n);
    len -= static_cast<std::size_t>(n);
  }
}

bool read_all(int fd, std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::recv(fd, data, len, 0);
    if (n <= 0) return false;  // peer closed or error
    data += static_cast<std::size_t>(n);
    len -= static_cast<std::size_t>(n);
  }
  return true;
}

// One party's endpoint: a listener, one full-duplex socket per peer, and a
// reader thread per socket feeding the keyed mailbox.
class TcpEndpoint : public Transport {
 public:
  TcpEndpoint(PartyIndex idx, PartyIndex count, std::uint16_t base_port)
      : idx_(idx), count_(count) {
    peers_.resize(count);

    Fd listener(::socket(AF_INET, SOCK_STREAM, 0));
    if (listener.fd < 0) throw TransportError("tcp: socket() failed");
    const int one = 1;
    ::setsockopt(listener.fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<std::uint16_t>(base_port + idx));
    if (::bind(listener.fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      throw TransportError("tcp: cannot bind port " +
                           std::to_string(base_port + idx) + ": " +
                           std::strerror(errno));
    }
    if (::listen(listener.fd, count) != 0) throw TransportError("tcp: listen failed");

    // Dial every lower-indexed party (their listeners may come up later, so
    // retry briefly), then accept the higher-indexed ones.
    for (PartyIndex peer = 0; peer < idx_; ++peer) {
      peers_[peer] = Fd(dial(static_cast<std::uint16_t>(base_port + peer)));
      const std::uint16_t hello = idx_;
      std::uint8_t buf[2] = {static_cast<std::uint8_t>(hello & 0xff),
                             static_cast<std::uint8_t>(hello >> 8)};
      write_all(peers_[peer].fd, buf, 2);
    }
    for (PartyIndex n = idx_ + 1; n < count_; ++n) {
      Fd conn(::accept(listener.fd, nullptr, nullptr));
      if (conn.fd < 0) throw TransportError("tcp: accept failed");
      std::uint8_t buf[2];
      if (!read_all(conn.fd, buf, 2)) throw TransportError("tcp: hello lost");
      const PartyIndex who = static_cast<PartyIndex>(buf[0] | (buf[1] << 8));
      if (who <= idx_ || who >= count_ || peers_[who].fd >= 0) {
        throw ProtocolError("tcp: unexpected hello from " + std::to_string(who));
      }
      peers_[who] = std::move(conn);
    }
    peer_closed_.assign(count_, 0);
    for (PartyIndex peer = 0; peer < count_; ++peer) {
      if (peer == idx_) continue;
      const int nd = 1;
      ::setsockopt(peers_[peer].fd, IPPROTO_TCP, TCP_NODELAY, &nd, sizeof(nd));
      readers_.emplace_back([this, peer] { reader_loop(peer, peers_[peer].fd); });
    }
  }

  ~TcpEndpoint() override {
    {
      std::lock_guard lk(mu_);
      closed_ = true;
      cv_.notify_all();
    }
    // Shutdown wakes blocked readers; close only after they have joined so
    // no reader ever touches a recycled descriptor.
    for (auto& p : peers_) {
      if (p.fd >= 0) ::shutdown(p.fd, SHUT_RDWR);
    }
    for (auto& t : readers_) t.join();
  }

  void send(const Envelope& e) override {
    auto frame = tcp_encode_frame(e);
    if (e.receiver == kBroadcast) {
      for (PartyIndex r = 0; r < count_; ++r) {
        if (r == idx_) {
          deposit(e);
        } else {
          write_all(peers_[r].fd, frame.data(), frame.size());
        }
      }
    } else if (e.receiver == idx_) {
      deposit(e);
    } else {
      if (e.receiver >= count_) throw ProtocolError("tcp send: no such receiver");
      write_all(peers_[e.receiver].fd, frame.data(), frame.size());
    }
    ++messages_sent_;
  }

  std::vector<std::uint8_t> recv(std::uint64_t round, PartyIndex sender,
                                 std::uint16_t topic,
                                 std::chrono::milliseconds timeout) override {
    const Key key{round, sender, topic};
    std::unique_lock lk(mu_);
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      auto it = pending_.find(key);
      if (it != pending_.end()) {
        auto payload = std::move(it->second);
        pending_.erase(it);
        return payload;
      }
      // Only the requested sender's connection matters: a peer that finished
      // its run and closed normally must not fail receives that are still
      // waiting on someone else.
      if (closed_ || (sender < peer_closed_.size() && peer_closed_[sender])) {
        throw TransportError("tcp: peer connection lost");
      }
      if (cv_.wait_until(lk, deadline) == std::cv_status::timeout) {
        throw TransportError("tcp recv timeout (round " + std::to_string(round) +
                             ", sender " + std::to_string(sender) + ")");
      }
    }
  }

  PartyIndex index() const override { return idx_; }
  PartyIndex party_count() const override { return count_; }
  std::uint64_t messages_sent() const { return messages_sent_; }

 private:
  using Key = std::tuple<std::uint64_t, PartyIndex, std::uint16_t>;

  void deposit(const Envelope& e) {
    std::lock_guard lk(mu_);
    const Key key{e.round, e.sender, e.topic};
    if (!seen_.insert(key).second) {
      throw ProtocolError("tcp: duplicate envelope key");
    }
    pending_.emplace(key, e.payload);
    cv_.notify_all();
  }

  void reader_loop(PartyIndex peer, int fd) {
    for (;;) {
      std::uint8_t lenbuf[4];
      if (!read_all(fd, lenbuf, 4)) break;
      const std::uint32_t len = get_u32(std::span<const std::uint8_t>(lenbuf, 4), 0);
      if (len < kTcpHeaderAfterLength || len > (1u << 30)) break;
      std::vector<std::uint8_t> frame(lenbuf, lenbuf + 4);
      frame.resize(4 + len);
      if (!read_all(fd, frame.data() + 4, len)) break;
      try {
        deposit(tcp_decode_frame(frame));
      } catch (...) {
        break;
      }
    }
    std::lock_guard lk(mu_);
    peer_closed_[peer] = 1;
    cv_.notify_all();
  }

  int dial(std::uint16_t port) {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(10);
    for (;;) {
      int fd = ::socket(AF_INET, SOCK_STREAM, 0);
      if (fd < 0) throw TransportError("tcp: socket() failed");
      sockaddr_in addr{};
      addr.sin_family = AF_INET;
      addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
      addr.sin_port = htons(port);
      if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) {
        return fd;
      }
      ::close(fd);
      if (std::chrono::steady_clock::now() > deadline) {
        throw TransportError("tcp: cannot connect to port " + std::to_string(port));
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }

  PartyIndex idx_;
  PartyIndex count_;
  std::vector<Fd> peers_;
  std::vector<std::thread> readers_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::map<Key, std::vector<std::uint8_t>> pending_;
  std::set<Key> seen_;
  bool closed_ = false;               // this endpoint is being torn down
  std::vector<char> peer_closed_;     // that peer's connection saw EOF
  std::uint64_t messages_sent_ = 0;
};

}  // namespace

std::vector<std::uint8_t> tcp_encode_frame(const Envelope& e) {
  std::vector<std::uint8_t> out;
  out.reserve(4 + kTcpHeaderAfterLength + e.payload.size());
  put_u32(out, static_cast<std::uint32_t>(kTcpHeaderAfterLength + e.payload.size()));
  put_u64(out, e.round);
  out.push_back(static_cast<std::uint8_t>(e.sender & 0xff));
  out.push_back(static_cast<std::uint8_t>(e.sender >> 8));
  out.push_back(static_cast<std::uint8_t>(e.receiver & 0xff));
  out.push_back(static_cast<std::uint8_t>(e.receiver >> 8));
  out.push_back(static_cast<std::uint8_t>(e.topic & 0xff));
  out.push_back(static_cast<std::uint8_t>(e.topic >> 8));
  out.insert(out.end(), e.payload.begin(), e.payload.end());
  return out;
}

Envelope tcp_decode_frame(std::span<const std::uint8_t> frame) {
  if (frame.size() < 4 + kTcpHeaderAfterLength) {
    throw ProtocolError("tcp frame: short buffer");
  }
  const std::uint32_t len = get_u32(frame, 0);
  if (len != frame.size() - 4) {
    throw ProtocolError("tcp frame: length field mismatch");
  }
  const auto body = frame.subspan(4);
  Envelope e;
  e.round = get_u64(body, 0);
  e.sender = static_cast<PartyIndex>(body[8] | (body[9] << 8));
  e.receiver = static_cast<PartyIndex>(body[10] | (body[11] << 8));
  e.topic = static_cast<std::uint16_t>(body[12] | (body[13] << 8));
  e.payload.assign(body.begin() + static_cast<std::ptrdiff_t>(kTcpHeaderAfterLength),
                   body.end());
  return e;
}

RunResult run_parties_tcp(PartyIndex parties, std::uint16_t base_port,
                          const std::function<void(Party&)>& fn,
                          std::chrono::milliseconds recv_timeout) {
  std::vector<ObservableTrace> traces(parties);
  std::vector<std::exception_ptr> errors(parties);
  std::vector<std::uint64_t> sent(parties, 0);
  std::vector<std::thread> threads;
  threads.reserve(parties);
  for (PartyIndex i = 0; i < parties; ++i) {
    threads.emplace_back([&, i] {
      try {
        TcpEndpoint ep(i, parties, base_port);
        Party p(ep, recv_timeout);
        fn(p);
        traces[i] = p.trace();
        sent[i] = ep.messages_sent();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  // As in the in-memory runner: a peer that dies on its own raises a domain
  // error, and everyone else only sees the connection drop, so prefer the
  // first non-transport error.
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
  RunResult out;
  out.traces = std::move(traces);
  for (auto s : sent) out.messages_sent += s;
  return out;
}

}  // namespace pdml
