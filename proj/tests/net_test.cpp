#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <thread>
#include <vector>

#include "pdml/errors.hpp"
#include "pdml/net.hpp"

using namespace pdml;

TEST_CASE("trace records, queries, and serializes") {
  ObservableTrace t;
  t.record("alpha", {1.0, 2.0});
  t.record("beta", {});
  CHECK(t.has("alpha"));
  CHECK_FALSE(t.has("gamma"));
  CHECK(t.values("alpha") == std::vector<double>{1.0, 2.0});
  CHECK(t.labels() == std::vector<std::string>{"alpha", "beta"});
  CHECK_THROWS(t.values("gamma"));

  // Duplicate labels make values() ambiguous.
  t.record("alpha", {3.0});
  CHECK_THROWS(t.values("alpha"));

  ObservableTrace u;
  u.record("alpha", {1.0, 2.0});
  ObservableTrace v;
  v.record("alpha", {1.0, 2.5});
  CHECK(u.to_bytes() != v.to_bytes());
  CHECK_FALSE(u == v);
  ObservableTrace w;
  w.record("alpha", {1.0, 2.0});
  CHECK(u == w);
  CHECK(u.to_bytes() == w.to_bytes());
}

TEST_CASE("broadcast ring exchange reaches every party") {
  const PartyIndex m = 4;
  auto result = run_parties(m, [&](Party& p) {
    const std::uint64_t round = p.alloc_round();
    p.broadcast_doubles(round, topic::kData, std::vector<double>{double(p.index())});
    double sum = 0.0;
    for (PartyIndex s = 0; s < m; ++s) {
      sum += p.recv_doubles(s, round, topic::kData)[0];
    }
    p.reveal("sum", {sum});
  });
  REQUIRE(result.traces.size() == m);
  for (const auto& tr : result.traces) {
    CHECK(tr.values("sum") == std::vector<double>{0.0 + 1.0 + 2.0 + 3.0});
  }
  // M broadcasts, each one send call.
  CHECK(result.messages_sent == m);
}

TEST_CASE("keyed delivery tolerates out-of-order rounds") {
  auto result = run_parties(2, [&](Party& p) {
    const std::uint64_t r0 = p.alloc_round();
    const std::uint64_t r1 = p.alloc_round();
    if (p.index() == 0) {
      // Deliberately send the later round first.
      p.broadcast_doubles(r1, topic::kData, std::vector<double>{2.0});
      p.broadcast_doubles(r0, topic::kData, std::vector<double>{1.0});
    } else {
      CHECK(p.recv_doubles(0, r0, topic::kData)[0] == 1.0);
      CHECK(p.recv_doubles(0, r1, topic::kData)[0] == 2.0);
    }
  });
  CHECK(result.messages_sent == 2);
}

TEST_CASE("duplicate envelope keys are rejected") {
  CHECK_THROWS_AS(run_parties(2,
                              [&](Party& p) {
                                if (p.index() == 0) {
                                  p.send(1, 5, topic::kData, {1});
                                  p.send(1, 5, topic::kData, {2});
                                } else {
                                  p.recv(0, 5, topic::kData);
                                  p.recv(0, 6, topic::kData);
                                }
                              }),
                  ProtocolError);
}

TEST_CASE("a failing party poisons peers and its own error surfaces") {
  // Party 1 dies with a domain error while 0 and 2 are blocked in recv; the
  // blocked parties must unblock via poisoning, and the rethrown error must
  // be party 1's own, not the poison fallout.
  CHECK_THROWS_AS(run_parties(3,
                              [&](Party& p) {
                                if (p.index() == 1) {
                                  throw DataError("party 1 bad input");
                                }
                                p.recv(1, 0, topic::kData);
                              }),
                  DataError);
}

TEST_CASE("recv times out instead of deadlocking") {
  const auto start = std::chrono::steady_clock::now();
  CHECK_THROWS_AS(run_parties(
                      2,
                      [&](Party& p) {
                        if (p.index() == 0) p.recv(1, 0, topic::kData);
                      },
                      true, std::chrono::milliseconds(200)),
                  TransportError);
  const auto elapsed = std::chrono::steady_clock::now() - start;
  CHECK(elapsed < std::chrono::seconds(10));
}

TEST_CASE("transcript records envelopes and can be disabled") {
  auto fn = [&](Party& p) {
    const std::uint64_t round = p.alloc_round();
    p.broadcast_u64s(round, topic::kShare, std::vector<std::uint64_t>{7});
    for (PartyIndex s = 0; s < p.count(); ++s) p.recv_u64s(s, round, topic::kShare);
  };
  auto with = run_parties(3, fn, true);
  // One transcript entry per send call; a broadcast is a single envelope.
  CHECK(with.transcript.size() == 3u);
  for (const auto& e : with.transcript) {
    CHECK(e.topic == topic::kShare);
    CHECK(e.receiver == kBroadcast);
  }

  auto without = run_parties(3, fn, false);
  CHECK(without.transcript.empty());
  CHECK(without.messages_sent == with.messages_sent);
}

TEST_CASE("send scheduling jitter cannot change results") {
  auto fn = [&](Party& p) {
    const std::uint64_t round = p.alloc_round();
    p.broadcast_doubles(round, topic::kData,
                        std::vector<double>{double(p.index()) * 1.5});
    double sum = 0.0;
    for (PartyIndex s = 0; s < p.count(); ++s) {
      sum += p.recv_doubles(s, round, topic::kData)[0];
    }
    p.reveal("sum", {sum});
  };
  auto plain = run_parties(3, fn);

  std::atomic<unsigned> counter{0};
  auto jitter = run_parties(3, fn, true, std::chrono::milliseconds(60000),
                            [&](PartyIndex) {
                              // Stagger senders by index-dependent delays.
                              const unsigned n = counter.fetch_add(1);
                              std::this_thread::sleep_for(
                                  std::chrono::microseconds(50 * (n % 7)));
                            });
  CHECK(plain.traces == jitter.traces);
}

TEST_CASE("party indices and counts are consistent") {
  std::atomic<int> seen{0};
  run_parties(5, [&](Party& p) {
    CHECK(p.count() == 5);
    CHECK(p.index() < 5);
    seen.fetch_add(1);
  });
  CHECK(seen.load() == 5);
}
