#include <doctest.h>

#include <chrono>
#include <thread>

#include "vrgym/bridge/broker.hpp"
#include "vrgym/bridge/client.hpp"
#include "vrgym/social.hpp"

using namespace vrgym;
using namespace vrgym::social;

namespace {

SocialSignal sig(const std::string& who, SignalKind k, std::int64_t tick = 0) { return {who, k, tick}; }

FsmState feed(FsmState s, const SocialSignal& x) { return on_signal(std::move(s), x).first; }

std::optional<ResponsePrimitive> next_response(bridge::BridgeClient& c, int timeout_ms) {
  auto e = c.receive(timeout_ms);
  if (!e) return std::nullopt;
  return ResponsePrimitive::from_json(e->data);
}

}  // namespace

TEST_CASE("fsm responses") {
  auto [s1, r1] = on_signal({}, sig("human", SignalKind::wave));
  CHECK(r1 == ResponsePrimitive{ResponseKind::wave_back, 120, "human"});
  CHECK(s1.busy());
  CHECK(s1.active_until == 120);

  auto [s2, r2] = on_signal({}, sig("human", SignalKind::stretch));
  CHECK(r2 == ResponsePrimitive{ResponseKind::handshake_reach, 90, "human"});

  SUBCASE("returns to idle after the duration") {
    auto [a, started] = advance_to(s1, 119);
    CHECK(a.busy());
    CHECK(started.empty());
    auto [b, none] = advance_to(a, 120);
    CHECK_FALSE(b.busy());
    CHECK(none.empty());
    CHECK(on_signal(b, sig("h", SignalKind::stretch)).second.kind == ResponseKind::handshake_reach);
  }

  SUBCASE("second wave while busy is queued then executed") {
    auto [q, idle] = on_signal(s1, sig("other", SignalKind::wave));
    CHECK(idle.kind == ResponseKind::idle);
    CHECK(q.queue.size() == 1);
    auto [done, started] = advance_to(q, 120);
    REQUIRE(started.size() == 1);
    CHECK(started[0] == ResponsePrimitive{ResponseKind::wave_back, 120, "other"});
    CHECK(done.active_until == 240);
    // A long jump drains back-to-back work.
    auto [idle_again, more] = advance_to(done, 10000);
    CHECK(more.empty());
    CHECK_FALSE(idle_again.busy());
  }

  SUBCASE("queue depth four drops the oldest") {
    FsmState s = s1;
    for (int i = 0; i < 6; ++i) s = feed(s, sig("h" + std::to_string(i), SignalKind::stretch));
    CHECK(s.queue.size() == 4);
    CHECK(s.dropped == 2);
    CHECK(s.queue.front().agent_id == "h2");
    auto [end, started] = advance_to(s, 1000000);
    REQUIRE(started.size() == 4);
    for (int i = 0; i < 4; ++i) CHECK(started[i].target == "h" + std::to_string(i + 2));
  }

  SUBCASE("determinism") {
    std::vector<SocialSignal> script{sig("a", SignalKind::wave), sig("b", SignalKind::stretch),
                                     sig("c", SignalKind::wave)};
    auto run = [&] {
      FsmState s;
      std::vector<ResponsePrimitive> out;
      for (std::size_t i = 0; i < script.size(); ++i) {
        auto [t, st] = advance_to(std::move(s), static_cast<std::int64_t>(i) * 50);
        out.insert(out.end(), st.begin(), st.end());
        auto [u, r] = on_signal(std::move(t), script[i]);
        out.push_back(r);
        s = std::move(u);
      }
      auto [t, st] = advance_to(std::move(s), 10000);
      out.insert(out.end(), st.begin(), st.end());
      return out;
    };
    CHECK(run() == run());
  }
}

TEST_CASE("signal parsing") {
  CHECK(signal_agent("/agent/h1/signal") == "h1");
  CHECK_FALSE(signal_agent("/agent/h1/action"));
  CHECK_FALSE(signal_agent("/agent//signal").has_value());
  auto s = parse_signal("/agent/h1/signal", {{"kind", "stretch"}, {"tick", 42}}, 0);
  CHECK(s.agent_id == "h1");
  CHECK(s.kind == SignalKind::stretch);
  CHECK(s.tick == 42);
  CHECK(parse_signal("/agent/h1/signal", {{"kind", "wave"}}, 7).tick == 7);
  CHECK_THROWS_AS(parse_signal("/agent/h1/signal", {{"kind", "jump"}}, 0), SocialError);
  CHECK_THROWS_AS(parse_signal("/agent/h1/signal", nlohmann::json::array(), 0), SocialError);
  auto r = ResponsePrimitive{ResponseKind::wave_back, 120, "h1"};
  CHECK(r.to_json() == nlohmann::json{{"kind", "wave_back"}, {"duration", 120}, {"target", "h1"}});
  CHECK(ResponsePrimitive::from_json(r.to_json()) == r);
  CHECK_THROWS_AS(ResponsePrimitive::from_json({{"kind", "wave_back"}, {"duration", 0}, {"target", "x"}}),
                  SocialError);
}

TEST_CASE("peer over a live broker") {
  auto broker = bridge::serve(0);
  SocialPeer peer("127.0.0.1", broker->port(), "robot");
  REQUIRE(peer.wait_connected(2000));

  bridge::BridgeClient human("127.0.0.1", broker->port());
  human.subscribe_sync(action_topic("robot"));

  SUBCASE("no signals, no responses") { CHECK_FALSE(human.receive(200).has_value()); }

  SUBCASE("wave then stretch") {
    human.publish(signal_topic("h1"), "SocialSignal", {{"kind", "wave"}, {"tick", 0}});
    auto r = next_response(human, 1000);
    REQUIRE(r);
    CHECK(*r == ResponsePrimitive{ResponseKind::wave_back, 120, "h1"});
    human.publish(signal_topic("h1"), "SocialSignal", {{"kind", "stretch"}, {"tick", 1000}});
    r = next_response(human, 1000);
    REQUIRE(r);
    CHECK(*r == ResponsePrimitive{ResponseKind::handshake_reach, 90, "h1"});
    CHECK(peer.stats().responses == 2);
  }

  SUBCASE("two humans wave at once") {
    human.publish(signal_topic("alice"), "SocialSignal", {{"kind", "wave"}, {"tick", 500}});
    human.publish(signal_topic("bob"), "SocialSignal", {{"kind", "wave"}, {"tick", 500}});
    auto a = next_response(human, 1000);
    // The second starts once the first wave_back (2 s at 60 Hz) ends.
    auto b = next_response(human, 4000);
    REQUIRE(a);
    REQUIRE(b);
    CHECK(a->target == "alice");
    CHECK(b->target == "bob");
    CHECK(b->kind == ResponseKind::wave_back);
  }

  SUBCASE("malformed signals are ignored") {
    human.publish(signal_topic("h1"), "SocialSignal", {{"kind", "jump"}});
    CHECK_FALSE(human.receive(200).has_value());
    CHECK(peer.stats().rejected == 1);
  }
  peer.stop();
}

TEST_CASE("peer reconnects and keeps state") {
  bridge::BrokerOptions opt;
  opt.tcp_port = 0;
  auto broker = std::make_unique<bridge::Broker>(opt);
  broker->start();
  const std::uint16_t port = broker->port();
  SocialPeer peer("127.0.0.1", port, "robot", {60.0, 20, 200});
  REQUIRE(peer.wait_connected(2000));
  {
    bridge::BridgeClient human("127.0.0.1", port);
    human.subscribe_sync(action_topic("robot"));
    human.publish(signal_topic("h1"), "SocialSignal", {{"kind", "wave"}, {"tick", 100}});
    REQUIRE(next_response(human, 1000));
  }
  broker->stop();
  broker.reset();
  std::this_thread::sleep_for(std::chrono::milliseconds(100));
  CHECK_FALSE(peer.connected());

  opt.tcp_port = port;
  broker = std::make_unique<bridge::Broker>(opt);
  broker->start();
  REQUIRE(peer.wait_connected(3000));
  CHECK(peer.stats().reconnects >= 1);
  CHECK(peer.state().now >= 100);

  bridge::BridgeClient human("127.0.0.1", port);
  human.subscribe_sync(action_topic("robot"));
  human.publish(signal_topic("h2"), "SocialSignal", {{"kind", "stretch"}, {"tick", 1000}});
  auto r = next_response(human, 1000);
  REQUIRE(r);
  CHECK(r->target == "h2");
  peer.stop();
}
