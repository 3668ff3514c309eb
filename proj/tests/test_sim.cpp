#include <gtest/gtest.h>

#include <random>

#include "oracle.hpp"
#include "satsplit/error.hpp"
#include "satsplit/sim.hpp"

using namespace satsplit;

namespace {

Event timer_event(SimTime at, std::function<void()> fn) {
  Event e;
  e.fire_at = at;
  e.payload.service = Service::Timer;
  e.payload.body = std::move(fn);
  return e;
}

Message msg(std::string label, Service service = Service::Http) {
  Message m;
  m.service = service;
  m.label = std::move(label);
  return m;
}

}  // namespace

TEST(EventQueue, ScheduleAtNowFiresFirst) {
  EventQueue q;
  q.schedule(timer_event(from_ms(5), [] {}));
  const auto h = q.schedule(timer_event(SimTime{0}, [] {}));
  auto e = q.pop_until(SimTime::max());
  ASSERT_TRUE(e);
  EXPECT_EQ(e->seq, h.seq);
  EXPECT_EQ(q.now(), SimTime{0});
}

TEST(EventQueue, EqualTimesDeliverInInsertionOrder) {
  EventQueue q;
  const auto a = q.schedule(timer_event(SimTime{100}, [] {}));
  const auto b = q.schedule(timer_event(SimTime{100}, [] {}));
  EXPECT_EQ(q.pop_until(SimTime::max())->seq, a.seq);
  EXPECT_EQ(q.pop_until(SimTime::max())->seq, b.seq);
}

TEST(EventQueue, SchedulingInThePastThrows) {
  EventQueue q;
  q.advance_to(SimTime{10});
  EXPECT_THROW(q.schedule(timer_event(SimTime{5}, [] {})), SchedulingInPast);
}

TEST(EventQueue, CancelledEventsNeverFire) {
  EventQueue q;
  const auto a = q.schedule(timer_event(SimTime{1}, [] {}));
  const auto b = q.schedule(timer_event(SimTime{2}, [] {}));
  EXPECT_TRUE(q.cancel(a));
  EXPECT_FALSE(q.cancel(a));
  EXPECT_EQ(q.pending(), 1u);
  EXPECT_EQ(q.pop_until(SimTime::max())->seq, b.seq);
  EXPECT_FALSE(q.cancel(b));
  EXPECT_TRUE(q.empty());
}

TEST(Simulator, RunUntilOnEmptyQueue) {
  const auto topo = make_topology({});
  Simulator sim(topo);
  EXPECT_EQ(sim.run_until(from_ms(1)), 0u);
}

TEST(Simulator, RunUntilStopsAtLimit) {
  const auto topo = make_topology({});
  Simulator sim(topo);
  const NodeId c{Role::Client, 0};
  for (int t : {10, 20, 30}) sim.at(SimTime{static_cast<std::uint64_t>(t)}, c, [] {});
  EXPECT_EQ(sim.run_until(SimTime{20}), 2u);
  EXPECT_EQ(sim.now(), SimTime{20});
  EXPECT_EQ(sim.run(), 1u);
}

TEST(Simulator, MatchesNaiveSchedulerOnRandomWorkloads) {
  const auto topo = make_topology({});
  const NodeId c{Role::Client, 0};
  std::mt19937_64 gen(42);
  for (int workload = 0; workload < 200; ++workload) {
    Simulator sim(topo);
    oracle::NaiveScheduler naive;
    std::vector<int> got;
    std::vector<int> expected;
    // Each delivered event with tag < 1000 spawns a child at a random offset
    // (possibly zero), exercising re-entrant scheduling.
    std::vector<std::uint64_t> offsets(4000);
    for (auto& o : offsets) o = gen() % 50;
    int next_tag = 0;
    std::function<void(int)> spawn_sim;
    spawn_sim = [&](int tag) {
      got.push_back(tag);
      if (tag < 1000) {
        const int child = tag + 1000;
        sim.after(SimTime{offsets[static_cast<std::size_t>(tag)]}, c, [&, child] { spawn_sim(child); });
      }
    };
    const int n = 1 + static_cast<int>(gen() % 60);
    std::vector<std::uint64_t> times;
    for (int i = 0; i < n; ++i) times.push_back(gen() % 200);
    for (int i = 0; i < n; ++i) {
      const int tag = next_tag++;
      sim.at(SimTime{times[static_cast<std::size_t>(i)]}, c, [&, tag] { spawn_sim(tag); });
      naive.schedule(times[static_cast<std::size_t>(i)], tag);
    }
    const std::uint64_t limit = gen() % 260;
    sim.run_until(SimTime{limit});
    naive.run_until(limit, [&](const oracle::NaiveScheduler::Item& item) {
      expected.push_back(item.tag);
      if (item.tag < 1000) {
        naive.schedule(naive.now() + offsets[static_cast<std::size_t>(item.tag)], item.tag + 1000);
      }
    });
    ASSERT_EQ(got, expected) << "workload " << workload;
  }
}

TEST(Simulator, SatelliteHopArrivesAfterHalfTheRtt) {
  const auto topo = make_topology({});
  Simulator sim(topo);
  const NodeId t{Role::Terminal, 0};
  SimTime arrived{0};
  sim.on(topo.gateway(), Service::Http, [&](const Message&) { arrived = sim.now(); });
  sim.send(t, topo.gateway(), msg("x"));
  sim.run();
  EXPECT_EQ(arrived, SimTime{250000});
  EXPECT_TRUE(sim.transmissions().front().satellite);
}

TEST(Simulator, SelfSendArrivesImmediately) {
  const auto topo = make_topology({});
  Simulator sim(topo);
  const NodeId t{Role::Terminal, 0};
  sim.advance_to(from_ms(7));
  SimTime arrived = SimTime::max();
  sim.on(t, Service::Http, [&](const Message&) { arrived = sim.now(); });
  sim.send(t, t, msg("loop"));
  sim.run();
  EXPECT_EQ(arrived, from_ms(7));
}

TEST(Simulator, DisconnectedNodesHaveNoRoute) {
  Topology topo;
  topo.add_node({Role::Client, 0});
  topo.add_node({Role::Server, 0});
  Simulator sim(topo);
  EXPECT_THROW(sim.send({Role::Client, 0}, {Role::Server, 0}, msg("x")), NoRoute);
}

TEST(Simulator, PerPairFifoHoldsWithSerialization) {
  TopologyConfig cfg;
  cfg.serialization_bps = 8'000'000;  // 1 byte per microsecond
  const auto topo = make_topology(cfg);
  Simulator sim(topo);
  const NodeId c{Role::Client, 0};
  std::vector<std::string> order;
  sim.on(topo.server(), Service::Http, [&](const Message& m) { order.push_back(m.label); });
  auto big = msg("big");
  big.bytes = 100000;
  auto small = msg("small");
  small.bytes = 10;
  sim.send(c, topo.server(), big);
  sim.send(c, topo.server(), small);
  sim.run();
  EXPECT_EQ(order, (std::vector<std::string>{"big", "small"}));
}

TEST(Simulator, CausalityHoldsForEveryDelivery) {
  const auto topo = make_topology({.n_terminals = 3, .n_clients_per_terminal = 2});
  Simulator sim(topo);
  std::mt19937_64 gen(7);
  const auto clients = topo.with_role(Role::Client);
  int budget = 500;
  bool ok = true;
  std::function<void(const Message&)> bounce = [&](const Message& m) {
    const auto sent = std::any_cast<SimTime>(m.body);
    if (sim.now() < sent) ok = false;
    if (--budget <= 0) return;
    auto next = msg("b");
    next.body = sim.now();
    const auto to = m.to == topo.server() ? clients[gen() % clients.size()] : topo.server();
    sim.send(m.to, to, next);
  };
  for (auto c : clients) sim.on(c, Service::Http, bounce);
  sim.on(topo.server(), Service::Http, bounce);
  for (auto c : clients) {
    auto m = msg("b");
    m.body = sim.now();
    sim.send(c, topo.server(), m);
  }
  sim.run();
  EXPECT_TRUE(ok);
  for (const auto& r : sim.transmissions()) EXPECT_GE(r.arrive_at, r.sent_at);
}

TEST(Simulator, BroadcastReachesEveryTerminalAtOnce) {
  const auto topo = make_topology({.n_terminals = 5});
  Simulator sim(topo);
  std::vector<SimTime> at;
  for (auto t : topo.with_role(Role::Terminal)) {
    sim.on(t, Service::Broadcast, [&](const Message&) { at.push_back(sim.now()); });
  }
  sim.broadcast(0, msg("cast", Service::Broadcast));
  sim.run();
  ASSERT_EQ(at.size(), 5u);
  for (auto t : at) EXPECT_EQ(t, at.front());
  EXPECT_EQ(sim.transmissions().size(), 1u);
}

TEST(Simulator, MissingHandlerIsAnInvariantViolation) {
  const auto topo = make_topology({});
  Simulator sim(topo);
  sim.send({Role::Client, 0}, topo.server(), msg("nobody"));
  EXPECT_THROW(sim.run(), InvariantViolation);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(99);
  Rng b(99);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next(), b.next());
  Rng c(100);
  EXPECT_NE(Rng(99).next(), c.next());
}

TEST(Rng, Mt19937_64ReferenceValue) {
  // The standard fixes the 10000th output of a default-seeded engine.
  Rng r(5489);
  std::uint64_t x = 0;
  for (int i = 0; i < 10000; ++i) x = r.next();
  EXPECT_EQ(x, 9981545732273789042ULL);
}

TEST(Rng, UniformStaysInRange) {
  Rng r(1);
  for (int i = 0; i < 10000; ++i) {
    const auto v = r.between(3, 9);
    ASSERT_GE(v, 3u);
    ASSERT_LE(v, 9u);
  }
}
