#pragma once

#include <any>
#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "satsplit/time.hpp"
#include "satsplit/topology.hpp"

namespace satsplit {

/// Logical protocol a message belongs to; handlers are registered per
/// (node, service).
enum class Service : std::uint8_t { Tls, Dns, Keyless, Http, Broadcast, Timer };

std::string to_string(Service s);

struct Message {
  NodeId from;
  NodeId to;
  Service service = Service::Tls;
  std::uint64_t flow = 0;
  std::string label;
  std::size_t bytes = 0;
  std::any body;
};

struct Event {
  SimTime fire_at{0};
  std::uint64_t seq = 0;
  NodeId target;
  Message payload;
};

struct EventHandle {
  std::uint64_t seq = 0;
};

/// Priority queue of events ordered by (fire_at, seq).  Equal fire times are
/// delivered in insertion order.
class EventQueue {
 public:
  SimTime now() const { return now_; }

  /// Assigns the next sequence number to `e`.  Throws SchedulingInPast when
  /// e.fire_at < now().
  EventHandle schedule(Event e);
  bool cancel(EventHandle h);

  /// Pops the next live event with fire_at <= limit and advances the clock to
  /// it.  Returns nullopt when no such event exists.
  std::optional<Event> pop_until(SimTime limit);

  /// Moves the clock forward without delivering anything.
  void advance_to(SimTime t);

  bool empty() const { return live_.empty(); }
  std::size_t pending() const { return live_.size(); }

 private:
  struct Later {
    bool operator()(const Event& x, const Event& y) const {
      return x.fire_at != y.fire_at ? x.fire_at > y.fire_at : x.seq > y.seq;
    }
  };

  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::set<std::uint64_t> live_;
  std::uint64_t next_seq_ = 1;
  SimTime now_{0};
};

/// One transmission as seen on the wire.
struct TransmissionRecord {
  SimTime sent_at{0};
  SimTime arrive_at{0};
  NodeId from;
  NodeId to;
  Service service = Service::Tls;
  std::uint64_t flow = 0;
  std::string label;
  std::size_t bytes = 0;
  bool satellite = false;
  bool broadcast = false;
};

/// Discrete-event simulator bound to a topology.  Single-threaded; separate
/// instances share nothing mutable.
class Simulator {
 public:
  using Handler = std::function<void(const Message&)>;
  using Claim = std::function<bool(const Message&)>;

  explicit Simulator(const Topology& topo);

  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  SimTime now() const { return queue_.now(); }
  const Topology& topology() const { return topo_; }

  void on(NodeId node, Service service, Handler handler);

  /// Registers a transparent middlebox: a message routed *through* `node` for
  /// which `claim` returns true is delivered to `node` instead of its
  /// destination.  Message::to keeps the original destination.
  void intercept(NodeId node, Service service, Claim claim);

  void set_processing_delay(NodeId node, SimTime delay);

  EventHandle schedule(Event e) { return queue_.schedule(std::move(e)); }
  bool cancel(EventHandle h) { return queue_.cancel(h); }

  /// Sends `msg` from `from` towards `to`; arrival = now + processing(from) +
  /// path delay (+ serialization).  Messages between the same pair of nodes
  /// never overtake each other.  Throws NoRoute.
  EventHandle send(NodeId from, NodeId to, Message msg);

  /// One satellite downlink transmission from the gateway on `beam`; every
  /// terminal in the footprint receives it at the same instant.
  std::vector<EventHandle> broadcast(std::uint32_t beam, Message msg);

  EventHandle at(SimTime t, NodeId node, std::function<void()> fn);
  EventHandle after(SimTime delay, NodeId node, std::function<void()> fn) {
    return at(now() + delay, node, std::move(fn));
  }

  /// Delivers every event with fire_at <= t, including events scheduled while
  /// delivering.  Returns the number delivered.
  std::size_t run_until(SimTime t);
  /// Runs until the queue drains.
  std::size_t run();
  void advance_to(SimTime t) { queue_.advance_to(t); }

  const std::vector<TransmissionRecord>& transmissions() const { return log_; }
  /// Canonical text rendering of the transmission log, one line per record.
  std::string trace_text() const;

 private:
  void deliver(Event& e);

  const Topology& topo_;
  EventQueue queue_;
  std::map<std::pair<NodeId, Service>, Handler> handlers_;
  std::map<std::pair<NodeId, Service>, Claim> claims_;
  std::map<NodeId, SimTime> processing_;
  std::map<std::pair<NodeId, NodeId>, SimTime> last_arrival_;
  std::vector<TransmissionRecord> log_;
};

/// Deterministic generator: std::mt19937_64, whose output sequence is fixed by
/// the C++ standard.  Bounded draws use rejection sampling instead of
/// std::uniform_int_distribution so streams are identical across standard
/// libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, bound); bound must be > 0.
  std::uint64_t uniform(std::uint64_t bound);
  std::uint64_t between(std::uint64_t lo, std::uint64_t hi) { return lo + uniform(hi - lo + 1); }
  void fill(std::span<std::uint8_t> out);
  template <std::size_t N>
  std::array<std::uint8_t, N> bytes() {
    std::array<std::uint8_t, N> out{};
    fill(out);
    return out;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace satsplit
