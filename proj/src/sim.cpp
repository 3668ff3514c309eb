#include "satsplit/sim.hpp"

#include <limits>
#include <sstream>

#include "satsplit/error.hpp"

namespace satsplit {

std::string to_string(Service s) {
  switch (s) {
    case Service::Tls: return "tls";
    case Service::Dns: return "dns";
    case Service::Keyless: return "keyless";
    case Service::Http: return "http";
    case Service::Broadcast: return "broadcast";
    case Service::Timer: return "timer";
  }
  return "unknown";
}

EventHandle EventQueue::schedule(Event e) {
  if (e.fire_at < now_) {
    throw SchedulingInPast("event at " + format_ms(e.fire_at) + " ms scheduled at " +
                           format_ms(now_) + " ms");
  }
  e.seq = next_seq_++;
  const EventHandle h{e.seq};
  live_.insert(e.seq);
  queue_.push(std::move(e));
  return h;
}

bool EventQueue::cancel(EventHandle h) {
  return live_.erase(h.seq) > 0;
}

std::optional<Event> EventQueue::pop_until(SimTime limit) {
  while (!queue_.empty()) {
    if (queue_.top().fire_at > limit) return std::nullopt;
    Event e = queue_.top();
    queue_.pop();
    if (!live_.erase(e.seq)) continue;
    now_ = std::max(now_, e.fire_at);
    return e;
  }
  return std::nullopt;
}

void EventQueue::advance_to(SimTime t) { now_ = std::max(now_, t); }

Simulator::Simulator(const Topology& topo) : topo_(topo) {}

void Simulator::on(NodeId node, Service service, Handler handler) {
  handlers_[{node, service}] = std::move(handler);
}

void Simulator::intercept(NodeId node, Service service, Claim claim) {
  claims_[{node, service}] = std::move(claim);
}

void Simulator::set_processing_delay(NodeId node, SimTime delay) { processing_[node] = delay; }

EventHandle Simulator::send(NodeId from, NodeId to, Message msg) {
  msg.from = from;
  msg.to = to;

  auto receiver = to;
  if (!claims_.empty()) {
    const auto hops = topo_.node_path(from, to);
    for (std::size_t i = 1; i + 1 < hops.size(); ++i) {
      auto it = claims_.find({hops[i], msg.service});
      if (it != claims_.end() && it->second(msg)) {
        receiver = hops[i];
        break;
      }
    }
  }

  SimTime depart = now();
  if (auto it = processing_.find(from); it != processing_.end()) depart += it->second;
  auto arrive = depart + topo_.one_way_delay(from, receiver) +
                topo_.serialization_delay(from, receiver, msg.bytes);
  auto& last = last_arrival_[{from, receiver}];
  arrive = std::max(arrive, last);
  last = arrive;

  log_.push_back({now(), arrive, from, receiver, msg.service, msg.flow, msg.label, msg.bytes,
                  topo_.crosses_satellite(from, receiver), false});
  return queue_.schedule({arrive, 0, receiver, std::move(msg)});
}

std::vector<EventHandle> Simulator::broadcast(std::uint32_t beam, Message msg) {
  const auto gw = topo_.gateway();
  const auto& terminals = topo_.footprint(beam);
  if (terminals.empty()) throw NoRoute("beam " + std::to_string(beam) + " has no terminals");

  SimTime depart = now();
  if (auto it = processing_.find(gw); it != processing_.end()) depart += it->second;
  // A single transmission: all receivers share the slowest downlink arrival.
  SimTime arrive{0};
  for (auto t : terminals) {
    arrive = std::max(arrive, depart + topo_.one_way_delay(gw, t) +
                                  topo_.serialization_delay(gw, t, msg.bytes));
  }

  msg.from = gw;
  log_.push_back({now(), arrive, gw, gw, Service::Broadcast, msg.flow, msg.label, msg.bytes, true,
                  true});
  std::vector<EventHandle> handles;
  for (auto t : terminals) {
    Message copy = msg;
    copy.to = t;
    copy.service = Service::Broadcast;
    handles.push_back(queue_.schedule({arrive, 0, t, std::move(copy)}));
  }
  return handles;
}

EventHandle Simulator::at(SimTime t, NodeId node, std::function<void()> fn) {
  Message m;
  m.from = node;
  m.to = node;
  m.service = Service::Timer;
  m.body = std::move(fn);
  return queue_.schedule({t, 0, node, std::move(m)});
}

void Simulator::deliver(Event& e) {
  if (e.payload.service == Service::Timer) {
    std::any_cast<std::function<void()>&>(e.payload.body)();
    return;
  }
  auto it = handlers_.find({e.target, e.payload.service});
  if (it == handlers_.end()) {
    throw InvariantViolation("no " + to_string(e.payload.service) + " handler at " +
                             to_string(e.target));
  }
  it->second(e.payload);
}

std::size_t Simulator::run_until(SimTime t) {
  std::size_t delivered = 0;
  while (auto e = queue_.pop_until(t)) {
    deliver(*e);
    ++delivered;
  }
  return delivered;
}

std::size_t Simulator::run() { return run_until(SimTime::max()); }

std::string Simulator::trace_text() const {
  std::ostringstream out;
  for (const auto& r : log_) {
    out << r.sent_at.count() << ' ' << r.arrive_at.count() << ' ' << to_string(r.from) << ' '
        << to_string(r.to) << ' ' << to_string(r.service) << ' ' << r.flow << ' ' << r.label << ' '
        << r.bytes << ' ' << r.satellite << ' ' << r.broadcast << '\n';
  }
  return out.str();
}

std::uint64_t Rng::uniform(std::uint64_t bound) {
  if (bound == 0) return 0;
  const auto limit = std::numeric_limits<std::uint64_t>::max() -
                     std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

void Rng::fill(std::span<std::uint8_t> out) {
  std::size_t i = 0;
  while (i < out.size()) {
    auto word = engine_();
    for (int b = 0; b < 8 && i < out.size(); ++b, ++i) {
      out[i] = static_cast<std::uint8_t>(word & 0xff);
      word >>= 8;
    }
  }
}

}  // namespace satsplit
