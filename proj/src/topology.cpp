#include "satsplit/topology.hpp"

#include <algorithm>
#include <deque>

#include "satsplit/config.hpp"
#include "satsplit/error.hpp"

namespace satsplit {

std::string to_string(Role role) {
  switch (role) {
    case Role::Client: return "client";
    case Role::Terminal: return "terminal";
    case Role::Gateway: return "gateway";
    case Role::Server: return "server";
    case Role::AuthDns: return "authdns";
  }
  return "unknown";
}

std::string to_string(NodeId node) { return to_string(node.role) + std::to_string(node.index); }

TopologyConfig TopologyConfig::from_config(const KeyValueConfig& kv) {
  TopologyConfig cfg;
  cfg.n_terminals = static_cast<std::uint32_t>(kv.get_u64("n_terminals", cfg.n_terminals));
  cfg.n_clients_per_terminal =
      static_cast<std::uint32_t>(kv.get_u64("n_clients_per_terminal", cfg.n_clients_per_terminal));
  cfg.sat_rtt = from_ms(kv.get_u64("sat_rtt_ms", 500));
  const auto terr = kv.get_u64("terr_rtt_ms", 20);
  cfg.access_rtt = from_ms(kv.get_u64("access_rtt_ms", terr));
  cfg.backhaul_rtt = from_ms(kv.get_u64("backhaul_rtt_ms", terr));
  cfg.serialization_bps = kv.get_u64("serialization_bps", 0);
  return cfg;
}

TopologyConfig TopologyConfig::load(const std::string& path) {
  return from_config(KeyValueConfig::load(path));
}

void Topology::add_node(NodeId node) {
  if (contains(node)) throw InvalidParameter("duplicate node " + to_string(node));
  nodes_.push_back(node);
  adjacency_[node];
}

void Topology::add_link(const Link& link) {
  if (!contains(link.a) || !contains(link.b)) {
    throw InvalidParameter("link endpoint not in topology");
  }
  if (link.broadcast && link.kind != LinkKind::Satellite) {
    throw InvalidParameter("only satellite links may carry a broadcast downlink");
  }
  links_.push_back(link);
  adjacency_[link.a].push_back(links_.size() - 1);
  adjacency_[link.b].push_back(links_.size() - 1);
}

void Topology::set_footprint(std::uint32_t beam, std::vector<NodeId> terminals) {
  for (auto t : terminals) {
    if (t.role != Role::Terminal || !contains(t)) {
      throw InvalidParameter("footprint may only contain terminals of this topology");
    }
  }
  footprints_[beam] = std::move(terminals);
}

bool Topology::contains(NodeId node) const { return adjacency_.contains(node); }

std::vector<const Link*> Topology::path(NodeId from, NodeId to) const {
  if (!contains(from) || !contains(to)) {
    throw NoRoute("no route " + to_string(from) + " -> " + to_string(to) + ": unknown node");
  }
  if (from == to) return {};

  // Breadth-first search; the graph is a tree, so the first path found is the
  // only one.
  std::map<NodeId, std::size_t> via;
  std::deque<NodeId> frontier{from};
  via[from] = links_.size();
  while (!frontier.empty()) {
    const auto cur = frontier.front();
    frontier.pop_front();
    if (cur == to) break;
    for (auto idx : adjacency_.at(cur)) {
      const auto& l = links_[idx];
      const auto next = l.a == cur ? l.b : l.a;
      if (via.contains(next)) continue;
      via[next] = idx;
      frontier.push_back(next);
    }
  }
  if (!via.contains(to)) {
    throw NoRoute("no route " + to_string(from) + " -> " + to_string(to));
  }
  std::vector<const Link*> hops;
  for (auto cur = to; cur != from;) {
    const auto& l = links_[via.at(cur)];
    hops.push_back(&l);
    cur = l.a == cur ? l.b : l.a;
  }
  std::reverse(hops.begin(), hops.end());
  return hops;
}

std::vector<NodeId> Topology::node_path(NodeId from, NodeId to) const {
  std::vector<NodeId> out{from};
  for (const auto* l : path(from, to)) out.push_back(l->a == out.back() ? l->b : l->a);
  return out;
}

SimTime Topology::one_way_delay(NodeId from, NodeId to) const {
  SimTime total{0};
  for (const auto* l : path(from, to)) total += l->one_way_delay;
  return total;
}

SimTime Topology::serialization_delay(NodeId from, NodeId to, std::size_t bytes) const {
  if (serialization_bps_ == 0 || bytes == 0) return SimTime{0};
  SimTime total{0};
  for (const auto* l : path(from, to)) {
    if (l->kind == LinkKind::Loopback) continue;
    // ceil(bits * 1e6 / bps) microseconds per hop
    const auto bits = static_cast<std::uint64_t>(bytes) * 8;
    total += SimTime{(bits * 1000000 + serialization_bps_ - 1) / serialization_bps_};
  }
  return total;
}

bool Topology::crosses_satellite(NodeId from, NodeId to) const {
  const auto hops = path(from, to);
  return std::any_of(hops.begin(), hops.end(),
                     [](const Link* l) { return l->kind == LinkKind::Satellite; });
}

const std::vector<NodeId>& Topology::footprint(std::uint32_t beam) const {
  static const std::vector<NodeId> empty;
  auto it = footprints_.find(beam);
  return it == footprints_.end() ? empty : it->second;
}

std::uint32_t Topology::beam_of(NodeId terminal) const {
  for (const auto& [beam, terms] : footprints_) {
    if (std::find(terms.begin(), terms.end(), terminal) != terms.end()) return beam;
  }
  throw NoRoute(to_string(terminal) + " is not in any satellite footprint");
}

SimTime Topology::downlink_delay(NodeId terminal) const {
  for (const auto& l : links_) {
    if (l.kind == LinkKind::Satellite && (l.a == terminal || l.b == terminal)) return l.one_way_delay;
  }
  throw NoRoute(to_string(terminal) + " has no satellite link");
}

NodeId Topology::terminal_of(NodeId client) const {
  if (client.role != Role::Client || !contains(client)) {
    throw NoRoute(to_string(client) + " is not a client of this topology");
  }
  for (auto idx : adjacency_.at(client)) {
    const auto& l = links_[idx];
    const auto other = l.a == client ? l.b : l.a;
    if (other.role == Role::Terminal) return other;
  }
  throw NoRoute(to_string(client) + " is not attached to a terminal");
}

std::vector<NodeId> Topology::clients_of(NodeId terminal) const {
  std::vector<NodeId> out;
  if (!contains(terminal)) return out;
  for (auto idx : adjacency_.at(terminal)) {
    const auto& l = links_[idx];
    const auto other = l.a == terminal ? l.b : l.a;
    if (other.role == Role::Client) out.push_back(other);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<NodeId> Topology::with_role(Role role) const {
  std::vector<NodeId> out;
  std::copy_if(nodes_.begin(), nodes_.end(), std::back_inserter(out),
               [role](NodeId n) { return n.role == role; });
  std::sort(out.begin(), out.end());
  return out;
}

void Topology::validate() const {
  for (auto n : nodes_) {
    const auto& adj = adjacency_.at(n);
    if (n.role == Role::Client) {
      const auto terminals = std::count_if(adj.begin(), adj.end(), [&](std::size_t i) {
        const auto& l = links_[i];
        return (l.a == n ? l.b : l.a).role == Role::Terminal;
      });
      if (terminals != 1 || adj.size() != 1) {
        throw InvalidParameter(to_string(n) + " must connect through exactly one terminal");
      }
    }
    if (n.role == Role::Terminal) {
      const auto sat = std::count_if(adj.begin(), adj.end(), [&](std::size_t i) {
        return links_[i].kind == LinkKind::Satellite;
      });
      if (sat != 1) {
        throw InvalidParameter(to_string(n) + " must reach the gateway over exactly one satellite link");
      }
    }
  }
}

Topology make_topology(const TopologyConfig& c) {
  if (c.n_terminals < 1) throw InvalidParameter("n_terminals must be >= 1");
  if (c.n_clients_per_terminal < 1) throw InvalidParameter("n_clients_per_terminal must be >= 1");
  if (c.sat_rtt.count() == 0) throw InvalidParameter("satellite RTT must be > 0");
  if (c.access_rtt.count() == 0 || c.backhaul_rtt.count() == 0) {
    throw InvalidParameter("terrestrial RTT must be > 0");
  }

  Topology topo;
  const NodeId gw{Role::Gateway, 0};
  topo.add_node(gw);
  topo.add_node({Role::Server, 0});
  topo.add_node({Role::AuthDns, 0});
  topo.add_link({gw, {Role::Server, 0}, c.backhaul_rtt / 2, LinkKind::Terrestrial});
  topo.add_link({gw, {Role::AuthDns, 0}, c.backhaul_rtt / 2, LinkKind::Terrestrial});

  std::vector<NodeId> beam;
  std::uint32_t client_index = 0;
  for (std::uint32_t t = 0; t < c.n_terminals; ++t) {
    const NodeId term{Role::Terminal, t};
    topo.add_node(term);
    topo.add_link({gw, term, c.sat_rtt / 2, LinkKind::Satellite, true, 0});
    beam.push_back(term);
    for (std::uint32_t k = 0; k < c.n_clients_per_terminal; ++k) {
      const NodeId client{Role::Client, client_index++};
      topo.add_node(client);
      topo.add_link({client, term, c.access_rtt / 2, LinkKind::Terrestrial});
    }
  }
  topo.set_footprint(0, std::move(beam));
  topo.set_serialization_bps(c.serialization_bps);
  topo.validate();
  return topo;
}

Topology default_topology(std::uint32_t n_terminals, std::uint32_t n_clients_per_terminal,
                          SimTime sat_rtt, SimTime terr_rtt) {
  TopologyConfig c;
  c.n_terminals = n_terminals;
  c.n_clients_per_terminal = n_clients_per_terminal;
  c.sat_rtt = sat_rtt;
  c.access_rtt = terr_rtt;
  c.backhaul_rtt = terr_rtt;
  return make_topology(c);
}

SimTime one_way_delay(const Topology& topo, NodeId from, NodeId to) {
  return topo.one_way_delay(from, to);
}

}  // namespace satsplit
