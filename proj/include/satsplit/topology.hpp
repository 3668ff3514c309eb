#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "satsplit/time.hpp"

namespace satsplit {

class KeyValueConfig;

enum class Role : std::uint8_t { Client, Terminal, Gateway, Server, AuthDns };

struct NodeId {
  Role role = Role::Client;
  std::uint32_t index = 0;

  friend constexpr auto operator<=>(const NodeId&, const NodeId&) = default;
};

std::string to_string(Role role);
std::string to_string(NodeId node);

enum class LinkKind : std::uint8_t { Terrestrial, Satellite, Loopback };

struct Link {
  NodeId a;
  NodeId b;
  SimTime one_way_delay{0};
  LinkKind kind = LinkKind::Terrestrial;
  /// Set only on satellite links; the gateway side of the link transmits on
  /// the beam identified by `beam`.
  bool broadcast = false;
  std::uint32_t beam = 0;

  bool connects(NodeId x, NodeId y) const { return (a == x && b == y) || (a == y && b == x); }
};

/// Parameters of the client / terminal / satellite / gateway / server layout.
/// The access hop (client-terminal) and the backhaul hop (gateway-server and
/// gateway-DNS) are separate knobs that default to the same terrestrial RTT.
struct TopologyConfig {
  std::uint32_t n_terminals = 1;
  std::uint32_t n_clients_per_terminal = 1;
  SimTime sat_rtt = from_ms(500);
  SimTime access_rtt = from_ms(20);
  SimTime backhaul_rtt = from_ms(20);
  /// Link rate for the optional per-byte serialization delay; 0 disables it.
  std::uint64_t serialization_bps = 0;

  /// Reads `sat_rtt_ms`, `terr_rtt_ms`, `access_rtt_ms`, `backhaul_rtt_ms`,
  /// `n_terminals`, `n_clients_per_terminal` and `serialization_bps`.
  /// Keys not listed are left for other consumers.
  static TopologyConfig from_config(const KeyValueConfig& kv);
  static TopologyConfig load(const std::string& path);
};

/// Node/link graph.  Immutable once built; routing follows the unique path in
/// the tree Client -> Terminal -> Gateway -> {Server, AuthDns}.
class Topology {
 public:
  Topology() = default;

  void add_node(NodeId node);
  void add_link(const Link& link);
  void set_footprint(std::uint32_t beam, std::vector<NodeId> terminals);
  void set_serialization_bps(std::uint64_t bps) { serialization_bps_ = bps; }

  const std::vector<NodeId>& nodes() const { return nodes_; }
  const std::vector<Link>& links() const { return links_; }
  bool contains(NodeId node) const;

  /// Links traversed from `from` to `to`; empty when from == to.
  std::vector<const Link*> path(NodeId from, NodeId to) const;
  /// Nodes visited from `from` to `to`, both endpoints included.
  std::vector<NodeId> node_path(NodeId from, NodeId to) const;

  SimTime one_way_delay(NodeId from, NodeId to) const;
  SimTime rtt(NodeId a, NodeId b) const { return 2 * one_way_delay(a, b); }
  /// Per-byte serialization cost summed over every non-loopback hop.
  SimTime serialization_delay(NodeId from, NodeId to, std::size_t bytes) const;
  bool crosses_satellite(NodeId from, NodeId to) const;
  std::uint64_t serialization_bps() const { return serialization_bps_; }

  const std::vector<NodeId>& footprint(std::uint32_t beam = 0) const;
  std::uint32_t beam_of(NodeId terminal) const;
  SimTime downlink_delay(NodeId terminal) const;

  NodeId terminal_of(NodeId client) const;
  std::vector<NodeId> clients_of(NodeId terminal) const;
  std::vector<NodeId> with_role(Role role) const;

  NodeId gateway() const { return {Role::Gateway, 0}; }
  NodeId server() const { return {Role::Server, 0}; }
  NodeId auth_dns() const { return {Role::AuthDns, 0}; }

  /// Throws InvalidParameter when a structural invariant does not hold.
  void validate() const;

 private:
  std::vector<NodeId> nodes_;
  std::vector<Link> links_;
  std::map<NodeId, std::vector<std::size_t>> adjacency_;
  std::map<std::uint32_t, std::vector<NodeId>> footprints_;
  std::uint64_t serialization_bps_ = 0;
};

Topology make_topology(const TopologyConfig& config);

Topology default_topology(std::uint32_t n_terminals, std::uint32_t n_clients_per_terminal,
                          SimTime sat_rtt, SimTime terr_rtt);

SimTime one_way_delay(const Topology& topo, NodeId from, NodeId to);

}  // namespace satsplit
