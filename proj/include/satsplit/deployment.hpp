#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "satsplit/cachecast.hpp"
#include "satsplit/dane.hpp"
#include "satsplit/keyless.hpp"
#include "satsplit/sim.hpp"
#include "satsplit/tls.hpp"
#include "satsplit/topology.hpp"

namespace satsplit {

struct DeploymentConfig {
  TopologyConfig topology;
  std::string domain = "video.example";
  std::vector<Resource> resources{{{"video.example", "index.html"}, 10 * 1024, true}};

  // handshakes
  unsigned handshake_rtts = 2;
  bool tcp_connect = true;
  KxMode kx_mode = KxMode::RsaDecrypt;
  SimTime session_ttl = kDefaultSessionTtl;
  SimTime processing_delay{0};

  // dane
  SimTime tlsa_ttl = kDefaultTlsaTtl;
  SimTime refresh_interval{0};
  bool dnssec_valid = true;
  bool replay_attack = false;

  // keyless
  bool keyless_push = false;
  std::map<std::string, std::vector<std::string>> pushlist;

  // content
  SimTime epoch_length = kDefaultEpochLength;
  std::uint32_t record_size = kDefaultRecordSize;
  std::size_t cache_capacity = 0;

  std::uint64_t seed = 1;
};

/// A complete network: topology, simulator and every protocol service, with
/// all terminals provisioned for the configured domain (keyless client
/// certificate, delegated certificate, content master secret).
class Deployment {
 public:
  explicit Deployment(DeploymentConfig config);

  Deployment(const Deployment&) = delete;
  Deployment& operator=(const Deployment&) = delete;

  const DeploymentConfig& config() const { return config_; }
  const Topology& topology() const { return *topo_; }
  Simulator& sim() { return *sim_; }
  HandshakeEngine& engine() { return *engine_; }
  KeylessServer& keyless_server() { return *keyless_server_; }
  KeylessService& keyless() { return *keyless_; }
  ChannelRegistry& channels() { return registry_; }
  AuthoritativeDns& auth_dns() { return auth_; }
  DnsService& dns() { return *dns_; }
  ForwarderCache& forwarder(NodeId terminal) { return *forwarders_.at(terminal); }
  ContentService& content() { return *content_; }
  OriginServer& origin() { return origin_; }
  const DelegatedCert& delegated_cert() const { return cert_; }

  /// Brings up every terminal's keyless channel and runs the simulator until
  /// all are established.  Returns the setup time of the slowest one.
  SimTime establish_channels();
  /// Warms every forwarder with the domain's TLSA record.
  void prefetch_tlsa();
  /// Broadcasts every cacheable resource so all authorized terminals hold it.
  void warm_caches();

  /// Starts a handshake at the current time; `done` fires on completion.
  /// Completed sessions are registered with the content service.
  std::uint64_t handshake(NodeId client, const HandshakeVariant& variant,
                          HandshakeEngine::Done done = {});
  /// Runs one handshake to completion.
  HandshakeTrace run_handshake(NodeId client, const HandshakeVariant& variant);

  HandshakeParams params_for(NodeId client) const;

 private:
  DeploymentConfig config_;
  std::unique_ptr<Topology> topo_;
  std::unique_ptr<Simulator> sim_;
  AuthoritativeDns auth_;
  std::map<NodeId, std::unique_ptr<ForwarderCache>> forwarders_;
  std::unique_ptr<DnsService> dns_;
  std::unique_ptr<KeylessServer> keyless_server_;
  ChannelRegistry registry_;
  std::unique_ptr<KeylessService> keyless_;
  OriginServer origin_;
  std::unique_ptr<ContentService> content_;
  std::unique_ptr<HandshakeEngine> engine_;
  DelegatedCert cert_;
  std::uint64_t handshakes_started_ = 0;
};

struct PageLoad {
  HandshakeTrace handshake;
  ContentResult content;
  SimTime total{0};
  std::uint64_t satellite_bytes = 0;
};

/// One handshake followed by one request for the configured page over the new
/// session.  With use_ece_cache the terminals' caches are warmed first, so the
/// request is a hit; without it the terminal fetches from the origin.
/// Vanilla sessions are not split and always fetch end to end.
PageLoad page_load(const HandshakeVariant& variant, bool use_ece_cache,
                   const DeploymentConfig& config = {});

}  // namespace satsplit
