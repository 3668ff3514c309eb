#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "satsplit/crypto.hpp"
#include "satsplit/dane.hpp"
#include "satsplit/keyless.hpp"
#include "satsplit/sim.hpp"
#include "satsplit/topology.hpp"

namespace satsplit {

inline constexpr SimTime kDefaultSessionTtl = from_s(600);

struct ClientHello {
  std::string sni;
  std::array<std::uint8_t, 32> client_random{};
  std::vector<std::uint16_t> offered_suites{0xc02f, 0x009c};
};

enum class InterceptAction : std::uint8_t { Intercept, Forward };

/// Intercept iff the SNI is one of the terminal's authorized domains (exact,
/// ASCII case-insensitive).  Throws MalformedSni on an empty SNI.
InterceptAction intercept_decision(const ClientHello& hello, const std::set<std::string>& authorized);

struct VanillaTls {
  friend bool operator==(const VanillaTls&, const VanillaTls&) = default;
};
struct KeylessTls {
  KxMode mode = KxMode::RsaDecrypt;
  friend bool operator==(const KeylessTls&, const KeylessTls&) = default;
};
struct DaneTls {
  bool dns_cached = true;
  friend bool operator==(const DaneTls&, const DaneTls&) = default;
};

using HandshakeVariant = std::variant<VanillaTls, KeylessTls, DaneTls>;

/// "vanilla", "keyless", "dane-uncached" or "dane-cached".
std::string variant_name(const HandshakeVariant& v);
/// Inverse of variant_name.  Throws ConfigError for unknown names.
HandshakeVariant parse_variant(std::string_view name, KxMode mode = KxMode::RsaDecrypt);

enum class Outcome : std::uint8_t { Completed, Refused, ValidationFailed };

std::string to_string(Outcome o);

struct Flight {
  SimTime sent_at{0};
  SimTime arrive_at{0};
  NodeId from;
  NodeId to;
  Service service = Service::Tls;
  std::string label;
  std::size_t bytes = 0;
  bool satellite = false;
};

/// Per-session keying material.  key_material = SHA-256(client_random ||
/// server_random || premaster).
struct SessionKeys {
  Bytes session_id;
  std::array<std::uint8_t, 32> key_material{};
  SimTime established_at{0};
  SimTime ttl = kDefaultSessionTtl;

  SimTime expires_at() const { return established_at + ttl; }
  bool usable_at(SimTime now) const { return now < expires_at(); }
};

SessionKeys derive_session_keys(ByteView client_random, ByteView server_random, ByteView premaster,
                                SimTime established_at, SimTime ttl);

/// AES-128-GCM record protection under a session's keys; `seq` must not
/// repeat for one session and direction.
Bytes seal_record(const SessionKeys& keys, std::uint64_t seq, ByteView plaintext);
/// Throws AuthenticationFailure when `sealed` was not produced under `keys`.
Bytes open_record(const SessionKeys& keys, std::uint64_t seq, ByteView sealed);

struct HandshakeTrace {
  HandshakeVariant variant;
  std::uint64_t flow = 0;
  NodeId client;
  /// Node holding the other end of the session: the terminal when the
  /// handshake was split, otherwise the origin server.
  NodeId peer;
  bool intercepted = false;
  SimTime start{0};
  SimTime end{0};
  std::vector<Flight> flights;
  std::uint32_t satellite_round_trips = 0;
  Outcome outcome = Outcome::Completed;
  std::string detail;
  std::optional<SessionKeys> session;
  /// TLSA record the client validated against, and when (DANE only).
  std::optional<TlsaRecord> tlsa;
  std::optional<SimTime> validated_at;

  SimTime duration() const { return end - start; }
};

struct HandshakeParams {
  /// Handshake round trips after TCP connect: 2 (TLS 1.2 style) or 1
  /// (TLS 1.3 style).  With 1, keyless always uses the signing mode.
  unsigned handshake_rtts = 2;
  bool tcp_connect = true;
  std::string sni = "video.example";
  SimTime session_ttl = kDefaultSessionTtl;
  std::uint64_t seed = 1;
  NodeId client{Role::Client, 0};
};

/// Drives handshakes over a simulator.  Clients always address the origin;
/// a terminal taking part in a split variant sits on the path as a
/// transparent middlebox, terminates TCP and decides per ClientHello whether
/// to intercept or to relay.
class HandshakeEngine {
 public:
  using Done = std::function<void(const HandshakeTrace&)>;
  using PushSink = std::function<void(NodeId terminal, const std::vector<PushedResource>&)>;

  struct TerminalConfig {
    std::set<std::string> authorized;
    std::optional<DelegatedCert> delegated;
  };

  /// `keyless` and `dns` may be null when no handshake needs them.
  HandshakeEngine(Simulator& sim, ServerPrivateKey origin_key, KeylessService* keyless,
                  DnsService* dns);

  ~HandshakeEngine();

  HandshakeEngine(const HandshakeEngine&) = delete;
  HandshakeEngine& operator=(const HandshakeEngine&) = delete;

  void configure_terminal(NodeId terminal, TerminalConfig config);
  void set_push_sink(PushSink sink) { push_sink_ = std::move(sink); }

  /// Starts a handshake now; returns its flow id.  Throws InvalidParameter on
  /// an unusable parameter set.
  std::uint64_t start(const HandshakeParams& params, const HandshakeVariant& variant, Done done);

  /// Session keys held by `node` (client, splitting terminal or origin) for
  /// `flow`.
  std::optional<SessionKeys> session_at(NodeId node, std::uint64_t flow) const;
  const HandshakeTrace* trace(std::uint64_t flow) const;
  bool split_at_terminal(std::uint64_t flow) const;

 private:
  struct FlowState;
  struct TlsBody;

  void on_client(const Message& m);
  void on_terminal(NodeId terminal, const Message& m);
  void on_server(const Message& m);
  bool claims(NodeId terminal, const Message& m) const;

  void terminal_intercept(FlowState& f);
  void terminal_server_flight(FlowState& f, const Bytes& signature);
  void terminal_finish(FlowState& f, const Bytes& premaster);
  void client_server_flight(FlowState& f, const TlsBody& body);
  void client_proceed(FlowState& f, const TlsBody& body);
  void finish(FlowState& f, Outcome outcome, std::string detail = {});

  void send_tls(std::uint64_t flow, NodeId from, NodeId to, TlsBody body);

  Simulator& sim_;
  ServerPrivateKey origin_key_;
  KeylessService* keyless_;
  DnsService* dns_;
  PushSink push_sink_;
  std::map<NodeId, TerminalConfig> terminals_;
  std::map<std::uint64_t, std::unique_ptr<FlowState>> flows_;
  std::uint64_t next_flow_ = 1;
};

HandshakeTrace run_vanilla(const Topology& topo, const HandshakeParams& params);

/// `channel` must already be established for the client's terminal.
HandshakeTrace run_keyless(const Topology& topo, const HandshakeParams& params, KxMode mode,
                           const std::shared_ptr<KeylessChannel>& channel, KeylessServer& server);

struct DaneSetup {
  AuthoritativeDns& dns;
  ForwarderCache& forwarder;
  DelegatedCert cert;
};

/// With dns_cached the forwarder is warmed before the handshake starts;
/// otherwise any cached entry for the SNI is evicted first.
HandshakeTrace run_dane(const Topology& topo, const HandshakeParams& params, bool dns_cached,
                        DaneSetup& setup);

}  // namespace satsplit
