#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "satsplit/crypto.hpp"
#include "satsplit/ece.hpp"
#include "satsplit/sim.hpp"
#include "satsplit/topology.hpp"

namespace satsplit {

enum class KxMode : std::uint8_t { RsaDecrypt, EcdheSign };

std::string to_string(KxMode mode);

inline constexpr std::size_t kPremasterSize = 48;
inline constexpr std::size_t kSignatureSize = 256;

// Symbolic public-key pair.  The algebra is simulated with symmetric
// primitives; what matters is that only the holder of ServerPrivateKey can
// produce decrypt/sign outputs, and terminals never get one.
class ServerPublicKey {
 public:
  ServerPublicKey() = default;

  /// Wraps a premaster secret so that only the private key can recover it.
  Bytes encrypt(ByteView premaster, ByteView nonce_seed) const;
  bool verify(ByteView message, ByteView signature) const;
  const Digest& fingerprint() const { return fingerprint_; }
  bool valid() const { return secret_ != nullptr; }

 private:
  friend class ServerPrivateKey;
  std::shared_ptr<const Bytes> secret_;
  Digest fingerprint_{};
};

class ServerPrivateKey {
 public:
  explicit ServerPrivateKey(ByteView seed);

  /// Output is always kPremasterSize octets; throws ProtocolError when the
  /// input was not produced by the matching public key.
  Bytes decrypt(ByteView ciphertext) const;
  /// Output is always kSignatureSize octets.
  Bytes sign(ByteView message) const;
  const ServerPublicKey& public_key() const { return public_; }

 private:
  std::shared_ptr<const Bytes> secret_;
  ServerPublicKey public_;
};

enum class ChannelState : std::uint8_t { Up, Revoked };

struct KeylessChannel {
  NodeId terminal;
  NodeId server;
  Bytes terminal_cert_id;
  SimTime established_at{0};
  ChannelState state = ChannelState::Up;

  bool up() const { return state == ChannelState::Up; }
};

/// Idempotent.  Later keyless operations on the channel are refused;
/// sessions already established are unaffected.
void revoke(KeylessChannel& channel);

enum class KeylessOp : std::uint8_t { Sign, Decrypt };

std::string to_string(KeylessOp op);

/// The private-key operation each key-exchange mode relies on.
constexpr KeylessOp required_op(KxMode mode) {
  return mode == KxMode::RsaDecrypt ? KeylessOp::Decrypt : KeylessOp::Sign;
}

struct KeylessRequest {
  KeylessOp op = KeylessOp::Decrypt;
  Bytes input;
  Bytes session_id;
  std::optional<std::string> push_hint;
};

struct PushedResource {
  std::string domain;
  std::string path;
  EceBody body;
};

struct KeylessResponse {
  bool refused = false;
  std::string error;
  Bytes output;
  std::vector<PushedResource> pushed;
};

struct AuditEntry {
  NodeId terminal;
  Bytes session_id;
  KeylessOp op = KeylessOp::Decrypt;
  SimTime at{0};
};

/// Origin-side keyless endpoint: holds the private key, authenticates
/// terminals by their provisioned client certificates, performs operations
/// and logs every one of them.
class KeylessServer {
 public:
  using PushSource = std::function<std::optional<EceBody>(const std::string& domain,
                                                          const std::string& path)>;

  explicit KeylessServer(NodeId node, ServerPrivateKey key);

  NodeId node() const { return node_; }
  const ServerPublicKey& public_key() const { return key_.public_key(); }
  const ServerPrivateKey& private_key() const { return key_; }

  /// Out-of-band client certificate issuance for `terminal`.
  Bytes provision(NodeId terminal);
  std::optional<Bytes> client_cert(NodeId terminal) const;

  void set_push(bool enabled, std::map<std::string, std::vector<std::string>> pushlist,
                PushSource source);

  /// Performs `req` for the terminal owning `channel` at `now`.
  KeylessResponse handle(const KeylessChannel& channel, const KeylessRequest& req, SimTime now);

  const std::vector<AuditEntry>& audit_log() const { return audit_; }

 private:
  NodeId node_;
  ServerPrivateKey key_;
  std::map<NodeId, Bytes> client_certs_;
  bool push_enabled_ = false;
  std::map<std::string, std::vector<std::string>> pushlist_;
  PushSource push_source_;
  std::vector<AuditEntry> audit_;
};

/// Channels indexed by (terminal, server); at most one per pair.
class ChannelRegistry {
 public:
  std::shared_ptr<KeylessChannel> find(NodeId terminal, NodeId server) const;
  /// Keeps the existing channel when the pair already has one.
  std::shared_ptr<KeylessChannel> add(KeylessChannel channel);
  std::shared_ptr<KeylessChannel> add(std::shared_ptr<KeylessChannel> channel);

 private:
  std::map<std::pair<NodeId, NodeId>, std::shared_ptr<KeylessChannel>> channels_;
};

/// Keyless traffic on the simulator: channel setup and request/response
/// exchanges between terminals and the origin.
class KeylessService {
 public:
  using Done = std::function<void(const KeylessResponse&)>;
  using Established = std::function<void(std::shared_ptr<KeylessChannel>, SimTime setup_time)>;
  using Failed = std::function<void(const std::string&)>;

  KeylessService(Simulator& sim, KeylessServer& server, ChannelRegistry& registry);

  /// Mutually authenticated TLS between terminal and origin (TCP connect plus
  /// a two round-trip handshake).  An existing channel is returned at once
  /// with zero setup time.
  void establish(NodeId terminal, Established on_up, Failed on_error);

  /// Sends `req` over the terminal's channel.  A channel already revoked at
  /// the terminal is refused locally without any transmission.
  void request(NodeId terminal, const KeylessRequest& req, std::uint64_t flow, Done done);

  std::shared_ptr<KeylessChannel> channel(NodeId terminal) const;

 private:
  struct Setup {
    Established on_up;
    Failed on_error;
    SimTime started{0};
  };
  struct SetupBody {
    int step = 0;
    Bytes client_cert;
    bool ok = true;
  };
  struct RequestBody {
    std::uint64_t id = 0;
    KeylessRequest req;
  };
  struct ResponseBody {
    std::uint64_t id = 0;
    KeylessResponse resp;
  };

  void on_server(const Message& m);
  void on_terminal(NodeId terminal, const Message& m);

  Simulator& sim_;
  KeylessServer& server_;
  ChannelRegistry& registry_;
  std::map<NodeId, Setup> setups_;
  std::map<std::uint64_t, Done> pending_;
  std::uint64_t next_id_ = 1;
};

struct ChannelSetup {
  std::shared_ptr<KeylessChannel> channel;
  SimTime setup_time{0};
  bool reused = false;
};

/// Establishes (or returns the existing) channel for (terminal, server).
/// Throws Unauthorized when the terminal holds no provisioned certificate.
ChannelSetup establish_channel(const Topology& topo, NodeId terminal, KeylessServer& server,
                               ChannelRegistry& registry);

struct KeylessExchange {
  KeylessResponse response;
  SimTime latency{0};
};

/// One request/response over `channel`.  Throws ProtocolError when the
/// request's op does not match `session_mode` and ChannelRevoked when the
/// server refuses.
KeylessExchange keyless_op(const Topology& topo, const std::shared_ptr<KeylessChannel>& channel,
                           KeylessServer& server, const KeylessRequest& req, KxMode session_mode);

}  // namespace satsplit
