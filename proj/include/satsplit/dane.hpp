#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "satsplit/crypto.hpp"
#include "satsplit/sim.hpp"
#include "satsplit/time.hpp"
#include "satsplit/topology.hpp"

namespace satsplit {

inline constexpr SimTime kDefaultTlsaTtl = from_s(300);

/// Certificate an origin delegates to a terminal; its digest is what the
/// origin publishes in TLSA.
struct DelegatedCert {
  NodeId subject;
  Digest digest{};
  std::string issued_for;
  SimTime not_after = SimTime::max();

  /// Builds a synthetic certificate body for (subject, domain, serial) and
  /// records its SHA-256 digest.
  static DelegatedCert issue(NodeId subject, const std::string& domain, std::uint64_t serial,
                             SimTime not_after = SimTime::max());
};

/// TLSA association (domain -> certificate digest).  DNSSEC is reduced to a
/// validity bit plus the signing time; a signature covers [signed_at,
/// signed_at + ttl).
struct TlsaRecord {
  std::string domain;
  Digest cert_digest{};
  SimTime ttl = kDefaultTlsaTtl;
  std::uint64_t serial = 0;
  bool signature_valid = true;
  SimTime signed_at{0};

  SimTime expires_at() const { return signed_at + ttl; }
  bool fresh_at(SimTime now) const { return now < expires_at(); }
};

/// Case-insensitive ASCII comparison of DNS names.
bool same_domain(std::string_view a, std::string_view b);

/// Pin check: digest and domain match and the certificate has not expired.
bool validate_pin(const DelegatedCert& cert, const TlsaRecord& rec, SimTime now);

/// Authoritative publisher for TLSA records.
class AuthoritativeDns {
 public:
  TlsaRecord publish(const std::string& domain, const Digest& digest, SimTime ttl = kDefaultTlsaTtl);
  /// Replaces the digest and bumps the serial; answers given from now on
  /// carry the new digest.
  TlsaRecord rotate_record(const std::string& domain, const Digest& new_digest);
  void set_signature_valid(const std::string& domain, bool valid);
  void set_ttl(const std::string& domain, SimTime ttl);

  /// Signed answer as issued at `now`.  Throws NxDomain.
  TlsaRecord answer(const std::string& domain, SimTime now);
  std::optional<TlsaRecord> current(const std::string& domain) const;
  std::uint64_t queries() const { return queries_; }

 private:
  std::map<std::string, TlsaRecord> zone_;
  std::uint64_t queries_ = 0;
};

/// DNS forwarder cache hosted at a terminal.  Entries are keyed by domain and
/// aged from the authoritative signing time.
class ForwarderCache {
 public:
  struct Entry {
    TlsaRecord record;
    SimTime fetched_at{0};
  };

  /// refresh_interval == 0 disables proactive refresh.
  explicit ForwarderCache(SimTime refresh_interval = SimTime{0}) : refresh_interval_(refresh_interval) {}

  /// Cached record if now < fetched_at + ttl.  In replay mode the first
  /// record ever cached for the domain is served regardless of age.
  std::optional<TlsaRecord> lookup(const std::string& domain, SimTime now) const;
  void store(const TlsaRecord& record, SimTime fetched_at);
  void evict(const std::string& domain) { entries_.erase(lower(domain)); }
  void clear() { entries_.clear(); }

  /// Domains whose entry is at least refresh_interval old at `now`.
  std::vector<std::string> due_for_refresh(SimTime now) const;

  SimTime refresh_interval() const { return refresh_interval_; }
  void set_refresh_interval(SimTime interval) { refresh_interval_ = interval; }

  /// Models a forwarder that keeps replaying a stale signed answer instead of
  /// accepting refreshed ones.
  void set_replay(bool replay) { replay_ = replay; }
  bool replay() const { return replay_; }

  const std::map<std::string, Entry>& entries() const { return entries_; }

 private:
  static std::string lower(std::string_view s);

  SimTime refresh_interval_;
  bool replay_ = false;
  std::map<std::string, Entry> entries_;
};

enum class DnsStatus : std::uint8_t { Ok, NxDomain, Bogus };

struct DnsAnswer {
  std::string domain;
  DnsStatus status = DnsStatus::Ok;
  std::optional<TlsaRecord> record;
  bool from_cache = false;
};

struct RefreshReport {
  std::vector<std::string> refreshed;
  /// Forwarder <-> AuthDns exchanges; each is one satellite round trip.
  std::uint32_t satellite_round_trips = 0;
};

/// DNS resolution on top of the simulator: forwarders at terminals, the
/// authoritative server behind the gateway.  Concurrent misses for the same
/// domain at one forwarder share one upstream query.
class DnsService {
 public:
  using Done = std::function<void(const DnsAnswer&)>;

  DnsService(Simulator& sim, AuthoritativeDns& auth, std::map<NodeId, ForwarderCache*> forwarders);

  /// Client query through its terminal's forwarder.  `flow` tags the
  /// transmissions for trace extraction.
  void query(NodeId client, const std::string& domain, std::uint64_t flow, Done done);

  /// Starts background re-fetches of every entry due at `terminal`.
  RefreshReport refresh(NodeId terminal);
  /// Runs `refresh` every refresh_interval until `until`.
  void schedule_refresh(NodeId terminal, SimTime until);
  /// Fills the forwarder cache at `terminal` as if a client had asked.
  void prefetch(NodeId terminal, const std::string& domain);

  ForwarderCache& forwarder(NodeId terminal);
  std::uint64_t upstream_queries() const { return upstream_queries_; }

 private:
  struct QueryBody {
    std::uint64_t id = 0;
    std::string domain;
    bool background = false;
  };
  struct AnswerBody {
    std::uint64_t id = 0;
    DnsAnswer answer;
  };
  struct Waiter {
    NodeId client;
    std::uint64_t id = 0;
    std::uint64_t flow = 0;
  };

  void on_forwarder(NodeId terminal, const Message& m);
  void on_auth(const Message& m);
  void on_client(const Message& m);
  void fetch_upstream(NodeId terminal, const std::string& domain, std::uint64_t flow, bool background);

  Simulator& sim_;
  AuthoritativeDns& auth_;
  std::map<NodeId, ForwarderCache*> forwarders_;
  std::map<std::uint64_t, Done> pending_client_;
  std::map<std::pair<NodeId, std::string>, std::vector<Waiter>> inflight_;
  std::uint64_t next_id_ = 1;
  std::uint64_t upstream_queries_ = 0;
};

struct TlsaResolution {
  TlsaRecord record;
  SimTime latency{0};
  bool hit = false;
};

/// Resolves `domain` for `client` through `forwarder` (hosted at the client's
/// terminal), starting at `now`.  Throws NxDomain or Bogus.
TlsaResolution resolve_tlsa(const std::string& domain, ForwarderCache& forwarder,
                            AuthoritativeDns& auth, const Topology& topo, NodeId client,
                            SimTime now);

/// Re-fetches every entry of `forwarder` (at `terminal`) older than its
/// refresh interval, completing the exchanges before returning.
RefreshReport proactive_refresh(ForwarderCache& forwarder, AuthoritativeDns& auth,
                                const Topology& topo, NodeId terminal, SimTime now);

}  // namespace satsplit
