#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <list>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "satsplit/crypto.hpp"
#include "satsplit/ece.hpp"
#include "satsplit/keyless.hpp"
#include "satsplit/sim.hpp"
#include "satsplit/tls.hpp"
#include "satsplit/topology.hpp"

namespace satsplit {

struct ResourceId {
  std::string domain;
  std::string path;

  friend auto operator<=>(const ResourceId&, const ResourceId&) = default;
};

std::string to_string(const ResourceId& rid);
/// "domain/path" -> ResourceId.  Throws ConfigError when either part is empty.
ResourceId parse_resource_id(std::string_view text);

struct CacheEntry {
  ResourceId rid;
  EceBody body;
  std::uint64_t epoch = 0;
  SimTime stored_at{0};
  std::size_t size = 0;
};

/// ECE bodies received over broadcast (or push), LRU-evicted by byte size.
class TerminalCache {
 public:
  /// capacity_bytes == 0 means unbounded.
  explicit TerminalCache(std::size_t capacity_bytes = 0) : capacity_(capacity_bytes) {}

  /// Stores or replaces an entry.  Entries larger than the whole capacity are
  /// dropped.  Returns the number of entries evicted to make room.
  std::size_t put(CacheEntry entry);
  /// Marks the entry most recently used.
  const CacheEntry* get(const ResourceId& rid);
  bool contains(const ResourceId& rid) const { return index_.contains(rid); }
  void evict(const ResourceId& rid);

  std::size_t size() const { return index_.size(); }
  std::size_t bytes() const { return bytes_; }
  std::size_t capacity() const { return capacity_; }

  /// Decrypts `entry` with the key of its epoch.  Throws KeyEpochMismatch when
  /// that key is unknown or no longer valid at `now`.
  static Bytes open(const CacheEntry& entry, const KeyRing& keys, SimTime now);

 private:
  std::size_t capacity_;
  std::size_t bytes_ = 0;
  std::list<CacheEntry> lru_;
  std::map<ResourceId, std::list<CacheEntry>::iterator> index_;
};

enum class AggregateResult : std::uint8_t { Enqueued, TriggeredFetch };

struct PendingWaiter {
  NodeId client;
  std::uint64_t request = 0;
};

/// Requests waiting on an upstream fetch, at most one fetch per resource.
class PendingRequests {
 public:
  AggregateResult aggregate(const ResourceId& rid, PendingWaiter waiter);
  /// Removes and returns everyone waiting on `rid`.
  std::vector<PendingWaiter> complete(const ResourceId& rid);
  bool in_flight(const ResourceId& rid) const { return waiting_.contains(rid); }
  std::uint64_t fetches() const { return fetches_; }

 private:
  std::map<ResourceId, std::vector<PendingWaiter>> waiting_;
  std::uint64_t fetches_ = 0;
};

AggregateResult aggregate(PendingRequests& pending, const ResourceId& rid, PendingWaiter requester);

struct Resource {
  ResourceId rid;
  std::size_t size = 10 * 1024;
  bool cacheable = true;
};

/// Origin content store.  Resource bytes are generated deterministically from
/// the resource id so every run serves identical content.
class OriginServer {
 public:
  void add(const Resource& r);
  const Resource* find(const ResourceId& rid) const;
  const Bytes& content(const ResourceId& rid) const;
  const std::map<ResourceId, Resource>& resources() const { return resources_; }

 private:
  std::map<ResourceId, Resource> resources_;
  std::map<ResourceId, Bytes> content_;
};

/// How a client's request is satisfied.
enum class FetchMode : std::uint8_t {
  /// Split session: the terminal answers from (or fills) its broadcast cache.
  EceCache,
  /// Split session: the terminal fetches the object from the origin per request.
  Direct,
  /// Unsplit session: the client talks to the origin end to end.
  EndToEnd,
};

std::string to_string(FetchMode mode);

struct ContentResult {
  ResourceId rid;
  Bytes plaintext;
  SimTime requested_at{0};
  SimTime delivered_at{0};
  bool hit = false;
  bool refused = false;
  std::string error;

  SimTime latency() const { return delivered_at - requested_at; }
};

struct ContentStats {
  /// Satellite transmissions carrying the resource's data (broadcast, unicast
  /// responses and pushes).
  std::map<ResourceId, std::uint32_t> satellite_transmissions;
  std::uint64_t satellite_bytes = 0;
  std::uint64_t requests = 0;
  std::uint64_t hits = 0;
  std::uint64_t upstream_fetches = 0;
};

/// HTTP object delivery: terminal caches fed by gateway broadcast, request
/// aggregation at terminals and gateway, and re-encryption of cached ECE
/// bodies under each client's session keys.
class ContentService {
 public:
  using Done = std::function<void(const ContentResult&)>;

  struct Options {
    Bytes master;
    SimTime epoch_length = kDefaultEpochLength;
    std::uint32_t record_size = kDefaultRecordSize;
    std::size_t cache_capacity = 0;
    std::uint64_t seed = 1;
  };

  ContentService(Simulator& sim, OriginServer& origin, Options options);

  ContentService(const ContentService&) = delete;
  ContentService& operator=(const ContentService&) = delete;

  /// Hands the content master secret to `terminal`.  Only authorized
  /// terminals keep broadcast bodies.
  void authorize(NodeId terminal);
  bool authorized(NodeId terminal) const { return keyrings_.contains(terminal); }

  /// Session keys held by the server side of a session (terminal or origin).
  void register_session(NodeId holder, const SessionKeys& keys);

  void request(NodeId client, const ResourceId& rid, const SessionKeys& session, FetchMode mode,
               std::uint64_t flow, Done done);

  /// Origin-to-gateway fetch followed by a broadcast, as if a terminal had
  /// missed; completes when the simulator runs.
  void warm(const ResourceId& rid);

  /// Caches bodies pushed over a keyless channel.
  void store_pushed(NodeId terminal, const std::vector<PushedResource>& pushed);
  /// Origin-side ECE encoding under the current epoch's key.
  std::optional<EceBody> origin_body(const ResourceId& rid);

  TerminalCache& cache(NodeId terminal);
  const KeyRing& keyring(NodeId terminal);
  const ContentStats& stats() const { return stats_; }

 private:
  struct HttpBody;
  struct Request {
    NodeId client;
    ResourceId rid;
    SessionKeys keys;
    FetchMode mode = FetchMode::EceCache;
    std::uint64_t flow = 0;
    SimTime requested_at{0};
    Done done;
  };

  void on_client(const Message& m);
  void on_terminal(NodeId terminal, const Message& m);
  void on_gateway(const Message& m);
  void on_server(const Message& m);
  void on_broadcast(NodeId terminal, const Message& m);

  bool try_cache(NodeId terminal, std::uint64_t id, bool hit);
  void fetch_via_gateway(NodeId terminal, const ResourceId& rid, std::uint64_t flow);
  void gateway_fetch(const ResourceId& rid, std::uint64_t flow);
  void direct_fetch(NodeId terminal, std::uint64_t id);
  void respond(NodeId from, std::uint64_t id, const Bytes& plaintext, bool hit);
  void refuse(NodeId from, std::uint64_t id, const std::string& why);
  const SessionKeys* held_session(NodeId holder, std::uint64_t id, std::string& why) const;
  void count_satellite(const ResourceId& rid, std::size_t bytes);
  ContentKey content_key(SimTime now);
  void refresh_keys(NodeId terminal);

  Simulator& sim_;
  OriginServer& origin_;
  Options options_;
  Rng rng_;
  std::map<NodeId, TerminalCache> caches_;
  std::map<NodeId, KeyRing> keyrings_;
  std::map<NodeId, PendingRequests> terminal_pending_;
  PendingRequests gateway_pending_;
  std::map<std::pair<ResourceId, std::uint64_t>, SimTime> broadcast_log_;
  std::map<std::pair<NodeId, Bytes>, SessionKeys> sessions_;
  std::map<Bytes, std::uint64_t> send_seq_;
  std::map<std::uint64_t, Request> requests_;
  std::uint64_t next_id_ = 1;
  ContentStats stats_;
};

}  // namespace satsplit
