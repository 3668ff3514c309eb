#include "satsplit/cachecast.hpp"

#include "satsplit/config.hpp"
#include "satsplit/error.hpp"

namespace satsplit {
namespace {

constexpr std::size_t kGetBytes = 300;
constexpr std::size_t kResponseHeaderBytes = 200;

std::uint64_t epoch_of(const EceBody& body) {
  const std::string id(body.header.keyid.begin(), body.header.keyid.end());
  constexpr std::string_view prefix = "epoch-";
  if (!id.starts_with(prefix)) throw UnknownKeyId("keyid '" + id + "' names no epoch");
  return parse_u64(std::string_view(id).substr(prefix.size()), "keyid");
}

}  // namespace

std::string to_string(const ResourceId& rid) { return rid.domain + "/" + rid.path; }

ResourceId parse_resource_id(std::string_view text) {
  const auto slash = text.find('/');
  if (slash == std::string_view::npos || slash == 0 || slash + 1 == text.size()) {
    throw ConfigError("resource id must look like domain/path, got '" + std::string(text) + "'");
  }
  return {std::string(text.substr(0, slash)), std::string(text.substr(slash + 1))};
}

std::string to_string(FetchMode mode) {
  switch (mode) {
    case FetchMode::EceCache: return "ece-cache";
    case FetchMode::Direct: return "direct";
    case FetchMode::EndToEnd: return "end-to-end";
  }
  return "unknown";
}

// --- TerminalCache ------------------------------------------------------------

std::size_t TerminalCache::put(CacheEntry entry) {
  evict(entry.rid);
  if (capacity_ && entry.size > capacity_) return 0;
  std::size_t evicted = 0;
  while (capacity_ && bytes_ + entry.size > capacity_) {
    auto& victim = lru_.back();
    bytes_ -= victim.size;
    index_.erase(victim.rid);
    lru_.pop_back();
    ++evicted;
  }
  bytes_ += entry.size;
  lru_.push_front(std::move(entry));
  index_[lru_.front().rid] = lru_.begin();
  return evicted;
}

const CacheEntry* TerminalCache::get(const ResourceId& rid) {
  auto it = index_.find(rid);
  if (it == index_.end()) return nullptr;
  lru_.splice(lru_.begin(), lru_, it->second);
  return &*it->second;
}

void TerminalCache::evict(const ResourceId& rid) {
  auto it = index_.find(rid);
  if (it == index_.end()) return;
  bytes_ -= it->second->size;
  lru_.erase(it->second);
  index_.erase(it);
}

Bytes TerminalCache::open(const CacheEntry& entry, const KeyRing& keys, SimTime now) {
  const auto key = keys.find(entry.body.header.keyid);
  if (!key || key->epoch != entry.epoch || !key->valid_at(now)) {
    throw KeyEpochMismatch("no valid content key for epoch " + std::to_string(entry.epoch) +
                           " of " + to_string(entry.rid));
  }
  return ece_decrypt(entry.body, keys.lookup());
}

// --- PendingRequests ------------------------------------------------------------

AggregateResult PendingRequests::aggregate(const ResourceId& rid, PendingWaiter waiter) {
  auto [it, fresh] = waiting_.try_emplace(rid);
  it->second.push_back(waiter);
  if (!fresh) return AggregateResult::Enqueued;
  ++fetches_;
  return AggregateResult::TriggeredFetch;
}

std::vector<PendingWaiter> PendingRequests::complete(const ResourceId& rid) {
  auto it = waiting_.find(rid);
  if (it == waiting_.end()) return {};
  auto out = std::move(it->second);
  waiting_.erase(it);
  return out;
}

AggregateResult aggregate(PendingRequests& pending, const ResourceId& rid, PendingWaiter requester) {
  return pending.aggregate(rid, requester);
}

// --- OriginServer ------------------------------------------------------------

void OriginServer::add(const Resource& r) {
  if (r.rid.domain.empty() || r.rid.path.empty()) throw InvalidParameter("empty resource id");
  resources_[r.rid] = r;
  // Counter-mode expansion of the resource name.
  Bytes body;
  body.reserve(r.size);
  const auto name = to_string(r.rid);
  for (std::uint64_t block = 0; body.size() < r.size; ++block) {
    auto d = crypto::sha256(concat({as_bytes(name), as_bytes(std::to_string(block))}));
    const auto take = std::min<std::size_t>(d.size(), r.size - body.size());
    body.insert(body.end(), d.begin(), d.begin() + static_cast<std::ptrdiff_t>(take));
  }
  content_[r.rid] = std::move(body);
}

const Resource* OriginServer::find(const ResourceId& rid) const {
  auto it = resources_.find(rid);
  return it == resources_.end() ? nullptr : &it->second;
}

const Bytes& OriginServer::content(const ResourceId& rid) const {
  auto it = content_.find(rid);
  if (it == content_.end()) throw InvalidParameter("unknown resource " + to_string(rid));
  return it->second;
}

// --- ContentService ------------------------------------------------------------

struct ContentService::HttpBody {
  enum class Kind {
    Get,             // client -> terminal or origin
    UpstreamGet,     // terminal -> gateway
    EceGet,          // gateway -> origin
    EceResponse,     // origin -> gateway
    DirectGet,       // terminal -> origin
    DirectResponse,  // origin -> terminal
    Response,        // terminal or origin -> client
    Refused,
  };

  Kind kind = Kind::Get;
  std::uint64_t id = 0;
  ResourceId rid;
  SimTime sent_at{0};
  EceBody ece;
  std::uint64_t epoch = 0;
  Bytes payload;
  std::uint64_t seq = 0;
  bool hit = false;
  std::string error;
};

ContentService::ContentService(Simulator& sim, OriginServer& origin, Options options)
    : sim_(sim), origin_(origin), options_(std::move(options)), rng_(options_.seed) {
  if (options_.record_size < kMinRecordSize) {
    throw InvalidRecordSize("record size " + std::to_string(options_.record_size) + " < 18");
  }
  const auto& topo = sim_.topology();
  for (auto c : topo.with_role(Role::Client)) {
    sim_.on(c, Service::Http, [this](const Message& m) { on_client(m); });
  }
  for (auto t : topo.with_role(Role::Terminal)) {
    caches_.emplace(t, TerminalCache(options_.cache_capacity));
    sim_.on(t, Service::Http, [this, t](const Message& m) { on_terminal(t, m); });
    sim_.on(t, Service::Broadcast, [this, t](const Message& m) { on_broadcast(t, m); });
  }
  sim_.on(topo.gateway(), Service::Http, [this](const Message& m) { on_gateway(m); });
  sim_.on(topo.server(), Service::Http, [this](const Message& m) { on_server(m); });
}

void ContentService::authorize(NodeId terminal) {
  if (!caches_.contains(terminal)) throw InvalidParameter(to_string(terminal) + " is not a terminal");
  keyrings_[terminal];
  refresh_keys(terminal);
}

void ContentService::register_session(NodeId holder, const SessionKeys& keys) {
  sessions_[{holder, keys.session_id}] = keys;
}

TerminalCache& ContentService::cache(NodeId terminal) {
  auto it = caches_.find(terminal);
  if (it == caches_.end()) throw InvalidParameter(to_string(terminal) + " is not a terminal");
  return it->second;
}

const KeyRing& ContentService::keyring(NodeId terminal) {
  auto it = keyrings_.find(terminal);
  if (it == keyrings_.end()) throw Unauthorized(to_string(terminal) + " holds no content keys");
  refresh_keys(terminal);
  return it->second;
}

ContentKey ContentService::content_key(SimTime now) {
  return rotate_content_key(options_.master, epoch_at(now, options_.epoch_length),
                            options_.epoch_length);
}

void ContentService::refresh_keys(NodeId terminal) {
  auto it = keyrings_.find(terminal);
  if (it == keyrings_.end()) return;
  it->second.drop_expired(sim_.now());
  const auto key = content_key(sim_.now());
  if (!it->second.find(key.keyid)) it->second.add(key);
}

std::optional<EceBody> ContentService::origin_body(const ResourceId& rid) {
  const auto* r = origin_.find(rid);
  if (!r) return std::nullopt;
  Salt salt{};
  rng_.fill(salt);
  return ece_encrypt(origin_.content(rid), content_key(sim_.now()), options_.record_size, salt);
}

void ContentService::count_satellite(const ResourceId& rid, std::size_t bytes) {
  ++stats_.satellite_transmissions[rid];
  stats_.satellite_bytes += bytes;
}

void ContentService::request(NodeId client, const ResourceId& rid, const SessionKeys& session,
                             FetchMode mode, std::uint64_t flow, Done done) {
  const auto& topo = sim_.topology();
  if (client.role != Role::Client || !topo.contains(client)) {
    throw InvalidParameter(to_string(client) + " is not a client");
  }
  const auto id = next_id_++;
  requests_[id] = Request{client, rid, session, mode, flow, sim_.now(), std::move(done)};
  ++stats_.requests;

  HttpBody get;
  get.kind = HttpBody::Kind::Get;
  get.id = id;
  get.rid = rid;
  get.sent_at = sim_.now();
  Message m;
  m.service = Service::Http;
  m.flow = flow;
  m.label = "GET " + to_string(rid);
  m.bytes = kGetBytes;
  m.body = std::move(get);
  const auto to = mode == FetchMode::EndToEnd ? topo.server() : topo.terminal_of(client);
  sim_.send(client, to, std::move(m));
}

void ContentService::warm(const ResourceId& rid) {
  if (!origin_.find(rid)) throw InvalidParameter("unknown resource " + to_string(rid));
  if (gateway_pending_.aggregate(rid, {sim_.topology().gateway(), 0}) ==
      AggregateResult::TriggeredFetch) {
    gateway_fetch(rid, 0);
  }
}

void ContentService::store_pushed(NodeId terminal, const std::vector<PushedResource>& pushed) {
  for (const auto& p : pushed) {
    const ResourceId rid{p.domain, p.path};
    count_satellite(rid, p.body.size());
    if (!keyrings_.contains(terminal)) continue;
    cache(terminal).put({rid, p.body, epoch_of(p.body), sim_.now(), p.body.size()});
  }
}

const SessionKeys* ContentService::held_session(NodeId holder, std::uint64_t id,
                                                std::string& why) const {
  const auto& req = requests_.at(id);
  auto it = sessions_.find({holder, req.keys.session_id});
  if (it == sessions_.end()) {
    why = "unknown session";
    return nullptr;
  }
  if (!it->second.usable_at(sim_.now())) {
    why = "session expired";
    return nullptr;
  }
  return &it->second;
}

void ContentService::respond(NodeId from, std::uint64_t id, const Bytes& plaintext, bool hit) {
  std::string why;
  const auto* keys = held_session(from, id, why);
  if (!keys) {
    refuse(from, id, why);
    return;
  }
  const auto& req = requests_.at(id);
  HttpBody resp;
  resp.kind = HttpBody::Kind::Response;
  resp.id = id;
  resp.rid = req.rid;
  resp.seq = send_seq_[keys->session_id]++;
  resp.payload = seal_record(*keys, resp.seq, plaintext);
  resp.hit = hit;

  Message m;
  m.service = Service::Http;
  m.flow = req.flow;
  m.label = std::string(hit ? "200 (cached) " : "200 ") + to_string(req.rid);
  m.bytes = resp.payload.size() + kResponseHeaderBytes;
  if (sim_.topology().crosses_satellite(from, req.client)) count_satellite(req.rid, m.bytes);
  m.body = std::move(resp);
  sim_.send(from, req.client, std::move(m));
}

void ContentService::refuse(NodeId from, std::uint64_t id, const std::string& why) {
  const auto& req = requests_.at(id);
  HttpBody resp;
  resp.kind = HttpBody::Kind::Refused;
  resp.id = id;
  resp.rid = req.rid;
  resp.error = why;
  Message m;
  m.service = Service::Http;
  m.flow = req.flow;
  m.label = "403 " + why;
  m.bytes = kResponseHeaderBytes;
  m.body = std::move(resp);
  sim_.send(from, req.client, std::move(m));
}

void ContentService::on_client(const Message& m) {
  const auto& body = std::any_cast<const HttpBody&>(m.body);
  auto it = requests_.find(body.id);
  if (it == requests_.end()) return;
  auto req = std::move(it->second);
  requests_.erase(it);

  ContentResult out;
  out.rid = req.rid;
  out.requested_at = req.requested_at;
  out.delivered_at = sim_.now();
  if (body.kind == HttpBody::Kind::Refused) {
    out.refused = true;
    out.error = body.error;
  } else {
    out.plaintext = open_record(req.keys, body.seq, body.payload);
    out.hit = body.hit;
    if (out.hit) ++stats_.hits;
  }
  if (req.done) req.done(out);
}

bool ContentService::try_cache(NodeId terminal, std::uint64_t id, bool hit) {
  const auto& req = requests_.at(id);
  auto& c = cache(terminal);
  const auto* entry = c.get(req.rid);
  if (!entry) return false;
  refresh_keys(terminal);
  Bytes plaintext;
  try {
    plaintext = TerminalCache::open(*entry, keyrings_.at(terminal), sim_.now());
  } catch (const KeyEpochMismatch&) {
    c.evict(req.rid);
    return false;
  }
  respond(terminal, id, plaintext, hit);
  return true;
}

void ContentService::on_terminal(NodeId terminal, const Message& m) {
  const auto& body = std::any_cast<const HttpBody&>(m.body);

  if (body.kind == HttpBody::Kind::DirectResponse) {
    if (!requests_.contains(body.id)) return;
    respond(terminal, body.id, body.payload, false);
    return;
  }
  if (body.kind != HttpBody::Kind::Get) {
    throw ProtocolError("unexpected HTTP message at terminal: " + m.label);
  }
  if (!requests_.contains(body.id)) return;

  std::string why;
  if (!held_session(terminal, body.id, why)) {
    refuse(terminal, body.id, why);
    return;
  }
  const auto& req = requests_.at(body.id);
  const auto* resource = origin_.find(req.rid);
  if (!resource) {
    refuse(terminal, body.id, "not found");
    return;
  }
  const bool cacheable = resource->cacheable && keyrings_.contains(terminal);
  if (req.mode != FetchMode::EceCache || !cacheable) {
    direct_fetch(terminal, body.id);
    return;
  }
  if (try_cache(terminal, body.id, true)) return;
  if (terminal_pending_[terminal].aggregate(req.rid, {req.client, body.id}) ==
      AggregateResult::TriggeredFetch) {
    fetch_via_gateway(terminal, req.rid, req.flow);
  }
}

void ContentService::direct_fetch(NodeId terminal, std::uint64_t id) {
  const auto& req = requests_.at(id);
  HttpBody get;
  get.kind = HttpBody::Kind::DirectGet;
  get.id = id;
  get.rid = req.rid;
  get.sent_at = sim_.now();
  Message m;
  m.service = Service::Http;
  m.flow = req.flow;
  m.label = "GET " + to_string(req.rid);
  m.bytes = kGetBytes;
  m.body = std::move(get);
  sim_.send(terminal, sim_.topology().server(), std::move(m));
}

void ContentService::fetch_via_gateway(NodeId terminal, const ResourceId& rid, std::uint64_t flow) {
  HttpBody get;
  get.kind = HttpBody::Kind::UpstreamGet;
  get.rid = rid;
  get.sent_at = sim_.now();
  Message m;
  m.service = Service::Http;
  m.flow = flow;
  m.label = "GET " + to_string(rid) + " (aes128gcm)";
  m.bytes = kGetBytes;
  m.body = std::move(get);
  sim_.send(terminal, sim_.topology().gateway(), std::move(m));
}

void ContentService::gateway_fetch(const ResourceId& rid, std::uint64_t flow) {
  ++stats_.upstream_fetches;
  HttpBody get;
  get.kind = HttpBody::Kind::EceGet;
  get.rid = rid;
  get.sent_at = sim_.now();
  Message m;
  m.service = Service::Http;
  m.flow = flow;
  m.label = "GET " + to_string(rid) + " (aes128gcm)";
  m.bytes = kGetBytes;
  m.body = std::move(get);
  sim_.send(sim_.topology().gateway(), sim_.topology().server(), std::move(m));
}

void ContentService::on_gateway(const Message& m) {
  const auto& body = std::any_cast<const HttpBody&>(m.body);
  if (body.kind == HttpBody::Kind::UpstreamGet) {
    // Already broadcast this epoch and the broadcast reached the terminal
    // after it asked: its pending requests are answered from that copy.
    const auto epoch = epoch_at(sim_.now(), options_.epoch_length);
    if (auto it = broadcast_log_.find({body.rid, epoch});
        it != broadcast_log_.end() && body.sent_at <= it->second) {
      return;
    }
    if (gateway_pending_.aggregate(body.rid, {m.from, 0}) == AggregateResult::TriggeredFetch) {
      gateway_fetch(body.rid, m.flow);
    }
    return;
  }
  if (body.kind != HttpBody::Kind::EceResponse) {
    throw ProtocolError("unexpected HTTP message at gateway: " + m.label);
  }

  gateway_pending_.complete(body.rid);
  HttpBody cast = body;
  Message b;
  b.service = Service::Broadcast;
  b.flow = m.flow;
  b.label = "aes128gcm " + to_string(body.rid);
  b.bytes = body.ece.size() + kResponseHeaderBytes;
  count_satellite(body.rid, b.bytes);
  b.body = std::move(cast);
  const auto beam = sim_.topology().beam_of(sim_.topology().footprint().front());
  sim_.broadcast(beam, std::move(b));
  broadcast_log_[{body.rid, body.epoch}] = sim_.transmissions().back().arrive_at;
}

void ContentService::on_broadcast(NodeId terminal, const Message& m) {
  const auto& body = std::any_cast<const HttpBody&>(m.body);
  auto& pending = terminal_pending_[terminal];
  if (!keyrings_.contains(terminal)) return;

  refresh_keys(terminal);
  CacheEntry entry{body.rid, body.ece, body.epoch, sim_.now(), body.ece.size()};
  try {
    TerminalCache::open(entry, keyrings_.at(terminal), sim_.now());
  } catch (const KeyEpochMismatch&) {
    // The epoch rolled over while the body was in flight.
    if (pending.in_flight(body.rid)) fetch_via_gateway(terminal, body.rid, m.flow);
    return;
  }
  cache(terminal).put(std::move(entry));
  for (const auto& w : pending.complete(body.rid)) {
    if (!requests_.contains(w.request)) continue;
    if (!try_cache(terminal, w.request, false)) direct_fetch(terminal, w.request);
  }
}

void ContentService::on_server(const Message& m) {
  const auto& body = std::any_cast<const HttpBody&>(m.body);
  const auto self = sim_.topology().server();

  switch (body.kind) {
    case HttpBody::Kind::EceGet: {
      auto ece = origin_body(body.rid);
      if (!ece) throw InvalidParameter("unknown resource " + to_string(body.rid));
      HttpBody resp;
      resp.kind = HttpBody::Kind::EceResponse;
      resp.rid = body.rid;
      resp.epoch = epoch_at(sim_.now(), options_.epoch_length);
      resp.ece = std::move(*ece);
      Message r;
      r.service = Service::Http;
      r.flow = m.flow;
      r.label = "200 aes128gcm " + to_string(body.rid);
      r.bytes = resp.ece.size() + kResponseHeaderBytes;
      r.body = std::move(resp);
      sim_.send(self, m.from, std::move(r));
      return;
    }
    case HttpBody::Kind::DirectGet: {
      if (!requests_.contains(body.id)) return;
      HttpBody resp;
      resp.kind = HttpBody::Kind::DirectResponse;
      resp.id = body.id;
      resp.rid = body.rid;
      resp.payload = origin_.content(body.rid);
      Message r;
      r.service = Service::Http;
      r.flow = m.flow;
      r.label = "200 " + to_string(body.rid);
      r.bytes = resp.payload.size() + kResponseHeaderBytes;
      count_satellite(body.rid, r.bytes);
      r.body = std::move(resp);
      sim_.send(self, m.from, std::move(r));
      return;
    }
    case HttpBody::Kind::Get: {
      if (!requests_.contains(body.id)) return;
      if (!origin_.find(body.rid)) {
        refuse(self, body.id, "not found");
        return;
      }
      respond(self, body.id, origin_.content(body.rid), false);
      return;
    }
    default:
      throw ProtocolError("unexpected HTTP message at origin: " + m.label);
  }
}

}  // namespace satsplit
