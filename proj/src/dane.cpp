#include "satsplit/dane.hpp"

#include <algorithm>
#include <cctype>

#include "satsplit/error.hpp"

namespace satsplit {
namespace {

constexpr std::size_t kQueryBytes = 100;
constexpr std::size_t kAnswerBytes = 600;

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

DelegatedCert DelegatedCert::issue(NodeId subject, const std::string& domain, std::uint64_t serial,
                                   SimTime not_after) {
  const auto body = "subject=" + to_string(subject) + ";san=" + lowercase(domain) +
                    ";serial=" + std::to_string(serial);
  return {subject, crypto::sha256(as_bytes(body)), domain, not_after};
}

bool same_domain(std::string_view a, std::string_view b) { return lowercase(a) == lowercase(b); }

bool validate_pin(const DelegatedCert& cert, const TlsaRecord& rec, SimTime now) {
  return cert.digest == rec.cert_digest && same_domain(cert.issued_for, rec.domain) &&
         now <= cert.not_after;
}

TlsaRecord AuthoritativeDns::publish(const std::string& domain, const Digest& digest, SimTime ttl) {
  if (ttl.count() == 0) throw InvalidParameter("TLSA ttl must be > 0");
  auto& rec = zone_[lowercase(domain)];
  rec.domain = lowercase(domain);
  rec.cert_digest = digest;
  rec.ttl = ttl;
  rec.serial += 1;
  rec.signature_valid = true;
  return rec;
}

TlsaRecord AuthoritativeDns::rotate_record(const std::string& domain, const Digest& new_digest) {
  auto it = zone_.find(lowercase(domain));
  if (it == zone_.end()) throw NxDomain("no TLSA record for " + domain);
  it->second.cert_digest = new_digest;
  it->second.serial += 1;
  return it->second;
}

void AuthoritativeDns::set_signature_valid(const std::string& domain, bool valid) {
  auto it = zone_.find(lowercase(domain));
  if (it == zone_.end()) throw NxDomain("no TLSA record for " + domain);
  it->second.signature_valid = valid;
}

void AuthoritativeDns::set_ttl(const std::string& domain, SimTime ttl) {
  if (ttl.count() == 0) throw InvalidParameter("TLSA ttl must be > 0");
  auto it = zone_.find(lowercase(domain));
  if (it == zone_.end()) throw NxDomain("no TLSA record for " + domain);
  it->second.ttl = ttl;
}

TlsaRecord AuthoritativeDns::answer(const std::string& domain, SimTime now) {
  ++queries_;
  auto it = zone_.find(lowercase(domain));
  if (it == zone_.end()) throw NxDomain("no TLSA record for " + domain);
  auto rec = it->second;
  rec.signed_at = now;
  return rec;
}

std::optional<TlsaRecord> AuthoritativeDns::current(const std::string& domain) const {
  auto it = zone_.find(lowercase(domain));
  if (it == zone_.end()) return std::nullopt;
  return it->second;
}

std::string ForwarderCache::lower(std::string_view s) { return lowercase(s); }

std::optional<TlsaRecord> ForwarderCache::lookup(const std::string& domain, SimTime now) const {
  auto it = entries_.find(lower(domain));
  if (it == entries_.end()) return std::nullopt;
  const auto& e = it->second;
  if (!replay_ && now >= e.fetched_at + e.record.ttl) return std::nullopt;
  return e.record;
}

void ForwarderCache::store(const TlsaRecord& record, SimTime fetched_at) {
  const auto key = lower(record.domain);
  if (replay_ && entries_.contains(key)) return;
  entries_[key] = {record, fetched_at};
}

std::vector<std::string> ForwarderCache::due_for_refresh(SimTime now) const {
  std::vector<std::string> out;
  if (refresh_interval_.count() == 0) return out;
  for (const auto& [domain, e] : entries_) {
    if (now >= e.fetched_at + refresh_interval_) out.push_back(domain);
  }
  return out;
}

DnsService::DnsService(Simulator& sim, AuthoritativeDns& auth,
                       std::map<NodeId, ForwarderCache*> forwarders)
    : sim_(sim), auth_(auth), forwarders_(std::move(forwarders)) {
  const auto& topo = sim_.topology();
  for (auto& [terminal, cache] : forwarders_) {
    if (terminal.role != Role::Terminal || !cache) {
      throw InvalidParameter("forwarders must be hosted at terminals");
    }
    sim_.on(terminal, Service::Dns, [this, t = terminal](const Message& m) { on_forwarder(t, m); });
  }
  sim_.on(topo.auth_dns(), Service::Dns, [this](const Message& m) { on_auth(m); });
  for (auto client : topo.with_role(Role::Client)) {
    sim_.on(client, Service::Dns, [this](const Message& m) { on_client(m); });
  }
}

ForwarderCache& DnsService::forwarder(NodeId terminal) {
  auto it = forwarders_.find(terminal);
  if (it == forwarders_.end()) throw InvalidParameter(to_string(terminal) + " has no forwarder");
  return *it->second;
}

void DnsService::query(NodeId client, const std::string& domain, std::uint64_t flow, Done done) {
  const auto terminal = sim_.topology().terminal_of(client);
  forwarder(terminal);  // validates
  const auto id = next_id_++;
  pending_client_[id] = std::move(done);
  Message m;
  m.service = Service::Dns;
  m.flow = flow;
  m.label = "TLSA? " + domain;
  m.bytes = kQueryBytes;
  m.body = QueryBody{id, domain, false};
  sim_.send(client, terminal, std::move(m));
}

void DnsService::fetch_upstream(NodeId terminal, const std::string& domain, std::uint64_t flow,
                                bool background) {
  ++upstream_queries_;
  Message m;
  m.service = Service::Dns;
  m.flow = flow;
  m.label = "TLSA? " + domain;
  m.bytes = kQueryBytes;
  m.body = QueryBody{0, domain, background};
  sim_.send(terminal, sim_.topology().auth_dns(), std::move(m));
}

void DnsService::on_forwarder(NodeId terminal, const Message& m) {
  auto& cache = *forwarders_.at(terminal);
  if (const auto* q = std::any_cast<QueryBody>(&m.body)) {
    // client query
    if (auto rec = cache.lookup(q->domain, sim_.now())) {
      Message reply;
      reply.service = Service::Dns;
      reply.flow = m.flow;
      reply.label = "TLSA " + q->domain;
      reply.bytes = kAnswerBytes;
      reply.body = AnswerBody{q->id, {q->domain, DnsStatus::Ok, *rec, true}};
      sim_.send(terminal, m.from, std::move(reply));
      return;
    }
    auto key = std::make_pair(terminal, lowercase(q->domain));
    auto& waiters = inflight_[key];
    const bool first = waiters.empty();
    waiters.push_back({m.from, q->id, m.flow});
    if (first) fetch_upstream(terminal, q->domain, m.flow, false);
    return;
  }

  // upstream answer
  const auto& a = std::any_cast<const AnswerBody&>(m.body);
  auto answer = a.answer;
  if (answer.status == DnsStatus::Ok && answer.record) {
    if (!answer.record->signature_valid) {
      answer.status = DnsStatus::Bogus;
      answer.record.reset();
    } else {
      cache.store(*answer.record, answer.record->signed_at);
      // A replaying forwarder hands out what it holds, not what it fetched.
      if (auto held = cache.lookup(answer.domain, sim_.now())) answer.record = held;
    }
  }
  auto it = inflight_.find({terminal, lowercase(answer.domain)});
  if (it == inflight_.end()) return;  // background refresh
  auto waiters = std::move(it->second);
  inflight_.erase(it);
  for (const auto& w : waiters) {
    Message reply;
    reply.service = Service::Dns;
    reply.flow = w.flow;
    reply.label = "TLSA " + answer.domain;
    reply.bytes = kAnswerBytes;
    auto copy = answer;
    copy.from_cache = false;
    reply.body = AnswerBody{w.id, std::move(copy)};
    sim_.send(terminal, w.client, std::move(reply));
  }
}

void DnsService::on_auth(const Message& m) {
  const auto& q = std::any_cast<const QueryBody&>(m.body);
  DnsAnswer answer{q.domain, DnsStatus::Ok, std::nullopt, false};
  try {
    answer.record = auth_.answer(q.domain, sim_.now());
  } catch (const NxDomain&) {
    answer.status = DnsStatus::NxDomain;
  }
  Message reply;
  reply.service = Service::Dns;
  reply.flow = m.flow;
  reply.label = "TLSA " + q.domain;
  reply.bytes = kAnswerBytes;
  reply.body = AnswerBody{0, std::move(answer)};
  sim_.send(m.to, m.from, std::move(reply));
}

void DnsService::on_client(const Message& m) {
  const auto& a = std::any_cast<const AnswerBody&>(m.body);
  auto it = pending_client_.find(a.id);
  if (it == pending_client_.end()) return;
  auto done = std::move(it->second);
  pending_client_.erase(it);
  done(a.answer);
}

RefreshReport DnsService::refresh(NodeId terminal) {
  RefreshReport report;
  auto& cache = forwarder(terminal);
  for (const auto& domain : cache.due_for_refresh(sim_.now())) {
    if (inflight_.contains({terminal, domain})) continue;
    fetch_upstream(terminal, domain, 0, true);
    report.refreshed.push_back(domain);
    ++report.satellite_round_trips;
  }
  return report;
}

void DnsService::schedule_refresh(NodeId terminal, SimTime until) {
  const auto interval = forwarder(terminal).refresh_interval();
  if (interval.count() == 0) return;
  // Poll at a fraction of the interval so an entry is re-fetched soon after it
  // becomes due.
  const auto tick = std::max(SimTime{1}, interval / 8);
  for (auto t = sim_.now() + tick; t <= until; t += tick) {
    sim_.at(t, terminal, [this, terminal] { refresh(terminal); });
  }
}

void DnsService::prefetch(NodeId terminal, const std::string& domain) {
  forwarder(terminal);
  fetch_upstream(terminal, domain, 0, true);
}

TlsaResolution resolve_tlsa(const std::string& domain, ForwarderCache& forwarder,
                            AuthoritativeDns& auth, const Topology& topo, NodeId client,
                            SimTime now) {
  Simulator sim(topo);
  sim.advance_to(now);
  DnsService dns(sim, auth, {{topo.terminal_of(client), &forwarder}});
  std::optional<DnsAnswer> result;
  SimTime answered{0};
  dns.query(client, domain, 0, [&](const DnsAnswer& a) {
    result = a;
    answered = sim.now();
  });
  sim.run();
  if (!result) throw InvariantViolation("TLSA query never answered");
  if (result->status == DnsStatus::NxDomain) throw NxDomain("no TLSA record for " + domain);
  if (result->status == DnsStatus::Bogus) throw Bogus("DNSSEC validation failed for " + domain);
  return {*result->record, answered - now, result->from_cache};
}

RefreshReport proactive_refresh(ForwarderCache& forwarder, AuthoritativeDns& auth,
                                const Topology& topo, NodeId terminal, SimTime now) {
  Simulator sim(topo);
  sim.advance_to(now);
  DnsService dns(sim, auth, {{terminal, &forwarder}});
  auto report = dns.refresh(terminal);
  sim.run();
  return report;
}

}  // namespace satsplit
