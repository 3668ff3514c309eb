#include "satsplit/deployment.hpp"

#include "satsplit/error.hpp"

namespace satsplit {
namespace {

Bytes seeded(std::string_view label, std::uint64_t seed) {
  const auto d = crypto::sha256(concat({as_bytes(label), as_bytes(std::to_string(seed))}));
  return {d.begin(), d.end()};
}

}  // namespace

Deployment::Deployment(DeploymentConfig config) : config_(std::move(config)) {
  if (config_.domain.empty()) throw InvalidParameter("empty domain");
  topo_ = std::make_unique<Topology>(make_topology(config_.topology));
  sim_ = std::make_unique<Simulator>(*topo_);
  if (config_.processing_delay.count()) {
    for (auto n : topo_->nodes()) {
      if (n.role != Role::Client) sim_->set_processing_delay(n, config_.processing_delay);
    }
  }

  const auto terminals = topo_->with_role(Role::Terminal);
  cert_ = DelegatedCert::issue(terminals.front(), config_.domain, 1);
  auth_.publish(config_.domain, cert_.digest, config_.tlsa_ttl);
  auth_.set_signature_valid(config_.domain, config_.dnssec_valid);

  std::map<NodeId, ForwarderCache*> fwd;
  for (auto t : terminals) {
    auto cache = std::make_unique<ForwarderCache>(config_.refresh_interval);
    cache->set_replay(config_.replay_attack);
    fwd[t] = cache.get();
    forwarders_[t] = std::move(cache);
  }
  dns_ = std::make_unique<DnsService>(*sim_, auth_, std::move(fwd));

  for (const auto& r : config_.resources) origin_.add(r);
  content_ = std::make_unique<ContentService>(
      *sim_, origin_,
      ContentService::Options{seeded("content master", config_.seed), config_.epoch_length,
                              config_.record_size, config_.cache_capacity, config_.seed});

  keyless_server_ = std::make_unique<KeylessServer>(topo_->server(),
                                                    ServerPrivateKey(seeded("origin key", config_.seed)));
  keyless_server_->set_push(config_.keyless_push, config_.pushlist,
                            [this](const std::string& domain, const std::string& path) {
                              return content_->origin_body({domain, path});
                            });
  keyless_ = std::make_unique<KeylessService>(*sim_, *keyless_server_, registry_);

  engine_ = std::make_unique<HandshakeEngine>(*sim_, keyless_server_->private_key(), keyless_.get(),
                                              dns_.get());
  engine_->set_push_sink([this](NodeId terminal, const std::vector<PushedResource>& pushed) {
    content_->store_pushed(terminal, pushed);
  });

  for (auto t : terminals) {
    keyless_server_->provision(t);
    content_->authorize(t);
    engine_->configure_terminal(t, {{config_.domain}, cert_});
  }
}

SimTime Deployment::establish_channels() {
  SimTime slowest{0};
  std::string failure;
  for (auto t : topo_->with_role(Role::Terminal)) {
    keyless_->establish(
        t, [&](std::shared_ptr<KeylessChannel>, SimTime setup) { slowest = std::max(slowest, setup); },
        [&](const std::string& why) { failure = why; });
  }
  sim_->run();
  if (!failure.empty()) throw Unauthorized("keyless channel setup failed: " + failure);
  return slowest;
}

void Deployment::prefetch_tlsa() {
  for (auto t : topo_->with_role(Role::Terminal)) dns_->prefetch(t, config_.domain);
  sim_->run();
}

void Deployment::warm_caches() {
  for (const auto& [rid, r] : origin_.resources()) {
    if (r.cacheable) content_->warm(rid);
  }
  sim_->run();
}

HandshakeParams Deployment::params_for(NodeId client) const {
  HandshakeParams p;
  p.handshake_rtts = config_.handshake_rtts;
  p.tcp_connect = config_.tcp_connect;
  p.sni = config_.domain;
  p.session_ttl = config_.session_ttl;
  p.seed = config_.seed * 1000003 + handshakes_started_;
  p.client = client;
  return p;
}

std::uint64_t Deployment::handshake(NodeId client, const HandshakeVariant& variant,
                                    HandshakeEngine::Done done) {
  if (auto* d = std::get_if<DaneTls>(&variant); d && !d->dns_cached) {
    forwarders_.at(topo_->terminal_of(client))->evict(config_.domain);
  }
  const auto params = params_for(client);
  ++handshakes_started_;
  return engine_->start(params, variant, [this, done = std::move(done)](const HandshakeTrace& t) {
    if (t.outcome == Outcome::Completed) {
      if (auto keys = engine_->session_at(t.peer, t.flow)) content_->register_session(t.peer, *keys);
    }
    if (done) done(t);
  });
}

HandshakeTrace Deployment::run_handshake(NodeId client, const HandshakeVariant& variant) {
  if (auto* d = std::get_if<DaneTls>(&variant); d && d->dns_cached) {
    const auto terminal = topo_->terminal_of(client);
    if (!forwarders_.at(terminal)->lookup(config_.domain, sim_->now())) {
      dns_->prefetch(terminal, config_.domain);
      sim_->run();
    }
  }
  if (std::holds_alternative<KeylessTls>(variant)) {
    const auto terminal = topo_->terminal_of(client);
    if (!keyless_->channel(terminal)) {
      keyless_->establish(terminal, {}, {});
      sim_->run();
    }
  }
  std::optional<HandshakeTrace> out;
  handshake(client, variant, [&](const HandshakeTrace& t) { out = t; });
  sim_->run();
  if (!out) throw InvariantViolation("handshake did not terminate");
  return *out;
}

PageLoad page_load(const HandshakeVariant& variant, bool use_ece_cache, const DeploymentConfig& config) {
  Deployment d(config);
  const bool split = !std::holds_alternative<VanillaTls>(variant);
  if (std::holds_alternative<KeylessTls>(variant)) d.establish_channels();
  if (use_ece_cache && split) d.warm_caches();

  const NodeId client{Role::Client, 0};
  PageLoad out;
  // Anything the setup left in the log (channels, warm-up) precedes this mark.
  const auto mark = d.sim().transmissions().size();
  out.handshake = d.run_handshake(client, variant);
  if (out.handshake.outcome != Outcome::Completed) {
    throw InvariantViolation("page-load handshake did not complete: " + out.handshake.detail);
  }

  const auto mode = !split ? FetchMode::EndToEnd : use_ece_cache ? FetchMode::EceCache : FetchMode::Direct;
  const auto rid = config.resources.at(0).rid;
  std::optional<ContentResult> got;
  d.content().request(client, rid, *out.handshake.session, mode, out.handshake.flow,
                      [&](const ContentResult& r) { got = r; });
  d.sim().run();
  if (!got || got->refused) throw InvariantViolation("page request was not served");
  out.content = *got;
  out.total = out.handshake.duration() + out.content.latency();

  const auto& log = d.sim().transmissions();
  for (std::size_t i = mark; i < log.size(); ++i) {
    if (log[i].flow == out.handshake.flow && log[i].satellite) out.satellite_bytes += log[i].bytes;
  }
  return out;
}

}  // namespace satsplit
