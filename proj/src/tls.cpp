#include "satsplit/tls.hpp"

#include <algorithm>
#include <cctype>

#include "satsplit/error.hpp"

namespace satsplit {
namespace {

constexpr std::size_t kSegmentBytes = 60;
constexpr std::size_t kClientHelloBytes = 512;
constexpr std::size_t kServerFlightBytes = 4096;
constexpr std::size_t kClientFinishBytes = 300;
constexpr std::size_t kServerFinishBytes = 100;
constexpr std::size_t kAlertBytes = 40;

Bytes random_bytes(Rng& rng, std::size_t n) {
  Bytes out(n);
  rng.fill(out);
  return out;
}

Bytes ecdhe_premaster(const Bytes& a, const Bytes& b) {
  // Symbolic key agreement: both sides hash the two public shares in a fixed
  // order.
  const auto& lo = std::min(a, b);
  const auto& hi = std::max(a, b);
  const auto d = crypto::sha256(concat({lo, hi}));
  return {d.begin(), d.end()};
}

Bytes signed_params(ByteView client_random, ByteView server_random, ByteView server_share) {
  return concat({client_random, server_random, server_share});
}

Bytes session_id_of(ByteView client_random, ByteView server_random) {
  const auto id = crypto::sha256(concat({as_bytes("session"), client_random, server_random}));
  return {id.begin(), id.begin() + 16};
}

}  // namespace

InterceptAction intercept_decision(const ClientHello& hello, const std::set<std::string>& authorized) {
  if (hello.sni.empty()) throw MalformedSni("ClientHello carries no server name");
  for (const auto& domain : authorized) {
    if (same_domain(domain, hello.sni)) return InterceptAction::Intercept;
  }
  return InterceptAction::Forward;
}

std::string variant_name(const HandshakeVariant& v) {
  if (std::holds_alternative<VanillaTls>(v)) return "vanilla";
  if (std::holds_alternative<KeylessTls>(v)) return "keyless";
  return std::get<DaneTls>(v).dns_cached ? "dane-cached" : "dane-uncached";
}

HandshakeVariant parse_variant(std::string_view name, KxMode mode) {
  if (name == "vanilla") return VanillaTls{};
  if (name == "keyless") return KeylessTls{mode};
  if (name == "dane-cached") return DaneTls{true};
  if (name == "dane-uncached") return DaneTls{false};
  throw ConfigError("unknown handshake variant '" + std::string(name) + "'", 0, "variant");
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::Completed: return "completed";
    case Outcome::Refused: return "refused";
    case Outcome::ValidationFailed: return "validation-failed";
  }
  return "unknown";
}

SessionKeys derive_session_keys(ByteView client_random, ByteView server_random, ByteView premaster,
                                SimTime established_at, SimTime ttl) {
  SessionKeys keys;
  keys.session_id = session_id_of(client_random, server_random);
  keys.key_material = crypto::sha256(concat({client_random, server_random, premaster}));
  keys.established_at = established_at;
  keys.ttl = ttl;
  return keys;
}

namespace {

Bytes record_nonce(const SessionKeys& keys, std::uint64_t seq) {
  Bytes nonce(keys.key_material.begin() + 16, keys.key_material.begin() + 28);
  for (int i = 0; i < 8; ++i) nonce[11 - i] ^= static_cast<std::uint8_t>(seq >> (8 * i));
  return nonce;
}

}  // namespace

Bytes seal_record(const SessionKeys& keys, std::uint64_t seq, ByteView plaintext) {
  return crypto::aes128gcm_seal(ByteView(keys.key_material).first(16), record_nonce(keys, seq),
                                plaintext);
}

Bytes open_record(const SessionKeys& keys, std::uint64_t seq, ByteView sealed) {
  return crypto::aes128gcm_open(ByteView(keys.key_material).first(16), record_nonce(keys, seq),
                                sealed);
}

// ---------------------------------------------------------------------------

struct HandshakeEngine::TlsBody {
  enum class Kind { Syn, SynAck, ClientHello, ServerFlight, ClientFinish, ServerFinish, Alert };

  Kind kind = Kind::Syn;
  ClientHello hello;
  Bytes client_share;
  Bytes server_random;
  Bytes server_share;
  Bytes signature;
  std::optional<DelegatedCert> delegated;
  Bytes key_exchange;
  std::string alert;
};

struct HandshakeEngine::FlowState {
  std::uint64_t id = 0;
  HandshakeParams params;
  HandshakeVariant variant;
  KxMode kx = KxMode::EcdheSign;
  bool split = false;
  Done done;
  HandshakeTrace trace;
  bool finished = false;
  Rng rng{0};

  NodeId client;
  NodeId terminal;
  NodeId server;

  // client
  ClientHello hello;
  Bytes client_share;
  Bytes premaster;
  std::optional<SessionKeys> client_keys;

  // terminal
  bool forwarding = false;
  std::optional<TlsBody> held_hello;
  Bytes terminal_random;
  Bytes terminal_share;
  std::optional<SessionKeys> terminal_keys;

  // origin
  Bytes server_random;
  Bytes server_share;
  std::optional<SessionKeys> server_keys;
};

HandshakeEngine::HandshakeEngine(Simulator& sim, ServerPrivateKey origin_key,
                                 KeylessService* keyless, DnsService* dns)
    : sim_(sim), origin_key_(std::move(origin_key)), keyless_(keyless), dns_(dns) {
  const auto& topo = sim_.topology();
  for (auto c : topo.with_role(Role::Client)) {
    sim_.on(c, Service::Tls, [this](const Message& m) { on_client(m); });
  }
  for (auto t : topo.with_role(Role::Terminal)) {
    sim_.on(t, Service::Tls, [this, t](const Message& m) { on_terminal(t, m); });
    sim_.intercept(t, Service::Tls, [this, t](const Message& m) { return claims(t, m); });
  }
  sim_.on(topo.server(), Service::Tls, [this](const Message& m) { on_server(m); });
}

HandshakeEngine::~HandshakeEngine() = default;

void HandshakeEngine::configure_terminal(NodeId terminal, TerminalConfig config) {
  if (terminal.role != Role::Terminal || !sim_.topology().contains(terminal)) {
    throw InvalidParameter(to_string(terminal) + " is not a terminal");
  }
  terminals_[terminal] = std::move(config);
}

bool HandshakeEngine::claims(NodeId terminal, const Message& m) const {
  auto it = flows_.find(m.flow);
  if (it == flows_.end()) return false;
  const auto& f = *it->second;
  return f.split && f.terminal == terminal && m.from == f.client;
}

std::uint64_t HandshakeEngine::start(const HandshakeParams& params, const HandshakeVariant& variant,
                                     Done done) {
  const auto& topo = sim_.topology();
  if (params.handshake_rtts < 1 || params.handshake_rtts > 2) {
    throw InvalidParameter("handshake_rtts must be 1 or 2");
  }
  if (params.client.role != Role::Client || !topo.contains(params.client)) {
    throw InvalidParameter(to_string(params.client) + " is not a client");
  }

  auto f = std::make_unique<FlowState>();
  f->id = next_flow_++;
  f->params = params;
  f->variant = variant;
  f->done = std::move(done);
  f->client = params.client;
  f->terminal = topo.terminal_of(params.client);
  f->server = topo.server();
  f->split = !std::holds_alternative<VanillaTls>(variant);
  f->rng = Rng(params.seed * 0x9e3779b97f4a7c15ULL + f->id);

  if (auto* k = std::get_if<KeylessTls>(&f->variant)) {
    if (!keyless_) throw InvalidParameter("keyless handshake without a keyless service");
    if (params.handshake_rtts == 1) k->mode = KxMode::EcdheSign;
    f->kx = k->mode;
  }
  if (std::holds_alternative<DaneTls>(variant)) {
    if (!dns_) throw InvalidParameter("DANE handshake without a DNS service");
    auto it = terminals_.find(f->terminal);
    if (it == terminals_.end() || !it->second.delegated) {
      throw InvalidParameter(to_string(f->terminal) + " holds no delegated certificate");
    }
  }
  if (f->split && !terminals_.contains(f->terminal)) {
    throw InvalidParameter(to_string(f->terminal) + " is not configured for interception");
  }

  f->hello.sni = params.sni;
  f->rng.fill(f->hello.client_random);
  f->client_share = random_bytes(f->rng, 32);

  f->trace.variant = f->variant;
  f->trace.flow = f->id;
  f->trace.client = f->client;
  f->trace.peer = f->server;
  f->trace.start = sim_.now();

  const auto id = f->id;
  auto& flow = *f;
  flows_[id] = std::move(f);

  TlsBody first;
  if (params.tcp_connect) {
    first.kind = TlsBody::Kind::Syn;
  } else {
    first.kind = TlsBody::Kind::ClientHello;
    first.hello = flow.hello;
    first.client_share = flow.client_share;
  }
  send_tls(id, flow.client, flow.server, std::move(first));
  return id;
}

void HandshakeEngine::send_tls(std::uint64_t flow, NodeId from, NodeId to, TlsBody body) {
  const auto& f = *flows_.at(flow);
  const bool one_rtt = f.params.handshake_rtts == 1;
  Message m;
  m.service = Service::Tls;
  m.flow = flow;
  switch (body.kind) {
    case TlsBody::Kind::Syn:
      m.label = "SYN";
      m.bytes = kSegmentBytes;
      break;
    case TlsBody::Kind::SynAck:
      m.label = "SYN-ACK";
      m.bytes = kSegmentBytes;
      break;
    case TlsBody::Kind::ClientHello:
      m.label = one_rtt ? "ClientHello+KeyShare" : "ClientHello";
      m.bytes = kClientHelloBytes;
      break;
    case TlsBody::Kind::ServerFlight:
      if (one_rtt) {
        m.label = "ServerHello,EncryptedExtensions,Certificate,CertificateVerify,Finished";
      } else if (body.signature.empty() && !body.delegated) {
        m.label = "ServerHello,Certificate,ServerHelloDone";
      } else {
        m.label = "ServerHello,Certificate,ServerKeyExchange,ServerHelloDone";
      }
      m.bytes = kServerFlightBytes;
      break;
    case TlsBody::Kind::ClientFinish:
      m.label = "ClientKeyExchange,ChangeCipherSpec,Finished";
      m.bytes = kClientFinishBytes;
      break;
    case TlsBody::Kind::ServerFinish:
      m.label = "ChangeCipherSpec,Finished";
      m.bytes = kServerFinishBytes;
      break;
    case TlsBody::Kind::Alert:
      m.label = "Alert(" + body.alert + ")";
      m.bytes = kAlertBytes;
      break;
  }
  m.body = std::move(body);
  sim_.send(from, to, std::move(m));
}

// --- client ----------------------------------------------------------------

void HandshakeEngine::on_client(const Message& m) {
  auto it = flows_.find(m.flow);
  if (it == flows_.end()) return;
  auto& f = *it->second;
  if (f.finished) return;
  const auto& body = std::any_cast<const TlsBody&>(m.body);

  switch (body.kind) {
    case TlsBody::Kind::SynAck: {
      TlsBody hello;
      hello.kind = TlsBody::Kind::ClientHello;
      hello.hello = f.hello;
      hello.client_share = f.client_share;
      send_tls(f.id, f.client, f.server, std::move(hello));
      return;
    }
    case TlsBody::Kind::ServerFlight:
      client_server_flight(f, body);
      return;
    case TlsBody::Kind::ServerFinish:
      if (f.client_keys) f.client_keys->established_at = sim_.now();
      finish(f, Outcome::Completed);
      return;
    case TlsBody::Kind::Alert:
      finish(f, Outcome::Refused, body.alert);
      return;
    default:
      throw ProtocolError("unexpected message at client: " + m.label);
  }
}

void HandshakeEngine::client_server_flight(FlowState& f, const TlsBody& body) {
  if (body.delegated) {
    // DANE: the terminal presented its own certificate; check the pin
    // published in DNS before going on.
    const auto cert = *body.delegated;
    dns_->query(f.client, f.params.sni, f.id, [this, id = f.id, cert, body](const DnsAnswer& a) {
      auto& flow = *flows_.at(id);
      if (flow.finished) return;
      if (a.status != DnsStatus::Ok || !a.record) {
        finish(flow, Outcome::ValidationFailed,
               a.status == DnsStatus::Bogus ? "DNSSEC bogus" : "no TLSA record");
        return;
      }
      flow.trace.tlsa = *a.record;
      if (!a.record->fresh_at(sim_.now())) {
        finish(flow, Outcome::ValidationFailed, "TLSA signature expired");
        return;
      }
      if (!validate_pin(cert, *a.record, sim_.now())) {
        finish(flow, Outcome::ValidationFailed, "certificate not pinned in TLSA");
        return;
      }
      flow.trace.validated_at = sim_.now();
      client_proceed(flow, body);
    });
    return;
  }

  if (!body.signature.empty()) {
    const auto params = signed_params(f.hello.client_random, body.server_random, body.server_share);
    if (!origin_key_.public_key().verify(params, body.signature)) {
      finish(f, Outcome::ValidationFailed, "bad ServerKeyExchange signature");
      return;
    }
  }
  client_proceed(f, body);
}

void HandshakeEngine::client_proceed(FlowState& f, const TlsBody& body) {
  TlsBody fin;
  fin.kind = TlsBody::Kind::ClientFinish;
  if (body.server_share.empty()) {
    // RSA key transport: premaster encrypted to the origin's public key.
    f.premaster = random_bytes(f.rng, kPremasterSize);
    fin.key_exchange = origin_key_.public_key().encrypt(f.premaster, f.hello.client_random);
  } else {
    f.premaster = ecdhe_premaster(f.client_share, body.server_share);
    fin.key_exchange = f.client_share;
  }
  f.client_keys = derive_session_keys(f.hello.client_random, body.server_random, f.premaster,
                                      sim_.now(), f.params.session_ttl);
  if (f.params.handshake_rtts == 1) {
    finish(f, Outcome::Completed);
    return;
  }
  send_tls(f.id, f.client, f.server, std::move(fin));
}

// --- terminal ----------------------------------------------------------------

void HandshakeEngine::on_terminal(NodeId terminal, const Message& m) {
  auto it = flows_.find(m.flow);
  if (it == flows_.end()) return;
  auto& f = *it->second;
  if (f.finished || f.terminal != terminal) return;
  const auto& body = std::any_cast<const TlsBody&>(m.body);
  const bool from_client = m.from == f.client;

  if (f.forwarding) {
    if (from_client) {
      send_tls(f.id, terminal, f.server, body);
    } else if (body.kind == TlsBody::Kind::SynAck && f.held_hello) {
      send_tls(f.id, terminal, f.server, *f.held_hello);
      f.held_hello.reset();
    } else {
      send_tls(f.id, terminal, f.client, body);
    }
    return;
  }

  switch (body.kind) {
    case TlsBody::Kind::Syn: {
      TlsBody ack;
      ack.kind = TlsBody::Kind::SynAck;
      send_tls(f.id, terminal, f.client, std::move(ack));
      return;
    }
    case TlsBody::Kind::ClientHello: {
      InterceptAction action;
      try {
        action = intercept_decision(body.hello, terminals_.at(terminal).authorized);
      } catch (const MalformedSni&) {
        TlsBody alert;
        alert.kind = TlsBody::Kind::Alert;
        alert.alert = "unrecognized_name";
        send_tls(f.id, terminal, f.client, std::move(alert));
        return;
      }
      if (action == InterceptAction::Forward) {
        // Relay: open the upstream TCP leg (when TCP is modelled), then pass
        // every flight through unchanged.
        f.forwarding = true;
        f.trace.intercepted = false;
        if (f.params.tcp_connect) {
          f.held_hello = body;
          TlsBody syn;
          syn.kind = TlsBody::Kind::Syn;
          send_tls(f.id, terminal, f.server, std::move(syn));
        } else {
          send_tls(f.id, terminal, f.server, body);
        }
        return;
      }
      f.trace.intercepted = true;
      f.trace.peer = terminal;
      terminal_intercept(f);
      return;
    }
    case TlsBody::Kind::ClientFinish: {
      if (f.kx == KxMode::RsaDecrypt && std::holds_alternative<KeylessTls>(f.variant)) {
        KeylessRequest req{KeylessOp::Decrypt, body.key_exchange, {}, f.hello.sni};
        req.session_id = session_id_of(f.hello.client_random, f.terminal_random);
        keyless_->request(terminal, req, f.id, [this, id = f.id](const KeylessResponse& r) {
          auto& flow = *flows_.at(id);
          if (!r.pushed.empty() && push_sink_) push_sink_(flow.terminal, r.pushed);
          if (r.refused) {
            TlsBody alert;
            alert.kind = TlsBody::Kind::Alert;
            alert.alert = "handshake_failure";
            send_tls(id, flow.terminal, flow.client, std::move(alert));
            return;
          }
          terminal_finish(flow, r.output);
        });
        return;
      }
      terminal_finish(f, ecdhe_premaster(f.terminal_share, body.key_exchange));
      return;
    }
    default:
      throw ProtocolError("unexpected message at terminal: " + m.label);
  }
}

void HandshakeEngine::terminal_intercept(FlowState& f) {
  f.terminal_random = random_bytes(f.rng, 32);
  const bool rsa = std::holds_alternative<KeylessTls>(f.variant) && f.kx == KxMode::RsaDecrypt;
  if (!rsa) f.terminal_share = random_bytes(f.rng, 32);

  if (auto* k = std::get_if<KeylessTls>(&f.variant); k && !rsa) {
    // The origin signs the key-exchange parameters.
    KeylessRequest req{KeylessOp::Sign,
                       signed_params(f.hello.client_random, f.terminal_random, f.terminal_share),
                       {},
                       f.hello.sni};
    req.session_id = session_id_of(f.hello.client_random, f.terminal_random);
    keyless_->request(f.terminal, req, f.id, [this, id = f.id](const KeylessResponse& r) {
      auto& flow = *flows_.at(id);
      if (!r.pushed.empty() && push_sink_) push_sink_(flow.terminal, r.pushed);
      if (r.refused) {
        TlsBody alert;
        alert.kind = TlsBody::Kind::Alert;
        alert.alert = "handshake_failure";
        send_tls(id, flow.terminal, flow.client, std::move(alert));
        return;
      }
      terminal_server_flight(flow, r.output);
    });
    return;
  }
  terminal_server_flight(f, {});
}

void HandshakeEngine::terminal_server_flight(FlowState& f, const Bytes& signature) {
  TlsBody flight;
  flight.kind = TlsBody::Kind::ServerFlight;
  flight.server_random = f.terminal_random;
  flight.server_share = f.terminal_share;
  flight.signature = signature;
  if (std::holds_alternative<DaneTls>(f.variant)) {
    flight.delegated = terminals_.at(f.terminal).delegated;
  }
  if (f.params.handshake_rtts == 1) {
    f.terminal_keys = derive_session_keys(f.hello.client_random, f.terminal_random,
                                          ecdhe_premaster(f.client_share, f.terminal_share),
                                          sim_.now(), f.params.session_ttl);
  }
  send_tls(f.id, f.terminal, f.client, std::move(flight));
}

void HandshakeEngine::terminal_finish(FlowState& f, const Bytes& premaster) {
  f.terminal_keys = derive_session_keys(f.hello.client_random, f.terminal_random, premaster,
                                        sim_.now(), f.params.session_ttl);
  TlsBody fin;
  fin.kind = TlsBody::Kind::ServerFinish;
  send_tls(f.id, f.terminal, f.client, std::move(fin));
}

// --- origin ------------------------------------------------------------------

void HandshakeEngine::on_server(const Message& m) {
  auto it = flows_.find(m.flow);
  if (it == flows_.end()) return;
  auto& f = *it->second;
  const auto& body = std::any_cast<const TlsBody&>(m.body);
  const auto self = sim_.topology().server();

  switch (body.kind) {
    case TlsBody::Kind::Syn: {
      TlsBody ack;
      ack.kind = TlsBody::Kind::SynAck;
      send_tls(f.id, self, m.from, std::move(ack));
      return;
    }
    case TlsBody::Kind::ClientHello: {
      f.server_random = random_bytes(f.rng, 32);
      f.server_share = random_bytes(f.rng, 32);
      TlsBody flight;
      flight.kind = TlsBody::Kind::ServerFlight;
      flight.server_random = f.server_random;
      flight.server_share = f.server_share;
      flight.signature =
          origin_key_.sign(signed_params(body.hello.client_random, f.server_random, f.server_share));
      if (f.params.handshake_rtts == 1) {
        f.server_keys = derive_session_keys(body.hello.client_random, f.server_random,
                                            ecdhe_premaster(body.client_share, f.server_share),
                                            sim_.now(), f.params.session_ttl);
      }
      send_tls(f.id, self, m.from, std::move(flight));
      return;
    }
    case TlsBody::Kind::ClientFinish: {
      f.server_keys = derive_session_keys(f.hello.client_random, f.server_random,
                                          ecdhe_premaster(f.server_share, body.key_exchange),
                                          sim_.now(), f.params.session_ttl);
      TlsBody fin;
      fin.kind = TlsBody::Kind::ServerFinish;
      send_tls(f.id, self, m.from, std::move(fin));
      return;
    }
    default:
      throw ProtocolError("unexpected message at origin: " + m.label);
  }
}

// --- completion ------------------------------------------------------------------

void HandshakeEngine::finish(FlowState& f, Outcome outcome, std::string detail) {
  if (f.finished) return;
  f.finished = true;
  auto& t = f.trace;
  t.end = sim_.now();
  t.outcome = outcome;
  t.detail = std::move(detail);
  if (outcome == Outcome::Completed) {
    if (f.client_keys) f.client_keys->established_at = t.end;
    t.session = f.client_keys;
  }
  std::size_t satellite = 0;
  for (const auto& r : sim_.transmissions()) {
    if (r.flow != f.id || r.sent_at < t.start) continue;
    t.flights.push_back({r.sent_at, r.arrive_at, r.from, r.to, r.service, r.label, r.bytes, r.satellite});
    if (r.satellite) ++satellite;
  }
  t.satellite_round_trips = static_cast<std::uint32_t>(satellite / 2);
  if (f.done) f.done(t);
}

std::optional<SessionKeys> HandshakeEngine::session_at(NodeId node, std::uint64_t flow) const {
  auto it = flows_.find(flow);
  if (it == flows_.end()) return std::nullopt;
  const auto& f = *it->second;
  if (node == f.client) return f.trace.outcome == Outcome::Completed && f.finished ? f.client_keys : std::nullopt;
  if (node == f.terminal && f.trace.intercepted) return f.terminal_keys;
  if (node == f.server) return f.server_keys;
  return std::nullopt;
}

const HandshakeTrace* HandshakeEngine::trace(std::uint64_t flow) const {
  auto it = flows_.find(flow);
  return it == flows_.end() || !it->second->finished ? nullptr : &it->second->trace;
}

bool HandshakeEngine::split_at_terminal(std::uint64_t flow) const {
  auto it = flows_.find(flow);
  return it != flows_.end() && it->second->trace.intercepted;
}

// --- one-shot runners ----------------------------------------------------------

namespace {

HandshakeTrace run_one(Simulator& sim, HandshakeEngine& engine, const HandshakeParams& params,
                       const HandshakeVariant& variant) {
  std::optional<HandshakeTrace> out;
  engine.start(params, variant, [&](const HandshakeTrace& t) { out = t; });
  sim.run();
  if (!out) throw InvariantViolation("handshake did not terminate");
  return *out;
}

}  // namespace

HandshakeTrace run_vanilla(const Topology& topo, const HandshakeParams& params) {
  Simulator sim(topo);
  HandshakeEngine engine(sim, ServerPrivateKey(as_bytes("origin")), nullptr, nullptr);
  return run_one(sim, engine, params, VanillaTls{});
}

HandshakeTrace run_keyless(const Topology& topo, const HandshakeParams& params, KxMode mode,
                           const std::shared_ptr<KeylessChannel>& channel, KeylessServer& server) {
  Simulator sim(topo);
  ChannelRegistry registry;
  if (channel) registry.add(channel);
  KeylessService keyless(sim, server, registry);
  HandshakeEngine engine(sim, server.private_key(), &keyless, nullptr);
  engine.configure_terminal(topo.terminal_of(params.client), {{params.sni}, std::nullopt});
  return run_one(sim, engine, params, KeylessTls{mode});
}

HandshakeTrace run_dane(const Topology& topo, const HandshakeParams& params, bool dns_cached,
                        DaneSetup& setup) {
  Simulator sim(topo);
  const auto terminal = topo.terminal_of(params.client);
  DnsService dns(sim, setup.dns, {{terminal, &setup.forwarder}});
  HandshakeEngine engine(sim, ServerPrivateKey(as_bytes("origin")), nullptr, &dns);
  engine.configure_terminal(terminal, {{setup.cert.issued_for}, setup.cert});
  if (dns_cached) {
    if (!setup.forwarder.lookup(params.sni, sim.now())) {
      dns.prefetch(terminal, params.sni);
      sim.run();
    }
  } else {
    setup.forwarder.evict(params.sni);
  }
  return run_one(sim, engine, params, DaneTls{dns_cached});
}

}  // namespace satsplit
