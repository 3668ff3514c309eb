#include "satsplit/keyless.hpp"

#include "satsplit/error.hpp"

namespace satsplit {
namespace {

constexpr std::size_t kHandshakeFlightBytes = 1500;
constexpr std::size_t kRequestBytes = 300;
constexpr std::size_t kResponseBytes = 300;

Bytes wrap_key(const Bytes& secret) {
  const auto prk = crypto::hkdf_extract(as_bytes("keyless-wrap"), secret);
  return crypto::hkdf_expand(prk, as_bytes("premaster"), 16);
}

}  // namespace

std::string to_string(KxMode mode) {
  return mode == KxMode::RsaDecrypt ? "rsa-decrypt" : "ecdhe-sign";
}

std::string to_string(KeylessOp op) { return op == KeylessOp::Decrypt ? "decrypt" : "sign"; }

Bytes ServerPublicKey::encrypt(ByteView premaster, ByteView nonce_seed) const {
  if (!secret_) throw InvalidParameter("empty public key");
  const auto h = crypto::sha256(nonce_seed);
  Bytes nonce(h.begin(), h.begin() + 12);
  auto sealed = crypto::aes128gcm_seal(wrap_key(*secret_), nonce, premaster);
  nonce.insert(nonce.end(), sealed.begin(), sealed.end());
  return nonce;
}

bool ServerPublicKey::verify(ByteView message, ByteView signature) const {
  if (!secret_) return false;
  const auto mac = crypto::hmac_sha256(*secret_, message);
  const auto expected = crypto::hkdf_expand(mac, as_bytes("signature"), kSignatureSize);
  return signature.size() == expected.size() &&
         std::equal(signature.begin(), signature.end(), expected.begin());
}

ServerPrivateKey::ServerPrivateKey(ByteView seed) {
  const auto d = crypto::sha256(seed);
  secret_ = std::make_shared<const Bytes>(d.begin(), d.end());
  public_.secret_ = secret_;
  public_.fingerprint_ = crypto::sha256(concat({as_bytes("public"), *secret_}));
}

Bytes ServerPrivateKey::decrypt(ByteView ciphertext) const {
  if (ciphertext.size() < 12) throw ProtocolError("malformed encrypted premaster");
  try {
    auto out = crypto::aes128gcm_open(wrap_key(*secret_), ciphertext.first(12), ciphertext.subspan(12));
    if (out.size() != kPremasterSize) throw ProtocolError("premaster has wrong length");
    return out;
  } catch (const AuthenticationFailure&) {
    throw ProtocolError("premaster not encrypted to this key");
  }
}

Bytes ServerPrivateKey::sign(ByteView message) const {
  const auto mac = crypto::hmac_sha256(*secret_, message);
  return crypto::hkdf_expand(mac, as_bytes("signature"), kSignatureSize);
}

void revoke(KeylessChannel& channel) { channel.state = ChannelState::Revoked; }

KeylessServer::KeylessServer(NodeId node, ServerPrivateKey key) : node_(node), key_(std::move(key)) {}

Bytes KeylessServer::provision(NodeId terminal) {
  if (auto it = client_certs_.find(terminal); it != client_certs_.end()) return it->second;
  const auto d = crypto::sha256(
      concat({as_bytes("client-cert:" + to_string(terminal)), key_.public_key().fingerprint()}));
  Bytes cert(d.begin(), d.end());
  client_certs_[terminal] = cert;
  return cert;
}

std::optional<Bytes> KeylessServer::client_cert(NodeId terminal) const {
  auto it = client_certs_.find(terminal);
  if (it == client_certs_.end()) return std::nullopt;
  return it->second;
}

void KeylessServer::set_push(bool enabled, std::map<std::string, std::vector<std::string>> pushlist,
                             PushSource source) {
  push_enabled_ = enabled;
  pushlist_ = std::move(pushlist);
  push_source_ = std::move(source);
}

KeylessResponse KeylessServer::handle(const KeylessChannel& channel, const KeylessRequest& req,
                                      SimTime now) {
  KeylessResponse resp;
  if (!channel.up()) {
    resp.refused = true;
    resp.error = "channel revoked";
    return resp;
  }
  auto cert = client_cert(channel.terminal);
  if (!cert || *cert != channel.terminal_cert_id) {
    resp.refused = true;
    resp.error = "terminal not authorized";
    return resp;
  }
  try {
    resp.output = req.op == KeylessOp::Decrypt ? key_.decrypt(req.input) : key_.sign(req.input);
  } catch (const ProtocolError& e) {
    resp.refused = true;
    resp.error = e.what();
    return resp;
  }
  audit_.push_back({channel.terminal, req.session_id, req.op, now});

  if (push_enabled_ && req.push_hint && push_source_) {
    if (auto it = pushlist_.find(*req.push_hint); it != pushlist_.end()) {
      for (const auto& path : it->second) {
        if (auto body = push_source_(*req.push_hint, path)) {
          resp.pushed.push_back({*req.push_hint, path, std::move(*body)});
        }
      }
    }
  }
  return resp;
}

std::shared_ptr<KeylessChannel> ChannelRegistry::find(NodeId terminal, NodeId server) const {
  auto it = channels_.find({terminal, server});
  return it == channels_.end() ? nullptr : it->second;
}

std::shared_ptr<KeylessChannel> ChannelRegistry::add(KeylessChannel channel) {
  return add(std::make_shared<KeylessChannel>(std::move(channel)));
}

std::shared_ptr<KeylessChannel> ChannelRegistry::add(std::shared_ptr<KeylessChannel> channel) {
  auto& slot = channels_[{channel->terminal, channel->server}];
  if (!slot) slot = std::move(channel);
  return slot;
}

KeylessService::KeylessService(Simulator& sim, KeylessServer& server, ChannelRegistry& registry)
    : sim_(sim), server_(server), registry_(registry) {
  sim_.on(server_.node(), Service::Keyless, [this](const Message& m) { on_server(m); });
  for (auto t : sim_.topology().with_role(Role::Terminal)) {
    sim_.on(t, Service::Keyless, [this, t](const Message& m) { on_terminal(t, m); });
  }
}

std::shared_ptr<KeylessChannel> KeylessService::channel(NodeId terminal) const {
  return registry_.find(terminal, server_.node());
}

void KeylessService::establish(NodeId terminal, Established on_up, Failed on_error) {
  if (auto existing = channel(terminal)) {
    if (on_up) on_up(existing, SimTime{0});
    return;
  }
  if (setups_.contains(terminal)) throw ProtocolError("channel setup already in progress");
  setups_[terminal] = {std::move(on_up), std::move(on_error), sim_.now()};
  Message m;
  m.service = Service::Keyless;
  m.label = "SYN";
  m.bytes = 60;
  m.body = SetupBody{1, {}, true};
  sim_.send(terminal, server_.node(), std::move(m));
}

void KeylessService::request(NodeId terminal, const KeylessRequest& req, std::uint64_t flow,
                             Done done) {
  auto ch = channel(terminal);
  if (!ch || !ch->up()) {
    KeylessResponse refused;
    refused.refused = true;
    refused.error = ch ? "channel revoked" : "no keyless channel";
    done(refused);
    return;
  }
  const auto id = next_id_++;
  pending_[id] = std::move(done);
  Message m;
  m.service = Service::Keyless;
  m.flow = flow;
  m.label = "KeylessRequest(" + to_string(req.op) + ")";
  m.bytes = kRequestBytes + req.input.size();
  m.body = RequestBody{id, req};
  sim_.send(terminal, server_.node(), std::move(m));
}

void KeylessService::on_server(const Message& m) {
  const auto terminal = m.from;
  Message reply;
  reply.service = Service::Keyless;
  reply.flow = m.flow;

  if (const auto* setup = std::any_cast<SetupBody>(&m.body)) {
    SetupBody out{setup->step, {}, true};
    switch (setup->step) {
      case 1:
        reply.label = "SYN-ACK";
        reply.bytes = 60;
        break;
      case 2:
        reply.label = "ServerHello,Certificate,CertificateRequest,ServerHelloDone";
        reply.bytes = kHandshakeFlightBytes * 3;
        break;
      default: {
        auto cert = server_.client_cert(terminal);
        out.ok = cert && *cert == setup->client_cert && !setup->client_cert.empty();
        reply.label = out.ok ? "ChangeCipherSpec,Finished" : "Alert(bad_certificate)";
        reply.bytes = out.ok ? 100 : 40;
        if (out.ok) {
          registry_.add(KeylessChannel{terminal, server_.node(), *cert, sim_.now(), ChannelState::Up});
        }
      }
    }
    reply.body = out;
    sim_.send(server_.node(), terminal, std::move(reply));
    return;
  }

  const auto& rq = std::any_cast<const RequestBody&>(m.body);
  auto ch = channel(terminal);
  KeylessResponse resp;
  if (!ch) {
    resp.refused = true;
    resp.error = "no keyless channel";
  } else {
    resp = server_.handle(*ch, rq.req, sim_.now());
  }
  reply.label = resp.refused ? "KeylessRefused" : "KeylessResponse";
  reply.bytes = kResponseBytes + resp.output.size();
  for (const auto& p : resp.pushed) reply.bytes += p.body.size();
  if (!resp.pushed.empty()) reply.label += "+Push";
  reply.body = ResponseBody{rq.id, std::move(resp)};
  sim_.send(server_.node(), terminal, std::move(reply));
}

void KeylessService::on_terminal(NodeId terminal, const Message& m) {
  if (const auto* setup = std::any_cast<SetupBody>(&m.body)) {
    auto it = setups_.find(terminal);
    if (it == setups_.end()) return;
    Message next;
    next.service = Service::Keyless;
    switch (setup->step) {
      case 1:
        next.label = "ClientHello";
        next.bytes = 512;
        next.body = SetupBody{2, {}, true};
        sim_.send(terminal, server_.node(), std::move(next));
        return;
      case 2: {
        next.label = "Certificate,ClientKeyExchange,CertificateVerify,ChangeCipherSpec,Finished";
        next.bytes = kHandshakeFlightBytes;
        next.body = SetupBody{3, server_.client_cert(terminal).value_or(Bytes{}), true};
        sim_.send(terminal, server_.node(), std::move(next));
        return;
      }
      default: {
        auto s = std::move(it->second);
        setups_.erase(it);
        if (setup->ok) {
          if (s.on_up) s.on_up(channel(terminal), sim_.now() - s.started);
        } else {
          if (s.on_error) s.on_error("terminal " + to_string(terminal) + " holds no provisioned client certificate");
        }
        return;
      }
    }
  }

  const auto& rb = std::any_cast<const ResponseBody&>(m.body);
  auto it = pending_.find(rb.id);
  if (it == pending_.end()) return;
  auto done = std::move(it->second);
  pending_.erase(it);
  done(rb.resp);
}

ChannelSetup establish_channel(const Topology& topo, NodeId terminal, KeylessServer& server,
                               ChannelRegistry& registry) {
  Simulator sim(topo);
  KeylessService svc(sim, server, registry);
  const bool existed = registry.find(terminal, server.node()) != nullptr;
  ChannelSetup result;
  std::optional<std::string> error;
  svc.establish(
      terminal,
      [&](std::shared_ptr<KeylessChannel> ch, SimTime t) {
        result.channel = std::move(ch);
        result.setup_time = t;
      },
      [&](const std::string& e) { error = e; });
  sim.run();
  if (error) throw Unauthorized(*error);
  if (!result.channel) throw InvariantViolation("channel setup did not complete");
  result.reused = existed;
  return result;
}

KeylessExchange keyless_op(const Topology& topo, const std::shared_ptr<KeylessChannel>& channel,
                           KeylessServer& server, const KeylessRequest& req, KxMode session_mode) {
  if (!channel) throw InvalidParameter("null keyless channel");
  if (req.op != required_op(session_mode)) {
    throw ProtocolError("keyless " + to_string(req.op) + " does not match session mode " +
                        to_string(session_mode));
  }
  Simulator sim(topo);
  ChannelRegistry registry;
  registry.add(channel);
  KeylessService svc(sim, server, registry);
  std::optional<KeylessResponse> resp;
  svc.request(channel->terminal, req, 0, [&](const KeylessResponse& r) { resp = r; });
  sim.run();
  if (!resp) throw InvariantViolation("keyless request never answered");
  if (resp->refused) throw ChannelRevoked(resp->error);
  return {*resp, sim.now()};
}

}  // namespace satsplit
