#include <gtest/gtest.h>

#include <random>

#include "oracle.hpp"
#include "satsplit/deployment.hpp"
#include "satsplit/error.hpp"
#include "satsplit/tls.hpp"

using namespace satsplit;

namespace {

// Hand-built layout, for delays the regular builder refuses (zeros).
Topology manual_topology(SimTime access, SimTime sat, SimTime backhaul) {
  Topology t;
  const NodeId c{Role::Client, 0}, term{Role::Terminal, 0}, gw{Role::Gateway, 0}, s{Role::Server, 0},
      dns{Role::AuthDns, 0};
  for (auto n : {c, term, gw, s, dns}) t.add_node(n);
  t.add_link({c, term, access / 2, LinkKind::Terrestrial, false, 0});
  t.add_link({term, gw, sat / 2, LinkKind::Satellite, true, 0});
  t.add_link({gw, s, backhaul / 2, LinkKind::Terrestrial, false, 0});
  t.add_link({gw, dns, backhaul / 2, LinkKind::Terrestrial, false, 0});
  t.set_footprint(0, {term});
  return t;
}

oracle::Delays delays_of(const TopologyConfig& c) {
  return {static_cast<std::uint64_t>(c.access_rtt.count()), static_cast<std::uint64_t>(c.sat_rtt.count()),
          static_cast<std::uint64_t>(c.backhaul_rtt.count())};
}

struct KeylessFixture {
  KeylessServer server{{Role::Server, 0}, ServerPrivateKey(as_bytes("origin"))};
  ChannelRegistry registry;
  std::shared_ptr<KeylessChannel> channel;

  explicit KeylessFixture(const Topology& topo) {
    server.provision({Role::Terminal, 0});
    channel = establish_channel(topo, {Role::Terminal, 0}, server, registry).channel;
  }
};

struct DaneFixture {
  AuthoritativeDns dns;
  ForwarderCache forwarder;
  DaneSetup setup;

  DaneFixture() : setup{dns, forwarder, DelegatedCert::issue({Role::Terminal, 0}, "video.example", 1)} {
    dns.publish("video.example", setup.cert.digest);
  }
};

std::uint64_t us(SimTime t) { return static_cast<std::uint64_t>(t.count()); }

}  // namespace

TEST(InterceptDecision, AuthorizedSniIsIntercepted) {
  ClientHello h;
  h.sni = "video.example";
  EXPECT_EQ(intercept_decision(h, {"video.example"}), InterceptAction::Intercept);
  h.sni = "VIDEO.Example";
  EXPECT_EQ(intercept_decision(h, {"video.example"}), InterceptAction::Intercept);
}

TEST(InterceptDecision, OtherSniIsForwarded) {
  ClientHello h;
  h.sni = "bank.example";
  EXPECT_EQ(intercept_decision(h, {"video.example"}), InterceptAction::Forward);
  EXPECT_EQ(intercept_decision(h, {}), InterceptAction::Forward);
  h.sni = "sub.video.example";
  EXPECT_EQ(intercept_decision(h, {"video.example"}), InterceptAction::Forward);
}

TEST(InterceptDecision, EmptySniIsMalformed) {
  ClientHello h;
  EXPECT_THROW(intercept_decision(h, {"video.example"}), MalformedSni);
}

TEST(Vanilla, DefaultTopology) {
  const auto topo = make_topology({});
  const auto t = run_vanilla(topo, {});
  EXPECT_EQ(us(t.duration()), oracle::vanilla({}));
  EXPECT_EQ(t.duration(), from_ms(1620));
  EXPECT_EQ(t.satellite_round_trips, 3u);
  EXPECT_EQ(t.outcome, Outcome::Completed);
  EXPECT_FALSE(t.intercepted);
  EXPECT_EQ(t.flights.size(), 6u);
}

TEST(Vanilla, ZeroLatencyTopology) {
  const auto topo = manual_topology(SimTime{0}, SimTime{0}, SimTime{0});
  EXPECT_EQ(run_vanilla(topo, {}).duration(), SimTime{0});
}

TEST(Vanilla, SatelliteOnly) {
  const auto topo = manual_topology(SimTime{0}, from_ms(500), SimTime{0});
  EXPECT_EQ(run_vanilla(topo, {}).duration(), from_ms(1500));
}

TEST(Vanilla, IndependentOfTerminalCount) {
  for (std::uint32_t n : {1u, 2u, 8u}) {
    const auto topo = make_topology({.n_terminals = n});
    EXPECT_EQ(run_vanilla(topo, {}).duration(), from_ms(1620)) << n;
  }
}

TEST(Keyless, RsaDecryptDefault) {
  const auto topo = make_topology({});
  KeylessFixture k(topo);
  const auto t = run_keyless(topo, {}, KxMode::RsaDecrypt, k.channel, k.server);
  EXPECT_EQ(us(t.duration()), oracle::keyless({}));
  EXPECT_EQ(t.duration(), from_ms(580));
  EXPECT_EQ(t.satellite_round_trips, 1u);
  EXPECT_TRUE(t.intercepted);
  // The key operation follows the client's key exchange flight.
  std::vector<std::string> labels;
  for (const auto& f : t.flights) labels.push_back(f.label);
  const auto kx = std::find(labels.begin(), labels.end(), "ClientKeyExchange,ChangeCipherSpec,Finished");
  const auto op = std::find(labels.begin(), labels.end(), "KeylessRequest(decrypt)");
  ASSERT_NE(op, labels.end());
  EXPECT_LT(kx, op);
}

TEST(Keyless, EcdheSignSameTotal) {
  const auto topo = make_topology({});
  KeylessFixture k(topo);
  const auto t = run_keyless(topo, {}, KxMode::EcdheSign, k.channel, k.server);
  EXPECT_EQ(t.duration(), from_ms(580));
  EXPECT_EQ(t.satellite_round_trips, 1u);
  std::vector<std::string> labels;
  for (const auto& f : t.flights) labels.push_back(f.label);
  const auto op = std::find(labels.begin(), labels.end(), "KeylessRequest(sign)");
  const auto cert = std::find(labels.begin(), labels.end(),
                              "ServerHello,Certificate,ServerKeyExchange,ServerHelloDone");
  ASSERT_NE(op, labels.end());
  EXPECT_LT(op, cert);
}

TEST(Keyless, RevokedChannelIsRefusedWithoutSatellite) {
  const auto topo = make_topology({});
  KeylessFixture k(topo);
  revoke(*k.channel);
  const auto t = run_keyless(topo, {}, KxMode::RsaDecrypt, k.channel, k.server);
  EXPECT_EQ(t.outcome, Outcome::Refused);
  EXPECT_EQ(t.satellite_round_trips, 0u);
  for (const auto& f : t.flights) EXPECT_FALSE(f.satellite);
  EXPECT_TRUE(k.server.audit_log().empty());
}

TEST(Keyless, UnauthorizedSniIsRelayedToTheOrigin) {
  const auto topo = make_topology({});
  KeylessFixture k(topo);
  HandshakeParams p;
  p.sni = "bank.example";
  Simulator sim(topo);
  KeylessService svc(sim, k.server, k.registry);
  HandshakeEngine engine(sim, k.server.private_key(), &svc, nullptr);
  engine.configure_terminal({Role::Terminal, 0}, {{"video.example"}, std::nullopt});
  std::optional<HandshakeTrace> out;
  engine.start(p, KeylessTls{KxMode::RsaDecrypt}, [&](const HandshakeTrace& t) { out = t; });
  sim.run();
  ASSERT_TRUE(out);
  EXPECT_EQ(out->outcome, Outcome::Completed);
  EXPECT_FALSE(out->intercepted);
  EXPECT_EQ(out->peer, topo.server());
  EXPECT_EQ(out->duration(), from_ms(1620));
  EXPECT_TRUE(k.server.audit_log().empty());
}

TEST(Dane, CachedDefault) {
  const auto topo = make_topology({});
  DaneFixture f;
  const auto t = run_dane(topo, {}, true, f.setup);
  EXPECT_EQ(us(t.duration()), oracle::dane_cached({}));
  EXPECT_EQ(t.duration(), from_ms(80));
  EXPECT_EQ(t.satellite_round_trips, 0u);
  for (const auto& fl : t.flights) {
    EXPECT_NE(fl.from.role, Role::AuthDns);
    EXPECT_NE(fl.to.role, Role::AuthDns);
  }
  ASSERT_TRUE(t.tlsa);
  EXPECT_EQ(t.tlsa->cert_digest, f.setup.cert.digest);
}

TEST(Dane, UncachedDefault) {
  const auto topo = make_topology({});
  DaneFixture f;
  const auto t = run_dane(topo, {}, false, f.setup);
  EXPECT_EQ(us(t.duration()), oracle::dane_uncached({}));
  EXPECT_EQ(t.duration(), from_ms(600));
  EXPECT_EQ(t.satellite_round_trips, 1u);
}

TEST(Dane, RotatedRecordFailsValidation) {
  const auto topo = make_topology({});
  DaneFixture f;
  f.dns.rotate_record("video.example", crypto::sha256(as_bytes("some other certificate")));
  const auto t = run_dane(topo, {}, false, f.setup);
  EXPECT_EQ(t.outcome, Outcome::ValidationFailed);
  EXPECT_FALSE(t.session);
}

TEST(Dane, BogusSignatureFailsValidation) {
  const auto topo = make_topology({});
  DaneFixture f;
  f.dns.set_signature_valid("video.example", false);
  EXPECT_EQ(run_dane(topo, {}, false, f.setup).outcome, Outcome::ValidationFailed);
}

TEST(Dane, UnpublishedDomainFailsValidation) {
  const auto topo = make_topology({});
  DaneFixture f;
  HandshakeParams p;
  p.sni = "other.example";
  f.setup.cert = DelegatedCert::issue({Role::Terminal, 0}, "other.example", 1);
  EXPECT_EQ(run_dane(topo, p, false, f.setup).outcome, Outcome::ValidationFailed);
}

TEST(Handshakes, MatchClosedFormOnRandomDelays) {
  std::mt19937_64 gen(2024);
  for (int i = 0; i < 60; ++i) {
    TopologyConfig cfg;
    cfg.access_rtt = SimTime{2 * (1 + gen() % 80000)};
    cfg.sat_rtt = SimTime{2 * (1 + gen() % 900000)};
    cfg.backhaul_rtt = SimTime{2 * (1 + gen() % 80000)};
    const auto topo = make_topology(cfg);
    const auto d = delays_of(cfg);
    for (unsigned h : {1u, 2u}) {
      for (bool tcp : {false, true}) {
        HandshakeParams p;
        p.handshake_rtts = h;
        p.tcp_connect = tcp;
        KeylessFixture k(topo);
        DaneFixture f;
        ASSERT_EQ(us(run_vanilla(topo, p).duration()), oracle::vanilla(d, h, tcp));
        ASSERT_EQ(us(run_keyless(topo, p, KxMode::RsaDecrypt, k.channel, k.server).duration()),
                  oracle::keyless(d, h, tcp));
        ASSERT_EQ(us(run_keyless(topo, p, KxMode::EcdheSign, k.channel, k.server).duration()),
                  oracle::keyless(d, h, tcp));
        ASSERT_EQ(us(run_dane(topo, p, false, f.setup).duration()), oracle::dane_uncached(d, h, tcp));
        ASSERT_EQ(us(run_dane(topo, p, true, f.setup).duration()), oracle::dane_cached(d, h, tcp));
      }
    }
  }
}

TEST(Handshakes, DurationsAreMonotoneInEveryDelay) {
  std::mt19937_64 gen(5);
  auto durations = [](const TopologyConfig& cfg) {
    const auto topo = make_topology(cfg);
    KeylessFixture k(topo);
    DaneFixture f;
    return std::vector<SimTime>{run_vanilla(topo, {}).duration(),
                                run_keyless(topo, {}, KxMode::RsaDecrypt, k.channel, k.server).duration(),
                                run_dane(topo, {}, false, f.setup).duration(),
                                run_dane(topo, {}, true, f.setup).duration()};
  };
  for (int i = 0; i < 30; ++i) {
    TopologyConfig base;
    base.access_rtt = SimTime{2 * (1 + gen() % 50000)};
    base.sat_rtt = SimTime{2 * (1 + gen() % 700000)};
    base.backhaul_rtt = SimTime{2 * (1 + gen() % 50000)};
    const auto before = durations(base);
    for (int knob = 0; knob < 3; ++knob) {
      auto more = base;
      auto& field = knob == 0 ? more.access_rtt : knob == 1 ? more.sat_rtt : more.backhaul_rtt;
      field += SimTime{2 * (1 + gen() % 100000)};
      const auto after = durations(more);
      for (std::size_t v = 0; v < before.size(); ++v) ASSERT_GE(after[v], before[v]);
    }
  }
}

TEST(Handshakes, OneRttKeylessUsesSigning) {
  const auto topo = make_topology({});
  KeylessFixture k(topo);
  HandshakeParams p;
  p.handshake_rtts = 1;
  const auto t = run_keyless(topo, p, KxMode::RsaDecrypt, k.channel, k.server);
  EXPECT_EQ(std::get<KeylessTls>(t.variant).mode, KxMode::EcdheSign);
  EXPECT_EQ(t.duration(), from_ms(560));
}

TEST(Handshakes, InvalidRoundTripCount) {
  const auto topo = make_topology({});
  HandshakeParams p;
  p.handshake_rtts = 3;
  EXPECT_THROW(run_vanilla(topo, p), InvalidParameter);
}

TEST(SessionKeys, ClientAndPeerAgree) {
  Deployment d({});
  d.establish_channels();
  for (HandshakeVariant v : {HandshakeVariant{VanillaTls{}}, HandshakeVariant{KeylessTls{KxMode::RsaDecrypt}},
                             HandshakeVariant{KeylessTls{KxMode::EcdheSign}}, HandshakeVariant{DaneTls{true}}}) {
    const auto t = d.run_handshake({Role::Client, 0}, v);
    ASSERT_EQ(t.outcome, Outcome::Completed) << variant_name(v);
    const auto peer = d.engine().session_at(t.peer, t.flow);
    ASSERT_TRUE(peer);
    EXPECT_EQ(peer->key_material, t.session->key_material) << variant_name(v);
    EXPECT_EQ(t.session->expires_at(), t.end + kDefaultSessionTtl);
  }
}

TEST(SessionKeys, DistinctPerSessionAndRecordsDoNotCross) {
  Deployment d({});
  const auto a = d.run_handshake({Role::Client, 0}, DaneTls{true});
  const auto b = d.run_handshake({Role::Client, 0}, DaneTls{true});
  ASSERT_TRUE(a.session && b.session);
  EXPECT_NE(a.session->key_material, b.session->key_material);
  EXPECT_NE(a.session->session_id, b.session->session_id);
  const auto sealed = seal_record(*a.session, 0, as_bytes("hello"));
  EXPECT_EQ(open_record(*a.session, 0, sealed), Bytes(as_bytes("hello").begin(), as_bytes("hello").end()));
  EXPECT_THROW(open_record(*b.session, 0, sealed), AuthenticationFailure);
  EXPECT_THROW(open_record(*a.session, 1, sealed), AuthenticationFailure);
}

TEST(Variants, NamesRoundTrip) {
  for (const auto* n : {"vanilla", "keyless", "dane-cached", "dane-uncached"}) {
    EXPECT_EQ(variant_name(parse_variant(n)), n);
  }
  EXPECT_THROW(parse_variant("tls13"), ConfigError);
}
