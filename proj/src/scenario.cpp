#include "satsplit/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "satsplit/error.hpp"

namespace satsplit {
namespace {

KxMode parse_kx_mode(std::string_view text) {
  if (text == "rsa-decrypt") return KxMode::RsaDecrypt;
  if (text == "ecdhe-sign") return KxMode::EcdheSign;
  throw ConfigError("kx_mode must be rsa-decrypt or ecdhe-sign, got '" + std::string(text) + "'", 0,
                    "kx_mode");
}

std::uint32_t parse_u32(std::string_view text, const std::string& field) {
  const auto v = parse_u64(text, field);
  if (v > 0xffffffffULL) throw ConfigError("value out of range", 0, field);
  return static_cast<std::uint32_t>(v);
}

std::uint32_t parse_positive(std::string_view text, const std::string& field) {
  const auto v = parse_u32(text, field);
  if (v == 0) throw ConfigError("must be > 0", 0, field);
  return v;
}

std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

}  // namespace

// --- variants ------------------------------------------------------------------

std::string RowVariant::label() const {
  auto name = variant_name(handshake);
  if (ece_cache) name += *ece_cache ? "/ece-cache" : "/direct";
  return name;
}

RowVariant parse_row_variant(std::string_view text, KxMode kx_mode, bool dns_cached) {
  RowVariant v;
  auto base = text;
  if (const auto slash = text.find('/'); slash != std::string_view::npos) {
    base = text.substr(0, slash);
    const auto fetch = text.substr(slash + 1);
    if (fetch == "ece-cache") {
      v.ece_cache = true;
    } else if (fetch == "direct") {
      v.ece_cache = false;
    } else {
      throw ConfigError("unknown fetch mode '" + std::string(fetch) + "'", 0, "variant");
    }
  }
  if (base == "dane") {
    v.handshake = DaneTls{dns_cached};
  } else {
    v.handshake = parse_variant(base, kx_mode);
  }
  if (std::holds_alternative<VanillaTls>(v.handshake) && v.ece_cache.value_or(false)) {
    throw ConfigError("vanilla sessions end at the origin; the terminal cache cannot serve them", 0,
                      "variant");
  }
  return v;
}

// --- scenarios ------------------------------------------------------------------

const std::vector<std::string>& scenario_knobs() {
  static const std::vector<std::string> knobs{
      "name",           "variant",          "variants",        "kx_mode",
      "dns_cached",     "handshake_rtts",   "tcp_connect",     "session_ttl_s",
      "sat_rtt_ms",     "terr_rtt_ms",      "access_rtt_ms",   "backhaul_rtt_ms",
      "n_terminals",    "n_clients_per_terminal", "serialization_bps", "processing_delay_us",
      "tlsa_ttl_s",     "refresh_interval_s", "dnssec_valid",  "replay_attack",
      "keyless_push",   "pushlist",         "content_epoch_s", "record_size",
      "cache_capacity_bytes", "domain",     "resource",        "request",
      "seed",           "runs",             "revocation_trials"};
  return knobs;
}

Scenario Scenario::preset(std::string_view name) {
  Scenario s;
  if (name == "fig4") {
    s.name = "fig4";
    s.variant_names = {"vanilla", "keyless", "dane-uncached", "dane-cached"};
    return s;
  }
  if (name == "fig5") {
    s.name = "fig5";
    s.variant_names = {"vanilla/direct",           "keyless/ece-cache",     "keyless/direct",
                       "dane-uncached/ece-cache",  "dane-uncached/direct",  "dane-cached/ece-cache",
                       "dane-cached/direct"};
    return s;
  }
  throw ConfigError("unknown scenario preset '" + std::string(name) + "'", 0, "preset");
}

Scenario Scenario::parse(std::string_view text) {
  const auto kv = KeyValueConfig::parse(text);
  Scenario s;
  if (auto p = kv.find("preset")) {
    try {
      s = preset(p->value);
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), p->line, "preset");
    }
  }
  bool resources_seen = false;
  for (const auto& e : kv.entries()) {
    if (e.key == "preset") continue;
    try {
      if (e.key == "resource" && !resources_seen) {
        s.deployment.resources.clear();
        resources_seen = true;
      }
      s.apply(e.key, e.value);
    } catch (const UnknownKnob& ex) {
      throw ConfigError(ex.what(), e.line, e.key);
    } catch (const ConfigError& ex) {
      throw ConfigError(ex.what(), e.line, ex.field().empty() ? e.key : ex.field());
    } catch (const InvalidParameter& ex) {
      throw ConfigError(ex.what(), e.line, e.key);
    }
  }
  return s;
}

Scenario Scenario::load(const std::string& name_or_path) {
  if (name_or_path == "fig4" || name_or_path == "fig5") return preset(name_or_path);
  std::ifstream in(name_or_path);
  if (!in) {
    throw ConfigError("'" + name_or_path + "' is neither a preset (fig4, fig5) nor a readable file");
  }
  std::ostringstream text;
  text << in.rdbuf();
  auto s = parse(text.str());
  return s;
}

void Scenario::apply(const std::string& key, const std::string& value) {
  auto& d = deployment;
  auto& topo = d.topology;
  if (key == "name") {
    if (value.empty()) throw ConfigError("empty scenario name", 0, key);
    name = value;
  } else if (key == "variant" || key == "variants") {
    variant_names.clear();
    for (const auto& v : split(value, ',')) {
      const auto t = trim(v);
      if (!t.empty()) variant_names.push_back(t);
    }
    if (variant_names.empty()) throw ConfigError("no variants listed", 0, key);
    // Reject typos now rather than at run time.
    variants();
  } else if (key == "kx_mode") {
    d.kx_mode = parse_kx_mode(value);
  } else if (key == "dns_cached") {
    dns_cached = parse_bool(value, key);
  } else if (key == "handshake_rtts") {
    const auto v = parse_u32(value, key);
    if (v != 1 && v != 2) throw ConfigError("handshake_rtts must be 1 or 2", 0, key);
    d.handshake_rtts = v;
  } else if (key == "tcp_connect") {
    d.tcp_connect = parse_bool(value, key);
  } else if (key == "session_ttl_s") {
    d.session_ttl = from_s(parse_positive(value, key));
  } else if (key == "sat_rtt_ms") {
    topo.sat_rtt = from_ms(parse_positive(value, key));
  } else if (key == "terr_rtt_ms") {
    topo.access_rtt = topo.backhaul_rtt = from_ms(parse_positive(value, key));
  } else if (key == "access_rtt_ms") {
    topo.access_rtt = from_ms(parse_positive(value, key));
  } else if (key == "backhaul_rtt_ms") {
    topo.backhaul_rtt = from_ms(parse_positive(value, key));
  } else if (key == "n_terminals") {
    topo.n_terminals = parse_positive(value, key);
  } else if (key == "n_clients_per_terminal") {
    topo.n_clients_per_terminal = parse_positive(value, key);
  } else if (key == "serialization_bps") {
    topo.serialization_bps = parse_u64(value, key);
  } else if (key == "processing_delay_us") {
    d.processing_delay = SimTime{parse_u64(value, key)};
  } else if (key == "tlsa_ttl_s") {
    d.tlsa_ttl = from_s(parse_positive(value, key));
  } else if (key == "refresh_interval_s") {
    d.refresh_interval = from_s(parse_u32(value, key));
  } else if (key == "dnssec_valid") {
    d.dnssec_valid = parse_bool(value, key);
  } else if (key == "replay_attack") {
    d.replay_attack = parse_bool(value, key);
  } else if (key == "keyless_push") {
    d.keyless_push = parse_bool(value, key);
  } else if (key == "pushlist") {
    // pushlist = <domain> <path>[,<path>...]
    const auto w = words(value);
    if (w.size() != 2) throw ConfigError("pushlist expects '<domain> <path>,<path>...'", 0, key);
    auto& paths = d.pushlist[w[0]];
    for (const auto& p : split(w[1], ',')) {
      if (!trim(p).empty()) paths.push_back(trim(p));
    }
  } else if (key == "content_epoch_s") {
    d.epoch_length = from_s(parse_positive(value, key));
  } else if (key == "record_size") {
    const auto rs = parse_u32(value, key);
    if (rs < kMinRecordSize) throw ConfigError("record_size must be >= 18", 0, key);
    d.record_size = rs;
  } else if (key == "cache_capacity_bytes") {
    d.cache_capacity = parse_u64(value, key);
  } else if (key == "domain") {
    if (value.empty()) throw ConfigError("empty domain", 0, key);
    d.domain = value;
  } else if (key == "resource") {
    // resource = <domain>/<path> <size> [cacheable|nocache]
    const auto w = words(value);
    if (w.size() < 2 || w.size() > 3) {
      throw ConfigError("resource expects '<domain>/<path> <size> [cacheable|nocache]'", 0, key);
    }
    Resource r{parse_resource_id(w[0]), parse_u64(w[1], key), true};
    if (w.size() == 3) {
      if (w[2] == "nocache") {
        r.cacheable = false;
      } else if (w[2] != "cacheable") {
        throw ConfigError("resource flag must be cacheable or nocache", 0, key);
      }
    }
    auto it = std::find_if(d.resources.begin(), d.resources.end(),
                           [&](const Resource& x) { return x.rid == r.rid; });
    if (it != d.resources.end()) {
      *it = r;
    } else {
      d.resources.push_back(r);
    }
  } else if (key == "request") {
    // request = <time_ms> <client index> <domain>/<path>
    const auto w = words(value);
    if (w.size() != 3) throw ConfigError("request expects '<time_ms> <client> <domain>/<path>'", 0, key);
    requests.push_back({from_ms(parse_u64(w[0], key)), parse_u32(w[1], key), parse_resource_id(w[2])});
  } else if (key == "seed") {
    d.seed = parse_u64(value, key);
  } else if (key == "runs") {
    runs = parse_positive(value, key);
  } else if (key == "revocation_trials") {
    revocation_trials = parse_positive(value, key);
  } else {
    throw UnknownKnob("unknown knob '" + key + "'");
  }
}

std::vector<RowVariant> Scenario::variants() const {
  std::vector<RowVariant> out;
  std::set<std::string> seen;
  for (const auto& n : variant_names) {
    auto v = parse_row_variant(n, deployment.kx_mode, dns_cached);
    if (!seen.insert(v.label()).second) {
      throw ConfigError("variant '" + v.label() + "' listed twice", 0, "variant");
    }
    out.push_back(std::move(v));
  }
  return out;
}

// --- metrics ------------------------------------------------------------------

std::string MetricsRow::cache_hit_rate() const {
  if (cache_requests == 0) return "0.000";
  const auto permille = (cache_hits * 1000 + cache_requests / 2) / cache_requests;
  std::string frac = std::to_string(permille % 1000);
  frac.insert(0, 3 - frac.size(), '0');
  return std::to_string(permille / 1000) + "." + frac;
}

std::string MetricsRow::csv() const {
  std::ostringstream out;
  out << scenario << ',' << variant << ',' << run << ',' << format_ms(handshake) << ','
      << format_ms(page_load) << ',' << satellite_round_trips << ',' << satellite_bytes << ','
      << cache_hit_rate() << ',' << format_ms(revocation_window);
  return out.str();
}

std::string to_csv(const std::vector<MetricsRow>& rows) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : rows) out += r.csv() + '\n';
  return out;
}

std::optional<std::uint64_t> handshake_reduction_permille(const std::vector<MetricsRow>& rows) {
  const MetricsRow* vanilla = nullptr;
  const MetricsRow* dane = nullptr;
  for (const auto& r : rows) {
    const auto base = r.variant.substr(0, r.variant.find('/'));
    if (base == "vanilla" && !vanilla) vanilla = &r;
    if (base == "dane-cached" && !dane) dane = &r;
  }
  if (!vanilla || !dane || vanilla->handshake.count() == 0) return std::nullopt;
  const auto v = vanilla->handshake.count();
  const auto d = std::min(dane->handshake.count(), v);
  return ((v - d) * 1000 + v / 2) / v;
}

// --- revocation experiments ------------------------------------------------------------

SimTime DaneRevocation::window() const {
  if (!last_old_validation || *last_old_validation <= rotated_at) return SimTime{0};
  return *last_old_validation - rotated_at;
}

DaneRevocation dane_revocation_experiment(const DeploymentConfig& config, std::uint32_t trials,
                                          std::uint64_t seed) {
  auto cfg = config;
  cfg.topology.n_terminals = 1;
  cfg.topology.n_clients_per_terminal = 1;
  cfg.seed = seed;
  Deployment d(cfg);
  Rng rng(seed ^ 0x64616e65ULL);

  const auto ttl = cfg.tlsa_ttl;
  const NodeId client{Role::Client, 0};
  const NodeId terminal{Role::Terminal, 0};
  d.prefetch_tlsa();
  const auto t0 = d.sim().now();

  DaneRevocation out;
  out.rotated_at = t0 + ttl / 2 + SimTime{rng.uniform((3 * ttl / 2).count() + 1)};
  const auto horizon = out.rotated_at + ttl + ttl / 2;
  d.dns().schedule_refresh(terminal, horizon);

  const auto old_digest = d.delegated_cert().digest;
  const auto new_digest = crypto::sha256(concat({old_digest, as_bytes("rotated")}));
  d.sim().at(out.rotated_at, d.topology().auth_dns(),
             [&] { d.auth_dns().rotate_record(cfg.domain, new_digest); });

  std::vector<SimTime> starts;
  for (std::uint32_t i = 0; i < trials; ++i) {
    starts.push_back(t0 + SimTime{rng.uniform((horizon - t0).count())});
  }
  std::sort(starts.begin(), starts.end());
  for (auto at : starts) {
    d.sim().at(at, client, [&] {
      d.handshake(client, DaneTls{true}, [&](const HandshakeTrace& t) {
        ++out.handshakes;
        if (t.outcome != Outcome::Completed || !t.tlsa || t.tlsa->cert_digest != old_digest) return;
        ++out.validated_old;
        const auto when = t.validated_at.value_or(t.end);
        if (when > out.rotated_at) out.last_old_validation = std::max(out.last_old_validation.value_or(when), when);
      });
    });
  }
  d.sim().run();
  return out;
}

SimTime KeylessRevocation::window() const {
  return last_session_expiry > revoked_at ? last_session_expiry - revoked_at : SimTime{0};
}

KeylessRevocation keyless_revocation_experiment(const DeploymentConfig& config, std::uint32_t trials,
                                                std::uint64_t seed) {
  auto cfg = config;
  cfg.topology.n_terminals = 1;
  cfg.topology.n_clients_per_terminal = 1;
  cfg.seed = seed;
  Deployment d(cfg);
  Rng rng(seed ^ 0x6b65796cULL);

  const NodeId client{Role::Client, 0};
  const NodeId terminal{Role::Terminal, 0};
  d.establish_channels();
  const auto t0 = d.sim().now();
  const auto ttl = cfg.session_ttl;

  KeylessRevocation out;
  out.revoked_at = t0 + ttl / 4 + SimTime{rng.uniform(ttl.count() + 1)};
  const auto horizon = out.revoked_at + ttl + ttl / 2;
  d.sim().at(out.revoked_at, terminal, [&] { revoke(*d.channels().find(terminal, d.topology().server())); });

  const auto access = d.topology().one_way_delay(client, terminal);
  const auto& page = cfg.resources.at(0).rid;

  // Requests over a pre-revocation session, sent at random times after the
  // revocation: served while the session is live, refused once it expired.
  auto probe = [&](const SessionKeys& keys, SimTime expires) {
    for (int k = 0; k < 2; ++k) {
      const auto at = std::max(d.sim().now(), out.revoked_at + SimTime{rng.uniform((ttl + ttl / 2).count())});
      const bool live = at + access < expires;
      d.sim().at(at, client, [&, keys, live] {
        d.content().request(client, page, keys, FetchMode::Direct, 0, [&, live](const ContentResult& r) {
          if (!r.refused) {
            ++(live ? out.served_live : out.served_expired);
          } else if (live) {
            ++out.refused_live;
          }
        });
      });
    }
  };

  std::vector<SimTime> starts;
  for (std::uint32_t i = 0; i < trials; ++i) {
    starts.push_back(t0 + SimTime{rng.uniform((horizon - t0).count())});
  }
  std::sort(starts.begin(), starts.end());
  for (auto at : starts) {
    d.sim().at(at, client, [&, at] {
      d.handshake(client, KeylessTls{cfg.kx_mode}, [&, at](const HandshakeTrace& t) {
        const bool after = at >= out.revoked_at;
        if (t.outcome == Outcome::Completed) {
          if (after) {
            ++out.completed_after;
            return;
          }
          ++out.completed_before;
          const auto held = d.engine().session_at(terminal, t.flow);
          out.last_session_expiry = std::max(out.last_session_expiry, held->expires_at());
          probe(*t.session, held->expires_at());
        } else if (after) {
          ++out.refused_after;
        }
      });
    });
  }
  d.sim().run();
  return out;
}

// --- runner ------------------------------------------------------------------

namespace {

void validate(const Scenario& s) {
  if (s.deployment.resources.empty()) throw ConfigError("scenario defines no resources", 0, "resource");
  const auto clients = s.deployment.topology.n_terminals * s.deployment.topology.n_clients_per_terminal;
  for (const auto& r : s.requests) {
    if (r.client >= clients) {
      throw ConfigError("request names client " + std::to_string(r.client) + " but only " +
                            std::to_string(clients) + " exist",
                        0, "request");
    }
    const auto& res = s.deployment.resources;
    if (std::none_of(res.begin(), res.end(), [&](const Resource& x) { return x.rid == r.rid; })) {
      throw ConfigError("request names undefined resource " + to_string(r.rid), 0, "request");
    }
  }
  for (const auto& [domain, paths] : s.deployment.pushlist) {
    for (const auto& p : paths) {
      const auto& res = s.deployment.resources;
      if (std::none_of(res.begin(), res.end(), [&](const Resource& x) { return x.rid == ResourceId{domain, p}; })) {
        throw ConfigError("pushlist names undefined resource " + domain + "/" + p, 0, "pushlist");
      }
    }
  }
}

SimTime revocation_window(const Scenario& s, const HandshakeVariant& v, std::uint64_t seed,
                          std::map<std::pair<int, std::uint64_t>, SimTime>& memo) {
  const int kind = static_cast<int>(v.index());
  if (kind == 0) return SimTime{0};
  if (auto it = memo.find({kind, seed}); it != memo.end()) return it->second;

  SimTime window{0};
  if (std::holds_alternative<KeylessTls>(v)) {
    const auto r = keyless_revocation_experiment(s.deployment, s.revocation_trials, seed);
    if (r.completed_after || r.served_expired || r.refused_live) {
      throw InvariantViolation("keyless revocation: " + std::to_string(r.completed_after) +
                               " new handshakes completed, " + std::to_string(r.served_expired) +
                               " expired sessions served, " + std::to_string(r.refused_live) +
                               " live sessions refused");
    }
    window = r.window();
    if (window > s.deployment.session_ttl) throw InvariantViolation("keyless window exceeds session ttl");
  } else {
    const auto r = dane_revocation_experiment(s.deployment, s.revocation_trials, seed);
    window = r.window();
    if (window >= s.deployment.tlsa_ttl) throw InvariantViolation("DANE window reaches the TLSA ttl");
  }
  memo[{kind, seed}] = window;
  return window;
}

MetricsRow measure(const Scenario& s, const RowVariant& v, std::uint32_t run,
                   std::map<std::pair<int, std::uint64_t>, SimTime>& memo) {
  auto cfg = s.deployment;
  cfg.seed = s.deployment.seed + run;
  Deployment d(cfg);

  const bool split = !std::holds_alternative<VanillaTls>(v.handshake);
  const bool use_cache = v.ece_cache.value_or(false);
  if (std::holds_alternative<KeylessTls>(v.handshake)) d.establish_channels();
  if (auto* dane = std::get_if<DaneTls>(&v.handshake); dane && dane->dns_cached) d.prefetch_tlsa();
  if (use_cache) d.warm_caches();

  MetricsRow row;
  row.scenario = s.name;
  row.variant = v.label();
  row.run = run;

  const NodeId first{Role::Client, 0};
  const auto mark = d.sim().transmissions().size();
  const auto trace = d.run_handshake(first, v.handshake);
  row.handshake = trace.duration();
  row.satellite_round_trips = trace.satellite_round_trips;
  row.page_load = row.handshake;

  const auto mode = !split ? FetchMode::EndToEnd : use_cache ? FetchMode::EceCache : FetchMode::Direct;
  std::map<std::uint32_t, SessionKeys> sessions;
  if (trace.outcome == Outcome::Completed) {
    sessions[0] = *trace.session;
    std::optional<ContentResult> page;
    d.content().request(first, cfg.resources.front().rid, *trace.session, mode, trace.flow,
                        [&](const ContentResult& r) { page = r; });
    d.sim().run();
    if (!page || page->refused) throw InvariantViolation("page request was not served");
    if (page->plaintext != d.origin().content(cfg.resources.front().rid)) {
      throw InvariantViolation("page content altered in transit");
    }
    row.page_load += page->latency();
    ++row.cache_requests;
    if (page->hit) ++row.cache_hits;
  }

  if (!s.requests.empty() && trace.outcome == Outcome::Completed) {
    std::set<std::uint32_t> clients;
    for (const auto& r : s.requests) clients.insert(r.client);
    for (auto c : clients) {
      if (sessions.contains(c)) continue;
      d.handshake({Role::Client, c}, v.handshake, [&, c](const HandshakeTrace& t) {
        if (t.outcome == Outcome::Completed) sessions[c] = *t.session;
      });
    }
    d.sim().run();
    const auto t1 = d.sim().now();
    for (const auto& r : s.requests) {
      if (!sessions.contains(r.client)) continue;
      d.sim().at(t1 + r.at, {Role::Client, r.client}, [&, r] {
        d.content().request({Role::Client, r.client}, r.rid, sessions.at(r.client), mode, 0,
                            [&](const ContentResult& res) {
                              ++row.cache_requests;
                              if (res.hit) ++row.cache_hits;
                            });
      });
    }
    d.sim().run();
  }

  const auto& log = d.sim().transmissions();
  for (std::size_t i = mark; i < log.size(); ++i) {
    if (log[i].satellite) row.satellite_bytes += log[i].bytes;
  }
  row.revocation_window = revocation_window(s, v.handshake, cfg.seed, memo);
  return row;
}

}  // namespace

std::vector<MetricsRow> run_scenario(const Scenario& s) {
  validate(s);
  const auto variants = s.variants();
  std::map<std::pair<int, std::uint64_t>, SimTime> memo;
  std::vector<MetricsRow> rows;
  for (const auto& v : variants) {
    for (std::uint32_t run = 0; run < s.runs; ++run) rows.push_back(measure(s, v, run, memo));
  }
  return rows;
}

std::vector<MetricsRow> sweep(const std::string& param, const std::vector<std::string>& values,
                              const Scenario& base) {
  const auto& knobs = scenario_knobs();
  if (std::find(knobs.begin(), knobs.end(), param) == knobs.end() || param == "name") {
    throw UnknownKnob("unknown sweep parameter '" + param + "'");
  }
  if (values.empty()) throw ConfigError("sweep needs at least one value", 0, "values");
  std::vector<MetricsRow> rows;
  for (const auto& value : values) {
    auto s = base;
    if (param == "resource") s.deployment.resources.clear();
    s.apply(param, value);
    s.name = base.name + ":" + param + "=" + value;
    auto block = run_scenario(s);
    rows.insert(rows.end(), block.begin(), block.end());
  }
  return rows;
}

}  // namespace satsplit
