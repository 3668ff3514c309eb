#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>

#include "satsplit/deployment.hpp"
#include "satsplit/ece.hpp"
#include "satsplit/error.hpp"
#include "satsplit/scenario.hpp"

namespace py = pybind11;
using namespace satsplit;

namespace {

double ms(SimTime t) { return static_cast<double>(t.count()) / 1000.0; }

DeploymentConfig config_for(double sat_rtt_ms, double terr_rtt_ms, unsigned handshake_rtts, bool tcp_connect) {
  DeploymentConfig cfg;
  cfg.topology.sat_rtt = SimTime{static_cast<std::int64_t>(sat_rtt_ms * 1000)};
  cfg.topology.access_rtt = SimTime{static_cast<std::int64_t>(terr_rtt_ms * 1000)};
  cfg.topology.backhaul_rtt = cfg.topology.access_rtt;
  cfg.handshake_rtts = handshake_rtts;
  cfg.tcp_connect = tcp_connect;
  return cfg;
}

py::dict trace_dict(const HandshakeTrace& t) {
  py::list flights;
  for (const auto& f : t.flights) {
    py::dict d;
    d["label"] = f.label;
    d["from"] = to_string(f.from);
    d["to"] = to_string(f.to);
    d["sent_ms"] = ms(f.sent_at - t.start);
    d["arrive_ms"] = ms(f.arrive_at - t.start);
    d["bytes"] = f.bytes;
    d["satellite"] = f.satellite;
    flights.append(d);
  }
  py::dict out;
  out["variant"] = variant_name(t.variant);
  out["outcome"] = to_string(t.outcome);
  out["duration_ms"] = ms(t.duration());
  out["satellite_round_trips"] = t.satellite_round_trips;
  out["intercepted"] = t.intercepted;
  out["flights"] = flights;
  return out;
}

ContentKey key_of(const py::bytes& key, const py::bytes& keyid) {
  const auto raw = std::string(key);
  if (raw.size() != 16) throw InvalidParameter("key must be 16 bytes");
  ContentKey k;
  std::copy(raw.begin(), raw.end(), k.ikm.begin());
  const auto id = std::string(keyid);
  k.keyid.assign(id.begin(), id.end());
  return k;
}

py::bytes to_py(const Bytes& b) { return {reinterpret_cast<const char*>(b.data()), b.size()}; }

}  // namespace

PYBIND11_MODULE(_satsplit, m) {
  m.doc() = "Split-TLS over satellite simulator";

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  static py::exception<ConfigError> config_error(m, "ConfigError", error.ptr());
  static py::exception<UnknownKnob> unknown_knob(m, "UnknownKnob", config_error.ptr());
  static py::exception<InvalidParameter> invalid(m, "InvalidParameter", error.ptr());
  static py::exception<InvariantViolation> invariant(m, "InvariantViolation", error.ptr());
  static py::exception<AuthenticationFailure> auth(m, "AuthenticationFailure", error.ptr());
  static py::exception<FramingError> framing(m, "FramingError", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const UnknownKnob& e) {
      py::set_error(unknown_knob, e.what());
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const InvalidParameter& e) {
      py::set_error(invalid, e.what());
    } catch (const InvariantViolation& e) {
      py::set_error(invariant, e.what());
    } catch (const AuthenticationFailure& e) {
      py::set_error(auth, e.what());
    } catch (const FramingError& e) {
      py::set_error(framing, e.what());
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.attr("CSV_HEADER") = std::string(kCsvHeader);

  m.def("knobs", &scenario_knobs);

  m.def(
      "handshake",
      [](const std::string& variant, double sat_rtt_ms, double terr_rtt_ms, unsigned handshake_rtts,
         bool tcp_connect) {
        Deployment d(config_for(sat_rtt_ms, terr_rtt_ms, handshake_rtts, tcp_connect));
        return trace_dict(d.run_handshake({Role::Client, 0}, parse_variant(variant)));
      },
      py::arg("variant"), py::arg("sat_rtt_ms") = 500.0, py::arg("terr_rtt_ms") = 20.0,
      py::arg("handshake_rtts") = 2, py::arg("tcp_connect") = true);

  m.def(
      "page_load",
      [](const std::string& variant, bool ece_cache, double sat_rtt_ms, double terr_rtt_ms) {
        const auto p = page_load(parse_variant(variant), ece_cache, config_for(sat_rtt_ms, terr_rtt_ms, 2, true));
        py::dict out;
        out["handshake_ms"] = ms(p.handshake.duration());
        out["content_ms"] = ms(p.content.latency());
        out["total_ms"] = ms(p.total);
        out["cache_hit"] = p.content.hit;
        out["satellite_bytes"] = p.satellite_bytes;
        return out;
      },
      py::arg("variant"), py::arg("ece_cache") = false, py::arg("sat_rtt_ms") = 500.0,
      py::arg("terr_rtt_ms") = 20.0);

  m.def(
      "run",
      [](const std::string& scenario, const std::optional<std::string>& text) {
        const auto s = text ? Scenario::parse(*text) : Scenario::load(scenario);
        py::gil_scoped_release release;
        return to_csv(run_scenario(s));
      },
      py::arg("scenario") = "fig4", py::arg("text") = std::nullopt,
      "CSV for a preset or scenario file; pass text= to parse scenario text instead.");

  m.def(
      "sweep",
      [](const std::string& param, const std::vector<std::string>& values, const std::string& scenario) {
        const auto s = Scenario::load(scenario);
        py::gil_scoped_release release;
        return to_csv(sweep(param, values, s));
      },
      py::arg("param"), py::arg("values"), py::arg("scenario") = "fig4");

  m.def(
      "ece_encrypt",
      [](const py::bytes& data, const py::bytes& key, const py::bytes& keyid, std::uint32_t rs,
         const std::optional<py::bytes>& salt) {
        Salt s{};
        if (salt) {
          const auto raw = std::string(*salt);
          if (raw.size() != s.size()) throw InvalidParameter("salt must be 16 bytes");
          std::copy(raw.begin(), raw.end(), s.begin());
        } else {
          const auto r = crypto::random_bytes(s.size());
          std::copy(r.begin(), r.end(), s.begin());
        }
        const auto plain = std::string(data);
        return to_py(ece_encrypt(as_bytes(plain), key_of(key, keyid), rs, s).serialize());
      },
      py::arg("data"), py::arg("key"), py::arg("keyid") = py::bytes(), py::arg("rs") = kDefaultRecordSize,
      py::arg("salt") = std::nullopt);

  m.def(
      "ece_decrypt",
      [](const py::bytes& body, const py::bytes& key) {
        const auto wire = std::string(body);
        const auto header = EceHeader::parse(as_bytes(wire));
        const auto k = key_of(key, py::bytes(reinterpret_cast<const char*>(header.keyid.data()), header.keyid.size()));
        return to_py(ece_decrypt(as_bytes(wire), [&](ByteView) -> std::optional<ContentKey> { return k; }));
      },
      py::arg("body"), py::arg("key"));
}
