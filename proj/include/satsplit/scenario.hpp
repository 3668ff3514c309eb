#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "satsplit/cachecast.hpp"
#include "satsplit/config.hpp"
#include "satsplit/deployment.hpp"
#include "satsplit/tls.hpp"

namespace satsplit {

inline constexpr std::string_view kCsvHeader =
    "scenario,variant,run,handshake_ms,page_load_ms,satellite_round_trips,satellite_bytes,"
    "cache_hit_rate,revocation_window_ms";

/// One CSV row family: a handshake variant plus, optionally, how the page
/// object is fetched.  Written "keyless", "dane-cached/ece-cache", ...
struct RowVariant {
  HandshakeVariant handshake;
  /// Unset: the object is fetched from the origin (as with "direct").
  std::optional<bool> ece_cache;

  std::string label() const;
};

/// Accepts vanilla, keyless, dane (uses `dns_cached`), dane-cached and
/// dane-uncached, each optionally suffixed /ece-cache or /direct.
RowVariant parse_row_variant(std::string_view text, KxMode kx_mode, bool dns_cached);

struct RequestSpec {
  SimTime at{0};
  std::uint32_t client = 0;
  ResourceId rid;
};

struct Scenario {
  std::string name = "custom";
  DeploymentConfig deployment;
  std::vector<std::string> variant_names{"vanilla", "keyless", "dane-uncached", "dane-cached"};
  bool dns_cached = true;
  /// Extra object requests issued after the page load, relative to the moment
  /// every requesting client has its own session.
  std::vector<RequestSpec> requests;
  std::uint32_t runs = 1;
  /// Handshakes per randomized revocation experiment.
  std::uint32_t revocation_trials = 24;

  /// Built-in presets: fig4, fig5.  Throws ConfigError for anything else.
  static Scenario preset(std::string_view name);
  /// Key/value scenario text.  `preset = <name>` selects the starting point
  /// wherever it appears; other keys are applied in file order.
  static Scenario parse(std::string_view text);
  /// A preset name or the path of a scenario file.
  static Scenario load(const std::string& name_or_path);

  /// Sets one knob.  Throws UnknownKnob for unrecognized keys and ConfigError
  /// for malformed values.
  void apply(const std::string& key, const std::string& value);

  std::vector<RowVariant> variants() const;
};

/// Every key accepted by Scenario::apply.
const std::vector<std::string>& scenario_knobs();

struct MetricsRow {
  std::string scenario;
  std::string variant;
  std::uint32_t run = 0;
  SimTime handshake{0};
  SimTime page_load{0};
  std::uint32_t satellite_round_trips = 0;
  std::uint64_t satellite_bytes = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t cache_requests = 0;
  SimTime revocation_window{0};

  /// Three decimals, computed with integer arithmetic.
  std::string cache_hit_rate() const;
  std::string csv() const;
};

/// Rows ordered by (variant order in the scenario, run index).  Throws
/// InvariantViolation when a protocol property fails during the run.
std::vector<MetricsRow> run_scenario(const Scenario& s);

/// Runs `base` once per value of `param`; each block of rows is labelled
/// "<name>:<param>=<value>".  Throws UnknownKnob.
std::vector<MetricsRow> sweep(const std::string& param, const std::vector<std::string>& values,
                              const Scenario& base);

std::string to_csv(const std::vector<MetricsRow>& rows);

/// 1 - dane-cached / vanilla handshake time, in tenths of a percent, taken
/// from the first run of each; nullopt when either row is missing.
std::optional<std::uint64_t> handshake_reduction_permille(const std::vector<MetricsRow>& rows);

struct DaneRevocation {
  SimTime rotated_at{0};
  /// Last successful validation against the rotated-away digest, if any
  /// happened after the rotation.
  std::optional<SimTime> last_old_validation;
  std::uint32_t handshakes = 0;
  std::uint32_t validated_old = 0;

  SimTime window() const;
};

/// Handshakes at random times against a terminal that keeps presenting its
/// certificate after the origin rotated the TLSA record away from it.
DaneRevocation dane_revocation_experiment(const DeploymentConfig& config, std::uint32_t trials,
                                          std::uint64_t seed);

struct KeylessRevocation {
  SimTime revoked_at{0};
  std::uint32_t completed_before = 0;
  /// Handshakes started after the revocation that still completed; must be 0.
  std::uint32_t completed_after = 0;
  std::uint32_t refused_after = 0;
  /// Latest expiry among sessions established before revocation.
  SimTime last_session_expiry{0};
  /// Requests over pre-revocation sessions: served while the session was
  /// live, refused once it had expired.
  std::uint32_t served_live = 0;
  std::uint32_t served_expired = 0;
  std::uint32_t refused_live = 0;

  SimTime window() const;
};

KeylessRevocation keyless_revocation_experiment(const DeploymentConfig& config, std::uint32_t trials,
                                                std::uint64_t seed);

}  // namespace satsplit
