#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>

#include "satsplit/crypto.hpp"
#include "satsplit/ece.hpp"
#include "satsplit/error.hpp"
#include "satsplit/scenario.hpp"

namespace {

using namespace satsplit;

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitInvariant = 3;

struct Overrides {
  std::optional<std::uint64_t> sat_rtt_ms;
  std::optional<std::uint64_t> terr_rtt_ms;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint32_t> runs;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--sat-rtt-ms", sat_rtt_ms, "Terminal-gateway round trip (ms)");
    cmd.add_option("--terr-rtt-ms", terr_rtt_ms, "Round trip of each terrestrial hop (ms)");
    cmd.add_option("--seed", seed, "RNG seed");
    cmd.add_option("--runs", runs, "Runs per variant");
  }

  void apply(Scenario& s) const {
    if (sat_rtt_ms) s.apply("sat_rtt_ms", std::to_string(*sat_rtt_ms));
    if (terr_rtt_ms) s.apply("terr_rtt_ms", std::to_string(*terr_rtt_ms));
    if (seed) s.apply("seed", std::to_string(*seed));
    if (runs) s.apply("runs", std::to_string(*runs));
  }
};

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::string& path, ByteView data) {
  if (path == "-") {
    std::cout.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

void emit(const std::vector<MetricsRow>& rows, const std::string& out) {
  const auto csv = to_csv(rows);
  write_file(out, as_bytes(csv));
  if (auto r = handshake_reduction_permille(rows)) {
    std::cerr << "dane-cached handshake reduction vs vanilla: " << *r / 10 << '.' << *r % 10 << "%\n";
  }
}

ContentKey cli_key(const std::string& key_hex, const std::string& keyid) {
  const auto ikm = from_hex(key_hex);
  if (ikm.size() != 16) throw ConfigError("--key-hex must be 16 octets (32 hex digits)", 0, "key-hex");
  ContentKey key;
  std::copy(ikm.begin(), ikm.end(), key.ikm.begin());
  key.keyid.assign(keyid.begin(), keyid.end());
  return key;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Split-TLS over satellite: scenario runner and ECE codec"};
  app.require_subcommand(1);

  std::string scenario_name;
  std::string out_path;
  Overrides run_over;
  auto* run = app.add_subcommand("run", "Run a preset or scenario file and write CSV");
  run->add_option("--scenario", scenario_name, "fig4, fig5 or a scenario file")->required();
  run->add_option("--out", out_path, "CSV output path ('-' for stdout)")->required();
  run_over.add_to(*run);

  std::string sweep_scenario = "fig4";
  std::string sweep_param;
  std::string sweep_values;
  std::string sweep_out;
  Overrides sweep_over;
  auto* sw = app.add_subcommand("sweep", "Re-run a scenario over several values of one knob");
  sw->add_option("--scenario", sweep_scenario, "fig4, fig5 or a scenario file")->capture_default_str();
  sw->add_option("--param", sweep_param, "Knob to vary")->required();
  sw->add_option("--values", sweep_values, "Comma-separated values")->required();
  sw->add_option("--out", sweep_out, "CSV output path ('-' for stdout)")->required();
  sweep_over.add_to(*sw);

  std::string in_path;
  std::string ece_out;
  std::string key_hex;
  std::string keyid;
  std::string salt_hex;
  std::uint32_t rs = kDefaultRecordSize;
  auto* ece = app.add_subcommand("ece", "RFC 8188 aes128gcm encoding");
  ece->require_subcommand(1);
  auto* enc = ece->add_subcommand("encrypt", "Encode a file");
  auto* dec = ece->add_subcommand("decrypt", "Decode a file");
  for (auto* c : {enc, dec}) {
    c->add_option("--in", in_path, "Input file")->required();
    c->add_option("--out", ece_out, "Output file ('-' for stdout)")->required();
    c->add_option("--key-hex", key_hex, "16-octet input keying material, hex")->required();
    c->add_option("--keyid", keyid, "Key identifier");
  }
  enc->add_option("--salt-hex", salt_hex, "16-octet salt, hex (random if omitted)");
  enc->add_option("--rs", rs, "Record size")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (run->parsed()) {
      auto s = Scenario::load(scenario_name);
      run_over.apply(s);
      emit(run_scenario(s), out_path);
    } else if (sw->parsed()) {
      auto s = Scenario::load(sweep_scenario);
      sweep_over.apply(s);
      std::vector<std::string> values;
      for (const auto& v : split(sweep_values, ',')) {
        if (!trim(v).empty()) values.push_back(trim(v));
      }
      emit(sweep(sweep_param, values, s), sweep_out);
    } else if (enc->parsed()) {
      const auto key = cli_key(key_hex, keyid);
      Salt salt{};
      if (salt_hex.empty()) {
        const auto r = crypto::random_bytes(salt.size());
        std::copy(r.begin(), r.end(), salt.begin());
      } else {
        const auto s = from_hex(salt_hex);
        if (s.size() != salt.size()) throw ConfigError("--salt-hex must be 16 octets", 0, "salt-hex");
        std::copy(s.begin(), s.end(), salt.begin());
      }
      write_file(ece_out, ece_encrypt(read_file(in_path), key, rs, salt).serialize());
    } else if (dec->parsed()) {
      const auto wire = read_file(in_path);
      const auto header = EceHeader::parse(wire);
      const auto key = cli_key(key_hex, keyid.empty() ? std::string(header.keyid.begin(), header.keyid.end()) : keyid);
      const auto plaintext = ece_decrypt(wire, [&](ByteView id) -> std::optional<ContentKey> {
        if (!std::equal(id.begin(), id.end(), key.keyid.begin(), key.keyid.end())) return std::nullopt;
        return key;
      });
      write_file(ece_out, plaintext);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const UnknownKnob& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidParameter& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violated: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return 0;
}
