#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "satsplit/error.hpp"
#include "satsplit/scenario.hpp"

using namespace satsplit;

namespace {

const MetricsRow& row(const std::vector<MetricsRow>& rows, const std::string& variant) {
  for (const auto& r : rows) {
    if (r.variant == variant) return r;
  }
  throw std::runtime_error("no row " + variant);
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Presets, Fig4AndFig5) {
  const auto f4 = Scenario::preset("fig4");
  EXPECT_EQ(f4.variants().size(), 4u);
  const auto f5 = Scenario::preset("fig5");
  std::vector<std::string> labels;
  for (const auto& v : f5.variants()) labels.push_back(v.label());
  EXPECT_EQ(labels, (std::vector<std::string>{"vanilla/direct", "keyless/ece-cache", "keyless/direct",
                                              "dane-uncached/ece-cache", "dane-uncached/direct",
                                              "dane-cached/ece-cache", "dane-cached/direct"}));
  EXPECT_THROW(Scenario::preset("fig6"), ConfigError);
  EXPECT_THROW(Scenario::load("/nonexistent/scenario.conf"), ConfigError);
}

TEST(RowVariants, Parsing) {
  EXPECT_EQ(parse_row_variant("dane", KxMode::RsaDecrypt, false).label(), "dane-uncached");
  EXPECT_EQ(parse_row_variant("dane", KxMode::RsaDecrypt, true).label(), "dane-cached");
  const auto k = parse_row_variant("keyless/ece-cache", KxMode::EcdheSign, true);
  EXPECT_EQ(std::get<KeylessTls>(k.handshake).mode, KxMode::EcdheSign);
  EXPECT_EQ(k.ece_cache, std::optional<bool>(true));
  EXPECT_EQ(parse_row_variant("keyless", KxMode::RsaDecrypt, true).ece_cache, std::nullopt);
  EXPECT_THROW(parse_row_variant("vanilla/ece-cache", KxMode::RsaDecrypt, true), ConfigError);
  EXPECT_THROW(parse_row_variant("keyless/sometimes", KxMode::RsaDecrypt, true), ConfigError);
  EXPECT_THROW(parse_row_variant("quic", KxMode::RsaDecrypt, true), ConfigError);
}

TEST(ScenarioText, KnobsAreApplied) {
  const auto s = Scenario::parse(
      "# comment\n"
      "name = probe\n"
      "variants = vanilla, dane\n"
      "dns_cached = false\n"
      "sat_rtt_ms = 600\n"
      "terr_rtt_ms = 30\n"
      "n_terminals = 3\n"
      "handshake_rtts = 1\n"
      "kx_mode = ecdhe-sign\n"
      "resource = video.example/a.js 2048 nocache\n"
      "resource = video.example/b.css 100\n"
      "request = 5 0 video.example/a.js\n"
      "pushlist = video.example a.js,b.css\n"
      "seed = 9\n"
      "runs = 2\n");
  EXPECT_EQ(s.name, "probe");
  EXPECT_EQ(s.variant_names, (std::vector<std::string>{"vanilla", "dane"}));
  EXPECT_FALSE(s.dns_cached);
  EXPECT_EQ(s.deployment.topology.sat_rtt, from_ms(600));
  EXPECT_EQ(s.deployment.topology.access_rtt, from_ms(30));
  EXPECT_EQ(s.deployment.topology.backhaul_rtt, from_ms(30));
  EXPECT_EQ(s.deployment.topology.n_terminals, 3u);
  EXPECT_EQ(s.deployment.handshake_rtts, 1u);
  EXPECT_EQ(s.deployment.kx_mode, KxMode::EcdheSign);
  ASSERT_EQ(s.deployment.resources.size(), 2u);
  EXPECT_FALSE(s.deployment.resources[0].cacheable);
  EXPECT_EQ(s.deployment.resources[1].size, 100u);
  ASSERT_EQ(s.requests.size(), 1u);
  EXPECT_EQ(s.requests[0].at, from_ms(5));
  EXPECT_EQ(s.deployment.pushlist.at("video.example").size(), 2u);
  EXPECT_EQ(s.deployment.seed, 9u);
  EXPECT_EQ(s.runs, 2u);
}

TEST(ScenarioText, PresetAppliesFirst) {
  const auto s = Scenario::parse("sat_rtt_ms = 100\npreset = fig5\n");
  EXPECT_EQ(s.name, "fig5");
  EXPECT_EQ(s.deployment.topology.sat_rtt, from_ms(100));
}

TEST(ScenarioText, ErrorsCarryLineAndField) {
  try {
    Scenario::parse("name = x\n\nwarp_factor = 9\n");
    FAIL() << "no error";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.field(), "warp_factor");
  }
  try {
    Scenario::parse("sat_rtt_ms = fast\n");
    FAIL() << "no error";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 1u);
    EXPECT_EQ(e.field(), "sat_rtt_ms");
  }
  try {
    Scenario::parse("preset = fig9\n");
    FAIL() << "no error";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
  EXPECT_THROW(Scenario::parse("handshake_rtts = 3\n"), ConfigError);
  EXPECT_THROW(Scenario::parse("record_size = 17\n"), ConfigError);
  EXPECT_THROW(Scenario::parse("sat_rtt_ms = 0\n"), ConfigError);
  EXPECT_THROW(Scenario::parse("resource = nopath 10\n"), ConfigError);
}

TEST(ScenarioText, ApplyRejectsUnknownKnobs) {
  Scenario s;
  EXPECT_THROW(s.apply("warp_factor", "9"), UnknownKnob);
  for (const auto& k : scenario_knobs()) {
    try {
      s.apply(k, "x");
    } catch (const UnknownKnob&) {
      ADD_FAILURE() << k;
    } catch (const Error&) {
    }
  }
}

TEST(ScenarioText, ValidationHappensBeforeRunning) {
  auto s = Scenario::parse("request = 0 7 video.example/index.html\n");
  EXPECT_THROW(run_scenario(s), ConfigError);
  s = Scenario::parse("request = 0 0 video.example/missing\n");
  EXPECT_THROW(run_scenario(s), ConfigError);
  EXPECT_THROW(Scenario::parse("variants = keyless, keyless\n"), ConfigError);
}

TEST(Metrics, HitRateFormatting) {
  MetricsRow r;
  EXPECT_EQ(r.cache_hit_rate(), "0.000");
  r.cache_requests = 3;
  r.cache_hits = 2;
  EXPECT_EQ(r.cache_hit_rate(), "0.667");
  r.cache_hits = 3;
  EXPECT_EQ(r.cache_hit_rate(), "1.000");
  r.scenario = "s";
  r.variant = "keyless";
  r.handshake = SimTime{1500};
  EXPECT_EQ(r.csv(), "s,keyless,0,1.500,0.000,0,0,1.000,0.000");
}

TEST(Runs, Fig4Rows) {
  const auto rows = run_scenario(Scenario::preset("fig4"));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(row(rows, "vanilla").handshake, from_ms(1620));
  EXPECT_EQ(row(rows, "keyless").handshake, from_ms(580));
  EXPECT_EQ(row(rows, "dane-uncached").handshake, from_ms(600));
  EXPECT_EQ(row(rows, "dane-cached").handshake, from_ms(80));
  EXPECT_EQ(row(rows, "vanilla").satellite_round_trips, 3u);
  EXPECT_EQ(row(rows, "keyless").satellite_round_trips, 1u);
  EXPECT_EQ(row(rows, "dane-uncached").satellite_round_trips, 1u);
  EXPECT_EQ(row(rows, "dane-cached").satellite_round_trips, 0u);
  EXPECT_EQ(row(rows, "vanilla").revocation_window, SimTime{0});
  EXPECT_LE(row(rows, "keyless").revocation_window, kDefaultSessionTtl);
  EXPECT_LT(row(rows, "dane-cached").revocation_window, kDefaultTlsaTtl);
  EXPECT_EQ(handshake_reduction_permille(rows), std::optional<std::uint64_t>(951));
}

TEST(Runs, Fig5Rows) {
  const auto rows = run_scenario(Scenario::preset("fig5"));
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(row(rows, "vanilla/direct").page_load, from_ms(2160));
  EXPECT_EQ(row(rows, "keyless/ece-cache").page_load, from_ms(600));
  EXPECT_EQ(row(rows, "keyless/direct").page_load, from_ms(1120));
  EXPECT_EQ(row(rows, "dane-uncached/ece-cache").page_load, from_ms(620));
  EXPECT_EQ(row(rows, "dane-uncached/direct").page_load, from_ms(1140));
  EXPECT_EQ(row(rows, "dane-cached/ece-cache").page_load, from_ms(100));
  EXPECT_EQ(row(rows, "dane-cached/direct").page_load, from_ms(620));
  EXPECT_EQ(row(rows, "dane-cached/ece-cache").satellite_bytes, 0u);
  EXPECT_EQ(row(rows, "dane-cached/ece-cache").cache_hit_rate(), "1.000");
  EXPECT_EQ(row(rows, "dane-cached/direct").cache_hit_rate(), "0.000");
  for (const auto& r : rows) EXPECT_LE(r.handshake, r.page_load);
}

TEST(Runs, CsvIsDeterministic) {
  auto s = Scenario::preset("fig5");
  s.runs = 2;
  const auto a = to_csv(run_scenario(s));
  const auto b = to_csv(run_scenario(s));
  EXPECT_EQ(a, b);
  const auto ls = lines(a);
  ASSERT_EQ(ls.size(), 15u);
  EXPECT_EQ(ls[0], kCsvHeader);
  EXPECT_EQ(ls[1].rfind("fig5,vanilla/direct,0,1620.000,2160.000,", 0), 0u);
  EXPECT_EQ(ls[2].rfind("fig5,vanilla/direct,1,", 0), 0u);
}

TEST(Runs, ExtraRequestsCountTowardsTheHitRate) {
  auto s = Scenario::parse(
      "variants = dane-cached/ece-cache, dane-cached/direct\n"
      "n_terminals = 2\n"
      "request = 0 0 video.example/index.html\n"
      "request = 100 1 video.example/index.html\n"
      "request = 200 1 video.example/index.html\n");
  const auto rows = run_scenario(s);
  EXPECT_EQ(row(rows, "dane-cached/ece-cache").cache_hit_rate(), "1.000");
  EXPECT_EQ(row(rows, "dane-cached/direct").cache_hit_rate(), "0.000");
  EXPECT_GT(row(rows, "dane-cached/direct").satellite_bytes, 3u * 10 * 1024);
}

TEST(Sweeps, LabelsAndValues) {
  const auto rows = sweep("sat_rtt_ms", {"250", "500"}, Scenario::preset("fig4"));
  ASSERT_EQ(rows.size(), 8u);
  EXPECT_EQ(rows[0].scenario, "fig4:sat_rtt_ms=250");
  EXPECT_EQ(rows[0].variant, "vanilla");
  EXPECT_EQ(rows[0].handshake, from_ms(3 * 290));
  EXPECT_EQ(rows[4].scenario, "fig4:sat_rtt_ms=500");
  EXPECT_EQ(rows[4].handshake, from_ms(1620));
  EXPECT_THROW(sweep("warp_factor", {"1"}, Scenario::preset("fig4")), UnknownKnob);
  EXPECT_THROW(sweep("sat_rtt_ms", {}, Scenario::preset("fig4")), ConfigError);
}

TEST(Sweeps, SeedDoesNotMoveTimings) {
  const auto rows = sweep("seed", {"1", "2", "3"}, Scenario::preset("fig4"));
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i].handshake, rows[i % 4].handshake);
}

TEST(RevocationExperiments, KeylessRefusesEverythingAfterRevocation) {
  DeploymentConfig cfg;
  std::uint32_t served_live = 0, served_expired_probes = 0;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto r = keyless_revocation_experiment(cfg, 24, seed);
    served_live += r.served_live;
    served_expired_probes += r.completed_before * 2 - r.served_live - r.refused_live;
    EXPECT_EQ(r.completed_after, 0u);
    EXPECT_EQ(r.served_expired, 0u);
    EXPECT_EQ(r.refused_live, 0u);
    EXPECT_LE(r.window(), cfg.session_ttl);
    EXPECT_GT(r.completed_before + r.refused_after, 0u);
  }
  // Established sessions keep working after revocation, until they expire.
  EXPECT_GT(served_live, 0u);
  EXPECT_GT(served_expired_probes, 0u);
}

#ifdef SATSPLIT_CLI_PATH

namespace {

int cli(const std::string& args) {
  const auto cmd = std::string(SATSPLIT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("satsplit-test-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "-" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST(Cli, RunWritesTheLibraryCsv) {
  TempDir t;
  const auto out = t.path / "fig4.csv";
  ASSERT_EQ(cli("run --scenario fig4 --out " + out.string()), 0);
  EXPECT_EQ(slurp(out), to_csv(run_scenario(Scenario::preset("fig4"))));
}

TEST(Cli, OverridesAndSweep) {
  TempDir t;
  const auto out = t.path / "sweep.csv";
  ASSERT_EQ(cli("sweep --param sat_rtt_ms --values 250,500 --out " + out.string()), 0);
  EXPECT_EQ(lines(slurp(out)).size(), 9u);
  const auto over = t.path / "over.csv";
  ASSERT_EQ(cli("run --scenario fig4 --sat-rtt-ms 250 --out " + over.string()), 0);
  EXPECT_EQ(lines(slurp(over))[1].rfind("fig4,vanilla,0,870.000,", 0), 0u);
}

TEST(Cli, ScenarioFile) {
  TempDir t;
  const auto conf = t.path / "s.conf";
  std::ofstream(conf) << "name = file\nvariants = dane-cached\n";
  const auto out = t.path / "s.csv";
  ASSERT_EQ(cli("run --scenario " + conf.string() + " --out " + out.string()), 0);
  EXPECT_EQ(lines(slurp(out))[1].rfind("file,dane-cached,0,80.000,", 0), 0u);
}

TEST(Cli, ConfigProblemsExitWithTwo) {
  TempDir t;
  const auto out = (t.path / "x.csv").string();
  EXPECT_EQ(cli("run --scenario nope.conf --out " + out), 2);
  EXPECT_EQ(cli("sweep --param warp --values 1 --out " + out), 2);
  EXPECT_EQ(cli("run --scenario fig4"), 2);
  EXPECT_EQ(cli("run --scenario fig4 --sat-rtt-ms 0 --out " + out), 2);
  EXPECT_EQ(cli("frobnicate"), 2);
  const auto bad = t.path / "bad.conf";
  std::ofstream(bad) << "variants = vanilla/ece-cache\n";
  EXPECT_EQ(cli("run --scenario " + bad.string() + " --out " + out), 2);
}

TEST(Cli, EceRoundTrip) {
  TempDir t;
  const auto plain = t.path / "plain.txt";
  const auto enc = t.path / "body.bin";
  const auto dec = t.path / "plain.out";
  std::string text(5000, 'x');
  std::ofstream(plain) << text;
  const std::string key = "00112233445566778899aabbccddeeff";
  ASSERT_EQ(cli("ece encrypt --in " + plain.string() + " --out " + enc.string() + " --key-hex " + key +
                " --keyid k1 --rs 100 --salt-hex 000102030405060708090a0b0c0d0e0f"),
            0);
  ASSERT_EQ(cli("ece decrypt --in " + enc.string() + " --out " + dec.string() + " --key-hex " + key), 0);
  EXPECT_EQ(slurp(dec), text);

  const auto wire = slurp(enc);
  ContentKey k;
  const auto ikm = from_hex(key);
  std::copy(ikm.begin(), ikm.end(), k.ikm.begin());
  k.keyid = {'k', '1'};
  Salt salt;
  for (std::size_t i = 0; i < salt.size(); ++i) salt[i] = static_cast<std::uint8_t>(i);
  const auto expect = ece_encrypt(as_bytes(text), k, 100, salt).serialize();
  EXPECT_EQ(wire, std::string(expect.begin(), expect.end()));

  EXPECT_EQ(cli("ece decrypt --in " + enc.string() + " --out " + dec.string() +
                " --key-hex ffffffffffffffffffffffffffffffff"),
            1);
  EXPECT_EQ(cli("ece encrypt --in " + plain.string() + " --out " + enc.string() + " --key-hex 00"), 2);
}

#endif
