#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <map>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "spinforge/commands.hpp"
#include "spinforge/fitting.hpp"
#include "spinforge/io.hpp"

using namespace spinforge;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("spinforge_cli_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

double max_of(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

}  // namespace

TEST_CASE("every command is byte-for-byte reproducible", "[cli][determinism]") {
  TempDir dir;
  const std::vector<std::vector<std::string>> commands = {
      {"sites", "list"},
      {"sites", "show", "6H:gamma"},
      {"levels", "--site", "4H:beta", "--b-range", "0:50mT:51"},
      {"odmr", "--site", "4H:beta", "--b-range", "0:20mT:5", "--f-range", "0:1500MHz:301"},
      {"esr", "--site", "4H:beta", "--angles", "0:90:4", "--b-range", "0:1.2T:301"},
      {"lineshape", "--site", "4H:beta", "--grid", "-20:80GHz:201", "--noise", "0.001", "--seed", "17"},
      {"clock", "--site", "4H:beta", "--b-range", "0:50mT:101"},
      {"dynamics", "rabi", "--omega", "31.4", "--gamma", "0.5", "--rel-noise", "0.01", "--seed", "3"},
      {"dynamics", "g2", "--noise", "0.01", "--seed", "4"},
      {"dynamics", "decay", "--site", "6H:beta", "--t-range", "0:100ns:201", "--rel-noise", "0.01", "--seed", "5"},
      {"dynamics", "podmr", "--omega", "12.566", "--f0", "100", "--f-range", "95:105MHz:101", "--detuning-sigma",
       "2"},
  };
  for (const auto& cmd : commands) {
    INFO(cmd[0] << " " << cmd[1]);
    const Outcome a = run(cmd);
    const Outcome b = run(cmd);
    REQUIRE(a.code == 0);
    CHECK(!a.out.empty());
    CHECK(a.out == b.out);

    const std::string fa = dir.file("a.out"), fb = dir.file("b.out");
    REQUIRE(run(with(cmd, {"--out", fa})).code == 0);
    REQUIRE(run(with(cmd, {"--out", fb})).code == 0);
    CHECK(read_file(fa) == read_file(fb));
    CHECK(read_file(fa) == a.out);
  }

  // fits, on data produced above
  const std::string decay = dir.file("decay.csv"), g2 = dir.file("g2.csv"), rabi = dir.file("rabi.csv"),
                    iso = dir.file("iso.csv");
  REQUIRE(run({"dynamics", "decay", "--tau", "45ns", "--t-range", "0:300ns:301", "--rel-noise", "0.01", "--seed",
               "1", "--out", decay})
              .code == 0);
  REQUIRE(run({"dynamics", "g2", "--noise", "0.01", "--seed", "2", "--out", g2}).code == 0);
  REQUIRE(run({"dynamics", "rabi", "--omega", "31.4", "--gamma", "0.5", "--noise", "0.01", "--seed", "3", "--out",
               rabi})
              .code == 0);
  REQUIRE(run({"lineshape", "--f0", "224000", "--grid", "-20:80GHz:401", "--out", iso}).code == 0);
  const std::vector<std::vector<std::string>> fits = {
      {"fit", "decay", "--data", decay},
      {"fit", "g2", "--data", g2},
      {"fit", "rabi", "--data", rabi, "--omega", "30", "--gamma", "0.4"},
      {"fit", "isotope", "--data", iso, "--shift-c", "20", "--shift-si", "2.5"},
  };
  for (const auto& cmd : fits) {
    INFO(cmd[1]);
    const Outcome a = run(cmd);
    const Outcome b = run(cmd);
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(nlohmann::json::parse(a.out)["converged"] == true);
  }
}

TEST_CASE("config hash tracks options but not the output path", "[cli]") {
  TempDir dir;
  auto hash_of = [](const std::string& text) {
    const auto p = text.find("config_hash: ");
    return text.substr(p, text.find('\n', p) - p);
  };
  const std::vector<std::string> cmd{"dynamics", "g2", "--tau-range", "0:1us:11"};
  const std::string h0 = hash_of(run(cmd).out);
  REQUIRE(run(with(cmd, {"--out", dir.file("x.csv")})).code == 0);
  CHECK(hash_of(read_file(dir.file("x.csv"))) == h0);
  CHECK(hash_of(run(with(cmd, {"--a", "0.5"})).out) != h0);
}

TEST_CASE("exit codes", "[cli]") {
  TempDir dir;
  const Outcome unknown = run({"sites", "show", "4H:delta"});
  CHECK(unknown.code == cli::kUsage);
  CHECK(unknown.err.find("did you mean") != std::string::npos);
  CHECK(run({"levels", "--site", "4H:beta"}).code == cli::kUsage);
  CHECK(run({"bogus"}).code == cli::kUsage);
  CHECK(run({"dynamics", "g2", "--noise", "0.1"}).code == cli::kUsage);
  CHECK(run({"levels", "--site", "4H:beta", "--b-range", "0:0mT:2"}).code == cli::kUsage);
  CHECK(run({"levels", "--site", "4H:beta", "--b-range", "0:50mT:1"}).code == cli::kUsage);
  CHECK(run({"levels", "--site", "4H:beta", "--b-range", "0:50parsec:11"}).code == cli::kUsage);
  CHECK(run({"levels", "--site", "4H:alpha", "--orbital", "GS2", "--b-range", "0:50mT:11"}).code == cli::kUsage);
  CHECK(run({"fit", "decay", "--data", dir.file("missing.csv")}).code == cli::kIo);
  CHECK(run({"levels", "--site", "4H:beta", "--b-range", "0:50mT:11", "--out", dir.file("no/such/dir.csv")}).code ==
        cli::kIo);
  CHECK(run({"--help"}).code == cli::kOk);

  // a flat autocorrelation leaves the time constants undetermined
  std::ofstream(dir.file("flat.csv")) << "tau_us,g2\n0,1\n1,1\n2,1\n3,1\n4,1\n5,1\n6,1\n";
  const Outcome flat = run({"fit", "g2", "--data", dir.file("flat.csv")});
  CHECK(flat.code == cli::kNumerical);
}

TEST_CASE("malformed data leaves no output file", "[cli]") {
  TempDir dir;
  const std::string bad = dir.file("bad.csv");
  std::ofstream(bad) << "t_ns,intensity\n0,1\n1,0.5\n2,abc\n";
  const std::string out = dir.file("result.json");
  const Outcome r = run({"fit", "decay", "--data", bad, "--out", out});
  CHECK(r.code == cli::kUsage);
  CHECK(r.err.find("\"schema\"") != std::string::npos);
  CHECK_FALSE(fs::exists(out));

  std::ofstream(bad) << "t_ns,intensity\n0,1\n1,0.5,3\n";
  CHECK(run({"fit", "decay", "--data", bad, "--out", out}).code == cli::kUsage);
  std::ofstream(bad) << "time,intensity\n0,1\n1,0.5\n2,0.2\n3,0.1\n";
  CHECK(run({"fit", "decay", "--data", bad, "--out", out}).code == cli::kUsage);
  CHECK_FALSE(fs::exists(out));
  for (const auto& e : fs::directory_iterator(dir.path)) CHECK(e.path().filename().string().find(".tmp.") == std::string::npos);
}

TEST_CASE("levels output", "[cli]") {
  SECTION("4H beta ground state rows are traceless") {
    const Outcome r = run({"levels", "--site", "4H:beta", "--b-range", "0:50mT:501"});
    REQUIRE(r.code == 0);
    const CsvTable t = parse_csv(r.out);
    CHECK(t.rows.size() == 501);
    CHECK(t.column("level_15") == 16);
    CHECK(t.column("label_00") == 17);
    for (const auto& row : t.rows) {
      double sum = 0.0;
      for (int k = 1; k <= 16; ++k) sum += row[k];
      CHECK(std::abs(sum) < 1e-3);
    }
    bool warned = false;
    for (const auto& c : t.comments) warned = warned || c.find("warning: ") == 0;
    CHECK(warned);  // bounded g_perp default is reported
  }
  SECTION("no hyperfine gives straight lines") {
    const Outcome r = run({"levels", "--site", "4H:beta", "--set", "A_iso=0", "--b-range", "0:50mT:51"});
    REQUIRE(r.code == 0);
    const CsvTable t = parse_csv(r.out);
    const auto b = t.values("B_mT");
    for (int k = 0; k < 16; ++k) {
      // tracked values per track: follow label columns
      std::vector<double> e(b.size());
      for (std::size_t i = 0; i < b.size(); ++i) {
        for (int l = 0; l < 16; ++l)
          if (static_cast<int>(t.rows[i][17 + l]) == k) e[i] = t.rows[i][1 + l];
      }
      // least-squares line and R^2
      double sb = 0, se = 0, sbb = 0, sbe = 0;
      const double n = static_cast<double>(b.size());
      for (std::size_t i = 0; i < b.size(); ++i) {
        sb += b[i];
        se += e[i];
        sbb += b[i] * b[i];
        sbe += b[i] * e[i];
      }
      const double m = (n * sbe - sb * se) / (n * sbb - sb * sb);
      const double c = (se - m * sb) / n;
      double ss_res = 0, ss_tot = 0;
      for (std::size_t i = 0; i < b.size(); ++i) {
        ss_res += std::pow(e[i] - (m * b[i] + c), 2);
        ss_tot += std::pow(e[i] - se / n, 2);
      }
      CHECK(1.0 - ss_res / ss_tot > 1.0 - 1e-9);
    }
  }
}

TEST_CASE("ODMR maps", "[cli]") {
  const std::vector<std::string> base{"odmr", "--site", "4H:beta", "--b-range", "0:50mT:6", "--f-range",
                                      "0:2000MHz:401"};
  const Outcome par = run(base);
  REQUIRE(par.code == 0);
  const double par_max = max_of(parse_csv(par.out).values("intensity"));
  CHECK(par_max > 0.0);

  const Outcome perp =
      run(with(base, {"--geometry", "perp", "--set", "g_perp=0", "--no-nuclear-dipole"}));
  REQUIRE(perp.code == 0);
  CHECK(max_of(parse_csv(perp.out).values("intensity")) < 1e-6 * par_max);

  SECTION("narrow lines sit on the transition frequencies") {
    const Outcome r = run({"odmr", "--site", "4H:beta", "--b-range", "30mT:30mT:1", "--f-range", "0:1500MHz:150001",
                           "--linewidth", "0.01"});
    REQUIRE(r.code == 0);
    const CsvTable t = parse_csv(r.out);
    SpectrumTrace s;
    s.x = t.values("f_MHz");
    s.y = t.values("intensity");
    const auto peaks = find_peaks(s, 1e-3 * max_of(s.y));
    SpinParams p;
    p.g_principal = {0.5, 0.5, 1.870};
    p.A_principal = {103.0, 188.0, 174.0};
    const auto es = eigensystem(p, FieldPoint::along(Vec3::UnitZ(), 0.03));
    const auto table = transition_table(es, p);
    REQUIRE_FALSE(peaks.empty());
    for (const auto& pk : peaks) {
      double best = 1e300;
      for (const auto& tr : table) best = std::min(best, std::abs(tr.freq - pk.position));
      CHECK(best < 0.01);
    }
  }
}

TEST_CASE("ESR command", "[cli]") {
  const Outcome r = run({"esr", "--set", "g_iso=2", "--set", "A_iso=0", "--angles", "0:90:4"});
  REQUIRE(r.code == 0);
  const CsvTable t = parse_csv(r.out);
  REQUIRE(t.rows.size() == 4);
  for (double b : t.values("B_res_mT")) CHECK_THAT(b, WithinAbs(346.52, 0.05));
  const Outcome none = run({"esr", "--site", "6H:alpha", "--set", "g_perp=0", "--no-nuclear-dipole"});
  REQUIRE(none.code == 0);
  CHECK(parse_csv(none.out).rows.empty());
}

TEST_CASE("fit round trips through the command line", "[cli][fitting]") {
  TempDir dir;
  SECTION("g2 with paper parameters and 1% noise") {
    const std::string data = dir.file("g2.csv");
    REQUIRE(run({"dynamics", "g2", "--a", "1.0", "--b", "0.1", "--tau1", "70ns", "--tau2", "2us", "--tau-range",
                 "0:10us:1001", "--noise", "0.01", "--seed", "42", "--out", data})
                .code == 0);
    const Outcome r = run({"fit", "g2", "--data", data});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    std::map<std::string, double> est;
    for (const auto& p : j["parameters"]) est[p["name"]] = p["estimate"];
    CHECK_THAT(est["a"], WithinRel(1.0, 0.05));
    CHECK_THAT(est["b"], WithinRel(0.1, 0.05));
    CHECK_THAT(est["tau1"], WithinRel(0.07, 0.05));
    CHECK_THAT(est["tau2"], WithinRel(2.0, 0.05));
  }
  SECTION("decay with the 6H beta lifetime") {
    const std::string data = dir.file("decay.csv");
    REQUIRE(run({"dynamics", "decay", "--site", "6H:beta", "--t-range", "0:100ns:401", "--rel-noise", "0.01",
                 "--seed", "8", "--out", data})
                .code == 0);
    const Outcome r = run({"fit", "decay", "--data", data});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["parameters"][1]["name"] == "tau");
    CHECK_THAT(j["parameters"][1]["estimate"].get<double>(), WithinRel(11.0, 0.02));
    CHECK(j["status"] == "converged");
    CHECK(j["parameters"][1]["ci95"].get<double>() > 0.0);
  }
  SECTION("spin parameters from a peak list") {
    SpinParams truth;
    truth.g_principal = {0.5, 0.5, 1.870};
    truth.A_principal = {103.0, 188.0, 174.0};
    const auto peaks = simulate_odmr_peaks(truth, linspace(0.0, 0.05, 11));
    CsvTable t;
    t.columns = {"B_mT", "f_MHz"};
    for (const auto& p : peaks.peaks) t.rows.push_back({p.sweep * 1e3, p.position});
    const std::string data = dir.file("peaks.csv");
    write_file_atomic(data, to_csv(t));
    const Outcome r = run({"fit", "spin", "--site", "4H:beta", "--set", "A_xx=110", "--set", "A_yy=180", "--set",
                           "A_zz=165", "--set", "g_zz=1.85", "--data", data});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    std::map<std::string, double> est;
    for (const auto& p : j["parameters"]) est[p["name"]] = p["estimate"];
    CHECK_THAT(est["g_zz"], WithinRel(1.870, 1e-3));
    CHECK_THAT(est["A_xx"], WithinRel(103.0, 1e-3));
    CHECK_THAT(est["A_yy"], WithinRel(188.0, 1e-3));
    CHECK_THAT(est["A_zz"], WithinRel(174.0, 1e-3));
  }
}

TEST_CASE("parameter files", "[cli]") {
  TempDir dir;
  const std::string cfg = dir.file("spin.json");
  std::ofstream(cfg) << R"({"site": "4H:beta", "orbital": "GS1", "spin": {"A_xx": 0, "A_yy": 0, "A_zz": 0}})";
  const Outcome a = run({"levels", "--config", cfg, "--b-range", "0:10mT:3"});
  const Outcome b = run({"levels", "--site", "4H:beta", "--set", "A_iso=0", "--b-range", "0:10mT:3"});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(parse_csv(a.out).rows == parse_csv(b.out).rows);

  std::ofstream(cfg) << R"({"spin": {"g_zz": "two"}})";
  CHECK(run({"levels", "--config", cfg, "--b-range", "0:10mT:3"}).code == cli::kUsage);
  std::ofstream(cfg) << "{not json";
  CHECK(run({"levels", "--config", cfg, "--b-range", "0:10mT:3"}).code == cli::kUsage);
}

TEST_CASE("sites show", "[cli]") {
  const Outcome beta = run({"sites", "show", "4H:beta"});
  REQUIRE(beta.code == 0);
  CHECK(beta.out.find("1.870(5)") != std::string::npos);
  CHECK(beta.out.find("103, 188, 174(5)") != std::string::npos);
  const Outcome gamma = run({"sites", "show", "6H:gamma"});
  CHECK(gamma.out.find("16(1)") != std::string::npos);
  CHECK(gamma.out.find("31(1)") != std::string::npos);
  const Outcome alpha = run({"sites", "show", "4H:alpha"});
  CHECK(alpha.out.find("167(1)") != std::string::npos);
  CHECK(alpha.out.find("1278.808(6)") != std::string::npos);
}
