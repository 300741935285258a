#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <unistd.h>

#include "backflash/cli/commands.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Result r;
  r.code = backflash::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

// "key = value" lines of a command's stdout.
std::map<std::string, std::string> fields(const std::string& text) {
  std::map<std::string, std::string> m;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    key.erase(key.find_last_not_of(' ') + 1);
    m[key] = line.substr(eq + 3);
  }
  return m;
}

double num(const std::map<std::string, std::string>& m, const std::string& key) {
  const auto it = m.find(key);
  REQUIRE_MESSAGE(it != m.end(), "missing " << key);
  return std::stod(it->second);
}

// Value and error of "x +- e".
std::pair<double, double> with_err(const std::map<std::string, std::string>& m, const std::string& key) {
  const std::string& v = m.at(key);
  const auto pm = v.find("+-");
  REQUIRE(pm != std::string::npos);
  return {std::stod(v.substr(0, pm)), std::stod(v.substr(pm + 2))};
}

std::string without_tool_line(const std::string& text) {
  std::istringstream in(text);
  std::string out;
  for (std::string line; std::getline(in, line);)
    if (line.rfind("# tool", 0) != 0) out += line + '\n';
  return out;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("backflash_cli_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("usage and exit codes") {
  CHECK(run({"--help"}).code == 0);
  const Result v = run({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find("0.") != std::string::npos);
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"analyze", "/nonexistent/events.csv"}).code == 2);
  CHECK(run({"simulate", "--mode", "sideways"}).code == 2);
  CHECK(run({"leakage", "--range", "900:800"}).code == 2);
  CHECK(run({"leakage", "--range", "600:1050"}).code == 1);
}

TEST_CASE("leakage report matches the golden file") {
  const Result r = run({"leakage"});
  REQUIRE(r.code == 0);
  const std::string golden = slurp(fs::path(BACKFLASH_TEST_DIR) / "golden" / "leakage_default.txt");
  REQUIRE_FALSE(golden.empty());
  CHECK(without_tool_line(r.out) == without_tool_line(golden));
  CHECK(run({"leakage"}).out == r.out);
}

TEST_CASE("leakage writes report and summary") {
  TempDir dir;
  spit(dir / "notch.csv", "wavelength_nm,value\n700,0\n854.99,0\n855,1\n865,1\n865.01,0\n1050,0\n");
  const Result r = run({"leakage", "--filter", dir / "notch.csv", "--out", dir / "audit.txt"});
  REQUIRE(r.code == 0);
  const std::string report = slurp(dir / "audit.txt");
  const std::string summary = slurp(dir / "audit.csv");
  CHECK(report.find("N_r_corrected") != std::string::npos);
  CHECK(report.find("notch.csv") != std::string::npos);
  CHECK(summary.find("B,B_first_principles,wavelength_um,N_r,") != std::string::npos);
  CHECK(summary.find("notch.csv") != std::string::npos);

  spit(dir / "bad_filter.csv", "wavelength_nm,value\n700,0\n800,1.5\n1050,0\n");
  const Result bad = run({"leakage", "--filter", dir / "bad_filter.csv"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("bad_filter.csv:3") != std::string::npos);
}

TEST_CASE("malformed event file reports the line") {
  TempDir dir;
  spit(dir / "events.csv", "# duration_s = 1\ndetector_id,timestamp_ns\n1,10\n2,oops\n");
  const Result r = run({"analyze", dir / "events.csv"});
  CHECK(r.code == 1);
  CHECK(r.err.find("events.csv:4") != std::string::npos);

  spit(dir / "unsorted.csv", "detector_id,timestamp_ns\n1,10\n2,5\n");
  CHECK(run({"analyze", dir / "unsorted.csv"}).code == 1);
}

TEST_CASE("analyze on hand-built events") {
  TempDir dir;
  // One pair at dt = +40 ns (inside [20, 62]), one at +100 ns, one lone event.
  spit(dir / "events.csv",
       "# duration_s = 10\n# delay_line_ns = 63\n# solid_angle_1to2_sr = 0.001\n"
       "detector_id,timestamp_ns\n2,1000\n1,1040\n2,5000\n1,5100\n1,9000\n");
  const Result r = run({"analyze", dir / "events.csv", "--out", dir / "hist.csv"});
  REQUIRE(r.code == 0);
  const auto f = fields(r.out);
  CHECK(num(f, "total_time_s") == 10.0);
  CHECK(num(f, "rate_1_cps") == doctest::Approx(0.3));
  CHECK(num(f, "rate_2_cps") == doctest::Approx(0.2));
  CHECK(f.at("net_window_ns") == "20:62");
  CHECK(num(f, "pairs_in_window") == 1.0);
  const auto [nc, nc_err] = with_err(f, "n_c_cps");
  CHECK(nc == doctest::Approx(0.1).epsilon(1e-4));
  CHECK(nc_err == doctest::Approx(0.1).epsilon(1e-4));
  CHECK(with_err(f, "dn_dOmega_per_sr").first == doctest::Approx(333.333).epsilon(1e-4));

  const std::string hist = slurp(dir / "hist.csv");
  CHECK(hist.find("# checksum") != std::string::npos);
  CHECK(hist.find("bin_start_ns,count") != std::string::npos);

  // A different delay line moves the net window.
  spit(dir / "shifted.csv", "# duration_s = 10\n# delay_line_ns = 80\ndetector_id,timestamp_ns\n2,1000\n1,1040\n");
  const Result s = run({"analyze", dir / "shifted.csv"});
  CHECK(fields(s.out).at("net_window_ns") == "37:79");
  CHECK(num(fields(s.out), "pairs_in_window") == 1.0);
  CHECK(s.err.find("dn/dOmega not reported") != std::string::npos);
}

TEST_CASE("simulate is deterministic per seed") {
  TempDir dir;
  REQUIRE(run({"simulate", "--duration", "2", "--seed", "7", "--out", dir / "a.csv"}).code == 0);
  REQUIRE(run({"simulate", "--duration", "2", "--seed", "7", "--out", dir / "b.csv"}).code == 0);
  REQUIRE(run({"simulate", "--duration", "2", "--seed", "8", "--out", dir / "c.csv"}).code == 0);
  const std::string a = slurp(dir / "a.csv");
  CHECK(a.size() > 1000);
  CHECK(a == slurp(dir / "b.csv"));
  CHECK(a != slurp(dir / "c.csv"));
  CHECK(a.find("# seed = 7") != std::string::npos);
  CHECK(a.find("# delay_line_ns = 63") != std::string::npos);
}

TEST_CASE("simulate, analyze and fit round trip") {
  TempDir dir;
  const Result s = run({"simulate", "--duration", "40", "--seed", "3", "--out", dir / "events.csv"});
  REQUIRE(s.code == 0);
  const auto sf = fields(s.out);
  CHECK(num(sf, "rate_1_cps") == doctest::Approx(2632).epsilon(0.03));
  CHECK(num(sf, "rate_2_cps") == doctest::Approx(730).epsilon(0.05));

  const Result a = run({"analyze", dir / "events.csv", "--fit"});
  REQUIRE(a.code == 0);
  const auto f = fields(a.out);
  CHECK(num(f, "total_time_s") == 40.0);
  const auto [dn, dn_err] = with_err(f, "dn_dOmega_per_sr");
  CHECK(std::abs(dn - 39.0) < 4.0 * dn_err + 0.05 * 39.0);
  CHECK(with_err(f, "left.tau_ns").first == doctest::Approx(2.75).epsilon(0.15));
  CHECK(with_err(f, "left.t0_ns").first == doctest::Approx(60.0).epsilon(0.02));
  CHECK(f.at("left.converged") == "yes");
  CHECK(f.at("right.converged") == "yes");
}

TEST_CASE("flash-off run agrees with accidentals") {
  TempDir dir;
  spit(dir / "off.cfg", "[emission]\ndifferential_intensity_detected = 0\n");
  REQUIRE(run({"simulate", dir / "off.cfg", "--duration", "40", "--out", dir / "off.csv"}).code == 0);
  const Result a = run({"analyze", dir / "off.csv"});
  REQUIRE(a.code == 0);
  const auto [nc, err] = with_err(fields(a.out), "n_c_cps");
  CHECK(err > 0.0);
  CHECK(std::abs(nc) < 3.5 * err);
}

TEST_CASE("spectrometer scan and spectrum") {
  TempDir dir;
  spit(dir / "scan.cfg",
       "[spectrometer]\nscan_start_nm = 850\nscan_stop_nm = 870\nscan_step_nm = 5\n");
  const Result s = run({"simulate", dir / "scan.cfg", "--mode", "spectrometer", "--duration", "2", "--jobs", "2",
                        "--out", dir / "scan.csv"});
  REQUIRE(s.code == 0);
  CHECK(num(fields(s.out), "scan_points") == 5.0);
  CHECK(num(fields(s.out), "rate_1_cps") == doctest::Approx(17971).epsilon(0.03));

  const Result sp = run({"spectrum", dir / "scan.csv", "--features"});
  REQUIRE(sp.code == 0);
  CHECK(sp.out.find("wavelength_nm,value\n850.000,") != std::string::npos);
  CHECK(sp.out.find("# alpha = 1000") != std::string::npos);

  spit(dir / "broken_scan.csv", "wavelength_nm,N_c,N_1,N_2,T_s,tau_c_ns\n850,1,2,3,1,70\n855,-1,2,3,1,70\n");
  const Result b = run({"spectrum", dir / "broken_scan.csv"});
  CHECK(b.code == 1);
  CHECK(b.err.find("broken_scan.csv:3") != std::string::npos);
}

TEST_CASE("installed binary") {
  TempDir dir;
  const std::string tool = BACKFLASH_TOOL;
  REQUIRE(std::system((tool + " --version > " + (dir / "v.txt")).c_str()) == 0);
  CHECK(slurp(dir / "v.txt").find("0.") != std::string::npos);
  REQUIRE(std::system((tool + " leakage > " + (dir / "l.txt")).c_str()) == 0);
  CHECK(without_tool_line(slurp(dir / "l.txt")) ==
        without_tool_line(slurp(fs::path(BACKFLASH_TEST_DIR) / "golden" / "leakage_default.txt")));
  const int status = std::system((tool + " analyze 2> " + (dir / "e.txt")).c_str());
  CHECK(WEXITSTATUS(status) == 2);
}
