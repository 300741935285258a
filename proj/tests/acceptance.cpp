// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails. Tolerances are fixed below.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "backflash/circuit_model.hpp"
#include "backflash/cli/commands.hpp"
#include "backflash/leakage_audit.hpp"
#include "backflash/run_config.hpp"
#include "backflash/sim_engine.hpp"
#include "backflash/spectrum_analysis.hpp"
#include "backflash/timing_analysis.hpp"
#include "forward_model.hpp"

using namespace backflash;
namespace fs = std::filesystem;

namespace {

// Criterion 1
constexpr double kChargeRelTol = 1e-6;
// Criterion 2
constexpr double kAccidentalRelTol = 1e-3;
constexpr double kFlashOffDurationS = 1000.0;
constexpr double kPoissonSigmas = 3.0;
// Criterion 3
constexpr double kTimingDurationS = 200.0;
// Neyman weights shorten tau when tail bins are sparse; wider bins reduce it.
constexpr double kTimingBinNs = 0.5;
constexpr double kMinPeakCounts = 2000.0;
constexpr double kTauRelTol = 0.05;
constexpr double kSigmaRelTol = 0.10;
constexpr double kIntensityRelTol = 0.10;
// Criterion 4
constexpr double kOmega5 = 1.3e-3;
constexpr double kCompatSigmas = 3.0;
// Criterion 5
constexpr double kNoiselessRelTol = 1e-4;
// Criterion 6
constexpr double kPointSigmas = 3.0;
constexpr double kFeatureTolFwhm = 2.0;
// Criterion 7
constexpr double kCouplingRelTol = 0.01;
constexpr double kCorrectedRelTol = 0.05;
constexpr double kBetaMin = 2.5, kBetaMax = 5.0;

constexpr std::uint64_t kSeed = 20240601;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Pipeline {
  double rate_1_cps = 0.0;
  double net_counts = 0.0;
  double dn = 0.0;
  double dn_err = 0.0;
  EmgFit left;
};

// Facing-mode analysis as done by `backflash analyze --fit --bin 0.5`.
Pipeline run_facing(const RunConfig& cfg, double duration_s, std::uint64_t seed) {
  const auto det = cfg.build_detectors(OpticsMode::facing);
  const auto optics = cfg.build_optics(OpticsMode::facing);
  const auto events = simulate(det, optics, duration_s, seed);
  const auto hist = build_histogram(events, 160.0, kDefaultHistogramRange, kTimingBinNs, duration_s);
  const TimeWindow window{optics.delay_line_ns - 43.0, optics.delay_line_ns - 1.0};
  const auto net =
      net_coincidence_rate(count_pairs(events, window), duration_s, hist.rate_1_cps, hist.rate_2_cps, window);
  Pipeline p;
  p.rate_1_cps = hist.rate_1_cps;
  p.net_counts = net.net_rate_cps * duration_s;
  p.dn = differential_intensity(net.net_rate_cps, hist.rate_1_cps, optics.solid_angle_1to2_sr);
  p.dn_err = net.net_rate_err_cps / hist.rate_1_cps / optics.solid_angle_1to2_sr;
  p.left = fit_emg_peak(hist, PeakSide::left, optics.delay_line_ns);
  return p;
}

Outcome circuit_arithmetic() {
  const BreakdownProfile p;
  const double c = parasitic_capacitance(64.0, 20.0);
  auto f = [&](double t) { return discharge_current(t, p); };
  using boost::math::quadrature::gauss_kronrod;
  const double q = gauss_kronrod<double, 61>::integrate(f, -20.0, p.onset_t0_ns, 15, 1e-13) +
                   gauss_kronrod<double, 61>::integrate(f, p.onset_t0_ns, 300.0, 15, 1e-13);
  const double rel = std::abs(q / p.total_charge_pc - 1.0);
  return {c == 3.2 && rel < kChargeRelTol, fmt::format("C_p = {} pF, int I_D dt / Q_D - 1 = {:.2e}", c, rel)};
}

Outcome accidental_rate_check() {
  const double a = accidental_rate(2634.0, 731.0, 42.0);
  const bool arithmetic = std::abs(a / 0.0809 - 1.0) < kAccidentalRelTol && std::abs(a - 0.081) < 0.0005;

  RunConfig cfg = RunConfig::defaults();
  cfg.emission.differential_intensity_true = 0.0;
  const auto det = cfg.build_detectors(OpticsMode::facing);
  const auto optics = cfg.build_optics(OpticsMode::facing);
  const auto events = simulate(det, optics, kFlashOffDurationS, kSeed);
  std::int64_t n1 = 0, n2 = 0;
  for (const auto& e : events) (e.detector_id == 1 ? n1 : n2)++;
  const double r1 = static_cast<double>(n1) / kFlashOffDurationS;
  const double r2 = static_cast<double>(n2) / kFlashOffDurationS;
  const TimeWindow window{20.0, 62.0};
  const auto pairs = static_cast<double>(count_pairs(events, window));
  const double expected = accidental_rate(r1, r2, 42.0) * kFlashOffDurationS;
  const double z = (pairs - expected) / std::sqrt(expected);
  return {arithmetic && std::abs(z) < kPoissonSigmas,
          fmt::format("r1 r2 dt = {:.5f} /s; flash-off {:.0f} s: r1 = {:.1f}, r2 = {:.1f}, pairs {:.0f} vs {:.1f} "
                      "expected ({:+.2f} sigma)",
                      a, kFlashOffDurationS, r1, r2, pairs, expected, z)};
}

Outcome timing_round_trip(Pipeline& omega3) {
  const RunConfig cfg = RunConfig::defaults();
  omega3 = run_facing(cfg, kTimingDurationS, kSeed);
  const BreakdownProfile truth = cfg.emission.profile;
  const double tau_rel = omega3.left.tau_ns / truth.decay_tau_ns - 1.0;
  const double sigma_rel = omega3.left.sigma_ns / truth.jitter_sigma_ns - 1.0;
  const double dn_rel = omega3.dn / cfg.emission.differential_intensity_detected - 1.0;
  const bool ok = omega3.net_counts >= kMinPeakCounts && omega3.left.converged &&
                  std::abs(tau_rel) < kTauRelTol && std::abs(sigma_rel) < kSigmaRelTol &&
                  std::abs(dn_rel) < kIntensityRelTol;
  return {ok, fmt::format("{:.0f} s, {} ns bins, r1 = {:.1f}, peak counts {:.0f}; tau = {:.3f} ({:+.1f}%), sigma = {:.3f} "
                          "({:+.1f}%), dn/dOmega = {:.2f} +- {:.2f} ({:+.1f}%)",
                          kTimingDurationS, kTimingBinNs, omega3.rate_1_cps, omega3.net_counts, omega3.left.tau_ns, 100 * tau_rel,
                          omega3.left.sigma_ns, 100 * sigma_rel, omega3.dn, omega3.dn_err, 100 * dn_rel)};
}

Outcome aperture_consistency(const Pipeline& omega3) {
  RunConfig cfg = RunConfig::defaults();
  cfg.facing.solid_angle_1to2_sr = kOmega5;
  const Pipeline omega5 = run_facing(cfg, kTimingDurationS, kSeed + 1);
  const double sigma = std::hypot(omega3.dn_err, omega5.dn_err);
  const double z = (omega5.dn - omega3.dn) / sigma;
  return {std::abs(z) < kCompatSigmas,
          fmt::format("Omega3: {:.2f} +- {:.2f}, Omega5: {:.2f} +- {:.2f} photons/sr ({:+.2f} sigma)", omega3.dn,
                      omega3.dn_err, omega5.dn, omega5.dn_err, z)};
}

BinnedCounts synthetic(PeakSide side, double t0, double tau, double sigma, double lo, double hi) {
  BinnedCounts b;
  const int n = static_cast<int>(std::lround((hi - lo) / kDefaultBinWidthNs));
  for (int i = 0; i <= n; ++i) b.edges.push_back(lo + i * kDefaultBinWidthNs);
  for (int i = 0; i < n; ++i) {
    const double a = b.edges[i], c = b.edges[i + 1];
    const double mass = side == PeakSide::right ? emg::interval(a - t0, c - t0, tau, sigma)
                                                : emg::interval(t0 - c, t0 - a, tau, sigma);
    b.counts.push_back(5000.0 * mass + 1.0);
  }
  return b;
}

Outcome fitter_exactness() {
  double worst = 0.0;
  for (PeakSide side : {PeakSide::left, PeakSide::right})
    for (double tau : {1.0, 2.75, 6.0})
      for (double sigma : {0.3, 0.72, 1.5}) {
        const double t0 = 60.0;
        const auto data = side == PeakSide::right ? synthetic(side, t0, tau, sigma, t0 - 10.0, t0 + 12.0 * tau)
                                                  : synthetic(side, t0, tau, sigma, t0 - 12.0 * tau, t0 + 10.0);
        const EmgFit f = fit_emg(data, side);
        worst = std::max({worst, std::abs(f.tau_ns / tau - 1.0), std::abs(f.sigma_ns / sigma - 1.0)});
      }
  const EmgFit sharp = fit_emg(synthetic(PeakSide::right, 40.0, 2.75, 0.0, 20.0, 62.0), PeakSide::right);
  return {worst < kNoiselessRelTol && sharp.sigma_ns < kDefaultBinWidthNs,
          fmt::format("worst relative error {:.1e} over 18 noiseless peaks; sigma = 0 data fits sigma = {:.4f} ns",
                      worst, sharp.sigma_ns)};
}

Outcome spectrum_round_trip() {
  const RunConfig cfg = RunConfig::defaults();
  const auto det = cfg.build_detectors(OpticsMode::spectrometer);
  const auto optics = cfg.build_optics(OpticsMode::spectrometer);
  const ScanSettings scan = cfg.scan;
  const auto points = simulate_scan(det, optics, scan, kSeed, std::max(1u, std::thread::hardware_concurrency()));
  const auto spec = normalize_spectrum(points);

  int outside = 0;
  double worst = 0.0;
  for (const auto& d : spec.points) {
    const double model = testing::expected_intensity(det, optics, d.wavelength_nm, kDefaultSpectrumAlpha);
    const double z = std::abs(d.raw_value - model) / d.sigma;
    worst = std::max(worst, z);
    if (d.excluded || !(z < kPointSigmas)) ++outside;
  }

  const double tol = kFeatureTolFwhm * optics.grating_fwhm_nm;
  const auto features = locate_features(spec.curve);
  auto near = [&](FeatureKind kind, double nm) {
    return std::any_of(features.begin(), features.end(), [&](const SpectralFeature& f) {
      return f.kind == kind && std::abs(f.wavelength_nm - nm) <= tol;
    });
  };
  const bool found = near(FeatureKind::maximum, 860.0) && near(FeatureKind::edge, 872.0) &&
                     near(FeatureKind::edge, 913.0);
  std::string list;
  for (const auto& f : features)
    list += fmt::format(" {}@{:.1f}", f.kind == FeatureKind::maximum ? "max" : "edge", f.wavelength_nm);
  std::int64_t peak_nc = 0;
  for (const auto& p : points) peak_nc = std::max(peak_nc, p.coincidences);
  return {outside == 0 && found,
          fmt::format("{} points, {} outside {:.0f} sigma (worst {:.2f}), peak N_c = {}; features:{}",
                      spec.points.size(), outside, kPointSigmas, worst, peak_nc, list)};
}

Outcome leakage_numbers() {
  const double nr = single_mode_coupling(2e-3, 0.849);
  const double corr = corrected_leakage(3.6e-4, 3.5);
  const RunConfig cfg = RunConfig::defaults();
  const LeakageInputs in = cfg.build_leakage_inputs();
  const double beta = beta_correction(*in.spectrum, *in.eta, in.range);
  bool exact = true;
  for (double c : {1.0, 0.55, 0.2}) {
    const auto flat = SpectralCurve::constant(c, in.range, CurveKind::efficiency);
    exact = exact && std::abs(beta_correction(*in.spectrum, flat, in.range) * c - 1.0) < 1e-12;
  }
  const bool ok = std::abs(nr / 3.6e-4 - 1.0) < kCouplingRelTol && std::abs(corr / 1.26e-3 - 1.0) < 1e-12 &&
                  std::abs(corr / 1.3e-3 - 1.0) < kCorrectedRelTol && beta >= kBetaMin && beta <= kBetaMax &&
                  exact;
  return {ok, fmt::format("N_r = {:.4e}, corrected = {:.4e}, beta(default curves) = {:.4f}, constant-eta cases {}",
                          nr, corr, beta, exact ? "exact" : "off")};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string without_tool_line(const std::string& text) {
  std::istringstream in(text);
  std::string out;
  for (std::string line; std::getline(in, line);)
    if (line.rfind("# tool", 0) != 0) out += line + '\n';
  return out;
}

int cli(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::ostringstream o, e;
  const int code = cli::run(args, o, e);
  if (out) *out = o.str();
  return code;
}

Outcome discrepancy_surfacing() {
  std::string report;
  if (cli({"leakage"}, &report) != 0) return {false, "leakage command failed"};
  const std::string golden = slurp(fs::path(BACKFLASH_TEST_DIR) / "golden" / "leakage_default.txt");
  const bool same = !golden.empty() && without_tool_line(report) == without_tool_line(golden);
  const std::vector<std::string> labels = {"first principles (dn/dOmega / A_D)", "published value (used downstream)",
                                           "closed form lambda^2/4 (used)", "literal integral lambda^2/(8 pi)"};
  int missing = 0;
  for (const auto& l : labels)
    if (report.find(l) == std::string::npos) ++missing;
  return {same && missing == 0, fmt::format("golden report {}, {} of {} labels present",
                                            same ? "matches" : "differs", labels.size() - missing, labels.size())};
}

Outcome determinism(const fs::path& dir) {
  const auto p = [&](const char* name) { return (dir / name).string(); };
  bool ok = true;
  ok &= cli({"simulate", "--duration", "10", "--seed", "1", "--out", p("a.csv")}) == 0;
  ok &= cli({"simulate", "--duration", "10", "--seed", "1", "--out", p("b.csv")}) == 0;
  ok &= cli({"leakage", "--out", p("r1.txt")}) == 0;
  ok &= cli({"leakage", "--out", p("r2.txt")}) == 0;
  {
    std::ofstream cfg(dir / "scan.cfg");
    cfg << "[spectrometer]\nscan_start_nm = 850\nscan_stop_nm = 880\n";
  }
  ok &= cli({"simulate", p("scan.cfg"), "--mode", "spectrometer", "--duration", "5", "--jobs", "1", "--out",
             p("s1.csv")}) == 0;
  ok &= cli({"simulate", p("scan.cfg"), "--mode", "spectrometer", "--duration", "5", "--jobs", "3", "--out",
             p("s3.csv")}) == 0;
  const std::string events = slurp(dir / "a.csv");
  const bool same_events = !events.empty() && events == slurp(dir / "b.csv");
  const bool same_reports = !slurp(dir / "r1.txt").empty() && slurp(dir / "r1.txt") == slurp(dir / "r2.txt") &&
                            slurp(dir / "r1.csv") == slurp(dir / "r2.csv");
  const bool same_scan = !slurp(dir / "s1.csv").empty() && slurp(dir / "s1.csv") == slurp(dir / "s3.csv");
  return {ok && same_events && same_reports && same_scan,
          fmt::format("event files {} ({} bytes), audit reports {}, scan with 1 vs 3 jobs {}",
                      same_events ? "identical" : "differ", events.size(), same_reports ? "identical" : "differ",
                      same_scan ? "identical" : "differ")};
}

}  // namespace

int main() {
  const fs::path dir = fs::temp_directory_path() / ("backflash_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  Pipeline omega3;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"circuit arithmetic", circuit_arithmetic},
      {"accidental rate", accidental_rate_check},
      {"timing round trip", [&] { return timing_round_trip(omega3); }},
      {"aperture consistency", [&] { return aperture_consistency(omega3); }},
      {"EMG fitter exactness", fitter_exactness},
      {"spectrum round trip", spectrum_round_trip},
      {"leakage numbers", leakage_numbers},
      {"discrepancy surfacing", discrepancy_surfacing},
      {"determinism", [&] { return determinism(dir); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::cout << fmt::format("criterion {} {}: {} [{:.1f} s] {}\n", i + 1, criteria[i].first,
                             o.pass ? "PASS" : "FAIL", secs, o.detail)
              << std::flush;
  }
  fs::remove_all(dir);
  return failures == 0 ? 0 : 1;
}
