#include "backflash/cli/commands.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <boost/crc.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>

#include "backflash/error.hpp"
#include "backflash/events.hpp"
#include "backflash/leakage_audit.hpp"
#include "backflash/run_config.hpp"
#include "backflash/sim_engine.hpp"
#include "backflash/spectrum_analysis.hpp"
#include "backflash/timing_analysis.hpp"

namespace backflash::cli {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string crc32_hex(const std::string& data) {
  boost::crc_32_type crc;
  crc.process_bytes(data.data(), data.size());
  return fmt::format("{:08x}", crc.checksum());
}

csv::Metadata provenance(const std::string& checksum_input, std::optional<std::uint64_t> seed) {
  csv::Metadata m;
  m["tool"] = std::string("backflash ") + BACKFLASH_VERSION;
  m["checksum"] = crc32_hex(checksum_input);
  if (seed) m["seed"] = std::to_string(*seed);
  return m;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

// "a:b" into a pair; both numbers required.
std::pair<double, double> parse_range(const std::string& text, const char* what) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError(std::string(what) + ": expected min:max, got '" + text + "'");
  double a = 0.0, b = 0.0;
  try {
    a = csv::parse_double(text.substr(0, colon));
    b = csv::parse_double(text.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError(std::string(what) + ": expected min:max, got '" + text + "'");
  }
  if (!(b > a)) throw ConfigError(std::string(what) + ": min must be below max");
  return {a, b};
}

double metadata_or(const csv::Metadata& meta, const std::string& key, double fallback) {
  return csv::metadata_double(meta, key).value_or(fallback);
}

struct SimulateOptions {
  std::string config;
  std::optional<double> duration;
  std::optional<std::uint64_t> seed;
  std::string mode = "facing";
  std::string out;
  unsigned jobs = 1;
};

int cmd_simulate(const SimulateOptions& o, std::ostream& out) {
  const RunConfig cfg = o.config.empty() ? RunConfig::defaults() : load_run_config(o.config);
  const OpticsMode mode = parse_mode(o.mode);
  const std::uint64_t seed = o.seed.value_or(cfg.seed);
  const auto detectors = cfg.build_detectors(mode);
  const OpticsConfig optics = cfg.build_optics(mode);
  const std::string checksum_input =
      (o.config.empty() ? std::string() : read_file(o.config)) +
      fmt::format("|simulate|{}|{}", o.mode, o.duration ? csv::format_double(*o.duration) : "");
  csv::Metadata meta = provenance(checksum_input, seed);
  meta["mode"] = std::string(mode_name(mode));

  std::ostringstream buffer;
  if (mode == OpticsMode::facing) {
    const double duration = o.duration.value_or(cfg.duration_s);
    if (!(duration > 0.0) || !std::isfinite(duration)) throw ConfigError("--duration must be > 0");
    const auto events = simulate(detectors, optics, duration, seed);
    meta["duration_s"] = csv::format_double(duration);
    meta["delay_line_ns"] = csv::format_double(optics.delay_line_ns);
    meta["solid_angle_1to2_sr"] = csv::format_double(optics.solid_angle_1to2_sr);
    meta["solid_angle_2to1_sr"] = csv::format_double(optics.solid_angle_2to1_sr);
    write_events(buffer, events, meta);
    std::int64_t n1 = 0, n2 = 0;
    for (const auto& e : events) (e.detector_id == 1 ? n1 : n2)++;
    out << fmt::format("events          = {}\n", events.size());
    out << fmt::format("rate_1_cps      = {:.2f}\n", static_cast<double>(n1) / duration);
    out << fmt::format("rate_2_cps      = {:.2f}\n", static_cast<double>(n2) / duration);
  } else {
    ScanSettings scan = cfg.scan;
    if (o.duration) scan.integration_time_s = *o.duration;
    scan.validate();
    const auto points = simulate_scan(detectors, optics, scan, seed, std::max(1u, o.jobs));
    meta["grating_fwhm_nm"] = csv::format_double(optics.grating_fwhm_nm);
    write_scan(buffer, points, meta);
    double n1 = 0.0, n2 = 0.0;
    for (const auto& p : points) {
      n1 += static_cast<double>(p.counts_1) / p.integration_time_s;
      n2 += static_cast<double>(p.counts_2) / p.integration_time_s;
    }
    const double n = static_cast<double>(points.size());
    out << fmt::format("scan_points     = {}\n", points.size());
    out << fmt::format("rate_1_cps      = {:.2f}\n", n1 / n);
    out << fmt::format("rate_2_cps      = {:.2f}\n", n2 / n);
  }
  if (o.out.empty()) {
    out << buffer.str();
  } else {
    auto file = open_out(o.out);
    file << buffer.str();
  }
  return 0;
}

struct AnalyzeOptions {
  std::string events;
  std::optional<double> bin;
  std::string window;
  std::string out;
  bool fit = false;
};

void print_fit(std::ostream& out, const char* name, const EmgFit& f) {
  out << fmt::format("{}.tau_ns        = {:.4f} +- {:.4f}\n", name, f.tau_ns, f.tau_err);
  out << fmt::format("{}.sigma_ns      = {:.4f} +- {:.4f}\n", name, f.sigma_ns, f.sigma_err);
  out << fmt::format("{}.t0_ns         = {:.4f} +- {:.4f}\n", name, f.t0_ns, f.t0_err);
  out << fmt::format("{}.amplitude     = {:.2f} +- {:.2f}\n", name, f.amplitude, f.amplitude_err);
  out << fmt::format("{}.background    = {:.4f} +- {:.4f}\n", name, f.background, f.background_err);
  out << fmt::format("{}.chi2_ndf      = {:.2f} / {}\n", name, f.chi2, f.ndf);
  out << fmt::format("{}.converged     = {}\n", name, f.converged ? "yes" : "no");
}

int cmd_analyze(const AnalyzeOptions& o, std::ostream& out, std::ostream& err) {
  const EventStream stream = load_events(o.events);
  require_time_sorted(stream.events);
  const double bin = o.bin.value_or(kDefaultBinWidthNs);
  if (!(bin > 0.0)) throw ConfigError("--bin must be > 0");
  TimeWindow range = kDefaultHistogramRange;
  if (!o.window.empty()) {
    const auto [a, b] = parse_range(o.window, "--window");
    range = {a, b};
  }
  const std::optional<double> duration = csv::metadata_double(stream.metadata, "duration_s");
  const double delay = metadata_or(stream.metadata, "delay_line_ns", kDefaultPeakSplitNs);
  const double pair_window = std::max(std::abs(range.min_ns), std::abs(range.max_ns));
  const CoincidenceHistogram hist = build_histogram(stream.events, pair_window, range, bin, duration);

  // Left-peak window [D - 43, D - 1]; [20, 62] ns for the 63 ns delay line.
  const TimeWindow net_window{delay - (kDefaultPeakSplitNs - kNetRateWindow.min_ns),
                              delay - (kDefaultPeakSplitNs - kNetRateWindow.max_ns)};
  const std::int64_t pairs = count_pairs(stream.events, net_window);
  const NetCoincidenceRate net =
      net_coincidence_rate(pairs, hist.total_time_s, hist.rate_1_cps, hist.rate_2_cps, net_window);

  out << fmt::format("total_time_s    = {}\n", csv::format_double(hist.total_time_s));
  out << fmt::format("rate_1_cps      = {:.3f}\n", hist.rate_1_cps);
  out << fmt::format("rate_2_cps      = {:.3f}\n", hist.rate_2_cps);
  out << fmt::format("net_window_ns   = {}:{}\n", csv::format_double(net_window.min_ns),
                     csv::format_double(net_window.max_ns));
  out << fmt::format("pairs_in_window = {}\n", pairs);
  out << fmt::format("n_acc_cps       = {:.5f}\n", net.accidental_rate_cps);
  out << fmt::format("n_c_cps         = {:.5f} +- {:.5f}\n", net.net_rate_cps, net.net_rate_err_cps);
  if (const auto omega = csv::metadata_double(stream.metadata, "solid_angle_1to2_sr")) {
    if (hist.rate_1_cps > 0.0 && *omega > 0.0) {
      const double dn = differential_intensity(net.net_rate_cps, hist.rate_1_cps, *omega);
      const double dn_err = net.net_rate_err_cps / hist.rate_1_cps / *omega;
      out << fmt::format("dn_dOmega_per_sr = {:.3f} +- {:.3f}\n", dn, dn_err);
    }
  } else {
    err << "note: no solid_angle_1to2_sr in the event file, dn/dOmega not reported\n";
  }

  int status = 0;
  csv::Metadata extra = provenance(read_file(o.events) + fmt::format("|analyze|{}|{}", bin, o.window),
                                   std::nullopt);
  if (o.fit) {
    const FitSettings settings;
    for (const PeakSide side : {PeakSide::left, PeakSide::right}) {
      const char* name = side == PeakSide::left ? "left" : "right";
      try {
        const EmgFit f = fit_emg_peak(hist, side, delay, settings);
        print_fit(out, name, f);
        extra[std::string(name) + ".tau_ns"] = fmt::format("{:.6g}", f.tau_ns);
        extra[std::string(name) + ".sigma_ns"] = fmt::format("{:.6g}", f.sigma_ns);
      } catch (const FitError& e) {
        err << "fit of the " << name << " peak failed: " << e.what() << '\n';
        status = 3;
      }
    }
  }
  if (!o.out.empty()) {
    auto file = open_out(o.out);
    write_histogram(file, hist, extra);
  }
  return status;
}

struct SpectrumOptions {
  std::string scan;
  double alpha = kDefaultSpectrumAlpha;
  std::string out;
  bool features = false;
};

int cmd_spectrum(const SpectrumOptions& o, std::ostream& out, std::ostream& err) {
  const auto scan = load_scan(o.scan);
  const NormalizedSpectrum spec = normalize_spectrum(scan, o.alpha);
  for (const auto& d : spec.points) {
    if (d.excluded) err << fmt::format("{} nm excluded: {}\n", csv::format_double(d.wavelength_nm), d.reason);
    else if (d.clamped) err << fmt::format("{} nm clamped to 0 (raw {:.4g})\n", csv::format_double(d.wavelength_nm), d.raw_value);
  }
  std::ostringstream buffer;
  for (const auto& [k, v] : provenance(read_file(o.scan) + fmt::format("|spectrum|{}", o.alpha), std::nullopt))
    buffer << "# " << k << " = " << v << '\n';
  buffer << "# alpha = " << csv::format_double(o.alpha) << '\n';
  buffer << "wavelength_nm,value\n";
  for (const auto& d : spec.points) {
    if (d.excluded) continue;
    buffer << csv::format_fixed(d.wavelength_nm, 3) << ',' << fmt::format("{:.6g}", d.clamped ? 0.0 : d.raw_value)
           << '\n';
  }
  if (o.out.empty()) {
    out << buffer.str();
  } else {
    auto file = open_out(o.out);
    file << buffer.str();
  }
  if (o.features) {
    for (const auto& f : locate_features(spec.curve))
      out << fmt::format("feature {} at {:.1f} nm\n", f.kind == FeatureKind::maximum ? "maximum" : "edge",
                         f.wavelength_nm);
  }
  return 0;
}

struct LeakageOptions {
  std::string spectrum;
  std::string eta;
  std::optional<double> diff_intensity;
  std::optional<double> diameter;
  std::string range;
  std::string filter;
  std::string out;
};

int cmd_leakage(const LeakageOptions& o, std::ostream& out) {
  const RunConfig cfg = RunConfig::defaults();
  LeakageInputs in = cfg.build_leakage_inputs();
  std::string checksum_input = "|leakage";
  if (!o.spectrum.empty()) {
    in.spectrum = load_spectral_curve(o.spectrum, CurveKind::emission);
    checksum_input += read_file(o.spectrum);
  }
  if (!o.eta.empty()) {
    in.eta = load_spectral_curve(o.eta, CurveKind::efficiency);
    checksum_input += read_file(o.eta);
  }
  if (o.diff_intensity) in.diff_intensity_per_sr = *o.diff_intensity;
  if (o.diameter) in.active_diameter_um = *o.diameter;
  if (!o.range.empty()) {
    const auto [a, b] = parse_range(o.range, "--range");
    in.range = {a, b};
  }
  if (!o.filter.empty()) {
    in.filter = load_spectral_curve(o.filter, CurveKind::transmission);
    in.filter_description = fs::path(o.filter).filename().string();
    checksum_input += read_file(o.filter);
  }
  checksum_input += fmt::format("|{}|{}|{}:{}", csv::format_double(in.diff_intensity_per_sr),
                                csv::format_double(in.active_diameter_um), csv::format_double(in.range.min_nm),
                                csv::format_double(in.range.max_nm));
  const LeakageBudget budget = audit_leakage(in);
  const csv::Metadata meta = provenance(checksum_input, std::nullopt);
  if (o.out.empty()) {
    write_audit_report(out, budget, meta);
    return 0;
  }
  fs::path report = o.out;
  fs::path summary = report;
  if (report.extension() == ".csv") report.replace_extension(".txt");
  else summary.replace_extension(".csv");
  {
    auto file = open_out(report);
    write_audit_report(file, budget, meta);
  }
  auto file = open_out(summary);
  write_audit_summary_csv(file, budget, meta);
  out << "report  = " << report.string() << '\n' << "summary = " << summary.string() << '\n';
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Breakdown-flash simulation, coincidence analysis and leakage audit"};
  app.name("backflash");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(BACKFLASH_VERSION));

  SimulateOptions sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Simulate detector events (facing) or a spectral scan");
  simulate_cmd->add_option("config", sim.config, "Config file; built-in defaults when omitted")->check(CLI::ExistingFile);
  simulate_cmd->add_option("--duration", sim.duration, "Run time in s (per scan point in spectrometer mode)");
  simulate_cmd->add_option("--seed", sim.seed, "RNG seed");
  simulate_cmd->add_option("--mode", sim.mode, "facing or spectrometer")
      ->check(CLI::IsMember({"facing", "spectrometer"}));
  simulate_cmd->add_option("--out", sim.out, "Output file (stdout when omitted)");
  simulate_cmd->add_option("--jobs", sim.jobs, "Parallel scan points")->check(CLI::PositiveNumber);

  AnalyzeOptions ana;
  auto* analyze_cmd = app.add_subcommand("analyze", "Coincidence histogram, EMG fits and net rate");
  analyze_cmd->add_option("events", ana.events, "Event file")->required()->check(CLI::ExistingFile);
  analyze_cmd->add_option("--bin", ana.bin, "Bin width in ns");
  analyze_cmd->add_option("--window", ana.window, "Histogram range min:max in ns");
  analyze_cmd->add_option("--out", ana.out, "Histogram output file");
  analyze_cmd->add_flag("--fit", ana.fit, "Fit both peaks");

  SpectrumOptions spc;
  auto* spectrum_cmd = app.add_subcommand("spectrum", "Normalize a spectral scan");
  spectrum_cmd->add_option("scan", spc.scan, "Scan file")->required()->check(CLI::ExistingFile);
  spectrum_cmd->add_option("--alpha", spc.alpha, "Normalization constant");
  spectrum_cmd->add_option("--out", spc.out, "Spectrum output file (stdout when omitted)");
  spectrum_cmd->add_flag("--features", spc.features, "Report maxima and edges");

  LeakageOptions leak;
  auto* leakage_cmd = app.add_subcommand("leakage", "Back-flash leakage budget");
  leakage_cmd->add_option("--spectrum", leak.spectrum, "Emission spectrum file")->check(CLI::ExistingFile);
  leakage_cmd->add_option("--eta", leak.eta, "Detection efficiency file")->check(CLI::ExistingFile);
  leakage_cmd->add_option("--diff-intensity", leak.diff_intensity, "Detected photons/sr per breakdown");
  leakage_cmd->add_option("--diameter", leak.diameter, "Active area diameter in um");
  leakage_cmd->add_option("--range", leak.range, "Wavelength range min:max in nm");
  leakage_cmd->add_option("--filter", leak.filter, "Filter transmission file")->check(CLI::ExistingFile);
  leakage_cmd->add_option("--out", leak.out, "Report file; a .csv summary is written next to it");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    // --help and --version exit 0; usage errors share the config-error code.
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (*simulate_cmd) return cmd_simulate(sim, out);
    if (*analyze_cmd) return cmd_analyze(ana, out, err);
    if (*spectrum_cmd) return cmd_spectrum(spc, out, err);
    if (*leakage_cmd) return cmd_leakage(leak, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace backflash::cli
