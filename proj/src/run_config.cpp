#include "backflash/run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <stdexcept>

#include "backflash/csv.hpp"
#include "backflash/error.hpp"

namespace backflash {

namespace fs = std::filesystem;

namespace {

fs::path data_file(const char* name) { return fs::path(BACKFLASH_DATA_DIR) / name; }

constexpr double kOmega3 = 4.67e-4;

using Setter = std::function<void(RunConfig&, const std::string&, const fs::path&)>;

double to_double(const std::string& key, const std::string& text) {
  try {
    return csv::parse_double(text);
  } catch (const std::invalid_argument&) {
    throw ConfigError(key + ": not a number: '" + text + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end) throw ConfigError(key + ": not an unsigned integer: '" + text + "'");
  return v;
}

fs::path to_path(const std::string& text, const fs::path& base) {
  if (text.empty()) return {};
  fs::path p(text);
  return p.is_absolute() ? p : base / p;
}


Setter num(std::function<double&(RunConfig&)> field) {
  return [field](RunConfig& c, const std::string& v, const fs::path&) {
    field(c) = to_double("value", v);
  };
}

Setter path(std::function<fs::path&(RunConfig&)> field) {
  return [field](RunConfig& c, const std::string& v, const fs::path& base) { field(c) = to_path(v, base); };
}

std::map<std::string, Setter> make_setters() {
  std::map<std::string, Setter> s;
  for (int d = 0; d < 2; ++d) {
    const std::string sec = d == 0 ? "detector1." : "detector2.";
    s[sec + "dark_rate_cps"] = num([d](RunConfig& c) -> double& { return c.detectors[d].dark_rate_cps; });
    s[sec + "dead_time_ns"] = num([d](RunConfig& c) -> double& { return c.detectors[d].dead_time_ns; });
    s[sec + "active_diameter_um"] =
        num([d](RunConfig& c) -> double& { return c.detectors[d].active_diameter_um; });
    s[sec + "detection_probability"] =
        num([d](RunConfig& c) -> double& { return c.detectors[d].detection_probability; });
    s[sec + "generation_file"] = path([d](RunConfig& c) -> fs::path& { return c.detectors[d].generation_file; });
  }
  s["emission.differential_intensity_detected"] =
      num([](RunConfig& c) -> double& { return c.emission.differential_intensity_detected; });
  s["emission.differential_intensity_true"] = [](RunConfig& c, const std::string& v, const fs::path&) {
    c.emission.differential_intensity_true = to_double("emission.differential_intensity_true", v);
  };
  s["emission.spectrum_file"] = path([](RunConfig& c) -> fs::path& { return c.emission.spectrum_file; });
  s["emission.total_charge_pc"] = num([](RunConfig& c) -> double& { return c.emission.profile.total_charge_pc; });
  s["emission.decay_tau_ns"] = num([](RunConfig& c) -> double& { return c.emission.profile.decay_tau_ns; });
  s["emission.jitter_sigma_ns"] = num([](RunConfig& c) -> double& { return c.emission.profile.jitter_sigma_ns; });
  s["emission.onset_t0_ns"] = num([](RunConfig& c) -> double& { return c.emission.profile.onset_t0_ns; });
  s["emission.overvoltage_v"] = num([](RunConfig& c) -> double& { return c.emission.profile.overvoltage_v; });
  for (const char* sec : {"facing.", "spectrometer."}) {
    const bool facing = sec[0] == 'f';
    auto mode = [facing](RunConfig& c) -> ModeSettings& { return facing ? c.facing : c.spectrometer; };
    const std::string p = sec;
    s[p + "ambient_rate_1_cps"] = num([mode](RunConfig& c) -> double& { return mode(c).ambient_rate_1_cps; });
    s[p + "ambient_rate_2_cps"] = num([mode](RunConfig& c) -> double& { return mode(c).ambient_rate_2_cps; });
    s[p + "solid_angle_1to2_sr"] = num([mode](RunConfig& c) -> double& { return mode(c).solid_angle_1to2_sr; });
    s[p + "solid_angle_2to1_sr"] = num([mode](RunConfig& c) -> double& { return mode(c).solid_angle_2to1_sr; });
    s[p + "delay_line_ns"] = num([mode](RunConfig& c) -> double& { return mode(c).delay_line_ns; });
    s[p + "coupling_efficiency"] = num([mode](RunConfig& c) -> double& { return mode(c).coupling_efficiency; });
  }
  s["spectrometer.grating_center_nm"] = num([](RunConfig& c) -> double& { return c.grating_center_nm; });
  s["spectrometer.grating_fwhm_nm"] = num([](RunConfig& c) -> double& { return c.grating_fwhm_nm; });
  s["spectrometer.scan_start_nm"] = num([](RunConfig& c) -> double& { return c.scan.start_nm; });
  s["spectrometer.scan_stop_nm"] = num([](RunConfig& c) -> double& { return c.scan.stop_nm; });
  s["spectrometer.scan_step_nm"] = num([](RunConfig& c) -> double& { return c.scan.step_nm; });
  s["spectrometer.integration_time_s"] = num([](RunConfig& c) -> double& { return c.scan.integration_time_s; });
  s["spectrometer.coincidence_window_ns"] =
      num([](RunConfig& c) -> double& { return c.scan.coincidence_window_ns; });
  s["analysis.bin_width_ns"] = num([](RunConfig& c) -> double& { return c.analysis.bin_width_ns; });
  s["analysis.histogram_min_ns"] = num([](RunConfig& c) -> double& { return c.analysis.histogram_range.min_ns; });
  s["analysis.histogram_max_ns"] = num([](RunConfig& c) -> double& { return c.analysis.histogram_range.max_ns; });
  s["analysis.net_window_min_ns"] = num([](RunConfig& c) -> double& { return c.analysis.net_window.min_ns; });
  s["analysis.net_window_max_ns"] = num([](RunConfig& c) -> double& { return c.analysis.net_window.max_ns; });
  s["analysis.peak_split_ns"] = num([](RunConfig& c) -> double& { return c.analysis.peak_split_ns; });
  s["analysis.alpha"] = num([](RunConfig& c) -> double& { return c.analysis.alpha; });
  s["audit.diff_intensity_per_sr"] = num([](RunConfig& c) -> double& { return c.audit.diff_intensity_per_sr; });
  s["audit.active_diameter_um"] = num([](RunConfig& c) -> double& { return c.audit.active_diameter_um; });
  s["audit.published_brilliance"] = num([](RunConfig& c) -> double& { return c.audit.published_brilliance; });
  s["audit.range_min_nm"] = num([](RunConfig& c) -> double& { return c.audit.range.min_nm; });
  s["audit.range_max_nm"] = num([](RunConfig& c) -> double& { return c.audit.range.max_nm; });
  s["audit.mode_waist_um"] = num([](RunConfig& c) -> double& { return c.audit.mode_waist_um; });
  s["audit.detection_probability"] = num([](RunConfig& c) -> double& { return c.audit.detection_probability; });
  s["audit.spectrum_file"] = path([](RunConfig& c) -> fs::path& { return c.audit.spectrum_file; });
  s["audit.generation_file"] = path([](RunConfig& c) -> fs::path& { return c.audit.generation_file; });
  s["audit.filter_file"] = path([](RunConfig& c) -> fs::path& { return c.audit.filter_file; });
  s["run.duration_s"] = num([](RunConfig& c) -> double& { return c.duration_s; });
  s["run.seed"] = [](RunConfig& c, const std::string& v, const fs::path&) { c.seed = to_u64("run.seed", v); };
  return s;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

void validate_mode(const ModeSettings& m, const char* name) {
  const std::string n = name;
  require(std::isfinite(m.ambient_rate_1_cps) && m.ambient_rate_1_cps >= 0.0, n + ".ambient_rate_1_cps must be >= 0");
  require(std::isfinite(m.ambient_rate_2_cps) && m.ambient_rate_2_cps >= 0.0, n + ".ambient_rate_2_cps must be >= 0");
}

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig c;
  for (auto& d : c.detectors) d.generation_file = data_file("photoelectron_generation.csv");
  c.emission.spectrum_file = data_file("synthetic_emission_spectrum.csv");
  c.audit.spectrum_file = c.emission.spectrum_file;
  c.audit.generation_file = data_file("photoelectron_generation.csv");

  // Ambient light brings D1 to 2634 cps and D2 to 731 cps measured.
  c.facing.ambient_rate_1_cps = 2088.0;
  c.facing.ambient_rate_2_cps = 183.5;
  c.facing.solid_angle_1to2_sr = kOmega3;
  c.facing.solid_angle_2to1_sr = 4.0 * kOmega3;
  c.facing.delay_line_ns = 63.0;
  c.facing.coupling_efficiency = 1.0;

  // About 18000 / 5500 cps measured; 300 to 1100 coincidences per 50 s.
  c.spectrometer.ambient_rate_1_cps = 17800.0;
  c.spectrometer.ambient_rate_2_cps = 5000.0;
  c.spectrometer.solid_angle_1to2_sr = 0.0225;
  c.spectrometer.solid_angle_2to1_sr = 0.0225;
  c.spectrometer.delay_line_ns = 0.0;
  c.spectrometer.coupling_efficiency = 0.02;
  return c;
}

SpectralCurve load_efficiency(const fs::path& generation_file, double detection_probability) {
  if (!(detection_probability > 0.0 && detection_probability <= 1.0))
    throw ConfigError("detection_probability must lie in (0, 1]");
  return load_spectral_curve(generation_file, CurveKind::efficiency).scaled(detection_probability);
}

std::array<DetectorConfig, 2> RunConfig::build_detectors(OpticsMode mode) const {
  validate();
  const ModeSettings& m = mode == OpticsMode::facing ? facing : spectrometer;
  const SpectralCurve spectrum = load_spectral_curve(emission.spectrum_file, CurveKind::emission);
  const SpectralCurve eta1 = load_efficiency(detectors[0].generation_file, detectors[0].detection_probability);
  const SpectralCurve eta2 = load_efficiency(detectors[1].generation_file, detectors[1].detection_probability);

  double intensity = 0.0;
  if (emission.differential_intensity_true) {
    intensity = *emission.differential_intensity_true;
  } else {
    const EmissionModel unit(1.0, spectrum, emission.profile);
    intensity = emission.differential_intensity_detected / unit.detected_fraction(eta2);
  }
  const EmissionModel model(intensity, spectrum, emission.profile);

  auto make = [&](int i, const SpectralCurve& eta, double ambient) {
    const DetectorSettings& d = detectors[i];
    DetectorConfig cfg{i + 1, d.dark_rate_cps, ambient, d.dead_time_ns, eta, d.active_diameter_um, model};
    cfg.validate();
    return cfg;
  };
  return {make(0, eta1, m.ambient_rate_1_cps), make(1, eta2, m.ambient_rate_2_cps)};
}

OpticsConfig RunConfig::build_optics(OpticsMode mode) const {
  const ModeSettings& m = mode == OpticsMode::facing ? facing : spectrometer;
  OpticsConfig o;
  o.mode = mode;
  o.solid_angle_1to2_sr = m.solid_angle_1to2_sr;
  o.solid_angle_2to1_sr = m.solid_angle_2to1_sr;
  o.delay_line_ns = m.delay_line_ns;
  o.coupling_efficiency = m.coupling_efficiency;
  o.grating_center_nm = grating_center_nm;
  o.grating_fwhm_nm = grating_fwhm_nm;
  o.validate();
  return o;
}

LeakageInputs RunConfig::build_leakage_inputs() const {
  LeakageInputs in;
  in.diff_intensity_per_sr = audit.diff_intensity_per_sr;
  in.active_diameter_um = audit.active_diameter_um;
  in.published_brilliance = audit.published_brilliance;
  in.range = audit.range;
  in.mode_waist_um = audit.mode_waist_um;
  in.spectrum = load_spectral_curve(audit.spectrum_file, CurveKind::emission);
  in.eta = load_efficiency(audit.generation_file, audit.detection_probability);
  if (!audit.filter_file.empty()) {
    in.filter = load_spectral_curve(audit.filter_file, CurveKind::transmission);
    in.filter_description = audit.filter_file.filename().string();
  }
  return in;
}

void RunConfig::validate() const {
  for (const auto& d : detectors) {
    require(std::isfinite(d.dark_rate_cps) && d.dark_rate_cps >= 0.0, "dark_rate_cps must be >= 0");
    require(std::isfinite(d.dead_time_ns) && d.dead_time_ns >= 0.0, "dead_time_ns must be >= 0");
    require(d.active_diameter_um > 0.0, "active_diameter_um must be > 0");
  }
  require(std::isfinite(emission.differential_intensity_detected) && emission.differential_intensity_detected >= 0.0,
          "differential_intensity_detected must be >= 0");
  if (emission.differential_intensity_true)
    require(std::isfinite(*emission.differential_intensity_true) && *emission.differential_intensity_true >= 0.0,
            "differential_intensity_true must be >= 0");
  try {
    emission.profile.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("emission: ") + e.what());
  }
  validate_mode(facing, "facing");
  validate_mode(spectrometer, "spectrometer");
  require(std::isfinite(duration_s) && duration_s > 0.0, "run.duration_s must be > 0");
  require(analysis.bin_width_ns > 0.0, "analysis.bin_width_ns must be > 0");
  require(analysis.histogram_range.max_ns > analysis.histogram_range.min_ns, "analysis histogram range is empty");
  require(analysis.net_window.max_ns > analysis.net_window.min_ns, "analysis net window is empty");
}

RunConfig parse_run_config(std::istream& in, const fs::path& base_dir, const std::string& source) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  static const std::map<std::string, Setter> setters = make_setters();
  RunConfig c = RunConfig::defaults();
  for (const auto& [section, keys] : tree) {
    if (keys.empty()) throw ConfigError(source + ": key '" + section + "' outside a section");
    for (const auto& [key, value] : keys) {
      const std::string full = section + "." + key;
      const auto it = setters.find(full);
      if (it == setters.end()) throw ConfigError(source + ": unknown key [" + section + "] " + key);
      try {
        it->second(c, value.get_value<std::string>(), base_dir);
      } catch (const ConfigError& e) {
        throw ConfigError(source + ": [" + section + "] " + key + ": " + e.what());
      }
    }
  }
  try {
    c.validate();
    c.scan.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_run_config(in, path.parent_path(), path.string());
}

std::string_view mode_name(OpticsMode mode) {
  return mode == OpticsMode::facing ? "facing" : "spectrometer";
}

OpticsMode parse_mode(std::string_view name) {
  if (name == "facing") return OpticsMode::facing;
  if (name == "spectrometer") return OpticsMode::spectrometer;
  throw ConfigError("unknown mode '" + std::string(name) + "'");
}

}  // namespace backflash
