#include "backflash/sim_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <queue>
#include <thread>

#include "backflash/error.hpp"

namespace backflash {

namespace {

constexpr double kFourPi = 4.0 * std::numbers::pi;

bool finite_nonnegative(double v) { return std::isfinite(v) && v >= 0.0; }

struct PendingPhoton {
  double time_ns;
  int target;
  bool operator>(const PendingPhoton& o) const { return time_ns > o.time_ns; }
};

}  // namespace

void DetectorConfig::validate() const {
  const std::string who = "detector " + std::to_string(id);
  if (!finite_nonnegative(dark_rate_cps)) throw ConfigError(who + ": dark rate must be >= 0");
  if (!finite_nonnegative(ambient_rate_cps)) throw ConfigError(who + ": ambient rate must be >= 0");
  if (!finite_nonnegative(dead_time_ns)) throw ConfigError(who + ": dead time must be >= 0");
  if (!std::isfinite(active_diameter_um) || !(active_diameter_um > 0.0))
    throw ConfigError(who + ": active diameter must be > 0");
  if (efficiency.kind() == CurveKind::emission)
    throw ConfigError(who + ": efficiency curve must not be an emission curve");
}

void OpticsConfig::validate() const {
  const auto solid = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= kFourPi; };
  if (!solid(solid_angle_1to2_sr) || !solid(solid_angle_2to1_sr))
    throw ConfigError("optics: solid angles must lie in [0, 4 pi]");
  if (!std::isfinite(delay_line_ns)) throw ConfigError("optics: delay line must be finite");
  if (!(coupling_efficiency >= 0.0 && coupling_efficiency <= 1.0))
    throw ConfigError("optics: coupling efficiency must lie in [0, 1]");
  if (mode == OpticsMode::spectrometer) {
    if (!std::isfinite(grating_fwhm_nm) || !(grating_fwhm_nm > 0.0))
      throw ConfigError("optics: grating FWHM must be > 0");
    if (!std::isfinite(grating_center_nm)) throw ConfigError("optics: grating center must be finite");
  }
}

double grating_transmission(double wavelength_nm, double center_nm, double fwhm_nm) {
  if (!(fwhm_nm > 0.0)) throw DomainError("grating transmission: FWHM must be > 0");
  const double d = (wavelength_nm - center_nm) / fwhm_nm;
  return std::exp(-4.0 * std::numbers::ln2 * d * d);
}

double dead_time_corrected_rate(double nominal_rate_cps, double dead_time_ns) {
  return nominal_rate_cps / (1.0 + nominal_rate_cps * dead_time_ns * 1e-9);
}

double nominal_rate_for_measured(double measured_rate_cps, double dead_time_ns) {
  const double x = measured_rate_cps * dead_time_ns * 1e-9;
  if (!(x < 1.0)) throw DomainError("measured rate not reachable with this dead time");
  return measured_rate_cps / (1.0 - x);
}

std::vector<EventRecord> simulate(const std::array<DetectorConfig, 2>& detectors,
                                  const OpticsConfig& optics, double duration_s,
                                  std::uint64_t seed) {
  if (!std::isfinite(duration_s) || !(duration_s > 0.0))
    throw ConfigError("simulate: duration must be > 0");
  for (const auto& d : detectors) d.validate();
  optics.validate();
  if (detectors[0].id == detectors[1].id) throw ConfigError("simulate: detector ids must differ");

  Rng rng(seed);
  const double end_ns = duration_s * 1e9;
  const std::array<double, 2> solid = {optics.solid_angle_1to2_sr, optics.solid_angle_2to1_sr};
  const bool spectrometer = optics.mode == OpticsMode::spectrometer;

  std::array<std::exponential_distribution<double>, 2> gap;
  std::array<double, 2> next_background;
  for (int i = 0; i < 2; ++i) {
    const double rate_per_ns = detectors[i].background_rate_cps() * 1e-9;
    if (rate_per_ns > 0.0) {
      gap[i] = std::exponential_distribution<double>(rate_per_ns);
      next_background[i] = gap[i](rng);
    } else {
      next_background[i] = std::numeric_limits<double>::infinity();
    }
  }

  std::priority_queue<PendingPhoton, std::vector<PendingPhoton>, std::greater<>> pending;
  std::array<double, 2> last_fire = {-std::numeric_limits<double>::infinity(),
                                     -std::numeric_limits<double>::infinity()};
  std::array<std::vector<double>, 2> fired;
  for (int i = 0; i < 2; ++i)
    fired[i].reserve(static_cast<std::size_t>(detectors[i].background_rate_cps() * duration_s * 1.1) + 16);
  // Mean probability that a flash photon of detector i triggers the other one.
  std::array<double, 2> pass{0.0, 0.0};
  for (int i = 0; i < 2; ++i) {
    const EmissionModel& emission = detectors[i].emission;
    if (solid[i] <= 0.0 || emission.differential_intensity_true() <= 0.0) continue;
    const SpectralCurve& eta = detectors[1 - i].efficiency;
    pass[i] = emission.passing_fraction([&](double wl) {
      double p = optics.coupling_efficiency;
      if (spectrometer) p *= grating_transmission(wl, optics.grating_center_nm, optics.grating_fwhm_nm);
      return p > 0.0 ? p * eta(wl) : 0.0;
    });
  }
  std::vector<double> arrivals;

  while (true) {
    int det = next_background[0] <= next_background[1] ? 0 : 1;
    double t = next_background[det];
    bool from_flash = false;
    if (!pending.empty() && pending.top().time_ns < t) {
      t = pending.top().time_ns;
      det = pending.top().target;
      from_flash = true;
    }
    if (t > end_ns) break;
    if (from_flash)
      pending.pop();
    else
      next_background[det] += gap[det](rng);

    if (!(t > last_fire[det]) || t - last_fire[det] < detectors[det].dead_time_ns) continue;
    last_fire[det] = t;
    fired[det].push_back(t);

    if (pass[det] <= 0.0) continue;
    sample_flash_times(detectors[det].emission, t, solid[det], pass[det], rng, arrivals);
    for (double arrival : arrivals) pending.push({std::max(arrival, t), 1 - det});
  }

  std::vector<EventRecord> out;
  out.reserve(fired[0].size() + fired[1].size());
  std::size_t a = 0, b = 0;
  const double shift = optics.delay_line_ns;
  while (a < fired[0].size() || b < fired[1].size()) {
    const bool take_first =
        b == fired[1].size() || (a < fired[0].size() && fired[0][a] + shift <= fired[1][b]);
    if (take_first)
      out.push_back({detectors[0].id, fired[0][a++] + shift});
    else
      out.push_back({detectors[1].id, fired[1][b++]});
  }
  return out;
}

std::vector<double> ScanSettings::wavelengths() const {
  validate();
  std::vector<double> out;
  const auto n = static_cast<std::size_t>(std::floor((stop_nm - start_nm) / step_nm + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) out.push_back(start_nm + static_cast<double>(i) * step_nm);
  return out;
}

void ScanSettings::validate() const {
  if (!(step_nm > 0.0) || !(stop_nm >= start_nm) || !std::isfinite(start_nm) || !std::isfinite(stop_nm))
    throw ConfigError("scan: need start <= stop and step > 0");
  if (!(integration_time_s > 0.0)) throw ConfigError("scan: integration time must be > 0");
  if (!(coincidence_window_ns > 0.0)) throw ConfigError("scan: coincidence window must be > 0");
}

std::uint64_t scan_point_seed(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::array<std::uint32_t, 2> words;
  seq.generate(words.begin(), words.end());
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

std::vector<SpectralScanPoint> simulate_scan(const std::array<DetectorConfig, 2>& detectors,
                                             OpticsConfig optics, const ScanSettings& settings,
                                             std::uint64_t seed, unsigned jobs) {
  optics.mode = OpticsMode::spectrometer;
  const std::vector<double> grid = settings.wavelengths();
  std::vector<SpectralScanPoint> out(grid.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    try {
      for (std::size_t i = next++; i < grid.size(); i = next++) {
        OpticsConfig o = optics;
        o.grating_center_nm = grid[i];
        const auto events = simulate(detectors, o, settings.integration_time_s, scan_point_seed(seed, i));
        out[i] = scan_point_from_events(events, grid[i], settings.coincidence_window_ns,
                                        settings.integration_time_s, o.delay_line_ns);
      }
    } catch (...) {
      const std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = grid.size();
    }
  };
  jobs = std::clamp<unsigned>(jobs, 1, static_cast<unsigned>(std::max<std::size_t>(grid.size(), 1)));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace backflash
