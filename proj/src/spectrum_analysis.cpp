#include "backflash/spectrum_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "backflash/error.hpp"

namespace backflash {

void SpectralScanPoint::validate() const {
  if (coincidences < 0 || counts_1 < 0 || counts_2 < 0)
    throw DomainError("scan point: counts must be >= 0");
  if (!(integration_time_s > 0.0)) throw DomainError("scan point: integration time must be > 0");
  if (!(coincidence_window_ns > 0.0)) throw DomainError("scan point: coincidence window must be > 0");
}

double SpectralScanPoint::accidentals() const {
  return static_cast<double>(counts_1) * static_cast<double>(counts_2) * coincidence_window_ns *
         1e-9 / integration_time_s;
}

NormalizedSpectrum normalize_spectrum(std::span<const SpectralScanPoint> scan, double alpha) {
  std::vector<double> wl, val;
  std::vector<ScanPointDiagnostic> diag;
  for (const SpectralScanPoint& p : scan) {
    ScanPointDiagnostic d;
    d.wavelength_nm = p.wavelength_nm;
    try {
      p.validate();
    } catch (const DomainError& e) {
      d.excluded = true;
      d.reason = e.what();
    }
    if (!d.excluded && p.counts_1 == 0) {
      d.excluded = true;
      d.reason = "N_1 = 0";
    }
    if (!d.excluded && !wl.empty() && !(p.wavelength_nm > wl.back())) {
      d.excluded = true;
      d.reason = "wavelength not increasing";
    }
    if (!d.excluded) {
      const double n1 = static_cast<double>(p.counts_1);
      d.raw_value = alpha * (static_cast<double>(p.coincidences) - p.accidentals()) / n1;
      d.sigma = std::abs(alpha) * std::sqrt(static_cast<double>(std::max<std::int64_t>(p.coincidences, 1))) / n1;
      d.clamped = d.raw_value < 0.0;
      wl.push_back(p.wavelength_nm);
      val.push_back(d.clamped ? 0.0 : d.raw_value);
    }
    diag.push_back(std::move(d));
  }
  if (wl.size() < 2) throw DomainError("normalize_spectrum: fewer than 2 usable scan points");
  return {SpectralCurve(std::move(wl), std::move(val), CurveKind::emission), std::move(diag)};
}

std::vector<SpectralFeature> locate_features(const SpectralCurve& curve,
                                             const FeatureThresholds& thresholds) {
  std::vector<SpectralFeature> out;
  const auto x = curve.wavelengths();
  const auto v = curve.values();
  const std::size_t n = x.size();
  if (n < 5) return out;

  std::vector<double> smooth(n);
  smooth[0] = 0.5 * (v[0] + v[1]);
  smooth[n - 1] = 0.5 * (v[n - 2] + v[n - 1]);
  for (std::size_t i = 1; i + 1 < n; ++i) smooth[i] = (v[i - 1] + v[i] + v[i + 1]) / 3.0;
  const double peak = *std::max_element(smooth.begin(), smooth.end());

  std::vector<double> deriv(n - 1), mid(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    deriv[i] = (v[i + 1] - v[i]) / (x[i + 1] - x[i]);
    mid[i] = 0.5 * (x[i] + x[i + 1]);
  }
  std::vector<double> mag(deriv.size());
  std::transform(deriv.begin(), deriv.end(), mag.begin(), [](double d) { return std::abs(d); });
  std::nth_element(mag.begin(), mag.begin() + static_cast<std::ptrdiff_t>(mag.size() / 2), mag.end());
  double median = mag[mag.size() / 2];
  if (mag.size() % 2 == 0) {
    const double lower = *std::max_element(mag.begin(), mag.begin() + static_cast<std::ptrdiff_t>(mag.size() / 2));
    median = 0.5 * (median + lower);
  }

  // Rounding in the 3-point mean must not turn a plateau into a maximum.
  const double tie = 1e-12 * peak;
  for (std::size_t i = 1; i + 1 < n; ++i)
    if (peak > 0.0 && smooth[i] > smooth[i - 1] + tie && smooth[i] >= smooth[i + 1] &&
        smooth[i] > thresholds.maximum_fraction * peak)
      out.push_back({FeatureKind::maximum, x[i]});

  const double limit = thresholds.edge_median_factor * median;
  for (std::size_t k = 0; k < deriv.size(); ++k) {
    const double d = deriv[k];
    if (!(d < 0.0) || !(-d > limit)) continue;
    const bool below_prev = k == 0 || d < deriv[k - 1];
    const bool below_next = k + 1 == deriv.size() || d <= deriv[k + 1];
    if (below_prev && below_next) out.push_back({FeatureKind::edge, mid[k]});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const SpectralFeature& a, const SpectralFeature& b) { return a.wavelength_nm < b.wavelength_nm; });
  return out;
}

SpectralScanPoint scan_point_from_events(std::span<const EventRecord> events, double wavelength_nm,
                                         double coincidence_window_ns, double integration_time_s,
                                         double delay_line_ns) {
  require_time_sorted(events);
  std::vector<double> t1, t2;
  for (const EventRecord& e : events) {
    if (e.detector_id == 1)
      t1.push_back(e.timestamp_ns - delay_line_ns);
    else if (e.detector_id == 2)
      t2.push_back(e.timestamp_ns);
    else
      throw DomainError("unexpected detector id " + std::to_string(e.detector_id));
  }
  SpectralScanPoint p;
  p.wavelength_nm = wavelength_nm;
  p.counts_1 = static_cast<std::int64_t>(t1.size());
  p.counts_2 = static_cast<std::int64_t>(t2.size());
  p.integration_time_s = integration_time_s;
  p.coincidence_window_ns = coincidence_window_ns;
  std::size_t lo = 0;
  for (double t : t1) {
    while (lo < t2.size() && t2[lo] < t) ++lo;
    for (std::size_t j = lo; j < t2.size() && t2[j] <= t + coincidence_window_ns; ++j) ++p.coincidences;
  }
  p.validate();
  return p;
}

void write_scan(std::ostream& out, std::span<const SpectralScanPoint> scan,
                const csv::Metadata& metadata) {
  for (const auto& [key, value] : metadata) out << "# " << key << " = " << value << '\n';
  out << "wavelength_nm,N_c,N_1,N_2,T_s,tau_c_ns\n";
  for (const SpectralScanPoint& p : scan)
    out << csv::format_double(p.wavelength_nm) << ',' << p.coincidences << ',' << p.counts_1 << ','
        << p.counts_2 << ',' << csv::format_double(p.integration_time_s) << ','
        << csv::format_double(p.coincidence_window_ns) << '\n';
}

std::vector<SpectralScanPoint> read_scan(std::istream& in, const std::string& source,
                                         csv::Metadata* metadata) {
  csv::Reader reader(in, source, {"wavelength_nm", "N_c", "N_1", "N_2", "T_s", "tau_c_ns"});
  std::vector<SpectralScanPoint> scan;
  while (auto row = reader.next()) {
    SpectralScanPoint p;
    const auto& f = *row;
    p.wavelength_nm = reader.to_double(f[0], "wavelength_nm");
    p.coincidences = reader.to_int(f[1], "N_c");
    p.counts_1 = reader.to_int(f[2], "N_1");
    p.counts_2 = reader.to_int(f[3], "N_2");
    p.integration_time_s = reader.to_double(f[4], "T_s");
    p.coincidence_window_ns = reader.to_double(f[5], "tau_c_ns");
    if (p.coincidences < 0 || p.counts_1 < 0 || p.counts_2 < 0) reader.fail("negative count");
    if (!(p.integration_time_s > 0.0)) reader.fail("T_s must be > 0");
    if (!(p.coincidence_window_ns > 0.0)) reader.fail("tau_c_ns must be > 0");
    scan.push_back(p);
  }
  if (metadata) *metadata = reader.metadata();
  return scan;
}

std::vector<SpectralScanPoint> load_scan(const std::filesystem::path& path, csv::Metadata* metadata) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  return read_scan(in, path.string(), metadata);
}

}  // namespace backflash
