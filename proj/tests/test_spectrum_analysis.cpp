#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "backflash/error.hpp"
#include "backflash/run_config.hpp"
#include "backflash/spectrum_analysis.hpp"
#include "forward_model.hpp"

using namespace backflash;

namespace {

SpectralScanPoint point(double wl, std::int64_t nc, std::int64_t n1, std::int64_t n2, double t = 50.0,
                        double tau = 70.0) {
  return {wl, nc, n1, n2, t, tau};
}

std::vector<SpectralFeature> of_kind(const std::vector<SpectralFeature>& f, FeatureKind k) {
  std::vector<SpectralFeature> out;
  std::copy_if(f.begin(), f.end(), std::back_inserter(out), [k](const SpectralFeature& s) { return s.kind == k; });
  return out;
}

}  // namespace

TEST_CASE("normalization arithmetic") {
  // accidentals = 1e6 * 3e5 * 70 ns / 50 s = 420
  const std::vector<SpectralScanPoint> scan{point(850, 420, 1'000'000, 300'000), point(855, 920, 1'000'000, 300'000)};
  CHECK(scan[0].accidentals() == doctest::Approx(420.0));
  const auto spec = normalize_spectrum(scan);
  CHECK(std::abs(spec.points[0].raw_value) < 1e-12);
  CHECK(spec.points[1].raw_value == doctest::Approx(0.5));
  CHECK(spec.points[1].sigma == doctest::Approx(1e3 * std::sqrt(920.0) / 1e6));
  CHECK(spec.curve(855) == doctest::Approx(0.5));
}

TEST_CASE("alpha linearity and rate scaling") {
  const std::vector<SpectralScanPoint> scan{point(800, 700, 900'000, 270'000), point(805, 1100, 910'000, 275'000),
                                            point(810, 350, 890'000, 265'000)};
  const auto a = normalize_spectrum(scan, 1e3);
  const auto b = normalize_spectrum(scan, 2e3);
  for (std::size_t i = 0; i < scan.size(); ++i) CHECK(b.points[i].raw_value == 2.0 * a.points[i].raw_value);

  std::vector<SpectralScanPoint> doubled = scan;
  for (auto& p : doubled) {
    p.coincidences *= 2;
    p.counts_1 *= 2;
    p.counts_2 *= 2;
    p.integration_time_s *= 2.0;
  }
  const auto c = normalize_spectrum(doubled);
  for (std::size_t i = 0; i < scan.size(); ++i)
    CHECK(c.points[i].raw_value == doctest::Approx(a.points[i].raw_value).epsilon(1e-12));
}

TEST_CASE("unusable points are flagged") {
  const std::vector<SpectralScanPoint> scan{point(700, 300, 900'000, 300'000), point(705, 5, 0, 300'000),
                                            point(710, 500, 900'000, 300'000), point(715, 600, 900'000, 300'000)};
  const auto spec = normalize_spectrum(scan);
  CHECK(spec.points[0].clamped);
  CHECK(spec.points[0].raw_value < 0.0);
  CHECK(spec.curve(700) == 0.0);
  CHECK(spec.points[1].excluded);
  CHECK(spec.points[1].reason == "N_1 = 0");
  CHECK(spec.curve.size() == 3);
  CHECK_FALSE(spec.points[2].clamped);

  const std::vector<SpectralScanPoint> lonely{point(700, 300, 900'000, 300'000), point(705, 5, 0, 300'000)};
  CHECK_THROWS_AS(normalize_spectrum(lonely), DomainError);
}

TEST_CASE("feature location") {
  std::vector<double> x, tri, flat;
  for (double w = 700; w <= 1000; w += 5) {
    x.push_back(w);
    tri.push_back(std::max(0.0, 1.0 - std::abs(w - 860.0) / 60.0));
    flat.push_back(0.4);
  }
  const auto bump = locate_features(SpectralCurve(x, tri));
  const auto maxima = of_kind(bump, FeatureKind::maximum);
  REQUIRE(maxima.size() == 1);
  CHECK(std::abs(maxima[0].wavelength_nm - 860.0) <= 5.0);
  CHECK(locate_features(SpectralCurve(x, flat)).empty());
  CHECK(locate_features(SpectralCurve({700, 705, 710}, {0, 1, 0})).empty());

  // Plateau with a cliff between 870 and 875.
  std::vector<double> cliff;
  for (double w : x) cliff.push_back(w < 872.0 ? 1.0 - 0.001 * std::abs(w - 800.0) : 0.2);
  const auto edges = of_kind(locate_features(SpectralCurve(x, cliff)), FeatureKind::edge);
  REQUIRE(edges.size() == 1);
  CHECK(edges[0].wavelength_nm == doctest::Approx(872.5));
}

TEST_CASE("scan point from events") {
  // D1 at 100 and 1000 (delay 10 applied), D2 at 95, 150, 1005, 2000.
  std::vector<EventRecord> ev{{2, 95.0}, {1, 110.0}, {2, 150.0}, {1, 1010.0}, {2, 1005.0}, {2, 2000.0}};
  std::sort(ev.begin(), ev.end(), [](auto& a, auto& b) { return a.timestamp_ns < b.timestamp_ns; });
  const auto p = scan_point_from_events(ev, 860.0, 70.0, 1e-6, 10.0);
  CHECK(p.coincidences == 2);  // 150 after 100, 1005 after 1000
  CHECK(p.counts_1 == 2);
  CHECK(p.counts_2 == 4);
}

TEST_CASE("scan file round trip and errors") {
  const std::vector<SpectralScanPoint> scan{point(700, 300, 900'000, 300'000), point(702.5, 310, 910'000, 305'000)};
  std::stringstream s;
  write_scan(s, scan, {{"seed", "3"}});
  csv::Metadata meta;
  const auto back = read_scan(s, "<mem>", &meta);
  REQUIRE(back.size() == 2);
  CHECK(back[1].wavelength_nm == 702.5);
  CHECK(back[1].counts_2 == 305'000);
  CHECK(meta.at("seed") == "3");

  std::istringstream bad("wavelength_nm,N_c,N_1,N_2,T_s,tau_c_ns\n700,1,2,3,50,70\n705,1,x,3,50,70\n");
  try {
    read_scan(bad, "scan.csv");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("reconstruction converges to the forward model as T grows") {
  const RunConfig cfg = RunConfig::defaults();
  const auto det = cfg.build_detectors(OpticsMode::spectrometer);
  const auto optics = cfg.build_optics(OpticsMode::spectrometer);
  const unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  std::vector<double> worst;
  for (double t : {50.0, 200.0, 800.0}) {
    ScanSettings scan;
    scan.start_nm = 845.0;
    scan.stop_nm = 875.0;
    scan.step_nm = 5.0;
    scan.integration_time_s = t;
    const auto points = simulate_scan(det, optics, scan, 17, jobs);
    const auto spec = normalize_spectrum(points);
    double max_dev = 0.0;
    for (const auto& d : spec.points) {
      const double model = testing::expected_intensity(det, optics, d.wavelength_nm, 1e3);
      CAPTURE(t);
      CAPTURE(d.wavelength_nm);
      CHECK(std::abs(d.raw_value - model) < 3.0 * d.sigma);
      max_dev = std::max(max_dev, std::abs(d.raw_value - model));
    }
    worst.push_back(max_dev * std::sqrt(t));
  }
  // Deviation scaled by sqrt(T) stays bounded: shrinkage is ~1/sqrt(T).
  CHECK(worst[2] < 3.0 * worst[0]);
}
