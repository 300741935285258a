#include "backflash/timing_analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

#include "backflash/circuit_model.hpp"
#include "backflash/error.hpp"
#include "backflash/kernels.hpp"

namespace backflash {

namespace {

struct SplitStreams {
  std::vector<double> t1, t2;
};

SplitStreams split_by_detector(std::span<const EventRecord> events) {
  require_time_sorted(events);
  SplitStreams s;
  for (const EventRecord& e : events) {
    if (e.detector_id == 1)
      s.t1.push_back(e.timestamp_ns);
    else if (e.detector_id == 2)
      s.t2.push_back(e.timestamp_ns);
    else
      throw DomainError("unexpected detector id " + std::to_string(e.detector_id));
  }
  return s;
}

}  // namespace

std::vector<double> CoincidenceHistogram::bin_edges() const {
  std::vector<double> e(counts.size() + 1);
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = edge(i);
  return e;
}

std::int64_t CoincidenceHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

void CoincidenceHistogram::validate() const {
  if (!(bin_width_ns > 0.0)) throw DomainError("histogram: bin width must be > 0");
  if (counts.empty()) throw DomainError("histogram: no bins");
  for (auto c : counts)
    if (c < 0) throw DomainError("histogram: negative count");
}

CoincidenceHistogram build_histogram(std::span<const EventRecord> events, double pair_window_ns,
                                     TimeWindow range, double bin_width_ns,
                                     std::optional<double> total_time_s) {
  if (!(bin_width_ns > 0.0)) throw DomainError("build_histogram: bin width must be > 0");
  if (!(range.max_ns > range.min_ns)) throw DomainError("build_histogram: empty time range");
  if (!(pair_window_ns >= 0.0)) throw DomainError("build_histogram: pair window must be >= 0");
  const SplitStreams s = split_by_detector(events);

  CoincidenceHistogram h;
  h.t_min_ns = range.min_ns;
  h.bin_width_ns = bin_width_ns;
  const auto nbins = static_cast<std::int64_t>(std::ceil(range.width() / bin_width_ns - 1e-9));
  h.counts.assign(static_cast<std::size_t>(nbins), 0);

  std::vector<double> dt;
  std::vector<std::int64_t> idx;
  std::size_t lo = 0;
  for (double t1 : s.t1) {
    while (lo < s.t2.size() && s.t2[lo] < t1 - pair_window_ns) ++lo;
    dt.clear();
    for (std::size_t j = lo; j < s.t2.size() && s.t2[j] <= t1 + pair_window_ns; ++j)
      dt.push_back(t1 - s.t2[j]);
    if (dt.empty()) continue;
    idx.resize(dt.size());
    kernels::bin_indices(dt, h.t_min_ns, bin_width_ns, nbins, idx);
    for (std::int64_t k : idx)
      if (k >= 0) ++h.counts[static_cast<std::size_t>(k)];
  }

  if (total_time_s) {
    h.total_time_s = *total_time_s;
  } else if (events.size() >= 2) {
    h.total_time_s = (events.back().timestamp_ns - events.front().timestamp_ns) * 1e-9;
  }
  if (h.total_time_s > 0.0) {
    h.rate_1_cps = static_cast<double>(s.t1.size()) / h.total_time_s;
    h.rate_2_cps = static_cast<double>(s.t2.size()) / h.total_time_s;
  }
  return h;
}

std::int64_t count_pairs(std::span<const EventRecord> events, TimeWindow window) {
  const SplitStreams s = split_by_detector(events);
  std::int64_t n = 0;
  std::size_t lo = 0;
  for (double t1 : s.t1) {
    // dt = t1 - t2 in [min, max]  <=>  t2 in [t1 - max, t1 - min]
    while (lo < s.t2.size() && s.t2[lo] < t1 - window.max_ns) ++lo;
    for (std::size_t j = lo; j < s.t2.size() && s.t2[j] <= t1 - window.min_ns; ++j) ++n;
  }
  return n;
}

BinnedCounts BinnedCounts::from(const CoincidenceHistogram& hist) {
  BinnedCounts b;
  b.edges = hist.bin_edges();
  b.counts.assign(hist.counts.begin(), hist.counts.end());
  return b;
}

namespace {

enum Param { kAmp, kT0, kTau, kSigma, kBg, kParams };
using Params = std::array<double, kParams>;

struct PeakModel {
  std::span<const double> lo, hi;
  PeakSide side;

  void eval(const Params& p, std::span<double> out) const {
    const double tau = p[kTau];
    const double sigma = std::abs(p[kSigma]);
    for (std::size_t i = 0; i < lo.size(); ++i) {
      const double mass = side == PeakSide::right
                              ? emg::interval(lo[i] - p[kT0], hi[i] - p[kT0], tau, sigma)
                              : emg::interval(p[kT0] - hi[i], p[kT0] - lo[i], tau, sigma);
      out[i] = p[kAmp] * mass + p[kBg];
    }
  }
};

bool feasible(const Params& p) {
  return std::isfinite(p[kTau]) && p[kTau] > 0.0 && p[kAmp] >= 0.0 &&
         std::all_of(p.begin(), p.end(), [](double v) { return std::isfinite(v); });
}

double chi2_of(std::span<const double> y, std::span<const double> m, std::span<const double> w,
               std::vector<double>& scratch) {
  scratch.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) scratch[i] = y[i] - m[i];
  return kernels::weighted_dot(scratch, scratch, w);
}

// Starting values from moments of the peak region.
Params initial_guess(std::span<const double> centers, std::span<const double> y, double width,
                     PeakSide side) {
  const std::size_t n = y.size();
  // step toward the tail / toward the rising edge, in index space
  const int tail = side == PeakSide::right ? 1 : -1;
  const std::size_t nfar = std::clamp<std::size_t>(n / 10, 1, 10);
  double bg = 0.0;
  for (std::size_t k = 0; k < nfar; ++k) bg += side == PeakSide::right ? y[n - 1 - k] : y[k];
  bg /= static_cast<double>(nfar);

  const auto peak_it = std::max_element(y.begin(), y.end());
  const auto peak = static_cast<std::ptrdiff_t>(peak_it - y.begin());
  const double height = *peak_it - bg;

  double amp = 0.0;
  for (double v : y) amp += v - bg;
  amp = std::max(amp, 1.0);

  // log-slope over the 10 bins after the peak
  double sx = 0, sy = 0, sxx = 0, sxy = 0, sw = 0;
  for (int k = 1; k <= 10; ++k) {
    const std::ptrdiff_t i = peak + tail * k;
    if (i < 0 || i >= static_cast<std::ptrdiff_t>(n)) break;
    const double v = y[static_cast<std::size_t>(i)] - bg;
    if (v <= 0.0) continue;
    const double x = static_cast<double>(tail) * (centers[static_cast<std::size_t>(i)] - centers[static_cast<std::size_t>(peak)]);
    const double lv = std::log(v);
    const double wt = v;  // Poisson weight of log(count)
    sw += wt;
    sx += wt * x;
    sy += wt * lv;
    sxx += wt * x * x;
    sxy += wt * x * lv;
  }
  double tau = 10.0 * width;
  const double det = sw * sxx - sx * sx;
  if (sw > 0.0 && det > 0.0) {
    const double slope = (sw * sxy - sx * sy) / det;
    if (slope < 0.0) tau = -1.0 / slope;
  }

  // 90% -> 10% crossing on the rising side
  double c90 = centers[static_cast<std::size_t>(peak)], c10 = c90;
  bool seen90 = false;
  for (std::ptrdiff_t i = peak; i >= 0 && i < static_cast<std::ptrdiff_t>(n); i -= tail) {
    const double v = y[static_cast<std::size_t>(i)] - bg;
    const double c = centers[static_cast<std::size_t>(i)];
    if (!seen90 && v < 0.9 * height) {
      c90 = c;
      seen90 = true;
    }
    if (v < 0.1 * height) {
      c10 = c;
      break;
    }
    c10 = c;
  }
  // 10-90% rise of a Gaussian edge spans 2.563 sigma
  const double sigma = std::max(std::abs(c90 - c10) / 2.563, 0.5 * width);

  Params p{};
  p[kAmp] = amp;
  p[kT0] = centers[static_cast<std::size_t>(peak)];
  p[kTau] = tau;
  p[kSigma] = sigma;
  p[kBg] = std::max(bg, 0.0);
  return p;
}

}  // namespace

EmgFit fit_emg(const BinnedCounts& data, PeakSide side, std::optional<TimeWindow> region,
               const FitSettings& settings) {
  if (data.edges.size() != data.counts.size() + 1 || data.counts.empty())
    throw FitError("fit_emg: edges must have one more entry than counts");

  std::vector<double> lo, hi, y, centers;
  for (std::size_t i = 0; i < data.counts.size(); ++i) {
    const double c = 0.5 * (data.edges[i] + data.edges[i + 1]);
    if (region && (c < region->min_ns || c > region->max_ns)) continue;
    lo.push_back(data.edges[i]);
    hi.push_back(data.edges[i + 1]);
    y.push_back(data.counts[i]);
    centers.push_back(c);
  }
  const double total = std::accumulate(y.begin(), y.end(), 0.0);
  if (y.empty() || !(total > 0.0)) throw FitError("fit_emg: peak region is empty");
  if (total < 50.0) throw FitError("fit_emg: peak region holds fewer than 50 counts");
  if (y.size() <= kParams) throw FitError("fit_emg: too few bins in peak region");

  const std::size_t n = y.size();
  const double width = (hi.back() - lo.front()) / static_cast<double>(n);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / std::max(y[i], 1.0);

  const PeakModel model{lo, hi, side};
  const Params scale{1.0, width, width, width, 1.0};
  Params p = initial_guess(centers, y, width, side);

  std::vector<double> m(n), scratch;
  std::array<std::vector<double>, kParams> jac;
  for (auto& col : jac) col.resize(n);
  std::vector<double> plus(n), minus(n), resid(n);

  const auto jacobian = [&](const Params& at) {
    for (int k = 0; k < kParams; ++k) {
      const double h = 1e-6 * std::max(std::abs(at[k]), scale[k]);
      Params a = at, b = at;
      a[k] += h;
      b[k] -= h;
      if (k == kTau) b[k] = std::max(b[k], 0.5 * at[k]);
      model.eval(a, plus);
      model.eval(b, minus);
      const double span = a[k] - b[k];
      for (std::size_t i = 0; i < n; ++i) jac[k][i] = (plus[i] - minus[i]) / span;
    }
  };
  const auto normal_matrix = [&] {
    Eigen::Matrix<double, kParams, kParams> jtj;
    for (int a = 0; a < kParams; ++a)
      for (int b = a; b < kParams; ++b) jtj(a, b) = jtj(b, a) = kernels::weighted_dot(jac[a], jac[b], w);
    return jtj;
  };

  model.eval(p, m);
  double chi2 = chi2_of(y, m, w, scratch);
  double lambda = 1e-3;
  EmgFit fit;
  fit.side = side;
  int iter = 0;
  int solves = 0;
  bool converged = false;
  std::string status = "iteration limit reached";

  while (iter < settings.max_iterations && solves < 20 * settings.max_iterations) {
    jacobian(p);
    for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - m[i];
    const auto jtj = normal_matrix();
    Eigen::Matrix<double, kParams, 1> g;
    for (int k = 0; k < kParams; ++k) g(k) = kernels::weighted_dot(jac[k], resid, w);

    bool accepted = false;
    Params step{};
    while (!accepted) {
      ++solves;
      Eigen::Matrix<double, kParams, kParams> a = jtj;
      for (int k = 0; k < kParams; ++k) a(k, k) += lambda * std::max(jtj(k, k), 1e-300);
      const Eigen::Matrix<double, kParams, 1> delta = a.ldlt().solve(g);
      Params trial = p;
      for (int k = 0; k < kParams; ++k) {
        step[k] = delta(k);
        trial[k] += delta(k);
      }
      trial[kSigma] = std::abs(trial[kSigma]);
      double trial_chi2 = std::numeric_limits<double>::infinity();
      if (feasible(trial)) {
        model.eval(trial, plus);
        trial_chi2 = chi2_of(y, plus, w, scratch);
      }
      if (trial_chi2 <= chi2) {
        p = trial;
        chi2 = trial_chi2;
        m.swap(plus);
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
      } else {
        lambda *= 10.0;
        if (lambda > 1e16) break;
      }
    }
    ++iter;
    if (!accepted) {
      converged = true;
      status = "converged (no further decrease)";
      break;
    }
    double rel = 0.0;
    for (int k = 0; k < kParams; ++k) rel = std::max(rel, std::abs(step[k]) / std::max(std::abs(p[k]), scale[k]));
    if (rel < settings.relative_tolerance) {
      converged = true;
      status = "converged";
      break;
    }
  }

  fit.amplitude = p[kAmp];
  fit.t0_ns = p[kT0];
  fit.tau_ns = p[kTau];
  fit.sigma_ns = std::abs(p[kSigma]);
  fit.background = p[kBg];
  fit.chi2 = chi2;
  fit.ndf = static_cast<int>(n) - kParams;
  fit.iterations = iter;
  fit.converged = converged;
  fit.status = status;

  jacobian(p);
  const Eigen::Matrix<double, kParams, kParams> jtj = normal_matrix();
  const Eigen::FullPivLU<Eigen::Matrix<double, kParams, kParams>> lu(jtj);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Eigen::Matrix<double, kParams, kParams> cov = Eigen::Matrix<double, kParams, kParams>::Constant(nan);
  if (lu.isInvertible()) cov = lu.inverse();
  const auto err = [&](int k) { return cov(k, k) >= 0.0 ? std::sqrt(cov(k, k)) : nan; };
  fit.amplitude_err = err(kAmp);
  fit.t0_err = err(kT0);
  fit.tau_err = err(kTau);
  fit.sigma_err = err(kSigma);
  fit.background_err = err(kBg);
  return fit;
}

EmgFit fit_emg_peak(const CoincidenceHistogram& hist, PeakSide side, std::optional<double> split_ns,
                    const FitSettings& settings) {
  hist.validate();
  std::optional<TimeWindow> region;
  if (split_ns) {
    const TimeWindow w = hist.window();
    region = side == PeakSide::left ? TimeWindow{w.min_ns, *split_ns} : TimeWindow{*split_ns, w.max_ns};
  }
  return fit_emg(BinnedCounts::from(hist), side, region, settings);
}

double EmgFit::peak_counts_in(TimeWindow window) const {
  const double mass = side == PeakSide::right
                          ? emg::interval(window.min_ns - t0_ns, window.max_ns - t0_ns, tau_ns, sigma_ns)
                          : emg::interval(t0_ns - window.max_ns, t0_ns - window.min_ns, tau_ns, sigma_ns);
  return amplitude * mass;
}

double accidental_rate(double rate_1_cps, double rate_2_cps, double window_ns) {
  if (!(rate_1_cps >= 0.0) || !(rate_2_cps >= 0.0) || !(window_ns >= 0.0))
    throw DomainError("accidental_rate: rates and window must be >= 0");
  return rate_1_cps * rate_2_cps * window_ns * 1e-9;
}

double differential_intensity(double coincidence_rate_cps, double breakdown_rate_cps,
                              double solid_angle_sr) {
  if (!(breakdown_rate_cps > 0.0)) throw DomainError("differential_intensity: breakdown rate must be > 0");
  if (!(solid_angle_sr > 0.0)) throw DomainError("differential_intensity: solid angle must be > 0");
  return coincidence_rate_cps / breakdown_rate_cps / solid_angle_sr;
}

NetCoincidenceRate net_coincidence_rate(std::int64_t pairs_in_window, double total_time_s,
                                        double rate_1_cps, double rate_2_cps, TimeWindow window) {
  if (!(total_time_s > 0.0)) throw DomainError("net_coincidence_rate: total time must be > 0");
  NetCoincidenceRate r;
  r.raw_pairs = pairs_in_window;
  r.raw_rate_cps = static_cast<double>(pairs_in_window) / total_time_s;
  r.accidental_rate_cps = accidental_rate(rate_1_cps, rate_2_cps, window.width());
  r.net_rate_cps = r.raw_rate_cps - r.accidental_rate_cps;
  r.net_rate_err_cps = std::sqrt(static_cast<double>(pairs_in_window)) / total_time_s;
  return r;
}

void write_histogram(std::ostream& out, const CoincidenceHistogram& hist, const csv::Metadata& extra) {
  csv::Metadata meta = extra;
  meta["window_min_ns"] = csv::format_double(hist.window().min_ns);
  meta["window_max_ns"] = csv::format_double(hist.window().max_ns);
  meta["bin_width_ns"] = csv::format_double(hist.bin_width_ns);
  meta["total_time_s"] = csv::format_double(hist.total_time_s);
  meta["rate_1_cps"] = csv::format_double(hist.rate_1_cps);
  meta["rate_2_cps"] = csv::format_double(hist.rate_2_cps);
  for (const auto& [key, value] : meta) out << "# " << key << " = " << value << '\n';
  out << "bin_start_ns,count\n";
  for (std::size_t i = 0; i < hist.bins(); ++i)
    out << csv::format_fixed(hist.edge(i), 6) << ',' << hist.counts[i] << '\n';
}

CoincidenceHistogram read_histogram(std::istream& in, const std::string& source) {
  csv::Reader reader(in, source, {"bin_start_ns", "count"});
  CoincidenceHistogram h;
  std::vector<double> starts;
  while (auto row = reader.next()) {
    starts.push_back(reader.to_double((*row)[0], "bin_start_ns"));
    const auto c = reader.to_int((*row)[1], "count");
    if (c < 0) reader.fail("negative count");
    h.counts.push_back(c);
  }
  if (starts.empty()) reader.fail("no bins");
  const auto& meta = reader.metadata();
  h.t_min_ns = starts.front();
  if (const auto w = csv::metadata_double(meta, "bin_width_ns"))
    h.bin_width_ns = *w;
  else if (starts.size() >= 2)
    h.bin_width_ns = starts[1] - starts[0];
  h.total_time_s = csv::metadata_double(meta, "total_time_s").value_or(0.0);
  h.rate_1_cps = csv::metadata_double(meta, "rate_1_cps").value_or(0.0);
  h.rate_2_cps = csv::metadata_double(meta, "rate_2_cps").value_or(0.0);
  h.validate();
  return h;
}

}  // namespace backflash
