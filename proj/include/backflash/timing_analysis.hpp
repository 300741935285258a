#pragma once

// Coincidence timing analysis of a two-detector event stream.
//
// Pairing convention: dt = t_1 - t_2 with t_1 the (delay-line shifted)
// detector-1 timestamp. With a delay D, flashes of detector 1 seen by
// detector 2 land at dt = D - (emission delay), i.e. a peak with its
// exponential tail toward smaller dt ("left" peak); the reverse process lands
// at dt = D + (emission delay) ("right" peak).

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "backflash/csv.hpp"
#include "backflash/events.hpp"

namespace backflash {

struct TimeWindow {
  double min_ns = 0.0;
  double max_ns = 0.0;

  double width() const { return max_ns - min_ns; }
};

inline constexpr double kDefaultBinWidthNs = 0.2;
inline constexpr TimeWindow kDefaultHistogramRange{-40.0, 160.0};
// Integration window for the net coincidence rate of the left peak.
inline constexpr TimeWindow kNetRateWindow{20.0, 62.0};
inline constexpr double kDefaultPeakSplitNs = 63.0;

struct CoincidenceHistogram {
  double t_min_ns = 0.0;
  double bin_width_ns = kDefaultBinWidthNs;
  std::vector<std::int64_t> counts;
  double total_time_s = 0.0;
  double rate_1_cps = 0.0;
  double rate_2_cps = 0.0;

  std::size_t bins() const { return counts.size(); }
  double edge(std::size_t i) const { return t_min_ns + static_cast<double>(i) * bin_width_ns; }
  std::vector<double> bin_edges() const;
  TimeWindow window() const { return {t_min_ns, edge(counts.size())}; }
  std::int64_t total() const;
  void validate() const;
};

// Pairs every detector-1 event with every detector-2 event within
// |t_1 - t_2| <= pair_window and bins dt when it falls inside range.
// Singles rates use total_time_s, or the stream's span when absent.
// Throws DomainError on unsorted input.
CoincidenceHistogram build_histogram(std::span<const EventRecord> events, double pair_window_ns,
                                     TimeWindow range, double bin_width_ns,
                                     std::optional<double> total_time_s = std::nullopt);

// Number of (detector 1, detector 2) pairs with dt in [min, max].
std::int64_t count_pairs(std::span<const EventRecord> events, TimeWindow window);

// Bin edges plus real-valued counts; the fitter's input.
struct BinnedCounts {
  std::vector<double> edges;
  std::vector<double> counts;

  static BinnedCounts from(const CoincidenceHistogram& hist);
};

enum class PeakSide { left, right };

struct EmgFit {
  PeakSide side = PeakSide::right;
  double tau_ns = 0.0;
  double sigma_ns = 0.0;
  double t0_ns = 0.0;           // onset in dt coordinates
  double amplitude = 0.0;       // counts in the whole peak
  double background = 0.0;      // flat counts per bin
  double tau_err = 0.0;
  double sigma_err = 0.0;
  double t0_err = 0.0;
  double amplitude_err = 0.0;
  double background_err = 0.0;
  double chi2 = 0.0;
  int ndf = 0;
  int iterations = 0;
  bool converged = false;
  std::string status;

  // Expected peak counts (background excluded) with dt inside window.
  double peak_counts_in(TimeWindow window) const;
};

struct FitSettings {
  double relative_tolerance = 1e-8;
  int max_iterations = 200;
};

// Weighted least squares (variance max(count, 1)) of amplitude * EMG plus a
// flat background over the bins inside region. Throws FitError when the
// region is all zero or holds fewer than 50 counts; a fit that does not
// converge is returned with converged == false and the best iterate.
EmgFit fit_emg(const BinnedCounts& data, PeakSide side, std::optional<TimeWindow> region = std::nullopt,
               const FitSettings& settings = {});

// Fits one peak of a two-peak histogram, split at split_ns (left peak below,
// right peak above). Without a split the whole histogram is used.
EmgFit fit_emg_peak(const CoincidenceHistogram& hist, PeakSide side,
                    std::optional<double> split_ns = std::nullopt, const FitSettings& settings = {});

// r1 * r2 * window, in counts/s.
double accidental_rate(double rate_1_cps, double rate_2_cps, double window_ns);

// (coincidence_rate / breakdown_rate) / solid_angle, photons/sr as detected.
// Accidentals must be subtracted beforehand.
double differential_intensity(double coincidence_rate_cps, double breakdown_rate_cps,
                              double solid_angle_sr);

struct NetCoincidenceRate {
  std::int64_t raw_pairs = 0;
  double raw_rate_cps = 0.0;
  double accidental_rate_cps = 0.0;
  double net_rate_cps = 0.0;
  double net_rate_err_cps = 0.0;  // Poisson error of the raw pairs
};

NetCoincidenceRate net_coincidence_rate(std::int64_t pairs_in_window, double total_time_s,
                                        double rate_1_cps, double rate_2_cps, TimeWindow window);

// Histogram file: `bin_start_ns,count` preceded by '#' metadata lines
// (window, bin width, total time, singles rates, plus any extra entries).
void write_histogram(std::ostream& out, const CoincidenceHistogram& hist,
                     const csv::Metadata& extra = {});
CoincidenceHistogram read_histogram(std::istream& in, const std::string& source = "<stream>");

}  // namespace backflash
