#pragma once

// Passive-quench discharge pulse: the current through the measurement
// resistor is the breakdown charge times an exponentially modified Gaussian
// (one-sided exponential decay convolved with Gaussian jitter). The same
// normalized shape describes the flash photon emission times.
//
// Units: ns, pC, pF, V, mA (pC/ns).

namespace backflash {

struct BreakdownProfile {
  double total_charge_pc = 64.0;
  double decay_tau_ns = 2.75;
  double jitter_sigma_ns = 0.72;
  // Lag of the pulse onset after the discriminator timestamp.
  double onset_t0_ns = 3.0;
  double overvoltage_v = 20.0;

  // tau > 0, sigma >= 0, all finite. Throws InvalidProfile.
  void validate_shape() const;
  // validate_shape() plus Q_D > 0 and overvoltage > 0.
  void validate() const;
};

// Alternate decay constant quoted for the peak shapes in the coincidence
// histogram caption; the fitted 2.75 ns is the default.
inline constexpr double kAlternateDecayTauNs = 2.9;

namespace emg {

// Density and CDF of x = E + G with E ~ Exp(tau) and G ~ N(0, sigma^2).
// sigma == 0 gives the pure exponential.
double density(double x, double tau, double sigma);
double cdf(double x, double tau, double sigma);

// cdf(b) - cdf(a), evaluated without cancellation in the far tails.
double interval(double a, double b, double tau, double sigma);

// exp(z^2) * erfc(z) for z >= 0 without overflow.
double erfcx(double z);

}  // namespace emg

// Normalized time density (1/ns) of the pulse, emg::density(t - t0).
double emg_density(double t_ns, const BreakdownProfile& profile);
double emg_cdf(double t_ns, const BreakdownProfile& profile);

// I_D(t) = Q_D * emg_density(t), in mA. Q_D == 0 gives zero current.
double discharge_current(double t_ns, const BreakdownProfile& profile);

struct PulsePeak {
  double time_ns;
  double current_ma;
};

PulsePeak discharge_peak(const BreakdownProfile& profile);

// C_p = Q_D / dV, assuming the parasitic capacitance supplies the pulse.
// Throws DomainError for dV <= 0.
double parasitic_capacitance(double charge_pc, double overvoltage_v);

}  // namespace backflash
