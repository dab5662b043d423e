#pragma once

// Statistical reductions of escape ensembles: survival curves, censored
// lifetime fits, resonance scans, temperature calibration, the Arrhenius
// (Kramers) barrier fit and transport directionality.
//
// Times are in ms and frequencies in Hz throughout; temperatures in kelvin
// except where a field says k_B T_D.

#include <cstdint>
#include <optional>
#include <vector>

#include "ionkink/kink.hpp"
#include "ionkink/model.hpp"

namespace ionkink {

/// One trajectory's outcome. For an escape `time_ms` is the escape time,
/// otherwise it is the observed (censoring) duration.
struct EscapeOutcome {
  bool escaped = false;
  double time_ms = 0;
  std::optional<EscapeDirection> direction;
  int charge = 1;
};

EscapeOutcome to_outcome(const EscapeEvent& event, double duration_ms, int charge);

struct BinomialEstimate {
  double probability = 0;
  double error = 0;  // sqrt(p (1 - p) / n)
  int successes = 0;
  int trials = 0;
};

BinomialEstimate binomial_estimate(int successes, int trials);

// --- survival and lifetimes -------------------------------------------------

struct SurvivalCurve {
  std::vector<double> time_ms;
  std::vector<double> survival;
  std::vector<double> error;  // Greenwood; binomial when nothing is censored
  std::vector<int> at_risk;
};

/// Kaplan-Meier estimate on `t_grid_ms`. Throws EmptyEnsemble.
SurvivalCurve survival_curve(const std::vector<EscapeOutcome>& events,
                             const std::vector<double>& t_grid_ms);

struct LifetimeFit {
  double tau_ms = 0;
  double ci68_low_ms = 0;
  double ci68_high_ms = 0;
  int n_escapes = 0;
  int n_censored = 0;
  double exposure_ms = 0;      // summed observation time
  double background_rate = 0;  // 1/ms subtracted from the fitted rate
};

inline constexpr int kMinEscapes = 5;

/// Censored exponential MLE: rate = n_escapes / exposure, minus an optional
/// constant background rate (1/ms). The 68% interval is where the profile
/// log-likelihood drops by 1/2. Throws TooFewEscapes below kMinEscapes.
LifetimeFit fit_lifetime(const std::vector<EscapeOutcome>& events, double background_rate = 0);

struct KSResult {
  double statistic = 0;
  double p_value = 0;
  int n = 0;
};

/// One-sample Kolmogorov-Smirnov test of the escape times against the
/// exponential with mean `tau_ms` conditioned on escape before `window_ms`
/// (use infinity for uncensored data). Asymptotic p-value with Stephens'
/// small-sample correction.
KSResult ks_exponential(const std::vector<EscapeOutcome>& events, double tau_ms,
                        double window_ms);

/// Survival function of the Kolmogorov distribution, P(K > x).
double kolmogorov_survival(double x);

// --- resonance scans ----------------------------------------------------------

struct ScanPoint {
  double frequency_hz = 0;
  int escapes = 0;
  int trajectories = 0;
  BinomialEstimate estimate() const { return binomial_estimate(escapes, trajectories); }
};

struct LorentzPeak {
  double center_hz = 0;
  double width_hz = 0;  // half width at half maximum
  double amplitude = 0;
  double center_error_hz = 0;
  double width_error_hz = 0;
  double amplitude_error = 0;
};

struct LorentzianFit {
  std::vector<LorentzPeak> peaks;  // sorted by amplitude, strongest first
  double offset = 0;
  double offset_error = 0;
  double chi_squared = 0;
  int dof = 0;
  double r_squared = 0;
};

/// offset + sum_k A_k G_k^2 / ((f - f_k)^2 + G_k^2) at frequency f.
double lorentzian_model(const LorentzianFit& fit, double frequency_hz);

/// Weighted least squares (Levenberg-Marquardt) with multi-start
/// initialization; `n_peaks` is 1 or 2. Weights come from binomial errors,
/// floored for p = 0 or 1. Throws TooFewPoints (< 8 points) and FitDiverged.
LorentzianFit fit_lorentzian(const std::vector<ScanPoint>& scan, int n_peaks = 1);

/// Generic form on (x, y, sigma) data; sigma <= 0 everywhere means unit
/// weights with the covariance scaled by the reduced chi-squared.
LorentzianFit fit_lorentzian(const std::vector<double>& x, const std::vector<double>& y,
                             const std::vector<double>& sigma, int n_peaks = 1);

// --- temperature calibration and Kramers fit ---------------------------------

struct EnergySample {
  double epsilon = 0;
  double kinetic_energy = 0;  // dimensionless, whole crystal
};

/// Linear map eps -> E_k -> T = 2 E_k / (3 N k_B).
class TemperatureMap {
 public:
  TemperatureMap() = default;
  TemperatureMap(double intercept, double slope, double r_squared, double max_epsilon, int n_ions,
                 UnitSystem units);

  /// T in kelvin. Throws Extrapolation beyond 1.5x the largest calibrated eps
  /// unless `allow_extrapolation`.
  double temperature_k(double epsilon, bool allow_extrapolation = false) const;
  double kinetic_energy(double epsilon) const { return intercept_ + slope_ * epsilon; }
  bool extrapolates(double epsilon) const;

  double intercept() const { return intercept_; }
  double slope() const { return slope_; }
  double r_squared() const { return r_squared_; }
  double max_epsilon() const { return max_epsilon_; }
  /// Relative deviation of the intercept from (3N/2) k_B T_D.
  double intercept_deviation() const;

  /// T(eps) = T0 + b eps in kelvin, for externally specified calibrations.
  static TemperatureMap linear(double t0_k, double slope_k, double max_epsilon, int n_ions,
                               UnitSystem units);

 private:
  double intercept_ = 0;
  double slope_ = 0;
  double r_squared_ = 1;
  double max_epsilon_ = 0;
  int n_ions_ = 1;
  UnitSystem units_{};
};

inline constexpr double kMinCalibrationR2 = 0.9;

/// Least-squares line through (eps, E_k). Requires eps = 0 among the samples
/// and at least 3 distinct eps unless all samples are at eps = 0 (then the
/// map is constant). Throws TooFewPoints, PoorFit (R^2 < 0.9).
TemperatureMap calibrate_temperature(const std::vector<EnergySample>& samples, int n_ions,
                                     const UnitSystem& units);

struct LifetimePoint {
  double epsilon = 0;
  double tau_ms = 0;
};

struct KramersFit {
  double w_kbtd = 0;        // barrier in k_B T_D
  double w_error_kbtd = 0;  // standard error of the slope
  double ln_prefactor = 0;  // tau = prefactor sqrt(T / T_D) exp(W / k_B T), tau in ms
  double r_squared = 0;
  bool negative_barrier = false;
  std::vector<double> temperature_k;  // per input point
  std::vector<double> inverse_temperature;  // T_D / T
  std::vector<double> reduced_log_tau;      // ln tau - 1/2 ln(T / T_D)
};

/// Regression of ln tau - 1/2 ln T against 1/T. Throws TooFewPoints when
/// fewer than 3 distinct temperatures remain.
KramersFit fit_kramers(const std::vector<LifetimePoint>& lifetimes, const TemperatureMap& map);
KramersFit fit_kramers_temperatures(const std::vector<double>& temperature_k,
                                    const std::vector<double>& tau_ms);

/// tau = prefactor sqrt(T / T_D) exp(W T_D / T), tau in ms.
double kramers_lifetime(double w_kbtd, double prefactor_ms, double temperature_k);

// --- directionality ------------------------------------------------------------

struct DirectionalityResult {
  double td = 0;
  double error = 0;  // 1 sigma
  int charge = 1;
  double epsilon = 0;
  int n_right = 0;
  int n_left = 0;
};

inline constexpr int kMinDirectionalEscapes = 10;

/// td = (N_R - N_L) / (N_R + N_L) over escapes with a resolved direction
/// and the given charge. Throws TooFewEscapes below 10 such escapes.
DirectionalityResult directionality(const std::vector<EscapeOutcome>& events, int charge,
                                    double epsilon = 0);

/// |td_a - td_b| in units of the combined 1 sigma error.
double td_separation(const DirectionalityResult& a, const DirectionalityResult& b);

// --- synthetic data --------------------------------------------------------------

/// Exponential escape times with mean tau_ms, censored at window_ms, drawn
/// from the counter-based stream (seed, stream).
std::vector<EscapeOutcome> synthetic_escapes(double tau_ms, double window_ms, int n,
                                             std::uint64_t seed, std::uint64_t stream);

}  // namespace ionkink
