#pragma once

// Kink collective coordinate, escape detection and the Peierls-Nabarro
// landscape.
//
// The collective coordinate is the interpolated zero crossing of the
// staggered transverse field s_k = (-1)^k (y_k - <y>) along the axially
// sorted chain, smoothed over three neighbouring ions. Charge follows
// classify(): - to + (left to right) is +1.

#include <optional>
#include <vector>

#include "ionkink/equilibria.hpp"
#include "ionkink/model.hpp"

namespace ionkink {

struct KinkObservation {
  bool present = false;
  double x_coordinate = 0;  // l0, meaningful only when present
  int charge = 0;           // +1 / -1 when present, 0 otherwise
  double confidence = 0;    // 0..1, sharpness of the sign change
};

KinkObservation observe_kink(const CrystalState& state, const TrapModel& trap);
KinkObservation observe_kink(const Eigen::VectorXd& positions);

enum class EscapeDirection { Left, Right };

struct EscapeEvent {
  bool escaped = false;
  bool inconclusive = false;  // kink absent without any prior coordinate
  double time_ms = 0;
  std::optional<EscapeDirection> direction;
  int charge_at_escape = 0;
};

struct TimedObservation {
  double time_ms = 0;
  KinkObservation observation;
};

struct CrystalExtent {
  double x_min = 0;
  double x_max = 0;
  double center() const { return 0.5 * (x_min + x_max); }
};

CrystalExtent crystal_extent(const Eigen::VectorXd& positions);

/// Observations below this confidence are not used to attribute direction.
inline constexpr double kDirectionConfidence = 0.5;

/// Incremental escape detector: feed time-ordered observations; the event is
/// final once the kink has been absent for `dwell_ms`.
class EscapeDetector {
 public:
  EscapeDetector(CrystalExtent extent, double dwell_ms);

  /// Returns true once an escape (or an inconclusive disappearance) is final.
  bool push(double time_ms, const KinkObservation& obs);
  bool done() const { return done_; }
  const EscapeEvent& event() const { return event_; }

 private:
  CrystalExtent extent_;
  double dwell_ms_;
  bool done_ = false;
  EscapeEvent event_;
  std::optional<double> absent_since_;
  std::optional<KinkObservation> last_confident_;
  std::optional<KinkObservation> last_present_;
};

EscapeEvent detect_escape(const std::vector<TimedObservation>& stream, CrystalExtent extent,
                          double dwell_ms = 0.5);

struct PNSample {
  double kink_x = 0;   // l0; crystal edge coordinate once the kink has left
  bool kink_present = false;
  double energy = 0;   // dimensionless, relative to the centred kink
};

struct PNLandscape {
  std::vector<PNSample> samples;  // ordered by kink_x, left edge to right edge
  double barrier_left = 0;        // dimensionless
  double barrier_right = 0;
  double kink_energy = 0;         // absolute energy of the centred kink
  double zigzag_energy_left = 0;  // absolute endpoint energies
  double zigzag_energy_right = 0;
  int charge = 1;
  double mean_barrier() const { return 0.5 * (barrier_left + barrier_right); }
};

struct PathOptions {
  int images_per_side = 64;        // landscape samples per side
  double force_tolerance = 1e-9;   // max force component at stationary points
  int max_iterations = 5000;       // per saddle search and per descent
  int search_modes = 12;           // softest kink modes followed uphill
};

/// Minimum-energy paths from the relaxed centred kink to the kink-free
/// crystal through the left and through the right edge. Saddles are found by
/// eigenvector following from the kink; each path is the steepest-descent
/// path from the lowest qualifying saddle on that side. Throws NoConvergence.
PNLandscape pn_landscape(const TrapModel& trap, int n_ions, int charge,
                         const PathOptions& options = {});

struct QuadraticFit {
  double curvature = 0;  // energy = c0 + c1 x + curvature x^2
  double c0 = 0, c1 = 0;
  double relative_residual = 0;  // rms residual / energy span in window
  int points = 0;
};

/// Samples closer than this in kink coordinate (l0) are one path plateau.
inline constexpr double kPlateauWidth = 0.1;

/// Quadratic fit of the landscape over the central `fraction` of the kink
/// coordinate span. Consecutive kink-present samples within kPlateauWidth
/// are first averaged into one point. Throws InsufficientData below 4 points.
QuadraticFit fit_center_quadratic(const PNLandscape& landscape, double fraction = 0.5);

struct DampingEstimate {
  double rate = 0;             // g, in inverse units of the stride time
  double decay_time = 0;       // 1/e time of the velocity autocorrelation
  std::vector<double> autocorrelation;  // normalized, lag 0..max_lag
};

/// Velocity autocorrelation of the finite-difference velocity of X(t);
/// g = 1 / (1/e decay time), linear interpolation between lags.
DampingEstimate kink_damping_estimate(const std::vector<double>& x, double stride,
                                      int max_lag = 0);

struct PowerLawFit {
  double exponent = 0;
  double prefactor = 0;
  double exponent_error = 0;
  double r_squared = 0;
};

/// Least-squares fit of log g = log A + p log E_k.
PowerLawFit fit_damping_power_law(const std::vector<double>& kinetic_energy,
                                  const std::vector<double>& damping_rate);

}  // namespace ionkink
