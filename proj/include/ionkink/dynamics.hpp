#pragma once

// Langevin molecular dynamics of the driven, laser-cooled crystal.
//
// Integrator: BAOAB splitting. The O substep is the exact Ornstein-Uhlenbeck
// update v <- c1 v + sqrt((1 - c1^2) kT) xi with c1 = exp(-gamma dt), applied
// per axis, which fixes the noise strength D = gamma kT / m for any dt. With
// gamma = 0 and T = 0 the scheme is velocity Verlet.

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "ionkink/kink.hpp"
#include "ionkink/model.hpp"
#include "ionkink/rng.hpp"

namespace ionkink {

struct LangevinParams {
  std::array<double, 3> gamma{};        // rad/s per axis (gamma / m)
  std::array<double, 3> temperature{};  // K per axis
  double dt = 0;                        // dimensionless
  std::uint64_t seed = 0;
  std::uint64_t trajectory_index = 0;

  /// Laser cooling along x with gamma_x / m; radial axes get radial_ratio of
  /// it. All axes at `temperature_k`.
  static LangevinParams laser_cooling(double gamma_x, double radial_ratio, double temperature_k,
                                      double dt);
};

/// 2 pi / (50 w_max) in dimensionless time; w_max in rad/s.
double default_timestep(double omega_max, const UnitSystem& units);

/// Throws Configuration when dt exceeds 2 pi / (50 w_max) (w_max in rad/s).
void check_timestep(double dt, double omega_max, const UnitSystem& units);

/// Amplitude envelope of the drive: linear ramp from `start` over `ramp`,
/// full amplitude until `stop`, then off. All dimensionless times.
struct DriveWindow {
  double start = 0;
  double stop = std::numeric_limits<double>::infinity();
  double ramp = 0;
  double envelope(double t) const;
};

/// Stateful BAOAB integrator for one trajectory. Noise for step k is the
/// fill_normals(k) block of the (seed, trajectory_index) stream, so a trajectory is reproducible
/// from its parameters alone.
class LangevinIntegrator {
 public:
  LangevinIntegrator(const TrapModel& trap, const LangevinParams& params, DriveWindow window = {});

  /// Advances `state` by one step of params.dt. Throws NumericalBlowup.
  void step(CrystalState& state);
  void run(CrystalState& state, std::uint64_t n_steps);

  std::uint64_t steps_taken() const { return step_; }
  /// Potential energy at the current state (valid after the first step or
  /// after prime()).
  double potential_energy() const { return energy_; }
  void prime(const CrystalState& state);

  const TrapModel& trap() const { return trap_; }
  const LangevinParams& params() const { return params_; }

 private:
  double drive_at(double t) const;

  TrapModel trap_;
  LangevinParams params_;
  DriveWindow window_;
  NoiseStream noise_;
  std::array<double, 3> c1_{};
  std::array<double, 3> c2_{};
  Eigen::VectorXd force_;
  std::vector<double> noise_buffer_;
  double energy_ = 0;
  bool primed_ = false;
  std::uint64_t step_ = 0;
};

/// Convenience wrapper: copies `state` and advances it one step.
CrystalState step(const CrystalState& state, const TrapModel& trap, const LangevinParams& langevin);

/// Thermal sample around an equilibrium in the harmonic approximation:
/// normal-mode amplitudes with variance kT / lambda and Maxwell velocities,
/// both at the x-axis bath temperature. Uses the reserved setup counters of
/// the trajectory's noise stream.
CrystalState thermal_state(const CrystalState& equilibrium, const TrapModel& trap,
                           const LangevinParams& langevin);

struct TrajectorySample {
  double time_ms = 0;
  double kinetic_energy = 0;  // dimensionless, whole crystal
  KinkObservation kink;
};

struct TrajectoryOptions {
  double duration_ms = 10;
  double drive_ramp_us = 100;
  double observer_stride_us = 10;
  double escape_dwell_ms = 0.5;
  bool stop_on_escape = true;
  bool record_samples = true;
};

struct TrajectoryRecord {
  std::vector<TrajectorySample> samples;
  CrystalState final_state;
  EscapeEvent escape;
  std::uint64_t seed = 0;
  std::uint64_t trajectory_index = 0;
  std::uint64_t steps = 0;
  /// Time-averaged kinetic energy over all samples with the kink present.
  double mean_kinetic_energy_kink_present = 0;
  int kink_present_samples = 0;
};

/// Integrates with the drive on from t = 0 (ramped) for the whole duration,
/// observing the kink every stride and stopping on a confirmed escape.
TrajectoryRecord run_trajectory(const CrystalState& initial, const TrapModel& trap,
                                const LangevinParams& langevin, const TrajectoryOptions& options);

struct SteadyStateOptions {
  double settle_ms = 5;
  double average_ms = 5;
  int trajectories = 4;
  double max_drift = 0.05;
  double observer_stride_us = 10;
  double drive_ramp_us = 100;
  /// Only samples with the kink present enter the average.
  bool require_kink = true;
};

struct SteadyStateResult {
  double kinetic_energy = 0;  // dimensionless
  double standard_error = 0;
  double drift = 0;           // mean relative trend over the averaging window
  int samples = 0;
};

/// Ensemble- and time-averaged kinetic energy of the driven crystal after
/// settling. Starts each trajectory from a thermal sample around `initial`.
/// Throws NotSettled when the mean per-trajectory linear trend over the
/// averaging window exceeds `max_drift` of the mean and three standard errors.
SteadyStateResult steady_state_energy(const CrystalState& initial, const TrapModel& trap,
                                      const LangevinParams& langevin, double epsilon,
                                      double omega_d, const SteadyStateOptions& options = {});

/// T = 2 E_k / (3 N k_B), in kelvin.
double effective_temperature(double kinetic_energy, int n_ions, const UnitSystem& units);

}  // namespace ionkink
