#pragma once

// Experiment orchestration behind the command-line tool: configuration,
// trajectory ensembles on a worker pool, and the per-command pipelines.
// Everything here is usable without the CLI front end.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ionkink/analysis.hpp"
#include "ionkink/dynamics.hpp"
#include "ionkink/equilibria.hpp"
#include "ionkink/kink.hpp"
#include "ionkink/modes.hpp"

namespace ionkink {

inline constexpr const char* kToolVersion = "1.0.0";

struct ExperimentConfig {
  struct Units {
    double mass_amu = 24;
    double charge_e = 1;
  } units;
  struct Trap {
    double f_x_hz = 38.2e3;
    double f_y_hz = 232.3e3;
    double f_z_hz = 293.0e3;
    double alpha_x = 0;
    double alpha_y = 0;
    double beta_x = 0;
    double beta_y = 0;
    double c_xxy = 0;
    std::optional<double> kappa;  // rad^2/s^2
  } trap;
  struct Langevin {
    double gamma_x_hz = 300;  // gamma_x / m = 2 pi * gamma_x_hz
    double radial_ratio = 0.01;
    double temperature_mk = 1;
  } langevin;
  struct DriveSection {
    double epsilon = 3e-3;
    std::optional<double> f_d_hz;  // unset: the kink's drive-target mode
    double duration_ms = 10;
    double ramp_us = 100;
  } drive;
  struct Run {
    int n_ions = 34;
    std::uint64_t seed = 1;
    int n_trajectories = 20;
    std::optional<double> dt_override;  // dimensionless
    double observer_stride_us = 10;
    double escape_dwell_ms = 0.5;
  } run;
  struct Sweep {
    std::string parameter;  // "", "f_d_hz" or "epsilon"
    std::vector<double> values;
  } sweep;
  /// Auxiliary steady-state runs mapping eps to a temperature.
  struct Calibration {
    double settle_ms = 5;
    double average_ms = 5;
    int trajectories = 4;
    std::vector<double> epsilons;  // empty: 0 and the swept values
  } calibration;
  /// Escape-time generator for --synthetic: tau = prefactor sqrt(T / T_D)
  /// exp(W T_D / T) with T = t0 + slope * eps.
  struct Synthetic {
    double w_kbtd = 26.5;
    double prefactor_ms = 0.0161;
    double t0_mk = 1.0;
    double slope_mk = 1450;  // mK per unit eps
  } synthetic;

  /// Scaled preset (default): 10 ms excitations, 20 trajectories per point.
  static ExperimentConfig scaled();
  /// Full-scale preset: 85 ms excitations, 100 repetitions per point.
  static ExperimentConfig full();

  /// Strict parse: unknown keys, wrong types and invalid values throw
  /// Error(Configuration). An optional top-level "preset" ("scaled" or
  /// "full") selects the defaults the other keys override.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  /// FNV-1a hash of the canonical JSON, as 16 hex digits.
  std::string digest() const;

  void validate() const;
  TrapModel trap_model() const;
  /// Bath parameters; the timestep is dt_override (checked against the
  /// stability rule) or the default for `omega_max` (rad/s).
  LangevinParams langevin_params(const TrapModel& trap, double omega_max) const;
  TrajectoryOptions trajectory_options() const;
};

/// One trajectory of an ensemble. `point` indexes the sweep value.
struct TrajectoryJob {
  int point = 0;
  std::uint64_t trajectory_index = 0;
  int charge = 1;
  double epsilon = 0;
  double f_d_hz = 0;
};

struct TrajectoryResult {
  TrajectoryJob job;
  EscapeOutcome outcome;
  bool inconclusive = false;
  double mean_kinetic_energy = 0;  // kink present, dimensionless
  std::uint64_t steps = 0;
};

nlohmann::json to_json(const TrajectoryResult& r);
TrajectoryResult trajectory_result_from_json(const nlohmann::json& j);

/// Worker-pool settings shared by the ensemble commands.
struct RunControl {
  int workers = 1;
  /// Append-only record of finished trajectories; existing entries are
  /// reused, so an interrupted run resumes where it stopped.
  std::optional<std::filesystem::path> journal;
  std::function<void(const std::string&)> progress;
  /// Set from outside (e.g. SIGINT) to stop scheduling new trajectories.
  const std::atomic<bool>* stop = nullptr;
};

/// Runs the jobs in parallel. Results come back in job order whatever the
/// completion order. Throws Error(Interrupted) when stopped early.
std::vector<TrajectoryResult> run_ensemble(const ExperimentConfig& config,
                                           const std::vector<TrajectoryJob>& jobs,
                                           const RunControl& control);

/// Trajectory index of trajectory j at sweep point p. Charges share indices
/// so paired ensembles see the same noise.
std::uint64_t trajectory_index(int point, int j);

// --- command pipelines ---------------------------------------------------------

/// "zigzag", "kink" or "kink_bar".
EquilibriumResult run_relax(const ExperimentConfig& config, const std::string& configuration);

struct ModesReport {
  ModeSpectrum spectrum;
  EquilibriumResult equilibrium;
  std::optional<KinkModeReport> kink_modes;  // kink configurations only
};

ModesReport run_modes(const ExperimentConfig& config, const std::string& configuration);

/// Drive frequency in Hz: the configured one or the kink's drive target.
double resonant_drive_hz(const ExperimentConfig& config);

struct SpectroscopyResult {
  std::vector<ScanPoint> scan;
  std::optional<LorentzianFit> single_peak;
  std::optional<LorentzianFit> double_peak;
  std::optional<KinkMode> drive_target;
  std::optional<KinkMode> secondary_resonance;
  std::vector<std::string> notices;
  std::vector<TrajectoryResult> trajectories;
};

SpectroscopyResult run_spectroscopy(const ExperimentConfig& config, const RunControl& control);

struct LifetimePointResult {
  double epsilon = 0;
  std::vector<EscapeOutcome> events;
  SurvivalCurve survival;
  std::optional<LifetimeFit> fit;
  std::optional<KSResult> ks;
  std::string notice;
};

struct LifetimeResult {
  double f_d_hz = 0;
  std::vector<LifetimePointResult> points;
  std::vector<EnergySample> calibration_samples;
  std::optional<TemperatureMap> temperature_map;
  std::optional<KramersFit> kramers;
  std::vector<std::string> notices;
  std::vector<TrajectoryResult> trajectories;
};

/// Ensembles per eps (sweep "epsilon", or the single drive eps), lifetime
/// fits, temperature calibration and the Kramers fit. With `synthetic` the
/// escape times come from the configured Arrhenius law instead of MD.
LifetimeResult run_lifetime(const ExperimentConfig& config, const RunControl& control,
                            bool synthetic);

struct DirectionalityReport {
  double f_d_hz = 0;
  std::vector<DirectionalityResult> results;  // per (charge, eps)
  std::vector<PNLandscape> landscapes;        // per charge
  std::vector<std::string> notices;
  std::vector<TrajectoryResult> trajectories;
};

DirectionalityReport run_directionality(const ExperimentConfig& config,
                                        const std::vector<int>& charges,
                                        const RunControl& control, bool with_landscapes = true);

PNLandscape run_pn(const ExperimentConfig& config, int charge);

// --- persistence ---------------------------------------------------------------

struct OutputDir {
  std::filesystem::path path;
  explicit OutputDir(std::filesystem::path p);
  void write_text(const std::string& name, const std::string& text) const;
  void write_json(const std::string& name, const nlohmann::json& j) const;
};

void write_relax(const OutputDir& out, const ExperimentConfig& config,
                 const EquilibriumResult& result);
void write_modes(const OutputDir& out, const ExperimentConfig& config, const ModesReport& report);
void write_spectroscopy(const OutputDir& out, const SpectroscopyResult& result);
void write_lifetime(const OutputDir& out, const ExperimentConfig& config,
                    const LifetimeResult& result);
void write_directionality(const OutputDir& out, const ExperimentConfig& config,
                          const DirectionalityReport& report);
void write_pn(const OutputDir& out, const ExperimentConfig& config, const PNLandscape& landscape);

/// Provenance record: config digest, seed, version, per-trajectory outcomes
/// and wall-clock statistics. Timestamps appear only here.
nlohmann::json make_manifest(const ExperimentConfig& config, const std::string& command,
                             const std::vector<TrajectoryResult>& trajectories,
                             double wall_seconds, int workers);

}  // namespace ionkink
