#include "ionkink/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "ionkink/error.hpp"

namespace ionkink {

LangevinParams LangevinParams::laser_cooling(double gamma_x, double radial_ratio,
                                             double temperature_k, double dt) {
  LangevinParams p;
  p.gamma = {gamma_x, radial_ratio * gamma_x, radial_ratio * gamma_x};
  p.temperature = {temperature_k, temperature_k, temperature_k};
  p.dt = dt;
  return p;
}

double default_timestep(double omega_max, const UnitSystem& units) {
  if (!(omega_max > 0)) throw Error(ErrorKind::Configuration, "w_max must be positive");
  return constants::two_pi / (50.0 * units.rad_per_s_to_scaled(omega_max));
}

void check_timestep(double dt, double omega_max, const UnitSystem& units) {
  const double limit = default_timestep(omega_max, units);
  if (!(dt > 0) || dt > limit * (1 + 1e-12)) {
    throw Error(ErrorKind::Configuration, "time step " + std::to_string(dt) +
                                              " violates dt <= 2 pi / (50 w_max) = " +
                                              std::to_string(limit));
  }
}

double DriveWindow::envelope(double t) const {
  if (t < start || t > stop) return 0.0;
  if (ramp > 0 && t < start + ramp) return (t - start) / ramp;
  return 1.0;
}

LangevinIntegrator::LangevinIntegrator(const TrapModel& trap, const LangevinParams& params,
                                       DriveWindow window)
    : trap_(trap), params_(params), window_(window), noise_(params.seed, params.trajectory_index) {
  trap_.validate();
  if (!(params.dt > 0) || !std::isfinite(params.dt)) {
    throw Error(ErrorKind::Configuration, "time step must be positive");
  }
  for (int a = 0; a < 3; ++a) {
    if (!(params.gamma[a] >= 0) || !(params.temperature[a] >= 0)) {
      throw Error(ErrorKind::Configuration, "damping and temperature must be >= 0");
    }
    const double gamma = trap_.units.rad_per_s_to_scaled(params.gamma[a]);
    const double kt = trap_.units.kelvin_to_energy(params.temperature[a]);
    c1_[a] = std::exp(-gamma * params.dt);
    c2_[a] = std::sqrt((1.0 - c1_[a] * c1_[a]) * kt);
  }
}

double LangevinIntegrator::drive_at(double t) const {
  const double envelope = window_.envelope(t);
  return envelope == 0.0 ? 0.0 : envelope * trap_.drive_strength(t);
}

void LangevinIntegrator::prime(const CrystalState& state) {
  energy_ = evaluate_forces(state.positions, trap_, drive_at(state.time), force_);
  primed_ = true;
}

void LangevinIntegrator::step(CrystalState& state) {
  try {
    if (!primed_) prime(state);
    const double dt = params_.dt;
    const double half = 0.5 * dt;
    const int n = state.n_ions();
    double* x = state.positions.data();
    double* v = state.velocities.data();
    const double* f = force_.data();
    const int dim = 3 * n;

    for (int k = 0; k < dim; ++k) {
      v[k] += half * f[k];
      x[k] += half * v[k];
    }
    if (c2_[0] > 0 || c2_[1] > 0 || c2_[2] > 0) {
      noise_buffer_.resize(dim);
      noise_.fill_normals(step_, noise_buffer_.data(), dim);
      const double* xi = noise_buffer_.data();
      for (int k = 0; k < dim; ++k) v[k] = c1_[k % 3] * v[k] + c2_[k % 3] * xi[k];
    } else {
      for (int k = 0; k < dim; ++k) v[k] *= c1_[k % 3];
    }
    for (int k = 0; k < dim; ++k) x[k] += half * v[k];
    state.time += dt;
    ++step_;

    energy_ = evaluate_forces(state.positions, trap_, drive_at(state.time), force_);
    f = force_.data();
    double extreme = 0;
    for (int k = 0; k < dim; ++k) {
      v[k] += half * f[k];
      extreme = std::max({extreme, std::abs(x[k]), std::abs(v[k])});
    }
    if (!(extreme < 1e4)) {
      throw Error(ErrorKind::NumericalBlowup,
                  "state left the trap at step " + std::to_string(step_));
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::CoulombSingularity || e.kind() == ErrorKind::NonFinite) {
      throw Error(ErrorKind::NumericalBlowup, e.what());
    }
    throw;
  }
}

void LangevinIntegrator::run(CrystalState& state, std::uint64_t n_steps) {
  for (std::uint64_t k = 0; k < n_steps; ++k) step(state);
}

CrystalState step(const CrystalState& state, const TrapModel& trap, const LangevinParams& langevin) {
  CrystalState out = state;
  LangevinIntegrator integrator(trap, langevin);
  integrator.step(out);
  return out;
}

CrystalState thermal_state(const CrystalState& equilibrium, const TrapModel& trap,
                           const LangevinParams& langevin) {
  equilibrium.validate();
  const NoiseStream noise(langevin.seed, langevin.trajectory_index);
  const int dim = static_cast<int>(equilibrium.positions.size());
  const int n = dim / 3;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hessian_at(equilibrium.positions, trap, 0.0));

  auto draw = [&](std::uint64_t domain, int count) {
    Eigen::VectorXd out(count);
    noise.fill_normals(NoiseStream::kSetupDomain + domain, out.data(), count);
    return out;
  };
  const double kt_x = trap.units.kelvin_to_energy(langevin.temperature[0]);
  Eigen::VectorXd amplitudes = draw(0, dim);
  for (int k = 0; k < dim; ++k) {
    const double lambda = eig.eigenvalues()[k];
    amplitudes[k] = lambda > 1e-12 ? amplitudes[k] * std::sqrt(kt_x / lambda) : 0.0;
  }
  CrystalState out = equilibrium;
  out.positions += eig.eigenvectors() * amplitudes;
  out.velocities = draw(1, dim);
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) {
      out.velocities[3 * i + a] *=
          std::sqrt(trap.units.kelvin_to_energy(langevin.temperature[a]));
    }
  }
  return out;
}

TrajectoryRecord run_trajectory(const CrystalState& initial, const TrapModel& trap,
                                const LangevinParams& langevin, const TrajectoryOptions& options) {
  initial.validate();
  const UnitSystem& u = trap.units;
  const double t0 = initial.time;
  const double duration = u.seconds_to_time(options.duration_ms * 1e-3);
  DriveWindow window{t0, t0 + duration, u.seconds_to_time(options.drive_ramp_us * 1e-6)};
  LangevinIntegrator integrator(trap, langevin, window);

  const auto total_steps = static_cast<std::uint64_t>(std::llround(duration / langevin.dt));
  const auto stride = std::max<std::uint64_t>(
      1, static_cast<std::uint64_t>(
             std::llround(u.seconds_to_time(options.observer_stride_us * 1e-6) / langevin.dt)));

  TrajectoryRecord record;
  record.seed = langevin.seed;
  record.trajectory_index = langevin.trajectory_index;
  EscapeDetector detector(crystal_extent(initial.positions), options.escape_dwell_ms);

  CrystalState state = initial;
  double ek_sum = 0;
  auto observe = [&] {
    TrajectorySample s;
    s.time_ms = u.time_to_seconds(state.time - t0) * 1e3;
    s.kinetic_energy = kinetic_energy(state.velocities);
    s.kink = observe_kink(state.positions);
    if (s.kink.present) {
      ek_sum += s.kinetic_energy;
      ++record.kink_present_samples;
    }
    const bool finished = detector.push(s.time_ms, s.kink);
    if (options.record_samples) record.samples.push_back(s);
    return finished;
  };

  bool stop = observe() && options.stop_on_escape;
  for (std::uint64_t k = 0; k < total_steps && !stop; k += stride) {
    const std::uint64_t chunk = std::min(stride, total_steps - k);
    integrator.run(state, chunk);
    stop = observe() && options.stop_on_escape;
  }
  record.steps = integrator.steps_taken();
  record.escape = detector.event();
  record.final_state = std::move(state);
  if (record.kink_present_samples > 0) {
    record.mean_kinetic_energy_kink_present = ek_sum / record.kink_present_samples;
  }
  return record;
}

SteadyStateResult steady_state_energy(const CrystalState& initial, const TrapModel& trap,
                                      const LangevinParams& langevin, double epsilon,
                                      double omega_d, const SteadyStateOptions& options) {
  if (options.trajectories < 1) throw Error(ErrorKind::Configuration, "need >= 1 trajectory");
  const TrapModel driven = trap.with_drive(epsilon, omega_d);
  const UnitSystem& u = trap.units;
  const double settle = u.seconds_to_time(options.settle_ms * 1e-3);
  const double total = u.seconds_to_time((options.settle_ms + options.average_ms) * 1e-3);
  const auto stride = std::max<std::uint64_t>(
      1, static_cast<std::uint64_t>(
             std::llround(u.seconds_to_time(options.observer_stride_us * 1e-6) / langevin.dt)));
  const auto total_steps = static_cast<std::uint64_t>(std::llround(total / langevin.dt));
  const auto settle_steps = static_cast<std::uint64_t>(std::llround(settle / langevin.dt));

  // Per trajectory: mean and relative linear trend over the averaging window.
  std::vector<double> trajectory_means, trajectory_drifts;
  double total_sum = 0;
  SteadyStateResult result;

  for (int j = 0; j < options.trajectories; ++j) {
    LangevinParams p = langevin;
    p.trajectory_index = langevin.trajectory_index + static_cast<std::uint64_t>(j);
    CrystalState state = thermal_state(initial, trap, p);
    state.time = 0;
    DriveWindow window{0.0, total, u.seconds_to_time(options.drive_ramp_us * 1e-6)};
    LangevinIntegrator integrator(driven, p, window);
    double sum = 0, st = 0, stt = 0, se = 0;
    int count = 0;
    std::size_t slot = 0;
    for (std::uint64_t k = 0; k < total_steps; k += stride, ++slot) {
      integrator.run(state, std::min(stride, total_steps - k));
      if (k + stride <= settle_steps) continue;
      if (options.require_kink && !observe_kink(state.positions).present) continue;
      const double ek = kinetic_energy(state.velocities);
      const double t = static_cast<double>(slot);
      sum += ek;
      st += t;
      stt += t * t;
      se += t * ek;
      ++count;
    }
    total_sum += sum;
    result.samples += count;
    if (count < 4) continue;
    const double mean = sum / count, tm = st / count;
    const double sxx = stt - count * tm * tm;
    const double slope = sxx > 0 ? (se - count * tm * mean) / sxx : 0.0;
    const double span = static_cast<double>(total_steps - settle_steps) / stride;
    trajectory_means.push_back(mean);
    trajectory_drifts.push_back(slope * span / mean);
  }

  if (result.samples < 4) {
    throw Error(ErrorKind::InsufficientData, "no steady-state samples with the kink present");
  }
  result.kinetic_energy = total_sum / result.samples;
  auto mean_and_error = [](const std::vector<double>& v) {
    const double m = static_cast<double>(v.size());
    double mean = 0, var = 0;
    for (double x : v) mean += x;
    mean /= m;
    for (double x : v) var += (x - mean) * (x - mean);
    return std::pair<double, double>{mean, v.size() > 1 ? std::sqrt(var / (m - 1) / m) : 0.0};
  };
  double drift_error = 0;
  if (!trajectory_means.empty()) {
    result.standard_error = mean_and_error(trajectory_means).second;
    std::tie(result.drift, drift_error) = mean_and_error(trajectory_drifts);
  }
  // A trend counts only when it is both large and resolved above the
  // trajectory-to-trajectory scatter.
  const bool resolved = trajectory_drifts.size() < 2 || std::abs(result.drift) > 3 * drift_error;
  if (std::abs(result.drift) > options.max_drift && resolved) {
    throw Error(ErrorKind::NotSettled, "kinetic energy drifts by " +
                                           std::to_string(100 * result.drift) +
                                           "% over the averaging window");
  }
  return result;
}

double effective_temperature(double kinetic_energy, int n_ions, const UnitSystem& units) {
  if (kinetic_energy < 0) throw Error(ErrorKind::Configuration, "kinetic energy must be >= 0");
  return units.energy_to_kelvin(2.0 * kinetic_energy / (3.0 * n_ions));
}

}  // namespace ionkink
