// Acceptance checks 1-10. `acceptance N` evaluates one criterion and prints a
// single PASS/FAIL line followed by indented details; `acceptance summary`
// prints the stored verdict lines. The exit status is 0 whenever the criterion
// was evaluated, whatever the verdict, and 1 when evaluation itself failed.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "ionkink/error.hpp"
#include "ionkink/experiment.hpp"

using namespace ionkink;

namespace {

struct Verdict {
  bool pass = true;
  std::vector<std::string> details;

  // Records one sub-check; the criterion passes only if all of them do.
  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
  void note(const std::string& what) { details.push_back("     " + what); }
};

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

TrapModel reference_trap(Anharmonicity a = {}) {
  return TrapModel::make(24, 1, {constants::two_pi * 38.2e3, constants::two_pi * 232.3e3,
                                 constants::two_pi * 293e3},
                         a);
}

double khz(double omega) { return omega / constants::two_pi / 1e3; }

double rel(double got, double want) { return std::abs(got - want) / std::abs(want); }

RunControl control() {
  RunControl c;
  c.workers = std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  c.progress = [](const std::string& m) { std::cerr << "  .. " << m << std::endl; };
  return c;
}

// --- 1 ---------------------------------------------------------------------

Verdict mode_ranges() {
  Verdict v;
  const TrapModel trap = reference_trap();
  const ModeSpectrum zz = normal_modes(relax_zigzag(34, trap).configuration, trap);
  const ModeSpectrum kk = normal_modes(relax_kink(34, trap, 1).configuration, trap);
  v.check(rel(zz.min_frequency(), constants::two_pi * 38.2e3) < 1e-6,
          "zigzag minimum " + fmt(khz(zz.min_frequency()), 10) + " kHz = 38.2 kHz to 1e-6");
  v.check(rel(khz(zz.max_frequency()), 328) < 0.02,
          "zigzag maximum " + fmt(khz(zz.max_frequency())) + " kHz within 2% of 328 kHz");
  v.check(rel(khz(kk.min_frequency()), 23.2) < 0.02,
          "kink minimum " + fmt(khz(kk.min_frequency())) + " kHz within 2% of 23.2 kHz");
  v.check(rel(khz(kk.max_frequency()), 345) < 0.02,
          "kink maximum " + fmt(khz(kk.max_frequency())) + " kHz within 2% of 345 kHz");
  return v;
}

// --- 2 ---------------------------------------------------------------------

Verdict localized_modes() {
  Verdict v;
  const TrapModel trap = reference_trap();
  const EquilibriumResult kink = relax_kink(34, trap, 1);
  const ModeSpectrum zs = normal_modes(relax_zigzag(34, trap).configuration, trap);
  const ModeSpectrum ks = normal_modes(kink.configuration, trap);
  const KinkModeReport report = identify_kink_modes(ks, zs, kink.configuration, trap);
  if (report.empty()) {
    v.check(false, "no gapped kink modes found");
    return v;
  }
  double worst_ipr = 0;
  for (const auto& m : report.gapped) worst_ipr = std::max(worst_ipr, m.ipr);
  v.check(worst_ipr <= 12, std::to_string(report.gapped.size()) +
                               " gapped kink modes, largest IPR " + fmt(worst_ipr, 4) + " <= 12");
  const KinkMode& lowest = report.gapped.front();
  const double corr = row_shear_correlation(ks.eigenvectors.col(lowest.index), kink.configuration);
  v.check(corr < -0.9, "lowest kink mode (" + fmt(khz(lowest.frequency), 4) +
                           " kHz) row anticorrelation " + fmt(corr, 3) + " < -0.9");
  for (const auto& m : report.gapped) {
    const double c = row_shear_correlation(ks.eigenvectors.col(m.index), kink.configuration);
    if (c < -0.9) {
      v.note("first shear mode: " + fmt(khz(m.frequency), 4) + " kHz, anticorrelation " +
             fmt(c, 3) + ", IPR " + fmt(m.ipr, 3));
      break;
    }
  }
  return v;
}

// --- 3 ---------------------------------------------------------------------

Verdict few_ion_oracles() {
  Verdict v;
  const TrapModel trap = reference_trap();
  CrystalState two(2);
  two.positions << -0.6, 0, 0, 0.6, 0, 0;
  const EquilibriumResult r2 = relax(two, trap);
  const double d = std::abs(r2.configuration.x(1) - r2.configuration.x(0));
  v.check(rel(d, std::cbrt(2.0)) < 1e-8, "two-ion spacing " + fmt(d, 15) + " l0 = 2^(1/3)");

  const double wy = trap.omega[1] / trap.omega[0], wz = trap.omega[2] / trap.omega[0];
  std::vector<double> want = {1, std::sqrt(3.0), wy, std::sqrt(wy * wy - 1), wz,
                              std::sqrt(wz * wz - 1)};
  std::sort(want.begin(), want.end());
  const ModeSpectrum s2 = normal_modes(r2.configuration, trap);
  std::vector<double> got;
  for (int k = 0; k < s2.size(); ++k) got.push_back(trap.units.rad_per_s_to_scaled(s2.frequencies[k]));
  std::sort(got.begin(), got.end());
  double worst = 0;
  for (int k = 0; k < 6; ++k) worst = std::max(worst, rel(got[k], want[k]));
  v.check(worst < 1e-8, "two-ion mode set, worst relative error " + fmt(worst, 3));

  CrystalState three(3);
  three.positions << -1, 0, 0, 0.05, 0, 0, 1, 0, 0;
  const EquilibriumResult r3 = relax(three, trap);
  const ModeSpectrum s3 = normal_modes(r3.configuration, trap);
  std::vector<double> axial;
  for (int k = 0; k < s3.size(); ++k) {
    double w = 0;
    for (int i = 0; i < 3; ++i) w += s3.eigenvectors(3 * i, k) * s3.eigenvectors(3 * i, k);
    if (w > 0.5) axial.push_back(trap.units.rad_per_s_to_scaled(s3.frequencies[k]));
  }
  std::sort(axial.begin(), axial.end());
  const std::vector<double> want3 = {1, std::sqrt(3.0), std::sqrt(29.0 / 5)};
  worst = axial.size() == 3 ? 0 : 1;
  for (std::size_t k = 0; k < std::min<std::size_t>(3, axial.size()); ++k) {
    worst = std::max(worst, rel(axial[k], want3[k]));
  }
  v.check(worst < 1e-6, "three-ion axial modes {1, sqrt3, sqrt(29/5)}, worst relative error " +
                            fmt(worst, 3));
  return v;
}

// --- 4 ---------------------------------------------------------------------

double mean_kinetic_energy(const TrapModel& trap, const CrystalState& eq, LangevinParams p,
                           double duration_ms, int trajectories) {
  double total = 0;
  const auto steps = static_cast<std::uint64_t>(
      std::llround(trap.units.seconds_to_time(duration_ms * 1e-3) / p.dt));
  const auto stride = std::max<std::uint64_t>(1, steps / 2000);
  for (int j = 0; j < trajectories; ++j) {
    p.trajectory_index = static_cast<std::uint64_t>(j);
    CrystalState s = thermal_state(eq, trap, p);
    LangevinIntegrator integrator(trap, p);
    double sum = 0;
    int count = 0;
    for (std::uint64_t k = 0; k < steps; k += stride) {
      integrator.run(s, stride);
      sum += kinetic_energy(s.velocities);
      ++count;
    }
    total += sum / count;
  }
  return total / trajectories;
}

Verdict numerical_hygiene() {
  Verdict v;
  Anharmonicity a;
  a.alpha_x = 0.01;
  a.alpha_y = -0.02;
  a.beta_x = 0.002;
  a.beta_y = 0.001;
  a.c_xxy = 0.003;
  const TrapModel trap = reference_trap(a).with_drive(3e-3, constants::two_pi * 330e3);
  const EquilibriumResult zz = relax_zigzag(34, trap.without_drive());
  std::mt19937_64 gen(2024);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::uniform_real_distribution<double> phase(0.0, constants::two_pi);
  double worst_f = 0, worst_h = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd pos = zz.configuration.positions;
    for (Eigen::Index i = 0; i < pos.size(); ++i) pos[i] += noise(gen);
    const double strength = trap.drive_strength(phase(gen) / trap.drive_frequency_scaled());
    Eigen::VectorXd f, fu, fd;
    evaluate_forces(pos, trap, strength, f);
    const Eigen::MatrixXd h = hessian_at(pos, trap, strength);
    Eigen::VectorXd f_fd(pos.size());
    Eigen::MatrixXd h_fd(pos.size(), pos.size());
    for (Eigen::Index j = 0; j < pos.size(); ++j) {
      Eigen::VectorXd p = pos;
      p[j] += 1e-5;
      const double eu = potential_energy_at(p, trap, strength);
      evaluate_forces(p, trap, strength, fu);
      p[j] -= 2e-5;
      const double ed = potential_energy_at(p, trap, strength);
      evaluate_forces(p, trap, strength, fd);
      f_fd[j] = -(eu - ed) / 2e-5;
      h_fd.col(j) = -(fu - fd) / 2e-5;
    }
    worst_f = std::max(worst_f, (f - f_fd).norm() / f.norm());
    worst_h = std::max(worst_h, (h - h_fd).norm() / h.norm());
  }
  v.check(worst_f < 1e-6, "forces vs finite differences, 100 random states: " + fmt(worst_f, 3));
  v.check(worst_h < 1e-6, "Hessian vs finite differences, 100 random states: " + fmt(worst_h, 3));

  // Energy conservation without friction.
  const TrapModel statics = reference_trap();
  const EquilibriumResult k = relax_kink(34, statics, 1);
  const double wmax = normal_modes(k.configuration, statics).max_frequency();
  LangevinParams p = LangevinParams::laser_cooling(constants::two_pi * 300, 0.01, 1e-3,
                                                   default_timestep(wmax, statics.units));
  p.seed = 4;
  CrystalState s = thermal_state(k.configuration, statics, p);
  LangevinParams frictionless = p;
  frictionless.gamma = {0, 0, 0};
  LangevinIntegrator nve(statics, frictionless);
  const double e0 = potential_energy(s, statics, 0) + kinetic_energy(s.velocities);
  double drift = 0;
  for (int block = 0; block < 1000; ++block) {
    nve.run(s, 1000);
    const double e = potential_energy(s, statics, 0) + kinetic_energy(s.velocities);
    drift = std::max(drift, std::abs(e - e0) / std::abs(e0));
  }
  v.check(drift < 1e-6, "gamma = 0 energy drift over 1e6 steps: " + fmt(drift, 3));

  // Timestep halving: isotropic friction so that 10 ms averages are sharp.
  const EquilibriumResult zz0 = relax_zigzag(34, statics);
  LangevinParams bath = LangevinParams::laser_cooling(constants::two_pi * 3e3, 1.0, 1e-3,
                                                      default_timestep(wmax, statics.units));
  bath.seed = 8;
  const double e_dt = mean_kinetic_energy(statics, zz0.configuration, bath, 10, 16);
  bath.dt *= 0.5;
  const double e_half = mean_kinetic_energy(statics, zz0.configuration, bath, 10, 16);
  v.check(rel(e_half, e_dt) < 0.01, "10 ms mean E_k at dt and dt/2: " + fmt(e_dt) + " vs " +
                                        fmt(e_half) + " (" + fmt(100 * rel(e_half, e_dt), 3) +
                                        "%)");
  return v;
}

// --- 5 ---------------------------------------------------------------------

Verdict thermostat() {
  Verdict v;
  const ExperimentConfig config;
  const TrapModel trap = config.trap_model().without_drive();
  const EquilibriumResult zz = relax_zigzag(34, trap);
  const double wmax = normal_modes(zz.configuration, trap).max_frequency();
  LangevinParams p = config.langevin_params(trap, wmax);
  const int trajectories = 16;
  const double ek = mean_kinetic_energy(trap, zz.configuration, p, 20, trajectories);
  const double per_dof = ek / (3 * 34) / trap.units.kB_TD();
  v.check(std::abs(per_dof - 0.5) / 0.5 < 0.05,
          std::to_string(trajectories) + " x 20 ms at T_D: per-DOF E_k = " + fmt(per_dof, 5) +
              " k_B T_D (target 0.5, 5%)");
  return v;
}

// --- 6 ---------------------------------------------------------------------

Verdict resonant_rectification() {
  Verdict v;
  ExperimentConfig c;
  c.drive.epsilon = 1.3e-3;
  c.drive.duration_ms = 10;
  c.run.n_trajectories = 24;
  c.sweep.parameter = "f_d_hz";
  for (double f = 300e3; f <= 340e3 + 1; f += 2e3) c.sweep.values.push_back(f);
  const SpectroscopyResult r = run_spectroscopy(c, control());
  for (const auto& n : r.notices) v.note(n);
  std::ostringstream scan;
  for (const auto& s : r.scan) scan << fmt(s.frequency_hz / 1e3, 4) << ":" << s.escapes << " ";
  v.note("scan (kHz:escapes/" + std::to_string(c.run.n_trajectories) + ") " + scan.str());
  if (!r.drive_target || !r.secondary_resonance) {
    v.check(false, "mode predictions unavailable");
    return v;
  }
  const double target = r.drive_target->frequency / constants::two_pi;
  const double second = r.secondary_resonance->frequency / constants::two_pi;
  v.note("predicted: drive target " + fmt(target / 1e3) + " kHz (coupling " +
         fmt(r.drive_target->coupling, 4) + "), secondary " + fmt(second / 1e3) +
         " kHz (coupling " + fmt(r.secondary_resonance->coupling, 4) + ")");
  if (!r.single_peak) {
    v.check(false, "single-peak fit failed");
  } else {
    const LorentzPeak& p = r.single_peak->peaks.front();
    v.check(std::abs(p.center_hz - target) <= p.width_hz,
            "peak at " + fmt(p.center_hz / 1e3) + " kHz, HWHM " + fmt(p.width_hz / 1e3, 4) +
                " kHz; offset from the drive target " + fmt((p.center_hz - target) / 1e3, 4) +
                " kHz");
  }
  if (!r.double_peak) {
    v.check(false, "two-peak fit failed");
  } else {
    const LorentzPeak& a = r.double_peak->peaks[0];
    const LorentzPeak& b = r.double_peak->peaks[1];
    const bool nearer = std::abs(b.center_hz - second) < std::abs(b.center_hz - target);
    const bool resolved = b.amplitude > 2 * b.amplitude_error;
    v.check(nearer && resolved && b.amplitude < a.amplitude,
            "weaker peak at " + fmt(b.center_hz / 1e3) + " kHz, amplitude " + fmt(b.amplitude, 3) +
                " +- " + fmt(b.amplitude_error, 2) + " vs " + fmt(a.amplitude, 3) +
                " at " + fmt(a.center_hz / 1e3) + " kHz (resolved, weaker, nearer the secondary mode)");
  }
  return v;
}

// --- 7 ---------------------------------------------------------------------

Verdict thermal_activation() {
  Verdict v;
  ExperimentConfig c;
  c.drive.duration_ms = 40;
  c.run.n_trajectories = 100;
  c.sweep.parameter = "epsilon";
  c.sweep.values = {1.12e-3, 1.22e-3, 1.32e-3, 1.42e-3};
  c.calibration.trajectories = 8;
  c.calibration.settle_ms = 5;
  c.calibration.average_ms = 10;
  const LifetimeResult r = run_lifetime(c, control(), false);
  for (const auto& n : r.notices) v.note(n);
  for (const auto& p : r.points) {
    if (!p.fit) {
      v.check(false, "eps " + fmt(p.epsilon) + ": no lifetime fit");
      continue;
    }
    const double tau = p.fit->tau_ms;
    v.check(tau >= 5 && tau <= 50 && p.ks->p_value > 0.05,
            "eps " + fmt(p.epsilon) + ": tau = " + fmt(tau, 4) + " ms (" +
                std::to_string(p.fit->n_escapes) + " escapes) in 5-50 ms, K-S p = " +
                fmt(p.ks->p_value, 3) + " > 0.05");
  }
  for (const auto& s : r.calibration_samples) {
    v.note("calibration eps " + fmt(s.epsilon) + ": T = " +
           fmt(1e3 * effective_temperature(s.kinetic_energy, 34, c.trap_model().units), 4) + " mK");
  }
  if (!r.kramers) {
    v.check(false, "Kramers fit unavailable");
    return v;
  }
  v.check(r.kramers->r_squared > 0.95,
          "ln(tau/sqrt T) vs 1/T linear: R^2 = " + fmt(r.kramers->r_squared, 4));
  const PNLandscape pn = pn_landscape(c.trap_model(), 34, 1);
  const double w_pn = pn.mean_barrier() / c.trap_model().units.kB_TD();
  v.check(rel(r.kramers->w_kbtd, w_pn) <= 0.25,
          "W = " + fmt(r.kramers->w_kbtd, 4) + " +- " + fmt(r.kramers->w_error_kbtd, 3) +
              " k_B T_D vs PN barrier " + fmt(w_pn, 4) + " (25%)");
  return v;
}

// --- 8 ---------------------------------------------------------------------

Verdict pipeline_exactness() {
  Verdict v;
  ExperimentConfig c;
  c.drive.f_d_hz = 330e3;
  c.drive.duration_ms = 400;
  c.run.n_trajectories = 2000;
  c.sweep.parameter = "epsilon";
  c.sweep.values = {1.15e-3, 1.3e-3, 1.45e-3, 1.74e-3};
  c.synthetic.w_kbtd = 26.5;
  const LifetimeResult r = run_lifetime(c, RunControl{}, true);
  if (!r.kramers) {
    v.check(false, "Kramers fit unavailable");
  } else {
    v.check(rel(r.kramers->w_kbtd, 26.5) < 0.05,
            "synthetic escapes through lifetime -> Kramers: W = " + fmt(r.kramers->w_kbtd, 5) +
                " k_B T_D (26.5, 5%)");
  }
  std::vector<double> t, tau;
  for (double eps : c.sweep.values) {
    const double tk = 1e-3 * (c.synthetic.t0_mk + c.synthetic.slope_mk * eps);
    t.push_back(tk);
    tau.push_back(kramers_lifetime(26.5, c.synthetic.prefactor_ms, tk));
  }
  const KramersFit exact = fit_kramers_temperatures(t, tau);
  v.check(rel(exact.w_kbtd, 26.5) < 1e-12,
          "noiseless lifetimes: W relative error " + fmt(rel(exact.w_kbtd, 26.5), 3));
  return v;
}

// --- 9 ---------------------------------------------------------------------

Verdict pn_landscape_check() {
  Verdict v;
  const TrapModel symmetric = reference_trap();
  const double unit = symmetric.units.kB_TD();
  const PNLandscape plus = pn_landscape(symmetric, 34, 1);
  const PNLandscape minus = pn_landscape(symmetric, 34, -1);
  const double l = plus.barrier_left / unit, r = plus.barrier_right / unit;
  v.check(std::abs(l - r) / (0.5 * (l + r)) < 0.02,
          "symmetric trap: left " + fmt(l, 5) + ", right " + fmt(r, 5) + " k_B T_D (2%)");
  const QuadraticFit q = fit_center_quadratic(plus);
  v.check(q.relative_residual < 0.05,
          "harmonic centre: quadratic residual " + fmt(100 * q.relative_residual, 3) + "% (5%)");
  double worst = minus.samples.size() == plus.samples.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < std::min(plus.samples.size(), minus.samples.size()); ++i) {
    worst = std::max(worst, std::abs(plus.samples[i].energy - minus.samples[i].energy) / unit);
  }
  v.check(worst < 1e-6, "charge -1 landscape differs from +1 by at most " + fmt(worst, 3) +
                            " k_B T_D");

  Anharmonicity a;
  a.alpha_x = 0.005;
  const PNLandscape tilted = pn_landscape(reference_trap(a), 34, 1);
  const double tl = tilted.barrier_left / unit, tr = tilted.barrier_right / unit;
  v.check(tl > l && tr < r, "alpha_x = 0.005: left " + fmt(tl, 5) + " (was " + fmt(l, 5) +
                                "), right " + fmt(tr, 5) + " (was " + fmt(r, 5) + ")");
  const double mean = plus.mean_barrier() / unit;
  v.check(rel(mean, 25.3) <= 0.25,
          "harmonic mean barrier " + fmt(mean, 5) + " k_B T_D vs 25.3 (25%)");
  return v;
}

// --- 10 --------------------------------------------------------------------

const DirectionalityResult* find(const DirectionalityReport& r, int charge, double eps) {
  for (const auto& d : r.results) {
    if (d.charge == charge && d.epsilon == eps) return &d;
  }
  return nullptr;
}

std::string td_text(const DirectionalityResult& d) {
  return fmt(d.td, 3) + " +- " + fmt(d.error, 2) + " (" + std::to_string(d.n_right) + "R/" +
         std::to_string(d.n_left) + "L)";
}

Verdict directionality_mechanism() {
  Verdict v;
  ExperimentConfig sym;
  sym.drive.epsilon = 2.0e-3;
  sym.run.n_trajectories = 100;
  const DirectionalityReport rs = run_directionality(sym, {1, -1}, control(), false);
  for (const int q : {1, -1}) {
    const DirectionalityResult* d = find(rs, q, sym.drive.epsilon);
    if (!d) {
      v.check(false, "symmetric trap, charge " + std::to_string(q) + ": too few escapes");
      continue;
    }
    v.check(std::abs(d->td) <= 2 * d->error,
            "symmetric trap, charge " + std::to_string(q) + ": TD = " + td_text(*d) +
                " consistent with 0 at 2 sigma");
  }

  ExperimentConfig asym;
  asym.trap.alpha_x = 0.02;
  asym.trap.alpha_y = -0.05;
  asym.run.n_trajectories = 200;
  asym.sweep.parameter = "epsilon";
  asym.sweep.values = {1.6e-3, 2.4e-3};
  const DirectionalityReport ra = run_directionality(asym, {1, -1}, control(), true);
  const double unit = asym.trap_model().units.kB_TD();
  const double lo = asym.sweep.values[0], hi = asym.sweep.values[1];
  const DirectionalityResult* p_lo = find(ra, 1, lo);
  const DirectionalityResult* m_lo = find(ra, -1, lo);
  const DirectionalityResult* p_hi = find(ra, 1, hi);
  const DirectionalityResult* m_hi = find(ra, -1, hi);
  if (!p_lo || !m_lo || !p_hi || !m_hi) {
    v.check(false, "asymmetric trap: too few escapes for some (charge, eps)");
    return v;
  }
  for (const auto& l : ra.landscapes) {
    v.note("charge " + std::to_string(l.charge) + " PN barriers: left " +
           fmt(l.barrier_left / unit, 4) + ", right " + fmt(l.barrier_right / unit, 4) + " k_B T_D");
  }
  v.note("alpha_x = 0.02, alpha_y = -0.05; eps " + fmt(lo) + ": TD(+1) = " + td_text(*p_lo) +
         ", TD(-1) = " + td_text(*m_lo));
  v.note("eps " + fmt(hi) + ": TD(+1) = " + td_text(*p_hi) + ", TD(-1) = " + td_text(*m_hi));

  const double sep = td_separation(*p_lo, *m_lo);
  v.check(sep > 2, "charges statistically distinct at eps " + fmt(lo) + ": separation " +
                       fmt(sep, 3) + " sigma > 2");
  for (const auto& l : ra.landscapes) {
    const DirectionalityResult* d = l.charge == 1 ? p_lo : m_lo;
    // TD > 0 means rightward escapes dominate, expected when the right barrier is lower.
    const double expected = l.barrier_left - l.barrier_right;
    v.check(d->td * expected > 0, "charge " + std::to_string(l.charge) +
                                      ": TD sign matches the lower-barrier side");
  }
  v.check(std::abs(p_lo->td) > std::abs(p_hi->td) && std::abs(m_lo->td) > std::abs(m_hi->td),
          "|TD| decreases with eps for both charges");
  return v;
}

const std::vector<std::pair<const char*, Verdict (*)()>> kCriteria = {
    {"mode-range reproduction", mode_ranges},
    {"localized-mode structure", localized_modes},
    {"few-ion oracles", few_ion_oracles},
    {"numerical hygiene", numerical_hygiene},
    {"thermostat fidelity", thermostat},
    {"resonant rectification", resonant_rectification},
    {"thermal activation", thermal_activation},
    {"analysis-pipeline exactness", pipeline_exactness},
    {"PN landscape", pn_landscape_check},
    {"directionality mechanism", directionality_mechanism},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string which;
  std::string report_dir = "acceptance";
  app.add_option("criterion", which, "1-10, all or summary")->required();
  app.add_option("--report-dir", report_dir, "Where verdict lines are stored");
  CLI11_PARSE(app, argc, argv);

  const std::filesystem::path dir(report_dir);
  std::filesystem::create_directories(dir);
  auto line_file = [&](int n) { return dir / ("criterion_" + std::to_string(n) + ".txt"); };

  if (which == "summary") {
    int passed = 0, missing = 0;
    for (int n = 1; n <= 10; ++n) {
      std::ifstream in(line_file(n));
      std::string line;
      if (in && std::getline(in, line)) {
        std::cout << line << '\n';
        passed += line.find(": PASS") != std::string::npos;
      } else {
        std::cout << "criterion " << n << ": NOT RUN\n";
        ++missing;
      }
    }
    std::cout << passed << "/10 criteria pass\n";
    return missing ? 1 : 0;
  }

  std::vector<int> selected;
  if (which == "all") {
    for (int n = 1; n <= 10; ++n) selected.push_back(n);
  } else {
    const int n = std::atoi(which.c_str());
    if (n < 1 || n > 10) {
      std::cerr << "criterion must be 1-10, all or summary\n";
      return 1;
    }
    selected.push_back(n);
  }

  int status = 0;
  for (const int n : selected) {
    const auto& [name, fn] = kCriteria[n - 1];
    std::ostringstream out;
    std::string line;
    try {
      const Verdict verdict = fn();
      line = "criterion " + std::to_string(n) + " (" + name + "): " +
             (verdict.pass ? "PASS" : "FAIL");
      out << line << '\n';
      for (const auto& d : verdict.details) out << "    " << d << '\n';
    } catch (const std::exception& e) {
      line = "criterion " + std::to_string(n) + " (" + name + "): ERROR " + e.what();
      out << line << '\n';
      status = 1;
    }
    std::cout << out.str() << std::flush;
    std::ofstream(line_file(n)) << out.str();
  }
  return status;
}
