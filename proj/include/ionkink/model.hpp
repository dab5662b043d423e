#pragma once

// Trapped-ion crystal model: unit system, trap parameters, and the total
// potential (harmonic pseudopotential + polynomial anharmonicity + Coulomb +
// parametric radial drive) with its analytic gradient and Hessian.
//
// Everything inside the library is dimensionless. Lengths are measured in
// l0 with l0^3 = q^2 / (4 pi eps0 m w_ref^2), times in 1/w_ref and energies in
// m w_ref^2 l0^2, so that the pair interaction is 1/r and a harmonic axis with
// frequency w has curvature (w/w_ref)^2.

#include <array>
#include <optional>

#include <Eigen/Dense>

namespace ionkink {

namespace constants {
// CODATA 2018 exact / recommended values.
inline constexpr double elementary_charge = 1.602176634e-19;      // C
inline constexpr double atomic_mass = 1.66053906660e-27;          // kg
inline constexpr double vacuum_permittivity = 8.8541878128e-12;   // F/m
inline constexpr double boltzmann = 1.380649e-23;                 // J/K
inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;
/// Doppler cooling limit used as the natural thermal energy scale.
inline constexpr double doppler_temperature = 1e-3;  // K
}  // namespace constants

enum Axis : int { kX = 0, kY = 1, kZ = 2 };

struct UnitSystem {
  double ion_mass = 0;    // kg
  double ion_charge = 0;  // C
  double omega_ref = 0;   // rad/s, the axial trap frequency
  double length = 0;      // m per l0
  double time = 0;        // s per unit
  double energy = 0;      // J per unit

  static UnitSystem make(double mass_amu, double charge_e, double omega_ref);

  /// k_B * 1 mK in dimensionless energy units.
  double kB_TD() const { return constants::boltzmann * constants::doppler_temperature / energy; }
  double kelvin_to_energy(double kelvin) const { return constants::boltzmann * kelvin / energy; }
  double energy_to_kelvin(double e) const { return e * energy / constants::boltzmann; }
  double seconds_to_time(double s) const { return s / time; }
  double time_to_seconds(double t) const { return t * time; }
  double rad_per_s_to_scaled(double w) const { return w / omega_ref; }
  double scaled_to_rad_per_s(double w) const { return w * omega_ref; }
};

/// Polynomial corrections to the harmonic confinement, per ion, in l0 units:
///   alpha_x x^3 + alpha_y y^3 + beta_x x^4 + beta_y y^4 + c_xxy x^2 y.
/// alpha_x > 0 pushes the crystal toward x < 0; alpha_y < 0 toward y > 0.
struct Anharmonicity {
  double alpha_x = 0;
  double alpha_y = 0;
  double beta_x = 0;
  double beta_y = 0;
  double c_xxy = 0;

  bool is_zero() const {
    return alpha_x == 0 && alpha_y == 0 && beta_x == 0 && beta_y == 0 && c_xxy == 0;
  }
};

/// Radial parametric drive V_d = 1/2 m eps kappa sin(w_d t) (y^2 - z^2).
struct Drive {
  double epsilon = 0;                   // relative excitation depth
  double omega_d = 0;                   // rad/s
  std::optional<double> kappa;          // rad^2/s^2; unset means (w_y^2 + w_z^2)/2
};

struct TrapModel {
  UnitSystem units;
  std::array<double, 3> omega{};  // rad/s
  Anharmonicity anharmonic;
  Drive drive;

  /// Builds and validates a model; units are referenced to omega[x].
  static TrapModel make(double mass_amu, double charge_e, std::array<double, 3> omega,
                        Anharmonicity anharmonic = {}, Drive drive = {});

  /// Throws Error(Configuration) unless w_x < w_y < w_z, eps >= 0 and the
  /// coefficients are finite.
  void validate() const;

  double kappa() const;
  double curvature(int axis) const {
    const double r = omega[axis] / units.omega_ref;
    return r * r;
  }
  double kappa_scaled() const { return kappa() / (units.omega_ref * units.omega_ref); }
  double drive_frequency_scaled() const { return drive.omega_d / units.omega_ref; }

  /// eps * kappa~ * sin(w~_d t): the prefactor of 1/2 (y^2 - z^2).
  double drive_strength(double t) const;

  TrapModel with_drive(double epsilon, double omega_d) const;
  TrapModel without_drive() const;
};

struct CrystalState {
  Eigen::VectorXd positions;   // x0 y0 z0 x1 y1 z1 ...
  Eigen::VectorXd velocities;  // same layout, l0 * w_ref
  double time = 0;

  CrystalState() = default;
  explicit CrystalState(int n_ions);
  CrystalState(Eigen::VectorXd pos, Eigen::VectorXd vel, double t = 0);

  int n_ions() const { return static_cast<int>(positions.size() / 3); }
  double x(int i) const { return positions[3 * i]; }
  double y(int i) const { return positions[3 * i + 1]; }
  double z(int i) const { return positions[3 * i + 2]; }

  /// Checks finiteness, matching sizes, n >= 1 and the Coulomb guard.
  void validate() const;
};

/// Smallest pair separation at which the Coulomb term is still evaluated.
inline constexpr double kCoulombGuard = 1e-9;

double min_pair_distance(const Eigen::VectorXd& positions);

double potential_energy(const CrystalState& state, const TrapModel& trap, double t);
Eigen::VectorXd forces(const CrystalState& state, const TrapModel& trap, double t);
Eigen::MatrixXd hessian(const CrystalState& state, const TrapModel& trap, double t);

// Variants taking the instantaneous drive prefactor explicitly (see
// TrapModel::drive_strength). The integrator uses these so that it can apply
// an amplitude envelope; relaxation and mode analysis pass 0.
double potential_energy_at(const Eigen::VectorXd& positions, const TrapModel& trap,
                           double drive_strength);
/// Writes -grad V into `force` (resized as needed) and returns V.
double evaluate_forces(const Eigen::VectorXd& positions, const TrapModel& trap,
                       double drive_strength, Eigen::VectorXd& force);
Eigen::MatrixXd hessian_at(const Eigen::VectorXd& positions, const TrapModel& trap,
                           double drive_strength);

double kinetic_energy(const Eigen::VectorXd& velocities);

/// y -> -y for every ion (positions and velocities).
CrystalState mirror_y(const CrystalState& state);
/// x -> -x for every ion.
CrystalState mirror_x(const CrystalState& state);

}  // namespace ionkink
