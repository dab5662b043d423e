#include "ionkink/model.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ionkink/error.hpp"

namespace ionkink {

UnitSystem UnitSystem::make(double mass_amu, double charge_e, double omega_ref) {
  if (!(mass_amu > 0) || !(charge_e > 0) || !(omega_ref > 0) || !std::isfinite(mass_amu) ||
      !std::isfinite(charge_e) || !std::isfinite(omega_ref)) {
    throw Error(ErrorKind::Configuration, "mass, charge and reference frequency must be positive");
  }
  UnitSystem u;
  u.ion_mass = mass_amu * constants::atomic_mass;
  u.ion_charge = charge_e * constants::elementary_charge;
  u.omega_ref = omega_ref;
  const double k_e = 1.0 / (4.0 * constants::pi * constants::vacuum_permittivity);
  u.length = std::cbrt(k_e * u.ion_charge * u.ion_charge / (u.ion_mass * omega_ref * omega_ref));
  u.time = 1.0 / omega_ref;
  u.energy = u.ion_mass * omega_ref * omega_ref * u.length * u.length;
  return u;
}

TrapModel TrapModel::make(double mass_amu, double charge_e, std::array<double, 3> omega,
                          Anharmonicity anharmonic, Drive drive) {
  TrapModel trap;
  trap.units = UnitSystem::make(mass_amu, charge_e, omega[0]);
  trap.omega = omega;
  trap.anharmonic = anharmonic;
  trap.drive = drive;
  trap.validate();
  return trap;
}

void TrapModel::validate() const {
  for (double w : omega) {
    if (!(w > 0) || !std::isfinite(w)) {
      throw Error(ErrorKind::Configuration, "trap frequencies must be positive and finite");
    }
  }
  if (!(omega[0] < omega[1] && omega[1] < omega[2])) {
    throw Error(ErrorKind::Configuration,
                "planar crystals need w_x < w_y < w_z (got " + std::to_string(omega[0]) + ", " +
                    std::to_string(omega[1]) + ", " + std::to_string(omega[2]) + ")");
  }
  const auto& a = anharmonic;
  for (double c : {a.alpha_x, a.alpha_y, a.beta_x, a.beta_y, a.c_xxy}) {
    if (!std::isfinite(c)) throw Error(ErrorKind::Configuration, "non-finite anharmonic coefficient");
  }
  if (!(drive.epsilon >= 0) || !std::isfinite(drive.epsilon)) {
    throw Error(ErrorKind::Configuration, "drive epsilon must be >= 0");
  }
  if (!(drive.omega_d >= 0) || !std::isfinite(drive.omega_d)) {
    throw Error(ErrorKind::Configuration, "drive frequency must be >= 0");
  }
  if (drive.kappa && (!(*drive.kappa >= 0) || !std::isfinite(*drive.kappa))) {
    throw Error(ErrorKind::Configuration, "drive gain must be >= 0");
  }
}

double TrapModel::kappa() const {
  if (drive.kappa) return *drive.kappa;
  return 0.5 * (omega[1] * omega[1] + omega[2] * omega[2]);
}

double TrapModel::drive_strength(double t) const {
  if (drive.epsilon == 0) return 0.0;
  return drive.epsilon * kappa_scaled() * std::sin(drive_frequency_scaled() * t);
}

TrapModel TrapModel::with_drive(double epsilon, double omega_d) const {
  TrapModel copy = *this;
  copy.drive.epsilon = epsilon;
  copy.drive.omega_d = omega_d;
  copy.validate();
  return copy;
}

TrapModel TrapModel::without_drive() const {
  TrapModel copy = *this;
  copy.drive.epsilon = 0;
  return copy;
}

CrystalState::CrystalState(int n_ions)
    : positions(Eigen::VectorXd::Zero(3 * n_ions)), velocities(Eigen::VectorXd::Zero(3 * n_ions)) {}

CrystalState::CrystalState(Eigen::VectorXd pos, Eigen::VectorXd vel, double t)
    : positions(std::move(pos)), velocities(std::move(vel)), time(t) {}

void CrystalState::validate() const {
  if (positions.size() < 3 || positions.size() % 3 != 0) {
    throw Error(ErrorKind::Configuration, "crystal needs at least one ion with 3 coordinates");
  }
  if (velocities.size() != positions.size()) {
    throw Error(ErrorKind::Configuration, "position and velocity sizes differ");
  }
  if (!positions.allFinite() || !velocities.allFinite() || !std::isfinite(time)) {
    throw Error(ErrorKind::NonFinite, "crystal state has non-finite entries");
  }
  if (n_ions() > 1 && min_pair_distance(positions) <= kCoulombGuard) {
    throw Error(ErrorKind::CoulombSingularity, "two ions closer than the Coulomb guard");
  }
}

double min_pair_distance(const Eigen::VectorXd& positions) {
  const int n = static_cast<int>(positions.size() / 3);
  double best2 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double dx = positions[3 * i] - positions[3 * j];
      const double dy = positions[3 * i + 1] - positions[3 * j + 1];
      const double dz = positions[3 * i + 2] - positions[3 * j + 2];
      best2 = std::min(best2, dx * dx + dy * dy + dz * dz);
    }
  }
  return std::sqrt(best2);
}

namespace {

constexpr double kGuard2 = kCoulombGuard * kCoulombGuard;

// 1/sqrt(x) from the classic bit-level estimate and four Newton steps
// (relative error below 3e-16 for normal x). Unlike 1/std::sqrt this is plain
// multiply-add, so the pair loop vectorizes without a divider bottleneck.
inline double inverse_sqrt(double x) {
  double y = std::bit_cast<double>(0x5fe6eb50c7b537a9ULL - (std::bit_cast<std::uint64_t>(x) >> 1));
  const double half = 0.5 * x;
  for (int it = 0; it < 4; ++it) y *= 1.5 - half * y * y;
  return y;
}

[[noreturn]] void singular(int i, int j) {
  throw Error(ErrorKind::CoulombSingularity,
              "ions " + std::to_string(i) + " and " + std::to_string(j) + " coincide");
}

void check_size(const Eigen::VectorXd& positions) {
  if (positions.size() < 3 || positions.size() % 3 != 0) {
    throw Error(ErrorKind::Configuration, "position vector length must be a positive multiple of 3");
  }
}

}  // namespace

double potential_energy_at(const Eigen::VectorXd& positions, const TrapModel& trap,
                           double drive_strength) {
  check_size(positions);
  const int n = static_cast<int>(positions.size() / 3);
  const double kx = trap.curvature(kX), ky = trap.curvature(kY), kz = trap.curvature(kZ);
  const auto& a = trap.anharmonic;
  const double* p = positions.data();

  double trap_energy = 0, anh_energy = 0, drive_energy = 0, coulomb = 0;
  for (int i = 0; i < n; ++i) {
    const double x = p[3 * i], y = p[3 * i + 1], z = p[3 * i + 2];
    trap_energy += 0.5 * (kx * x * x + ky * y * y + kz * z * z);
    const double x2 = x * x, y2 = y * y;
    anh_energy += a.alpha_x * x2 * x + a.alpha_y * y2 * y + a.beta_x * x2 * x2 + a.beta_y * y2 * y2 +
                  a.c_xxy * x2 * y;
    drive_energy += 0.5 * (y2 - z * z);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double dx = p[3 * i] - p[3 * j];
      const double dy = p[3 * i + 1] - p[3 * j + 1];
      const double dz = p[3 * i + 2] - p[3 * j + 2];
      const double r2 = dx * dx + dy * dy + dz * dz;
      if (r2 < kGuard2) singular(i, j);
      coulomb += 1.0 / std::sqrt(r2);
    }
  }
  const double v = trap_energy + anh_energy + coulomb + drive_strength * drive_energy;
  if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "potential energy overflow");
  return v;
}

double evaluate_forces(const Eigen::VectorXd& positions, const TrapModel& trap,
                       double drive_strength, Eigen::VectorXd& force) {
  check_size(positions);
  const int n = static_cast<int>(positions.size() / 3);
  force.resize(positions.size());
  const double kx = trap.curvature(kX), ky = trap.curvature(kY) + drive_strength,
               kz = trap.curvature(kZ) - drive_strength;
  const auto& a = trap.anharmonic;
  const double* p = positions.data();
  double* f = force.data();

  double energy = 0;
  for (int i = 0; i < n; ++i) {
    const double x = p[3 * i], y = p[3 * i + 1], z = p[3 * i + 2];
    const double x2 = x * x, y2 = y * y;
    energy += 0.5 * (kx * x2 + ky * y2 + kz * z * z) + a.alpha_x * x2 * x + a.alpha_y * y2 * y +
              a.beta_x * x2 * x2 + a.beta_y * y2 * y2 + a.c_xxy * x2 * y;
    f[3 * i] = -kx * x - 3 * a.alpha_x * x2 - 4 * a.beta_x * x2 * x - 2 * a.c_xxy * x * y;
    f[3 * i + 1] = -ky * y - 3 * a.alpha_y * y2 - 4 * a.beta_y * y2 * y - a.c_xxy * x2;
    f[3 * i + 2] = -kz * z;
  }
  // Pair differences go into flat arrays so the 1/r^3 kernel runs as one
  // long vectorizable loop. Summation order is fixed, so results are bitwise
  // reproducible for a given build.
  const int pairs = n * (n - 1) / 2;
  const int padded = (pairs + 7) / 8 * 8;
  thread_local std::vector<double> buf;
  buf.resize(6 * static_cast<std::size_t>(n) + 5 * static_cast<std::size_t>(padded));
  double* px = buf.data();
  double* py = px + n;
  double* pz = py + n;
  double* gx = pz + n;
  double* gy = gx + n;
  double* gz = gy + n;
  double* dx = gz + n;
  double* dy = dx + padded;
  double* dz = dy + padded;
  double* w = dz + padded;
  double* u = w + padded;
  for (int i = 0; i < n; ++i) {
    px[i] = p[3 * i];
    py[i] = p[3 * i + 1];
    pz[i] = p[3 * i + 2];
    gx[i] = gy[i] = gz[i] = 0.0;
  }
  for (int i = 0, k = 0; i < n - 1; ++i) {
    const double xi = px[i], yi = py[i], zi = pz[i];
    const int row = n - 1 - i;
    for (int j = 0; j < row; ++j) {
      dx[k + j] = xi - px[i + 1 + j];
      dy[k + j] = yi - py[i + 1 + j];
      dz[k + j] = zi - pz[i + 1 + j];
    }
    k += row;
  }
  for (int k = pairs; k < padded; ++k) {
    dx[k] = 1.0;
    dy[k] = dz[k] = 0.0;
  }
  int close = 0;
  for (int k = 0; k < padded; ++k) {
    const double r2 = dx[k] * dx[k] + dy[k] * dy[k] + dz[k] * dz[k];
    close |= r2 < kGuard2;
    const double inv_r = inverse_sqrt(r2);
    u[k] = inv_r;
    w[k] = inv_r * inv_r * inv_r;
  }
  double lanes[8] = {};
  for (int k = 0; k < pairs - pairs % 8; k += 8) {
    for (int l = 0; l < 8; ++l) lanes[l] += u[k + l];
  }
  for (int k = pairs - pairs % 8; k < pairs; ++k) lanes[k % 8] += u[k];
  for (double lane : lanes) energy += lane;
  for (int k = 0; k < padded; ++k) {
    dx[k] *= w[k];
    dy[k] *= w[k];
    dz[k] *= w[k];
  }
  for (int i = 0, k = 0; i < n - 1; ++i) {
    const int row = n - 1 - i;
    double* __restrict hx = gx + i + 1;
    double* __restrict hy = gy + i + 1;
    double* __restrict hz = gz + i + 1;
    const double* __restrict cx = dx + k;
    const double* __restrict cy = dy + k;
    const double* __restrict cz = dz + k;
    double fx = 0, fy = 0, fz = 0;
    for (int j = 0; j < row; ++j) {
      hx[j] -= cx[j];
      hy[j] -= cy[j];
      hz[j] -= cz[j];
    }
    for (int j = 0; j < row; ++j) {
      fx += cx[j];
      fy += cy[j];
      fz += cz[j];
    }
    gx[i] += fx;
    gy[i] += fy;
    gz[i] += fz;
    k += row;
  }
  for (int i = 0; i < n; ++i) {
    f[3 * i] += gx[i];
    f[3 * i + 1] += gy[i];
    f[3 * i + 2] += gz[i];
  }
  if (close) {
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double ex = px[i] - px[j], ey = py[i] - py[j], ez = pz[i] - pz[j];
        if (ex * ex + ey * ey + ez * ez < kGuard2) singular(i, j);
      }
    }
  }
  if (!std::isfinite(energy)) throw Error(ErrorKind::NonFinite, "potential energy overflow");
  return energy;
}

Eigen::MatrixXd hessian_at(const Eigen::VectorXd& positions, const TrapModel& trap,
                           double drive_strength) {
  check_size(positions);
  const int n = static_cast<int>(positions.size() / 3);
  const int dim = 3 * n;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  const double kx = trap.curvature(kX), ky = trap.curvature(kY) + drive_strength,
               kz = trap.curvature(kZ) - drive_strength;
  const auto& a = trap.anharmonic;
  const double* p = positions.data();

  for (int i = 0; i < n; ++i) {
    const double x = p[3 * i], y = p[3 * i + 1];
    h(3 * i, 3 * i) = kx + 6 * a.alpha_x * x + 12 * a.beta_x * x * x + 2 * a.c_xxy * y;
    h(3 * i + 1, 3 * i + 1) = ky + 6 * a.alpha_y * y + 12 * a.beta_y * y * y;
    h(3 * i + 2, 3 * i + 2) = kz;
    h(3 * i, 3 * i + 1) = h(3 * i + 1, 3 * i) = 2 * a.c_xxy * x;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d[3] = {p[3 * i] - p[3 * j], p[3 * i + 1] - p[3 * j + 1],
                           p[3 * i + 2] - p[3 * j + 2]};
      const double r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
      if (r2 < kGuard2) singular(i, j);
      const double inv_r = 1.0 / std::sqrt(r2);
      const double inv_r3 = inv_r * inv_r * inv_r;
      const double inv_r5 = inv_r3 * inv_r * inv_r;
      for (int u = 0; u < 3; ++u) {
        for (int v = 0; v < 3; ++v) {
          // d^2(1/r)/dr_u dr_v = (3 r_u r_v - delta_uv r^2) / r^5
          const double block = 3 * d[u] * d[v] * inv_r5 - (u == v ? inv_r3 : 0.0);
          h(3 * i + u, 3 * i + v) += block;
          h(3 * j + u, 3 * j + v) += block;
          h(3 * i + u, 3 * j + v) -= block;
          h(3 * j + u, 3 * i + v) -= block;
        }
      }
    }
  }
  if (!h.allFinite()) throw Error(ErrorKind::NonFinite, "Hessian overflow");
  return h;
}

double potential_energy(const CrystalState& state, const TrapModel& trap, double t) {
  return potential_energy_at(state.positions, trap, trap.drive_strength(t));
}

Eigen::VectorXd forces(const CrystalState& state, const TrapModel& trap, double t) {
  Eigen::VectorXd f;
  evaluate_forces(state.positions, trap, trap.drive_strength(t), f);
  return f;
}

Eigen::MatrixXd hessian(const CrystalState& state, const TrapModel& trap, double t) {
  return hessian_at(state.positions, trap, trap.drive_strength(t));
}

double kinetic_energy(const Eigen::VectorXd& velocities) { return 0.5 * velocities.squaredNorm(); }

CrystalState mirror_y(const CrystalState& state) {
  CrystalState out = state;
  for (int i = 0; i < state.n_ions(); ++i) {
    out.positions[3 * i + 1] = -out.positions[3 * i + 1];
    out.velocities[3 * i + 1] = -out.velocities[3 * i + 1];
  }
  return out;
}

CrystalState mirror_x(const CrystalState& state) {
  CrystalState out = state;
  for (int i = 0; i < state.n_ions(); ++i) {
    out.positions[3 * i] = -out.positions[3 * i];
    out.velocities[3 * i] = -out.velocities[3 * i];
  }
  return out;
}

}  // namespace ionkink
