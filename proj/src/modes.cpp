#include "ionkink/modes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ionkink/equilibria.hpp"
#include "ionkink/error.hpp"

namespace ionkink {

ModeSpectrum normal_modes(const CrystalState& equilibrium, const TrapModel& trap) {
  equilibrium.validate();
  Eigen::VectorXd force;
  evaluate_forces(equilibrium.positions, trap, 0.0, force);
  if (force.cwiseAbs().maxCoeff() > 1e-8) {
    throw Error(ErrorKind::UnstableEquilibrium,
                "configuration is not an equilibrium (gradient " +
                    std::to_string(force.cwiseAbs().maxCoeff()) + ")");
  }
  const Eigen::MatrixXd h = hessian_at(equilibrium.positions, trap, 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
  if (eig.info() != Eigen::Success) throw Error(ErrorKind::NonFinite, "eigensolver failed");

  ModeSpectrum out;
  const int dim = static_cast<int>(h.rows());
  const int n = dim / 3;
  out.eigenvalues = eig.eigenvalues();
  out.eigenvectors = eig.eigenvectors();
  out.frequencies.resize(dim);
  for (int k = 0; k < dim; ++k) {
    double lambda = out.eigenvalues[k];
    if (lambda < -1e-8) {
      throw Error(ErrorKind::UnstableEquilibrium,
                  "negative curvature " + std::to_string(lambda) + " in mode " + std::to_string(k));
    }
    lambda = std::max(lambda, 0.0);
    out.frequencies[k] = trap.units.scaled_to_rad_per_s(std::sqrt(lambda));
  }

  // Degenerate blocks.
  out.block.assign(dim, 0);
  int current = 0;
  for (int k = 1; k < dim; ++k) {
    const double a = out.frequencies[k - 1], b = out.frequencies[k];
    if (std::abs(b - a) > kDegeneracyTolerance * std::max(std::abs(b), 1e-300)) ++current;
    out.block[k] = current;
  }

  Eigen::MatrixXd weights(n, dim);
  for (int k = 0; k < dim; ++k) {
    for (int i = 0; i < n; ++i) {
      weights(i, k) = out.eigenvectors.block(3 * i, k, 3, 1).squaredNorm();
    }
  }
  out.ion_weights.resize(n, dim);
  out.ipr.resize(dim);
  for (int k = 0; k < dim;) {
    int end = k;
    while (end < dim && out.block[end] == out.block[k]) ++end;
    const Eigen::VectorXd avg = weights.middleCols(k, end - k).rowwise().mean();
    for (int m = k; m < end; ++m) {
      out.ion_weights.col(m) = avg;
      out.ipr[m] = 1.0 / avg.squaredNorm();
    }
    k = end;
  }
  return out;
}

namespace {

Eigen::VectorXd drive_pattern(const CrystalState& equilibrium, const TrapModel& trap) {
  const int n = equilibrium.n_ions();
  const double kappa = trap.kappa_scaled();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(3 * n);
  for (int i = 0; i < n; ++i) {
    f[3 * i + 1] = -kappa * equilibrium.y(i);
    f[3 * i + 2] = kappa * equilibrium.z(i);
  }
  return f;
}

}  // namespace

double drive_coupling(const Eigen::VectorXd& mode, const CrystalState& equilibrium,
                      const TrapModel& trap) {
  return std::abs(mode.dot(drive_pattern(equilibrium, trap)));
}

Eigen::VectorXd block_couplings(const ModeSpectrum& spectrum, const CrystalState& equilibrium,
                                const TrapModel& trap) {
  const Eigen::VectorXd f = drive_pattern(equilibrium, trap);
  const Eigen::VectorXd proj = spectrum.eigenvectors.transpose() * f;
  const int dim = spectrum.size();
  Eigen::VectorXd out(dim);
  for (int k = 0; k < dim;) {
    int end = k;
    double sum = 0;
    while (end < dim && spectrum.block[end] == spectrum.block[k]) sum += proj[end] * proj[end], ++end;
    for (int m = k; m < end; ++m) out[m] = std::sqrt(sum);
    k = end;
  }
  return out;
}

double row_shear_correlation(const Eigen::VectorXd& mode, const CrystalState& equilibrium) {
  const auto order = axial_order(equilibrium.positions);
  const int n = equilibrium.n_ions();
  double y_center = 0;
  for (int i = 0; i < n; ++i) y_center += equilibrium.y(i);
  y_center /= n;
  double cross = 0, norm_a = 0, norm_b = 0;
  for (int k = 0; k + 1 < n; ++k) {
    const int a = order[k], b = order[k + 1];
    const bool upper_a = equilibrium.y(a) > y_center;
    const bool upper_b = equilibrium.y(b) > y_center;
    if (upper_a == upper_b) continue;
    const double ua = mode[3 * a], ub = mode[3 * b];
    cross += ua * ub;
    norm_a += ua * ua;
    norm_b += ub * ub;
  }
  if (norm_a == 0 || norm_b == 0) return 0.0;
  return cross / std::sqrt(norm_a * norm_b);
}

std::vector<int> KinkModeReport::gapped_mode_indices() const {
  std::vector<int> out;
  out.reserve(gapped.size());
  for (const auto& m : gapped) out.push_back(m.index);
  return out;
}

KinkModeReport identify_kink_modes(const ModeSpectrum& kink_spectrum,
                                   const ModeSpectrum& zigzag_spectrum,
                                   const CrystalState& kink_config, const TrapModel& trap,
                                   const KinkModeCriteria& criteria) {
  if (kink_spectrum.size() != zigzag_spectrum.size()) {
    throw Error(ErrorKind::Configuration, "spectra belong to different ion numbers");
  }
  KinkModeReport report;
  report.zigzag_band_min = zigzag_spectrum.min_frequency();
  report.zigzag_band_max = zigzag_spectrum.max_frequency();
  const double lo = report.zigzag_band_min * (1.0 - criteria.band_guard);
  const double hi = report.zigzag_band_max * (1.0 + criteria.band_guard);
  const Eigen::VectorXd coupling = block_couplings(kink_spectrum, kink_config, trap);

  auto describe = [&](int k) {
    KinkMode mode;
    mode.index = k;
    mode.frequency = kink_spectrum.frequencies[k];
    mode.ipr = kink_spectrum.ipr[k];
    mode.coupling = coupling[k];
    const Eigen::VectorXd weights = kink_spectrum.ion_weights.col(k);
    std::vector<int> ions(weights.size());
    std::iota(ions.begin(), ions.end(), 0);
    std::stable_sort(ions.begin(), ions.end(), [&](int a, int b) { return weights[a] > weights[b]; });
    double cumulative = 0;
    for (int ion : ions) {
      mode.core.push_back(ion);
      cumulative += weights[ion];
      if (cumulative >= criteria.core_weight) break;
    }
    return mode;
  };

  for (int k = 0; k < kink_spectrum.size(); ++k) {
    const double w = kink_spectrum.frequencies[k];
    if (w >= lo && w <= hi) continue;
    if (kink_spectrum.ipr[k] > criteria.max_ipr) continue;
    report.gapped.push_back(describe(k));
  }
  for (const auto& mode : report.gapped) {
    if (mode.frequency > hi && (!report.drive_target || mode.coupling > report.drive_target->coupling)) {
      report.drive_target = mode;
    }
  }
  if (report.drive_target) {
    const double radial = std::max(trap.omega[kY], trap.omega[kZ]);
    for (int k = 0; k < kink_spectrum.size(); ++k) {
      if (k == report.drive_target->index || kink_spectrum.frequencies[k] <= radial) continue;
      if (!report.secondary_resonance || coupling[k] > report.secondary_resonance->coupling) {
        report.secondary_resonance = describe(k);
      }
    }
  }
  if (!report.gapped.empty()) {
    report.lowest_kink_mode = report.gapped.front().frequency;
    report.highest_kink_mode = report.gapped.back().frequency;
  }
  return report;
}

}  // namespace ionkink
