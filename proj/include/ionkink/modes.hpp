#pragma once

#include <optional>
#include <vector>

#include "ionkink/model.hpp"

namespace ionkink {

/// Small-oscillation spectrum of a configuration. Frequencies are in rad/s
/// and ascending; eigenvector k is column k (3N components, orthonormal).
struct ModeSpectrum {
  Eigen::VectorXd frequencies;
  Eigen::VectorXd eigenvalues;  // dimensionless curvatures, (w / w_ref)^2
  Eigen::MatrixXd eigenvectors;
  /// Per-mode ion weights w_i = sum_axis e_{i,axis}^2 (averaged over
  /// degenerate blocks), one column per mode.
  Eigen::MatrixXd ion_weights;
  /// Inverse participation ratio 1 / sum_i w_i^2 (effective ion count).
  Eigen::VectorXd ipr;
  /// Index of the degenerate block each mode belongs to.
  std::vector<int> block;

  int size() const { return static_cast<int>(frequencies.size()); }
  double min_frequency() const { return frequencies.minCoeff(); }
  double max_frequency() const { return frequencies.maxCoeff(); }
};

/// Frequencies within this relative distance form one degenerate block.
inline constexpr double kDegeneracyTolerance = 1e-8;

/// Diagonalizes the eps = 0 Hessian at `equilibrium`. Throws
/// UnstableEquilibrium on a negative curvature below -1e-8 or when the
/// gradient exceeds 1e-8.
ModeSpectrum normal_modes(const CrystalState& equilibrium, const TrapModel& trap);

/// |e . f| with f_i = (0, -kappa~ y_i, +kappa~ z_i) the linear drive force
/// pattern at the equilibrium.
double drive_coupling(const Eigen::VectorXd& mode, const CrystalState& equilibrium,
                      const TrapModel& trap);

/// Drive coupling made rotation invariant inside degenerate blocks:
/// sqrt(sum over the block of (e . f)^2).
Eigen::VectorXd block_couplings(const ModeSpectrum& spectrum, const CrystalState& equilibrium,
                                const TrapModel& trap);

/// Cosine correlation of the axial components of neighbouring ions that sit
/// on opposite rows. A pure shear of the two rows gives -1.
double row_shear_correlation(const Eigen::VectorXd& mode, const CrystalState& equilibrium);

struct KinkMode {
  int index = 0;
  double frequency = 0;  // rad/s
  double ipr = 0;
  std::vector<int> core;  // dominant ions, largest weight first
  double coupling = 0;
};

struct KinkModeReport {
  std::vector<KinkMode> gapped;  // ascending frequency
  double zigzag_band_min = 0;    // rad/s
  double zigzag_band_max = 0;
  double lowest_kink_mode = 0;   // rad/s, 0 when none
  double highest_kink_mode = 0;
  /// Gapped mode above the band with the largest drive coupling: the
  /// spectroscopy resonance that ejects the kink.
  std::optional<KinkMode> drive_target;
  /// Next most strongly driven mode of the kink crystal above the highest
  /// radial trap frequency (may lie inside the band): the weaker resonance.
  std::optional<KinkMode> secondary_resonance;
  bool empty() const { return gapped.empty(); }
  std::vector<int> gapped_mode_indices() const;
};

struct KinkModeCriteria {
  double max_ipr = 12.0;
  double band_guard = 0.005;  // relative
  double core_weight = 0.9;   // cumulative weight defining the core
};

/// Modes of the kink spectrum lying outside the zigzag band and localized
/// (IPR below the threshold). An empty result is not an error; callers that
/// need modes check `empty()`.
KinkModeReport identify_kink_modes(const ModeSpectrum& kink_spectrum,
                                   const ModeSpectrum& zigzag_spectrum,
                                   const CrystalState& kink_config, const TrapModel& trap,
                                   const KinkModeCriteria& criteria = {});

}  // namespace ionkink
