#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ionkink/model.hpp"

namespace ionkink {

enum class ConfigurationKind { Linear, Zigzag, ZigzagBar, Kink, KinkBar, Other };

std::string_view to_string(ConfigurationKind kind);

/// Classification of a configuration. Charge convention: walking left to
/// right, a staggered transverse order parameter that turns from negative to
/// positive is a kink (+1); positive to negative is the anti-kink (-1).
struct ConfigurationClass {
  ConfigurationKind kind = ConfigurationKind::Other;
  std::optional<double> kink_position;
  std::optional<int> topological_charge;
  std::string diagnostics;
};

struct EquilibriumResult {
  CrystalState configuration;
  double energy = 0;
  double gradient_norm = 0;  // infinity norm
  double min_hessian_eigenvalue = 0;
  int iterations = 0;
  ConfigurationClass label;
};

struct RelaxOptions {
  double tolerance = 1e-10;
  int max_iterations = 100000;
  /// Negative Hessian eigenvalues below -saddle_tolerance count as a saddle.
  double saddle_tolerance = 1e-8;
  int history = 12;
};

/// Minimizes the static (eps = 0) potential from `initial`. Velocities of the
/// result are zero. Throws NoConvergence or SaddlePoint.
EquilibriumResult relax(const CrystalState& initial, const TrapModel& trap,
                        const RelaxOptions& options = {});

/// Below this staggered amplitude (l0) an ion counts as on-axis.
inline constexpr double kLinearThreshold = 1e-3;

/// Indices of ions ordered by axial coordinate.
std::vector<int> axial_order(const Eigen::VectorXd& positions);

/// Staggered transverse order parameter s_k = (-1)^k (y - <y>) along the
/// axially sorted chain.
std::vector<double> staggered_order(const Eigen::VectorXd& positions,
                                    const std::vector<int>& order);

ConfigurationClass classify(const CrystalState& config, const TrapModel& trap);

/// Unrelaxed guess for a two-row crystal; mirrored flips the row assignment.
CrystalState zigzag_guess(int n_ions, const TrapModel& trap, bool mirrored = false);

/// Relaxed zigzag (positive staggered order at the left end) or its mirror.
EquilibriumResult relax_zigzag(int n_ions, const TrapModel& trap, bool mirrored = false);

/// Joins two mirrored zigzag halves at `site_index` (axial rank) with a
/// 4-site linear interpolation of the transverse amplitude.
CrystalState seed_kink(int n_ions, const TrapModel& trap, int charge, int site_index);

/// Relaxed kink of the given charge seeded at `site_index` (default: center).
EquilibriumResult relax_kink(int n_ions, const TrapModel& trap, int charge,
                             std::optional<int> site_index = std::nullopt);

/// E(centered kink) - E(zigzag), dimensionless.
double formation_energy(const TrapModel& trap, int n_ions, int charge);

}  // namespace ionkink
