#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ionkink/equilibria.hpp"
#include "ionkink/modes.hpp"

using namespace ionkink;

namespace {

TrapModel reference_trap() {
  return TrapModel::make(24, 1, {constants::two_pi * 38.2e3, constants::two_pi * 232.3e3,
                                 constants::two_pi * 293e3});
}

std::vector<double> sorted_scaled(const ModeSpectrum& s, const TrapModel& trap) {
  std::vector<double> f;
  for (int k = 0; k < s.size(); ++k) f.push_back(trap.units.rad_per_s_to_scaled(s.frequencies[k]));
  std::sort(f.begin(), f.end());
  return f;
}

}  // namespace

TEST_CASE("two-ion mode set") {
  const TrapModel trap = reference_trap();
  CrystalState s(2);
  s.positions << -0.5 * std::cbrt(2.0), 0, 0, 0.5 * std::cbrt(2.0), 0, 0;
  const EquilibriumResult r = relax(s, trap);
  const ModeSpectrum spec = normal_modes(r.configuration, trap);
  const double wy = trap.omega[1] / trap.omega[0], wz = trap.omega[2] / trap.omega[0];
  std::vector<double> expected = {1, std::sqrt(3.0), wy, std::sqrt(wy * wy - 1), wz,
                                  std::sqrt(wz * wz - 1)};
  std::sort(expected.begin(), expected.end());
  const auto got = sorted_scaled(spec, trap);
  REQUIRE(got.size() == 6);
  for (int k = 0; k < 6; ++k) CHECK(got[k] == doctest::Approx(expected[k]).epsilon(1e-8));
}

TEST_CASE("three-ion axial modes") {
  const TrapModel trap = reference_trap();
  CrystalState s(3);
  s.positions << -1, 0, 0, 0, 0, 0, 1, 0, 0;
  const EquilibriumResult r = relax(s, trap);
  const ModeSpectrum spec = normal_modes(r.configuration, trap);
  std::vector<double> axial;
  for (int k = 0; k < spec.size(); ++k) {
    double weight = 0;
    for (int i = 0; i < 3; ++i) weight += spec.eigenvectors(3 * i, k) * spec.eigenvectors(3 * i, k);
    if (weight > 0.5) axial.push_back(trap.units.rad_per_s_to_scaled(spec.frequencies[k]));
  }
  std::sort(axial.begin(), axial.end());
  REQUIRE(axial.size() == 3);
  CHECK(axial[0] == doctest::Approx(1).epsilon(1e-6));
  CHECK(axial[1] == doctest::Approx(std::sqrt(3.0)).epsilon(1e-6));
  CHECK(axial[2] == doctest::Approx(std::sqrt(29.0 / 5)).epsilon(1e-6));
}

TEST_CASE("zigzag spectrum contains the exact axial centre-of-mass mode") {
  const TrapModel trap = reference_trap();
  const EquilibriumResult zz = relax_zigzag(34, trap);
  const ModeSpectrum spec = normal_modes(zz.configuration, trap);
  CHECK(spec.size() == 102);
  CHECK(spec.min_frequency() / constants::two_pi == doctest::Approx(38.2e3).epsilon(1e-6));
  for (int k = 0; k < spec.size(); ++k) {
    CHECK(spec.ipr[k] >= 1.0);
    CHECK(spec.ipr[k] <= 34.0 + 1e-9);
  }
  const Eigen::MatrixXd& v = spec.eigenvectors;
  CHECK((v.transpose() * v - Eigen::MatrixXd::Identity(102, 102)).norm() < 1e-9);
}

TEST_CASE("kink modes are localized and lie outside the zigzag band") {
  const TrapModel trap = reference_trap();
  const EquilibriumResult zz = relax_zigzag(34, trap);
  const EquilibriumResult k = relax_kink(34, trap, 1);
  const ModeSpectrum zs = normal_modes(zz.configuration, trap);
  const ModeSpectrum ks = normal_modes(k.configuration, trap);
  const KinkModeReport report = identify_kink_modes(ks, zs, k.configuration, trap);
  REQUIRE_FALSE(report.empty());
  for (const auto& m : report.gapped) {
    CHECK(m.ipr <= 12.0);
    const bool outside = m.frequency < report.zigzag_band_min * (1 - 0.005) ||
                         m.frequency > report.zigzag_band_max * (1 + 0.005);
    CHECK(outside);
  }
  REQUIRE(report.drive_target);
  for (const auto& m : report.gapped) {
    if (m.frequency > report.zigzag_band_max) CHECK(m.coupling <= report.drive_target->coupling);
  }
  CHECK(report.highest_kink_mode >= report.drive_target->frequency);
}

TEST_CASE("drive coupling of a pure radial displacement") {
  const TrapModel trap = reference_trap();
  const EquilibriumResult zz = relax_zigzag(10, trap);
  const ModeSpectrum spec = normal_modes(zz.configuration, trap);
  const Eigen::VectorXd c = block_couplings(spec, zz.configuration, trap);
  CHECK(c.size() == spec.size());
  for (int k = 0; k < c.size(); ++k) CHECK(std::isfinite(c[k]));
}
