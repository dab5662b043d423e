#include <doctest.h>

#include <cmath>

#include "ionkink/equilibria.hpp"
#include "ionkink/error.hpp"

using namespace ionkink;

namespace {

TrapModel reference_trap() {
  return TrapModel::make(24, 1, {constants::two_pi * 38.2e3, constants::two_pi * 232.3e3,
                                 constants::two_pi * 293e3});
}

}  // namespace

TEST_CASE("two ions sit 2^(1/3) apart") {
  const TrapModel trap = reference_trap();
  CrystalState s(2);
  s.positions << -0.4, 0.01, 0.0, 0.7, -0.01, 0.0;
  const EquilibriumResult r = relax(s, trap);
  const double d = std::abs(r.configuration.x(1) - r.configuration.x(0));
  CHECK(d == doctest::Approx(std::cbrt(2.0)).epsilon(1e-10));
  CHECK(std::abs(r.configuration.y(0)) < 1e-9);
  CHECK(r.label.kind == ConfigurationKind::Linear);
}

TEST_CASE("three ions: outer ions at +-(5/4)^(1/3)") {
  const TrapModel trap = reference_trap();
  CrystalState s(3);
  s.positions << -1.2, 0, 0, 0.1, 0, 0, 1.0, 0, 0;
  const EquilibriumResult r = relax(s, trap);
  CHECK(std::abs(r.configuration.x(1)) < 1e-9);
  CHECK(r.configuration.x(2) == doctest::Approx(std::cbrt(1.25)).epsilon(1e-10));
}

TEST_CASE("single ion relaxes to the origin") {
  CrystalState s(1);
  s.positions << 0.2, 0.1, -0.1;
  const EquilibriumResult r = relax(s, reference_trap());
  CHECK(r.configuration.positions.norm() < 1e-9);
}

TEST_CASE("34 ions form a planar zigzag") {
  const TrapModel trap = reference_trap();
  const EquilibriumResult zz = relax_zigzag(34, trap);
  CHECK(zz.label.kind == ConfigurationKind::Zigzag);
  CHECK(zz.gradient_norm < 1e-8);
  CHECK(zz.min_hessian_eigenvalue > 0);
  for (int i = 0; i < 34; ++i) CHECK(std::abs(zz.configuration.z(i)) < 1e-6);

  const EquilibriumResult bar = relax_zigzag(34, trap, true);
  CHECK(bar.label.kind == ConfigurationKind::ZigzagBar);
  CHECK(bar.energy == doctest::Approx(zz.energy).epsilon(1e-12));
}

TEST_CASE("kink and anti-kink") {
  const TrapModel trap = reference_trap();
  const EquilibriumResult k = relax_kink(34, trap, +1);
  const EquilibriumResult kb = relax_kink(34, trap, -1);
  CHECK(k.label.kind == ConfigurationKind::Kink);
  CHECK(kb.label.kind == ConfigurationKind::KinkBar);
  REQUIRE(k.label.topological_charge);
  CHECK(*k.label.topological_charge == 1);
  CHECK(*kb.label.topological_charge == -1);
  CHECK(k.min_hessian_eigenvalue > 0);
  CHECK(k.energy == doctest::Approx(kb.energy).epsilon(1e-10));
  REQUIRE(k.label.kink_position);
  CHECK(std::abs(*k.label.kink_position) < 1.0);
  CHECK(formation_energy(trap, 34, 1) > 0);
}

TEST_CASE("kinks need the zigzag regime") {
  const TrapModel stiff = TrapModel::make(24, 1, {constants::two_pi * 38.2e3,
                                                  constants::two_pi * 900e3,
                                                  constants::two_pi * 1000e3});
  CHECK(relax_zigzag(34, stiff).label.kind == ConfigurationKind::Linear);
  try {
    relax_kink(34, stiff, 1);
    FAIL("expected UnsupportedRegime");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnsupportedRegime);
  }
  CHECK_THROWS_AS(relax_kink(34, reference_trap(), 2), Error);
}

TEST_CASE("staggered order of a zigzag has one sign") {
  const EquilibriumResult zz = relax_zigzag(20, reference_trap());
  const auto order = axial_order(zz.configuration.positions);
  const auto s = staggered_order(zz.configuration.positions, order);
  for (double v : s) CHECK(v * s.front() > 0);
}
