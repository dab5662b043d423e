#include <doctest.h>

#include <cmath>
#include <random>

#include "ionkink/analysis.hpp"
#include "ionkink/error.hpp"

using namespace ionkink;

namespace {

EscapeOutcome escape(double t, EscapeDirection d = EscapeDirection::Right, int charge = 1) {
  return {true, t, d, charge};
}

EscapeOutcome censored(double t) { return {false, t, std::nullopt, 1}; }

UnitSystem mg24() { return UnitSystem::make(24, 1, constants::two_pi * 38.2e3); }

}  // namespace

TEST_CASE("binomial estimate") {
  const BinomialEstimate b = binomial_estimate(3, 12);
  CHECK(b.probability == doctest::Approx(0.25));
  CHECK(b.error == doctest::Approx(std::sqrt(0.25 * 0.75 / 12)));
  CHECK_THROWS_AS(binomial_estimate(5, 4), Error);
}

TEST_CASE("Kaplan-Meier survival") {
  // Hand-computed: escapes at 1, 2; censoring at 2 (after the escape) and 3.
  const std::vector<EscapeOutcome> ev = {escape(1), escape(2), censored(2), censored(3)};
  const SurvivalCurve c = survival_curve(ev, {0, 1, 1.5, 2, 5});
  CHECK(c.survival[0] == 1.0);
  CHECK(c.survival[1] == doctest::Approx(0.75));
  CHECK(c.survival[2] == doctest::Approx(0.75));
  CHECK(c.survival[3] == doctest::Approx(0.75 * 2.0 / 3.0));
  CHECK(c.survival[4] == doctest::Approx(0.5));
  CHECK(c.at_risk[1] == 3);
  // Greenwood after the first step equals the binomial error.
  CHECK(c.error[1] == doctest::Approx(std::sqrt(0.75 * 0.25 / 4)));
  CHECK_THROWS_AS(survival_curve({}, {0}), Error);
}

TEST_CASE("censored exponential maximum likelihood") {
  std::vector<EscapeOutcome> ev;
  for (double t : {1.0, 2.0, 3.0, 4.0, 5.0, 6.0}) ev.push_back(escape(t));
  for (int k = 0; k < 4; ++k) ev.push_back(censored(10));
  const LifetimeFit f = fit_lifetime(ev);
  CHECK(f.tau_ms == doctest::Approx(61.0 / 6.0));
  CHECK(f.n_escapes == 6);
  CHECK(f.n_censored == 4);
  CHECK(f.ci68_low_ms < f.tau_ms);
  CHECK(f.ci68_high_ms > f.tau_ms);
  // Likelihood-ratio interval: the log-likelihood drops by 1/2 at both ends.
  auto ll = [&](double tau) { return -6 * std::log(tau) - 61.0 / tau; };
  CHECK(ll(f.tau_ms) - ll(f.ci68_low_ms) == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(ll(f.tau_ms) - ll(f.ci68_high_ms) == doctest::Approx(0.5).epsilon(1e-8));

  std::vector<EscapeOutcome> few = {escape(1), escape(2), censored(3)};
  try {
    fit_lifetime(few);
    FAIL("expected TooFewEscapes");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TooFewEscapes);
  }
}

TEST_CASE("Kolmogorov distribution") {
  CHECK(kolmogorov_survival(0) == 1.0);
  // Tabulated: Q(1.36) = 0.0494, Q(1.0) = 0.2700, Q(0.5) = 0.9639.
  CHECK(kolmogorov_survival(1.36) == doctest::Approx(0.04939).epsilon(2e-3));
  CHECK(kolmogorov_survival(1.0) == doctest::Approx(0.26999967).epsilon(1e-6));
  CHECK(kolmogorov_survival(0.5) == doctest::Approx(0.96394524).epsilon(1e-6));
  // Both series agree where they switch.
  CHECK(kolmogorov_survival(1.1799999) == doctest::Approx(kolmogorov_survival(1.18)).epsilon(1e-6));
}

TEST_CASE("K-S test accepts exponential data and rejects uniform data") {
  const auto ev = synthetic_escapes(10, 1e9, 500, 3, 0);
  const LifetimeFit f = fit_lifetime(ev);
  CHECK(f.tau_ms == doctest::Approx(10).epsilon(0.15));
  CHECK(ks_exponential(ev, f.tau_ms, INFINITY).p_value > 0.01);

  std::vector<EscapeOutcome> uniform;
  for (int k = 1; k <= 500; ++k) uniform.push_back(escape(k * 0.02));
  CHECK(ks_exponential(uniform, fit_lifetime(uniform).tau_ms, INFINITY).p_value < 1e-3);
}

TEST_CASE("synthetic escapes are reproducible and censored at the window") {
  const auto a = synthetic_escapes(5, 8, 100, 1, 2);
  const auto b = synthetic_escapes(5, 8, 100, 1, 2);
  const auto c = synthetic_escapes(5, 8, 100, 1, 3);
  REQUIRE(a.size() == 100);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].time_ms == b[i].time_ms);
    CHECK(a[i].time_ms <= 8);
    if (!a[i].escaped) CHECK(a[i].time_ms == 8);
    differs = differs || a[i].time_ms != c[i].time_ms;
  }
  CHECK(differs);
}

TEST_CASE("Lorentzian fits recover known peaks") {
  std::vector<double> x, y, sigma;
  for (int k = 0; k < 25; ++k) {
    const double f = 300e3 + 2e3 * k;
    x.push_back(f);
    const double d1 = f - 330e3, d2 = f - 312e3;
    y.push_back(0.05 + 0.6 * 16e6 / (d1 * d1 + 16e6) + 0.2 * 9e6 / (d2 * d2 + 9e6));
    sigma.push_back(0.01);
  }
  const LorentzianFit two = fit_lorentzian(x, y, sigma, 2);
  REQUIRE(two.peaks.size() == 2);
  CHECK(two.peaks[0].center_hz == doctest::Approx(330e3).epsilon(1e-6));
  CHECK(two.peaks[0].width_hz == doctest::Approx(4e3).epsilon(1e-5));
  CHECK(two.peaks[1].center_hz == doctest::Approx(312e3).epsilon(1e-6));
  CHECK(two.peaks[1].amplitude == doctest::Approx(0.2).epsilon(1e-5));
  CHECK(two.offset == doctest::Approx(0.05).epsilon(1e-5));
  CHECK(two.r_squared == doctest::Approx(1.0));

  const LorentzianFit one = fit_lorentzian(x, y, sigma, 1);
  CHECK(std::abs(one.peaks[0].center_hz - 330e3) < one.peaks[0].width_hz);
  CHECK_THROWS_AS(fit_lorentzian({1, 2, 3}, {1, 2, 1}, {1, 1, 1}, 1), Error);
}

TEST_CASE("temperature calibration") {
  const UnitSystem u = mg24();
  const int n = 34;
  std::vector<EnergySample> samples;
  for (double e : {0.0, 1e-3, 2e-3, 3e-3}) {
    samples.push_back({e, 1.5 * n * u.kelvin_to_energy(1e-3 + 1.5 * e)});
  }
  const TemperatureMap m = calibrate_temperature(samples, n, u);
  CHECK(m.temperature_k(0) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(m.temperature_k(2.5e-3) == doctest::Approx(1e-3 + 1.5 * 2.5e-3).epsilon(1e-12));
  CHECK(std::abs(m.intercept_deviation()) < 1e-12);
  CHECK(m.r_squared() == doctest::Approx(1.0));
  CHECK_THROWS_AS(m.temperature_k(1e-2), Error);
  CHECK_NOTHROW(m.temperature_k(1e-2, true));

  CHECK_THROWS_AS(calibrate_temperature({{1e-3, 1.0}, {2e-3, 2.0}, {3e-3, 3.0}}, n, u), Error);
  CHECK_THROWS_AS(calibrate_temperature({{0, 1.0}, {2e-3, 2.0}}, n, u), Error);
}

TEST_CASE("Kramers fit is exact on noiseless lifetimes") {
  const double w = 26.5, a = 0.0161;
  std::vector<double> t, tau;
  for (double tk : {2.5e-3, 2.9e-3, 3.3e-3, 3.9e-3}) {
    t.push_back(tk);
    tau.push_back(kramers_lifetime(w, a, tk));
  }
  const KramersFit f = fit_kramers_temperatures(t, tau);
  CHECK(f.w_kbtd == doctest::Approx(w).epsilon(1e-12));
  CHECK(std::exp(f.ln_prefactor) == doctest::Approx(a).epsilon(1e-10));
  CHECK(f.r_squared == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_FALSE(f.negative_barrier);

  const TemperatureMap m = TemperatureMap::linear(1e-3, 1.5, 3e-3, 34, mg24());
  std::vector<LifetimePoint> pts;
  for (double e : {1e-3, 1.5e-3, 2e-3, 2.5e-3}) pts.push_back({e, kramers_lifetime(w, a, m.temperature_k(e))});
  CHECK(fit_kramers(pts, m).w_kbtd == doctest::Approx(w).epsilon(1e-10));
  CHECK_THROWS_AS(fit_kramers_temperatures({1e-3, 2e-3}, {1, 2}), Error);
}

TEST_CASE("directionality counts escapes of one charge") {
  std::vector<EscapeOutcome> ev;
  for (int k = 0; k < 30; ++k) ev.push_back(escape(1, EscapeDirection::Right, 1));
  for (int k = 0; k < 10; ++k) ev.push_back(escape(1, EscapeDirection::Left, 1));
  for (int k = 0; k < 20; ++k) ev.push_back(escape(1, EscapeDirection::Left, -1));
  ev.push_back(censored(5));
  const DirectionalityResult r = directionality(ev, 1);
  CHECK(r.n_right == 30);
  CHECK(r.n_left == 10);
  CHECK(r.td == doctest::Approx(0.5));
  CHECK(r.error == doctest::Approx(2 * std::sqrt(0.75 * 0.25 / 40)));
  CHECK(directionality(ev, -1).td == -1.0);
  const std::vector<EscapeOutcome> few(9, escape(1, EscapeDirection::Right, 1));
  CHECK_THROWS_AS(directionality(few, 1), Error);
}

TEST_CASE("TD separation") {
  DirectionalityResult a, b;
  a.td = 0.3;
  a.error = 0.1;
  b.td = -0.1;
  b.error = 0.1;
  CHECK(td_separation(a, b) == doctest::Approx(0.4 / std::sqrt(0.02)));
}
