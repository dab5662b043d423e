#include "ionkink/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>
#include <unsupported/Eigen/LevenbergMarquardt>

#include "ionkink/error.hpp"
#include "ionkink/rng.hpp"

namespace ionkink {

EscapeOutcome to_outcome(const EscapeEvent& event, double duration_ms, int charge) {
  EscapeOutcome out;
  out.escaped = event.escaped;
  out.time_ms = event.escaped ? event.time_ms : duration_ms;
  out.direction = event.direction;
  out.charge = event.escaped && event.charge_at_escape != 0 ? event.charge_at_escape : charge;
  return out;
}

BinomialEstimate binomial_estimate(int successes, int trials) {
  if (trials <= 0 || successes < 0 || successes > trials) {
    throw Error(ErrorKind::Configuration, "binomial estimate needs 0 <= k <= n, n > 0");
  }
  BinomialEstimate b;
  b.successes = successes;
  b.trials = trials;
  b.probability = static_cast<double>(successes) / trials;
  b.error = std::sqrt(b.probability * (1 - b.probability) / trials);
  return b;
}

SurvivalCurve survival_curve(const std::vector<EscapeOutcome>& events,
                             const std::vector<double>& t_grid_ms) {
  if (events.empty()) throw Error(ErrorKind::EmptyEnsemble, "no trajectories in the ensemble");
  std::vector<EscapeOutcome> sorted = events;
  // Escapes before censorings at equal times (the usual Kaplan-Meier tie rule).
  std::sort(sorted.begin(), sorted.end(), [](const EscapeOutcome& a, const EscapeOutcome& b) {
    if (a.time_ms != b.time_ms) return a.time_ms < b.time_ms;
    return a.escaped && !b.escaped;
  });

  // Steps of the estimator at each distinct escape time.
  std::vector<double> step_time, step_s, step_var;
  std::vector<int> step_risk;
  double s = 1, greenwood = 0;
  const int n = static_cast<int>(sorted.size());
  for (int k = 0; k < n;) {
    const double t = sorted[k].time_ms;
    const int at_risk = n - k;
    int deaths = 0, j = k;
    for (; j < n && sorted[j].time_ms == t; ++j) deaths += sorted[j].escaped;
    if (deaths > 0) {
      s *= 1.0 - static_cast<double>(deaths) / at_risk;
      if (at_risk > deaths) greenwood += static_cast<double>(deaths) / (at_risk * (at_risk - deaths));
      step_time.push_back(t);
      step_s.push_back(s);
      step_var.push_back(s > 0 ? s * s * greenwood : 0.0);
      step_risk.push_back(at_risk - deaths);
    }
    k = j;
  }

  SurvivalCurve curve;
  for (double t : t_grid_ms) {
    const auto it = std::upper_bound(step_time.begin(), step_time.end(), t);
    const auto idx = it - step_time.begin();
    curve.time_ms.push_back(t);
    if (idx == 0) {
      curve.survival.push_back(1.0);
      curve.error.push_back(0.0);
    } else {
      curve.survival.push_back(step_s[idx - 1]);
      curve.error.push_back(std::sqrt(step_var[idx - 1]));
    }
    int risk = 0;
    for (const auto& e : sorted) risk += e.time_ms > t;
    curve.at_risk.push_back(risk);
  }
  return curve;
}

LifetimeFit fit_lifetime(const std::vector<EscapeOutcome>& events, double background_rate) {
  LifetimeFit fit;
  for (const auto& e : events) {
    if (!(e.time_ms >= 0) || !std::isfinite(e.time_ms)) {
      throw Error(ErrorKind::Configuration, "escape times must be finite and >= 0");
    }
    fit.exposure_ms += e.time_ms;
    (e.escaped ? fit.n_escapes : fit.n_censored) += 1;
  }
  if (fit.n_escapes < kMinEscapes) {
    throw Error(ErrorKind::TooFewEscapes, "lifetime fit needs >= " + std::to_string(kMinEscapes) +
                                              " escapes, got " + std::to_string(fit.n_escapes));
  }
  if (background_rate < 0) throw Error(ErrorKind::Configuration, "background rate must be >= 0");
  if (!(fit.exposure_ms > 0)) {
    throw Error(ErrorKind::InsufficientData, "zero total exposure time");
  }
  fit.background_rate = background_rate;
  const double d = fit.n_escapes, exposure = fit.exposure_ms;
  const double rate = d / exposure;
  if (rate <= background_rate) {
    throw Error(ErrorKind::InsufficientData, "background rate exceeds the fitted escape rate");
  }
  // Profile log-likelihood l(r) = d ln r - r T; solve l(rate) - l(r) = 1/2.
  auto drop = [&](double r) { return d * std::log(rate / r) + (r - rate) * exposure - 0.5; };
  boost::math::tools::eps_tolerance<double> tol(50);
  std::uintmax_t iters = 200;
  const auto lo = boost::math::tools::toms748_solve(drop, rate * 1e-6, rate, tol, iters);
  iters = 200;
  double hi_bound = rate * 2;
  while (drop(hi_bound) < 0) hi_bound *= 2;
  const auto hi = boost::math::tools::toms748_solve(drop, rate, hi_bound, tol, iters);
  const double r_low = 0.5 * (lo.first + lo.second) - background_rate;
  const double r_high = 0.5 * (hi.first + hi.second) - background_rate;
  fit.tau_ms = 1.0 / (rate - background_rate);
  fit.ci68_high_ms = r_low > 0 ? 1.0 / r_low : std::numeric_limits<double>::infinity();
  fit.ci68_low_ms = 1.0 / r_high;
  return fit;
}

double kolmogorov_survival(double x) {
  if (x <= 0) return 1.0;
  if (x < 1.18) {
    // Jacobi-theta form, convergent for small x.
    const double y = std::exp(-constants::pi * constants::pi / (8 * x * x));
    double sum = 0;
    for (int k = 1; k < 40; k += 2) sum += std::pow(y, k * k);
    return 1.0 - std::sqrt(2 * constants::pi) / x * sum;
  }
  double sum = 0;
  for (int k = 1; k < 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += (k % 2 ? 1 : -1) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(2 * sum, 0.0, 1.0);
}

KSResult ks_exponential(const std::vector<EscapeOutcome>& events, double tau_ms,
                        double window_ms) {
  if (!(tau_ms > 0)) throw Error(ErrorKind::Configuration, "tau must be positive");
  std::vector<double> t;
  for (const auto& e : events) {
    if (e.escaped) t.push_back(e.time_ms);
  }
  if (t.empty()) throw Error(ErrorKind::TooFewEscapes, "K-S test needs escapes");
  std::sort(t.begin(), t.end());
  const double norm = std::isfinite(window_ms) ? -std::expm1(-window_ms / tau_ms) : 1.0;
  KSResult r;
  r.n = static_cast<int>(t.size());
  for (int i = 0; i < r.n; ++i) {
    const double cdf = -std::expm1(-t[i] / tau_ms) / norm;
    r.statistic = std::max({r.statistic, (i + 1.0) / r.n - cdf, cdf - static_cast<double>(i) / r.n});
  }
  const double sn = std::sqrt(static_cast<double>(r.n));
  r.p_value = kolmogorov_survival((sn + 0.12 + 0.11 / sn) * r.statistic);
  return r;
}

// --- Lorentzian fits -------------------------------------------------------------

namespace {

// Parameter layout: offset, then (center, width, amplitude) per peak.
struct LorentzFunctor : Eigen::DenseFunctor<double> {
  const std::vector<double>& x;
  const std::vector<double>& y;
  const std::vector<double>& w;  // 1 / sigma
  int peaks;

  LorentzFunctor(const std::vector<double>& x_, const std::vector<double>& y_,
                 const std::vector<double>& w_, int peaks_)
      : DenseFunctor<double>(1 + 3 * peaks_, static_cast<int>(x_.size())),
        x(x_), y(y_), w(w_), peaks(peaks_) {}

  int operator()(const InputType& p, ValueType& fvec) const {
    for (std::size_t i = 0; i < x.size(); ++i) {
      double model = p[0];
      for (int k = 0; k < peaks; ++k) {
        const double c = p[1 + 3 * k], g = p[2 + 3 * k], a = p[3 + 3 * k];
        model += a * g * g / ((x[i] - c) * (x[i] - c) + g * g);
      }
      fvec[i] = (model - y[i]) * w[i];
    }
    return 0;
  }

  int df(const InputType& p, JacobianType& jac) const {
    for (std::size_t i = 0; i < x.size(); ++i) {
      jac(i, 0) = w[i];
      for (int k = 0; k < peaks; ++k) {
        const double c = p[1 + 3 * k], g = p[2 + 3 * k], a = p[3 + 3 * k];
        const double dx = x[i] - c, den = dx * dx + g * g;
        const double shape = g * g / den;
        jac(i, 1 + 3 * k) = w[i] * a * shape * 2 * dx / den;
        jac(i, 2 + 3 * k) = w[i] * a * 2 * g * dx * dx / (den * den);
        jac(i, 3 + 3 * k) = w[i] * shape;
      }
    }
    return 0;
  }
};

struct Candidate {
  Eigen::VectorXd params;
  double chi2 = std::numeric_limits<double>::infinity();
};

}  // namespace

double lorentzian_model(const LorentzianFit& fit, double f) {
  double v = fit.offset;
  for (const auto& p : fit.peaks) {
    const double dx = f - p.center_hz;
    v += p.amplitude * p.width_hz * p.width_hz / (dx * dx + p.width_hz * p.width_hz);
  }
  return v;
}

LorentzianFit fit_lorentzian(const std::vector<double>& x, const std::vector<double>& y,
                             const std::vector<double>& sigma, int n_peaks) {
  if (n_peaks < 1 || n_peaks > 2) throw Error(ErrorKind::Configuration, "n_peaks must be 1 or 2");
  const int n = static_cast<int>(x.size());
  if (static_cast<int>(y.size()) != n || static_cast<int>(sigma.size()) != n) {
    throw Error(ErrorKind::Configuration, "x, y and sigma sizes differ");
  }
  if (n < 8 || n < 1 + 3 * n_peaks + 1) {
    throw Error(ErrorKind::TooFewPoints, "Lorentzian fit needs >= 8 points");
  }
  const bool weighted = std::any_of(sigma.begin(), sigma.end(), [](double s) { return s > 0; });
  std::vector<double> w(n, 1.0);
  if (weighted) {
    for (int i = 0; i < n; ++i) {
      if (!(sigma[i] > 0)) throw Error(ErrorKind::Configuration, "sigma must be > 0 everywhere");
      w[i] = 1.0 / sigma[i];
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return x[a] < x[b]; });
  const double span = x[order.back()] - x[order.front()];
  if (!(span > 0)) throw Error(ErrorKind::TooFewPoints, "frequencies do not span an interval");
  const double spacing = span / (n - 1);
  const double y_min = *std::min_element(y.begin(), y.end());

  // Start centers: local maxima of the data, highest first.
  std::vector<int> maxima;
  for (int k = 0; k < n; ++k) {
    const int i = order[k];
    const bool left = k == 0 || y[i] >= y[order[k - 1]];
    const bool right = k == n - 1 || y[i] >= y[order[k + 1]];
    if (left && right) maxima.push_back(i);
  }
  std::sort(maxima.begin(), maxima.end(), [&](int a, int b) { return y[a] > y[b]; });
  if (maxima.size() > 4) maxima.resize(4);
  const std::vector<double> widths = {spacing, 3 * spacing, span / 6};

  LorentzFunctor functor(x, y, w, n_peaks);
  Candidate best;
  auto attempt = [&](Eigen::VectorXd p) {
    Eigen::LevenbergMarquardt<LorentzFunctor> lm(functor);
    lm.setMaxfev(2000);
    lm.setXtol(1e-14);
    lm.setFtol(1e-14);
    lm.minimize(p);
    Eigen::VectorXd r(n);
    functor(p, r);
    const double chi2 = r.squaredNorm();
    bool sane = std::isfinite(chi2);
    for (int k = 0; k < n_peaks && sane; ++k) {
      const double c = p[1 + 3 * k], g = std::abs(p[2 + 3 * k]);
      sane = g > 0 && g < 10 * span && c > x[order.front()] - span && c < x[order.back()] + span;
    }
    if (sane && chi2 < best.chi2) best = {p, chi2};
  };
  for (std::size_t a = 0; a < maxima.size(); ++a) {
    for (double g : widths) {
      Eigen::VectorXd p(1 + 3 * n_peaks);
      p[0] = y_min;
      p[1] = x[maxima[a]];
      p[2] = g;
      p[3] = y[maxima[a]] - y_min;
      if (n_peaks == 1) {
        attempt(p);
        continue;
      }
      std::vector<double> seconds;
      for (std::size_t b = 0; b < maxima.size(); ++b) {
        if (b != a) seconds.push_back(x[maxima[b]]);
      }
      // Also try the flanks when only one maximum is visible.
      seconds.push_back(x[maxima[a]] - 3 * g);
      seconds.push_back(x[maxima[a]] + 3 * g);
      for (double c2 : seconds) {
        p[4] = c2;
        p[5] = g;
        p[6] = 0.5 * p[3];
        attempt(p);
      }
    }
  }
  if (!std::isfinite(best.chi2)) throw Error(ErrorKind::FitDiverged, "no Lorentzian start converged");

  const Eigen::VectorXd& p = best.params;
  const int np = static_cast<int>(p.size());
  LorentzFunctor::JacobianType jac(n, np);
  functor.df(p, jac);
  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(jtj);
  if (!lu.isInvertible()) throw Error(ErrorKind::FitDiverged, "singular Lorentzian fit covariance");
  Eigen::MatrixXd cov = lu.inverse();
  LorentzianFit fit;
  fit.chi_squared = best.chi2;
  fit.dof = n - np;
  if (!weighted && fit.dof > 0) cov *= best.chi2 / fit.dof;
  fit.offset = p[0];
  fit.offset_error = std::sqrt(cov(0, 0));
  for (int k = 0; k < n_peaks; ++k) {
    LorentzPeak peak;
    peak.center_hz = p[1 + 3 * k];
    peak.width_hz = std::abs(p[2 + 3 * k]);
    peak.amplitude = p[3 + 3 * k];
    peak.center_error_hz = std::sqrt(cov(1 + 3 * k, 1 + 3 * k));
    peak.width_error_hz = std::sqrt(cov(2 + 3 * k, 2 + 3 * k));
    peak.amplitude_error = std::sqrt(cov(3 + 3 * k, 3 + 3 * k));
    fit.peaks.push_back(peak);
  }
  std::sort(fit.peaks.begin(), fit.peaks.end(),
            [](const LorentzPeak& a, const LorentzPeak& b) { return a.amplitude > b.amplitude; });
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double ss_tot = 0, ss_res = 0;
  for (int i = 0; i < n; ++i) {
    ss_tot += (y[i] - mean) * (y[i] - mean);
    ss_res += (y[i] - lorentzian_model(fit, x[i])) * (y[i] - lorentzian_model(fit, x[i]));
  }
  fit.r_squared = ss_tot > 0 ? 1 - ss_res / ss_tot : 1.0;
  return fit;
}

LorentzianFit fit_lorentzian(const std::vector<ScanPoint>& scan, int n_peaks) {
  std::vector<double> x, y, sigma;
  for (const auto& pt : scan) {
    const auto b = pt.estimate();
    x.push_back(pt.frequency_hz);
    y.push_back(b.probability);
    // Weight floor for p = 0 or 1: the error of (k + 1/2) / (n + 1).
    const double pf = (pt.escapes + 0.5) / (pt.trajectories + 1.0);
    sigma.push_back(std::sqrt(pf * (1 - pf) / pt.trajectories));
  }
  return fit_lorentzian(x, y, sigma, n_peaks);
}

// --- temperature calibration -----------------------------------------------------

TemperatureMap::TemperatureMap(double intercept, double slope, double r_squared,
                               double max_epsilon, int n_ions, UnitSystem units)
    : intercept_(intercept),
      slope_(slope),
      r_squared_(r_squared),
      max_epsilon_(max_epsilon),
      n_ions_(n_ions),
      units_(units) {}

bool TemperatureMap::extrapolates(double epsilon) const {
  return epsilon > 1.5 * max_epsilon_ || epsilon < 0;
}

double TemperatureMap::temperature_k(double epsilon, bool allow_extrapolation) const {
  if (!allow_extrapolation && extrapolates(epsilon)) {
    throw Error(ErrorKind::Extrapolation,
                "eps = " + std::to_string(epsilon) + " lies beyond 1.5x the calibrated range (max " +
                    std::to_string(max_epsilon_) + ")");
  }
  return units_.energy_to_kelvin(2.0 * kinetic_energy(epsilon) / (3.0 * n_ions_));
}

double TemperatureMap::intercept_deviation() const {
  const double expected = 1.5 * n_ions_ * units_.kB_TD();
  return (intercept_ - expected) / expected;
}

TemperatureMap TemperatureMap::linear(double t0_k, double slope_k, double max_epsilon, int n_ions,
                                      UnitSystem units) {
  const double scale = 1.5 * n_ions;
  return TemperatureMap(scale * units.kelvin_to_energy(t0_k), scale * units.kelvin_to_energy(slope_k),
                        1.0, max_epsilon, n_ions, units);
}

TemperatureMap calibrate_temperature(const std::vector<EnergySample>& samples, int n_ions,
                                     const UnitSystem& units) {
  if (samples.empty()) throw Error(ErrorKind::TooFewPoints, "no calibration samples");
  if (n_ions < 1) throw Error(ErrorKind::Configuration, "n_ions must be >= 1");
  std::set<double> distinct;
  bool has_zero = false;
  for (const auto& s : samples) {
    if (s.epsilon < 0 || !std::isfinite(s.kinetic_energy)) {
      throw Error(ErrorKind::Configuration, "calibration samples need eps >= 0 and finite E_k");
    }
    distinct.insert(s.epsilon);
    has_zero = has_zero || s.epsilon == 0;
  }
  if (!has_zero) throw Error(ErrorKind::TooFewPoints, "calibration needs an eps = 0 sample");
  const double m = static_cast<double>(samples.size());
  double ex = 0, ey = 0;
  for (const auto& s : samples) {
    ex += s.epsilon;
    ey += s.kinetic_energy;
  }
  ex /= m;
  ey /= m;
  if (distinct.size() == 1) return TemperatureMap(ey, 0.0, 1.0, 0.0, n_ions, units);
  if (distinct.size() < 3) {
    throw Error(ErrorKind::TooFewPoints, "calibration needs >= 3 distinct eps values");
  }
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& s : samples) {
    sxx += (s.epsilon - ex) * (s.epsilon - ex);
    sxy += (s.epsilon - ex) * (s.kinetic_energy - ey);
    syy += (s.kinetic_energy - ey) * (s.kinetic_energy - ey);
  }
  const double slope = sxy / sxx;
  const double r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
  if (r2 < kMinCalibrationR2) {
    throw Error(ErrorKind::PoorFit, "E_k(eps) is not linear: R^2 = " + std::to_string(r2));
  }
  return TemperatureMap(ey - slope * ex, slope, r2, *distinct.rbegin(), n_ions, units);
}

// --- Kramers fit ---------------------------------------------------------------------

double kramers_lifetime(double w_kbtd, double prefactor_ms, double temperature_k) {
  const double t = temperature_k / constants::doppler_temperature;
  return prefactor_ms * std::sqrt(t) * std::exp(w_kbtd / t);
}

KramersFit fit_kramers_temperatures(const std::vector<double>& temperature_k,
                                    const std::vector<double>& tau_ms) {
  if (temperature_k.size() != tau_ms.size()) {
    throw Error(ErrorKind::Configuration, "temperature and lifetime counts differ");
  }
  KramersFit fit;
  std::set<double> distinct;
  for (std::size_t i = 0; i < tau_ms.size(); ++i) {
    if (!(temperature_k[i] > 0) || !(tau_ms[i] > 0)) {
      throw Error(ErrorKind::Configuration, "temperatures and lifetimes must be positive");
    }
    const double t = temperature_k[i] / constants::doppler_temperature;
    fit.temperature_k.push_back(temperature_k[i]);
    fit.inverse_temperature.push_back(1.0 / t);
    fit.reduced_log_tau.push_back(std::log(tau_ms[i]) - 0.5 * std::log(t));
    distinct.insert(temperature_k[i]);
  }
  if (distinct.size() < 3) {
    throw Error(ErrorKind::TooFewPoints, "Kramers fit needs >= 3 distinct temperatures");
  }
  const auto& x = fit.inverse_temperature;
  const auto& y = fit.reduced_log_tau;
  const double m = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / m;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / m;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  fit.w_kbtd = sxy / sxx;
  fit.ln_prefactor = my - fit.w_kbtd * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - fit.ln_prefactor - fit.w_kbtd * x[i];
    ss_res += r * r;
  }
  fit.r_squared = syy > 0 ? 1 - ss_res / syy : 1.0;
  fit.w_error_kbtd = m > 2 ? std::sqrt(ss_res / (m - 2) / sxx) : 0.0;
  fit.negative_barrier = fit.w_kbtd <= 0;
  return fit;
}

KramersFit fit_kramers(const std::vector<LifetimePoint>& lifetimes, const TemperatureMap& map) {
  std::vector<double> t, tau;
  for (const auto& p : lifetimes) {
    t.push_back(map.temperature_k(p.epsilon));
    tau.push_back(p.tau_ms);
  }
  return fit_kramers_temperatures(t, tau);
}

// --- directionality ------------------------------------------------------------------

DirectionalityResult directionality(const std::vector<EscapeOutcome>& events, int charge,
                                    double epsilon) {
  DirectionalityResult r;
  r.charge = charge;
  r.epsilon = epsilon;
  for (const auto& e : events) {
    if (!e.escaped || !e.direction || e.charge != charge) continue;
    (*e.direction == EscapeDirection::Right ? r.n_right : r.n_left) += 1;
  }
  const int total = r.n_right + r.n_left;
  if (total < kMinDirectionalEscapes) {
    throw Error(ErrorKind::TooFewEscapes, "directionality needs >= " +
                                              std::to_string(kMinDirectionalEscapes) +
                                              " directed escapes, got " + std::to_string(total));
  }
  const double p = static_cast<double>(r.n_right) / total;
  r.td = 2 * p - 1;
  r.error = 2 * std::sqrt(p * (1 - p) / total);
  return r;
}

double td_separation(const DirectionalityResult& a, const DirectionalityResult& b) {
  const double s = std::hypot(a.error, b.error);
  const double d = std::abs(a.td - b.td);
  if (s == 0) return d == 0 ? 0.0 : std::numeric_limits<double>::infinity();
  return d / s;
}

std::vector<EscapeOutcome> synthetic_escapes(double tau_ms, double window_ms, int n,
                                             std::uint64_t seed, std::uint64_t stream) {
  if (!(tau_ms > 0) || !(window_ms > 0) || n < 0) {
    throw Error(ErrorKind::Configuration, "synthetic escapes need tau, window > 0 and n >= 0");
  }
  const NoiseStream noise(seed, stream);
  std::vector<EscapeOutcome> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const auto u = noise.uniforms(static_cast<std::uint64_t>(i), 0);
    const double t = -tau_ms * std::log(u[0]);
    EscapeOutcome e;
    e.escaped = t <= window_ms;
    e.time_ms = e.escaped ? t : window_ms;
    if (e.escaped) e.direction = u[1] < 0.5 ? EscapeDirection::Left : EscapeDirection::Right;
    out.push_back(e);
  }
  return out;
}

}  // namespace ionkink
