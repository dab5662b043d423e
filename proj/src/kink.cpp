#include "ionkink/kink.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "ionkink/error.hpp"

namespace ionkink {

namespace {

double median_abs(std::vector<double> v) {
  for (double& x : v) x = std::abs(x);
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

}  // namespace

KinkObservation observe_kink(const Eigen::VectorXd& positions) {
  KinkObservation obs;
  const int n = static_cast<int>(positions.size() / 3);
  if (n < 5) return obs;
  const auto order = axial_order(positions);
  const auto s = staggered_order(positions, order);

  std::vector<double> smooth(n);
  for (int k = 0; k < n; ++k) {
    const int lo = std::max(0, k - 1), hi = std::min(n - 1, k + 1);
    double sum = 0;
    for (int j = lo; j <= hi; ++j) sum += s[j];
    smooth[k] = sum / (hi - lo + 1);
  }
  const double typical = median_abs(smooth);
  const double floor = std::max(kLinearThreshold, 0.25 * typical);

  int previous = -1;
  int changes = 0;
  int a = -1, b = -1;
  for (int k = 1; k < n - 1; ++k) {
    if (std::abs(smooth[k]) < floor) continue;
    if (previous >= 0 && ((smooth[previous] > 0) != (smooth[k] > 0))) {
      ++changes;
      a = previous;
      b = k;
    }
    previous = k;
  }
  if (changes != 1) return obs;

  const double xa = positions[3 * order[a]], xb = positions[3 * order[b]];
  const double t = smooth[a] / (smooth[a] - smooth[b]);
  obs.present = true;
  obs.x_coordinate = xa + t * (xb - xa);
  obs.charge = smooth[a] < 0 ? +1 : -1;
  obs.confidence = std::clamp((std::abs(smooth[a]) + std::abs(smooth[b])) / typical, 0.0, 1.0);
  return obs;
}

KinkObservation observe_kink(const CrystalState& state, const TrapModel& /*trap*/) {
  return observe_kink(state.positions);
}

CrystalExtent crystal_extent(const Eigen::VectorXd& positions) {
  CrystalExtent e{positions[0], positions[0]};
  for (Eigen::Index i = 0; i < positions.size(); i += 3) {
    e.x_min = std::min(e.x_min, positions[i]);
    e.x_max = std::max(e.x_max, positions[i]);
  }
  return e;
}

EscapeDetector::EscapeDetector(CrystalExtent extent, double dwell_ms)
    : extent_(extent), dwell_ms_(dwell_ms) {}

bool EscapeDetector::push(double time_ms, const KinkObservation& obs) {
  if (done_) return true;
  if (obs.present) {
    absent_since_.reset();
    last_present_ = obs;
    if (obs.confidence > kDirectionConfidence) last_confident_ = obs;
    return false;
  }
  if (!absent_since_) absent_since_ = time_ms;
  if (time_ms - *absent_since_ + 1e-12 < dwell_ms_) return false;

  done_ = true;
  event_.time_ms = *absent_since_;
  if (!last_present_) {
    event_.inconclusive = true;
    return true;
  }
  const KinkObservation& last = last_confident_ ? *last_confident_ : *last_present_;
  event_.escaped = true;
  event_.direction =
      last.x_coordinate >= extent_.center() ? EscapeDirection::Right : EscapeDirection::Left;
  event_.charge_at_escape = last.charge;
  return true;
}

EscapeEvent detect_escape(const std::vector<TimedObservation>& stream, CrystalExtent extent,
                          double dwell_ms) {
  EscapeDetector detector(extent, dwell_ms);
  for (std::size_t i = 0; i < stream.size(); ++i) {
    if (i > 0 && stream[i].time_ms < stream[i - 1].time_ms) {
      throw Error(ErrorKind::Configuration, "observation stream is not time ordered");
    }
    if (detector.push(stream[i].time_ms, stream[i].observation)) break;
  }
  return detector.event();
}

// ---------------------------------------------------------------------------
// Minimum-energy paths

namespace {

using Vec = Eigen::VectorXd;
using Eigensystem = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>;

constexpr double kSearchStep = 0.03;  // trust radius of the saddle search, l0
constexpr std::size_t kMaxStarts = 4;

// Eigenvector following (partitioned rational-function steps): uphill along
// the tracked mode, downhill along all others. Returns the point once the
// force vanishes there and the Hessian has exactly one negative eigenvalue.
std::optional<Vec> follow_to_saddle(Vec pos, Vec mode, const TrapModel& trap,
                                    const PathOptions& options) {
  pos += 0.01 * mode;
  Vec force;
  for (int it = 0; it < options.max_iterations; ++it) {
    evaluate_forces(pos, trap, 0.0, force);
    const Eigensystem eig(hessian_at(pos, trap, 0.0));
    const Eigen::MatrixXd& vecs = eig.eigenvectors();
    const Vec& vals = eig.eigenvalues();
    if (force.cwiseAbs().maxCoeff() < options.force_tolerance) {
      int negative = 0;
      for (Eigen::Index k = 0; k < vals.size(); ++k) negative += vals[k] < -1e-10;
      if (negative != 1) return std::nullopt;
      return pos;
    }
    Eigen::Index tracked = 0;
    (vecs.transpose() * mode).cwiseAbs().maxCoeff(&tracked);
    mode = mode.dot(vecs.col(tracked)) < 0 ? Vec(-vecs.col(tracked)) : Vec(vecs.col(tracked));

    const Vec g = -(vecs.transpose() * force);
    Vec h(g.size());
    for (Eigen::Index k = 0; k < g.size(); ++k) {
      const double l = vals[k];
      const double d = std::abs(l) + std::sqrt(l * l + 4 * g[k] * g[k]);
      h[k] = d > 0 ? 2 * g[k] / d : 0.0;
      if (k != tracked) h[k] = -h[k];
    }
    Vec step = vecs * h;
    const double len = step.norm();
    if (len > kSearchStep) step *= kSearchStep / len;
    pos += step;
  }
  return std::nullopt;
}

struct PathPoint {
  Vec pos;
  double energy = 0;
};

// Steepest-descent path from `start` by linearly implicit Euler steps
// x += (1 + hH)^-1 h F, with h chosen for an arc-length step `ds`. The
// scheme is stable in stiff directions and turns into Newton's method near
// the minimum.
std::vector<PathPoint> descend(Vec pos, const TrapModel& trap, double ds,
                               const PathOptions& options) {
  std::vector<PathPoint> path;
  Vec force;
  for (int it = 0; it < options.max_iterations; ++it) {
    const double energy = evaluate_forces(pos, trap, 0.0, force);
    path.push_back({pos, energy});
    if (force.cwiseAbs().maxCoeff() < options.force_tolerance) return path;
    const Eigensystem eig(hessian_at(pos, trap, 0.0));
    const Vec f = eig.eigenvectors().transpose() * force;
    const Vec& vals = eig.eigenvalues();
    auto length = [&](double h) {
      return (h * f.array() / (1.0 + h * vals.array())).matrix().norm();
    };
    double h_max = std::numeric_limits<double>::infinity();
    if (vals.minCoeff() < 0) h_max = 0.5 / -vals.minCoeff();
    double h = 1.0;
    if (length(std::min(h_max, 1e12)) <= ds) {
      h = std::min(h_max, 1e12);
    } else {
      double lo = 0, hi = std::min(h_max, 1e12);
      for (int b = 0; b < 100; ++b) {
        h = 0.5 * (lo + hi);
        (length(h) < ds ? lo : hi) = h;
      }
      h = lo;
    }
    const Vec step = eig.eigenvectors() * (h * f.array() / (1.0 + h * vals.array())).matrix();
    if (step.norm() < 1e-15) throw Error(ErrorKind::PathCollapse, "descent path stalled");
    pos += step;
  }
  throw Error(ErrorKind::NoConvergence, "descent path did not reach a minimum");
}

struct Route {
  double saddle_energy = 0;
  std::vector<PathPoint> to_kink;    // saddle first
  std::vector<PathPoint> to_zigzag;  // saddle first
};

// Picks `count` points evenly spaced in arc length (always keeping both
// ends) from a finely sampled path.
std::vector<PathPoint> thin(const std::vector<PathPoint>& path, int count) {
  if (static_cast<int>(path.size()) <= count) return path;
  std::vector<double> arc(path.size(), 0.0);
  for (std::size_t i = 1; i < path.size(); ++i) {
    arc[i] = arc[i - 1] + (path[i].pos - path[i - 1].pos).norm();
  }
  std::vector<PathPoint> out;
  std::size_t j = 0;
  for (int i = 0; i < count; ++i) {
    const double target = arc.back() * i / (count - 1);
    while (j + 1 < path.size() && arc[j + 1] <= target) ++j;
    if (out.empty() || (out.back().pos - path[j].pos).norm() > 0) out.push_back(path[j]);
  }
  if ((out.back().pos - path.back().pos).norm() > 0) out.push_back(path.back());
  return out;
}

}  // namespace

PNLandscape pn_landscape(const TrapModel& trap, int n_ions, int charge,
                         const PathOptions& options) {
  const TrapModel statics = trap.without_drive();
  const Anharmonicity& anh = statics.anharmonic;
  if (charge < 0 && anh.alpha_y == 0 && anh.beta_y == 0 && anh.c_xxy == 0) {
    // y -> -y maps the anti-kink problem onto the kink one.
    PNLandscape mirrored = pn_landscape(statics, n_ions, -charge, options);
    mirrored.charge = charge;
    return mirrored;
  }
  const EquilibriumResult kink = relax_kink(n_ions, statics, charge);
  const Vec& k_pos = kink.configuration.positions;
  const double kink_tolerance = statics.units.kB_TD();
  const double ds = 0.01;

  // Saddles reached by following the softest modes up from the kink, in
  // both senses. A saddle qualifies when its descent paths end on the
  // centred kink and on a kink-free crystal.
  std::optional<Route> best[2];
  std::vector<Vec> starts{k_pos};  // centred kink minima, grown as found
  std::vector<Vec> saddles;
  for (std::size_t next = 0; next < starts.size() && next < kMaxStarts; ++next) {
    const Vec origin = starts[next];
    const Eigensystem eig(hessian_at(origin, statics, 0.0));
    const int modes = std::min<int>(options.search_modes, static_cast<int>(origin.size()));
    for (int m = 0; m < modes; ++m) {
      for (const double sense : {1.0, -1.0}) {
        const auto saddle =
            follow_to_saddle(origin, sense * eig.eigenvectors().col(m), statics, options);
        if (!saddle) continue;
        const bool seen = std::any_of(saddles.begin(), saddles.end(),
                                      [&](const Vec& s) { return (s - *saddle).norm() < 1e-6; });
        if (seen) continue;
        saddles.push_back(*saddle);
        const KinkObservation at_saddle = observe_kink(*saddle);
        if (!at_saddle.present) continue;

        const Eigensystem local(hessian_at(*saddle, statics, 0.0));
        const Vec unstable = local.eigenvectors().col(0);
        std::vector<PathPoint> a, b;
        try {
          a = descend(*saddle + ds * unstable, statics, ds, options);
          b = descend(*saddle - ds * unstable, statics, ds, options);
        } catch (const Error&) {
          continue;
        }
        if (!observe_kink(a.back().pos).present) std::swap(a, b);
        const KinkObservation end_kink = observe_kink(a.back().pos);
        if (!end_kink.present || end_kink.charge != charge) continue;
        if (std::abs(a.back().energy - kink.energy) > kink_tolerance) continue;
        const bool new_start = std::none_of(starts.begin(), starts.end(), [&](const Vec& s) {
          return (s - a.back().pos).norm() < 1e-4;
        });
        if (new_start) starts.push_back(a.back().pos);
        if (observe_kink(b.back().pos).present) continue;

        Route route;
        route.saddle_energy = potential_energy_at(*saddle, statics, 0.0);
        route.to_kink = std::move(a);
        route.to_zigzag = std::move(b);
        route.to_kink.insert(route.to_kink.begin(), {*saddle, route.saddle_energy});
        route.to_zigzag.insert(route.to_zigzag.begin(), {*saddle, route.saddle_energy});
        const int side = at_saddle.x_coordinate < 0 ? 0 : 1;
        const double margin = 1e-9 * std::abs(route.saddle_energy);
        if (!best[side] || route.saddle_energy < best[side]->saddle_energy - margin) {
          best[side] = std::move(route);
        }
      }
    }
  }
  if (!best[0] || !best[1]) {
    throw Error(ErrorKind::NoConvergence, "no saddle connects the kink to a kink-free crystal");
  }

  PNLandscape out;
  out.charge = charge;
  out.kink_energy = kink.energy;
  out.barrier_left = best[0]->saddle_energy - kink.energy;
  out.barrier_right = best[1]->saddle_energy - kink.energy;
  out.zigzag_energy_left = best[0]->to_zigzag.back().energy;
  out.zigzag_energy_right = best[1]->to_zigzag.back().energy;

  const CrystalExtent extent = crystal_extent(k_pos);
  auto sample = [&](const PathPoint& p, bool left) {
    const KinkObservation obs = observe_kink(p.pos);
    PNSample s;
    s.kink_present = obs.present;
    s.kink_x = obs.present ? obs.x_coordinate : (left ? extent.x_min : extent.x_max);
    s.energy = p.energy - kink.energy;
    return s;
  };
  const int per_leg = std::max(2, options.images_per_side / 2);
  // Left edge -> left saddle -> kink, then kink -> right saddle -> right edge.
  const auto lz = thin(best[0]->to_zigzag, per_leg);
  const auto lk = thin(best[0]->to_kink, per_leg);
  const auto rk = thin(best[1]->to_kink, per_leg);
  const auto rz = thin(best[1]->to_zigzag, per_leg);
  for (auto it = lz.rbegin(); it != lz.rend(); ++it) out.samples.push_back(sample(*it, true));
  for (std::size_t i = 1; i < lk.size(); ++i) out.samples.push_back(sample(lk[i], true));
  out.samples.push_back(sample({k_pos, kink.energy}, true));
  for (auto it = rk.rbegin(); it != rk.rend(); ++it) out.samples.push_back(sample(*it, false));
  for (std::size_t i = 1; i < rz.size(); ++i) out.samples.push_back(sample(rz[i], false));
  return out;
}

QuadraticFit fit_center_quadratic(const PNLandscape& landscape, double fraction) {
  // The observed coordinate moves in site-sized jumps along the path; runs of
  // samples at one position are averaged into a single point.
  std::vector<double> xs, es;
  std::vector<int> counts;
  bool open = false;
  for (const auto& s : landscape.samples) {
    if (!s.kink_present) {
      open = false;
      continue;
    }
    if (open && std::abs(s.kink_x - xs.back() / counts.back()) < kPlateauWidth) {
      xs.back() += s.kink_x;
      es.back() += s.energy;
      ++counts.back();
    } else {
      xs.push_back(s.kink_x);
      es.push_back(s.energy);
      counts.push_back(1);
      open = true;
    }
  }
  double lo = 0, hi = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i] /= counts[i];
    es[i] /= counts[i];
    lo = std::min(lo, xs[i]);
    hi = std::max(hi, xs[i]);
  }
  const double half_window = 0.5 * fraction * (hi - lo);
  std::vector<double> wx, we;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (std::abs(xs[i]) <= half_window + 1e-12) {
      wx.push_back(xs[i]);
      we.push_back(es[i]);
    }
  }
  QuadraticFit fit;
  fit.points = static_cast<int>(wx.size());
  if (fit.points < 4) {
    throw Error(ErrorKind::InsufficientData, "too few landscape samples near the centre");
  }
  Eigen::MatrixXd a(fit.points, 3);
  Eigen::VectorXd b(fit.points);
  for (int i = 0; i < fit.points; ++i) {
    a(i, 0) = 1.0;
    a(i, 1) = wx[i];
    a(i, 2) = wx[i] * wx[i];
    b[i] = we[i];
  }
  const Eigen::Vector3d c = a.colPivHouseholderQr().solve(b);
  fit.c0 = c[0];
  fit.c1 = c[1];
  fit.curvature = c[2];
  const Eigen::VectorXd residual = a * c - b;
  const double span = b.maxCoeff() - b.minCoeff();
  fit.relative_residual =
      span > 0 ? std::sqrt(residual.squaredNorm() / fit.points) / span : 0.0;
  return fit;
}

DampingEstimate kink_damping_estimate(const std::vector<double>& x, double stride, int max_lag) {
  if (!(stride > 0)) throw Error(ErrorKind::Configuration, "stride must be positive");
  const int n = static_cast<int>(x.size()) - 1;
  if (n < 100) throw Error(ErrorKind::InsufficientData, "need at least 100 velocity samples");
  std::vector<double> v(n);
  double mean = 0;
  for (int i = 0; i < n; ++i) {
    v[i] = (x[i + 1] - x[i]) / stride;
    mean += v[i];
  }
  mean /= n;
  for (double& vi : v) vi -= mean;
  if (max_lag <= 0) max_lag = n / 10;
  max_lag = std::min(max_lag, n - 1);

  DampingEstimate out;
  double c0 = 0;
  for (double vi : v) c0 += vi * vi;
  c0 /= n;
  if (!(c0 > 0)) throw Error(ErrorKind::InsufficientData, "kink coordinate does not move");
  out.autocorrelation.push_back(1.0);
  const double target = std::exp(-1.0);
  for (int lag = 1; lag <= max_lag; ++lag) {
    double c = 0;
    for (int i = 0; i + lag < n; ++i) c += v[i] * v[i + lag];
    c /= (n - lag) * c0;
    out.autocorrelation.push_back(c);
    const double prev = out.autocorrelation[lag - 1];
    if (c < target) {
      const double frac = (prev - target) / (prev - c);
      out.decay_time = (lag - 1 + frac) * stride;
      out.rate = 1.0 / out.decay_time;
      return out;
    }
  }
  throw Error(ErrorKind::InsufficientData, "velocity autocorrelation did not decay within max_lag");
}

PowerLawFit fit_damping_power_law(const std::vector<double>& kinetic_energy,
                                  const std::vector<double>& damping_rate) {
  const int n = static_cast<int>(kinetic_energy.size());
  if (n != static_cast<int>(damping_rate.size()) || n < 3) {
    throw Error(ErrorKind::InsufficientData, "need at least 3 (E_k, g) pairs");
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    if (!(kinetic_energy[i] > 0) || !(damping_rate[i] > 0)) {
      throw Error(ErrorKind::InsufficientData, "power-law fit needs positive values");
    }
    const double lx = std::log(kinetic_energy[i]), ly = std::log(damping_rate[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    syy += ly * ly;
  }
  const double cov = sxy - sx * sy / n;
  const double varx = sxx - sx * sx / n;
  const double vary = syy - sy * sy / n;
  PowerLawFit fit;
  fit.exponent = cov / varx;
  fit.prefactor = std::exp((sy - fit.exponent * sx) / n);
  const double ss_res = vary - fit.exponent * cov;
  fit.r_squared = vary > 0 ? 1.0 - ss_res / vary : 1.0;
  fit.exponent_error = n > 2 ? std::sqrt(std::max(ss_res, 0.0) / (n - 2) / varx) : 0.0;
  return fit;
}

}  // namespace ionkink
