#include "ionkink/equilibria.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "ionkink/error.hpp"

namespace ionkink {

std::string_view to_string(ConfigurationKind kind) {
  switch (kind) {
    case ConfigurationKind::Linear: return "linear";
    case ConfigurationKind::Zigzag: return "zigzag";
    case ConfigurationKind::ZigzagBar: return "zigzag_bar";
    case ConfigurationKind::Kink: return "kink";
    case ConfigurationKind::KinkBar: return "kink_bar";
    case ConfigurationKind::Other: return "other";
  }
  return "other";
}

namespace {

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

struct Correction {
  Eigen::VectorXd s, y;
  double rho;
};

// L-BFGS with Armijo backtracking. Returns once the gradient is below
// `handoff` or the line search can no longer resolve energy differences.
int lbfgs_descent(Eigen::VectorXd& x, const TrapModel& trap, double handoff, int max_iterations,
                  int history) {
  Eigen::VectorXd force;
  double energy = evaluate_forces(x, trap, 0.0, force);
  Eigen::VectorXd grad = -force;
  std::deque<Correction> memory;
  Eigen::VectorXd trial, trial_force;

  int it = 0;
  for (; it < max_iterations; ++it) {
    if (inf_norm(grad) < handoff) break;

    // Two-loop recursion.
    Eigen::VectorXd q = grad;
    std::vector<double> alpha(memory.size());
    for (int k = static_cast<int>(memory.size()) - 1; k >= 0; --k) {
      alpha[k] = memory[k].rho * memory[k].s.dot(q);
      q -= alpha[k] * memory[k].y;
    }
    double gamma = 1.0;
    if (!memory.empty()) gamma = memory.back().s.dot(memory.back().y) / memory.back().y.squaredNorm();
    Eigen::VectorXd dir = gamma * q;
    for (std::size_t k = 0; k < memory.size(); ++k) {
      const double beta = memory[k].rho * memory[k].y.dot(dir);
      dir += memory[k].s * (alpha[k] - beta);
    }
    dir = -dir;
    double slope = dir.dot(grad);
    if (!(slope < 0)) {
      memory.clear();
      dir = -grad;
      slope = -grad.squaredNorm();
    }
    // Cap the step so ions cannot jump through each other.
    const double max_move = inf_norm(dir);
    double step = max_move > 0.1 ? 0.1 / max_move : 1.0;

    bool accepted = false;
    double trial_energy = 0;
    for (int ls = 0; ls < 60; ++ls) {
      trial = x + step * dir;
      try {
        trial_energy = evaluate_forces(trial, trap, 0.0, trial_force);
      } catch (const Error&) {
        step *= 0.5;
        continue;
      }
      if (trial_energy < energy && trial_energy <= energy + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // precision floor reached

    Correction c{trial - x, -trial_force - grad, 0.0};
    const double sy = c.s.dot(c.y);
    x = trial;
    energy = trial_energy;
    grad = -trial_force;
    if (sy > 1e-300) {
      c.rho = 1.0 / sy;
      memory.push_back(std::move(c));
      if (static_cast<int>(memory.size()) > history) memory.pop_front();
    }
  }
  return it;
}

// Newton polish near a stationary point; judged by the gradient norm since
// energy differences are below round-off here.
bool newton_polish(Eigen::VectorXd& x, const TrapModel& trap, double tol, int& iterations) {
  Eigen::VectorXd force, trial_force;
  evaluate_forces(x, trap, 0.0, force);
  double gnorm = inf_norm(force);
  for (int it = 0; it < 50 && gnorm >= tol; ++it) {
    ++iterations;
    // Plain Newton toward the nearest stationary point; a saddle found this
    // way is rejected by the curvature check in relax().
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hessian_at(x, trap, 0.0));
    const Eigen::VectorXd proj = eig.eigenvectors().transpose() * force;
    Eigen::VectorXd scaled(proj.size());
    for (int k = 0; k < proj.size(); ++k) {
      const double lambda = eig.eigenvalues()[k];
      scaled[k] = std::abs(lambda) > 1e-12 ? proj[k] / lambda : 0.0;
    }
    const Eigen::VectorXd dx = eig.eigenvectors() * scaled;
    double step = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 30; ++ls) {
      Eigen::VectorXd trial = x + step * dx;
      try {
        evaluate_forces(trial, trap, 0.0, trial_force);
      } catch (const Error&) {
        step *= 0.5;
        continue;
      }
      const double tnorm = inf_norm(trial_force);
      if (tnorm < gnorm) {
        x = std::move(trial);
        force = trial_force;
        gnorm = tnorm;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) return false;
  }
  return gnorm < tol;
}

}  // namespace

EquilibriumResult relax(const CrystalState& initial, const TrapModel& trap,
                        const RelaxOptions& options) {
  initial.validate();
  Eigen::VectorXd x = initial.positions;
  const int dim = static_cast<int>(x.size());
  int iterations = 0;
  Eigen::VectorXd force;

  for (int escape = 0; escape <= 8; ++escape) {
    bool converged = false;
    for (int round = 0; round < 20 && !converged; ++round) {
      iterations += lbfgs_descent(x, trap, std::max(options.tolerance, 1e-7),
                                  options.max_iterations - iterations, options.history);
      evaluate_forces(x, trap, 0.0, force);
      if (inf_norm(force) < options.tolerance) {
        converged = true;
        break;
      }
      if (newton_polish(x, trap, options.tolerance, iterations)) {
        converged = true;
        break;
      }
      if (iterations >= options.max_iterations) break;
    }
    if (!converged) {
      evaluate_forces(x, trap, 0.0, force);
      throw Error(ErrorKind::NoConvergence,
                  "gradient norm " + std::to_string(inf_norm(force)) + " after " +
                      std::to_string(iterations) + " iterations");
    }

    const Eigen::MatrixXd h = hessian_at(x, trap, 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
    const double lambda_min = eig.eigenvalues()[0];
    if (lambda_min >= -options.saddle_tolerance) {
      EquilibriumResult result;
      result.configuration = CrystalState(x, Eigen::VectorXd::Zero(dim), 0.0);
      result.energy = evaluate_forces(x, trap, 0.0, force);
      result.gradient_norm = inf_norm(force);
      result.min_hessian_eigenvalue = lambda_min;
      result.iterations = iterations;
      result.label = classify(result.configuration, trap);
      return result;
    }
    // Slide off the saddle along its unstable direction and descend again.
    Eigen::VectorXd unstable = eig.eigenvectors().col(0);
    const int pivot = [&] {
      int k = 0;
      unstable.cwiseAbs().maxCoeff(&k);
      return k;
    }();
    if (unstable[pivot] < 0) unstable = -unstable;
    x += 0.02 * unstable / inf_norm(unstable);
  }
  throw Error(ErrorKind::SaddlePoint, "relaxation keeps terminating on a saddle");
}

std::vector<int> axial_order(const Eigen::VectorXd& positions) {
  const int n = static_cast<int>(positions.size() / 3);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return positions[3 * a] < positions[3 * b]; });
  return order;
}

std::vector<double> staggered_order(const Eigen::VectorXd& positions,
                                    const std::vector<int>& order) {
  const int n = static_cast<int>(order.size());
  double y_center = 0;
  for (int i = 0; i < n; ++i) y_center += positions[3 * i + 1];
  y_center /= n;
  std::vector<double> s(n);
  for (int k = 0; k < n; ++k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    s[k] = sign * (positions[3 * order[k] + 1] - y_center);
  }
  return s;
}

ConfigurationClass classify(const CrystalState& config, const TrapModel& /*trap*/) {
  config.validate();
  ConfigurationClass out;
  const auto order = axial_order(config.positions);
  const auto s = staggered_order(config.positions, order);
  const int n = static_cast<int>(s.size());

  if (std::all_of(s.begin(), s.end(), [](double v) { return std::abs(v) < kLinearThreshold; })) {
    out.kind = ConfigurationKind::Linear;
    return out;
  }

  // Outermost ions carry the smallest amplitude; skip them when n allows.
  const int first = n > 4 ? 1 : 0;
  const int last = n > 4 ? n - 2 : n - 1;
  int previous = -1;
  std::vector<std::pair<int, int>> changes;
  int first_sign = 0;
  for (int k = first; k <= last; ++k) {
    if (std::abs(s[k]) < kLinearThreshold) continue;
    const int sign = s[k] > 0 ? 1 : -1;
    if (first_sign == 0) first_sign = sign;
    if (previous >= 0 && ((s[previous] > 0) != (s[k] > 0))) changes.emplace_back(previous, k);
    previous = k;
  }

  if (changes.empty()) {
    out.kind = first_sign >= 0 ? ConfigurationKind::Zigzag : ConfigurationKind::ZigzagBar;
    return out;
  }
  if (changes.size() > 1) {
    out.kind = ConfigurationKind::Other;
    out.diagnostics = "ambiguous: " + std::to_string(changes.size()) +
                      " sign changes of the staggered order parameter";
    return out;
  }
  const auto [a, b] = changes.front();
  const double xa = config.x(order[a]), xb = config.x(order[b]);
  const double t = s[a] / (s[a] - s[b]);
  out.kink_position = xa + t * (xb - xa);
  const int charge = s[a] < 0 ? +1 : -1;
  out.topological_charge = charge;
  out.kind = charge > 0 ? ConfigurationKind::Kink : ConfigurationKind::KinkBar;
  return out;
}

CrystalState zigzag_guess(int n_ions, const TrapModel& trap, bool mirrored) {
  if (n_ions < 1) throw Error(ErrorKind::Configuration, "n_ions must be >= 1");
  CrystalState state(n_ions);
  if (n_ions == 1) return state;
  // Axial half-length of a harmonically confined chain, L^3 ~ 3 N ln N / 2.
  const double half_length =
      std::cbrt(1.5 * n_ions * std::log(static_cast<double>(n_ions)) / trap.curvature(kX));
  const double spacing = 2 * half_length / (n_ions - 1);
  for (int i = 0; i < n_ions; ++i) {
    const double u = -half_length + i * spacing;
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    state.positions[3 * i] = u;
    state.positions[3 * i + 1] = (mirrored ? -1.0 : 1.0) * sign * 0.3 * spacing;
  }
  return state;
}

EquilibriumResult relax_zigzag(int n_ions, const TrapModel& trap, bool mirrored) {
  return relax(zigzag_guess(n_ions, trap, mirrored), trap);
}

CrystalState seed_kink(int n_ions, const TrapModel& trap, int charge, int site_index) {
  if (charge != 1 && charge != -1) throw Error(ErrorKind::Configuration, "charge must be +1 or -1");
  if (site_index < 0 || site_index >= n_ions) {
    throw Error(ErrorKind::Configuration, "kink site outside the crystal");
  }
  const EquilibriumResult zz = relax_zigzag(n_ions, trap);
  if (zz.label.kind != ConfigurationKind::Zigzag && zz.label.kind != ConfigurationKind::ZigzagBar) {
    throw Error(ErrorKind::UnsupportedRegime,
                "ground state is " + std::string(to_string(zz.label.kind)) + ", no zigzag amplitude");
  }
  const Eigen::VectorXd& p = zz.configuration.positions;
  const auto order = axial_order(p);
  const auto s = staggered_order(p, order);
  double y_center = 0;
  for (int i = 0; i < n_ions; ++i) y_center += p[3 * i + 1];
  y_center /= n_ions;
  const double orient = s[n_ions / 2] >= 0 ? 1.0 : -1.0;

  CrystalState seed(n_ions);
  for (int k = 0; k < n_ions; ++k) {
    const int ion = order[k];
    // Transverse profile -1 -> +1 across 4 sites centred on site_index.
    const double profile = std::clamp((k - site_index) / 2.0, -1.0, 1.0);
    const double stagger = (k % 2 == 0) ? 1.0 : -1.0;
    const double amplitude = orient * std::abs(s[k]);
    seed.positions[3 * ion] = p[3 * ion];
    seed.positions[3 * ion + 1] = y_center + stagger * charge * profile * amplitude;
    // Small out-of-plane lift in the core lets the kink find a 3D minimum.
    seed.positions[3 * ion + 2] = 0.05 * amplitude * (1.0 - std::abs(profile));
  }
  return seed;
}

EquilibriumResult relax_kink(int n_ions, const TrapModel& trap, int charge,
                             std::optional<int> site_index) {
  const int site = site_index.value_or(n_ions / 2);
  EquilibriumResult result = relax(seed_kink(n_ions, trap, charge, site), trap);
  const auto expected = charge > 0 ? ConfigurationKind::Kink : ConfigurationKind::KinkBar;
  if (result.label.kind != expected) {
    throw Error(ErrorKind::UnsupportedRegime,
                "kink seed relaxed to " + std::string(to_string(result.label.kind)));
  }
  return result;
}

double formation_energy(const TrapModel& trap, int n_ions, int charge) {
  const EquilibriumResult kink = relax_kink(n_ions, trap, charge);
  const double ground = std::min(relax_zigzag(n_ions, trap, false).energy,
                                 relax_zigzag(n_ions, trap, true).energy);
  return kink.energy - ground;
}

}  // namespace ionkink
