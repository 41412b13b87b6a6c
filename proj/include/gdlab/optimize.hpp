#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "gdlab/bounds.hpp"
#include "gdlab/model.hpp"
#include "gdlab/numerics.hpp"

namespace gdlab {

struct GDConfig {
  double eta = 0.1;
  std::size_t t_max = 100;
  std::size_t record_every = 1;
  bool store_parameters = false;
  bool override_eta_limit = false;
};

struct TracePoint {
  std::size_t t = 0;
  double risk = 0.0;
  double path_norm = 0.0;  // ||W_t - W_0||_F
  double grad_norm = 0.0;
  std::optional<Matrix> parameters;
};

struct Trajectory {
  std::vector<TracePoint> points;
  ShallowNet final_net;
  GDConfig config;

  const TracePoint& point_at_step(std::size_t t) const {
    for (const auto& p : points)
      if (p.t == t) return p;
    throw std::invalid_argument("Trajectory: step not recorded");
  }
};

inline double step_size_limit(const ProblemConstants& pc, const ActivationSpec& act,
                              std::size_t m) {
  return 1.0 / (2.0 * smoothness_rho(pc, act, m));
}

/// Full-batch gradient descent. Records t = 0, every record_every-th step,
/// and t = t_max. When constants are supplied the step-size ceiling
/// eta <= 1/(2 rho) is enforced unless the config overrides it.
inline Trajectory gd_train(const ShallowNet& net0, const Dataset& data, const GDConfig& config,
                           const ProblemConstants* constants = nullptr) {
  if (config.eta <= 0.0) throw std::invalid_argument("gd_train: eta must be positive");
  if (config.t_max < 1) throw std::invalid_argument("gd_train: t_max must be at least 1");
  if (config.record_every < 1) throw std::invalid_argument("gd_train: record_every must be >= 1");
  if (constants && !config.override_eta_limit) {
    const double limit = step_size_limit(*constants, net0.activation, net0.m);
    if (config.eta > limit * (1.0 + 1e-12)) {
      std::ostringstream os;
      os << "gd_train: eta " << config.eta << " exceeds 1/(2 rho) = " << limit
         << " (set override_eta_limit to run anyway)";
      throw std::invalid_argument(os.str());
    }
  }

  Trajectory traj;
  traj.config = config;
  ShallowNet net = net0;

  auto record = [&](std::size_t t, double risk, const Matrix& grad) {
    TracePoint p;
    p.t = t;
    p.risk = risk;
    p.path_norm = (t == 0) ? 0.0 : frobenius_norm(net.w - net0.w);
    p.grad_norm = frobenius_norm(grad);
    if (config.store_parameters) p.parameters = net.w;
    traj.points.push_back(std::move(p));
  };

  double risk = 0.0;
  Matrix grad = grad_empirical_risk(net, data, &risk);
  record(0, risk, grad);
  for (std::size_t t = 1; t <= config.t_max; ++t) {
    add_scaled(net.w, -config.eta, grad);
    grad = grad_empirical_risk(net, data, &risk);
    if (!std::isfinite(risk)) {
      std::ostringstream os;
      os << "gd_train: non-finite risk at step " << t << "; step size likely too large";
      throw std::runtime_error(os.str());
    }
    if (t % config.record_every == 0 || t == config.t_max) record(t, risk, grad);
  }
  traj.final_net = std::move(net);
  return traj;
}

// --- regularised path objective ---

struct OracleComponents {
  double risk_at_argmin = 0.0;
  double quad_term = 0.0;
  double cubic_term = 0.0;
  double tail_term = 0.0;
};

struct OracleResult {
  double value = 0.0;
  ShallowNet argmin_net;
  OracleComponents components;
  Trajectory solver_trace;  // objective recorded in the risk field
};

/// The additive remainder b~ C_0 (eta t)^{3/2} / sqrt(m).
inline double oracle_tail_term(const ProblemConstants& pc, const ActivationSpec& act,
                               std::size_t m, double eta_t_product) {
  const auto k = compute_constants(pc, act, m, 1.0, eta_t_product);
  return k.b_tilde * pc.c_0 * std::pow(eta_t_product, 1.5) / std::sqrt(double(m));
}

/// L_S(W) + ||W - W_0||^2/(eta t) + b~ ||W - W_0||^3 / sqrt(m), the bracketed
/// objective whose minimum (plus the tail term) upper-bounds the running mean
/// of the risk along gradient descent.
inline double oracle_bracket(const ShallowNet& net0, const ShallowNet& candidate,
                             const Dataset& data, double eta_t_product,
                             const ProblemConstants& pc) {
  const auto k = compute_constants(pc, candidate.activation, candidate.m, 1.0, eta_t_product);
  const double dist = frobenius_norm(candidate.w - net0.w);
  return empirical_risk(candidate, data) + dist * dist / eta_t_product +
         k.b_tilde * dist * dist * dist / std::sqrt(double(candidate.m));
}

/// Minimises the bracketed objective by gradient descent with step halving,
/// from restart points (W_0, a small Gaussian perturbation of W_0, the plain
/// GD final iterate) plus any extra candidates. Returns the best value with
/// the tail term added, so it upper-bounds the audited running risk mean.
inline OracleResult solve_oracle(const ShallowNet& net0, const Dataset& data,
                                 double eta_t_product, const ProblemConstants& pc,
                                 const GDConfig& solver, int restarts = 3,
                                 const std::vector<ShallowNet>& extra_candidates = {},
                                 std::uint64_t seed = 0) {
  if (eta_t_product <= 0.0) throw std::invalid_argument("solve_oracle: eta_t_product must be positive");
  pc.validate();
  const auto k = compute_constants(pc, net0.activation, net0.m, 1.0, eta_t_product);
  const double inv_eta_t = 1.0 / eta_t_product;
  const double cubic_coef = k.b_tilde / std::sqrt(double(net0.m));
  const double tail = oracle_tail_term(pc, net0.activation, net0.m, eta_t_product);

  auto objective = [&](const ShallowNet& net) {
    const double dist = frobenius_norm(net.w - net0.w);
    return empirical_risk(net, data) + dist * dist * inv_eta_t + cubic_coef * dist * dist * dist;
  };
  auto objective_grad = [&](const ShallowNet& net) {
    Matrix g = grad_empirical_risk(net, data);
    const Matrix delta = net.w - net0.w;
    const double dist = frobenius_norm(delta);
    add_scaled(g, 2.0 * inv_eta_t + 3.0 * cubic_coef * dist, delta);
    return g;
  };

  std::vector<ShallowNet> starts;
  if (restarts >= 1) starts.push_back(net0);
  if (restarts >= 2) {
    ShallowNet perturbed = net0;
    RngStream rng(seed, {0x0bacull});
    for (std::size_t i = 0; i < perturbed.w.size(); ++i)
      perturbed.w.data()[i] += 0.01 * rng.normal();
    starts.push_back(std::move(perturbed));
  }
  if (restarts >= 3) {
    GDConfig plain = solver;
    plain.store_parameters = false;
    plain.record_every = std::max<std::size_t>(plain.t_max, 1);
    plain.override_eta_limit = false;
    plain.eta = std::min(solver.eta, step_size_limit(pc, net0.activation, net0.m));
    starts.push_back(gd_train(net0, data, plain, &pc).final_net);
  }
  for (const auto& c : extra_candidates) starts.push_back(c);

  OracleResult best;
  best.value = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < starts.size(); ++s) {
    ShallowNet net = starts[s];
    Trajectory trace;
    trace.config = solver;
    double f = objective(net);
    if (!std::isfinite(f)) throw std::runtime_error("solve_oracle: non-finite objective at start");
    {
      TracePoint p;
      p.t = 0;
      p.risk = f;
      p.path_norm = frobenius_norm(net.w - net0.w);
      trace.points.push_back(p);
    }
    for (std::size_t it = 1; it <= solver.t_max; ++it) {
      const Matrix g = objective_grad(net);
      double step = solver.eta;
      ShallowNet trial = net;
      double f_trial = 0.0;
      bool improved = false;
      for (int halving = 0; halving < 60; ++halving) {
        trial.w = net.w;
        add_scaled(trial.w, -step, g);
        f_trial = objective(trial);
        if (std::isfinite(f_trial) && f_trial <= f) {
          improved = true;
          break;
        }
        step *= 0.5;
      }
      if (!improved) break;  // numerically stationary
      net.w = trial.w;
      const double drop = f - f_trial;
      f = f_trial;
      if (it % solver.record_every == 0 || it == solver.t_max) {
        TracePoint p;
        p.t = it;
        p.risk = f;
        p.path_norm = frobenius_norm(net.w - net0.w);
        p.grad_norm = frobenius_norm(g);
        trace.points.push_back(p);
      }
      if (drop <= 1e-15 * std::max(1.0, std::abs(f))) break;
    }
    const double dist = frobenius_norm(net.w - net0.w);
    OracleComponents comp;
    comp.risk_at_argmin = empirical_risk(net, data);
    comp.quad_term = dist * dist * inv_eta_t;
    comp.cubic_term = cubic_coef * dist * dist * dist;
    comp.tail_term = tail;
    const double total = comp.risk_at_argmin + comp.quad_term + comp.cubic_term + comp.tail_term;
    if (total < best.value) {
      best.value = total;
      best.argmin_net = std::move(net);
      best.components = comp;
      trace.final_net = best.argmin_net;
      best.solver_trace = std::move(trace);
    }
  }
  return best;
}

/// Bound-side evaluator: the solver value, tightened by the bracket at any
/// user-supplied candidates (for example the linearised least-squares
/// interpolant or the plain GD endpoint).
inline double opt_error_rhs(const OracleResult& oracle, const ShallowNet& net0,
                            const Dataset& data, double eta_t_product, const ProblemConstants& pc,
                            const std::vector<ShallowNet>& candidates = {}) {
  double best = oracle.value;
  const double tail = oracle.components.tail_term;
  for (const auto& c : candidates)
    best = std::min(best, oracle_bracket(net0, c, data, eta_t_product, pc) + tail);
  return best;
}

// --- linearised least-squares interpolant ---

struct PinvSolution {
  ShallowNet net;
  Vector alpha;          // (n K^)^{-1} (y - y^_0)
  double sq_norm = 0.0;  // ||W - W_0||_F^2, equals <y - y^_0, alpha>
};

/// Minimal-norm solution of the linearised system Phi_0^T (W - W_0) = y - y^_0
/// through the empirical gram: W = W_0 + Phi_0 (n K^)^{-1} (y - y^_0).
inline PinvSolution pinv_linear_solution(const ShallowNet& net0, const Dataset& data,
                                         double lambda_floor = 1e-12) {
  const std::size_t n = data.size();
  if (n == 0) throw std::invalid_argument("pinv_linear_solution: empty dataset");
  const std::size_t dim = net0.d * net0.m;

  std::vector<Vector> features(n);
  Vector residual(n);
  for (std::size_t i = 0; i < n; ++i) {
    features[i] = ntk_feature(net0, data[i].x);
    residual[i] = data[i].y - forward(net0, data[i].x);
  }
  Matrix n_khat(n, n);  // Phi_0^T Phi_0 = n K^
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double v = dot(features[i], features[j]);
      n_khat(i, j) = v;
      n_khat(j, i) = v;
    }
  {
    const auto eigs = symmetric_eigenvalues(n_khat);
    if (eigs.front() / double(n) <= lambda_floor) {
      std::ostringstream os;
      os << "pinv_linear_solution: lambda_min(K^) = " << eigs.front() / double(n)
         << " at or below floor " << lambda_floor;
      throw std::invalid_argument(os.str());
    }
  }

  PinvSolution out;
  out.alpha = psd_solve(n_khat, residual, 0.0);
  out.net = net0;
  for (std::size_t i = 0; i < n; ++i) axpy(out.alpha[i], features[i], out.net.w.flat());
  out.sq_norm = [&] {
    const Matrix delta = out.net.w - net0.w;
    return frobenius_dot(delta, delta);
  }();

  // verify the linear system residual and the quadratic-form identity
  const double rhs_norm = norm2(residual);
  double max_err = 0.0;
  Vector delta_flat(out.net.w.flat().begin(), out.net.w.flat().end());
  for (std::size_t i = 0; i < dim; ++i) delta_flat[i] -= net0.w.flat()[i];
  for (std::size_t i = 0; i < n; ++i)
    max_err = std::max(max_err, std::abs(dot(features[i], delta_flat) - residual[i]));
  if (max_err > 1e-8 * std::max(rhs_norm, 1e-300))
    throw std::runtime_error("pinv_linear_solution: linear system residual exceeds tolerance");
  const double quad = dot(residual, out.alpha);
  if (std::abs(out.sq_norm - quad) > 1e-8 * std::max({out.sq_norm, quad, 1e-300}))
    throw std::runtime_error("pinv_linear_solution: norm identity check failed");
  return out;
}

}  // namespace gdlab
