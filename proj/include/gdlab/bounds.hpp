#pragma once

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "gdlab/model.hpp"
#include "gdlab/numerics.hpp"

namespace gdlab {

/// Closed-form constants consumed by every audit. epsilon_tilde is the
/// segment-curvature slack with the realised risks replaced by their
/// almost-sure bound C_0, which makes it coincide with epsilon.
struct BoundConstants {
  double rho = 0.0;
  double epsilon = 0.0;
  double epsilon_tilde = 0.0;
  double b = 0.0;
  double b_tilde = 0.0;
  double width_min = 0.0;
};

inline double smoothness_rho(const ProblemConstants& pc, const ActivationSpec& act, std::size_t m) {
  pc.validate();
  const double b1 = act.b_phi_prime, b2 = act.b_phi_double_prime;
  return pc.c_x * pc.c_x * (b1 * b1 + b2 * act.b_phi + b2 * pc.c_y / std::sqrt(double(m)));
}

inline BoundConstants compute_constants(const ProblemConstants& pc, const ActivationSpec& act,
                                        std::size_t m, double eta, double t) {
  pc.validate();
  if (m == 0 || eta < 0.0 || t < 0.0)
    throw std::invalid_argument("compute_constants: m positive, eta and t nonnegative");
  const double b0 = act.b_phi, b1 = act.b_phi_prime, b2 = act.b_phi_double_prime;
  const double cx = pc.c_x, c0 = pc.c_0;
  const double sqrt_m = std::sqrt(double(m));
  const double eta_t = eta * t;
  const double horizon = 4.0 * b1 * cx * std::sqrt(eta_t) + std::sqrt(2.0);

  BoundConstants k;
  k.rho = cx * cx * (b1 * b1 + b2 * b0 + b2 * pc.c_y / sqrt_m);
  k.epsilon = 2.0 * (cx * cx * std::sqrt(c0) * b2 / sqrt_m) * horizon;
  k.epsilon_tilde = k.epsilon;
  const double cx32 = std::pow(cx, 1.5);
  k.b = 16.0 * std::exp(3.0) * cx32 * b1 * b1 * (1.0 + cx32 * b1 * b1);
  k.b_tilde = cx * cx * b2 * (b1 * cx + c0);
  k.width_min = 144.0 * eta_t * eta_t * std::pow(cx, 4.0) * c0 * c0 * b2 * b2 * horizon * horizon;
  return k;
}

/// Proof-exact lower bound on the smallest Hessian eigenvalue along a
/// parameter segment; includes the C_x^2 factor. The weaker variant without
/// that factor is reported alongside for reference.
inline double curvature_floor(const ProblemConstants& pc, const ActivationSpec& act, std::size_t m,
                              double displacement) {
  pc.validate();
  if (displacement < 0.0) throw std::invalid_argument("curvature_floor: displacement must be >= 0");
  const double b1 = act.b_phi_prime, b2 = act.b_phi_double_prime;
  return -(pc.c_x * pc.c_x * b2 * (b1 * pc.c_x + pc.c_0) / std::sqrt(double(m))) *
         std::max(1.0, displacement);
}

inline double curvature_floor_weak_form(const ProblemConstants& pc, const ActivationSpec& act,
                                        std::size_t m, double displacement) {
  const double b1 = act.b_phi_prime, b2 = act.b_phi_double_prime;
  return -(b2 * (b1 * pc.c_x + pc.c_0) / std::sqrt(double(m))) * std::max(1.0, displacement);
}

struct BoundReport {
  std::string name;
  double measured = 0.0;
  double bound = 0.0;
  double slack = 0.0;
  enum class Verdict { holds, holds_at_mc_tolerance, void_precondition, violated } verdict =
      Verdict::holds;
  std::map<std::string, bool> preconditions;
  std::string provenance;

  bool ok() const { return verdict != Verdict::violated; }
};

inline std::string verdict_name(BoundReport::Verdict v) {
  switch (v) {
    case BoundReport::Verdict::holds: return "holds";
    case BoundReport::Verdict::holds_at_mc_tolerance: return "holds_at_mc_tolerance";
    case BoundReport::Verdict::void_precondition: return "void_precondition";
    case BoundReport::Verdict::violated: return "violated";
  }
  return "?";
}

/// measured <= bound up to mc_tolerance; preconditions decide voidness.
inline BoundReport make_report(std::string name, double measured, double bound,
                               std::string provenance,
                               std::map<std::string, bool> preconditions = {},
                               double mc_tolerance = 0.0) {
  BoundReport r;
  r.name = std::move(name);
  r.measured = measured;
  r.bound = bound;
  r.slack = bound - measured;
  r.preconditions = std::move(preconditions);
  r.provenance = std::move(provenance);
  bool pre_ok = true;
  for (const auto& [k, v] : r.preconditions) pre_ok = pre_ok && v;
  if (!pre_ok)
    r.verdict = BoundReport::Verdict::void_precondition;
  else if (r.slack >= 0.0)
    r.verdict = BoundReport::Verdict::holds;
  else if (measured - mc_tolerance <= bound)
    r.verdict = BoundReport::Verdict::holds_at_mc_tolerance;
  else
    r.verdict = BoundReport::Verdict::violated;
  return r;
}

inline nlohmann::json report_to_json(const BoundReport& r) {
  nlohmann::json j;
  j["name"] = r.name;
  j["measured"] = r.measured;
  j["bound"] = r.bound;
  j["slack"] = r.slack;
  j["verdict"] = verdict_name(r.verdict);
  j["preconditions"] = r.preconditions;
  j["provenance"] = r.provenance;
  return j;
}

struct SpectralAuditResult {
  BoundReport lambda_max_report;
  BoundReport lambda_min_report;
};

namespace detail {

inline SymmetricSpectrum risk_hessian_spectrum(const ShallowNet& net, const Dataset& data,
                                               std::size_t dense_cap) {
  const std::size_t dim = net.d * net.m;
  if (dim <= dense_cap) return dense_extreme_eigs(dense_hessian(net, data, dense_cap));
  auto apply = [&](std::span<const double> v, std::span<double> out) {
    Matrix vm(net.d, net.m);
    std::copy(v.begin(), v.end(), vm.flat().begin());
    const Matrix hv = hessian_vector_product(net, data, vm);
    std::copy(hv.flat().begin(), hv.flat().end(), out.begin());
  };
  return lanczos_extreme_eigs(apply, dim, 120, 0x5eedull);
}

}  // namespace detail

/// Audits the Hessian spectrum of the empirical risk along the segment from
/// net_tilde to net: largest eigenvalue against rho at each grid point, and
/// the grid minimum of the smallest eigenvalue (with golden refinement around
/// the argmin) against the curvature floor.
inline SpectralAuditResult spectral_audit(const ShallowNet& net, const ShallowNet& net_tilde,
                                          const Dataset& data, const ProblemConstants& pc,
                                          int samples_along_segment = 11,
                                          std::size_t dense_cap = 2000) {
  if (!net.w.same_shape(net_tilde.w)) throw std::invalid_argument("spectral_audit: shape mismatch");
  pc.validate();
  const auto& act = net.activation;
  const std::size_t m = net.m;
  const double rho = smoothness_rho(pc, act, m);
  const double risk_tilde = empirical_risk(net_tilde, data);
  const bool hypothesis = risk_tilde <= pc.c_0 * pc.c_0;
  const Matrix delta = net.w - net_tilde.w;
  const double displacement = frobenius_norm(delta);
  const double floor = curvature_floor(pc, act, m, displacement);

  auto at_alpha = [&](double alpha) {
    ShallowNet probe = net_tilde;
    add_scaled(probe.w, alpha, delta);
    return detail::risk_hessian_spectrum(probe, data, dense_cap);
  };

  double max_lambda_max = -std::numeric_limits<double>::infinity();
  double min_lambda_min = std::numeric_limits<double>::infinity();
  double argmin_alpha = 0.0;
  const int grid = std::max(samples_along_segment, 2);
  for (int i = 0; i < grid; ++i) {
    const double alpha = double(i) / double(grid - 1);
    const auto s = at_alpha(alpha);
    max_lambda_max = std::max(max_lambda_max, s.lambda_max);
    if (s.lambda_min < min_lambda_min) {
      min_lambda_min = s.lambda_min;
      argmin_alpha = alpha;
    }
  }
  // local golden refinement of lambda_min around the grid argmin
  {
    const double h = 1.0 / double(grid - 1);
    double a = std::max(0.0, argmin_alpha - h), b = std::min(1.0, argmin_alpha + h);
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - invphi * (b - a), d2 = a + invphi * (b - a);
    double fc = at_alpha(c).lambda_min, fd = at_alpha(d2).lambda_min;
    for (int it = 0; it < 12; ++it) {
      if (fc < fd) {
        b = d2;
        d2 = c;
        fd = fc;
        c = b - invphi * (b - a);
        fc = at_alpha(c).lambda_min;
      } else {
        a = c;
        c = d2;
        fc = fd;
        d2 = a + invphi * (b - a);
        fd = at_alpha(d2).lambda_min;
      }
      min_lambda_min = std::min(min_lambda_min, std::min(fc, fd));
    }
  }

  std::map<std::string, bool> pre{{"risk_at_base_below_c0_squared", hypothesis}};
  std::ostringstream rho_src;
  rho_src << "rho = C_x^2 (B_phi'^2 + B_phi'' B_phi + B_phi'' C_y / sqrt(m)) = " << rho;
  std::ostringstream floor_src;
  floor_src << "floor = -C_x^2 B_phi'' (B_phi' C_x + C_0) max(1, ||W - W~||_F) / sqrt(m) = " << floor
            << " (weak form without C_x^2: "
            << curvature_floor_weak_form(pc, act, m, displacement) << ")";
  SpectralAuditResult out;
  out.lambda_max_report =
      make_report("hessian_lambda_max_vs_rho", max_lambda_max, rho, rho_src.str(), pre);
  // lambda_min >= floor audited as -lambda_min <= -floor
  out.lambda_min_report =
      make_report("segment_lambda_min_vs_curvature_floor", -min_lambda_min, -floor,
                  floor_src.str(), pre);
  return out;
}

/// b (eta/n + eta^2 t / n^2) * sum of the t+1 measured per-step risks.
inline double gen_gap_rhs(const std::vector<double>& risks, double eta, std::size_t t,
                          std::size_t n, const BoundConstants& k) {
  if (risks.size() != t + 1)
    throw std::invalid_argument("gen_gap_rhs: need exactly t+1 per-step risks");
  double sum = 0.0;
  for (double r : risks) sum += r;
  const double nn = double(n);
  return k.b * (eta / nn + eta * eta * double(t) / (nn * nn)) * sum;
}

/// (1 + C (eta T / n)(1 + eta T / n)) * oracle_value.
inline double risk_from_oracle_rhs(double oracle_value, double eta, double t_steps, double n,
                                 double c_combined) {
  if (n <= 0.0 || t_steps < 0.0 || eta < 0.0)
    throw std::invalid_argument("risk_from_oracle_rhs: positive inputs required");
  const double ratio = eta * t_steps / n;
  return (1.0 + c_combined * ratio * (1.0 + ratio)) * oracle_value;
}

}  // namespace gdlab
