#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace gdlab {

/// Scalar activation with certified sup bounds on |phi|, |phi'|, |phi''|.
/// Bounds come from the grid+golden-section certifier below, not hand-entered
/// literals.
struct ActivationSpec {
  double (*phi)(double) = nullptr;
  double (*phi_prime)(double) = nullptr;
  double (*phi_double_prime)(double) = nullptr;
  double b_phi = 0.0;
  double b_phi_prime = 0.0;
  double b_phi_double_prime = 0.0;
  std::string name;
};

inline constexpr double kActivationWindow = 50.0;  // certification window [-50, 50]

/// Max of |f| over [lo, hi]: dense grid scan, then golden-section refinement
/// inside the best grid cell.
inline double certify_abs_bound(double (*f)(double), double lo = -kActivationWindow,
                                double hi = kActivationWindow, int grid_points = 100001,
                                int refine_iters = 200) {
  double best = 0.0, best_x = lo;
  const double step = (hi - lo) / (grid_points - 1);
  for (int i = 0; i < grid_points; ++i) {
    const double x = lo + i * step;
    const double v = std::abs(f(x));
    if (v > best) {
      best = v;
      best_x = x;
    }
  }
  double a = std::max(lo, best_x - step);
  double b = std::min(hi, best_x + step);
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  for (int i = 0; i < refine_iters; ++i) {
    if (std::abs(f(c)) > std::abs(f(d)))
      b = d;
    else
      a = c;
    c = b - invphi * (b - a);
    d = a + invphi * (b - a);
  }
  return std::max(best, std::abs(f(0.5 * (a + b))));
}

inline double sigmoid_phi(double u) { return 1.0 / (1.0 + std::exp(-u)); }
inline double sigmoid_phi_prime(double u) {
  const double s = sigmoid_phi(u);
  return s * (1.0 - s);
}
inline double sigmoid_phi_double_prime(double u) {
  const double s = sigmoid_phi(u);
  return s * (1.0 - s) * (1.0 - 2.0 * s);
}

inline double tanh_phi(double u) { return std::tanh(u); }
inline double tanh_phi_prime(double u) {
  const double t = std::tanh(u);
  return 1.0 - t * t;
}
inline double tanh_phi_double_prime(double u) {
  const double t = std::tanh(u);
  return -2.0 * t * (1.0 - t * t);
}

inline double linear_phi(double u) { return u; }
inline double linear_phi_prime(double) { return 1.0; }
inline double linear_phi_double_prime(double) { return 0.0; }

inline ActivationSpec certify_activation(const std::string& name, double (*f)(double),
                                         double (*f1)(double), double (*f2)(double)) {
  ActivationSpec a;
  a.phi = f;
  a.phi_prime = f1;
  a.phi_double_prime = f2;
  a.b_phi = certify_abs_bound(f);
  a.b_phi_prime = certify_abs_bound(f1);
  a.b_phi_double_prime = certify_abs_bound(f2);
  a.name = name;
  return a;
}

inline const ActivationSpec& sigmoid_activation() {
  static const ActivationSpec a =
      certify_activation("sigmoid", sigmoid_phi, sigmoid_phi_prime, sigmoid_phi_double_prime);
  return a;
}

inline const ActivationSpec& tanh_activation() {
  static const ActivationSpec a =
      certify_activation("tanh", tanh_phi, tanh_phi_prime, tanh_phi_double_prime);
  return a;
}

/// Unbounded activation; the certified b_phi is its sup over the
/// certification window only. Used for convexity sanity probes.
inline const ActivationSpec& linear_activation() {
  static const ActivationSpec a =
      certify_activation("linear", linear_phi, linear_phi_prime, linear_phi_double_prime);
  return a;
}

inline const ActivationSpec& activation_by_name(const std::string& name) {
  if (name == "sigmoid") return sigmoid_activation();
  if (name == "tanh") return tanh_activation();
  if (name == "linear") return linear_activation();
  throw std::invalid_argument("unknown activation: " + name);
}

}  // namespace gdlab
