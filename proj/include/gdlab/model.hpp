#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "gdlab/dataset.hpp"
#include "gdlab/matrix.hpp"
#include "gdlab/network.hpp"

namespace gdlab {

inline double sample_loss(const ShallowNet& net, const Sample& z) {
  const double r = forward(net, z.x) - z.y;
  return 0.5 * r * r;
}

inline double empirical_risk(const ShallowNet& net, const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("empirical_risk: empty dataset");
  double acc = 0.0;
  for (const auto& z : data.samples) acc += sample_loss(net, z);
  return acc / static_cast<double>(data.size());
}

/// Gradient of the squared loss at one sample. Column k is
/// u_k phi'(<W_k, x>) (f - y) x; the Frobenius norm respects the
/// ||x|| b_phi' |f - y| envelope.
inline Matrix grad_sample(const ShallowNet& net, const Sample& z) {
  if (z.x.size() != net.d) throw std::invalid_argument("grad_sample: input dimension mismatch");
  const double r = forward(net, z.x) - z.y;
  Matrix g(net.d, net.m);
  for (std::size_t k = 0; k < net.m; ++k) {
    const double coef = net.u(k) * net.activation.phi_prime(dot(net.w.col(k), z.x)) * r;
    auto col = g.col(k);
    for (std::size_t i = 0; i < net.d; ++i) col[i] = coef * z.x[i];
  }
  const double cap = norm2(z.x) * net.activation.b_phi_prime * std::abs(r);
  if (frobenius_norm(g) > cap * (1.0 + 1e-9) + 1e-300)
    throw std::runtime_error("grad_sample: gradient exceeds its norm envelope");
  return g;
}

/// Mean of grad_sample over the tuple, fused so pre-activations are computed
/// once per sample. Optionally reports the empirical risk of the same pass.
inline Matrix grad_empirical_risk(const ShallowNet& net, const Dataset& data,
                                  double* risk_out = nullptr) {
  if (data.size() == 0) throw std::invalid_argument("grad_empirical_risk: empty dataset");
  const double inv_n = 1.0 / static_cast<double>(data.size());
  const double us = net.u_scale();
  Matrix g(net.d, net.m);
  std::vector<double> preact(net.m);
  double risk = 0.0;
  for (const auto& z : data.samples) {
    if (z.x.size() != net.d)
      throw std::invalid_argument("grad_empirical_risk: input dimension mismatch");
    double f = 0.0;
    for (std::size_t k = 0; k < net.m; ++k) {
      preact[k] = dot(net.w.col(k), z.x);
      f += static_cast<double>(net.u_signs[k]) * net.activation.phi(preact[k]);
    }
    f *= us;
    const double r = f - z.y;
    risk += 0.5 * r * r * inv_n;
    for (std::size_t k = 0; k < net.m; ++k) {
      const double coef =
          static_cast<double>(net.u_signs[k]) * us * net.activation.phi_prime(preact[k]) * r * inv_n;
      axpy(coef, z.x, g.col(k));
    }
  }
  if (risk_out) *risk_out = risk;
  return g;
}

/// (1/n) sum_i [ grad f(x_i) <grad f(x_i), v> + (f(x_i) - y_i) H_i v ] where
/// H_i is the block-diagonal Hessian of the predictor: block k maps
/// v_k -> u_k phi''(<W_k, x_i>) <x_i, v_k> x_i. The dm x dm matrix is never
/// materialised.
inline Matrix hessian_vector_product(const ShallowNet& net, const Dataset& data, const Matrix& v) {
  if (data.size() == 0) throw std::invalid_argument("hessian_vector_product: empty dataset");
  if (!v.same_shape(net.w)) throw std::invalid_argument("hessian_vector_product: shape mismatch");
  if (!all_finite(v)) throw std::invalid_argument("hessian_vector_product: non-finite direction");
  const double inv_n = 1.0 / static_cast<double>(data.size());
  const double us = net.u_scale();
  Matrix out(net.d, net.m);
  std::vector<double> preact(net.m), vdotx(net.m);
  for (const auto& z : data.samples) {
    double f = 0.0;
    double gv = 0.0;  // <grad f, v>
    for (std::size_t k = 0; k < net.m; ++k) {
      preact[k] = dot(net.w.col(k), z.x);
      vdotx[k] = dot(v.col(k), z.x);
      f += static_cast<double>(net.u_signs[k]) * net.activation.phi(preact[k]);
      gv += static_cast<double>(net.u_signs[k]) * net.activation.phi_prime(preact[k]) * vdotx[k];
    }
    f *= us;
    gv *= us;
    const double r = f - z.y;
    for (std::size_t k = 0; k < net.m; ++k) {
      const double uk = static_cast<double>(net.u_signs[k]) * us;
      const double coef =
          (uk * net.activation.phi_prime(preact[k]) * gv +
           r * uk * net.activation.phi_double_prime(preact[k]) * vdotx[k]) *
          inv_n;
      axpy(coef, z.x, out.col(k));
    }
  }
  return out;
}

/// Explicit dm x dm Hessian of the empirical risk; vectorisation follows the
/// column blocks of w (block k = rows k*d .. k*d+d-1).
inline Matrix dense_hessian(const ShallowNet& net, const Dataset& data,
                            std::size_t dense_cap = 2000) {
  if (data.size() == 0) throw std::invalid_argument("dense_hessian: empty dataset");
  const std::size_t dim = net.d * net.m;
  if (dim > dense_cap)
    throw std::invalid_argument("dense_hessian: dm exceeds dense cap; use hessian_vector_product");
  const double inv_n = 1.0 / static_cast<double>(data.size());
  const double us = net.u_scale();
  Matrix h(dim, dim);
  std::vector<double> preact(net.m), g(dim);
  for (const auto& z : data.samples) {
    double f = 0.0;
    for (std::size_t k = 0; k < net.m; ++k) {
      preact[k] = dot(net.w.col(k), z.x);
      f += static_cast<double>(net.u_signs[k]) * net.activation.phi(preact[k]);
    }
    f *= us;
    const double r = f - z.y;
    for (std::size_t k = 0; k < net.m; ++k) {
      const double coef = static_cast<double>(net.u_signs[k]) * us * net.activation.phi_prime(preact[k]);
      for (std::size_t i = 0; i < net.d; ++i) g[k * net.d + i] = coef * z.x[i];
    }
    for (std::size_t b = 0; b < dim; ++b) {
      const double gb = g[b] * inv_n;
      if (gb == 0.0) continue;
      for (std::size_t a = 0; a < dim; ++a) h(a, b) += g[a] * gb;
    }
    for (std::size_t k = 0; k < net.m; ++k) {
      const double coef =
          r * static_cast<double>(net.u_signs[k]) * us * net.activation.phi_double_prime(preact[k]) * inv_n;
      if (coef == 0.0) continue;
      for (std::size_t j = 0; j < net.d; ++j) {
        const double cxj = coef * z.x[j];
        for (std::size_t i = 0; i < net.d; ++i) h(k * net.d + i, k * net.d + j) += cxj * z.x[i];
      }
    }
  }
  return h;
}

/// Gradient feature of the predictor at the given parameters:
/// block k of the returned dm-vector is u_k phi'(<W_k, x>) x.
inline Vector ntk_feature(const ShallowNet& net0, std::span<const double> x) {
  if (x.size() != net0.d) throw std::invalid_argument("ntk_feature: input dimension mismatch");
  Vector out(net0.d * net0.m);
  for (std::size_t k = 0; k < net0.m; ++k) {
    const double coef = net0.u(k) * net0.activation.phi_prime(dot(net0.w.col(k), x));
    for (std::size_t i = 0; i < net0.d; ++i) out[k * net0.d + i] = coef * x[i];
  }
  return out;
}

/// Squared Frobenius norm of the per-sample loss gradient, computed without
/// materialising the matrix: (f-y)^2 ||x||^2 (1/m) sum_k phi'(<W_k, x>)^2.
inline double grad_sample_sq_norm(const ShallowNet& net, const Sample& z) {
  if (z.x.size() != net.d)
    throw std::invalid_argument("grad_sample_sq_norm: input dimension mismatch");
  const double r = forward(net, z.x) - z.y;
  double phi_sq = 0.0;
  for (std::size_t k = 0; k < net.m; ++k) {
    const double p = net.activation.phi_prime(dot(net.w.col(k), z.x));
    phi_sq += p * p;
  }
  return r * r * dot(z.x, z.x) * phi_sq / static_cast<double>(net.m);
}

/// Almost-sure loss bound realised on the training tuple at the given
/// parameters; the default C_0 policy evaluates this at initialisation.
inline double realized_loss_bound(const ShallowNet& net, const Dataset& data) {
  double c0 = 0.0;
  for (const auto& z : data.samples) c0 = std::max(c0, sample_loss(net, z));
  return c0;
}

}  // namespace gdlab
