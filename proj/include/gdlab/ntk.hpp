#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gdlab/bounds.hpp"
#include "gdlab/model.hpp"
#include "gdlab/numerics.hpp"

namespace gdlab {

/// Empirical gram of the gradient features next to its Monte-Carlo
/// expectation over the initialisation law.
struct GramPair {
  Matrix k_hat;        // (1/n) Phi_0^T Phi_0
  Matrix k_expected;   // E[k_hat | S, u], Monte Carlo over the weight law
  Matrix k_std_err;    // per-entry MC standard error of k_expected
  std::size_t mc_samples = 0;
  std::string init_law;
};

struct NtkOracleResult {
  double quad_form = 0.0;  // <y - y^_0, (n K)^{-1} (y - y^_0)>
  double lambda_min_k = 0.0;
  enum class Gram { empirical, expected } used_matrix = Gram::empirical;
};

/// dm x n matrix whose column i is the gradient feature of sample i.
inline Matrix feature_matrix(const ShallowNet& net0, const Dataset& data) {
  const std::size_t n = data.size();
  if (n == 0) throw std::invalid_argument("feature_matrix: empty dataset");
  Matrix phi(net0.d * net0.m, n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector f = ntk_feature(net0, data[i].x);
    std::copy(f.begin(), f.end(), phi.col(i).begin());
  }
  return phi;
}

inline Matrix empirical_gram(const ShallowNet& net0, const Dataset& data) {
  const Matrix phi = feature_matrix(net0, data);
  const std::size_t n = data.size();
  Matrix k(n, n);
  const double inv_n = 1.0 / double(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double v = dot(phi.col(i), phi.col(j)) * inv_n;
      k(i, j) = v;
      k(j, i) = v;
    }
  return k;
}

/// Factored evaluation (1/n) <x_i, x_j> (1/m) sum_k phi'_ik phi'_jk; the
/// independent route used to verify the feature-product gram.
inline Matrix empirical_gram_factored(const ShallowNet& net0, const Dataset& data) {
  const std::size_t n = data.size(), m = net0.m;
  Matrix preact(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < m; ++k)
      preact(i, k) = net0.activation.phi_prime(dot(net0.w.col(k), data[i].x));
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < m; ++k) acc += preact(i, k) * preact(j, k);
      const double v = dot(data[i].x, data[j].x) * acc / (double(m) * double(n));
      out(i, j) = v;
      out(j, i) = v;
    }
  return out;
}

inline void verify_gram_identity(const ShallowNet& net0, const Dataset& data, double tol = 1e-10) {
  const Matrix a = empirical_gram(net0, data);
  const Matrix b = empirical_gram_factored(net0, data);
  const double err = max_abs(a - b);
  if (err > tol) {
    std::ostringstream os;
    os << "gram identity violated: max entry gap " << err << " > " << tol;
    throw std::runtime_error(os.str());
  }
}

/// Monte-Carlo expectation of the gram over hidden weights drawn i.i.d.
/// N(0, nu_init^2 I): K_ij = (1/n) <x_i, x_j> E[phi'(<x_i, w>) phi'(<x_j, w>)].
inline GramPair expected_gram(const Dataset& data, const ActivationSpec& act, double nu_init,
                              std::size_t mc_samples, std::uint64_t seed) {
  const std::size_t n = data.size();
  if (n == 0) throw std::invalid_argument("expected_gram: empty dataset");
  if (mc_samples == 0) throw std::invalid_argument("expected_gram: mc_samples must be positive");
  const std::size_t d = data[0].x.size();
  Matrix sum(n, n), sum_sq(n, n);
  RngStream rng(seed, {0xec0eull});
  Vector w(d), g(n);
  for (std::size_t s = 0; s < mc_samples; ++s) {
    for (auto& v : w) v = nu_init * rng.normal();
    for (std::size_t i = 0; i < n; ++i) g[i] = act.phi_prime(dot(data[i].x, w));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        const double p = g[i] * g[j];
        sum(i, j) += p;
        sum_sq(i, j) += p * p;
      }
  }
  GramPair out;
  out.mc_samples = mc_samples;
  {
    std::ostringstream os;
    os << "gaussian nu_init = " << nu_init;
    out.init_law = os.str();
  }
  out.k_expected = Matrix(n, n);
  out.k_std_err = Matrix(n, n);
  const double inv_mc = 1.0 / double(mc_samples);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double xx = dot(data[i].x, data[j].x) / double(n);
      const double mean = sum(i, j) * inv_mc;
      const double var = std::max(0.0, sum_sq(i, j) * inv_mc - mean * mean);
      const double se = std::sqrt(var * inv_mc);
      out.k_expected(i, j) = xx * mean;
      out.k_expected(j, i) = xx * mean;
      out.k_std_err(i, j) = std::abs(xx) * se;
      out.k_std_err(j, i) = std::abs(xx) * se;
    }
  return out;
}

struct GramConcentrationResult {
  BoundReport spectral_report;
  BoundReport frobenius_report;
};

/// Deviation of the empirical gram from its expectation, against the
/// spectral-norm tail bound and its squared-Frobenius counterpart at
/// confidence level delta. mc_slack widens the verdict by the Monte-Carlo
/// error carried by the expected gram.
inline GramConcentrationResult gram_concentration_audit(const Matrix& k_hat,
                                                        const Matrix& k_expected, std::size_t m,
                                                        double delta, double b_phi_prime,
                                                        double mc_slack = 0.0) {
  if (!k_hat.same_shape(k_expected))
    throw std::invalid_argument("gram_concentration_audit: shape mismatch");
  if (delta <= 0.0 || delta > 1.0)
    throw std::invalid_argument("gram_concentration_audit: delta must lie in (0, 1]");
  const std::size_t n = k_hat.rows();
  const Matrix diff = k_hat - k_expected;
  const auto eigs = symmetric_eigenvalues(diff);
  const double spectral = std::max(std::abs(eigs.front()), std::abs(eigs.back()));
  const double fro = frobenius_norm(diff);
  const double log_term = std::log(2.0 * double(n) / delta);
  const double spectral_bound = b_phi_prime * std::sqrt(log_term / (2.0 * double(m)));
  const double fro_sq_bound = b_phi_prime * b_phi_prime * log_term / (2.0 * double(m));

  GramConcentrationResult out;
  std::ostringstream s1;
  s1 << "|K^ - K|_2 <= B_phi' sqrt(ln(2n/delta)/(2m)) at delta = " << delta
     << ", mc slack = " << mc_slack;
  out.spectral_report = make_report("gram_concentration_spectral", spectral, spectral_bound,
                                    s1.str(), {}, mc_slack);
  std::ostringstream s2;
  s2 << "|K^ - K|_F^2 <= B_phi'^2 ln(2n/delta)/(2m) at delta = " << delta
     << ", mc slack = " << mc_slack;
  out.frobenius_report = make_report("gram_concentration_frobenius_sq", fro * fro, fro_sq_bound,
                                     s2.str(), {}, mc_slack);
  return out;
}

enum class LinearisedTarget { raw, residual };

/// Linearised prediction sum_k u_k phi'(<x, W_0k>) <W_k - W_0k, x>.
inline double linearized_forward(const ShallowNet& net0, const ShallowNet& candidate,
                                 std::span<const double> x) {
  if (!candidate.w.same_shape(net0.w))
    throw std::invalid_argument("linearized_forward: shape mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < net0.m; ++k) {
    double inner = 0.0;
    const auto w0 = net0.w.col(k);
    const auto wc = candidate.w.col(k);
    for (std::size_t i = 0; i < net0.d; ++i) inner += (wc[i] - w0[i]) * x[i];
    acc += static_cast<double>(net0.u_signs[k]) * net0.activation.phi_prime(dot(w0, x)) * inner;
  }
  return acc * net0.u_scale();
}

/// (1/2) sum_i (target_i - f_lin(x_i))^2 with target either the raw labels or
/// the residuals y - y^_0 left by the initial predictor.
inline double linearized_risk(const ShallowNet& net0, const ShallowNet& candidate,
                              const Dataset& data, LinearisedTarget variant) {
  double acc = 0.0;
  for (const auto& z : data.samples) {
    double target = z.y;
    if (variant == LinearisedTarget::residual) target -= forward(net0, z.x);
    const double r = target - linearized_forward(net0, candidate, z.x);
    acc += 0.5 * r * r;
  }
  return acc;
}

/// First-order Taylor remainder of the predictor against its closed-form
/// envelope B_phi'' ||x|| ||W - W_0||_F^2 / (2 sqrt(m)).
inline BoundReport taylor_error_audit(const ShallowNet& net0, const ShallowNet& candidate,
                                      std::span<const double> x) {
  const double measured = std::abs(forward(candidate, x) - forward(net0, x) -
                                   linearized_forward(net0, candidate, x));
  const Matrix delta = candidate.w - net0.w;
  const double bound = net0.activation.b_phi_double_prime * norm2(x) *
                       frobenius_dot(delta, delta) / (2.0 * std::sqrt(double(net0.m)));
  return make_report("taylor_remainder", measured, bound,
                     "remainder <= B_phi'' |x| |W - W_0|_F^2 / (2 sqrt(m))");
}

/// Quadratic form <y - y^_0, (n K)^{-1} (y - y^_0)> through the PSD solver.
inline NtkOracleResult ntk_oracle_quantity(const Vector& y, const Vector& y_hat0,
                                           const Matrix& gram, NtkOracleResult::Gram which,
                                           double lambda_floor = 1e-12) {
  const std::size_t n = y.size();
  if (y_hat0.size() != n || gram.rows() != n || gram.cols() != n)
    throw std::invalid_argument("ntk_oracle_quantity: shape mismatch");
  Vector residual(n);
  for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - y_hat0[i];
  const auto eigs = symmetric_eigenvalues(gram);
  if (eigs.front() <= lambda_floor) {
    std::ostringstream os;
    os << "ntk_oracle_quantity: lambda_min(K) = " << eigs.front() << " at or below floor "
       << lambda_floor;
    throw std::invalid_argument(os.str());
  }
  Matrix n_gram = gram;
  scale(n_gram.flat(), double(n));
  const Vector solved = psd_solve(n_gram, residual, 0.0);
  NtkOracleResult out;
  out.quad_form = dot(residual, solved);
  out.lambda_min_k = eigs.front();
  out.used_matrix = which;
  const double cap = dot(residual, residual) / (double(n) * eigs.front());
  if (out.quad_form < -1e-12 || out.quad_form > cap * (1.0 + 1e-8) + 1e-12)
    throw std::runtime_error("ntk_oracle_quantity: quadratic form outside its envelope");
  return out;
}

}  // namespace gdlab
