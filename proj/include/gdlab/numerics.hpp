#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gdlab/matrix.hpp"
#include "gdlab/rng.hpp"

namespace gdlab {

struct SymmetricSpectrum {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  enum class Method { dense, lanczos } method = Method::dense;
  int iterations = 0;
};

using LinearMap = std::function<void(std::span<const double>, std::span<double>)>;

namespace detail {

/// Householder reduction of a symmetric matrix to tridiagonal form,
/// eigenvalues only (no transform accumulation). On return d holds the
/// diagonal and e the subdiagonal with e[0] = 0.
inline void tridiagonalize(Matrix a, std::vector<double>& d, std::vector<double>& e) {
  const std::size_t n = a.rows();
  d.assign(n, 0.0);
  e.assign(n, 0.0);
  if (n == 0) return;
  for (std::size_t i = n - 1; i >= 1; --i) {
    const std::size_t l = i - 1;
    double h = 0.0;
    if (l > 0) {
      double sc = 0.0;
      for (std::size_t k = 0; k <= l; ++k) sc += std::abs(a(i, k));
      if (sc == 0.0) {
        e[i] = a(i, l);
      } else {
        for (std::size_t k = 0; k <= l; ++k) {
          a(i, k) /= sc;
          h += a(i, k) * a(i, k);
        }
        double f = a(i, l);
        double g = (f >= 0.0) ? -std::sqrt(h) : std::sqrt(h);
        e[i] = sc * g;
        h -= f * g;
        a(i, l) = f - g;
        f = 0.0;
        for (std::size_t j = 0; j <= l; ++j) {
          g = 0.0;
          for (std::size_t k = 0; k <= j; ++k) g += a(j, k) * a(i, k);
          for (std::size_t k = j + 1; k <= l; ++k) g += a(k, j) * a(i, k);
          e[j] = g / h;
          f += e[j] * a(i, j);
        }
        const double hh = f / (h + h);
        for (std::size_t j = 0; j <= l; ++j) {
          f = a(i, j);
          g = e[j] - hh * f;
          e[j] = g;
          for (std::size_t k = 0; k <= j; ++k) a(j, k) -= f * e[k] + g * a(i, k);
        }
      }
    } else {
      e[i] = a(i, l);
    }
    d[i] = h;
  }
  for (std::size_t i = 0; i < n; ++i) d[i] = a(i, i);
}

/// QL with implicit shifts on a tridiagonal (d, e). e[0] is ignored and the
/// subdiagonal entry between rows i-1 and i sits at e[i]. Eigenvalues land in
/// d, unsorted.
inline void tridiag_eigenvalues(std::vector<double>& d, std::vector<double>& e) {
  const std::size_t n = d.size();
  if (n <= 1) return;
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    int iter = 0;
    std::size_t m;
    do {
      for (m = l; m + 1 < n; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= std::numeric_limits<double>::epsilon() * dd) break;
      }
      if (m != l) {
        if (iter++ == 50)
          throw std::runtime_error("tridiag_eigenvalues: too many QL iterations");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::abs(r) : -std::abs(r)));
        double s = 1.0, c = 1.0, p = 0.0;
        bool underflow = false;
        for (std::size_t i = m; i-- > l;) {
          double f = s * e[i];
          const double b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            underflow = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
        }
        if (underflow) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
}

}  // namespace detail

/// All eigenvalues of a symmetric matrix, ascending. The input is symmetrised
/// before reduction; callers that care about asymmetry check it themselves.
inline std::vector<double> symmetric_eigenvalues(const Matrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("symmetric_eigenvalues: matrix not square");
  const std::size_t n = m.rows();
  Matrix a(n, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) a(i, j) = 0.5 * (m(i, j) + m(j, i));
  std::vector<double> d, e;
  detail::tridiagonalize(std::move(a), d, e);
  detail::tridiag_eigenvalues(d, e);
  std::sort(d.begin(), d.end());
  return d;
}

inline constexpr std::size_t kDefaultDenseCap = 2000;

inline SymmetricSpectrum dense_extreme_eigs(const Matrix& m, double sym_tol = 1e-10,
                                            std::size_t dense_cap = kDefaultDenseCap) {
  if (m.rows() != m.cols()) throw std::invalid_argument("dense_extreme_eigs: matrix not square");
  if (!all_finite(m)) throw std::invalid_argument("dense_extreme_eigs: non-finite entries");
  const double asym = max_asymmetry(m);
  if (asym > sym_tol) {
    std::ostringstream os;
    os << "dense_extreme_eigs: matrix not symmetric, max asymmetry " << asym << " exceeds tolerance "
       << sym_tol;
    throw std::invalid_argument(os.str());
  }
  if (m.rows() > dense_cap) {
    std::ostringstream os;
    os << "dense_extreme_eigs: dimension " << m.rows() << " above dense cap " << dense_cap
       << "; use lanczos_extreme_eigs";
    throw std::invalid_argument(os.str());
  }
  const auto eigs = symmetric_eigenvalues(m);
  SymmetricSpectrum out;
  out.lambda_min = eigs.empty() ? 0.0 : eigs.front();
  out.lambda_max = eigs.empty() ? 0.0 : eigs.back();
  out.method = SymmetricSpectrum::Method::dense;
  out.iterations = 0;
  return out;
}

/// Ritz estimates of the extreme eigenvalues of a symmetric linear map.
/// Full reorthogonalisation keeps ghost eigenvalues out at desk-scale dims.
/// Breakdown (zero beta) returns early with the iterations actually used.
inline SymmetricSpectrum lanczos_extreme_eigs(const LinearMap& apply, std::size_t dim,
                                              int iters, std::uint64_t seed) {
  if (dim == 0) throw std::invalid_argument("lanczos_extreme_eigs: dim must be positive");
  if (iters < 2) throw std::invalid_argument("lanczos_extreme_eigs: iters must be at least 2");

  RngStream rng(seed, {0x1a2cull});

  // probabilistic symmetry probe: <Av, w> must match <v, Aw> on random pairs
  {
    Vector v(dim), w(dim), av(dim), aw(dim);
    for (int probe = 0; probe < 3; ++probe) {
      for (auto& x : v) x = rng.normal();
      for (auto& x : w) x = rng.normal();
      apply(v, av);
      apply(w, aw);
      const double a1 = dot(av, w);
      const double a2 = dot(v, aw);
      const double denom = std::max({std::abs(a1), std::abs(a2), 1e-30});
      if (std::abs(a1 - a2) > 1e-8 * denom) {
        std::ostringstream os;
        os << "lanczos_extreme_eigs: symmetry probe failed, |<Av,w> - <v,Aw>| = "
           << std::abs(a1 - a2) << " vs scale " << denom;
        throw std::invalid_argument(os.str());
      }
    }
  }

  const int max_iters = std::min<int>(iters, static_cast<int>(dim));
  std::vector<Vector> basis;
  basis.reserve(static_cast<std::size_t>(max_iters));
  Vector q(dim), w(dim);
  for (auto& x : q) x = rng.normal();
  scale(q, 1.0 / norm2(q));
  basis.push_back(q);

  std::vector<double> alpha, beta;  // beta[j] couples q_j and q_{j+1}
  double norm_scale = 0.0;
  int used = 0;
  for (int j = 0; j < max_iters; ++j) {
    apply(basis.back(), w);
    const double a = dot(w, basis.back());
    alpha.push_back(a);
    ++used;
    norm_scale = std::max(norm_scale, std::abs(a));
    axpy(-a, basis.back(), w);
    if (j > 0) axpy(-beta.back(), basis[basis.size() - 2], w);
    // full reorthogonalisation, two passes
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& u : basis) axpy(-dot(w, u), u, w);
    const double b = norm2(w);
    if (j + 1 == max_iters) break;
    if (b <= 1e-13 * std::max(norm_scale, 1.0)) break;  // breakdown
    beta.push_back(b);
    norm_scale = std::max(norm_scale, b);
    scale(w, 1.0 / b);
    basis.push_back(w);
  }

  // eigenvalues of the tridiagonal Ritz matrix
  std::vector<double> d = alpha;
  std::vector<double> e(d.size(), 0.0);
  for (std::size_t j = 1; j < d.size(); ++j) e[j] = beta[j - 1];
  detail::tridiag_eigenvalues(d, e);
  std::sort(d.begin(), d.end());

  SymmetricSpectrum out;
  out.lambda_min = d.empty() ? 0.0 : d.front();
  out.lambda_max = d.empty() ? 0.0 : d.back();
  out.method = SymmetricSpectrum::Method::lanczos;
  out.iterations = used;
  return out;
}

/// Largest singular value by power iteration on the Gram operator of the
/// smaller side. The estimate never exceeds the Frobenius norm.
inline double spectral_norm(const Matrix& m, int iters = 1000, std::uint64_t seed = 12345) {
  if (!all_finite(m)) throw std::invalid_argument("spectral_norm: non-finite entries");
  if (m.size() == 0) return 0.0;
  const double fro = frobenius_norm(m);
  if (fro == 0.0) return 0.0;

  const bool use_row_side = m.rows() <= m.cols();
  const std::size_t n = use_row_side ? m.rows() : m.cols();
  RngStream rng(seed, {0x5e37ull});
  Vector v(n), tmp(use_row_side ? m.cols() : m.rows()), bv(n);
  for (auto& x : v) x = rng.normal();
  scale(v, 1.0 / norm2(v));

  double lambda = 0.0;
  for (int it = 0; it < iters; ++it) {
    if (use_row_side) {
      matvec_transposed(m, v, tmp);  // tmp = M^T v
      matvec(m, tmp, bv);            // bv  = M tmp
    } else {
      matvec(m, v, tmp);
      matvec_transposed(m, tmp, bv);
    }
    const double nb = norm2(bv);
    if (nb == 0.0) return 0.0;
    const double next = dot(v, bv);
    scale(bv, 1.0 / nb);
    v = bv;
    if (it > 4 && std::abs(next - lambda) <= 1e-15 * std::max(std::abs(next), 1e-300)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  double sigma = std::sqrt(std::max(lambda, 0.0));
  if (sigma > fro * (1.0 + 1e-9))
    throw std::runtime_error("spectral_norm: estimate exceeds Frobenius norm");
  return std::min(sigma, fro);
}

/// Cholesky solve for symmetric positive-definite systems, with an explicit
/// smallest-eigenvalue floor and a verified residual.
inline Vector psd_solve(const Matrix& a, const Vector& rhs, double lambda_floor = 1e-12) {
  if (a.rows() != a.cols()) throw std::invalid_argument("psd_solve: matrix not square");
  if (rhs.size() != a.rows()) throw std::invalid_argument("psd_solve: rhs length mismatch");
  if (!all_finite(a) || !all_finite(rhs)) throw std::invalid_argument("psd_solve: non-finite input");
  const std::size_t n = a.rows();

  const auto eigs = symmetric_eigenvalues(a);
  if (eigs.front() <= lambda_floor) {
    std::ostringstream os;
    os << "psd_solve: lambda_min estimate " << eigs.front() << " at or below floor " << lambda_floor;
    throw std::invalid_argument(os.str());
  }

  // lower-triangular Cholesky factor of the symmetrised input
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = j; i < n; ++i) {
      double s = 0.5 * (a(i, j) + a(j, i));
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (s <= 0.0) throw std::runtime_error("psd_solve: Cholesky breakdown");
        l(j, j) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }

  auto solve_cholesky = [&](const Vector& b) {
    Vector y(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = b[i];
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
      y[i] = s / l(i, i);
    }
    Vector x(n);
    for (std::size_t i = n; i-- > 0;) {
      double s = y[i];
      for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
      x[i] = s / l(i, i);
    }
    return x;
  };

  Vector x = solve_cholesky(rhs);
  // one step of iterative refinement
  Vector r(n), ax(n);
  matvec(a, x, ax);
  for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - ax[i];
  const Vector dx = solve_cholesky(r);
  for (std::size_t i = 0; i < n; ++i) x[i] += dx[i];

  matvec(a, x, ax);
  for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - ax[i];
  const double rhs_norm = norm2(rhs);
  if (norm2(r) > 1e-8 * std::max(rhs_norm, 1e-300) && rhs_norm > 0.0)
    throw std::runtime_error("psd_solve: residual exceeds 1e-8 relative tolerance");
  return x;
}

}  // namespace gdlab
