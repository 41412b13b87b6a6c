#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace gdlab {

using Vector = std::vector<double>;

/// Dense column-major matrix. Column k is contiguous, so a d x m parameter
/// matrix exposes neuron k as the span col(k).
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[j * rows_ + i]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[j * rows_ + i]; }

  std::span<double> col(std::size_t j) { return {data_.data() + j * rows_, rows_}; }
  std::span<const double> col(std::size_t j) const { return {data_.data() + j * rows_, rows_}; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<const double> flat() const { return {data_.data(), data_.size()}; }
  std::span<double> flat() { return {data_.data(), data_.size()}; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(std::span<double> x, double alpha) {
  for (double& v : x) v *= alpha;
}

inline double frobenius_norm(const Matrix& m) { return norm2(m.flat()); }

inline double frobenius_dot(const Matrix& a, const Matrix& b) {
  return dot(a.flat(), b.flat());
}

inline Matrix operator-(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("matrix shape mismatch in subtraction");
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
  return out;
}

inline Matrix operator+(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("matrix shape mismatch in addition");
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
  return out;
}

/// a += alpha * b, elementwise over equal shapes.
inline void add_scaled(Matrix& a, double alpha, const Matrix& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("matrix shape mismatch in add_scaled");
  axpy(alpha, b.flat(), a.flat());
}

inline double max_abs(const Matrix& m) {
  double v = 0.0;
  for (double x : m.flat()) v = std::max(v, std::abs(x));
  return v;
}

inline double max_asymmetry(const Matrix& m) {
  double v = 0.0;
  for (std::size_t j = 0; j < m.cols(); ++j)
    for (std::size_t i = 0; i < j; ++i) v = std::max(v, std::abs(m(i, j) - m(j, i)));
  return v;
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline bool all_finite(const Matrix& m) { return all_finite(m.flat()); }

/// out = M * v  (rows x cols times cols)
inline void matvec(const Matrix& m, std::span<const double> v, std::span<double> out) {
  if (v.size() != m.cols() || out.size() != m.rows())
    throw std::invalid_argument("matvec dimension mismatch");
  for (double& o : out) o = 0.0;
  for (std::size_t j = 0; j < m.cols(); ++j) axpy(v[j], m.col(j), out);
}

/// out = M^T * v
inline void matvec_transposed(const Matrix& m, std::span<const double> v, std::span<double> out) {
  if (v.size() != m.rows() || out.size() != m.cols())
    throw std::invalid_argument("matvec_transposed dimension mismatch");
  for (std::size_t j = 0; j < m.cols(); ++j) out[j] = dot(m.col(j), v);
}

}  // namespace gdlab
