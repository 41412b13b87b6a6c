#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gdlab/activation.hpp"
#include "gdlab/matrix.hpp"
#include "gdlab/rng.hpp"

namespace gdlab {

struct Sample {
  Vector x;
  double y = 0.0;
  friend bool operator==(const Sample& a, const Sample& b) = default;
};

/// Ordered training tuple. Order is significant: index i in the replace-one
/// tuple refers to this order.
struct Dataset {
  std::vector<Sample> samples;
  std::string spec_id;

  std::size_t size() const { return samples.size(); }
  const Sample& operator[](std::size_t i) const { return samples[i]; }
  friend bool operator==(const Dataset& a, const Dataset& b) { return a.samples == b.samples; }
};

enum class InputLaw { uniform_sphere, uniform_ball };
enum class NoiseLaw { none, uniform_bounded };
enum class TargetKind { teacher_logistic, linear, custom };

struct TargetFunction {
  TargetKind kind = TargetKind::linear;
  Vector w_star;
  std::function<double(std::span<const double>)> custom;  // only for kind == custom

  double operator()(std::span<const double> x) const {
    switch (kind) {
      case TargetKind::teacher_logistic:
        return sigmoid_phi(dot(w_star, x));
      case TargetKind::linear:
        return dot(w_star, x);
      case TargetKind::custom:
        if (!custom) throw std::invalid_argument("custom target function not set");
        return custom(x);
    }
    throw std::logic_error("unreachable");
  }
};

struct DataSpec {
  std::size_t d = 0;
  InputLaw input_law = InputLaw::uniform_sphere;
  TargetFunction target;
  double noise_sigma = 0.0;
  NoiseLaw noise_law = NoiseLaw::none;
  double c_x = 1.0;
  double c_y = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (d == 0) throw std::invalid_argument("DataSpec: d must be positive");
    if (c_x <= 0.0 || c_y <= 0.0) throw std::invalid_argument("DataSpec: c_x, c_y must be positive");
    if (noise_sigma < 0.0) throw std::invalid_argument("DataSpec: noise_sigma must be nonnegative");
    const bool has_noise = noise_law != NoiseLaw::none;
    if (has_noise != (noise_sigma > 0.0))
      throw std::invalid_argument("DataSpec: noise_law is none iff noise_sigma is zero");
    if (target.kind != TargetKind::custom && target.w_star.size() != d)
      throw std::invalid_argument("DataSpec: w_star length must equal d");
  }
};

namespace detail {

inline constexpr std::uint64_t kInputStream = 0x11ull;
inline constexpr std::uint64_t kNoiseStream = 0x22ull;
inline constexpr std::uint64_t kFreshStream = 0x33ull;
inline constexpr std::uint64_t kFig1Teacher = 0x44ull;

inline void draw_input(const DataSpec& spec, RngStream& rng, Vector& x) {
  x.resize(spec.d);
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (auto& v : x) {
      v = rng.normal();
      n2 += v * v;
    }
  } while (n2 == 0.0);
  double r = spec.c_x / std::sqrt(n2);
  if (spec.input_law == InputLaw::uniform_ball)
    r *= std::pow(rng.uniform01(), 1.0 / double(spec.d));
  for (auto& v : x) v *= r;
}

/// Zero-mean noise with std sigma, uniform on [-sqrt(3) sigma, sqrt(3) sigma].
inline double draw_noise(const DataSpec& spec, RngStream& rng) {
  if (spec.noise_law == NoiseLaw::none) return 0.0;
  const double half_width = std::sqrt(3.0) * spec.noise_sigma;
  return rng.uniform(-half_width, half_width);
}

inline Sample make_sample(const DataSpec& spec, RngStream& input_rng, RngStream& noise_rng,
                          std::size_t index_for_error) {
  Sample s;
  draw_input(spec, input_rng, s.x);
  s.y = spec.target(s.x) + draw_noise(spec, noise_rng);
  if (std::abs(s.y) > spec.c_y) {
    std::ostringstream os;
    os << "sample_dataset: label bound violated at index " << index_for_error << ": |y| = "
       << std::abs(s.y) << " > c_y = " << spec.c_y;
    throw std::runtime_error(os.str());
  }
  return s;
}

}  // namespace detail

/// n i.i.d. samples, deterministic given spec.seed. Noise draws use a stream
/// independent of the input draws.
inline Dataset sample_dataset(const DataSpec& spec, std::size_t n) {
  spec.validate();
  if (n == 0) throw std::invalid_argument("sample_dataset: n must be at least 1");
  RngStream input_rng(spec.seed, {detail::kInputStream});
  RngStream noise_rng(spec.seed, {detail::kNoiseStream});
  Dataset out;
  out.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    out.samples.push_back(detail::make_sample(spec, input_rng, noise_rng, i));
  return out;
}

/// Independent fresh copy of sample i for replicate r, from a dedicated
/// stream keyed by (seed, i, replicate) so paired runs are reproducible.
inline Sample fresh_sample(const DataSpec& spec, std::size_t i, std::size_t replicate) {
  spec.validate();
  RngStream input_rng(spec.seed, {detail::kFreshStream, i, replicate, 0});
  RngStream noise_rng(spec.seed, {detail::kFreshStream, i, replicate, 1});
  return detail::make_sample(spec, input_rng, noise_rng, i);
}

inline Dataset replace_one(const Dataset& data, std::size_t i, Sample fresh) {
  if (i >= data.size()) throw std::invalid_argument("replace_one: index out of range");
  Dataset out = data;
  out.samples[i] = std::move(fresh);
  return out;
}

inline Dataset remove_one(const Dataset& data, std::size_t i) {
  if (data.size() < 2) throw std::invalid_argument("remove_one: tuple must have at least 2 samples");
  if (i >= data.size()) throw std::invalid_argument("remove_one: index out of range");
  Dataset out;
  out.spec_id = data.spec_id;
  out.samples.reserve(data.size() - 1);
  for (std::size_t j = 0; j < data.size(); ++j)
    if (j != i) out.samples.push_back(data.samples[j]);
  return out;
}

/// Inputs uniform on the unit 10-sphere, logistic teacher with a Gaussian
/// w_star drawn once per seed, no label noise.
inline DataSpec fig1_spec(std::uint64_t seed) {
  DataSpec spec;
  spec.d = 10;
  spec.input_law = InputLaw::uniform_sphere;
  spec.c_x = 1.0;
  spec.c_y = 1.0;
  spec.noise_sigma = 0.0;
  spec.noise_law = NoiseLaw::none;
  spec.seed = seed;
  spec.target.kind = TargetKind::teacher_logistic;
  spec.target.w_star.resize(spec.d);
  RngStream teacher_rng(seed, {detail::kFig1Teacher});
  for (auto& v : spec.target.w_star) v = teacher_rng.normal();
  return spec;
}

}  // namespace gdlab
