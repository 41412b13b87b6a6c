#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gdlab/activation.hpp"
#include "gdlab/matrix.hpp"
#include "gdlab/rng.hpp"

namespace gdlab {

struct ProblemConstants {
  double c_x = 1.0;  // input-ball radius
  double c_y = 1.0;  // label bound
  double c_0 = 1.0;  // almost-sure loss bound

  void validate() const {
    if (c_x <= 0.0 || c_y <= 0.0 || c_0 <= 0.0)
      throw std::invalid_argument("ProblemConstants: all constants must be strictly positive");
  }
};

/// One-hidden-layer predictor with a fixed +-1/sqrt(m) output layer. The m
/// hidden weights live in the columns of w; output weight k is
/// u_signs[k]/sqrt(m), kept as sign + scale so its magnitude is exact.
struct ShallowNet {
  std::size_t d = 0;
  std::size_t m = 0;
  Matrix w;  // d x m
  std::vector<std::int8_t> u_signs;
  ActivationSpec activation;

  double u_scale() const { return 1.0 / std::sqrt(static_cast<double>(m)); }
  double u(std::size_t k) const { return static_cast<double>(u_signs[k]) * u_scale(); }
};

enum class WeightInit { zero, gaussian };
enum class OutputMode { alternating, rademacher };

struct NetInit {
  WeightInit weights = WeightInit::zero;
  double nu_init = 1.0;  // std of Gaussian entries when weights == gaussian
  OutputMode u_mode = OutputMode::alternating;
};

inline ShallowNet make_net(std::size_t d, std::size_t m, const ActivationSpec& activation,
                           const NetInit& init = {}, std::uint64_t seed = 0) {
  if (d == 0 || m == 0) throw std::invalid_argument("make_net: d and m must be positive");
  ShallowNet net;
  net.d = d;
  net.m = m;
  net.activation = activation;
  net.w = Matrix(d, m);
  if (init.weights == WeightInit::gaussian) {
    RngStream rng(seed, {0x77ull, 0});
    for (std::size_t i = 0; i < net.w.size(); ++i) net.w.data()[i] = init.nu_init * rng.normal();
  }
  net.u_signs.resize(m);
  if (init.u_mode == OutputMode::alternating) {
    for (std::size_t k = 0; k < m; ++k) net.u_signs[k] = (k % 2 == 0) ? 1 : -1;
  } else {
    RngStream rng(seed, {0x77ull, 1});
    for (std::size_t k = 0; k < m; ++k) net.u_signs[k] = static_cast<std::int8_t>(rng.sign());
  }
  return net;
}

inline double forward(const ShallowNet& net, std::span<const double> x) {
  if (x.size() != net.d) throw std::invalid_argument("forward: input dimension mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < net.m; ++k)
    acc += static_cast<double>(net.u_signs[k]) * net.activation.phi(dot(net.w.col(k), x));
  const double out = acc * net.u_scale();
  const double cap = std::sqrt(static_cast<double>(net.m)) * net.activation.b_phi;
  if (std::abs(out) > cap * (1.0 + 1e-12) + 1e-12)
    throw std::runtime_error("forward: output exceeds sqrt(m)*b_phi envelope");
  return out;
}

// --- snapshot serialisation (bit-exact round trip) ---

inline nlohmann::json net_to_json(const ShallowNet& net) {
  nlohmann::json j;
  j["d"] = net.d;
  j["m"] = net.m;
  j["activation"] = net.activation.name;
  std::vector<int> signs(net.u_signs.begin(), net.u_signs.end());
  j["u_signs"] = signs;
  std::vector<double> w_row_major;
  w_row_major.reserve(net.w.size());
  for (std::size_t i = 0; i < net.d; ++i)
    for (std::size_t k = 0; k < net.m; ++k) w_row_major.push_back(net.w(i, k));
  j["w_row_major"] = w_row_major;
  return j;
}

inline ShallowNet net_from_json(const nlohmann::json& j) {
  ShallowNet net;
  net.d = j.at("d").get<std::size_t>();
  net.m = j.at("m").get<std::size_t>();
  net.activation = activation_by_name(j.at("activation").get<std::string>());
  const auto signs = j.at("u_signs").get<std::vector<int>>();
  if (signs.size() != net.m) throw std::invalid_argument("net_from_json: u_signs length mismatch");
  net.u_signs.resize(net.m);
  for (std::size_t k = 0; k < net.m; ++k) {
    if (signs[k] != 1 && signs[k] != -1)
      throw std::invalid_argument("net_from_json: u_signs entries must be +-1");
    net.u_signs[k] = static_cast<std::int8_t>(signs[k]);
  }
  const auto w = j.at("w_row_major").get<std::vector<double>>();
  if (w.size() != net.d * net.m) throw std::invalid_argument("net_from_json: w length mismatch");
  net.w = Matrix(net.d, net.m);
  std::size_t idx = 0;
  for (std::size_t i = 0; i < net.d; ++i)
    for (std::size_t k = 0; k < net.m; ++k) net.w(i, k) = w[idx++];
  return net;
}

}  // namespace gdlab
