#include "gdlab/ntk.hpp"

#include <gtest/gtest.h>

#include "gdlab/optimize.hpp"
#include "support/oracles.hpp"

using namespace gdlab;

TEST(FeatureMatrix, ZeroInputsGiveZeroMatrix) {
  const ShallowNet net = oracle::random_net(3, 5, 1);
  Dataset data;
  for (int i = 0; i < 4; ++i) data.samples.push_back(Sample{Vector(3, 0.0), 0.5});
  EXPECT_DOUBLE_EQ(max_abs(feature_matrix(net, data)), 0.0);
}

TEST(FeatureMatrix, SingleNeuronSingleSampleColumn) {
  ShallowNet net = make_net(2, 1, sigmoid_activation(), {WeightInit::gaussian, 0.7}, 3);
  Dataset data;
  data.samples.push_back(oracle::random_sphere_sample(2, 5));
  const Matrix phi = feature_matrix(net, data);
  ASSERT_EQ(phi.rows(), 2u);
  ASSERT_EQ(phi.cols(), 1u);
  const double coef = net.u(0) * sigmoid_phi_prime(dot(net.w.col(0), data[0].x));
  EXPECT_NEAR(phi(0, 0), coef * data[0].x[0], 1e-15);
  EXPECT_NEAR(phi(1, 0), coef * data[0].x[1], 1e-15);
}

TEST(EmpiricalGram, GramIdentityAgainstFactoredRoute) {
  const ShallowNet net = oracle::random_net(4, 30, 7);
  const Dataset data = oracle::random_dataset(8, 4, 9);
  EXPECT_NO_THROW(verify_gram_identity(net, data, 1e-10));
}

TEST(EmpiricalGram, OrthogonalInputsGiveDiagonal) {
  const std::size_t d = 5, n = 3;
  const ShallowNet net = oracle::random_net(d, 6, 11);
  Dataset data;
  for (std::size_t i = 0; i < n; ++i) {
    Sample z;
    z.x.assign(d, 0.0);
    z.x[i] = 0.8;
    data.samples.push_back(z);
  }
  const Matrix k = empirical_gram(net, data);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) {
        EXPECT_NEAR(k(i, j), 0.0, 1e-15);
      }
}

TEST(EmpiricalGram, ConstantSlopeClosedForm) {
  // linear activation has phi' == 1, so K^_11 = |x|^2 / n = 1 for a unit input
  const ShallowNet net = make_net(3, 9, linear_activation());
  Dataset data;
  Sample z = oracle::random_sphere_sample(3, 13);
  data.samples.push_back(z);
  const Matrix k = empirical_gram(net, data);
  EXPECT_NEAR(k(0, 0), 1.0, 1e-12);
}

TEST(EmpiricalGram, PsdOnRandomInstances) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ShallowNet net = oracle::random_net(4, 25, 100 + seed);
    const Dataset data = oracle::random_dataset(7, 4, 200 + seed);
    const auto eigs = symmetric_eigenvalues(empirical_gram(net, data));
    EXPECT_GE(eigs.front(), -1e-10);
  }
}

TEST(ExpectedGram, DegenerateConstantSlopeIsExact) {
  const Dataset data = oracle::random_dataset(5, 3, 17);
  const GramPair pair = expected_gram(data, linear_activation(), 1.0, 500, 19);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      EXPECT_NEAR(pair.k_expected(i, j), dot(data[i].x, data[j].x) / 5.0, 1e-12);
      EXPECT_NEAR(pair.k_std_err(i, j), 0.0, 1e-12);
    }
}

TEST(ExpectedGram, OrthogonalInputsVanish) {
  Dataset data;
  for (std::size_t i = 0; i < 3; ++i) {
    Sample z;
    z.x.assign(4, 0.0);
    z.x[i] = 1.0;
    data.samples.push_back(z);
  }
  const GramPair pair = expected_gram(data, sigmoid_activation(), 1.0, 2000, 23);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (i != j) {
        EXPECT_NEAR(pair.k_expected(i, j), 0.0, 1e-15);
      }
}

TEST(ExpectedGram, EmpiricalConvergesAtRootMRate) {
  const Dataset data = oracle::random_dataset(10, 5, 29);
  const GramPair expected = expected_gram(data, sigmoid_activation(), 1.0, 200000, 31);
  std::vector<double> scaled_gaps;
  for (std::size_t m : {std::size_t{100}, std::size_t{1000}, std::size_t{10000}}) {
    const ShallowNet net =
        make_net(5, m, sigmoid_activation(), {WeightInit::gaussian, 1.0, OutputMode::rademacher}, 37);
    const double gap = max_abs(empirical_gram(net, data) - expected.k_expected);
    scaled_gaps.push_back(gap * std::sqrt(double(m)));
  }
  const auto [lo, hi] = std::minmax_element(scaled_gaps.begin(), scaled_gaps.end());
  EXPECT_LE(*hi / *lo, 3.0) << "scaled gaps: " << scaled_gaps[0] << " " << scaled_gaps[1] << " "
                            << scaled_gaps[2];
}

TEST(GramConcentration, ZeroDeviationHoldsWithFullSlack) {
  const ShallowNet net = oracle::random_net(3, 15, 41);
  const Dataset data = oracle::random_dataset(6, 3, 43);
  const Matrix k = empirical_gram(net, data);
  const auto res = gram_concentration_audit(k, k, net.m, 0.1, net.activation.b_phi_prime);
  EXPECT_EQ(res.spectral_report.verdict, BoundReport::Verdict::holds);
  EXPECT_DOUBLE_EQ(res.spectral_report.measured, 0.0);
  EXPECT_GT(res.spectral_report.slack, 0.0);
  EXPECT_EQ(res.frobenius_report.verdict, BoundReport::Verdict::holds);
}

TEST(GramConcentration, DeltaOneIsLoosestBound) {
  const ShallowNet net = oracle::random_net(3, 15, 47);
  const Dataset data = oracle::random_dataset(6, 3, 53);
  const Matrix k = empirical_gram(net, data);
  const auto tight = gram_concentration_audit(k, k, net.m, 0.1, net.activation.b_phi_prime);
  const auto loose = gram_concentration_audit(k, k, net.m, 1.0, net.activation.b_phi_prime);
  EXPECT_LT(loose.spectral_report.bound, tight.spectral_report.bound);
}

TEST(LinearizedRisk, AtInitRawAndResidualVariants) {
  const ShallowNet net0 = oracle::random_net(4, 8, 59);
  const Dataset data = oracle::random_dataset(6, 4, 61);
  double raw = 0.0, res = 0.0;
  for (const auto& z : data.samples) {
    raw += 0.5 * z.y * z.y;
    const double r = z.y - forward(net0, z.x);
    res += 0.5 * r * r;
  }
  EXPECT_NEAR(linearized_risk(net0, net0, data, LinearisedTarget::raw), raw, 1e-12);
  EXPECT_NEAR(linearized_risk(net0, net0, data, LinearisedTarget::residual), res, 1e-12);
}

TEST(LinearizedRisk, PinvResidualInterpolates) {
  const ShallowNet net0 = oracle::random_net(5, 12, 67);
  const Dataset data = oracle::random_dataset(7, 5, 71);
  const PinvSolution sol = pinv_linear_solution(net0, data);
  EXPECT_LE(linearized_risk(net0, sol.net, data, LinearisedTarget::residual), 1e-10);
}

TEST(LinearizedRisk, QuadraticScalingWithZeroTargets) {
  const ShallowNet net0 = oracle::random_net(4, 6, 73);
  Dataset data = oracle::random_dataset(5, 4, 79);
  for (auto& z : data.samples) z.y = 0.0;
  ShallowNet cand = net0;
  add_scaled(cand.w, 0.3, oracle::random_net(4, 6, 83).w);
  ShallowNet cand2 = net0;
  add_scaled(cand2.w, 0.6, oracle::random_net(4, 6, 83).w);
  const double r1 = linearized_risk(net0, cand, data, LinearisedTarget::raw);
  const double r2 = linearized_risk(net0, cand2, data, LinearisedTarget::raw);
  EXPECT_NEAR(r2, 4.0 * r1, 1e-9 * r2);
}

TEST(TaylorErrorAudit, ExactCases) {
  const ShallowNet net0 = oracle::random_net(4, 9, 89);
  const Sample z = oracle::random_sphere_sample(4, 97);
  const auto same = taylor_error_audit(net0, net0, z.x);
  EXPECT_DOUBLE_EQ(same.measured, 0.0);
  EXPECT_DOUBLE_EQ(same.bound, 0.0);
  EXPECT_EQ(same.verdict, BoundReport::Verdict::holds);

  const ShallowNet lin0 = make_net(4, 9, linear_activation(), {WeightInit::gaussian, 0.5}, 3);
  ShallowNet lin1 = lin0;
  add_scaled(lin1.w, 1.0, oracle::random_net(4, 9, 101).w);
  const auto linear_case = taylor_error_audit(lin0, lin1, z.x);
  EXPECT_LE(linear_case.measured, 1e-12);
}

TEST(TaylorErrorAudit, HoldsOnRandomPerturbations) {
  for (std::size_t m : {std::size_t{100}, std::size_t{10000}}) {
    const ShallowNet net0 =
        make_net(6, m, sigmoid_activation(), {WeightInit::gaussian, 1.0, OutputMode::rademacher}, 5);
    RngStream rng(7);
    for (int trial = 0; trial < 20; ++trial) {
      ShallowNet cand = net0;
      const double scl = rng.uniform(0.01, 2.0);
      for (std::size_t i = 0; i < cand.w.size(); ++i) cand.w.data()[i] += scl * rng.normal();
      const Sample z = oracle::random_sphere_sample(6, 1000 + trial);
      const auto rep = taylor_error_audit(net0, cand, z.x);
      ASSERT_EQ(rep.verdict, BoundReport::Verdict::holds) << "m=" << m << " trial=" << trial;
    }
  }
}

TEST(NtkOracleQuantity, ZeroResidualAndScalarClosedForm) {
  const ShallowNet net = oracle::random_net(3, 7, 103);
  const Dataset data = oracle::random_dataset(4, 3, 107);
  const Matrix k = empirical_gram(net, data);
  Vector y(4), yhat(4);
  for (std::size_t i = 0; i < 4; ++i) {
    yhat[i] = forward(net, data[i].x);
    y[i] = yhat[i];
  }
  const auto zero = ntk_oracle_quantity(y, yhat, k, NtkOracleResult::Gram::empirical);
  EXPECT_NEAR(zero.quad_form, 0.0, 1e-14);

  // n = 1
  Dataset single;
  single.samples.push_back(data[0]);
  const Matrix k1 = empirical_gram(net, single);
  const Vector y1{0.9}, yhat1{forward(net, single[0].x)};
  const auto res = ntk_oracle_quantity(y1, yhat1, k1, NtkOracleResult::Gram::empirical);
  const double r = y1[0] - yhat1[0];
  EXPECT_NEAR(res.quad_form, r * r / (1.0 * k1(0, 0)), 1e-10 * res.quad_form);
}

TEST(NtkOracleQuantity, MatchesPinvNormOracle) {
  const ShallowNet net0 = oracle::random_net(5, 14, 109);
  const Dataset data = oracle::random_dataset(8, 5, 113);
  const PinvSolution sol = pinv_linear_solution(net0, data);
  const Matrix k = empirical_gram(net0, data);
  Vector y(8), yhat(8);
  for (std::size_t i = 0; i < 8; ++i) {
    y[i] = data[i].y;
    yhat[i] = forward(net0, data[i].x);
  }
  const auto res = ntk_oracle_quantity(y, yhat, k, NtkOracleResult::Gram::empirical);
  EXPECT_NEAR(res.quad_form, sol.sq_norm, 1e-8 * sol.sq_norm);
}

TEST(NtkOracleQuantity, FloorViolationRejected) {
  Matrix k(2, 2);  // singular gram
  k(0, 0) = 1.0;
  EXPECT_THROW(
      ntk_oracle_quantity(Vector{1.0, 1.0}, Vector{0.0, 0.0}, k, NtkOracleResult::Gram::empirical),
      std::invalid_argument);
}
