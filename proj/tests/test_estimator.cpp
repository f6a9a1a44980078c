#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "qstatten/channel.hpp"
#include "qstatten/estimator.hpp"
#include "qstatten/metrics.hpp"
#include "qstatten/states.hpp"

using namespace qstatten;

namespace {

CholeskyParams params(int d, std::initializer_list<double> v) {
  CholeskyParams p{d, RealVector(static_cast<Eigen::Index>(v.size()))};
  Eigen::Index i = 0;
  for (double x : v) p.t(i++) = x;
  return p;
}

CholeskyParams random_params(int d, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CholeskyParams p{d, RealVector(d * d)};
  for (int i = 0; i < d * d; ++i) p.t(i) = u(gen);
  return p;
}

PovmSet povm_for(int d) {
  if (d == 4) return product_povm(sic_povm(2), sic_povm(2));
  if (d == 9) return product_povm(sic_povm(3), sic_povm(3));
  return sic_povm(d);
}

}  // namespace

TEST(ParamsToDensity, Examples) {
  const ComplexMatrix a = params_to_density(params(2, {1, 0, 0, 0})).matrix();
  EXPECT_LT(oracle::max_abs_diff(a, ComplexMatrix(Eigen::Vector2cd(1.0, 0.0).asDiagonal())), 1e-15);
  const ComplexMatrix b = params_to_density(params(2, {1, 1, 0, 0})).matrix();
  EXPECT_LT(oracle::max_abs_diff(b, ComplexMatrix::Identity(2, 2) / 2.0), 1e-15);
}

TEST(ParamsToDensity, ScaleInvariant) {
  std::mt19937_64 gen(21);
  for (int d : {2, 3, 4, 9}) {
    const CholeskyParams p = random_params(d, gen);
    const ComplexMatrix base = params_to_density(p).matrix();
    for (double c : {-3.0, 0.01, 250.0}) {
      const CholeskyParams q{d, c * p.t};
      EXPECT_LT(oracle::max_abs_diff(params_to_density(q).matrix(), base), 1e-13) << d << " " << c;
    }
  }
}

TEST(ParamsToDensity, DegenerateAndMalformed) {
  EXPECT_THROW(params_to_density(params(2, {0, 0, 0, 0})), DegenerateParametersError);
  EXPECT_THROW(params_to_density(params(2, {1, 0, 0})), std::invalid_argument);
  EXPECT_THROW(params_to_density(params(2, {1, std::nan(""), 0, 0})), std::invalid_argument);
}

TEST(ParamsToDensity, FuzzAlwaysValid) {
  std::mt19937_64 gen(22);
  std::uniform_real_distribution<double> exponent(-4.0, 4.0);
  for (int trial = 0; trial < 10000; ++trial) {
    const int d = std::array{2, 3, 4, 9}[trial % 4];
    CholeskyParams p = random_params(d, gen);
    p.t *= std::pow(10.0, exponent(gen));
    const DensityMatrix rho = params_to_density(p);  // validates on construction
    ASSERT_LE(hermiticity_defect(rho.matrix()), 1e-12);
    ASSERT_NEAR(rho.matrix().trace().real(), 1.0, 1e-12);
  }
}

TEST(LsObjective, Examples) {
  const PovmSet q = sic_povm(2);
  const CholeskyParams mixed = params(2, {1, 1, 0, 0});
  EXPECT_NEAR(ls_objective(mixed, CountVector{{25, 25, 25, 25}}, q, 100), 0.0, 1e-20);
  EXPECT_NEAR(ls_objective(mixed, CountVector{{0, 0, 0, 0}}, q, 100), 2500.0, 1e-9);

  std::mt19937_64 gen(23);
  ReconstructionOptions rounded;
  rounded.model_counts = ModelCounts::rounded;
  for (int d : {2, 3}) {
    const CholeskyParams p = random_params(d, gen);
    const CountVector exact = expected_counts(params_to_density(p), povm_for(d), 1234);
    EXPECT_EQ(ls_objective(p, exact, povm_for(d), 1234, rounded), 0.0);
  }
  EXPECT_THROW(ls_objective(mixed, CountVector{{1, 2, 3}}, q, 100), std::invalid_argument);
}

TEST(LsObjective, ScaleInvariant) {
  std::mt19937_64 gen(24);
  for (int d : {2, 3, 4}) {
    const PovmSet p = povm_for(d);
    const CholeskyParams t = random_params(d, gen);
    RngStream rng(5, static_cast<std::uint64_t>(d));
    const CountVector m = draw_measured_counts(DensityMatrix::maximally_mixed(d), p, 500,
                                               std::vector<FiberSpec>(static_cast<std::size_t>(p.parties()),
                                                                      FiberSpec{0.2, 10.0}),
                                               rng);
    const double f = ls_objective(t, m, p, 500);
    for (double c : {-2.0, 0.5, 40.0}) EXPECT_NEAR(ls_objective(CholeskyParams{d, c * t.t}, m, p, 500), f, 1e-9);
  }
}

TEST(LsObjective, AnalyticGradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(25);
  for (int d : {2, 3, 4, 9}) {
    const PovmSet p = povm_for(d);
    RngStream rng(6, static_cast<std::uint64_t>(d));
    const DensityMatrix truth = DensityMatrix::from_matrix(oracle::random_density(d, gen));
    const CountVector m = draw_measured_counts(truth, p, 1000,
                                               std::vector<FiberSpec>(static_cast<std::size_t>(p.parties()),
                                                                      FiberSpec{0.2, 20.0}),
                                               rng);
    const LsObjective obj(p, m, 1000, ReconstructionOptions{});
    for (int trial = 0; trial < 3; ++trial) {
      const RealVector t = random_params(d, gen).t;
      RealVector g(t.size());
      obj(t, &g);
      const RealVector fd = obj.finite_difference_gradient(t);
      EXPECT_LE((g - fd).lpNorm<Eigen::Infinity>(), 1e-5 * std::max(1.0, g.lpNorm<Eigen::Infinity>())) << d;
    }
  }
}

TEST(Reconstruct, NoiselessPureQubitRecovered) {
  std::mt19937_64 gen(26);
  const PovmSet p = sic_povm(2);
  for (int trial = 0; trial < 10; ++trial) {
    const PureState psi = PureState::normalized(oracle::random_ket(2, gen));
    const DensityMatrix rho = DensityMatrix::from_pure(psi);
    const CountVector m = expected_counts(rho, p, 1000000);
    const auto res = reconstruct(m, p, 1000000, {}, RngStream(1, static_cast<std::uint64_t>(trial)));
    EXPECT_GE(fidelity(rho, res.rho_hat).value, 0.999);
    EXPECT_TRUE(res.converged);
    EXPECT_EQ(res.restarts_used, 5);
  }
}

TEST(Reconstruct, MaximallyMixedRecovered) {
  const PovmSet p = sic_povm(2);
  const CountVector m = expected_counts(DensityMatrix::maximally_mixed(2), p, 10000);
  const auto res = reconstruct(m, p, 10000, {}, RngStream(2, 0));
  EXPECT_LT(oracle::max_abs_diff(res.rho_hat.matrix(), ComplexMatrix::Identity(2, 2) / 2.0), 5e-3);
}

TEST(Reconstruct, ZeroPhotonsGivesValidState) {
  for (int d : {2, 4}) {
    const PovmSet p = povm_for(d);
    const CountVector m{std::vector<std::int64_t>(static_cast<std::size_t>(p.eta()), 0)};
    const auto res = reconstruct(m, p, 0, {}, RngStream(3, 0));
    EXPECT_EQ(res.rho_hat.dim(), d);
    EXPECT_EQ(res.objective_value, 0.0);
    EXPECT_TRUE(res.converged);
  }
}

TEST(Reconstruct, NeverWorseThanTruth) {
  std::mt19937_64 gen(27);
  for (int trial = 0; trial < 60; ++trial) {
    const int d = std::array{2, 3, 4}[trial % 3];
    const PovmSet p = povm_for(d);
    const DensityMatrix truth = trial % 2 == 0 ? DensityMatrix::from_pure(PureState::normalized(oracle::random_ket(d, gen)))
                                               : DensityMatrix::from_matrix(oracle::random_density(d, gen));
    RngStream rng(7, static_cast<std::uint64_t>(trial));
    const CountVector m = draw_measured_counts(truth, p, 300,
                                               std::vector<FiberSpec>(static_cast<std::size_t>(p.parties()),
                                                                      FiberSpec{0.2, 15.0}),
                                               rng);
    const LsObjective obj(p, m, 300, {});
    const auto res = reconstruct(m, p, 300, {}, rng.child(100));
    EXPECT_LE(obj.value(res.rho_hat), obj.value(truth) + 1e-6) << "trial " << trial;
    EXPECT_NEAR(obj.value(res.rho_hat), res.objective_value, 1e-6 * std::max(1.0, res.objective_value));
  }
}

TEST(Reconstruct, InfidelityFallsWithPhotonNumber) {
  const PovmSet p = sic_povm(2);
  const StateSample sample = qubit_sample();
  std::vector<double> means;
  std::vector<double> errors;
  for (std::int64_t n : {100, 1000, 10000, 100000}) {
    std::vector<double> infid;
    for (int s = 0; s < 20; ++s) {
      const PureState& psi = sample.states[static_cast<std::size_t>(11 * s)];
      const DensityMatrix rho = DensityMatrix::from_pure(psi);
      for (int r = 0; r < 50; ++r) {
        RngStream rng(8, static_cast<std::uint64_t>(1000 * s + r));
        const CountVector m = draw_measured_counts(rho, p, n, {FiberSpec{0.2, 0.0}}, rng);
        const auto res = reconstruct(m, p, n, {}, rng.child(100));
        infid.push_back(1.0 - fidelity(psi, res.rho_hat).value);
      }
    }
    double mean = 0.0;
    for (double x : infid) mean += x;
    mean /= static_cast<double>(infid.size());
    double var = 0.0;
    for (double x : infid) var += (x - mean) * (x - mean);
    var /= static_cast<double>(infid.size() - 1);
    means.push_back(mean);
    errors.push_back(std::sqrt(var / static_cast<double>(infid.size())));
  }
  for (std::size_t i = 0; i + 1 < means.size(); ++i) {
    EXPECT_GT(means[i] - means[i + 1], 3.0 * std::hypot(errors[i], errors[i + 1]))
        << "N index " << i << ": " << means[i] << " vs " << means[i + 1];
  }
}

TEST(Reconstruct, RoundedModeFitsExactCounts) {
  std::mt19937_64 gen(28);
  const PovmSet p = sic_povm(2);
  ReconstructionOptions opts;
  opts.model_counts = ModelCounts::rounded;
  const PureState psi = PureState::normalized(oracle::random_ket(2, gen));
  const CountVector m = expected_counts(DensityMatrix::from_pure(psi), p, 10000);
  const auto res = reconstruct(m, p, 10000, opts, RngStream(9, 0));
  EXPECT_LE(res.objective_value, 4.0);
  EXPECT_GE(fidelity(psi, res.rho_hat).value, 0.999);
}

TEST(Reconstruct, FiniteDifferenceModeAgreesWithAnalytic) {
  const PovmSet p = product_povm(sic_povm(2), sic_povm(2));
  RngStream rng(10, 0);
  const CountVector m = draw_measured_counts(DensityMatrix::from_pure(phi_family(0.4)), p, 200,
                                             {FiberSpec{0.2, 10.0}, FiberSpec{0.2, 10.0}}, rng);
  ReconstructionOptions fd;
  fd.gradient = GradientMode::finite_difference;
  const auto a = reconstruct(m, p, 200, {}, rng.child(1));
  const auto b = reconstruct(m, p, 200, fd, rng.child(1));
  EXPECT_NEAR(a.objective_value, b.objective_value, 1e-6 * std::max(1.0, a.objective_value));
  EXPECT_GE(fidelity(a.rho_hat, b.rho_hat).value, 1.0 - 1e-6);
}

TEST(ReconstructionOptions, Validation) {
  ReconstructionOptions o;
  o.restarts = 0;
  EXPECT_THROW(o.validate(), std::invalid_argument);
  o = {};
  o.objective_tolerance = 0.0;
  EXPECT_THROW(o.validate(), std::invalid_argument);
}
