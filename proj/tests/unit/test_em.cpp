#include "support/fixtures.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mixlab;

namespace {

Vec v(std::initializer_list<double> xs) {
  Vec out(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs)
    out[i++] = x;
  return out;
}

} // namespace

TEST(PartitionFunctions, TruthIsFixedPoint) {
  std::mt19937_64 rng(21);
  const auto truth = fixtures::bernoulli_truth(rng, 5);
  const auto eng = ExpectationEngine::enumerate(truth);
  const auto z = partition_functions(truth.params(), eng);
  EXPECT_NEAR(z.z1(), 1.0, 1e-10);
  EXPECT_NEAR(z.z2(), 1.0, 1e-10);
}

TEST(PartitionFunctions, GaussianZ1BelowOne) {
  const auto truth = TrueMixture::canonical(MixtureFamily::gaussian(), 0.5, v({2.0}));
  const auto s = ModelState::two(1e-9, v({5.0}), v({3.0}));
  const double expected = 0.5 * (std::exp(-10.0) + std::exp(-2.0));
  const auto z = partition_functions(s, ExpectationEngine::closed_form(truth),
                                     EmMode::OneClusterApprox);
  EXPECT_NEAR(z.z1() / expected - 1.0, 0.0, 1e-12);
  EXPECT_EQ(z.z2(), 1.0);
  EXPECT_NEAR(expected, 0.06769, 5e-6);
}

TEST(PartitionFunctions, BernoulliOneClusterMatchesDirectSum) {
  std::mt19937_64 rng(22);
  for (int rep = 0; rep < 20; ++rep) {
    const auto truth = fixtures::bernoulli_truth(rng, 3);
    const Vec xbar = data_mean(truth);
    const Vec mu1 = fixtures::uniform_vec(rng, 3, 0.0, 1.0);
    const auto s = ModelState::two(0.0, mu1, xbar);
    const double expected = oracle::one_cluster_z1(truth.pi(), truth.params().means(), mu1, xbar);
    EXPECT_NEAR(partition_functions(s, ExpectationEngine::enumerate(truth),
                                    EmMode::OneClusterApprox).z1(), expected, 1e-12);
    EXPECT_NEAR(partition_functions(s, ExpectationEngine::closed_form(truth),
                                    EmMode::OneClusterApprox).z1(), expected, 1e-12);
  }
}

TEST(PartitionFunctions, ClosedFormRejectsFullMode) {
  const auto truth = TrueMixture::canonical(MixtureFamily::gaussian(), 0.5, v({2.0}));
  EXPECT_THROW(partition_functions(ModelState::two(0.5, v({1}), v({0})),
                                   ExpectationEngine::closed_form(truth)),
               std::invalid_argument);
}

TEST(EmStep, TruthIsFixedPoint) {
  std::mt19937_64 rng(23);
  const auto truth = fixtures::bernoulli_truth(rng, 4);
  const auto next = em_step(truth.params(), ExpectationEngine::enumerate(truth));
  EXPECT_LT((next.pi() - truth.pi()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((next.means() - truth.params().means()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(EmStep, FullModeMatchesDirectUpdate) {
  std::mt19937_64 rng(24);
  for (int rep = 0; rep < 20; ++rep) {
    const auto truth = fixtures::bernoulli_truth(rng, 4);
    const auto s = ModelState::two(0.3, fixtures::uniform_vec(rng, 4, 0.05, 0.95),
                                   fixtures::uniform_vec(rng, 4, 0.05, 0.95));
    Vec pi;
    Mat means;
    oracle::bernoulli_em_step(truth.pi(), truth.params().means(), s.pi(), s.means(), pi, means);
    const auto next = em_step(s, ExpectationEngine::enumerate(truth));
    EXPECT_LT((next.pi() - pi).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((next.means() - means).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(EmStep, OneClusterMovesMu2ToMeanInOneStep) {
  std::mt19937_64 rng(25);
  const auto truth = fixtures::bernoulli_truth(rng, 3);
  const auto s = ModelState::two(1e-6, v({0.2, 0.5, 0.9}), v({0.3, 0.3, 0.3}));
  const auto next = em_step(s, ExpectationEngine::enumerate(truth), EmMode::OneClusterApprox);
  EXPECT_LT((next.mu2() - data_mean(truth)).cwiseAbs().maxCoeff(), 1e-14);
  const Vec mu1 =
      oracle::one_cluster_mu1_update(truth.pi(), truth.params().means(), s.mu1(), s.mu2());
  EXPECT_LT((next.mu1() - mu1).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EmStep, GaussianOneClusterAgreesWithClosedForm) {
  const auto truth = TrueMixture::canonical(MixtureFamily::gaussian(), 0.6, v({1.0, 0.5}));
  const Vec xbar = data_mean(truth);
  const auto s = ModelState::two(1e-6, xbar + v({0.3, -0.1}), xbar);
  const auto closed = em_closed_gmm(s.mu1(), truth);
  const auto exact = em_step(s, ExpectationEngine::closed_form(truth), EmMode::OneClusterApprox);
  EXPECT_LT((exact.mu1() - closed.mu1_next).cwiseAbs().maxCoeff(), 1e-12);

  const auto sampled = em_step_detailed(s, ExpectationEngine::sampled(truth, 1000000, 3),
                                        EmMode::OneClusterApprox);
  // Loose check: the sample engine carries O(1e-3) Monte Carlo error.
  EXPECT_LT((sampled.next.mu1() - closed.mu1_next).cwiseAbs().maxCoeff(), 1e-2);
  EXPECT_NEAR(sampled.z.z1(), closed.z1, 1e-2);
}

TEST(EmStep, OneClusterWeightUpdate) {
  const auto truth = TrueMixture::canonical(MixtureFamily::gaussian(), 0.5, v({1.0}));
  const auto s = ModelState::two(1e-4, v({1.0}), v({0.0}));
  const auto step = em_step_detailed(s, ExpectationEngine::closed_form(truth),
                                     EmMode::OneClusterApprox);
  EXPECT_NEAR(step.next.pi1(), 1e-4 * std::cosh(1.0), 1e-18);
  EXPECT_NEAR(step.next.pi()[1], 1.0 - step.next.pi1(), 0.0);
}

TEST(RunEm, RejectsZeroBudget) {
  const auto truth = TrueMixture::canonical(MixtureFamily::gaussian(), 0.5, v({1.0}));
  StopRule stop;
  stop.max_steps = 0;
  EXPECT_THROW(run_em(ModelState::two(0.5, v({1}), v({0})), ExpectationEngine::closed_form(truth),
                      EmMode::OneClusterApprox, stop),
               std::invalid_argument);
}

TEST(RunEm, FullModeLossIsMonotone) {
  std::mt19937_64 rng(26);
  for (int rep = 0; rep < 5; ++rep) {
    const auto truth = fixtures::bernoulli_truth(rng, 5);
    const auto s = ModelState::two(0.4, fixtures::uniform_vec(rng, 5, 0.1, 0.9),
                                   fixtures::uniform_vec(rng, 5, 0.1, 0.9));
    StopRule stop;
    stop.max_steps = 200;
    stop.stop_on_escape = false;
    const auto traj = run_em(s, ExpectationEngine::enumerate(truth), EmMode::Full, stop);
    EXPECT_EQ(traj.monotone_violations, 0u);
    ASSERT_TRUE(traj.well_formed());
    for (std::size_t t = 1; t < traj.steps.size(); ++t)
      EXPECT_LE(traj.steps[t].loss, traj.steps[t - 1].loss + 1e-9);
  }
}

TEST(RunEm, OneClusterLogWeightIncrementIsLogZ1) {
  const auto truth = TrueMixture::canonical(MixtureFamily::gaussian(), 0.6, v({1.0, 0.5}));
  const Vec xbar = data_mean(truth);
  const auto s = ModelState::two(1e-6, xbar + v({0.4, 0.2}), xbar);
  StopRule stop;
  stop.max_steps = 100;
  const auto traj = run_em(s, ExpectationEngine::closed_form(truth), EmMode::OneClusterApprox, stop);
  ASSERT_EQ(traj.outcome, Outcome::Escaped);
  for (std::size_t t = 0; t + 1 < traj.steps.size(); ++t) {
    const double inc = std::log(traj.steps[t + 1].pi[0]) - std::log(traj.steps[t].pi[0]);
    EXPECT_GT(inc, 0.0);
    EXPECT_NEAR(inc, std::log(traj.steps[t].z[0]), 1e-12);
  }
}

TEST(RunEm, StopsAtEscapeAndRecordsIt) {
  const auto truth = TrueMixture::canonical(MixtureFamily::gaussian(), 0.5, v({1.0}));
  const auto s = ModelState::two(1e-6, v({1.0}), v({0.0}));
  StopRule stop;
  const auto traj = run_em(s, ExpectationEngine::closed_form(truth), EmMode::OneClusterApprox, stop);
  ASSERT_TRUE(traj.escape_step);
  EXPECT_EQ(*traj.escape_step + 1, traj.steps.size());
  EXPECT_GE(traj.back().pi[0], 0.01);
  EXPECT_LT(traj.steps[*traj.escape_step - 1].pi[0], 0.01);
}

TEST(EscapeTime, Definitions) {
  EXPECT_FALSE(escape_time(std::vector<double>(50, 1e-6), 0.01));
  std::vector<double> doubling;
  for (int t = 0; t < 30; ++t)
    doubling.push_back(1e-6 * std::pow(2.0, t));
  EXPECT_EQ(escape_time(doubling, 0.01), 14u);
  EXPECT_THROW(escape_time(doubling, 0.6), std::invalid_argument);
}
