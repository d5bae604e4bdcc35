#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "nvar/evaluation.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using nvar::DenseMatrix;
using nvar::Method;
using nvar::NvarModel;

namespace {

NvarModel dense_model(std::vector<DenseMatrix> coeffs) {
  NvarModel m;
  m.p = coeffs.front().rows();
  m.q = coeffs.size();
  m.coeffs = std::move(coeffs);
  m.radius = std::numeric_limits<double>::infinity();
  m.distance = nvar::DistanceMatrix(m.p);
  return m;
}

nvar::SeriesPanel white_noise(std::size_t p, std::size_t n, std::uint64_t seed) {
  nvar::CounterRng rng(seed);
  DenseMatrix v(p, n);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t t = 0; t < n; ++t) v(i, t) = rng.normal();
  return nvar::SeriesPanel(std::move(v));
}

nvar::MonteCarloConfig small_config() {
  nvar::MonteCarloConfig config;
  config.case_id = 1;
  config.p = 12;
  config.d0 = 1;
  config.n = 80;
  config.reps = 4;
  config.seed = 17;
  config.threads = 1;
  return config;
}

}  // namespace

TEST(CoefficientErrors, Examples) {
  const auto a = dense_model({DenseMatrix::identity(3)});
  const auto zero = nvar::coefficient_errors(a, a);
  EXPECT_EQ(zero.l2, 0.0);
  EXPECT_EQ(zero.frob, 0.0);
  const auto b = dense_model({DenseMatrix::diagonal(std::vector<double>{1, 1, 4})});
  const auto e = nvar::coefficient_errors(b, a);
  EXPECT_NEAR(e.l2, 3.0, 1e-12);
  EXPECT_NEAR(e.frob, 3.0, 1e-12);
  expect_code(nvar::ErrorCode::ShapeMismatch,
              [&] { nvar::coefficient_errors(dense_model({DenseMatrix::identity(2)}), a); });
}

TEST(CoefficientErrors, MatchSvdOracle) {
  nvar::CounterRng rng(61);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = oracle::random_count(rng, 1, 30);
    const auto est = dense_model({oracle::random_matrix(rng, p, p)});
    const auto truth = dense_model({oracle::random_matrix(rng, p, p)});
    const auto e = nvar::coefficient_errors(est, truth);
    const Eigen::MatrixXd diff = oracle::to_eigen(est.coeffs[0]) - oracle::to_eigen(truth.coeffs[0]);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(diff);
    EXPECT_NEAR(e.l2, svd.singularValues()(0), 1e-8 * svd.singularValues()(0));
    EXPECT_NEAR(e.frob, diff.norm(), 1e-12 * diff.norm());
  }
}

TEST(Mspe, PerfectModelOnNoiselessData) {
  // y(t+1) = 0.5 y(t) exactly: a correct model predicts without error.
  DenseMatrix v(2, 40);
  v(0, 0) = 1.0;
  v(1, 0) = -2.0;
  for (std::size_t t = 1; t < 40; ++t)
    for (std::size_t i = 0; i < 2; ++i) v(i, t) = 0.5 * v(i, t - 1);
  const auto model = dense_model({0.5 * DenseMatrix::identity(2)});
  EXPECT_NEAR(nvar::mspe_one_step(model, nvar::SeriesPanel(v), 0.5, 10), 0.0, 1e-30);
}

TEST(Mspe, ZeroModelOnWhiteNoise) {
  const auto panel = white_noise(20, 4000, 62);
  const auto model = dense_model({DenseMatrix(20, 20)});
  EXPECT_NEAR(nvar::mspe_one_step(model, panel, 0.5, 1999), 1.0, 0.03);
}

TEST(Mspe, HandComputed) {
  const DenseMatrix v(1, 6, std::vector<double>{9, 9, 9, 1, 2, 5});
  const auto model = dense_model({DenseMatrix(1, 1, 2.0)});
  // train = 3; history column 3 (value 1) seeds; predict 2 and 4 against 2 and 5.
  EXPECT_NEAR(nvar::mspe_one_step(model, nvar::SeriesPanel(v), 0.5, 2), (0.0 + 1.0) / 2.0, 1e-15);
}

TEST(Mspe, InsufficientTestSpan) {
  const auto panel = white_noise(3, 20, 63);
  const auto model = dense_model({DenseMatrix(3, 3)});
  EXPECT_EQ(nvar::max_horizon(20, 0.8, 1), 3u);
  EXPECT_NO_THROW(nvar::mspe_one_step(model, panel, 0.8, 3));
  expect_code(nvar::ErrorCode::InsufficientTestSpan, [&] { nvar::mspe_one_step(model, panel, 0.8, 4); });
}

TEST(Mspe, UsesObservedHistoryForLagTwo) {
  const DenseMatrix v(1, 8, std::vector<double>{0, 0, 0, 0, 1, 2, 3, 4});
  const auto model = dense_model({DenseMatrix(1, 1, 1.0), DenseMatrix(1, 1, 0.0)});
  // Each prediction equals the last observed value: errors are all 1.
  EXPECT_NEAR(nvar::mspe_one_step(model, nvar::SeriesPanel(v), 0.5, 2), 1.0, 1e-15);
}

TEST(Methods, RoundTripNames) {
  for (Method m : {Method::Nvar, Method::Bvar, Method::Lasso})
    EXPECT_EQ(nvar::parse_method(nvar::to_string(m)), m);
  expect_code(nvar::ErrorCode::InvalidArgument, [] { nvar::parse_method("ridge"); });
}

TEST(MonteCarloConfig, Validation) {
  auto config = small_config();
  config.case_id = 2;
  config.p = 101;
  expect_code(nvar::ErrorCode::InvalidArgument, [&] { config.validate(); });
  config.p = 100;
  EXPECT_NO_THROW(config.validate());
  config.case_id = 4;
  expect_code(nvar::ErrorCode::InvalidArgument, [&] { config.validate(); });
}

TEST(MonteCarlo, DeterministicAcrossThreadCounts) {
  auto config = small_config();
  const auto a = nvar::run_monte_carlo(config);
  config.threads = 3;
  const auto b = nvar::run_monte_carlo(config);
  ASSERT_EQ(a.trials.size(), b.trials.size());
  for (std::size_t k = 0; k < a.trials.size(); ++k) {
    EXPECT_EQ(a.trials[k].l2, b.trials[k].l2);
    EXPECT_EQ(a.trials[k].frob, b.trials[k].frob);
    EXPECT_EQ(a.trials[k].replication, b.trials[k].replication);
    EXPECT_EQ(a.trials[k].method, b.trials[k].method);
  }
  EXPECT_EQ(a.summary(Method::Nvar).mean_l2, b.summary(Method::Nvar).mean_l2);
}

TEST(MonteCarlo, ReplicationDependsOnlyOnItsSeed) {
  auto config = small_config();
  const auto full = nvar::run_monte_carlo(config);
  const auto third = nvar::run_replication(config, 2);
  for (const auto& t : third)
    for (const auto& u : full.trials)
      if (u.replication == 2 && u.method == t.method) { EXPECT_EQ(u.l2, t.l2); }
}

TEST(MonteCarlo, HistogramsCountEveryCompletedReplication) {
  auto config = small_config();
  const auto table = nvar::run_monte_carlo(config);
  for (Method m : {Method::Nvar, Method::Bvar}) {
    const auto& s = table.summary(m);
    std::size_t total = 0;
    for (const auto& [r, c] : s.histogram) total += c;
    EXPECT_EQ(total, s.completed);
    EXPECT_EQ(s.completed + s.failures, config.reps);
  }
  EXPECT_TRUE(table.summary(Method::Lasso).histogram.empty());
}

TEST(MonteCarlo, SingleReplicationHasZeroSd) {
  auto config = small_config();
  config.reps = 1;
  const auto table = nvar::run_monte_carlo(config);
  for (const auto& s : table.methods) {
    EXPECT_EQ(s.sd_l2, 0.0);
    EXPECT_EQ(s.sd_frob, 0.0);
  }
}

TEST(MonteCarlo, CaseOneNvarEqualsBvar) {
  auto config = small_config();
  config.methods = {Method::Nvar, Method::Bvar};
  const auto table = nvar::run_monte_carlo(config);
  const auto& a = table.summary(Method::Nvar);
  const auto& b = table.summary(Method::Bvar);
  EXPECT_NEAR(a.mean_l2, b.mean_l2, 1e-10);
  EXPECT_EQ(a.histogram, b.histogram);
}

TEST(MonteCarlo, ProgressCallbackSeesEveryReplication) {
  auto config = small_config();
  config.methods = {Method::Nvar};
  std::vector<std::size_t> seen;
  nvar::run_monte_carlo(config, [&](std::size_t done) { seen.push_back(done); });
  EXPECT_EQ(seen, (std::vector<std::size_t>{1, 2, 3, 4}));
}

TEST(RenderText, ListsConfiguredRadiiAndMethods) {
  auto config = small_config();
  config.reps = 2;
  const auto text = nvar::render_text({nvar::run_monte_carlo(config)});
  for (const char* token : {"nvar", "bvar", "lasso", "L2", "Frobenius"})
    EXPECT_NE(text.find(token), std::string::npos) << token;
  EXPECT_EQ(nvar::radius_label(2.0), "2");
  EXPECT_EQ(nvar::radius_label(0.5), "0.5");
}
