#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "nvar/baselines.hpp"
#include "nvar/estimation.hpp"
#include "nvar/model.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using nvar::DenseMatrix;
using nvar::OrderingKind;
using nvar::OrderingStrategy;
using nvar::SensorLayout;
using nvar::SeriesPanel;

namespace {

SensorLayout planar(std::vector<nvar::Point> pts) {
  SensorLayout layout;
  layout.ids = nvar::default_ids(pts.size());
  layout.coordinates = std::move(pts);
  return layout;
}

SensorLayout bare(std::size_t p) {
  SensorLayout layout;
  layout.ids = nvar::default_ids(p);
  return layout;
}

std::vector<std::size_t> random_permutation(nvar::CounterRng& rng, std::size_t p) {
  std::vector<std::size_t> pi(p);
  std::iota(pi.begin(), pi.end(), std::size_t{0});
  for (std::size_t k = p; k-- > 1;) std::swap(pi[k], pi[oracle::random_count(rng, 0, k)]);
  return pi;
}

}  // namespace

TEST(OrderSeries, Examples) {
  const auto layout = planar({{0, 0}, {1, 5}, {2, 1}});
  EXPECT_EQ(nvar::order_series(layout, OrderingStrategy::of(OrderingKind::Longitude)),
            (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(nvar::order_series(layout, OrderingStrategy::of(OrderingKind::Latitude)),
            (std::vector<std::size_t>{0, 2, 1}));
  EXPECT_EQ(nvar::order_series(bare(4), OrderingStrategy::identity()), (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(OrderSeries, PrincipalAxesOrthogonal) {
  nvar::CounterRng rng(51);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<nvar::Point> pts(oracle::random_count(rng, 2, 30));
    for (auto& pt : pts) pt = {rng.uniform(-5, 5), rng.uniform(-1, 1)};
    const auto axes = nvar::principal_axes(pts);
    EXPECT_LT(std::abs(axes[0][0] * axes[1][0] + axes[0][1] * axes[1][1]), 1e-10);
    EXPECT_NEAR(std::hypot(axes[0][0], axes[0][1]), 1.0, 1e-12);
  }
}

TEST(OrderSeries, Pca1FollowsElongatedDirection) {
  // Points along the line y = x, listed out of order.
  const auto layout = planar({{2, 2.1}, {0, 0}, {3, 2.9}, {1, 1.05}});
  const auto order = nvar::order_series(layout, OrderingStrategy::of(OrderingKind::Pca1));
  EXPECT_EQ(order, (std::vector<std::size_t>{1, 3, 0, 2}));
}

TEST(OrderSeries, AlwaysAPermutation) {
  nvar::CounterRng rng(52);
  const OrderingKind kinds[] = {OrderingKind::Identity, OrderingKind::Longitude, OrderingKind::Latitude,
                                OrderingKind::Pca1, OrderingKind::Pca2};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<nvar::Point> pts(oracle::random_count(rng, 1, 25));
    for (auto& pt : pts) pt = {std::round(rng.uniform(0, 3)), rng.uniform(0, 3)};  // ties on x
    const auto layout = planar(pts);
    for (auto kind : kinds)
      EXPECT_TRUE(nvar::is_permutation_of_range(nvar::order_series(layout, OrderingStrategy::of(kind))));
  }
}

TEST(OrderSeries, Errors) {
  expect_code(nvar::ErrorCode::MissingCoordinates,
              [] { nvar::order_series(bare(3), OrderingStrategy::of(OrderingKind::Longitude)); });
  expect_code(nvar::ErrorCode::InvalidArgument,
              [] { nvar::order_series(bare(3), OrderingStrategy::custom({0, 0, 1})); });
  expect_code(nvar::ErrorCode::InvalidArgument, [] { nvar::parse_ordering("diagonal"); });
}

TEST(FitBvar, IdentityEqualsNvarOnLattice) {
  nvar::CounterRng rng(53);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = oracle::random_count(rng, 5, 30);
    const auto model = nvar::generate_case1(p, oracle::random_count(rng, 0, 2), rng.next_u64());
    const auto panel = nvar::simulate(model, {1.0}, 100, 50, rng.next_u64());
    const std::vector<double> bands{0, 1, 2, 3};
    const std::vector<std::size_t> q{1};
    const auto nvar_fit = nvar::fit_nvar(panel, model.distance, q, bands);
    const auto bvar_fit = nvar::fit_bvar(panel, bare(p), OrderingStrategy::identity(), 1, bands);
    EXPECT_EQ(nvar_fit.report.d_hat, bvar_fit.report.d_hat);
    for (std::size_t k = 0; k < p * p; ++k)
      EXPECT_NEAR(nvar_fit.model.coeffs[0].values()[k], bvar_fit.model.coeffs[0].values()[k], 1e-10);
  }
}

TEST(FitBvar, PermutationEquivariance) {
  nvar::CounterRng rng(54);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = oracle::random_count(rng, 4, 20);
    const auto model = nvar::generate_case1(p, 1, rng.next_u64());
    const auto panel = nvar::simulate(model, {1.0}, 100, 50, rng.next_u64());
    const auto pi = random_permutation(rng, p);  // shuffled position k holds original series pi[k]
    const auto shuffled = nvar::permute_series(panel, pi);
    // Ordering the shuffled panel by the inverse restores the original band order.
    std::vector<std::size_t> inverse(p);
    for (std::size_t k = 0; k < p; ++k) inverse[pi[k]] = k;
    const std::vector<double> bands{0, 1, 2};
    const auto base = nvar::fit_bvar(panel, bare(p), OrderingStrategy::identity(), 1, bands);
    const auto moved = nvar::fit_bvar(shuffled, bare(p), OrderingStrategy::custom(inverse), 1, bands);
    EXPECT_EQ(base.report.d_hat, moved.report.d_hat);
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = 0; b < p; ++b)
        EXPECT_NEAR(moved.model.coeffs[0](a, b), base.model.coeffs[0](pi[a], pi[b]), 1e-10);
  }
}

TEST(FitBvar, SupportIsBandInOrderedPositions) {
  const auto layout = planar({{3, 0}, {0, 0}, {2, 0}, {1, 0}, {4, 0}});
  const auto model = nvar::generate_case1(5, 1, 9);
  const auto panel = nvar::simulate(model, {1.0}, 120, 50, 10);
  const std::vector<double> bands{1};
  const auto fit = nvar::fit_bvar(panel, layout, OrderingStrategy::of(OrderingKind::Longitude), 1, bands);
  // Longitude positions: series i sits at position x_i.
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      const double gap = std::abs((*layout.coordinates)[i][0] - (*layout.coordinates)[j][0]);
      EXPECT_EQ(fit.model.distance(i, j), gap);
      if (gap > 1) { EXPECT_EQ(fit.model.coeffs[0](i, j), 0.0); }
    }
}

TEST(SoftThreshold, Values) {
  EXPECT_EQ(nvar::soft_threshold(3.0, 1.0), 2.0);
  EXPECT_EQ(nvar::soft_threshold(-3.0, 1.0), -2.0);
  EXPECT_EQ(nvar::soft_threshold(0.5, 1.0), 0.0);
}

TEST(LassoRow, ZeroPenaltyMatchesLeastSquares) {
  nvar::CounterRng rng(55);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = oracle::random_count(rng, 20, 60);
    const auto k = oracle::random_count(rng, 1, 6);
    const auto x = oracle::random_matrix(rng, n, k);
    std::vector<double> y(n);
    for (auto& v : y) v = rng.normal();
    nvar::LassoConfig config;
    config.tol = 1e-12;
    config.max_iter = 100000;
    const auto beta = nvar::lasso_row(x, y, 0.0, config);
    const auto ols = nvar::least_squares_solve(x, y);
    for (std::size_t j = 0; j < k; ++j) EXPECT_NEAR(beta[j], ols[j], 1e-5);
  }
}

TEST(LassoRow, NullThreshold) {
  nvar::CounterRng rng(56);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = oracle::random_count(rng, 10, 60);
    const auto k = oracle::random_count(rng, 1, 8);
    const auto x = oracle::random_matrix(rng, n, k);
    std::vector<double> y(n);
    for (auto& v : y) v = rng.normal();
    const auto xty = nvar::multiply_transposed(x, y);
    double lmax = 0;
    for (double v : xty) lmax = std::max(lmax, std::abs(v) / static_cast<double>(n));
    const nvar::LassoDesign design(x);
    EXPECT_NEAR(nvar::LassoProblem(design, y).lambda_max(), lmax, 1e-12 * lmax);
    for (double v : nvar::lasso_row(x, y, lmax * (1 + 1e-9))) EXPECT_EQ(v, 0.0);
    const auto below = nvar::lasso_row(x, y, lmax * 0.9);
    EXPECT_TRUE(std::any_of(below.begin(), below.end(), [](double v) { return v != 0.0; }));
  }
}

TEST(LassoRow, OrthonormalClosedForm) {
  // Columns with x_j^T x_k = n * delta_jk.
  const std::size_t n = 4;
  const DenseMatrix x(n, 2, std::vector<double>{1, 1, 1, -1, -1, 1, -1, -1});
  const std::vector<double> y{3, 1, -0.5, 2};
  const auto xty = nvar::multiply_transposed(x, y);
  for (double lambda : {0.0, 0.2, 0.5, 1.0, 2.0}) {
    nvar::LassoConfig config;
    config.tol = 1e-14;
    const auto beta = nvar::lasso_row(x, y, lambda, config);
    for (std::size_t j = 0; j < 2; ++j)
      EXPECT_NEAR(beta[j], nvar::soft_threshold(xty[j] / n, lambda), 1e-12);
  }
}

TEST(LassoRow, ObjectiveNonIncreasingPerSweep) {
  nvar::CounterRng rng(57);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = oracle::random_count(rng, 20, 60);
    const auto k = oracle::random_count(rng, 2, 12);
    auto x = oracle::random_matrix(rng, n, k);
    for (std::size_t r = 0; r < n; ++r) x(r, 1) = x(r, 0) + 0.1 * x(r, 1);  // collinear pair
    std::vector<double> y(n);
    for (auto& v : y) v = rng.normal();
    const double lambda = rng.uniform(0.001, 0.3);
    const auto result = nvar::lasso_row_detail(x, y, lambda, {}, true);
    ASSERT_FALSE(result.objective_trace.empty());
    for (std::size_t s = 1; s < result.objective_trace.size(); ++s)
      EXPECT_LE(result.objective_trace[s], result.objective_trace[s - 1] + 1e-12);
    EXPECT_NEAR(result.objective_trace.back(), nvar::lasso_objective(x, y, result.beta, lambda), 1e-9);
  }
}

TEST(LassoRow, KktConditionsAtSolution) {
  nvar::CounterRng rng(58);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = oracle::random_count(rng, 20, 60);
    const auto k = oracle::random_count(rng, 1, 10);
    const auto x = oracle::random_matrix(rng, n, k);
    std::vector<double> y(n);
    for (auto& v : y) v = rng.normal();
    const double lambda = rng.uniform(0.01, 0.5);
    nvar::LassoConfig config;
    config.tol = 1e-12;
    config.max_iter = 100000;
    const auto beta = nvar::lasso_row(x, y, lambda, config);
    auto resid = nvar::multiply(x, beta);
    for (std::size_t r = 0; r < n; ++r) resid[r] = y[r] - resid[r];
    const auto grad = nvar::multiply_transposed(x, resid);
    for (std::size_t j = 0; j < k; ++j) {
      const double g = grad[j] / static_cast<double>(n);
      if (beta[j] != 0.0) EXPECT_NEAR(g, lambda * (beta[j] > 0 ? 1 : -1), 1e-6);
      else EXPECT_LE(std::abs(g), lambda + 1e-6);
    }
  }
}

TEST(LassoPath, ContinuityAcrossGrid) {
  nvar::CounterRng rng(59);
  const auto x = oracle::random_matrix(rng, 60, 6);
  std::vector<double> y(60);
  for (auto& v : y) v = rng.normal();
  const nvar::LassoDesign design(x);
  const nvar::LassoProblem problem(design, y);
  const auto grid = nvar::lambda_path(problem.lambda_max(), 50, 1e-3);
  ASSERT_EQ(grid.size(), 50u);
  std::vector<double> warm;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto result = problem.solve(grid[g], 10000, 1e-10, warm);
    if (!warm.empty()) {
      double diff = 0;
      for (std::size_t j = 0; j < 6; ++j) diff = std::max(diff, std::abs(result.beta[j] - warm[j]));
      EXPECT_LE(diff, 50.0 * (grid[g - 1] - grid[g]) + 1e-8);
    }
    warm = result.beta;
  }
}

TEST(FitLasso, ZeroPanelGivesZeroCoefficients) {
  const SeriesPanel panel(DenseMatrix(4, 30, 0.0));
  const auto fit = nvar::fit_lasso(panel, 1);
  for (double v : fit.coeffs[0].values()) EXPECT_EQ(v, 0.0);
}

TEST(FitLasso, ScreensStrongSignalSupport) {
  // Tridiagonal with every true entry at 0.3 in magnitude, norm at most 0.9.
  int covered = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto strong = nvar::generate_case1(10, 1, seed);
    nvar::CounterRng signs(seed);
    for (std::size_t i = 0; i < 10; ++i)
      for (std::size_t j = 0; j < 10; ++j)
        if (strong.coeffs[0](i, j) != 0.0)
          strong.coeffs[0](i, j) = (signs.uniform() < 0.5 ? -0.3 : 0.3);
    const auto panel = nvar::simulate(strong, {1.0}, 400, 100, seed + 1);
    const auto fit = nvar::fit_lasso(panel, 1);
    bool all = true;
    for (std::size_t k = 0; k < 100; ++k)
      if (strong.coeffs[0].values()[k] != 0.0 && fit.coeffs[0].values()[k] == 0.0) all = false;
    covered += all;
  }
  EXPECT_GT(covered, 25);
}

TEST(FitLasso, FixedLambdaAndThreads) {
  const auto model = nvar::generate_case1(12, 1, 3);
  const auto panel = nvar::simulate(model, {1.0}, 100, 50, 4);
  nvar::LassoConfig config;
  config.selection = nvar::LassoSelection::Fixed;
  config.fixed_lambda = 0.05;
  const auto a = nvar::fit_lasso(panel, 1, config, 1);
  const auto b = nvar::fit_lasso(panel, 1, config, 3);
  EXPECT_EQ(a.coeffs[0], b.coeffs[0]);
  for (double l : a.chosen_lambda) EXPECT_EQ(l, 0.05);
}

TEST(LassoConfig, Validation) {
  nvar::LassoConfig config;
  config.lambda_grid = {0.1, 0.2};
  expect_code(nvar::ErrorCode::InvalidArgument, [&] { config.validate(); });
  config.lambda_grid = {0.2, 0.1};
  EXPECT_NO_THROW(config.validate());
}
