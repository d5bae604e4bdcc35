#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nvar/errors.hpp"
#include "nvar/estimation.hpp"
#include "nvar/geometry.hpp"
#include "nvar/matrix.hpp"
#include "nvar/model.hpp"
#include "nvar/parallel.hpp"

namespace nvar {

// ---------------------------------------------------------------------------
// Series ordering for the banded baseline
// ---------------------------------------------------------------------------

enum class OrderingKind { Identity, Longitude, Latitude, Pca1, Pca2, Custom };

struct OrderingStrategy {
  OrderingKind kind = OrderingKind::Identity;
  std::vector<std::size_t> permutation;  // Custom only

  static OrderingStrategy identity() { return {}; }
  static OrderingStrategy of(OrderingKind k) { return {k, {}}; }
  static OrderingStrategy custom(std::vector<std::size_t> perm) {
    return {OrderingKind::Custom, std::move(perm)};
  }
};

inline std::string to_string(OrderingKind kind) {
  switch (kind) {
    case OrderingKind::Identity: return "identity";
    case OrderingKind::Longitude: return "longitude";
    case OrderingKind::Latitude: return "latitude";
    case OrderingKind::Pca1: return "pca1";
    case OrderingKind::Pca2: return "pca2";
    case OrderingKind::Custom: return "custom";
  }
  return "identity";
}

inline OrderingKind parse_ordering(const std::string& name) {
  if (name == "identity") return OrderingKind::Identity;
  if (name == "longitude") return OrderingKind::Longitude;
  if (name == "latitude") return OrderingKind::Latitude;
  if (name == "pca1") return OrderingKind::Pca1;
  if (name == "pca2") return OrderingKind::Pca2;
  if (name == "custom") return OrderingKind::Custom;
  fail(ErrorCode::InvalidArgument,
       "unknown ordering '" + name + "' (expected identity|longitude|latitude|pca1|pca2|custom)");
}

inline bool is_permutation_of_range(std::span<const std::size_t> perm) {
  std::vector<char> seen(perm.size(), 0);
  for (std::size_t v : perm) {
    if (v >= perm.size() || seen[v]) return false;
    seen[v] = 1;
  }
  return true;
}

/// Unit principal axes of mean-centered 2-D points; [0] explains the most variance.
/// Each axis is signed so its first non-zero component is positive.
inline std::array<std::array<double, 2>, 2> principal_axes(std::span<const Point> pts) {
  const double n = static_cast<double>(pts.size());
  double mx = 0.0, my = 0.0;
  for (const auto& pt : pts) {
    mx += pt[0];
    my += pt[1];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (const auto& pt : pts) {
    const double dx = pt[0] - mx, dy = pt[1] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  // Closed-form eigenvector of [[sxx, sxy], [sxy, syy]]: angle of the major axis.
  const double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  std::array<double, 2> major{std::cos(theta), std::sin(theta)};
  std::array<double, 2> minor{-major[1], major[0]};
  auto canonical = [](std::array<double, 2>& v) {
    if (v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0)) {
      v[0] = -v[0];
      v[1] = -v[1];
    }
  };
  canonical(major);
  canonical(minor);
  return {major, minor};
}

/// order[k] is the original index of the series placed at position k.
inline std::vector<std::size_t> order_series(const SensorLayout& layout,
                                             const OrderingStrategy& strategy) {
  const std::size_t p = layout.size();
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (strategy.kind == OrderingKind::Identity) return order;
  if (strategy.kind == OrderingKind::Custom) {
    require(strategy.permutation.size() == p && is_permutation_of_range(strategy.permutation),
            ErrorCode::InvalidArgument, "custom ordering must be a permutation of 0..p-1");
    return strategy.permutation;
  }
  require(layout.coordinates.has_value(), ErrorCode::MissingCoordinates,
          "ordering '" + to_string(strategy.kind) + "' needs series coordinates");
  const auto& pts = *layout.coordinates;
  require(pts.size() == p && (p == 0 || pts.front().size() == 2), ErrorCode::MissingCoordinates,
          "ordering '" + to_string(strategy.kind) + "' needs 2-D coordinates");

  std::vector<double> key(p);
  switch (strategy.kind) {
    case OrderingKind::Longitude:
      for (std::size_t i = 0; i < p; ++i) key[i] = pts[i][0];
      break;
    case OrderingKind::Latitude:
      for (std::size_t i = 0; i < p; ++i) key[i] = pts[i][1];
      break;
    default: {
      const auto axes = principal_axes(pts);
      const auto& axis = axes[strategy.kind == OrderingKind::Pca1 ? 0 : 1];
      for (std::size_t i = 0; i < p; ++i) key[i] = pts[i][0] * axis[0] + pts[i][1] * axis[1];
    }
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
  return order;
}

inline SeriesPanel permute_series(const SeriesPanel& panel, std::span<const std::size_t> order) {
  DenseMatrix values(panel.p(), panel.n());
  std::vector<std::string> ids(panel.p());
  for (std::size_t k = 0; k < order.size(); ++k) {
    for (std::size_t t = 0; t < panel.n(); ++t) values(k, t) = panel(order[k], t);
    ids[k] = panel.ids[order[k]];
  }
  return SeriesPanel(std::move(values), std::move(ids), panel.timestamps);
}

/**
 * Banded VAR over a 1-D ordering of the series.
 *
 * The panel is permuted by order_series, radius selection runs over the
 * lattice1d metric of the permuted positions with the bandwidth grid as radii,
 * and the result is mapped back to the original indexing (including the
 * distance matrix, which becomes |pos(i) - pos(j)|).
 */
inline NvarFit fit_bvar(const SeriesPanel& panel, const SensorLayout& layout,
                        const OrderingStrategy& strategy, std::size_t q,
                        std::span<const double> bandwidth_grid, const SelectionOptions& options = {}) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t p = panel.p();
  require(layout.size() == p, ErrorCode::ShapeMismatch, "layout size differs from panel");
  const auto order = order_series(layout, strategy);
  const auto permuted = permute_series(panel, order);
  const auto band = lattice1d_distances(p);
  auto report = select_neighborhood(permuted, band, q, bandwidth_grid, options);

  std::vector<std::size_t> position(p);
  for (std::size_t k = 0; k < p; ++k) position[order[k]] = k;

  FitReport out = report;
  std::vector<double> band_entries(p * p);
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b = 0; b < p; ++b)
      band_entries[a * p + b] = std::abs(static_cast<double>(position[a]) - static_cast<double>(position[b]));
  for (std::size_t r = 0; r < q; ++r)
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = 0; b < p; ++b)
        out.coeffs[r](order[a], order[b]) = report.coeffs[r](a, b);
  for (std::size_t k = 0; k < report.bic_table.size(); ++k)
    for (std::size_t a = 0; a < p; ++a) {
      out.bic_table[k][order[a]] = report.bic_table[k][a];
      out.cell_status[k][order[a]] = report.cell_status[k][a];
    }
  for (std::size_t a = 0; a < p; ++a) {
    out.selected_radius[order[a]] = report.selected_radius[a];
    out.fitted_radius[order[a]] = report.fitted_radius[a];
    auto fit = report.row_fits[a];
    fit.series = order[a];
    for (auto& m : fit.members) m = order[m];
    out.row_fits[order[a]] = std::move(fit);
  }
  for (auto& c : out.capped_series) c = order[c];
  std::sort(out.capped_series.begin(), out.capped_series.end());

  NvarFit result;
  result.model = assemble_model(out, DistanceMatrix(p, std::move(band_entries)));
  result.report = std::move(out);
  result.per_lag = {result.report};
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

// ---------------------------------------------------------------------------
// LASSO baseline
// ---------------------------------------------------------------------------

enum class LassoSelection { Bic, Fixed };

struct LassoConfig {
  std::vector<double> lambda_grid;  // strictly descending; empty = automatic per row
  std::size_t grid_size = 50;
  double grid_ratio = 1e-3;  // smallest / largest lambda of the automatic grid
  std::size_t max_iter = 10000;
  double tol = 1e-7;
  LassoSelection selection = LassoSelection::Bic;
  double fixed_lambda = 0.0;
  double c_n = 0.0;  // <= 0 selects default_c_n(n)

  void validate() const {
    require(max_iter >= 1, ErrorCode::InvalidArgument, "lasso max_iter must be >= 1");
    require(tol > 0.0, ErrorCode::InvalidArgument, "lasso tol must be > 0");
    for (std::size_t k = 0; k < lambda_grid.size(); ++k) {
      require(lambda_grid[k] > 0.0, ErrorCode::InvalidArgument, "lambda grid must be positive");
      require(k == 0 || lambda_grid[k] < lambda_grid[k - 1], ErrorCode::InvalidArgument,
              "lambda grid must be strictly descending");
    }
    if (lambda_grid.empty())
      require(grid_size >= 1 && grid_ratio > 0.0 && grid_ratio < 1.0, ErrorCode::InvalidArgument,
              "automatic lambda grid needs grid_size >= 1 and 0 < grid_ratio < 1");
    if (selection == LassoSelection::Fixed)
      require(fixed_lambda >= 0.0, ErrorCode::InvalidArgument, "fixed lambda must be >= 0");
  }
};

struct LassoResult {
  std::vector<double> beta;
  std::size_t sweeps = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // objective after each sweep (when traced)
};

inline double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

/// Scaled Gram system of a design, shareable across responses.
class LassoDesign {
 public:
  explicit LassoDesign(const DenseMatrix& x) : x_(&x), n_(x.rows()), k_(x.cols()) {
    require(n_ >= 1 && k_ >= 1, ErrorCode::InvalidArgument, "lasso needs a non-empty design");
    detail::require_finite(x, "lasso design");
    scale_.assign(k_, 0.0);
    gram_ = DenseMatrix(k_, k_);
    const double inv_n = 1.0 / static_cast<double>(n_);
    for (std::size_t r = 0; r < n_; ++r) {
      const auto row = x.row(r);
      for (std::size_t a = 0; a < k_; ++a) {
        if (row[a] == 0.0) continue;
        auto g = gram_.row(a);
        for (std::size_t b = a; b < k_; ++b) g[b] += row[a] * row[b] * inv_n;
      }
    }
    for (std::size_t a = 0; a < k_; ++a) scale_[a] = std::sqrt(gram_(a, a));
    for (std::size_t a = 0; a < k_; ++a)
      for (std::size_t b = a; b < k_; ++b) {
        const double sa = scale_[a], sb = scale_[b];
        const double v = (sa > 0.0 && sb > 0.0) ? gram_(a, b) / (sa * sb) : 0.0;
        gram_(a, b) = gram_(b, a) = v;
      }
  }

  const DenseMatrix& x() const noexcept { return *x_; }
  std::size_t n() const noexcept { return n_; }
  std::size_t k() const noexcept { return k_; }
  const std::vector<double>& scale() const noexcept { return scale_; }
  const DenseMatrix& gram() const noexcept { return gram_; }

 private:
  const DenseMatrix* x_;
  std::size_t n_, k_;
  std::vector<double> scale_;  // root mean square of each column
  DenseMatrix gram_;           // X~^T X~ / n for unit mean-square columns
};

/**
 * Coordinate-descent LASSO over a precomputed scaled Gram system.
 *
 * Columns are scaled to unit mean square; the original-scale penalty
 * lambda * |beta_j| becomes lambda / s_j on the scaled coordinate, so the
 * solution minimizes (1/2n)||y - X beta||^2 + lambda ||beta||_1 exactly.
 */
class LassoProblem {
 public:
  LassoProblem(const LassoDesign& design, std::span<const double> y)
      : n_(design.n()), k_(design.k()), scale_(design.scale()), gram_(design.gram()) {
    require(y.size() == n_, ErrorCode::ShapeMismatch, "lasso response length differs from design");
    detail::require_finite(y, "lasso response");
    const auto xty = multiply_transposed(design.x(), y);
    const double inv_n = 1.0 / static_cast<double>(n_);
    xty_.resize(k_);
    for (std::size_t a = 0; a < k_; ++a) xty_[a] = scale_[a] > 0.0 ? xty[a] * inv_n / scale_[a] : 0.0;
    yty_ = dot(y, y) * inv_n;
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t k() const noexcept { return k_; }

  /// Smallest lambda at which beta = 0 is optimal: max_j |x_j^T y| / n.
  double lambda_max() const {
    double m = 0.0;
    for (std::size_t j = 0; j < k_; ++j) m = std::max(m, std::abs(xty_[j] * scale_[j]));
    return m;
  }

  /// Solves at lambda starting from `warm` (original scale) when given.
  LassoResult solve(double lambda, std::size_t max_iter, double tol,
                    std::span<const double> warm = {}, bool trace = false) const {
    require(lambda >= 0.0 && std::isfinite(lambda), ErrorCode::InvalidArgument,
            "lambda must be finite and >= 0");
    std::vector<double> b(k_, 0.0);
    if (!warm.empty())
      for (std::size_t j = 0; j < k_; ++j) b[j] = warm[j] * scale_[j];
    std::vector<double> gb(k_, 0.0);  // gram * b
    for (std::size_t j = 0; j < k_; ++j)
      if (b[j] != 0.0)
        for (std::size_t a = 0; a < k_; ++a) gb[a] += gram_(a, j) * b[j];

    LassoResult result;
    for (std::size_t sweep = 1; sweep <= max_iter; ++sweep) {
      double max_change = 0.0;
      for (std::size_t j = 0; j < k_; ++j) {
        if (scale_[j] == 0.0) continue;
        const double gjj = gram_(j, j);
        const double z = xty_[j] - gb[j] + gjj * b[j];
        const double updated = soft_threshold(z, lambda / scale_[j]) / gjj;
        const double delta = updated - b[j];
        if (delta == 0.0) continue;
        b[j] = updated;
        const auto g = gram_.row(j);
        for (std::size_t a = 0; a < k_; ++a) gb[a] += g[a] * delta;
        max_change = std::max(max_change, std::abs(delta) / scale_[j]);
      }
      result.sweeps = sweep;
      if (trace) result.objective_trace.push_back(objective_scaled(b, gb, lambda));
      if (max_change < tol) {
        result.converged = true;
        break;
      }
    }
    result.beta.resize(k_);
    for (std::size_t j = 0; j < k_; ++j) result.beta[j] = scale_[j] > 0.0 ? b[j] / scale_[j] : 0.0;
    return result;
  }

  /// ||y - X beta||^2 via the Gram identity, clamped at 0.
  double rss(std::span<const double> beta) const {
    double quad = 0.0, lin = 0.0;
    std::vector<double> b(k_);
    for (std::size_t j = 0; j < k_; ++j) b[j] = beta[j] * scale_[j];
    for (std::size_t a = 0; a < k_; ++a) {
      if (b[a] == 0.0) continue;
      lin += b[a] * xty_[a];
      const auto g = gram_.row(a);
      for (std::size_t c = 0; c < k_; ++c) quad += b[a] * g[c] * b[c];
    }
    return std::max(0.0, static_cast<double>(n_) * (yty_ - 2.0 * lin + quad));
  }

 private:
  double objective_scaled(std::span<const double> b, std::span<const double> gb,
                          double lambda) const {
    double lin = 0.0, quad = 0.0, pen = 0.0;
    for (std::size_t j = 0; j < k_; ++j) {
      lin += b[j] * xty_[j];
      quad += b[j] * gb[j];
      if (scale_[j] > 0.0) pen += std::abs(b[j]) / scale_[j];
    }
    return 0.5 * yty_ - lin + 0.5 * quad + lambda * pen;
  }

  std::size_t n_, k_;
  const std::vector<double>& scale_;
  const DenseMatrix& gram_;
  std::vector<double> xty_;  // X~^T y / n
  double yty_ = 0.0;         // y^T y / n
};

/// (1/2n)||y - X beta||^2 + lambda ||beta||_1, evaluated directly.
inline double lasso_objective(const DenseMatrix& x, std::span<const double> y,
                              std::span<const double> beta, double lambda) {
  const auto fitted = multiply(x, beta);
  double rss = 0.0;
  for (std::size_t r = 0; r < y.size(); ++r) rss += (y[r] - fitted[r]) * (y[r] - fitted[r]);
  double l1 = 0.0;
  for (double b : beta) l1 += std::abs(b);
  return rss / (2.0 * static_cast<double>(y.size())) + lambda * l1;
}

inline LassoResult lasso_row_detail(const DenseMatrix& x, std::span<const double> y, double lambda,
                                    const LassoConfig& config = {}, bool trace = false) {
  config.validate();
  const LassoDesign design(x);
  return LassoProblem(design, y).solve(lambda, config.max_iter, config.tol, {}, trace);
}

inline std::vector<double> lasso_row(const DenseMatrix& x, std::span<const double> y, double lambda,
                                     const LassoConfig& config = {}) {
  return lasso_row_detail(x, y, lambda, config).beta;
}

/// Log-spaced descending grid from lambda_max down to ratio * lambda_max.
inline std::vector<double> lambda_path(double lambda_max, std::size_t size, double ratio) {
  std::vector<double> grid;
  if (!(lambda_max > 0.0)) return grid;
  if (size == 1) return {lambda_max};
  for (std::size_t k = 0; k < size; ++k)
    grid.push_back(lambda_max * std::pow(ratio, static_cast<double>(k) / static_cast<double>(size - 1)));
  return grid;
}

struct LassoPathPoint {
  std::size_t series = 0;
  double lambda = 0.0;
  std::size_t nonzero = 0;
  double bic = 0.0;
};

struct LassoFit {
  std::vector<DenseMatrix> coeffs;  // A_1..A_q, dense
  std::vector<double> chosen_lambda;
  std::vector<std::size_t> nonzero;
  std::vector<char> converged;
  std::vector<LassoPathPoint> path;  // every (series, lambda) evaluated
  double seconds = 0.0;

  NvarModel as_model() const {
    NvarModel m;
    m.p = coeffs.front().rows();
    m.q = coeffs.size();
    m.coeffs = coeffs;
    m.radius = std::numeric_limits<double>::infinity();
    m.distance = DistanceMatrix(m.p);
    return m;
  }
};

/**
 * Per-series LASSO on the full lagged design (all p series, lags 1..q).
 *
 * With BIC selection each row walks its lambda path with warm starts and keeps
 * the lambda minimizing log(RSS) + df * c_n * log(max(p, n)) / n, df being the
 * non-zero count. An all-zero response yields zero coefficients.
 */
inline LassoFit fit_lasso(const SeriesPanel& panel, std::size_t q, const LassoConfig& config = {},
                          std::size_t threads = 1) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::size_t p = panel.p(), n = panel.n();
  require(q >= 1 && n > q, ErrorCode::InsufficientData, "panel too short for lag order");
  std::vector<std::size_t> all(p);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const double c_n = config.c_n > 0.0 ? config.c_n : default_c_n(n);

  LassoFit fit;
  fit.coeffs.assign(q, DenseMatrix(p, p));
  fit.chosen_lambda.assign(p, 0.0);
  fit.nonzero.assign(p, 0);
  fit.converged.assign(p, 1);
  std::vector<std::vector<LassoPathPoint>> paths(p);

  // The design is shared by every row; only the response changes.
  const DenseMatrix x = [&] {
    const std::size_t rows = n - q;
    DenseMatrix out(rows, q * p);
    for (std::size_t k = 0; k < rows; ++k) {
      const std::size_t t = n - 1 - k;
      auto row = out.row(k);
      for (std::size_t r = 1; r <= q; ++r)
        for (std::size_t j = 0; j < p; ++j) row[(r - 1) * p + j] = panel(j, t - r);
    }
    return out;
  }();

  const LassoDesign design(x);

  parallel_for(p, threads, [&](std::size_t i) {
    std::vector<double> y(n - q);
    for (std::size_t k = 0; k < y.size(); ++k) y[k] = panel(i, n - 1 - k);
    const LassoProblem problem(design, y);

    std::vector<double> grid;
    if (config.selection == LassoSelection::Fixed) {
      grid = {config.fixed_lambda};
    } else if (!config.lambda_grid.empty()) {
      grid = config.lambda_grid;
    } else {
      grid = lambda_path(problem.lambda_max(), config.grid_size, config.grid_ratio);
    }

    std::vector<double> best_beta(q * p, 0.0);
    double best_bic = std::numeric_limits<double>::infinity();
    std::vector<double> warm;
    bool all_converged = true;
    for (double lambda : grid) {
      const auto res = problem.solve(lambda, config.max_iter, config.tol, warm);
      all_converged = all_converged && res.converged;
      warm = res.beta;
      const auto df = static_cast<std::size_t>(
          std::count_if(res.beta.begin(), res.beta.end(), [](double b) { return b != 0.0; }));
      const double score = bic(problem.rss(res.beta), n, 1, df, p, c_n);
      paths[i].push_back({i, lambda, df, score});
      if (config.selection == LassoSelection::Fixed || score < best_bic) {
        best_bic = score;
        best_beta = res.beta;
        fit.chosen_lambda[i] = lambda;
      }
    }
    fit.converged[i] = all_converged;
    std::size_t nz = 0;
    for (std::size_t r = 0; r < q; ++r)
      for (std::size_t j = 0; j < p; ++j) {
        const double b = best_beta[r * p + j];
        fit.coeffs[r](i, j) = b;
        nz += b != 0.0;
      }
    fit.nonzero[i] = nz;
  });
  for (auto& row_path : paths) fit.path.insert(fit.path.end(), row_path.begin(), row_path.end());
  fit.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return fit;
}

}  // namespace nvar
