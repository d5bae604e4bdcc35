#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nvar/errors.hpp"
#include "nvar/geometry.hpp"
#include "nvar/matrix.hpp"
#include "nvar/model.hpp"
#include "nvar/parallel.hpp"

namespace nvar {

struct Design {
  DenseMatrix x;          // (n - q) x (q * tau)
  std::vector<double> y;  // n - q
};

/**
 * Regression design for series i on lagged neighbors.
 *
 * Row k targets time t = n - k (1-based), so y runs from y_i(n) down to
 * y_i(q + 1). Columns are lag-major: for r = 1..q, the values y_j(t - r) for
 * every j in members (ascending).
 */
inline Design build_design(const SeriesPanel& panel, std::span<const std::size_t> members,
                           std::size_t q, std::size_t i) {
  const std::size_t n = panel.n();
  const std::size_t tau = members.size();
  require(q >= 1, ErrorCode::InvalidArgument, "lag order q must be >= 1");
  require(i < panel.p(), ErrorCode::InvalidArgument, "series index out of range");
  require(tau >= 1, ErrorCode::InvalidArgument, "neighborhood is empty");
  require(n > q, ErrorCode::InsufficientData,
          "panel length " + std::to_string(n) + " must exceed q = " + std::to_string(q));
  require(n - q >= q * tau, ErrorCode::InsufficientData,
          "series " + std::to_string(i) + ": " + std::to_string(n - q) + " rows for " +
              std::to_string(q * tau) + " coefficients");
  for (std::size_t j : members)
    require(j < panel.p(), ErrorCode::InvalidArgument, "neighbor index out of range");

  const std::size_t rows = n - q;
  Design design{DenseMatrix(rows, q * tau), std::vector<double>(rows)};
  for (std::size_t k = 0; k < rows; ++k) {
    const std::size_t t = n - 1 - k;  // 0-based column of the target
    design.y[k] = panel(i, t);
    auto row = design.x.row(k);
    for (std::size_t r = 1; r <= q; ++r)
      for (std::size_t m = 0; m < tau; ++m) row[(r - 1) * tau + m] = panel(members[m], t - r);
  }
  return design;
}

/// OLS fit of one series on its neighborhood; beta is laid out like the design columns.
struct RowFit {
  std::size_t series = 0;
  std::vector<std::size_t> members;
  std::vector<double> beta;
  double rss = 0.0;

  std::size_t tau() const noexcept { return members.size(); }
};

inline double residual_sum_of_squares(const Design& design, std::span<const double> beta) {
  const auto fitted = multiply(design.x, beta);
  double rss = 0.0;
  for (std::size_t k = 0; k < fitted.size(); ++k) {
    const double e = design.y[k] - fitted[k];
    rss += e * e;
  }
  return rss;
}

inline RowFit fit_row(const SeriesPanel& panel, std::span<const std::size_t> members, std::size_t q,
                      std::size_t i) {
  const auto design = build_design(panel, members, q, i);
  RowFit fit;
  fit.series = i;
  fit.members.assign(members.begin(), members.end());
  fit.beta = least_squares_solve(design.x, design.y);
  fit.rss = residual_sum_of_squares(design, fit.beta);
  return fit;
}

/// RSS at or below this is treated as exact interpolation.
inline constexpr double kZeroRss = 1e-300;

/// log(rss) + q * tau * c_n * log(max(p, n)) / n; -inf when rss <= kZeroRss.
inline double bic(double rss, std::size_t n, std::size_t q, std::size_t tau, std::size_t p,
                  double c_n) {
  require(n >= 1, ErrorCode::InvalidArgument, "bic needs n >= 1");
  require(!(rss < 0.0) && !std::isnan(rss), ErrorCode::InvalidArgument, "rss must be >= 0");
  if (rss <= kZeroRss) return -std::numeric_limits<double>::infinity();
  const double penalty = static_cast<double>(q * tau) * c_n *
                         std::log(static_cast<double>(std::max(p, n))) / static_cast<double>(n);
  return std::log(rss) + penalty;
}

/// Default penalty multiplier: max(2, 2 log log max(n, 16)).
inline double default_c_n(std::size_t n) {
  const double nn = static_cast<double>(std::max<std::size_t>(n, 16));
  return std::max(2.0, 2.0 * std::log(std::log(nn)));
}

struct SelectionOptions {
  double c_n = 0.0;  // <= 0 selects default_c_n(n)
  bool prune = false;  // greedy backward elimination per row after selection
  bool effective_n = false;  // use n - q instead of n in the BIC penalty denominator
  std::size_t threads = 1;

  double resolved_c_n(std::size_t n) const { return c_n > 0.0 ? c_n : default_c_n(n); }
};

enum class CellStatus { Fitted, InsufficientData, RankDeficient };

struct FitReport {
  std::size_t q = 1;
  double c_n = 0.0;
  std::vector<double> radii;
  double d_hat = 0.0;
  std::vector<double> selected_radius;               // per-series BIC argmin
  std::vector<std::vector<double>> bic_table;        // [radius][series], NaN when skipped
  std::vector<std::vector<CellStatus>> cell_status;  // [radius][series]
  std::vector<RowFit> row_fits;                      // final fits at d_hat
  std::vector<double> fitted_radius;                 // radius each final row was fit at
  std::vector<std::size_t> capped_series;            // rows refit below d_hat (infeasible there)
  std::vector<DenseMatrix> coeffs;                   // assembled A_1..A_q
  double criterion = 0.0;                            // sum over series of the minimal BIC
};

namespace detail {

/// Column indices (lag-major) kept after greedy backward BIC elimination.
inline std::vector<std::size_t> prune_columns(const Design& design, std::size_t p, std::size_t n,
                                              double c_n) {
  std::vector<std::size_t> kept(design.x.cols());
  std::iota(kept.begin(), kept.end(), std::size_t{0});
  auto score = [&](const std::vector<std::size_t>& cols) {
    double rss = 0.0;
    if (cols.empty()) {
      for (double v : design.y) rss += v * v;
    } else {
      DenseMatrix sub(design.x.rows(), cols.size());
      for (std::size_t r = 0; r < sub.rows(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c) sub(r, c) = design.x(r, cols[c]);
      const auto beta = least_squares_solve(sub, design.y);
      rss = residual_sum_of_squares({sub, design.y}, beta);
    }
    return bic(rss, n, 1, cols.size(), p, c_n);
  };
  double current = score(kept);
  while (!kept.empty()) {
    double best = current;
    std::size_t drop = kept.size();
    for (std::size_t c = 0; c < kept.size(); ++c) {
      auto trial = kept;
      trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(c));
      const double s = score(trial);
      if (s < best) {
        best = s;
        drop = c;
      }
    }
    if (drop == kept.size()) break;
    kept.erase(kept.begin() + static_cast<std::ptrdiff_t>(drop));
    current = best;
  }
  return kept;
}

}  // namespace detail

/**
 * Neighborhood-radius selection for a fixed lag order.
 *
 * Every (radius, series) cell is fit by OLS and scored by BIC; cells with
 * q * tau >= n - q or a rank-deficient design are skipped. Each series takes
 * its BIC argmin (ties go to the smaller radius), d_hat is the largest of
 * these, and every row is refit at d_hat. A row whose design is infeasible at
 * d_hat is refit at its largest feasible radius below it and listed in
 * capped_series.
 */
inline FitReport select_neighborhood(const SeriesPanel& panel, const DistanceMatrix& distance,
                                     std::size_t q, std::span<const double> radii,
                                     const SelectionOptions& options = {}) {
  const std::size_t p = panel.p(), n = panel.n();
  require(distance.size() == p, ErrorCode::ShapeMismatch, "distance matrix size differs from panel");
  require(!radii.empty(), ErrorCode::InvalidArgument, "radius grid is empty");
  require(std::is_sorted(radii.begin(), radii.end()) &&
              std::adjacent_find(radii.begin(), radii.end()) == radii.end(),
          ErrorCode::InvalidArgument, "radius grid must be strictly ascending");
  require(q >= 1 && n > q, ErrorCode::InsufficientData, "panel too short for lag order");

  FitReport report;
  report.q = q;
  report.c_n = options.resolved_c_n(n);
  report.radii.assign(radii.begin(), radii.end());
  const std::size_t bic_n = options.effective_n ? n - q : n;
  const std::size_t num_radii = radii.size();
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

  std::vector<NeighborhoodIndex> nbhds;
  nbhds.reserve(num_radii);
  for (double r : radii) nbhds.push_back(neighborhood(distance, r));

  report.bic_table.assign(num_radii, std::vector<double>(p, kNaN));
  report.cell_status.assign(num_radii, std::vector<CellStatus>(p, CellStatus::Fitted));

  parallel_for(p, options.threads, [&](std::size_t i) {
    for (std::size_t k = 0; k < num_radii; ++k) {
      const auto& members = nbhds[k].members[i];
      if (q * members.size() >= n - q) {
        report.cell_status[k][i] = CellStatus::InsufficientData;
        continue;
      }
      try {
        const auto fit = fit_row(panel, members, q, i);
        report.bic_table[k][i] = bic(fit.rss, bic_n, q, members.size(), p, report.c_n);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::RankDeficient) throw;
        report.cell_status[k][i] = CellStatus::RankDeficient;
      }
    }
  });

  report.selected_radius.assign(p, kNaN);
  std::vector<std::size_t> argmin(p);
  report.criterion = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    std::size_t best = num_radii;
    for (std::size_t k = 0; k < num_radii; ++k) {
      if (report.cell_status[k][i] != CellStatus::Fitted) continue;
      if (best == num_radii || report.bic_table[k][i] < report.bic_table[best][i]) best = k;
    }
    require(best < num_radii, ErrorCode::NoFeasibleRadius,
            "no feasible radius for series " + std::to_string(i) + " (" + panel.ids[i] + ")");
    argmin[i] = best;
    report.selected_radius[i] = radii[best];
    report.criterion += report.bic_table[best][i];
  }
  const std::size_t d_hat_index = *std::max_element(argmin.begin(), argmin.end());
  report.d_hat = radii[d_hat_index];

  report.row_fits.resize(p);
  report.fitted_radius.resize(p);
  std::vector<char> capped(p, 0);
  parallel_for(p, options.threads, [&](std::size_t i) {
    std::size_t k = d_hat_index;
    while (report.cell_status[k][i] != CellStatus::Fitted) --k;  // argmin[i] <= d_hat is fitted
    capped[i] = k != d_hat_index;
    report.fitted_radius[i] = radii[k];
    const auto& members = nbhds[k].members[i];
    auto fit = fit_row(panel, members, q, i);
    if (options.prune) {
      const auto design = build_design(panel, members, q, i);
      const auto kept = detail::prune_columns(design, p, bic_n, report.c_n);
      std::vector<double> beta(fit.beta.size(), 0.0);
      if (!kept.empty()) {
        DenseMatrix sub(design.x.rows(), kept.size());
        for (std::size_t r = 0; r < sub.rows(); ++r)
          for (std::size_t c = 0; c < kept.size(); ++c) sub(r, c) = design.x(r, kept[c]);
        const auto sub_beta = least_squares_solve(sub, design.y);
        for (std::size_t c = 0; c < kept.size(); ++c) beta[kept[c]] = sub_beta[c];
      }
      fit.beta = std::move(beta);
      fit.rss = residual_sum_of_squares(design, fit.beta);
    }
    report.row_fits[i] = std::move(fit);
  });
  for (std::size_t i = 0; i < p; ++i)
    if (capped[i]) report.capped_series.push_back(i);

  report.coeffs.assign(q, DenseMatrix(p, p));
  for (const auto& fit : report.row_fits) {
    const std::size_t tau = fit.tau();
    for (std::size_t r = 0; r < q; ++r)
      for (std::size_t m = 0; m < tau; ++m)
        report.coeffs[r](fit.series, fit.members[m]) = fit.beta[r * tau + m];
  }
  return report;
}

struct NvarFit {
  NvarModel model;
  FitReport report;
  std::vector<FitReport> per_lag;  // one report per entry of the q grid
  double seconds = 0.0;
};

inline NvarModel assemble_model(const FitReport& report, const DistanceMatrix& distance) {
  NvarModel model;
  model.p = distance.size();
  model.q = report.q;
  model.coeffs = report.coeffs;
  model.radius = report.d_hat;
  model.distance = distance;
  return model;
}

/// Runs select_neighborhood for every q in the grid and keeps the lag order with the
/// smallest summed per-series minimal BIC (ties to the smaller q).
inline NvarFit fit_nvar(const SeriesPanel& panel, const DistanceMatrix& distance,
                        std::span<const std::size_t> q_grid, std::span<const double> radii,
                        const SelectionOptions& options = {}) {
  require(!q_grid.empty(), ErrorCode::InvalidArgument, "lag-order grid is empty");
  const auto start = std::chrono::steady_clock::now();
  NvarFit result;
  std::size_t best = 0;
  for (std::size_t k = 0; k < q_grid.size(); ++k) {
    result.per_lag.push_back(select_neighborhood(panel, distance, q_grid[k], radii, options));
    if (result.per_lag[k].criterion < result.per_lag[best].criterion) best = k;
  }
  result.report = result.per_lag[best];
  result.model = assemble_model(result.report, distance);
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

/// y_hat(t) = sum_r A_r y(t - r); history holds the last q columns, most recent last.
inline std::vector<double> predict_one_step(const NvarModel& model, const DenseMatrix& history) {
  model.validate_shape();
  require(history.rows() == model.p, ErrorCode::ShapeMismatch, "history must have p rows");
  require(history.cols() >= model.q, ErrorCode::HistoryTooShort,
          "history has " + std::to_string(history.cols()) + " columns, model needs q = " +
              std::to_string(model.q));
  require(history.cols() == model.q, ErrorCode::ShapeMismatch,
          "history must hold exactly q columns");
  std::vector<double> out(model.p, 0.0);
  for (std::size_t r = 1; r <= model.q; ++r) {
    const std::size_t col = model.q - r;
    const auto& a = model.coeffs[r - 1];
    for (std::size_t i = 0; i < model.p; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < model.p; ++j) acc += a(i, j) * history(j, col);
      out[i] += acc;
    }
  }
  return out;
}

}  // namespace nvar
