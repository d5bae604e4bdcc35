#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nvar/errors.hpp"
#include "nvar/geometry.hpp"
#include "nvar/matrix.hpp"
#include "nvar/rng.hpp"

namespace nvar {

/// p series observed at n time points; column t is y(t + 1).
struct SeriesPanel {
  DenseMatrix values;  // p x n
  std::vector<std::string> ids;
  std::vector<std::string> timestamps;  // empty, or one label per column

  SeriesPanel() = default;
  explicit SeriesPanel(DenseMatrix v, std::vector<std::string> series_ids = {},
                       std::vector<std::string> times = {})
      : values(std::move(v)), ids(std::move(series_ids)), timestamps(std::move(times)) {
    if (ids.empty()) ids = default_ids(values.rows());
    validate();
  }

  std::size_t p() const noexcept { return values.rows(); }
  std::size_t n() const noexcept { return values.cols(); }
  double operator()(std::size_t series, std::size_t t) const noexcept { return values(series, t); }

  void validate() const {
    require(ids.size() == values.rows(), ErrorCode::ShapeMismatch,
            "panel has " + std::to_string(values.rows()) + " series but " +
                std::to_string(ids.size()) + " ids");
    require(timestamps.empty() || timestamps.size() == values.cols(), ErrorCode::ShapeMismatch,
            "timestamp count differs from panel length");
    require(values.all_finite(), ErrorCode::NonFinite, "panel contains missing or non-finite values");
  }

  /// Columns [begin, end).
  SeriesPanel columns(std::size_t begin, std::size_t end) const {
    require(begin <= end && end <= n(), ErrorCode::InvalidArgument, "column range out of bounds");
    DenseMatrix out(p(), end - begin);
    for (std::size_t i = 0; i < p(); ++i)
      for (std::size_t t = begin; t < end; ++t) out(i, t - begin) = values(i, t);
    std::vector<std::string> times;
    if (!timestamps.empty())
      times.assign(timestamps.begin() + static_cast<std::ptrdiff_t>(begin),
                   timestamps.begin() + static_cast<std::ptrdiff_t>(end));
    return SeriesPanel(std::move(out), ids, std::move(times));
  }
};

struct NoiseSpec {
  double sigma_e = 1.0;

  void validate() const {
    require(std::isfinite(sigma_e) && sigma_e > 0.0, ErrorCode::InvalidArgument,
            "sigma_e must be finite and positive");
  }
};

/// NVAR(q): coeffs[r] is A_{r+1}; A_r(i, j) = 0 whenever D(i, j) > radius.
struct NvarModel {
  std::size_t p = 0;
  std::size_t q = 1;
  std::vector<DenseMatrix> coeffs;
  double radius = 0.0;
  DistanceMatrix distance;

  void validate_shape() const {
    require(q >= 1, ErrorCode::InvalidArgument, "lag order q must be >= 1");
    require(coeffs.size() == q, ErrorCode::ShapeMismatch, "model needs exactly q coefficient matrices");
    for (const auto& a : coeffs)
      require(a.rows() == p && a.cols() == p, ErrorCode::ShapeMismatch,
              "coefficient matrices must be p x p");
    require(distance.size() == p, ErrorCode::ShapeMismatch, "distance matrix must be p x p");
  }

  /// True when every coefficient outside the radius-neighborhood is exactly zero.
  bool respects_support() const {
    for (const auto& a : coeffs)
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j)
          if (!(distance(i, j) <= radius) && a(i, j) != 0.0) return false;
    return true;
  }
};

/// Order-1 companion matrix: [A_1 ... A_q] on top, identity blocks on the first subdiagonal.
inline DenseMatrix companion_form(const NvarModel& model) {
  model.validate_shape();
  const std::size_t p = model.p, q = model.q;
  if (q == 1) return model.coeffs.front();
  DenseMatrix out(q * p, q * p);
  for (std::size_t r = 0; r < q; ++r)
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j) out(i, r * p + j) = model.coeffs[r](i, j);
  for (std::size_t b = 1; b < q; ++b)
    for (std::size_t i = 0; i < p; ++i) out(b * p + i, (b - 1) * p + i) = 1.0;
  return out;
}

inline constexpr std::size_t kDefaultBurnIn = 200;

/**
 * Iterates the model from a zero state for burn_in + n steps with
 * N(0, sigma_e^2 I) innovations and keeps the last n columns.
 *
 * Innovations are drawn from CounterRng(seed), p per step in series order,
 * so the same seed always yields a bit-identical panel.
 */
inline SeriesPanel simulate(const NvarModel& model, const NoiseSpec& noise, std::size_t n,
                            std::size_t burn_in, std::uint64_t seed) {
  model.validate_shape();
  noise.validate();
  require(n >= 1, ErrorCode::InvalidArgument, "simulation length n must be >= 1");
  require(stationarity_margin(companion_form(model)).is_stationary, ErrorCode::NonStationaryModel,
          "model fails the stationarity check");

  const std::size_t p = model.p, q = model.q, total = burn_in + n;
  // Sparse row view of every lag matrix keeps long simulations cheap.
  struct Term {
    std::size_t lag, j;
    double a;
  };
  std::vector<std::vector<Term>> rows(p);
  for (std::size_t r = 0; r < q; ++r)
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j)
        if (const double a = model.coeffs[r](i, j); a != 0.0) rows[i].push_back({r + 1, j, a});

  CounterRng rng(seed);
  DenseMatrix path(p, total + q);  // q leading zero columns hold the initial state
  for (std::size_t step = 0; step < total; ++step) {
    const std::size_t t = step + q;
    for (std::size_t i = 0; i < p; ++i) {
      double acc = 0.0;
      for (const auto& term : rows[i]) acc += term.a * path(term.j, t - term.lag);
      path(i, t) = acc + noise.sigma_e * rng.normal();
    }
  }

  DenseMatrix out(p, n);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t t = 0; t < n; ++t) out(i, t) = path(i, q + burn_in + t);
  return SeriesPanel(std::move(out));
}

namespace detail {

inline constexpr double kNormLow = 0.3;
inline constexpr double kNormHigh = 0.9;

/// Fill the radius-neighborhood support with U[-1, 1] draws (row-major), then
/// rescale to a spectral norm u ~ U[0.3, 0.9].
inline NvarModel random_model(DistanceMatrix distance, double radius, CounterRng& rng) {
  const std::size_t p = distance.size();
  const auto nbhd = neighborhood(distance, radius);
  DenseMatrix a(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j : nbhd.members[i]) a(i, j) = rng.uniform(-1.0, 1.0);
  const double u = rng.uniform(kNormLow, kNormHigh);
  const double norm = spectral_norm(a);
  if (norm > 0.0) a = (u / norm) * a;

  NvarModel model;
  model.p = p;
  model.q = 1;
  model.coeffs = {std::move(a)};
  model.radius = radius;
  model.distance = std::move(distance);
  return model;
}

}  // namespace detail

/// Banded NVAR(1) on a 1-D lattice: support |i - j| <= d0.
inline NvarModel generate_case1(std::size_t p, std::size_t d0, std::uint64_t seed) {
  require(p >= 1, ErrorCode::InvalidArgument, "p must be >= 1");
  CounterRng rng(seed);
  return detail::random_model(lattice1d_distances(p), static_cast<double>(d0), rng);
}

/// NVAR(1) on a side x side lattice with city-block neighborhoods of radius d0.
inline NvarModel generate_case2(std::size_t side, std::size_t d0, std::uint64_t seed) {
  require(side >= 1, ErrorCode::InvalidArgument, "lattice side must be >= 1");
  CounterRng rng(seed);
  return detail::random_model(lattice2d_distances(side), static_cast<double>(d0), rng);
}

/// Side of the square on which p uniform points average 4 neighbors within unit distance.
inline double case3_square_side(std::size_t p) {
  return std::sqrt(static_cast<double>(p) * std::numbers::pi / 4.0);
}

struct SpatialCase {
  SensorLayout layout;
  NvarModel model;
};

/// p uniform points on a square of side sqrt(p*pi/4); Euclidean support of radius d0_steps.
inline SpatialCase generate_case3(std::size_t p, std::size_t d0_steps, std::uint64_t seed) {
  require(p >= 2, ErrorCode::InvalidArgument, "case 3 needs p >= 2");
  CounterRng rng(seed);
  const double side = case3_square_side(p);
  std::vector<Point> pts(p);
  for (auto& pt : pts) {
    const double x = rng.uniform(0.0, side);
    const double y = rng.uniform(0.0, side);
    pt = {x, y};
  }
  SensorLayout layout;
  layout.ids = default_ids(p);
  layout.coordinates = std::move(pts);
  auto distance = euclidean_distances(layout, DistanceScale::fixed(1.0));
  auto model = detail::random_model(std::move(distance), static_cast<double>(d0_steps), rng);
  return {std::move(layout), std::move(model)};
}

}  // namespace nvar
