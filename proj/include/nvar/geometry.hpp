#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "nvar/errors.hpp"

namespace nvar {

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

/// Symmetric p x p distances with a zero diagonal. Unreachable graph pairs hold +inf.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;

  explicit DistanceMatrix(std::size_t p) : p_(p), entries_(p * p, 0.0) {}

  DistanceMatrix(std::size_t p, std::vector<double> entries) : p_(p), entries_(std::move(entries)) {
    validate();
  }

  std::size_t size() const noexcept { return p_; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return entries_[i * p_ + j]; }

  /// Sets both (i, j) and (j, i).
  void set(std::size_t i, std::size_t j, double d) noexcept {
    entries_[i * p_ + j] = d;
    entries_[j * p_ + i] = d;
  }

  const std::vector<double>& entries() const noexcept { return entries_; }

  double max_finite() const noexcept {
    double m = 0.0;
    for (double v : entries_)
      if (std::isfinite(v)) m = std::max(m, v);
    return m;
  }

  void validate() const {
    require(entries_.size() == p_ * p_, ErrorCode::ShapeMismatch, "distance matrix is not square");
    for (std::size_t i = 0; i < p_; ++i) {
      require((*this)(i, i) == 0.0, ErrorCode::InvalidArgument,
              "distance matrix diagonal must be zero (row " + std::to_string(i) + ")");
      for (std::size_t j = 0; j < p_; ++j) {
        const double d = (*this)(i, j);
        require(!std::isnan(d) && d >= 0.0 && d != -kUnreachable, ErrorCode::InvalidArgument,
                "distance entries must be non-negative (" + std::to_string(i) + "," +
                    std::to_string(j) + ")");
        require(d == (*this)(j, i), ErrorCode::InvalidArgument,
                "distance matrix must be symmetric (" + std::to_string(i) + "," +
                    std::to_string(j) + ")");
      }
    }
  }

  friend bool operator==(const DistanceMatrix&, const DistanceMatrix&) = default;

 private:
  std::size_t p_ = 0;
  std::vector<double> entries_;
};

using Point = std::vector<double>;

/// Series identifiers plus optional coordinates or an adjacency relation.
struct SensorLayout {
  std::vector<std::string> ids;
  std::optional<std::vector<Point>> coordinates;
  std::optional<std::vector<std::vector<bool>>> adjacency;

  std::size_t size() const noexcept { return ids.size(); }

  std::size_t dimension() const {
    require(coordinates.has_value() && !coordinates->empty(), ErrorCode::MissingCoordinates,
            "layout has no coordinates");
    return coordinates->front().size();
  }

  void validate() const {
    require(!(coordinates && adjacency), ErrorCode::InvalidArgument,
            "layout may carry coordinates or adjacency, not both");
    if (coordinates) {
      require(coordinates->size() == ids.size(), ErrorCode::ShapeMismatch,
              "coordinate count differs from id count");
      const std::size_t m = coordinates->empty() ? 1 : coordinates->front().size();
      require(m >= 1 && m <= 3, ErrorCode::InvalidArgument, "coordinates must be 1-, 2- or 3-D");
      for (const auto& pt : *coordinates) {
        require(pt.size() == m, ErrorCode::ShapeMismatch, "coordinates have mixed dimensions");
        for (double v : pt)
          require(std::isfinite(v), ErrorCode::NonFinite, "coordinate is not finite");
      }
    }
    if (adjacency) {
      const std::size_t p = adjacency->size();
      require(p == ids.size(), ErrorCode::ShapeMismatch, "adjacency size differs from id count");
      for (std::size_t i = 0; i < p; ++i) {
        require((*adjacency)[i].size() == p, ErrorCode::ShapeMismatch, "adjacency is not square");
        require(!(*adjacency)[i][i], ErrorCode::InvalidArgument, "adjacency diagonal must be false");
        for (std::size_t j = 0; j < p; ++j)
          require((*adjacency)[i][j] == (*adjacency)[j][i], ErrorCode::InvalidArgument,
                  "adjacency must be symmetric");
      }
    }
  }
};

inline std::vector<std::string> default_ids(std::size_t p) {
  std::vector<std::string> ids;
  ids.reserve(p);
  for (std::size_t i = 0; i < p; ++i) ids.push_back("s" + std::to_string(i));
  return ids;
}

/// Per-series neighbor sets at a fixed radius; members[i] is sorted and contains i.
struct NeighborhoodIndex {
  double radius = 0.0;
  std::vector<std::vector<std::size_t>> members;

  std::size_t max_size() const noexcept {
    std::size_t m = 0;
    for (const auto& v : members) m = std::max(m, v.size());
    return m;
  }
};

/// d(i, j) = |i - j|.
inline DistanceMatrix lattice1d_distances(std::size_t p) {
  require(p >= 1, ErrorCode::InvalidArgument, "lattice1d needs p >= 1");
  DistanceMatrix d(p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j) d.set(i, j, static_cast<double>(j - i));
  return d;
}

/// City-block distance on a side x side lattice vectorized row by row.
inline DistanceMatrix lattice2d_distances(std::size_t side) {
  require(side >= 1, ErrorCode::InvalidArgument, "lattice2d needs side >= 1");
  const std::size_t p = side * side;
  DistanceMatrix d(p);
  for (std::size_t a = 0; a < p; ++a) {
    const auto ra = static_cast<long>(a / side), ca = static_cast<long>(a % side);
    for (std::size_t b = a + 1; b < p; ++b) {
      const auto rb = static_cast<long>(b / side), cb = static_cast<long>(b % side);
      d.set(a, b, static_cast<double>(std::labs(ra - rb) + std::labs(ca - cb)));
    }
  }
  return d;
}

/// Either an explicit multiplicative scale or the automatic (p/2)/d_max^m rule.
struct DistanceScale {
  std::optional<double> factor;  // nullopt selects auto

  static DistanceScale automatic() { return {}; }
  static DistanceScale fixed(double f) { return {f}; }
};

inline DistanceMatrix euclidean_distances(const SensorLayout& layout,
                                          DistanceScale scale = DistanceScale::automatic()) {
  layout.validate();
  require(layout.coordinates.has_value(), ErrorCode::MissingCoordinates,
          "euclidean distances need coordinates");
  const auto& pts = *layout.coordinates;
  const std::size_t p = pts.size();
  require(p >= 1, ErrorCode::InvalidArgument, "layout is empty");
  const std::size_t m = pts.front().size();

  std::vector<double> raw(p * p, 0.0);
  double d_max = 0.0;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        const double diff = pts[i][k] - pts[j][k];
        acc += diff * diff;
      }
      const double dist = std::sqrt(acc);
      raw[i * p + j] = raw[j * p + i] = dist;
      d_max = std::max(d_max, dist);
    }

  double factor = 1.0;
  if (scale.factor) {
    require(*scale.factor > 0.0 && std::isfinite(*scale.factor), ErrorCode::InvalidArgument,
            "distance scale must be positive");
    factor = *scale.factor;
  } else if (d_max > 0.0) {
    factor = (static_cast<double>(p) / 2.0) / std::pow(d_max, static_cast<double>(m));
  }
  for (double& v : raw) v *= factor;
  return DistanceMatrix(p, std::move(raw));
}

/// Unweighted hop counts by breadth-first search from every node.
inline DistanceMatrix graph_shortest_path_distances(const SensorLayout& layout) {
  layout.validate();
  require(layout.adjacency.has_value(), ErrorCode::InvalidArgument,
          "graph distances need an adjacency matrix");
  const auto& adj = *layout.adjacency;
  const std::size_t p = adj.size();
  std::vector<std::vector<std::size_t>> nbrs(p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j)
      if (adj[i][j]) nbrs[i].push_back(j);

  std::vector<double> entries(p * p, kUnreachable);
  std::vector<std::size_t> hops(p);
  std::queue<std::size_t> frontier;
  constexpr auto kUnseen = static_cast<std::size_t>(-1);
  for (std::size_t src = 0; src < p; ++src) {
    std::fill(hops.begin(), hops.end(), kUnseen);
    hops[src] = 0;
    frontier.push(src);
    while (!frontier.empty()) {
      const std::size_t u = frontier.front();
      frontier.pop();
      for (std::size_t v : nbrs[u]) {
        if (hops[v] != kUnseen) continue;
        hops[v] = hops[u] + 1;
        frontier.push(v);
      }
    }
    for (std::size_t j = 0; j < p; ++j)
      if (hops[j] != kUnseen) entries[src * p + j] = static_cast<double>(hops[j]);
  }
  return DistanceMatrix(p, std::move(entries));
}

/// members[i] = { j : D(i, j) <= radius }, ascending.
inline NeighborhoodIndex neighborhood(const DistanceMatrix& d, double radius) {
  require(radius >= 0.0 && !std::isnan(radius), ErrorCode::InvalidArgument,
          "neighborhood radius must be >= 0");
  NeighborhoodIndex index;
  index.radius = radius;
  index.members.resize(d.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = 0; j < d.size(); ++j)
      if (d(i, j) <= radius) index.members[i].push_back(j);
  return index;
}

/**
 * Ascending distinct finite distances usable as neighborhood radii.
 *
 * Starts at 0. Radii are kept while the largest neighborhood holds at most
 * tau_max series; the list ends at the first radius where that cap is reached.
 */
inline std::vector<double> candidate_radii(const DistanceMatrix& d, std::size_t tau_max) {
  require(tau_max >= 1, ErrorCode::InvalidArgument, "tau_max must be >= 1");
  std::set<double> distinct{0.0};
  for (double v : d.entries())
    if (std::isfinite(v)) distinct.insert(v);

  // Per-row sorted distances give |N_i^r| by binary search.
  const std::size_t p = d.size();
  std::vector<std::vector<double>> sorted_rows(p);
  for (std::size_t i = 0; i < p; ++i) {
    sorted_rows[i].assign(d.entries().begin() + static_cast<std::ptrdiff_t>(i * p),
                          d.entries().begin() + static_cast<std::ptrdiff_t>((i + 1) * p));
    std::sort(sorted_rows[i].begin(), sorted_rows[i].end());
  }

  std::vector<double> radii;
  for (double r : distinct) {
    std::size_t largest = 0;
    for (const auto& row : sorted_rows)
      largest = std::max(largest, static_cast<std::size_t>(
                                      std::upper_bound(row.begin(), row.end(), r) - row.begin()));
    if (largest > tau_max && !radii.empty()) break;
    radii.push_back(r);
    if (largest >= tau_max) break;
  }
  return radii;
}

/// Default neighborhood-size cap: floor(p / 2), at least 1.
inline std::size_t default_tau_max(std::size_t p) { return std::max<std::size_t>(1, p / 2); }

}  // namespace nvar
