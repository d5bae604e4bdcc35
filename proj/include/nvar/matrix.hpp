#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nvar/errors.hpp"
#include "nvar/rng.hpp"

namespace nvar {

/// Row-major dense matrix of doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    require(values_.size() == rows_ * cols_, ErrorCode::ShapeMismatch,
            "matrix values length " + std::to_string(values_.size()) + " != " +
                std::to_string(rows_) + "x" + std::to_string(cols_));
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static DenseMatrix diagonal(std::span<const double> diag) {
    DenseMatrix m(diag.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {values_.data() + r * cols_, cols_};
  }

  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  bool all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  DenseMatrix transpose() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

inline DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.cols() == b.rows(), ErrorCode::ShapeMismatch, "matrix product inner dimensions differ");
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

inline DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::ShapeMismatch,
          "matrix difference shapes differ");
  DenseMatrix out = a;
  for (std::size_t k = 0; k < out.values().size(); ++k) out.values()[k] -= b.values()[k];
  return out;
}

inline DenseMatrix operator*(double s, const DenseMatrix& a) {
  DenseMatrix out = a;
  for (double& v : out.values()) v *= s;
  return out;
}

inline std::vector<double> multiply(const DenseMatrix& a, std::span<const double> x) {
  require(a.cols() == x.size(), ErrorCode::ShapeMismatch, "matrix-vector sizes differ");
  std::vector<double> y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) acc += r[j] * x[j];
    y[i] = acc;
  }
  return y;
}

inline std::vector<double> multiply_transposed(const DenseMatrix& a, std::span<const double> x) {
  require(a.rows() == x.size(), ErrorCode::ShapeMismatch, "transposed matrix-vector sizes differ");
  std::vector<double> y(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    const double xi = x[i];
    if (xi == 0.0) continue;
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += r[j] * xi;
  }
  return y;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm2(std::span<const double> a) {
  // Scaled accumulation avoids overflow on large entries.
  double scale = 0.0;
  for (double v : a) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return 0.0;
  double acc = 0.0;
  for (double v : a) {
    const double s = v / scale;
    acc += s * s;
  }
  return scale * std::sqrt(acc);
}

namespace detail {

inline void require_finite(const DenseMatrix& a, const char* what) {
  require(a.all_finite(), ErrorCode::NonFinite, std::string(what) + " contains NaN or Inf");
}

inline void require_finite(std::span<const double> v, const char* what) {
  require(std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); }),
          ErrorCode::NonFinite, std::string(what) + " contains NaN or Inf");
}

}  // namespace detail

/// Relative threshold on |R_jj| / max|R_ii| below which a design is rank deficient.
inline constexpr double kRankTolerance = 1e-10;

/**
 * Least-squares solution of min ||y - X beta||^2 via Householder QR.
 *
 * Throws RankDeficient when the smallest diagonal of R falls below
 * kRankTolerance times the largest, and InsufficientData when n < k.
 */
inline std::vector<double> least_squares_solve(const DenseMatrix& x, std::span<const double> y) {
  const std::size_t n = x.rows();
  const std::size_t k = x.cols();
  require(y.size() == n, ErrorCode::ShapeMismatch,
          "response length " + std::to_string(y.size()) + " != design rows " + std::to_string(n));
  require(k >= 1, ErrorCode::InvalidArgument, "design has no columns");
  require(n >= k, ErrorCode::InsufficientData,
          "least squares needs rows >= columns (" + std::to_string(n) + " < " + std::to_string(k) + ")");
  detail::require_finite(x, "design matrix");
  detail::require_finite(y, "response vector");

  // Column-major working copy: Householder reflections act on columns.
  std::vector<double> a(n * k);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < k; ++c) a[c * n + r] = x(r, c);
  std::vector<double> b(y.begin(), y.end());
  std::vector<double> diag(k);

  for (std::size_t j = 0; j < k; ++j) {
    double* col = a.data() + j * n;
    const double alpha_norm = norm2(std::span<const double>(col + j, n - j));
    if (alpha_norm == 0.0) {
      diag[j] = 0.0;
      continue;
    }
    const double alpha = col[j] > 0 ? -alpha_norm : alpha_norm;
    // v = x - alpha e1, stored in place; H = I - 2 v v^T / (v^T v).
    col[j] -= alpha;
    double vtv = 0.0;
    for (std::size_t r = j; r < n; ++r) vtv += col[r] * col[r];
    for (std::size_t c = j + 1; c < k; ++c) {
      double* other = a.data() + c * n;
      double s = 0.0;
      for (std::size_t r = j; r < n; ++r) s += col[r] * other[r];
      const double f = 2.0 * s / vtv;
      for (std::size_t r = j; r < n; ++r) other[r] -= f * col[r];
    }
    double s = 0.0;
    for (std::size_t r = j; r < n; ++r) s += col[r] * b[r];
    const double f = 2.0 * s / vtv;
    for (std::size_t r = j; r < n; ++r) b[r] -= f * col[r];
    diag[j] = alpha;
  }

  double largest = 0.0;
  double smallest = std::numeric_limits<double>::infinity();
  for (double d : diag) {
    largest = std::max(largest, std::abs(d));
    smallest = std::min(smallest, std::abs(d));
  }
  if (largest == 0.0 || smallest < kRankTolerance * largest) {
    fail(ErrorCode::RankDeficient, "design matrix is rank deficient (min |R_jj| = " +
                                       std::to_string(smallest) + ", max = " +
                                       std::to_string(largest) + ")");
  }

  std::vector<double> beta(k);
  for (std::size_t jj = k; jj-- > 0;) {
    double acc = b[jj];
    for (std::size_t c = jj + 1; c < k; ++c) acc -= a[c * n + jj] * beta[c];
    beta[jj] = acc / diag[jj];
  }
  return beta;
}

inline double frobenius_norm(const DenseMatrix& a) {
  require(!a.empty(), ErrorCode::InvalidArgument, "frobenius_norm of an empty matrix");
  detail::require_finite(a, "matrix");
  return norm2(a.values());
}

struct SpectralNormResult {
  double value = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

inline constexpr double kSpectralRelTol = 1e-12;
inline constexpr std::size_t kSpectralMaxIter = 10000;

/**
 * Largest singular value by power iteration on A^T A.
 *
 * Starts from the normalized all-ones vector. If an iterate collapses to zero
 * (start orthogonal to the dominant subspace) the start is perturbed with a
 * fixed pseudo-random vector and the iteration restarts. Converged when the
 * relative change of the estimate drops below kSpectralRelTol; otherwise the
 * best estimate is returned with converged = false.
 */
inline SpectralNormResult spectral_norm_detail(const DenseMatrix& a) {
  require(!a.empty(), ErrorCode::InvalidArgument, "spectral_norm of an empty matrix");
  detail::require_finite(a, "matrix");
  SpectralNormResult result;
  const std::size_t k = a.cols();
  if (norm2(a.values()) == 0.0) {
    result.converged = true;
    return result;
  }

  std::vector<double> v(k, 1.0 / std::sqrt(static_cast<double>(k)));
  CounterRng perturb(0x5EC7F00DULL);
  double estimate = 0.0;
  std::size_t restarts = 0;

  for (std::size_t it = 1; it <= kSpectralMaxIter; ++it) {
    result.iterations = it;
    const auto av = multiply(a, v);
    const double sigma = norm2(av);
    auto w = multiply_transposed(a, av);
    const double wn = norm2(w);
    if (wn == 0.0 || sigma == 0.0) {
      // Stagnated in the null space; perturb the start deterministically.
      ++restarts;
      for (auto& x : v) x += perturb.uniform(-0.5, 0.5) * static_cast<double>(restarts);
      const double vn = norm2(v);
      for (auto& x : v) x /= vn;
      continue;
    }
    for (auto& x : w) x /= wn;
    v = std::move(w);
    const double change = std::abs(sigma - estimate);
    estimate = std::max(estimate, sigma);
    result.value = estimate;
    if (it > 1 && change <= kSpectralRelTol * sigma) {
      result.converged = true;
      return result;
    }
  }
  return result;
}

inline double spectral_norm(const DenseMatrix& a) { return spectral_norm_detail(a).value; }

struct StationarityMargin {
  bool is_stationary = false;
  double bound = 0.0;
};

/// Upper bound on the spectral radius: min over m in {1,2,4,...,32} of ||A^m||_2^(1/m).
inline StationarityMargin stationarity_margin(const DenseMatrix& a_tilde) {
  require(a_tilde.rows() == a_tilde.cols() && !a_tilde.empty(), ErrorCode::ShapeMismatch,
          "stationarity_margin requires a non-empty square matrix");
  detail::require_finite(a_tilde, "companion matrix");
  double best = std::numeric_limits<double>::infinity();
  DenseMatrix power = a_tilde;
  for (int m = 1; m <= 32; m *= 2) {
    if (!power.all_finite()) break;  // overflow: higher powers cannot tighten the bound
    const double norm = spectral_norm(power);
    best = std::min(best, std::pow(norm, 1.0 / m));
    if (best == 0.0) break;
    if (m < 32) power = power * power;
  }
  return {best < 1.0, best};
}

}  // namespace nvar
