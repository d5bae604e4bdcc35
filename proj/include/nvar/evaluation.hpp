#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nvar/baselines.hpp"
#include "nvar/errors.hpp"
#include "nvar/estimation.hpp"
#include "nvar/geometry.hpp"
#include "nvar/matrix.hpp"
#include "nvar/model.hpp"
#include "nvar/parallel.hpp"
#include "nvar/rng.hpp"

namespace nvar {

struct CoefficientErrors {
  double l2 = 0.0;    // spectral norm of A_hat_1 - A_1
  double frob = 0.0;  // Frobenius norm of A_hat_1 - A_1
  std::vector<double> l2_per_lag;
  std::vector<double> frob_per_lag;
};

inline CoefficientErrors coefficient_errors(const NvarModel& estimate, const NvarModel& truth) {
  require(estimate.p == truth.p && estimate.q == truth.q, ErrorCode::ShapeMismatch,
          "estimate and truth differ in p or q");
  estimate.validate_shape();
  truth.validate_shape();
  CoefficientErrors out;
  for (std::size_t r = 0; r < truth.q; ++r) {
    const auto diff = estimate.coeffs[r] - truth.coeffs[r];
    out.l2_per_lag.push_back(spectral_norm(diff));
    out.frob_per_lag.push_back(frobenius_norm(diff));
  }
  out.l2 = out.l2_per_lag.front();
  out.frob = out.frob_per_lag.front();
  return out;
}

/**
 * Rolling one-step-ahead mean squared prediction error.
 *
 * The test span is the last n - floor(split * n) columns. Its first q
 * columns seed the history; each of the next `horizon` columns is predicted
 * from the q observed columns before it (never from earlier predictions).
 */
inline double mspe_one_step(const NvarModel& model, const SeriesPanel& panel, double split,
                            std::size_t horizon) {
  model.validate_shape();
  require(panel.p() == model.p, ErrorCode::ShapeMismatch, "panel and model differ in p");
  require(split > 0.0 && split < 1.0, ErrorCode::InvalidArgument, "split must lie in (0, 1)");
  require(horizon >= 1, ErrorCode::InvalidArgument, "horizon must be >= 1");
  const std::size_t n = panel.n();
  const auto train = static_cast<std::size_t>(std::floor(split * static_cast<double>(n)));
  const std::size_t test = n - train;
  require(test >= horizon + model.q, ErrorCode::InsufficientTestSpan,
          "test span of " + std::to_string(test) + " columns cannot cover horizon " +
              std::to_string(horizon) + " plus q = " + std::to_string(model.q));

  double total = 0.0;
  DenseMatrix history(model.p, model.q);
  for (std::size_t h = 0; h < horizon; ++h) {
    const std::size_t t = train + model.q + h;
    for (std::size_t i = 0; i < model.p; ++i)
      for (std::size_t c = 0; c < model.q; ++c) history(i, c) = panel(i, t - model.q + c);
    const auto pred = predict_one_step(model, history);
    for (std::size_t i = 0; i < model.p; ++i) {
      const double e = pred[i] - panel(i, t);
      total += e * e;
    }
  }
  return total / static_cast<double>(horizon * model.p);
}

/// Largest horizon mspe_one_step accepts for this split.
inline std::size_t max_horizon(std::size_t n, double split, std::size_t q) {
  const auto train = static_cast<std::size_t>(std::floor(split * static_cast<double>(n)));
  const std::size_t test = n - train;
  return test > q ? test - q : 0;
}

// ---------------------------------------------------------------------------
// Monte Carlo harness
// ---------------------------------------------------------------------------

enum class Method { Nvar, Bvar, Lasso };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::Nvar: return "nvar";
    case Method::Bvar: return "bvar";
    case Method::Lasso: return "lasso";
  }
  return "nvar";
}

inline Method parse_method(const std::string& name) {
  if (name == "nvar") return Method::Nvar;
  if (name == "bvar") return Method::Bvar;
  if (name == "lasso") return Method::Lasso;
  fail(ErrorCode::InvalidArgument, "unknown method '" + name + "' (expected nvar|bvar|lasso)");
}

struct MonteCarloConfig {
  int case_id = 1;
  std::size_t p = 100;
  std::size_t d0 = 1;
  double sigma = 1.0;
  std::size_t n = 200;
  std::size_t reps = 50;
  std::vector<Method> methods{Method::Nvar, Method::Bvar, Method::Lasso};
  std::uint64_t seed = 1;
  std::size_t burn_in = kDefaultBurnIn;
  std::vector<double> radii{0, 1, 2, 3, 4};  // NVAR radii and BVAR bandwidths
  double c_n = 0.0;                          // <= 0 selects default_c_n(n)
  std::optional<OrderingKind> bvar_ordering;  // default: identity, longitude for case 3
  LassoConfig lasso;
  std::size_t threads = 0;

  void validate() const {
    require(case_id >= 1 && case_id <= 3, ErrorCode::InvalidArgument, "case must be 1, 2 or 3");
    require(reps >= 1, ErrorCode::InvalidArgument, "reps must be >= 1");
    require(n >= 2, ErrorCode::InvalidArgument, "n must be >= 2");
    require(!methods.empty(), ErrorCode::InvalidArgument, "at least one method is required");
    require(std::isfinite(sigma) && sigma > 0.0, ErrorCode::InvalidArgument, "sigma must be > 0");
    if (case_id == 2) {
      const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(p))));
      require(side * side == p, ErrorCode::InvalidArgument,
              "p must be a perfect square for the 2-D lattice (got " + std::to_string(p) + ")");
    }
    require(p >= (case_id == 3 ? 2u : 1u), ErrorCode::InvalidArgument, "p too small for this case");
  }
};

/// Seed of replication r: master seed + r. Model and noise use derived streams 1 and 2.
inline std::uint64_t replication_seed(std::uint64_t master, std::size_t rep) {
  return master + static_cast<std::uint64_t>(rep);
}

struct GeneratedCase {
  NvarModel model;
  SensorLayout layout;
};

inline GeneratedCase generate_case(int case_id, std::size_t p, std::size_t d0, std::uint64_t seed) {
  GeneratedCase out;
  switch (case_id) {
    case 1:
      out.model = generate_case1(p, d0, seed);
      out.layout.ids = default_ids(p);
      break;
    case 2: {
      const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(p))));
      require(side * side == p, ErrorCode::InvalidArgument,
              "p must be a perfect square for the 2-D lattice (got " + std::to_string(p) + ")");
      out.model = generate_case2(side, d0, seed);
      out.layout.ids = default_ids(p);
      break;
    }
    case 3: {
      auto spatial = generate_case3(p, d0, seed);
      out.model = std::move(spatial.model);
      out.layout = std::move(spatial.layout);
      break;
    }
    default:
      fail(ErrorCode::InvalidArgument, "case must be 1, 2 or 3");
  }
  return out;
}

struct TrialResult {
  std::size_t replication = 0;
  Method method = Method::Nvar;
  double estimate = std::numeric_limits<double>::quiet_NaN();  // d_hat or bandwidth
  double l2 = 0.0;
  double frob = 0.0;
  double seconds = 0.0;
  bool failed = false;
  std::string failure;
};

struct MethodSummary {
  Method method = Method::Nvar;
  std::size_t reps = 0;
  std::size_t completed = 0;
  std::size_t failures = 0;
  double mean_l2 = 0.0, sd_l2 = 0.0;
  double mean_frob = 0.0, sd_frob = 0.0;
  std::map<double, std::size_t> histogram;  // estimated radius -> count (empty for lasso)
};

struct SummaryTable {
  int case_id = 1;
  std::size_t p = 0, d0 = 0, n = 0;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> radii;  // histogram bins always reported
  std::vector<MethodSummary> methods;
  std::vector<TrialResult> trials;  // ordered by (replication, method)

  const MethodSummary& summary(Method m) const {
    for (const auto& s : methods)
      if (s.method == m) return s;
    fail(ErrorCode::InvalidArgument, "method " + to_string(m) + " not in summary");
  }
};

namespace detail {

inline void mean_sd(const std::vector<double>& xs, double& mean, double& sd) {
  mean = 0.0;
  sd = 0.0;
  if (xs.empty()) return;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace detail

/// Runs one replication for every configured method.
inline std::vector<TrialResult> run_replication(const MonteCarloConfig& config, std::size_t rep) {
  const std::uint64_t seed = replication_seed(config.seed, rep);
  std::vector<TrialResult> results;
  GeneratedCase generated;
  SeriesPanel panel;
  try {
    generated = generate_case(config.case_id, config.p, config.d0, derive_seed(seed, 1));
    panel = simulate(generated.model, NoiseSpec{config.sigma}, config.n, config.burn_in,
                     derive_seed(seed, 2));
  } catch (const Error& e) {
    for (Method m : config.methods) results.push_back({rep, m, {}, 0, 0, 0, true, e.what()});
    return results;
  }

  SelectionOptions options;
  options.c_n = config.c_n;
  const std::vector<std::size_t> q_grid{1};
  for (Method m : config.methods) {
    TrialResult trial;
    trial.replication = rep;
    trial.method = m;
    try {
      NvarModel estimate;
      switch (m) {
        case Method::Nvar: {
          auto fit = fit_nvar(panel, generated.model.distance, q_grid, config.radii, options);
          trial.estimate = fit.report.d_hat;
          trial.seconds = fit.seconds;
          estimate = std::move(fit.model);
          break;
        }
        case Method::Bvar: {
          const auto kind = config.bvar_ordering.value_or(
              config.case_id == 3 ? OrderingKind::Longitude : OrderingKind::Identity);
          auto fit = fit_bvar(panel, generated.layout, OrderingStrategy::of(kind), 1, config.radii,
                              options);
          trial.estimate = fit.report.d_hat;
          trial.seconds = fit.seconds;
          estimate = std::move(fit.model);
          break;
        }
        case Method::Lasso: {
          auto lasso = config.lasso;
          if (lasso.c_n <= 0.0) lasso.c_n = config.c_n;
          auto fit = fit_lasso(panel, 1, lasso);
          trial.seconds = fit.seconds;
          estimate = fit.as_model();
          break;
        }
      }
      const auto errs = coefficient_errors(estimate, generated.model);
      trial.l2 = errs.l2;
      trial.frob = errs.frob;
    } catch (const Error& e) {
      trial.failed = true;
      trial.failure = e.what();
    }
    results.push_back(std::move(trial));
  }
  return results;
}

inline SummaryTable summarize(const MonteCarloConfig& config, std::vector<TrialResult> trials) {
  SummaryTable table;
  table.case_id = config.case_id;
  table.p = config.p;
  table.d0 = config.d0;
  table.n = config.n;
  table.sigma = config.sigma;
  table.seed = config.seed;
  table.radii = config.radii;
  for (Method m : config.methods) {
    MethodSummary s;
    s.method = m;
    s.reps = config.reps;
    std::vector<double> l2, frob;
    for (const auto& t : trials) {
      if (t.method != m) continue;
      if (t.failed) {
        ++s.failures;
        continue;
      }
      ++s.completed;
      l2.push_back(t.l2);
      frob.push_back(t.frob);
      if (m != Method::Lasso) ++s.histogram[t.estimate];
    }
    detail::mean_sd(l2, s.mean_l2, s.sd_l2);
    detail::mean_sd(frob, s.mean_frob, s.sd_frob);
    table.methods.push_back(std::move(s));
  }
  table.trials = std::move(trials);
  return table;
}

/**
 * Full Monte Carlo experiment for one (case, p, d0, sigma, n) configuration.
 *
 * Replications run concurrently but each depends only on its own seed, and
 * the reduction is ordered by replication index, so the table does not depend
 * on the thread count.
 */
inline SummaryTable run_monte_carlo(const MonteCarloConfig& config,
                                    const std::function<void(std::size_t)>& on_done = {}) {
  config.validate();
  std::vector<std::vector<TrialResult>> per_rep(config.reps);
  std::mutex progress_mutex;
  std::size_t done = 0;
  parallel_for(config.reps, config.threads, [&](std::size_t rep) {
    per_rep[rep] = run_replication(config, rep);
    if (on_done) {
      std::lock_guard lock(progress_mutex);
      on_done(++done);
    }
  });
  std::vector<TrialResult> trials;
  for (auto& r : per_rep) trials.insert(trials.end(), r.begin(), r.end());
  return summarize(config, std::move(trials));
}

/// Histogram bin label, integral radii print without decimals.
inline std::string radius_label(double r) {
  std::ostringstream os;
  if (r == std::floor(r) && std::abs(r) < 1e15)
    os << static_cast<long long>(r);
  else
    os << std::setprecision(6) << r;
  return os.str();
}

/// Aligned text rendering: one line per method with mean(sd) and bandwidth counts.
inline std::string render_text(const std::vector<SummaryTable>& tables) {
  std::map<double, bool> bins;
  for (const auto& t : tables) {
    for (double r : t.radii) bins[r] = true;
    for (const auto& m : t.methods)
      for (const auto& [r, c] : m.histogram) bins[r] = true;
  }

  std::ostringstream os;
  os << std::left << std::setw(5) << "case" << std::setw(6) << "p" << std::setw(4) << "d0"
     << std::setw(7) << "sigma" << std::setw(6) << "n" << std::setw(7) << "method";
  for (const auto& [r, unused] : bins) os << std::right << std::setw(6) << radius_label(r);
  os << std::right << std::setw(14) << "L2" << std::setw(14) << "Frobenius" << std::setw(7)
     << "fail" << '\n';
  for (const auto& t : tables) {
    for (const auto& m : t.methods) {
      std::ostringstream sig;
      sig << t.sigma;
      os << std::left << std::setw(5) << t.case_id << std::setw(6) << t.p << std::setw(4) << t.d0
         << std::setw(7) << sig.str() << std::setw(6) << t.n << std::setw(7) << to_string(m.method);
      for (const auto& [r, unused] : bins) {
        const auto it = m.histogram.find(r);
        os << std::right << std::setw(6)
           << (m.method == Method::Lasso ? std::string("-")
                                         : std::to_string(it == m.histogram.end() ? 0 : it->second));
      }
      auto cell = [](double mean, double sd) {
        std::ostringstream c;
        c << std::fixed << std::setprecision(2) << mean << '(' << sd << ')';
        return c.str();
      };
      os << std::right << std::setw(14) << cell(m.mean_l2, m.sd_l2) << std::setw(14)
         << cell(m.mean_frob, m.sd_frob) << std::setw(7) << m.failures << '\n';
    }
  }
  return os.str();
}

}  // namespace nvar
