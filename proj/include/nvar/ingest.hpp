#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nvar/errors.hpp"
#include "nvar/matrix.hpp"
#include "nvar/model.hpp"

namespace nvar {

struct CalendarDate {
  int year = 1970;
  int month = 1;
  int day = 1;

  /// Months since year 0, so consecutive calendar months differ by one.
  long month_index() const noexcept { return static_cast<long>(year) * 12 + (month - 1); }
};

inline bool is_leap_year(int y) noexcept { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

inline int days_in_month(int y, int m) noexcept {
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap_year(y) ? 29 : kDays[m - 1];
}

/// Strict YYYY-MM-DD.
inline std::optional<CalendarDate> parse_iso_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  auto field = [&](std::size_t pos, std::size_t len, int& out) {
    const char* b = s.data() + pos;
    const auto [ptr, ec] = std::from_chars(b, b + len, out);
    return ec == std::errc() && ptr == b + len;
  };
  CalendarDate d;
  if (!field(0, 4, d.year) || !field(5, 2, d.month) || !field(8, 2, d.day)) return std::nullopt;
  if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month))
    return std::nullopt;
  return d;
}

inline std::string month_label(long month_index) {
  const long y = month_index / 12;
  const long m = month_index % 12 + 1;
  std::string out = std::to_string(y) + "-";
  if (m < 10) out += '0';
  return out + std::to_string(m);
}

struct ObservationRecord {
  std::string site_id;
  CalendarDate date;
  double value = 0.0;
};

/// Site x month grid; months are the contiguous range [first_month, first_month + months).
struct RaggedMonthlyGrid {
  std::vector<std::string> site_ids;  // sorted
  long first_month = 0;
  std::size_t months = 0;
  std::vector<std::vector<std::optional<double>>> values;  // [site][month offset]

  std::size_t sites() const noexcept { return site_ids.size(); }
  bool observed(std::size_t site, std::size_t month) const { return values[site][month].has_value(); }

  void validate() const {
    require(values.size() == site_ids.size(), ErrorCode::ShapeMismatch, "grid row count differs from site count");
    bool any = false;
    for (const auto& row : values) {
      require(row.size() == months, ErrorCode::ShapeMismatch, "grid rows must span every month");
      for (const auto& c : row) any = any || c.has_value();
    }
    require(any, ErrorCode::NoCompleteCell, "grid has no observed cell");
  }
};

/// Cell (site, month) = maximum of that site's values within the calendar month.
inline RaggedMonthlyGrid monthly_max_aggregate(const std::vector<ObservationRecord>& records) {
  require(!records.empty(), ErrorCode::NoCompleteCell, "no observation records");
  std::map<std::string, std::map<long, double>> cells;
  long lo = records.front().date.month_index(), hi = lo;
  for (const auto& r : records) {
    require(std::isfinite(r.value), ErrorCode::NonFinite, "record for site '" + r.site_id + "' has a non-finite value");
    const long m = r.date.month_index();
    lo = std::min(lo, m);
    hi = std::max(hi, m);
    auto [it, inserted] = cells[r.site_id].try_emplace(m, r.value);
    if (!inserted) it->second = std::max(it->second, r.value);
  }
  RaggedMonthlyGrid grid;
  grid.first_month = lo;
  grid.months = static_cast<std::size_t>(hi - lo + 1);
  for (const auto& [site, by_month] : cells) {
    grid.site_ids.push_back(site);
    std::vector<std::optional<double>> row(grid.months);
    for (const auto& [m, v] : by_month) row[static_cast<std::size_t>(m - lo)] = v;
    grid.values.push_back(std::move(row));
  }
  return grid;
}

struct SubmatrixSelection {
  std::vector<std::size_t> sites;  // ascending grid row indices
  std::size_t start = 0;           // month offset
  std::size_t length = 0;

  std::size_t score() const noexcept { return sites.size() * length; }
};

/**
 * Sites and contiguous month window without missing cells maximizing p * n.
 *
 * For every window the site set is all sites complete on it, which dominates
 * any subset. Ties: larger n, then earlier start.
 */
inline SubmatrixSelection select_complete_submatrix(const RaggedMonthlyGrid& grid) {
  grid.validate();
  const std::size_t p = grid.sites(), T = grid.months;
  // run[i][a]: number of consecutive observed months of site i starting at a.
  std::vector<std::vector<std::size_t>> run(p, std::vector<std::size_t>(T + 1, 0));
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t a = T; a-- > 0;) run[i][a] = grid.observed(i, a) ? run[i][a + 1] + 1 : 0;

  SubmatrixSelection best;
  for (std::size_t a = 0; a < T; ++a) {
    for (std::size_t len = 1; a + len <= T; ++len) {
      std::size_t count = 0;
      for (std::size_t i = 0; i < p; ++i) count += run[i][a] >= len;
      if (count == 0) break;
      const std::size_t score = count * len;
      const bool better = score > best.score() || (score == best.score() && len > best.length);
      if (better) {
        best.start = a;
        best.length = len;
        best.sites.clear();
        for (std::size_t i = 0; i < p; ++i)
          if (run[i][a] >= len) best.sites.push_back(i);
      }
    }
  }
  require(best.length > 0, ErrorCode::NoCompleteCell, "no site is fully observed on any window");
  return best;
}

/// Panel of the selected cells with "YYYY-MM" timestamps.
inline SeriesPanel extract_panel(const RaggedMonthlyGrid& grid, const SubmatrixSelection& sel) {
  DenseMatrix values(sel.sites.size(), sel.length);
  std::vector<std::string> ids, times;
  for (std::size_t k = 0; k < sel.sites.size(); ++k) {
    ids.push_back(grid.site_ids[sel.sites[k]]);
    for (std::size_t t = 0; t < sel.length; ++t) {
      const auto& cell = grid.values[sel.sites[k]][sel.start + t];
      require(cell.has_value(), ErrorCode::NoCompleteCell, "selection contains a missing cell");
      values(k, t) = *cell;
    }
  }
  for (std::size_t t = 0; t < sel.length; ++t)
    times.push_back(month_label(grid.first_month + static_cast<long>(sel.start + t)));
  return SeriesPanel(std::move(values), std::move(ids), std::move(times));
}

struct TrainTestSplit {
  SeriesPanel train;
  SeriesPanel test;
};

/// First floor(fraction * n) columns train, the rest test; both need at least q + 1 columns.
inline TrainTestSplit split_train_test(const SeriesPanel& panel, double fraction, std::size_t q = 1) {
  require(fraction > 0.0 && fraction < 1.0, ErrorCode::InvalidArgument, "fraction must lie in (0, 1)");
  const std::size_t n = panel.n();
  const auto cut = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  require(cut >= q + 1 && n - cut >= q + 1, ErrorCode::TooShort,
          "split of n = " + std::to_string(n) + " at " + std::to_string(fraction) +
              " leaves a part shorter than q + 1 = " + std::to_string(q + 1));
  return {panel.columns(0, cut), panel.columns(cut, n)};
}

struct CenteredPanel {
  SeriesPanel panel;
  std::vector<double> means;
};

/// Subtracts per-series means taken over the first `mean_columns` columns (all when 0).
inline CenteredPanel center_series(const SeriesPanel& panel, std::size_t mean_columns = 0) {
  const std::size_t n = panel.n();
  const std::size_t m = mean_columns == 0 ? n : mean_columns;
  require(m >= 1 && m <= n, ErrorCode::InvalidArgument, "mean window must cover 1..n columns");
  CenteredPanel out{panel, std::vector<double>(panel.p(), 0.0)};
  for (std::size_t i = 0; i < panel.p(); ++i) {
    double s = 0.0;
    for (std::size_t t = 0; t < m; ++t) s += panel(i, t);
    out.means[i] = s / static_cast<double>(m);
    for (std::size_t t = 0; t < n; ++t) out.panel.values(i, t) -= out.means[i];
  }
  return out;
}

inline std::vector<double> decenter(std::vector<double> prediction, const std::vector<double>& means) {
  require(prediction.size() == means.size(), ErrorCode::ShapeMismatch, "prediction and means differ in length");
  for (std::size_t i = 0; i < means.size(); ++i) prediction[i] += means[i];
  return prediction;
}

}  // namespace nvar
