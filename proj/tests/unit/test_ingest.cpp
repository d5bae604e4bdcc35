#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "nvar/ingest.hpp"
#include "nvar/io.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using nvar::CalendarDate;
using nvar::ObservationRecord;
using nvar::RaggedMonthlyGrid;

namespace {

ObservationRecord rec(std::string site, int y, int m, int d, double v) {
  return {std::move(site), CalendarDate{y, m, d}, v};
}

RaggedMonthlyGrid random_grid(nvar::CounterRng& rng, std::size_t p, std::size_t months, double density) {
  RaggedMonthlyGrid grid;
  grid.months = months;
  for (std::size_t i = 0; i < p; ++i) {
    grid.site_ids.push_back("s" + std::to_string(i));
    std::vector<std::optional<double>> row(months);
    for (auto& c : row)
      if (rng.uniform() < density) c = rng.normal();
    grid.values.push_back(std::move(row));
  }
  grid.values[0][0] = 1.0;  // at least one observed cell
  return grid;
}

}  // namespace

TEST(ParseIsoDate, AcceptsAndRejects) {
  const auto d = nvar::parse_iso_date("2000-02-29");
  ASSERT_TRUE(d.has_value());
  EXPECT_EQ(d->month_index(), 2000L * 12 + 1);
  for (const char* bad : {"1900-02-29", "2001-13-01", "2001-1-01", "2001/01/01", "2001-04-31", ""})
    EXPECT_FALSE(nvar::parse_iso_date(bad).has_value()) << bad;
  EXPECT_EQ(nvar::month_label(2001L * 12 + 8), "2001-09");
}

TEST(MonthlyMax, Examples) {
  const auto grid = nvar::monthly_max_aggregate(
      {rec("a", 2001, 3, 1, 2.0), rec("a", 2001, 3, 20, 5.0), rec("a", 2001, 3, 31, 1.0)});
  ASSERT_EQ(grid.months, 1u);
  EXPECT_EQ(*grid.values[0][0], 5.0);

  const auto gap = nvar::monthly_max_aggregate({rec("a", 2001, 1, 5, 1.0), rec("a", 2001, 3, 5, 3.0)});
  ASSERT_EQ(gap.months, 3u);
  EXPECT_FALSE(gap.observed(0, 1));

  const auto two = nvar::monthly_max_aggregate({rec("b", 2001, 1, 5, 1.0), rec("a", 2001, 2, 5, 3.0)});
  EXPECT_EQ(two.site_ids, (std::vector<std::string>{"a", "b"}));
  EXPECT_FALSE(two.observed(0, 0));
  EXPECT_TRUE(two.observed(1, 0));
  EXPECT_EQ(two.first_month, 2001L * 12);
}

TEST(MonthlyMax, YearBoundaryIsContiguous) {
  const auto grid = nvar::monthly_max_aggregate({rec("a", 2001, 12, 31, 1.0), rec("a", 2002, 1, 1, 2.0)});
  EXPECT_EQ(grid.months, 2u);
  EXPECT_TRUE(grid.observed(0, 0) && grid.observed(0, 1));
}

TEST(MonthlyMax, RecordOrderInvariance) {
  nvar::CounterRng rng(71);
  std::vector<ObservationRecord> records;
  for (int k = 0; k < 300; ++k)
    records.push_back(rec("s" + std::to_string(oracle::random_count(rng, 0, 5)), 2000 + static_cast<int>(oracle::random_count(rng, 0, 2)),
                          static_cast<int>(oracle::random_count(rng, 1, 12)),
                          static_cast<int>(oracle::random_count(rng, 1, 28)), rng.normal()));
  const auto base = nvar::monthly_max_aggregate(records);
  for (int trial = 0; trial < 20; ++trial) {
    for (std::size_t k = records.size(); k-- > 1;)
      std::swap(records[k], records[oracle::random_count(rng, 0, k)]);
    const auto again = nvar::monthly_max_aggregate(records);
    EXPECT_EQ(again.site_ids, base.site_ids);
    EXPECT_EQ(again.first_month, base.first_month);
    EXPECT_EQ(again.values, base.values);
  }
}

TEST(MonthlyMax, RejectsEmptyAndNonFinite) {
  expect_code(nvar::ErrorCode::NoCompleteCell, [] { nvar::monthly_max_aggregate({}); });
  expect_code(nvar::ErrorCode::NonFinite, [] { nvar::monthly_max_aggregate({rec("a", 2001, 1, 1, NAN)}); });
}

TEST(CompleteSubmatrix, Examples) {
  RaggedMonthlyGrid grid;
  grid.site_ids = {"a", "b", "c"};
  grid.months = 4;
  grid.values = {{1, 1, 1, 1}, {1, 1, std::nullopt, 1}, {1, 1, 1, 1}};
  const auto sel = nvar::select_complete_submatrix(grid);
  EXPECT_EQ(sel.sites, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(sel.start, 0u);
  EXPECT_EQ(sel.length, 4u);
  // Equal scores prefer the longer window: 2 x 3 beats 3 x 2.
  grid.months = 3;
  grid.values = {{1, 1, 1}, {1, 1, 1}, {1, 1, std::nullopt}};
  const auto tie = nvar::select_complete_submatrix(grid);
  EXPECT_EQ(tie.length, 3u);
  EXPECT_EQ(tie.sites.size(), 2u);
}

TEST(CompleteSubmatrix, EarliestStartOnFullTie) {
  RaggedMonthlyGrid grid;
  grid.site_ids = {"a"};
  grid.months = 5;
  grid.values = {{1, 1, std::nullopt, 1, 1}};
  const auto sel = nvar::select_complete_submatrix(grid);
  EXPECT_EQ(sel.start, 0u);
  EXPECT_EQ(sel.length, 2u);
}

TEST(CompleteSubmatrix, NoObservedCell) {
  RaggedMonthlyGrid grid;
  grid.site_ids = {"a"};
  grid.months = 2;
  grid.values = {{std::nullopt, std::nullopt}};
  expect_code(nvar::ErrorCode::NoCompleteCell, [&] { nvar::select_complete_submatrix(grid); });
}

TEST(CompleteSubmatrix, MatchesExhaustiveOracle) {
  nvar::CounterRng rng(72);
  for (int trial = 0; trial < 200; ++trial) {
    const auto grid = random_grid(rng, 8, 12, rng.uniform(0.5, 0.95));
    const auto sel = nvar::select_complete_submatrix(grid);
    EXPECT_EQ(sel.score(), oracle::exhaustive_complete_score(grid));
    for (std::size_t i : sel.sites)
      for (std::size_t t = 0; t < sel.length; ++t) EXPECT_TRUE(grid.observed(i, sel.start + t));
  }
}

TEST(ExtractPanel, NoMissingCellsAndMonthLabels) {
  nvar::CounterRng rng(73);
  for (int trial = 0; trial < 50; ++trial) {
    auto grid = random_grid(rng, 6, 20, 0.8);
    grid.first_month = 1999L * 12 + 10;
    const auto sel = nvar::select_complete_submatrix(grid);
    const auto panel = nvar::extract_panel(grid, sel);
    EXPECT_EQ(panel.p(), sel.sites.size());
    EXPECT_EQ(panel.n(), sel.length);
    EXPECT_TRUE(panel.values.all_finite());
    EXPECT_EQ(panel.timestamps.front(), nvar::month_label(grid.first_month + static_cast<long>(sel.start)));
  }
}

TEST(SplitTrainTest, Examples) {
  const nvar::SeriesPanel panel(nvar::DenseMatrix(2, 73, 1.0));
  const auto split = nvar::split_train_test(panel, 0.8);
  EXPECT_EQ(split.train.n(), 58u);
  EXPECT_EQ(split.test.n(), 15u);
  const auto ten = nvar::split_train_test(nvar::SeriesPanel(nvar::DenseMatrix(1, 10, 0.0)), 0.8);
  EXPECT_EQ(ten.train.n(), 8u);
  EXPECT_EQ(ten.test.n(), 2u);
  expect_code(nvar::ErrorCode::TooShort,
              [] { nvar::split_train_test(nvar::SeriesPanel(nvar::DenseMatrix(1, 4, 0.0)), 0.8); });
}

TEST(SplitTrainTest, PartsConcatenateToWhole) {
  nvar::CounterRng rng(74);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = oracle::random_count(rng, 10, 80);
    const nvar::SeriesPanel panel(oracle::random_matrix(rng, 3, n));
    const auto split = nvar::split_train_test(panel, rng.uniform(0.3, 0.7));
    ASSERT_EQ(split.train.n() + split.test.n(), n);
    for (std::size_t t = 0; t < n; ++t)
      EXPECT_EQ(panel(1, t), t < split.train.n() ? split.train(1, t) : split.test(1, t - split.train.n()));
  }
}

TEST(CenterSeries, Examples) {
  const nvar::SeriesPanel panel(nvar::DenseMatrix(2, 4, std::vector<double>{1, 2, 3, 4, 5, 5, 5, 5}));
  const auto all = nvar::center_series(panel);
  EXPECT_EQ(all.means, (std::vector<double>{2.5, 5.0}));
  EXPECT_EQ(all.panel(0, 0), -1.5);
  EXPECT_EQ(all.panel(1, 3), 0.0);
  const auto head = nvar::center_series(panel, 2);
  EXPECT_EQ(head.means[0], 1.5);
  EXPECT_EQ(head.panel(0, 3), 2.5);
  EXPECT_EQ(nvar::decenter({0.0, 1.0}, head.means), (std::vector<double>{1.5, 6.0}));
}

TEST(Fixture, RecoversDesignedOptimum) {
  const auto read = nvar::io::read_observations_csv(NVAR_TEST_DATA "/stream_records.csv");
  EXPECT_TRUE(read.skipped.empty());
  const auto grid = nvar::monthly_max_aggregate(read.records);
  EXPECT_EQ(grid.sites(), 18u);
  EXPECT_EQ(grid.months, 120u);
  const auto sel = nvar::select_complete_submatrix(grid);
  EXPECT_EQ(sel.sites.size(), 14u);
  EXPECT_EQ(sel.length, 73u);
  const auto panel = nvar::extract_panel(grid, sel);
  EXPECT_EQ(panel.timestamps.front(), "1996-09");
  EXPECT_EQ(panel.timestamps.back(), "2002-09");
  const auto split = nvar::split_train_test(panel, 0.8);
  EXPECT_EQ(split.train.n(), 58u);
  EXPECT_EQ(split.test.n(), 15u);
}
