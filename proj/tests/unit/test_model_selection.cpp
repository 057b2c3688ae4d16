#include <gtest/gtest.h>

#include <cmath>

#include "../reference_tables.hpp"
#include "twoway/model_selection.hpp"
#include "twoway/simulation.hpp"

using namespace twoway;

TEST(CVSplits, SizesAndComplementarity) {
  const auto splits = make_cv_splits({4, 5, 1, 1}, 3, 9);
  ASSERT_EQ(splits.size(), 3u);
  for (const auto& sp : splits) {
    EXPECT_EQ(sp.valid_mask.count(), 10);
    EXPECT_FALSE((sp.valid_mask.array() && sp.train_mask.array()).any());
    EXPECT_TRUE((sp.valid_mask.array() || sp.train_mask.array()).all());
  }
  EXPECT_EQ(make_cv_splits({3, 3, 1, 1}, 1, 1)[0].valid_mask.count(), 4);
}

TEST(CVSplits, DeterministicGivenSeed) {
  const auto a = make_cv_splits({6, 7, 1, 1}, 4, 123), b = make_cv_splits({6, 7, 1, 1}, 4, 123);
  for (int d = 0; d < 4; ++d) EXPECT_EQ(a[d].valid_mask, b[d].valid_mask);
  EXPECT_NE(a[0].valid_mask, a[1].valid_mask);
  EXPECT_NE(a[0].valid_mask, make_cv_splits({6, 7, 1, 1}, 1, 124)[0].valid_mask);
}

TEST(CVSplits, CellFrequenciesAreUniform) {
  const auto splits = make_cv_splits({10, 10, 1, 1}, 10000, 5);
  Matrix freq = Matrix::Zero(10, 10);
  for (const auto& sp : splits) freq += sp.valid_mask.cast<double>();
  freq /= 10000.0;
  EXPECT_GE(freq.minCoeff(), 0.45);
  EXPECT_LE(freq.maxCoeff(), 0.55);
}

TEST(RelativePerformance, EndpointsAndDegenerateRange) {
  Matrix cl(2, 2);
  cl << -10, -4, -7, -1;
  const Matrix q = relative_performance(cl);
  EXPECT_DOUBLE_EQ(q(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(q(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(q(0, 1), 6.0 / 9.0);
  try {
    relative_performance(Matrix::Constant(2, 2, -3.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateRange);
  }
}

TEST(RelativePerformance, IllustrationTable) {
  // the (1,1) cell sits outside the tabulated grid and is the minimum
  Matrix cl(reference_tables::kRows * reference_tables::kCols + 1, 1);
  int n = 0;
  for (int a = 0; a < reference_tables::kRows; ++a)
    for (int b = 0; b < reference_tables::kCols; ++b) cl(n++, 0) = reference_tables::kClCv[a][b];
  cl(n, 0) = reference_tables::kClCvOneOne;
  const Matrix q = relative_performance(cl);
  EXPECT_NEAR(q(2 * reference_tables::kCols + 2, 0), 0.902, 1e-3);   // (3, 4)
  EXPECT_NEAR(q(2 * reference_tables::kCols + 10, 0), 1.000, 1e-3);  // (3, 12)
  EXPECT_NEAR(q(0, 0), 0.577, 1e-3);                             // (1, 2)
}

TEST(ParseGrid, RangesAndErrors) {
  const auto g = parse_grid("1:3x1:4");
  ASSERT_EQ(g.size(), 12u);
  EXPECT_EQ(g.front(), (GridPoint{1, 1}));
  EXPECT_EQ(g[5], (GridPoint{2, 2}));
  EXPECT_EQ(g.back(), (GridPoint{3, 4}));
  EXPECT_EQ(parse_grid("2x3").size(), 1u);
  EXPECT_THROW(parse_grid("1:3"), Error);
  EXPECT_THROW(parse_grid("3:1x1:2"), Error);
  EXPECT_THROW(parse_grid("ax1"), Error);
  EXPECT_THROW(parse_grid("0:2x1:2"), Error);
}

TEST(CVSelection, SingleCandidate) {
  const auto sc = benchmark_scenario(1, 21);
  const auto smp = sample_data({6, 30, 2, 2}, sc.truth, 21);
  FitConfig cfg;
  cfg.n_starts = 1;
  const auto table = cv_selection(smp.data, {{1, 1}}, 4, cfg, 21);
  ASSERT_EQ(table.entries.size(), 1u);
  const auto& e = table.entries[0];
  EXPECT_EQ(e.n_cv, 4);
  EXPECT_DOUBLE_EQ(e.q, 1.0);
  EXPECT_EQ(e.n_params, 2);

  // with one support point, the validation score is twice the Gaussian log density
  const auto splits = make_cv_splits({6, 30, 1, 1}, 4, 21);
  double mean = 0.0;
  for (int d = 0; d < 4; ++d) {
    const auto train = smp.data.restricted_to(splits[d].train_mask);
    double m = 0.0, n = 0.0;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 30; ++j)
        if (train.observed(i, j)) {
          m += train.values(i, j);
          n += 1;
        }
    m /= n;
    double ss = 0.0;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 30; ++j)
        if (train.observed(i, j)) ss += (train.values(i, j) - m) * (train.values(i, j) - m);
    const double s2 = ss / n;
    double score = 0.0;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 30; ++j)
        if (splits[d].valid_mask(i, j)) score += 2 * log_emission(smp.data.values(i, j), m, s2);
    mean += score / 4;
  }
  EXPECT_NEAR(e.cl_cv, mean, 1e-6 * std::abs(mean));
}

TEST(CVSelection, DeterministicAndWellFormed) {
  const auto sc = benchmark_scenario(1, 22);
  const auto smp = sample_data({6, 40, 2, 2}, sc.truth, 22);
  FitConfig cfg;
  cfg.n_starts = 2;
  const auto grid = parse_grid("1:2x1:2");
  const auto a = cv_selection(smp.data, grid, 3, cfg, 5);
  const auto b = cv_selection(smp.data, grid, 3, cfg, 5, 2);
  int wins = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    EXPECT_EQ(a.entries[g].cl_cv, b.entries[g].cl_cv);
    EXPECT_EQ(a.entries[g].n_cv, b.entries[g].n_cv);
    EXPECT_GE(a.entries[g].q, 0.0);
    EXPECT_LE(a.entries[g].q, 1.0);
    EXPECT_FALSE(a.entries[g].flagged);
    wins += a.entries[g].n_cv;
  }
  EXPECT_GE(wins, 3);
}

TEST(CVSelection, DominantCandidateWinsEverySplit) {
  const auto sc = benchmark_scenario(1, 23);
  const auto smp = sample_data({8, 60, 2, 2}, sc.truth, 23);
  FitConfig cfg;
  cfg.n_starts = 3;
  const auto table = cv_selection(smp.data, {{1, 1}, {2, 2}}, 3, cfg, 8);
  const auto& best = table.at(2, 2);
  ASSERT_EQ(best.n_cv, 3);
  EXPECT_DOUBLE_EQ(best.q, 1.0);
  EXPECT_DOUBLE_EQ(table.at(1, 1).q, 0.0);
}

TEST(CVSelection, ParsimoniousChoice) {
  SelectionTable t;
  const auto entry = [](GridPoint g, int n_params, double q) {
    SelectionEntry e;
    e.point = g;
    e.n_params = n_params;
    e.q = q;
    return e;
  };
  t.entries = {entry({1, 1}, 2, 0.0), entry({2, 2}, 8, 0.985), entry({3, 3}, 18, 1.0)};
  EXPECT_EQ(select_parsimonious(t, 0.98), (GridPoint{2, 2}));
  EXPECT_EQ(select_parsimonious(t, 0.99), (GridPoint{3, 3}));
}
