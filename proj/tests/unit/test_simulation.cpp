#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "../support.hpp"
#include "twoway/simulation.hpp"

using namespace twoway;

TEST(SampleData, ShapeAndCompleteness) {
  const auto sc = benchmark_scenario();
  const auto smp = sample_data(sc.dims, sc.truth, 1);
  EXPECT_EQ(smp.data.rows(), 10);
  EXPECT_EQ(smp.data.cols(), 200);
  EXPECT_TRUE(smp.data.is_complete());
  EXPECT_EQ(smp.row_labels.size(), 10u);
  EXPECT_EQ(smp.col_labels.size(), 200u);
}

TEST(SampleData, VanishingNoiseHitsTheMeans) {
  auto sc = benchmark_scenario();
  sc.truth.sigma2 = 1e-12;
  const auto smp = sample_data(sc.dims, sc.truth, 2);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 200; ++j)
      EXPECT_NEAR(smp.data.values(i, j), sc.truth.Psi(smp.row_labels[i], smp.col_labels[j]), 1e-5);
}

TEST(SampleData, TransitionFrequenciesConverge) {
  const auto sc = benchmark_scenario();
  const auto smp = sample_data({1, 100000, 2, 2}, sc.truth, 3);
  Matrix counts = Matrix::Zero(2, 2);
  for (std::size_t j = 1; j < smp.col_labels.size(); ++j) counts(smp.col_labels[j - 1], smp.col_labels[j]) += 1;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) EXPECT_NEAR(counts(a, b) / counts.row(a).sum(), sc.truth.Pi(a, b), 0.01);
}

TEST(SampleData, DeterministicGivenSeed) {
  const auto sc = benchmark_scenario();
  EXPECT_EQ(sample_data(sc.dims, sc.truth, 4).data.values, sample_data(sc.dims, sc.truth, 4).data.values);
  EXPECT_NE(sample_data(sc.dims, sc.truth, 4).data.values, sample_data(sc.dims, sc.truth, 5).data.values);
}

TEST(AlignLabels, IdentityAndSwap) {
  const auto truth = benchmark_scenario().truth;
  const auto id = find_alignment(truth, truth);
  EXPECT_EQ(id.row_perm, (std::vector<int>{0, 1}));
  EXPECT_EQ(id.col_perm, (std::vector<int>{0, 1}));
  ModelParams est = truth;
  est.lambda << 0.3, 0.7;
  est.Psi.row(0) = truth.Psi.row(1);
  est.Psi.row(1) = truth.Psi.row(0);
  const auto al = align_labels(est, truth);
  EXPECT_EQ(al.Psi, truth.Psi);
  EXPECT_DOUBLE_EQ(al.lambda(0), 0.7);
}

TEST(AlignLabels, RecoversHiddenPermutations) {
  std::mt19937_64 rng(81);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (int trial = 0; trial < 100; ++trial) {
    const int k1 = 1 + trial % 3, k2 = 1 + (trial / 3) % 3;
    ModelParams truth = testing_support::random_params(rng, k1, k2);
    for (int u = 0; u < k1; ++u)
      for (int v = 0; v < k2; ++v) truth.Psi(u, v) = 3.0 * u + 1.1 * v;  // well separated
    std::vector<int> sig(k1), tau(k2);
    std::iota(sig.begin(), sig.end(), 0);
    std::iota(tau.begin(), tau.end(), 0);
    std::shuffle(sig.begin(), sig.end(), rng);
    std::shuffle(tau.begin(), tau.end(), rng);
    ModelParams est = truth;
    for (int u = 0; u < k1; ++u) {
      est.lambda(sig[u]) = truth.lambda(u);
      for (int v = 0; v < k2; ++v) est.Psi(sig[u], tau[v]) = truth.Psi(u, v) + noise(rng);
    }
    for (int a = 0; a < k2; ++a)
      for (int b = 0; b < k2; ++b) est.Pi(tau[a], tau[b]) = truth.Pi(a, b);
    const auto al = find_alignment(est, truth);
    EXPECT_EQ(al.row_perm, sig);
    EXPECT_EQ(al.col_perm, tau);
    EXPECT_LE((al.aligned.Pi - truth.Pi).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LE((al.aligned.lambda - truth.lambda).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(StandardScenarios, DefinitionsAreValid) {
  const auto all = standard_scenarios(1000, 1);
  ASSERT_EQ(all.size(), 6u);
  for (const auto& sc : all) EXPECT_NO_THROW(sc.check());
  EXPECT_NEAR(stationary_distribution(all[4].truth.Pi).sum(), 1.0, 1e-12);
}

TEST(RunScenario, NearNoiselessReplicateRecoversMeans) {
  auto sc = benchmark_scenario(1, 12);
  sc.truth.sigma2 = 1e-6;
  sc.methods = {Method::Row, Method::RowCol};
  FitConfig cfg;
  cfg.n_starts = 5;
  const auto rep = run_scenario(sc, cfg);
  for (const auto& m : rep.methods) {
    EXPECT_EQ(m.n_failures, 0);
    for (int u = 1; u <= 2; ++u)
      for (int v = 1; v <= 2; ++v)
        EXPECT_LT(std::abs(m.at("psi_" + std::to_string(u) + "_" + std::to_string(v)).bias), 0.01);
  }
}

TEST(RunScenario, ReportIsDeterministicAndConsistent) {
  auto sc = benchmark_scenario(6, 13);
  sc.dims = {6, 60, 2, 2};
  FitConfig cfg;
  cfg.n_starts = 2;
  const auto a = run_scenario(sc, cfg);
  ScenarioOptions threaded;
  threaded.threads = 3;
  const auto b = run_scenario(sc, cfg, threaded);
  ASSERT_EQ(a.methods.size(), 3u);
  for (std::size_t m = 0; m < a.methods.size(); ++m) {
    EXPECT_FALSE(a.methods[m].flagged);
    EXPECT_EQ(a.methods[m].n_fits, 6);
    for (std::size_t p = 0; p < a.methods[m].entries.size(); ++p) {
      const auto& e = a.methods[m].entries[p];
      EXPECT_EQ(e.bias, b.methods[m].entries[p].bias);
      EXPECT_EQ(e.rmse, b.methods[m].entries[p].rmse);
      EXPECT_GE(e.rmse * e.rmse - e.bias * e.bias, -1e-12);
    }
  }
}

TEST(RunScenario, FullInfeasibleIsSkipped) {
  auto sc = benchmark_scenario(1, 14);
  sc.dims = {25, 20, 2, 2};
  sc.methods = {Method::Full, Method::RowCol};
  FitConfig cfg;
  cfg.n_starts = 1;
  const auto rep = run_scenario(sc, cfg);
  ASSERT_EQ(rep.methods.size(), 1u);
  EXPECT_EQ(rep.methods[0].method, Method::RowCol);
}
