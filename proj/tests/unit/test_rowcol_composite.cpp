#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "../em_support.hpp"
#include "../oracles.hpp"
#include "../support.hpp"
#include "twoway/rowcol_composite.hpp"
#include "twoway/simulation.hpp"

using namespace twoway;
using testing_support::random_data;
using testing_support::random_params;

namespace {

ModelParams trivial_params(double psi, double s2) {
  ModelParams p;
  p.lambda = Vector::Ones(1);
  p.Pi = Matrix::Ones(1, 1);
  p.Psi = Matrix::Constant(1, 1, psi);
  p.sigma2 = s2;
  return p;
}

}  // namespace

TEST(ColumnLoglik, NoLatentStructure) {
  std::mt19937_64 rng(51);
  const auto data = random_data(rng, 4, 3, 0.3);
  const auto p = trivial_params(0.6, 1.7);
  double ref = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j)
      if (data.observed(i, j)) ref += log_emission(data.values(i, j), 0.6, 1.7);
  EXPECT_NEAR(column_loglik(data, p), ref, 1e-10);
  EXPECT_NEAR(rowcol_objective(data, p), 2 * ref, 1e-10);
}

TEST(ColumnLoglik, SingleCellIsDoubleMixture) {
  std::mt19937_64 rng(52);
  const auto data = random_data(rng, 1, 1);
  const auto p = random_params(rng, 2, 3);
  const Vector rho = stationary_distribution(p.Pi);
  double dens = 0.0;
  for (int v = 0; v < 3; ++v)
    for (int u = 0; u < 2; ++u) dens += rho(v) * p.lambda(u) * std::exp(log_emission(data.values(0, 0), p.Psi(u, v), p.sigma2));
  EXPECT_NEAR(column_loglik(data, p), std::log(dens), 1e-12);
}

TEST(ColumnLoglik, MatchesEnumerationOracle) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 100; ++trial) {
    const int r = 1 + trial % 3, s = 1 + trial % 3;
    const auto data = random_data(rng, r, s, trial % 2 ? 0.3 : 0.0);
    const auto p = random_params(rng, 1 + trial % 2, 1 + (trial / 2) % 2);
    double ref = 0.0;
    for (int j = 0; j < s; ++j) ref += oracle::column_by_enumeration(data, j, p).loglik;
    EXPECT_NEAR(column_loglik(data, p), ref, 1e-10 * (1 + std::abs(ref)));
  }
}

TEST(RowColObjective, IsTheSumOfBothTerms) {
  std::mt19937_64 rng(54);
  for (int trial = 0; trial < 20; ++trial) {
    const auto data = random_data(rng, 5, 7, 0.2);
    const auto p = random_params(rng, 2, 3);
    const double a = row_loglik(data, p), b = column_loglik(data, p);
    EXPECT_NEAR(rowcol_objective(data, p), a + b, 1e-12 * std::abs(a + b));
  }
}

TEST(RowColObjective, EmptyColumnIsAnError) {
  std::mt19937_64 rng(55);
  auto data = random_data(rng, 3, 4);
  data.mask.col(2).setConstant(false);
  try {
    column_loglik(data, random_params(rng, 2, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyColumn);
  }
}

TEST(ColumnEStep, MatchesOracle) {
  std::mt19937_64 rng(56);
  for (int trial = 0; trial < 100; ++trial) {
    const int r = 1 + trial % 3, s = 1 + trial % 3, k1 = 1 + trial % 2, k2 = 1 + (trial / 2) % 2;
    const auto data = random_data(rng, r, s, trial % 2 ? 0.3 : 0.0);
    const auto p = random_params(rng, k1, k2);
    const auto got = column_e_step(data, p);
    for (int j = 0; j < s; ++j) {
      const auto ref = oracle::column_by_enumeration(data, j, p);
      for (int v = 0; v < k2; ++v) EXPECT_NEAR(got.z2_hat(j, v), ref.z(v), 1e-10);
      for (int i = 0; i < r; ++i)
        for (int u = 0; u < k1; ++u) {
          EXPECT_NEAR(got.w2_hat(i, j, u), ref.w(i, u), 1e-10);
          for (int v = 0; v < k2; ++v) EXPECT_NEAR(got.wz2_hat(i, j, u, v), ref.joint(i, u * k2 + v), 1e-10);
        }
    }
  }
}

TEST(ColumnEStep, SingleStateGivesMixtureResponsibilities) {
  std::mt19937_64 rng(57);
  const auto data = random_data(rng, 3, 2);
  const auto p = random_params(rng, 3, 1);
  const auto post = column_e_step(data, p);
  EXPECT_TRUE(((post.z2_hat.array() - 1.0).abs() < 1e-15).all());
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) {
      double tot = 0.0;
      Vector resp(3);
      for (int u = 0; u < 3; ++u) tot += (resp(u) = p.lambda(u) * std::exp(log_emission(data.values(i, j), p.Psi(u, 0), p.sigma2)));
      for (int u = 0; u < 3; ++u) EXPECT_NEAR(post.w2_hat(i, j, u), resp(u) / tot, 1e-12);
    }
}

TEST(ColumnEStep, IdenticalPsiColumnsReturnRho) {
  std::mt19937_64 rng(58);
  const auto data = random_data(rng, 4, 5);
  auto p = random_params(rng, 2, 3);
  p.Psi.col(1) = p.Psi.col(0);
  p.Psi.col(2) = p.Psi.col(0);
  const auto post = column_e_step(data, p);
  const Vector rho = stationary_distribution(p.Pi);
  for (int j = 0; j < 5; ++j) EXPECT_LE((post.z2_hat.row(j).transpose() - rho).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ColumnEStep, NormalisationInvariants) {
  std::mt19937_64 rng(59);
  for (int trial = 0; trial < 1000; ++trial) {
    const int r = 1 + trial % 6, s = 1 + trial % 5, k1 = 1 + trial % 3, k2 = 1 + (trial / 3) % 3;
    const auto data = random_data(rng, r, s, trial % 2 ? 0.3 : 0.0);
    const auto p = random_params(rng, k1, k2);
    const auto post = column_e_step(data, p);
    for (int j = 0; j < s; ++j) {
      ASSERT_NEAR(post.z2_hat.row(j).sum(), 1.0, 1e-10);
      for (int i = 0; i < r; ++i) {
        double w = 0.0;
        for (int u = 0; u < k1; ++u) {
          double row = 0.0;
          for (int v = 0; v < k2; ++v) row += post.wz2_hat(i, j, u, v);
          ASSERT_NEAR(row, post.w2_hat(i, j, u), 1e-10);
          w += post.w2_hat(i, j, u);
        }
        ASSERT_NEAR(w, 1.0, 1e-10);
        for (int v = 0; v < k2; ++v) {
          double col = 0.0;
          for (int u = 0; u < k1; ++u) col += post.wz2_hat(i, j, u, v);
          ASSERT_NEAR(col, post.z2_hat(j, v), 1e-10);
        }
      }
    }
  }
}

TEST(FitRowColCL, NoiselessDataStartedAtTruthIsAFixedPoint) {
  auto sc = benchmark_scenario(1, 3);
  sc.dims = {5, 60, 2, 2};
  sc.truth.sigma2 = 1e-12;
  const auto smp = sample_data(sc.dims, sc.truth, 103);
  FitConfig cfg;
  cfg.n_starts = 0;
  cfg.max_iter = 2;
  cfg.tol = -1.0;
  cfg.initial = testing_support::noiseless_fixed_point(smp, sc.truth, Method::RowCol);
  const FitResult fr = fit_rowcol_cl(smp.data, sc.dims, cfg);
  EXPECT_LT(testing_support::max_param_change(fr.params, *cfg.initial), 1e-6);
}

TEST(FitRowColCL, ConstantDataGivesConstantMeans) {
  const auto data = TwoWayArray::complete(Matrix::Constant(4, 9, 3.0));
  FitConfig cfg;
  cfg.n_starts = 2;
  cfg.max_iter = 20;
  const FitResult fr = fit_rowcol_cl(data, {4, 9, 3, 2}, cfg);
  EXPECT_LE((fr.params.Psi.array() - 3.0).abs().maxCoeff(), 1e-12);
  EXPECT_EQ(fr.params.sigma2, kVarianceFloor);
}

TEST(FitRowColCL, MonotoneOnRandomInstances) {
  const auto sc = benchmark_scenario(1, 9);
  for (int trial = 0; trial < 10; ++trial) {
    auto smp = sample_data({6, 30, 2, 2}, sc.truth, 900 + trial);
    FitConfig cfg;
    cfg.n_starts = 2;
    cfg.seed = trial;
    const FitResult fr = fit_rowcol_cl(smp.data, {6, 30, 2, 2}, cfg);
    EXPECT_LE(testing_support::worst_drop(fr.trace), 1e-9);
    EXPECT_DOUBLE_EQ(fr.objective, rowcol_objective(smp.data, fr.params));
  }
}

TEST(FitRowColCL, LabelPermutationEquivariance) {
  const auto sc = benchmark_scenario(1, 10);
  const auto smp = sample_data({8, 60, 2, 2}, sc.truth, 10);
  const ModelDims dims{8, 60, 2, 2};
  FitConfig cfg;
  cfg.n_starts = 0;
  std::mt19937_64 rng(60);
  cfg.initial = random_params(rng, 2, 2);
  const auto a = fit_rowcol_cl(smp.data, dims, cfg);
  ModelParams swapped = *cfg.initial;
  swapped.lambda = cfg.initial->lambda.reverse();
  swapped.Psi.row(0) = cfg.initial->Psi.row(1);
  swapped.Psi.row(1) = cfg.initial->Psi.row(0);
  cfg.initial = swapped;
  const auto b = fit_rowcol_cl(smp.data, dims, cfg);
  EXPECT_NEAR(a.objective, b.objective, 1e-8 * std::abs(a.objective));
  EXPECT_NEAR(a.params.lambda(0), b.params.lambda(1), 1e-6);
  EXPECT_LE((a.params.Psi.row(0) - b.params.Psi.row(1)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE((a.params.Pi - b.params.Pi).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(FitRowColCL, BenchmarkFitIsReproducible) {
  const auto sc = benchmark_scenario(1, 11);
  const auto smp = sample_data(sc.dims, sc.truth, 11);
  FitConfig cfg;
  cfg.n_starts = 3;
  cfg.seed = 4;
  const auto a = fit_rowcol_cl(smp.data, sc.dims, cfg), b = fit_rowcol_cl(smp.data, sc.dims, cfg);
  EXPECT_TRUE(std::isfinite(a.objective));
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(rowcol_objective(smp.data, a.params), rowcol_objective(smp.data, b.params));
}

TEST(FitRowColCL, RequiresNonEmptyLinesUnlessAllowed) {
  std::mt19937_64 rng(61);
  auto data = random_data(rng, 4, 6);
  data.mask.col(3).setConstant(false);
  FitConfig cfg;
  cfg.n_starts = 1;
  cfg.max_iter = 5;
  EXPECT_THROW(fit_rowcol_cl(data, {4, 6, 2, 2}, cfg), Error);
  cfg.allow_empty_lines = true;
  EXPECT_NO_THROW(fit_rowcol_cl(data, {4, 6, 2, 2}, cfg));
}
