#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "twoway/core_model.hpp"
#include "twoway/estimators.hpp"
#include "twoway/parallel.hpp"
#include "twoway/random.hpp"

namespace twoway {

struct SampledData {
  TwoWayArray data;
  std::vector<int> row_labels;  // 0-based U_i
  std::vector<int> col_labels;  // 0-based V_j
};

/// Draws U_i ~ lambda, a stationary chain V_1..V_s and Y_ij ~ N(psi_{U_i V_j}, sigma2).
inline SampledData sample_data(const ModelDims& dims, const ModelParams& truth, std::uint64_t seed) {
  validate_params(truth, dims);
  Rng rng = make_rng(seed);
  const Vector rho = stationary_distribution(truth.Pi);
  SampledData out;
  out.row_labels.resize(dims.r);
  out.col_labels.resize(dims.s);
  for (int i = 0; i < dims.r; ++i) out.row_labels[i] = draw_categorical(rng, truth.lambda);
  for (int j = 0; j < dims.s; ++j) {
    if (j == 0)
      out.col_labels[j] = draw_categorical(rng, rho);
    else
      out.col_labels[j] = draw_categorical(rng, truth.Pi.row(out.col_labels[j - 1]));
  }
  std::normal_distribution<double> noise(0.0, std::sqrt(truth.sigma2));
  Matrix y(dims.r, dims.s);
  for (int i = 0; i < dims.r; ++i)
    for (int j = 0; j < dims.s; ++j) y(i, j) = truth.Psi(out.row_labels[i], out.col_labels[j]) + noise(rng);
  out.data = TwoWayArray::complete(std::move(y));
  return out;
}

struct LabelAlignment {
  std::vector<int> row_perm;  // aligned label u takes estimated label row_perm[u]
  std::vector<int> col_perm;
  ModelParams aligned;
};

/// Exhaustive search over row and column label permutations minimising the
/// squared distance between the means; ties go to the lexicographically
/// smallest permutation pair.
inline LabelAlignment find_alignment(const ModelParams& est, const ModelParams& truth) {
  const int k1 = truth.k1(), k2 = truth.k2();
  if (est.k1() != k1 || est.k2() != k2)
    fail(ErrorKind::DimensionMismatch, "estimate and truth have different support sizes");
  std::vector<int> sig(k1), tau(k2);
  std::iota(sig.begin(), sig.end(), 0);
  LabelAlignment best;
  double best_d = std::numeric_limits<double>::infinity();
  do {
    std::iota(tau.begin(), tau.end(), 0);
    do {
      double d = 0.0;
      for (int u = 0; u < k1; ++u)
        for (int v = 0; v < k2; ++v) {
          const double e = est.Psi(sig[u], tau[v]) - truth.Psi(u, v);
          d += e * e;
        }
      if (d < best_d) {
        best_d = d;
        best.row_perm = sig;
        best.col_perm = tau;
      }
    } while (std::next_permutation(tau.begin(), tau.end()));
  } while (std::next_permutation(sig.begin(), sig.end()));

  ModelParams& a = best.aligned;
  a.lambda.resize(k1);
  a.Psi.resize(k1, k2);
  a.Pi.resize(k2, k2);
  a.sigma2 = est.sigma2;
  for (int u = 0; u < k1; ++u) {
    a.lambda(u) = est.lambda(best.row_perm[u]);
    for (int v = 0; v < k2; ++v) a.Psi(u, v) = est.Psi(best.row_perm[u], best.col_perm[v]);
  }
  for (int x = 0; x < k2; ++x)
    for (int y = 0; y < k2; ++y) a.Pi(x, y) = est.Pi(best.col_perm[x], best.col_perm[y]);
  return best;
}

inline ModelParams align_labels(const ModelParams& est, const ModelParams& truth) {
  return find_alignment(est, truth).aligned;
}

struct Scenario {
  std::string name = "scenario";
  ModelDims dims;
  ModelParams truth;
  int n_replicates = 1;
  std::vector<Method> methods{Method::Full, Method::Row, Method::RowCol};
  std::uint64_t seed = 1;

  void check() const {
    validate_params(truth, dims);
    if (n_replicates < 1) fail(ErrorKind::InvalidArgument, "n_replicates must be >= 1");
    if (methods.empty()) fail(ErrorKind::InvalidArgument, "scenario lists no methods");
  }
};

/// The benchmark design: r = 10, s = 200, k1 = k2 = 2, sigma2 = 0.5.
inline Scenario benchmark_scenario(int n_replicates = 1000, std::uint64_t seed = 1) {
  Scenario sc;
  sc.name = "benchmark";
  sc.dims = {10, 200, 2, 2};
  sc.truth.lambda = Vector::Constant(2, 0.5);
  sc.truth.Pi.resize(2, 2);
  sc.truth.Pi << 0.8808, 0.1192, 0.1192, 0.8808;
  sc.truth.Psi.resize(2, 2);
  sc.truth.Psi << 1, 2, 3, 4;
  sc.truth.sigma2 = 0.5;
  sc.n_replicates = n_replicates;
  sc.seed = seed;
  return sc;
}

/// Benchmark plus the five single-change variants. Where a variant adds a
/// support point, the extra means follow psi_uv = 2(u - 1) + v.
inline std::vector<Scenario> standard_scenarios(int n_replicates = 1000, std::uint64_t seed = 1) {
  std::vector<Scenario> out;
  out.push_back(benchmark_scenario(n_replicates, seed));

  Scenario more_rows = out[0];
  more_rows.name = "rows15";
  more_rows.dims.r = 15;
  out.push_back(more_rows);

  Scenario more_cols = out[0];
  more_cols.name = "cols400";
  more_cols.dims.s = 400;
  out.push_back(more_cols);

  Scenario k1_three = out[0];
  k1_three.name = "k1_3";
  k1_three.dims.k1 = 3;
  k1_three.truth.lambda = Vector::Constant(3, 1.0 / 3.0);
  k1_three.truth.Psi.resize(3, 2);
  k1_three.truth.Psi << 1, 2, 3, 4, 5, 6;
  out.push_back(k1_three);

  Scenario k2_three = out[0];
  k2_three.name = "k2_3";
  k2_three.dims.k2 = 3;
  k2_three.truth.Pi.resize(3, 3);
  k2_three.truth.Pi << 0.7870, 0.1065, 0.1065, 0.1065, 0.7870, 0.1065, 0.1065, 0.1065, 0.7870;
  k2_three.truth.Psi.resize(2, 3);
  k2_three.truth.Psi << 1, 2, 3, 3, 4, 5;
  out.push_back(k2_three);

  Scenario noisy = out[0];
  noisy.name = "sigma2_1";
  noisy.truth.sigma2 = 1.0;
  out.push_back(noisy);

  for (std::size_t k = 1; k < out.size(); ++k) out[k].seed = derive_seed(seed, {k});
  return out;
}

struct ParameterError {
  std::string parameter;
  double bias = 0.0;
  double rmse = 0.0;
};

struct MethodReport {
  Method method = Method::RowCol;
  std::vector<ParameterError> entries;
  std::vector<double> seconds;  // per successful fit
  double median_seconds = 0.0;
  double mad_seconds = 0.0;
  int n_fits = 0;
  int n_failures = 0;
  bool flagged = false;  // more than 1% of replicates excluded
  std::vector<std::string> failure_messages;

  const ParameterError& at(const std::string& name) const {
    for (const auto& e : entries)
      if (e.parameter == name) return e;
    fail(ErrorKind::InvalidArgument, "no parameter named " + name);
  }
};

struct AccuracyReport {
  std::string scenario;
  std::vector<MethodReport> methods;

  const MethodReport& at(Method m) const {
    for (const auto& r : methods)
      if (r.method == m) return r;
    fail(ErrorKind::InvalidArgument, std::string("method not in report: ") + to_string(m));
  }
};

/// Parameter names in report order: lambda_u, pi_a_b, psi_u_v, sigma2 (1-based).
inline std::vector<std::string> parameter_names(const ModelDims& dims) {
  std::vector<std::string> names;
  for (int u = 0; u < dims.k1; ++u) names.push_back("lambda_" + std::to_string(u + 1));
  for (int a = 0; a < dims.k2; ++a)
    for (int b = 0; b < dims.k2; ++b) names.push_back("pi_" + std::to_string(a + 1) + "_" + std::to_string(b + 1));
  for (int u = 0; u < dims.k1; ++u)
    for (int v = 0; v < dims.k2; ++v)
      names.push_back("psi_" + std::to_string(u + 1) + "_" + std::to_string(v + 1));
  names.push_back("sigma2");
  return names;
}

inline std::vector<double> flatten_params(const ModelParams& p) {
  std::vector<double> x;
  for (int u = 0; u < p.k1(); ++u) x.push_back(p.lambda(u));
  for (int a = 0; a < p.k2(); ++a)
    for (int b = 0; b < p.k2(); ++b) x.push_back(p.Pi(a, b));
  for (int u = 0; u < p.k1(); ++u)
    for (int v = 0; v < p.k2(); ++v) x.push_back(p.Psi(u, v));
  x.push_back(p.sigma2);
  return x;
}

namespace detail {

inline double median_of(std::vector<double> x) {
  if (x.empty()) return 0.0;
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

}  // namespace detail

struct ScenarioOptions {
  unsigned threads = 1;
  // Seed the full-likelihood fit with the row-column estimate as an extra start.
  bool warm_start_full = true;
  // Configuration used for the full-likelihood estimator, if different.
  std::optional<FitConfig> full_config;
};

/// Monte-Carlo study: per replicate sample, fit each method, align labels and
/// accumulate errors. Replicates use independent derived seeds and reduce in
/// replicate order, so results do not depend on the thread count.
inline AccuracyReport run_scenario(const Scenario& sc, const FitConfig& config, const ScenarioOptions& opts = {}) {
  sc.check();
  const auto names = parameter_names(sc.dims);
  const std::vector<double> truth = flatten_params(sc.truth);
  const std::size_t P = truth.size(), M = sc.methods.size();
  const auto R = static_cast<std::size_t>(sc.n_replicates);

  bool full_feasible = true;
  try {
    detail::checked_power(sc.dims.k1, sc.dims.r, config.enumeration_cap, "row configurations");
  } catch (const Error&) {
    full_feasible = false;
  }

  struct Outcome {
    bool ok = false;
    std::vector<double> error;
    double seconds = 0.0;
    std::string message;
  };
  std::vector<Outcome> outcomes(R * M);

  parallel_for(R, opts.threads, [&](std::size_t rep) {
    const SampledData sample = sample_data(sc.dims, sc.truth, derive_seed(sc.seed, {rep, 0}));
    std::optional<ModelParams> rowcol_estimate;
    // composite methods first so the full fit can be warm-started
    std::vector<std::size_t> order(M);
    std::iota(order.begin(), order.end(), 0);
    std::stable_partition(order.begin(), order.end(), [&](std::size_t m) { return sc.methods[m] != Method::Full; });
    for (std::size_t m : order) {
      Outcome& out = outcomes[rep * M + m];
      const Method method = sc.methods[m];
      if (method == Method::Full && !full_feasible) {
        out.message = "full likelihood infeasible at these dimensions";
        continue;
      }
      FitConfig cfg = (method == Method::Full && opts.full_config) ? *opts.full_config : config;
      cfg.seed = derive_seed(sc.seed, {rep, 1 + static_cast<std::uint64_t>(method)});
      if (method == Method::Full && opts.warm_start_full && rowcol_estimate) cfg.initial = rowcol_estimate;
      try {
        const auto t0 = std::chrono::steady_clock::now();
        FitResult fr = fit(sample.data, sc.dims, cfg, method);
        out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (method == Method::RowCol) rowcol_estimate = fr.params;
        const std::vector<double> est = flatten_params(align_labels(fr.params, sc.truth));
        out.error.resize(P);
        for (std::size_t p = 0; p < P; ++p) out.error[p] = est[p] - truth[p];
        out.ok = true;
      } catch (const Error& e) {
        out.message = e.what();
      }
    }
  });

  AccuracyReport report;
  report.scenario = sc.name;
  for (std::size_t m = 0; m < M; ++m) {
    MethodReport mr;
    mr.method = sc.methods[m];
    if (mr.method == Method::Full && !full_feasible) continue;
    std::vector<double> sum(P, 0.0), sumsq(P, 0.0);
    for (std::size_t rep = 0; rep < R; ++rep) {
      const Outcome& o = outcomes[rep * M + m];
      if (!o.ok) {
        ++mr.n_failures;
        mr.failure_messages.push_back(o.message);
        continue;
      }
      ++mr.n_fits;
      mr.seconds.push_back(o.seconds);
      for (std::size_t p = 0; p < P; ++p) {
        sum[p] += o.error[p];
        sumsq[p] += o.error[p] * o.error[p];
      }
    }
    const double n = std::max(1, mr.n_fits);
    for (std::size_t p = 0; p < P; ++p) mr.entries.push_back({names[p], sum[p] / n, std::sqrt(sumsq[p] / n)});
    mr.median_seconds = detail::median_of(mr.seconds);
    std::vector<double> dev;
    for (double t : mr.seconds) dev.push_back(std::abs(t - mr.median_seconds));
    mr.mad_seconds = detail::median_of(dev);
    mr.flagged = mr.n_failures > 0.01 * static_cast<double>(R);
    report.methods.push_back(std::move(mr));
  }
  return report;
}

}  // namespace twoway
