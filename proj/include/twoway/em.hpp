#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "twoway/core_model.hpp"
#include "twoway/random.hpp"
#include "twoway/transition_mstep.hpp"

namespace twoway {

/// Weighted sufficient statistics for the Gaussian block of the M-step.
/// Observations are accumulated relative to `shift` to limit cancellation
/// in the pooled variance.
struct GaussianStats {
  Matrix weight, sum, sumsq;
  double shift = 0.0;

  GaussianStats(int k1, int k2, double shift_)
      : weight(Matrix::Zero(k1, k2)), sum(Matrix::Zero(k1, k2)), sumsq(Matrix::Zero(k1, k2)), shift(shift_) {}

  void add(int u, int v, double w, double y) {
    const double d = y - shift;
    weight(u, v) += w;
    sum(u, v) += w * d;
    sumsq(u, v) += w * d * d;
  }

  /// Weighted means and the pooled variance with the given denominator.
  /// Empty components keep their previous mean.
  void update(ModelParams& p, double denominator) const {
    double rss = 0.0;
    for (Eigen::Index u = 0; u < weight.rows(); ++u)
      for (Eigen::Index v = 0; v < weight.cols(); ++v) {
        const double w = weight(u, v);
        if (w > 1e-300) {
          const double m = sum(u, v) / w;
          p.Psi(u, v) = m + shift;
          rss += std::max(0.0, sumsq(u, v) - m * sum(u, v));
        }
      }
    p.sigma2 = std::max(kVarianceFloor, rss / denominator);
  }
};

inline double observed_mean(const TwoWayArray& data) {
  double acc = 0.0;
  long n = 0;
  for (int i = 0; i < data.rows(); ++i)
    for (int j = 0; j < data.cols(); ++j)
      if (data.observed(i, j)) {
        acc += data.values(i, j);
        ++n;
      }
  return n ? acc / static_cast<double>(n) : 0.0;
}

namespace detail {

inline Vector flat_dirichlet(Rng& rng, int k) {
  Vector x(k);
  for (int i = 0; i < k; ++i) x(i) = -std::log(1.0 - uniform01(rng));
  return x / x.sum();
}

/// Linear-interpolation quantile of sorted data.
inline double sorted_quantile(const std::vector<double>& sorted, double p) {
  if (sorted.size() == 1) return sorted.front();
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

/// Random start: flat-Dirichlet lambda and Pi rows, Psi from k1*k2 evenly
/// spaced empirical quantiles in random order, sigma2 at half the variance.
inline ModelParams initial_params(const TwoWayArray& data, const ModelDims& dims, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  ModelParams p;
  p.lambda = detail::flat_dirichlet(rng, dims.k1);
  p.Pi.resize(dims.k2, dims.k2);
  for (int a = 0; a < dims.k2; ++a) p.Pi.row(a) = detail::flat_dirichlet(rng, dims.k2).transpose();

  std::vector<double> obs;
  obs.reserve(static_cast<std::size_t>(data.n_observed()));
  for (int i = 0; i < data.rows(); ++i)
    for (int j = 0; j < data.cols(); ++j)
      if (data.observed(i, j)) obs.push_back(data.values(i, j));
  if (obs.empty()) fail(ErrorKind::EmptyMatrix, "no observed cells");
  std::sort(obs.begin(), obs.end());

  const int K = dims.k1 * dims.k2;
  std::vector<double> q(K);
  for (int m = 0; m < K; ++m) q[m] = detail::sorted_quantile(obs, (m + 0.5) / K);
  std::shuffle(q.begin(), q.end(), rng);
  p.Psi.resize(dims.k1, dims.k2);
  for (int m = 0; m < K; ++m) p.Psi(m / dims.k2, m % dims.k2) = q[m];

  const double mean = std::accumulate(obs.begin(), obs.end(), 0.0) / static_cast<double>(obs.size());
  double var = 0.0;
  for (double y : obs) var += (y - mean) * (y - mean);
  var /= static_cast<double>(obs.size());
  p.sigma2 = 0.5 * var;
  apply_floors(p);
  return p;
}

namespace detail {

struct EmRun {
  ModelParams current;   // next iterate to evaluate
  ModelParams evaluated; // last evaluated iterate
  std::vector<double> trace;
  bool converged = false;
  bool started = false;
};

/// Advances an EM run by at most `budget` evaluations. `step(params, next)`
/// returns the objective at `params` and writes the M-step update into `next`.
template <class Step>
void advance_em(EmRun& run, int budget, double tol, Step& step) {
  for (int n = 0; n < budget && !run.converged; ++n) {
    ModelParams next = run.current;
    const double obj = step(run.current, next);
    const bool have_prev = !run.trace.empty();
    const double prev = have_prev ? run.trace.back() : 0.0;
    run.trace.push_back(obj);
    run.evaluated = std::move(run.current);
    run.current = std::move(next);
    if (!std::isfinite(obj)) {
      run.converged = false;
      break;
    }
    if (have_prev && (obj - prev) / (std::abs(prev) + 1.0) < tol) run.converged = true;
  }
}

/// Multi-start EM shared by every estimator. Best objective wins; ties go to
/// the lowest start index.
template <class Step>
FitResult run_em(const TwoWayArray& data, const ModelDims& dims, const FitConfig& config, Method method,
                 Step step) {
  if (config.n_starts < 1 && !config.initial) fail(ErrorKind::InvalidArgument, "n_starts must be >= 1");
  if (config.max_iter < 1) fail(ErrorKind::InvalidArgument, "max_iter must be >= 1");

  std::vector<ModelParams> starts;
  if (config.initial) {
    validate_params(*config.initial, dims);
    ModelParams p = *config.initial;
    apply_floors(p);
    starts.push_back(std::move(p));
  }
  for (int k = 0; k < config.n_starts; ++k)
    starts.push_back(initial_params(data, dims, derive_seed(config.seed, {static_cast<std::uint64_t>(k)})));

  std::vector<EmRun> runs(starts.size());
  for (std::size_t k = 0; k < starts.size(); ++k) runs[k].current = std::move(starts[k]);

  auto objective_of = [](const EmRun& run) {
    return run.trace.empty() || !std::isfinite(run.trace.back()) ? kNegInf : run.trace.back();
  };
  auto pick_best = [&] {
    std::size_t best = 0;
    for (std::size_t k = 1; k < runs.size(); ++k)
      if (objective_of(runs[k]) > objective_of(runs[best])) best = k;
    return best;
  };

  std::size_t best = 0;
  if (config.screen_iters > 0 && runs.size() > 1) {
    for (auto& run : runs) advance_em(run, std::min(config.screen_iters, config.max_iter), config.tol, step);
    best = pick_best();
    advance_em(runs[best], config.max_iter - static_cast<int>(runs[best].trace.size()), config.tol, step);
  } else {
    for (auto& run : runs) advance_em(run, config.max_iter, config.tol, step);
    best = pick_best();
  }

  EmRun& win = runs[best];
  FitResult result;
  result.params = win.evaluated;
  result.trace = win.trace;
  result.converged = win.converged;
  result.iterations = static_cast<int>(win.trace.size());
  result.seed = config.seed;
  result.method = method;
  result.objective = objective_of(win);
  result.best_start = static_cast<int>(best);
  return result;
}

/// M-step for Pi shared by all estimators, warm-started from the current Pi.
inline Matrix update_transitions(const Vector& initial_weights, const Matrix& pair_counts, const Matrix& current) {
  TransitionCriterion crit{initial_weights, pair_counts};
  Matrix start = current;
  for (Eigen::Index a = 0; a < start.rows(); ++a) {
    auto row = start.row(a);
    floor_and_normalize(row);
  }
  return maximize_constrained_transitions(crit, start);
}

inline void check_nonempty_lines(const TwoWayArray& data, bool rows, bool cols) {
  if (rows)
    for (int i = 0; i < data.rows(); ++i)
      if (!data.mask.row(i).any()) fail(ErrorKind::EmptyRow, "row " + std::to_string(i + 1) + " has no observed cell");
  if (cols)
    for (int j = 0; j < data.cols(); ++j)
      if (!data.mask.col(j).any())
        fail(ErrorKind::EmptyColumn, "column " + std::to_string(j + 1) + " has no observed cell");
}

}  // namespace detail
}  // namespace twoway
