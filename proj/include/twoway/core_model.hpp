#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "twoway/errors.hpp"
#include "twoway/types.hpp"

namespace twoway {

inline constexpr double kVarianceFloor = 1e-8;
inline constexpr double kProbabilityFloor = 1e-10;
inline constexpr double kSimplexTolerance = 1e-12;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(sum(exp(x))) over a range, -inf for an empty or all -inf range.
template <class Range>
double log_sum_exp(const Range& xs) {
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

/// Stationary vector of a row-stochastic matrix, from rho (I - Pi + J) = 1'.
inline Vector stationary_distribution(const Matrix& Pi) {
  const Eigen::Index k = Pi.rows();
  if (k == 0 || Pi.cols() != k) fail(ErrorKind::DimensionMismatch, "transition matrix must be square");
  const Matrix A = Matrix::Identity(k, k) - Pi + Matrix::Ones(k, k);
  Eigen::FullPivLU<Matrix> lu(A.transpose());
  lu.setThreshold(1e-10);
  if (!lu.isInvertible()) fail(ErrorKind::SingularChain, "stationary system is rank-deficient");
  Vector rho = lu.solve(Vector::Ones(k));
  for (Eigen::Index v = 0; v < k; ++v)
    if (rho(v) < 0.0 && rho(v) > -1e-12) rho(v) = 0.0;
  if ((rho.array() < 0.0).any() || !rho.allFinite())
    fail(ErrorKind::SingularChain, "stationary solve produced an invalid vector");
  rho /= rho.sum();
  return rho;
}

/// log N(y; psi, sigma2)
inline double log_emission(double y, double psi, double sigma2) {
  const double d = y - psi;
  return -0.5 * std::log(2.0 * std::numbers::pi * sigma2) - d * d / (2.0 * sigma2);
}

/// Free parameters: (k1 - 1) + k2 (k2 - 1) + k1 k2 + 1.
inline int n_free_params(int k1, int k2) { return (k1 - 1) + k2 * (k2 - 1) + k1 * k2 + 1; }

inline void validate_params(const ModelParams& p, const ModelDims& dims) {
  dims.check();
  if (p.lambda.size() != dims.k1) fail(ErrorKind::DimensionMismatch, "lambda length differs from k1");
  if (p.Pi.rows() != dims.k2 || p.Pi.cols() != dims.k2)
    fail(ErrorKind::DimensionMismatch, "Pi must be k2 x k2");
  if (p.Psi.rows() != dims.k1 || p.Psi.cols() != dims.k2)
    fail(ErrorKind::DimensionMismatch, "Psi must be k1 x k2");

  for (Eigen::Index u = 0; u < p.lambda.size(); ++u)
    if (!(p.lambda(u) >= 0.0 && p.lambda(u) <= 1.0))
      fail(ErrorKind::InvalidSimplex, "lambda entries must lie in [0, 1]");
  if (std::abs(p.lambda.sum() - 1.0) > kSimplexTolerance) {
    std::ostringstream os;
    os << "lambda sums to " << p.lambda.sum() << ", not 1";
    fail(ErrorKind::InvalidSimplex, os.str());
  }

  for (Eigen::Index a = 0; a < p.Pi.rows(); ++a) {
    for (Eigen::Index b = 0; b < p.Pi.cols(); ++b)
      if (!(p.Pi(a, b) >= 0.0 && p.Pi(a, b) <= 1.0))
        fail(ErrorKind::InvalidStochasticMatrix, "Pi entries must lie in [0, 1]");
    if (std::abs(p.Pi.row(a).sum() - 1.0) > kSimplexTolerance) {
      std::ostringstream os;
      os << "row " << a + 1 << " of Pi sums to " << p.Pi.row(a).sum();
      fail(ErrorKind::InvalidStochasticMatrix, os.str());
    }
  }

  if (!p.Psi.allFinite()) fail(ErrorKind::InvalidArgument, "Psi has non-finite entries");
  if (!(p.sigma2 > 0.0) || !std::isfinite(p.sigma2))
    fail(ErrorKind::NonpositiveVariance, "sigma2 must be positive");
}

inline ModelDims dims_of(const TwoWayArray& data, const ModelParams& p) {
  return {data.rows(), data.cols(), p.k1(), p.k2()};
}

namespace detail {

inline void floor_and_normalize(auto&& probs) {
  for (Eigen::Index i = 0; i < probs.size(); ++i) probs(i) = std::max(probs(i), kProbabilityFloor);
  probs /= probs.sum();
}

}  // namespace detail

/// Probability floor with renormalisation for lambda and Pi rows, variance floor for sigma2.
inline void apply_floors(ModelParams& p) {
  detail::floor_and_normalize(p.lambda);
  for (Eigen::Index a = 0; a < p.Pi.rows(); ++a) {
    auto row = p.Pi.row(a);
    detail::floor_and_normalize(row);
  }
  p.sigma2 = std::max(p.sigma2, kVarianceFloor);
}

/// Per-cell log emission for every (u, v), laid out [cell][u * k2 + v].
inline std::vector<double> cell_log_emissions(const TwoWayArray& data, const ModelParams& p) {
  const int r = data.rows(), s = data.cols(), k1 = p.k1(), k2 = p.k2();
  const int K = k1 * k2;
  std::vector<double> out(static_cast<std::size_t>(r) * s * K, 0.0);
  const double lognorm = -0.5 * std::log(2.0 * std::numbers::pi * p.sigma2);
  const double inv2s = 1.0 / (2.0 * p.sigma2);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < s; ++j) {
      if (!data.observed(i, j)) continue;
      double* cell = &out[(static_cast<std::size_t>(i) * s + j) * K];
      const double y = data.values(i, j);
      for (int u = 0; u < k1; ++u)
        for (int v = 0; v < k2; ++v) {
          const double d = y - p.Psi(u, v);
          cell[u * k2 + v] = lognorm - d * d * inv2s;
        }
    }
  return out;
}

}  // namespace twoway
