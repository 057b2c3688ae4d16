#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "twoway/core_model.hpp"
#include "twoway/tensor.hpp"

namespace twoway {

/// s x k2 log-emission table: entry (j, v) is the log density of column j under state v.
using LogEmissionTable = Matrix;

struct ChainPosteriors {
  Matrix gamma;     // s x k2 smoothed marginals
  Tensor<3> xi;     // (s-1) x k2 x k2 pairwise, xi(j-1, a, b) = p(V_{j-1}=a, V_j=b)
  double loglik = 0.0;
};

namespace detail {

/// Scaled forward/backward over a stationary chain. Emissions are supplied by a
/// callable `log_e(j, v)`, so callers can stream them from cached cell tables
/// instead of materialising an s x k2 matrix.
class ChainRecursion {
 public:
  ChainRecursion() = default;

  template <class LogEmission>
  double forward(int s, const Matrix& Pi, const Vector& rho, LogEmission&& log_e) {
    const int k = static_cast<int>(Pi.rows());
    s_ = s;
    k_ = k;
    alpha_.resize(static_cast<std::size_t>(s) * k);
    scaled_.resize(static_cast<std::size_t>(s) * k);
    norm_.resize(s);

    double loglik = 0.0;
    for (int j = 0; j < s; ++j) {
      double* e = &scaled_[static_cast<std::size_t>(j) * k];
      double* a = &alpha_[static_cast<std::size_t>(j) * k];
      double m = kNegInf;
      for (int v = 0; v < k; ++v) {
        e[v] = log_e(j, v);
        m = std::max(m, e[v]);
      }
      for (int v = 0; v < k; ++v) e[v] = std::exp(e[v] - m);

      if (j == 0) {
        for (int v = 0; v < k; ++v) a[v] = rho(v) * e[v];
      } else {
        const double* prev = a - k;
        for (int v = 0; v < k; ++v) {
          double acc = 0.0;
          for (int w = 0; w < k; ++w) acc += prev[w] * Pi(w, v);
          a[v] = acc * e[v];
        }
      }
      double c = 0.0;
      for (int v = 0; v < k; ++v) c += a[v];
      if (!(c > 0.0)) {
        loglik_ = kNegInf;
        return loglik_;
      }
      for (int v = 0; v < k; ++v) a[v] /= c;
      norm_[j] = c;
      loglik += m + std::log(c);
    }
    loglik_ = loglik;
    return loglik;
  }

  /// Backward pass after a successful forward(); fills gamma (s x k) and, when
  /// requested, xi ((s-1) x k x k) through the callback `on_pair(j, a, b, p)`.
  template <class OnMarginal, class OnPair>
  void backward(const Matrix& Pi, OnMarginal&& on_marginal, OnPair&& on_pair) {
    const int s = s_, k = k_;
    beta_.assign(static_cast<std::size_t>(s) * k, 1.0);
    for (int j = s - 1; j >= 1; --j) {
      const double* e = &scaled_[static_cast<std::size_t>(j) * k];
      const double* b = &beta_[static_cast<std::size_t>(j) * k];
      double* bp = &beta_[static_cast<std::size_t>(j - 1) * k];
      for (int w = 0; w < k; ++w) {
        double acc = 0.0;
        for (int v = 0; v < k; ++v) acc += Pi(w, v) * e[v] * b[v];
        bp[w] = acc / norm_[j];
      }
    }
    std::vector<double> g(k);
    for (int j = 0; j < s; ++j) {
      const double* a = &alpha_[static_cast<std::size_t>(j) * k];
      const double* b = &beta_[static_cast<std::size_t>(j) * k];
      double tot = 0.0;
      for (int v = 0; v < k; ++v) tot += (g[v] = a[v] * b[v]);
      for (int v = 0; v < k; ++v) on_marginal(j, v, g[v] / tot);
    }
    std::vector<double> x(static_cast<std::size_t>(k) * k);
    for (int j = 1; j < s; ++j) {
      const double* ap = &alpha_[static_cast<std::size_t>(j - 1) * k];
      const double* e = &scaled_[static_cast<std::size_t>(j) * k];
      const double* b = &beta_[static_cast<std::size_t>(j) * k];
      double tot = 0.0;
      for (int w = 0; w < k; ++w)
        for (int v = 0; v < k; ++v) tot += (x[w * k + v] = ap[w] * Pi(w, v) * e[v] * b[v]);
      for (int w = 0; w < k; ++w)
        for (int v = 0; v < k; ++v) on_pair(j - 1, w, v, x[w * k + v] / tot);
    }
  }

  double loglik() const { return loglik_; }

 private:
  int s_ = 0, k_ = 0;
  double loglik_ = 0.0;
  std::vector<double> alpha_, scaled_, norm_, beta_;
};

inline void check_chain_inputs(const LogEmissionTable& emissions, const Matrix& Pi, const Vector& rho) {
  if (Pi.rows() != Pi.cols() || emissions.cols() != Pi.rows() || rho.size() != Pi.rows())
    fail(ErrorKind::DimensionMismatch, "emission table, Pi and rho disagree on k2");
  if (emissions.rows() < 1) fail(ErrorKind::DimensionMismatch, "emission table has no columns");
  if (!emissions.allFinite()) fail(ErrorKind::InvalidEmission, "log-emission table must be finite");
}

}  // namespace detail

/// Log-likelihood of a stationary chain with initial distribution rho.
inline double chain_loglik(const LogEmissionTable& emissions, const Matrix& Pi, const Vector& rho) {
  detail::check_chain_inputs(emissions, Pi, rho);
  detail::ChainRecursion rec;
  return rec.forward(static_cast<int>(emissions.rows()), Pi, rho,
                     [&](int j, int v) { return emissions(j, v); });
}

inline ChainPosteriors chain_posteriors(const LogEmissionTable& emissions, const Matrix& Pi, const Vector& rho) {
  detail::check_chain_inputs(emissions, Pi, rho);
  const int s = static_cast<int>(emissions.rows());
  const int k = static_cast<int>(Pi.rows());
  detail::ChainRecursion rec;
  ChainPosteriors out;
  out.loglik = rec.forward(s, Pi, rho, [&](int j, int v) { return emissions(j, v); });
  if (!std::isfinite(out.loglik))
    fail(ErrorKind::InvalidEmission, "chain has zero likelihood under the given transitions");
  out.gamma = Matrix::Zero(s, k);
  out.xi = Tensor<3>(s > 1 ? s - 1 : 0, k, k);
  rec.backward(
      Pi, [&](int j, int v, double p) { out.gamma(j, v) = p; },
      [&](int j, int a, int b, double p) { out.xi(j, a, b) = p; });
  return out;
}

}  // namespace twoway
