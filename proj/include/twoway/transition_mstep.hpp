#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "twoway/core_model.hpp"

namespace twoway {

/// Coefficients of   sum_v a_v log rho_v(Pi) + sum_{a,b} c_ab log pi_ab.
struct TransitionCriterion {
  Vector initial_weights;  // a, length k2
  Matrix pair_counts;      // c, k2 x k2

  void check() const {
    const auto k = initial_weights.size();
    if (k < 1 || pair_counts.rows() != k || pair_counts.cols() != k)
      fail(ErrorKind::DimensionMismatch, "criterion weights disagree on k2");
    if (!initial_weights.allFinite() || !pair_counts.allFinite() || (initial_weights.array() < 0.0).any() ||
        (pair_counts.array() < 0.0).any())
      fail(ErrorKind::InvalidArgument, "criterion weights must be finite and nonnegative");
  }

  double total() const { return initial_weights.sum() + pair_counts.sum(); }
};

/// Value of the criterion at Pi; 0 log 0 is taken as 0.
inline double transition_criterion(const TransitionCriterion& crit, const Matrix& Pi) {
  double f = 0.0;
  const Eigen::Index k = Pi.rows();
  if (crit.initial_weights.sum() > 0.0) {
    const Vector rho = stationary_distribution(Pi);
    for (Eigen::Index v = 0; v < k; ++v)
      if (crit.initial_weights(v) > 0.0) f += crit.initial_weights(v) * safe_log(rho(v));
  }
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b)
      if (crit.pair_counts(a, b) > 0.0) f += crit.pair_counts(a, b) * safe_log(Pi(a, b));
  return f;
}

struct TransitionOptions {
  int max_iter = 200;
  double param_tol = 1e-9;
  double grad_tol = 1e-11;  // on the criterion divided by its total weight
  double fd_step = 1e-6;
};

namespace detail {

// Off-diagonal logits of each row, the diagonal entry being the reference category.
class DiagonalLogits {
 public:
  explicit DiagonalLogits(int k) : k_(k) {}

  int size() const { return k_ * (k_ - 1); }

  Vector from_matrix(const Matrix& Pi) const {
    Vector theta(size());
    int p = 0;
    for (int a = 0; a < k_; ++a)
      for (int b = 0; b < k_; ++b)
        if (b != a) theta(p++) = std::log(Pi(a, b)) - std::log(Pi(a, a));
    return theta;
  }

  Matrix to_matrix(const Vector& theta) const {
    Matrix Pi(k_, k_);
    int p = 0;
    for (int a = 0; a < k_; ++a) {
      double m = 0.0;
      for (int b = 0, q = p; b < k_; ++b)
        if (b != a) m = std::max(m, theta(q++));
      double tot = 0.0;
      for (int b = 0; b < k_; ++b) {
        const double eta = (b == a) ? 0.0 : theta(p++);
        tot += (Pi(a, b) = std::exp(eta - m));
      }
      Pi.row(a) /= tot;
    }
    return Pi;
  }

  // parameter index of entry (a, b), b != a
  int index(int a, int b) const { return a * (k_ - 1) + (b < a ? b : b - 1); }

 private:
  int k_;
};

}  // namespace detail

/// Maximises the transition criterion over row-stochastic Pi subject to the
/// initial distribution being the stationary one. Ascent is by BFGS with
/// Armijo backtracking on the diagonal-referenced logits; the pair-count part
/// of the gradient is analytic, the stationary part uses central differences.
inline Matrix maximize_constrained_transitions(const TransitionCriterion& crit, const Matrix& start,
                                               const TransitionOptions& opt = {}) {
  crit.check();
  const int k = static_cast<int>(crit.initial_weights.size());
  if (start.rows() != k || start.cols() != k) fail(ErrorKind::DimensionMismatch, "start must be k2 x k2");
  if ((start.array() <= 0.0).any())
    fail(ErrorKind::InvalidStochasticMatrix, "start must have strictly positive entries");
  if (k == 1) return Matrix::Ones(1, 1);

  const double total = crit.total();
  if (!(total > 0.0)) return start;

  const detail::DiagonalLogits logits(k);
  const bool has_stationary_term = crit.initial_weights.sum() > 0.0;
  const Vector a = crit.initial_weights / total;
  const Matrix c = crit.pair_counts / total;
  const Vector row_tot = c.rowwise().sum();

  auto stationary_part = [&](const Vector& theta) {
    Vector rho;
    try {
      rho = stationary_distribution(logits.to_matrix(theta));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SingularChain) throw;
      return -std::numeric_limits<double>::infinity();
    }
    double f = 0.0;
    for (int v = 0; v < k; ++v)
      if (a(v) > 0.0) f += a(v) * safe_log(rho(v));
    return f;
  };
  // minimisation target: minus the normalised criterion
  auto value = [&](const Vector& theta) {
    const Matrix Pi = logits.to_matrix(theta);
    double f = has_stationary_term ? stationary_part(theta) : 0.0;
    for (int x = 0; x < k; ++x)
      for (int y = 0; y < k; ++y)
        if (c(x, y) > 0.0) f += c(x, y) * safe_log(Pi(x, y));
    return std::isfinite(f) ? -f : std::numeric_limits<double>::infinity();
  };
  auto gradient = [&](const Vector& theta) {
    const Matrix Pi = logits.to_matrix(theta);
    Vector g(logits.size());
    for (int x = 0; x < k; ++x)
      for (int y = 0; y < k; ++y)
        if (y != x) g(logits.index(x, y)) = -(c(x, y) - row_tot(x) * Pi(x, y));
    if (has_stationary_term) {
      Vector tp = theta, tm = theta;
      for (int p = 0; p < logits.size(); ++p) {
        tp(p) = theta(p) + opt.fd_step;
        tm(p) = theta(p) - opt.fd_step;
        g(p) -= (stationary_part(tp) - stationary_part(tm)) / (2.0 * opt.fd_step);
        tp(p) = tm(p) = theta(p);
      }
    }
    return g;
  };

  const int n = logits.size();
  Vector x = logits.from_matrix(start);
  double fx = value(x);
  Vector gx = gradient(x);
  Matrix H = Matrix::Identity(n, n);
  bool h_is_identity = true;

  for (int it = 0; it < opt.max_iter; ++it) {
    if (gx.lpNorm<Eigen::Infinity>() <= opt.grad_tol) break;
    Vector d = -H * gx;
    double slope = gx.dot(d);
    if (!(slope < 0.0)) {
      H.setIdentity();
      h_is_identity = true;
      d = -gx;
      slope = gx.dot(d);
    }
    // keep the first trial step in a sane logit range
    const double dmax = d.lpNorm<Eigen::Infinity>();
    const double t0 = dmax > 5.0 ? 5.0 / dmax : 1.0;
    double t = t0;

    bool accepted = false;
    Vector xn, gn;
    double fn = 0.0;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      xn = x + t * d;
      fn = value(xn);
      if (fn <= fx + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      // below the resolution of the criterion values, decide on the gradient
      if (std::abs(fn - fx) <= 1e-14 * (1.0 + std::abs(fx))) {
        gn = gradient(xn);
        if (gn.lpNorm<Eigen::Infinity>() < gx.lpNorm<Eigen::Infinity>()) {
          accepted = true;
          break;
        }
        gn.resize(0);
      }
    }
    if (!accepted) {
      if (h_is_identity) break;
      H.setIdentity();
      h_is_identity = true;
      continue;
    }

    const Vector step = xn - x;
    if (gn.size() == 0) gn = gradient(xn);
    const Vector yv = gn - gx;
    const double sy = step.dot(yv);
    if (sy > 1e-18) {
      const double rhoinv = 1.0 / sy;
      const Matrix I = Matrix::Identity(n, n);
      if (h_is_identity) H = I * (sy / yv.squaredNorm());
      H = (I - rhoinv * step * yv.transpose()) * H * (I - rhoinv * yv * step.transpose()) +
          rhoinv * step * step.transpose();
      h_is_identity = false;
    }
    x = xn;
    fx = fn;
    gx = gn;
    if (t == t0 && step.lpNorm<Eigen::Infinity>() < opt.param_tol) break;
  }

  Matrix best = logits.to_matrix(x);
  if (transition_criterion(crit, best) < transition_criterion(crit, start)) return start;
  return best;
}

}  // namespace twoway
