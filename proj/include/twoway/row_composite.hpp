#pragma once

#include <cmath>
#include <vector>

#include "twoway/core_model.hpp"
#include "twoway/em.hpp"
#include "twoway/hmm.hpp"
#include "twoway/tensor.hpp"

namespace twoway {

/// Posteriors under the independent-rows approximation.
struct RowCLPosteriors {
  Matrix w1_hat;       // r x k1
  Tensor<3> z1_marg;   // r x s x k2
  Tensor<4> z1_pair;   // r x (s-1) x k2 x k2
  Tensor<4> wz1_hat;   // r x s x k1 x k2
  double loglik = 0.0;
};

namespace detail {

/// One pass over the rows. Each row is a k1-mixture of stationary chains whose
/// missing cells contribute a unit emission factor. For each row the callback
/// receives the row-cluster posteriors and the k1 fitted chain recursions.
template <class OnRow>
double row_pass(const TwoWayArray& data, const ModelParams& params, bool allow_empty, OnRow* on_row) {
  data.check_shape();
  validate_params(params, dims_of(data, params));
  check_nonempty_lines(data, !allow_empty, false);

  const int r = data.rows(), s = data.cols(), k1 = params.k1(), k2 = params.k2();
  const int K = k1 * k2;
  const Vector rho = stationary_distribution(params.Pi);
  const std::vector<double> cells = cell_log_emissions(data, params);

  std::vector<ChainRecursion> recs(k1);
  std::vector<double> logpost(k1), w(k1);
  double total = 0.0;
  for (int i = 0; i < r; ++i) {
    for (int u = 0; u < k1; ++u) {
      const double ll = safe_log(params.lambda(u));
      if (ll == kNegInf) {
        logpost[u] = kNegInf;
        continue;
      }
      const double* base = &cells[static_cast<std::size_t>(i) * s * K + u * k2];
      logpost[u] = ll + recs[u].forward(s, params.Pi, rho, [&](int j, int v) {
        return data.observed(i, j) ? base[static_cast<std::size_t>(j) * K + v] : 0.0;
      });
    }
    const double lrow = log_sum_exp(logpost);
    if (!std::isfinite(lrow)) fail(ErrorKind::InvalidEmission, "row " + std::to_string(i + 1) + " has zero density");
    total += lrow;
    if (on_row) {
      for (int u = 0; u < k1; ++u) w[u] = std::exp(logpost[u] - lrow);
      (*on_row)(i, w, recs);
    }
  }
  return total;
}

struct NoRowSink {
  void operator()(int, const std::vector<double>&, std::vector<ChainRecursion>&) {}
};

}  // namespace detail

/// Row composite log-likelihood: sum over rows of log sum_u lambda_u p(y_i | U_i = u).
inline double row_loglik(const TwoWayArray& data, const ModelParams& params, bool allow_empty = false) {
  return detail::row_pass(data, params, allow_empty, static_cast<detail::NoRowSink*>(nullptr));
}

inline RowCLPosteriors row_e_step(const TwoWayArray& data, const ModelParams& params, bool allow_empty = false) {
  const int r = data.rows(), s = data.cols(), k1 = params.k1(), k2 = params.k2();
  RowCLPosteriors out;
  out.w1_hat = Matrix::Zero(r, k1);
  out.z1_marg = Tensor<3>(r, s, k2);
  out.z1_pair = Tensor<4>(r, s > 1 ? s - 1 : 0, k2, k2);
  out.wz1_hat = Tensor<4>(r, s, k1, k2);

  auto sink = [&](int i, const std::vector<double>& w, std::vector<detail::ChainRecursion>& recs) {
    for (int u = 0; u < k1; ++u) {
      out.w1_hat(i, u) = w[u];
      if (w[u] == 0.0) continue;
      recs[u].backward(
          params.Pi,
          [&](int j, int v, double p) {
            out.wz1_hat(i, j, u, v) = w[u] * p;
            out.z1_marg(i, j, v) += w[u] * p;
          },
          [&](int j, int a, int b, double p) { out.z1_pair(i, j, a, b) += w[u] * p; });
    }
  };
  out.loglik = detail::row_pass(data, params, allow_empty, &sink);
  return out;
}

namespace detail {

/// Row-side sufficient statistics shared by the row and row-column M-steps.
struct RowSideStats {
  Vector lambda_weight;  // sum_i w1(i, u)
  Vector initial;        // sum_i z1(i, 1, v)
  Matrix pairs;          // sum_i sum_j z1(i, j, a, b)

  RowSideStats(int k1, int k2)
      : lambda_weight(Vector::Zero(k1)), initial(Vector::Zero(k2)), pairs(Matrix::Zero(k2, k2)) {}
};

/// Row composite E-step folded into `rows` and `gauss` (observed cells only).
inline double accumulate_row_side(const TwoWayArray& data, const ModelParams& p, bool allow_empty, RowSideStats& rows,
                                  GaussianStats& gauss) {
  const int k1 = p.k1();
  auto sink = [&](int i, const std::vector<double>& w, std::vector<ChainRecursion>& recs) {
    for (int u = 0; u < k1; ++u) {
      rows.lambda_weight(u) += w[u];
      if (w[u] == 0.0) continue;
      const double wu = w[u];
      recs[u].backward(
          p.Pi,
          [&](int j, int v, double pr) {
            if (j == 0) rows.initial(v) += wu * pr;
            if (data.observed(i, j)) gauss.add(u, v, wu * pr, data.values(i, j));
          },
          [&](int, int a, int b, double pr) { rows.pairs(a, b) += wu * pr; });
    }
  };
  return row_pass(data, p, allow_empty, &sink);
}

}  // namespace detail

/// EM on the row composite log-likelihood; missing cells are marginalised.
inline FitResult fit_row_cl(const TwoWayArray& data, const ModelDims& dims, const FitConfig& config) {
  data.check_shape();
  dims.check();
  if (dims.r != data.rows() || dims.s != data.cols())
    fail(ErrorKind::DimensionMismatch, "dims disagree with the data array");
  detail::check_nonempty_lines(data, !config.allow_empty_lines, false);

  const double shift = observed_mean(data);
  const double n_obs = static_cast<double>(data.n_observed());

  auto step = [&](const ModelParams& cur, ModelParams& next) {
    detail::RowSideStats rows(dims.k1, dims.k2);
    GaussianStats gauss(dims.k1, dims.k2, shift);
    const double obj = detail::accumulate_row_side(data, cur, config.allow_empty_lines, rows, gauss);
    next.lambda = rows.lambda_weight / static_cast<double>(dims.r);
    next.Pi = detail::update_transitions(rows.initial, rows.pairs, cur.Pi);
    gauss.update(next, n_obs);
    apply_floors(next);
    return obj;
  };
  return detail::run_em(data, dims, config, Method::Row, step);
}

}  // namespace twoway
