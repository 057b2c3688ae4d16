#pragma once

#include <cmath>
#include <vector>

#include "twoway/core_model.hpp"
#include "twoway/em.hpp"
#include "twoway/row_composite.hpp"
#include "twoway/tensor.hpp"

namespace twoway {

/// Posteriors under the independent-columns approximation. Unobserved cells
/// carry their prior, w2 = lambda and wz2 = lambda_u * z2(j, v).
struct ColumnCLPosteriors {
  Matrix z2_hat;      // s x k2
  Tensor<3> w2_hat;   // r x s x k1
  Tensor<4> wz2_hat;  // r x s x k1 x k2
  double loglik = 0.0;
};

namespace detail {

/// Column-level view handed to column sinks: the state posteriors of column j
/// and, for each observed cell, the log of p(y_ij | V_j = v).
struct ColumnSlice {
  int j = 0;
  const std::vector<double>* z2 = nullptr;        // k2
  const std::vector<double>* cell_mix = nullptr;  // r x k2, log p(y_ij | V_j = v)
  const double* cells = nullptr;                   // cell log emissions of the whole array
};

template <class OnColumn>
double column_pass(const TwoWayArray& data, const ModelParams& params, bool allow_empty, OnColumn* on_column) {
  data.check_shape();
  validate_params(params, dims_of(data, params));
  check_nonempty_lines(data, false, !allow_empty);

  const int r = data.rows(), s = data.cols(), k1 = params.k1(), k2 = params.k2();
  const int K = k1 * k2;
  const Vector rho = stationary_distribution(params.Pi);
  const std::vector<double> cells = cell_log_emissions(data, params);

  std::vector<double> loglam(k1);
  for (int u = 0; u < k1; ++u) loglam[u] = safe_log(params.lambda(u));

  std::vector<double> mix(static_cast<std::size_t>(r) * k2), lcol(k2), z2(k2), tmp(k1);
  double total = 0.0;
  for (int j = 0; j < s; ++j) {
    for (int v = 0; v < k2; ++v) lcol[v] = safe_log(rho(v));
    for (int i = 0; i < r; ++i) {
      if (!data.observed(i, j)) continue;
      const double* cell = &cells[(static_cast<std::size_t>(i) * s + j) * K];
      for (int v = 0; v < k2; ++v) {
        for (int u = 0; u < k1; ++u) tmp[u] = loglam[u] + cell[u * k2 + v];
        const double lp = log_sum_exp(tmp);
        mix[static_cast<std::size_t>(i) * k2 + v] = lp;
        lcol[v] += lp;
      }
    }
    const double lj = log_sum_exp(lcol);
    if (!std::isfinite(lj)) fail(ErrorKind::InvalidEmission, "column " + std::to_string(j + 1) + " has zero density");
    total += lj;
    if (on_column) {
      for (int v = 0; v < k2; ++v) z2[v] = std::exp(lcol[v] - lj);
      (*on_column)(ColumnSlice{j, &z2, &mix, cells.data()}, loglam);
    }
  }
  return total;
}

struct NoColumnSink {
  void operator()(const ColumnSlice&, const std::vector<double>&) {}
};

}  // namespace detail

/// Column composite log-likelihood: sum_j log sum_v rho_v prod_i sum_u lambda_u phi(y_ij; psi_uv, sigma2).
inline double column_loglik(const TwoWayArray& data, const ModelParams& params, bool allow_empty = false) {
  return detail::column_pass(data, params, allow_empty, static_cast<detail::NoColumnSink*>(nullptr));
}

/// Row-column composite objective, the plain sum of the two composite terms.
inline double rowcol_objective(const TwoWayArray& data, const ModelParams& params, bool allow_empty = false) {
  return row_loglik(data, params, allow_empty) + column_loglik(data, params, allow_empty);
}

inline ColumnCLPosteriors column_e_step(const TwoWayArray& data, const ModelParams& params,
                                        bool allow_empty = false) {
  const int r = data.rows(), s = data.cols(), k1 = params.k1(), k2 = params.k2();
  const int K = k1 * k2;
  ColumnCLPosteriors out;
  out.z2_hat = Matrix::Zero(s, k2);
  out.w2_hat = Tensor<3>(r, s, k1);
  out.wz2_hat = Tensor<4>(r, s, k1, k2);

  auto sink = [&](const detail::ColumnSlice& col, const std::vector<double>& loglam) {
    const int j = col.j;
    const auto& z2 = *col.z2;
    for (int v = 0; v < k2; ++v) out.z2_hat(j, v) = z2[v];
    for (int i = 0; i < r; ++i) {
      if (!data.observed(i, j)) {
        for (int u = 0; u < k1; ++u) {
          out.w2_hat(i, j, u) = params.lambda(u);
          for (int v = 0; v < k2; ++v) out.wz2_hat(i, j, u, v) = params.lambda(u) * z2[v];
        }
        continue;
      }
      const double* cell = &col.cells[(static_cast<std::size_t>(i) * s + j) * K];
      for (int u = 0; u < k1; ++u)
        for (int v = 0; v < k2; ++v) {
          const double resp = std::exp(loglam[u] + cell[u * k2 + v] - (*col.cell_mix)[i * k2 + v]);
          out.wz2_hat(i, j, u, v) = resp * z2[v];
          out.w2_hat(i, j, u) += resp * z2[v];
        }
    }
  };
  out.loglik = detail::column_pass(data, params, allow_empty, &sink);
  return out;
}

/// EM on the row-column composite log-likelihood.
inline FitResult fit_rowcol_cl(const TwoWayArray& data, const ModelDims& dims, const FitConfig& config) {
  data.check_shape();
  dims.check();
  if (dims.r != data.rows() || dims.s != data.cols())
    fail(ErrorKind::DimensionMismatch, "dims disagree with the data array");
  detail::check_nonempty_lines(data, !config.allow_empty_lines, !config.allow_empty_lines);

  const int r = dims.r, s = dims.s, k1 = dims.k1, k2 = dims.k2;
  const int K = k1 * k2;
  const double shift = observed_mean(data);
  const double n_obs = static_cast<double>(data.n_observed());

  auto step = [&](const ModelParams& cur, ModelParams& next) {
    detail::RowSideStats rows(k1, k2);
    GaussianStats gauss(k1, k2, shift);
    const double obj1 = detail::accumulate_row_side(data, cur, config.allow_empty_lines, rows, gauss);

    Vector lambda_col = Vector::Zero(k1);
    Vector initial_col = Vector::Zero(k2);
    auto sink = [&](const detail::ColumnSlice& col, const std::vector<double>& loglam) {
      const int j = col.j;
      const auto& z2 = *col.z2;
      for (int v = 0; v < k2; ++v) initial_col(v) += z2[v];
      for (int i = 0; i < r; ++i) {
        if (!data.observed(i, j)) continue;
        const double* cell = &col.cells[(static_cast<std::size_t>(i) * s + j) * K];
        const double y = data.values(i, j);
        for (int u = 0; u < k1; ++u)
          for (int v = 0; v < k2; ++v) {
            const double joint = std::exp(loglam[u] + cell[u * k2 + v] - (*col.cell_mix)[i * k2 + v]) * z2[v];
            lambda_col(u) += joint;
            gauss.add(u, v, joint, y);
          }
      }
    };
    const double obj2 = detail::column_pass(data, cur, config.allow_empty_lines, &sink);

    next.lambda = (rows.lambda_weight + lambda_col) / (static_cast<double>(r) + n_obs);
    next.Pi = detail::update_transitions(rows.initial + initial_col, rows.pairs, cur.Pi);
    gauss.update(next, 2.0 * n_obs);
    apply_floors(next);
    return obj1 + obj2;
  };
  return detail::run_em(data, dims, config, Method::RowCol, step);
}

}  // namespace twoway
