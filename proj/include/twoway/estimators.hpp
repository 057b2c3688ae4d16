#pragma once

#include "twoway/full_likelihood.hpp"
#include "twoway/row_composite.hpp"
#include "twoway/rowcol_composite.hpp"

namespace twoway {

/// Dispatch on the estimator tag.
inline FitResult fit(const TwoWayArray& data, const ModelDims& dims, const FitConfig& config, Method method) {
  switch (method) {
    case Method::Full: return fit_full(data, dims, config);
    case Method::Row: return fit_row_cl(data, dims, config);
    case Method::RowCol: return fit_rowcol_cl(data, dims, config);
  }
  fail(ErrorKind::InvalidArgument, "unknown method");
}

/// Objective the given estimator maximises.
inline double objective(const TwoWayArray& data, const ModelParams& params, Method method,
                        bool allow_empty = false) {
  switch (method) {
    case Method::Full: return full_loglik(data, params);
    case Method::Row: return row_loglik(data, params, allow_empty);
    case Method::RowCol: return rowcol_objective(data, params, allow_empty);
  }
  fail(ErrorKind::InvalidArgument, "unknown method");
}

}  // namespace twoway
