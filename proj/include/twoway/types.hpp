#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "twoway/errors.hpp"

namespace twoway {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct ModelDims {
  int r = 1;   // rows
  int s = 1;   // columns
  int k1 = 1;  // row support points
  int k2 = 1;  // column support points

  void check() const {
    if (r < 1 || s < 1 || k1 < 1 || k2 < 1)
      fail(ErrorKind::DimensionMismatch, "dimensions must all be positive");
  }
};

/// lambda (k1), Pi (k2 x k2, row-stochastic), Psi (k1 x k2 means), sigma2.
/// The stationary distribution is derived from Pi on demand, never stored.
struct ModelParams {
  Vector lambda;
  Matrix Pi;
  Matrix Psi;
  double sigma2 = 1.0;

  int k1() const { return static_cast<int>(lambda.size()); }
  int k2() const { return static_cast<int>(Pi.rows()); }
};

/// r x s observation matrix with an observed-cell mask (true = observed).
struct TwoWayArray {
  Matrix values;
  Mask mask;
  std::vector<std::string> row_names;
  std::vector<std::string> col_names;

  static TwoWayArray complete(Matrix values) {
    TwoWayArray a;
    a.mask = Mask::Constant(values.rows(), values.cols(), true);
    a.values = std::move(values);
    return a;
  }

  int rows() const { return static_cast<int>(values.rows()); }
  int cols() const { return static_cast<int>(values.cols()); }
  bool observed(int i, int j) const { return mask(i, j); }
  bool is_complete() const { return mask.all(); }
  long n_observed() const { return static_cast<long>(mask.count()); }

  /// Same values, observed only where both this mask and `keep` are true.
  TwoWayArray restricted_to(const Mask& keep) const {
    if (keep.rows() != mask.rows() || keep.cols() != mask.cols())
      fail(ErrorKind::DimensionMismatch, "mask shape differs from array shape");
    TwoWayArray out = *this;
    out.mask = mask.array() && keep.array();
    return out;
  }

  void check_shape() const {
    if (values.rows() != mask.rows() || values.cols() != mask.cols())
      fail(ErrorKind::DimensionMismatch, "values and mask have different shapes");
    if (values.size() == 0) fail(ErrorKind::EmptyMatrix, "array has no cells");
  }
};

enum class Method { Full, Row, RowCol };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::Full: return "full";
    case Method::Row: return "row";
    case Method::RowCol: return "rowcol";
  }
  return "?";
}

inline Method parse_method(const std::string& name) {
  if (name == "full") return Method::Full;
  if (name == "row" || name == "row_cl") return Method::Row;
  if (name == "rowcol" || name == "rowcol_cl") return Method::RowCol;
  fail(ErrorKind::InvalidArgument, "unknown method '" + name + "'");
}

inline constexpr std::uint64_t kDefaultEnumerationCap = std::uint64_t{1} << 20;

/// Shared estimator settings. Every random choice is a function of `seed`.
struct FitConfig {
  int n_starts = 10;
  std::uint64_t seed = 0;
  double tol = 1e-8;
  int max_iter = 1000;
  std::uint64_t enumeration_cap = kDefaultEnumerationCap;
  // When > 0, every start runs this many iterations and only the best one is
  // continued to convergence.
  int screen_iters = 0;
  // Rows/columns with no observed cell contribute zero to the objective
  // instead of raising EmptyRow/EmptyColumn. Cross-validation needs this.
  bool allow_empty_lines = false;
  // Extra start evaluated before the random ones (start index 0).
  std::optional<ModelParams> initial;
};

struct FitResult {
  ModelParams params;
  std::vector<double> trace;  // objective at each evaluated iterate
  bool converged = false;
  int iterations = 0;
  std::uint64_t seed = 0;
  Method method = Method::RowCol;
  double objective = 0.0;
  int best_start = 0;
};

}  // namespace twoway
