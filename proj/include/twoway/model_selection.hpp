#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "twoway/core_model.hpp"
#include "twoway/parallel.hpp"
#include "twoway/random.hpp"
#include "twoway/rowcol_composite.hpp"

namespace twoway {

/// One random half split of the cells. valid has floor(r*s/2) cells.
struct CVSplit {
  Mask train_mask;
  Mask valid_mask;
  std::uint64_t seed = 0;
};

/// Split d draws its validation cells from the stream derive_seed(seed, {d}).
inline std::vector<CVSplit> make_cv_splits(const ModelDims& dims, int D, std::uint64_t seed) {
  dims.check();
  if (D < 1) fail(ErrorKind::InvalidArgument, "number of splits must be >= 1");
  const long n = static_cast<long>(dims.r) * dims.s;
  if (n < 2) fail(ErrorKind::InvalidArgument, "need at least two cells to split");
  std::vector<CVSplit> out;
  out.reserve(D);
  std::vector<long> cells(n);
  for (int d = 0; d < D; ++d) {
    CVSplit sp;
    sp.seed = derive_seed(seed, {static_cast<std::uint64_t>(d)});
    Rng rng = make_rng(sp.seed);
    std::iota(cells.begin(), cells.end(), 0L);
    // partial Fisher-Yates: the first n/2 positions form the validation set
    const long m = n / 2;
    for (long k = 0; k < m; ++k) {
      std::uniform_int_distribution<long> pick(k, n - 1);
      std::swap(cells[k], cells[pick(rng)]);
    }
    sp.valid_mask = Mask::Constant(dims.r, dims.s, false);
    for (long k = 0; k < m; ++k) sp.valid_mask(cells[k] / dims.s, cells[k] % dims.s) = true;
    sp.train_mask = (!sp.valid_mask.array()).matrix();
    out.push_back(std::move(sp));
  }
  return out;
}

/// q = (x - min) / (max - min) over the finite entries; non-finite entries stay NaN.
inline Matrix relative_performance(const Matrix& cl_cv) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (Eigen::Index k = 0; k < cl_cv.size(); ++k) {
    const double x = cl_cv.data()[k];
    if (!std::isfinite(x)) continue;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  if (!(hi > lo)) fail(ErrorKind::DegenerateRange, "relative performance needs two distinct finite scores");
  Matrix q(cl_cv.rows(), cl_cv.cols());
  for (Eigen::Index k = 0; k < cl_cv.size(); ++k) {
    const double x = cl_cv.data()[k];
    q.data()[k] = std::isfinite(x) ? (x - lo) / (hi - lo) : std::numeric_limits<double>::quiet_NaN();
  }
  return q;
}

struct GridPoint {
  int k1 = 1;
  int k2 = 1;
  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

/// Parses "a:bxc:d" (or single values such as "2x1:4") into the row-major grid.
inline std::vector<GridPoint> parse_grid(const std::string& spec) {
  auto bad = [&] { fail(ErrorKind::InvalidArgument, "grid must look like 1:3x1:4, got '" + spec + "'"); };
  const auto x = spec.find('x');
  if (x == std::string::npos) bad();
  auto range = [&](const std::string& part) {
    const auto colon = part.find(':');
    try {
      std::size_t used = 0;
      if (colon == std::string::npos) {
        const int v = std::stoi(part, &used);
        if (used != part.size()) bad();
        return std::pair{v, v};
      }
      const std::string a = part.substr(0, colon), b = part.substr(colon + 1);
      const int lo = std::stoi(a, &used);
      if (used != a.size()) bad();
      const int hi = std::stoi(b, &used);
      if (used != b.size()) bad();
      return std::pair{lo, hi};
    } catch (const std::logic_error&) {
      bad();
    }
    return std::pair{0, 0};
  };
  const auto [a1, b1] = range(spec.substr(0, x));
  const auto [a2, b2] = range(spec.substr(x + 1));
  if (a1 < 1 || a2 < 1 || b1 < a1 || b2 < a2) bad();
  std::vector<GridPoint> grid;
  for (int k1 = a1; k1 <= b1; ++k1)
    for (int k2 = a2; k2 <= b2; ++k2) grid.push_back({k1, k2});
  return grid;
}

struct SelectionEntry {
  GridPoint point;
  int n_params = 0;
  double cl_cv = 0.0;  // NaN when any split failed
  int n_cv = 0;
  double q = 0.0;      // NaN when cl_cv is undefined
  bool flagged = false;
  std::vector<double> scores;  // per split validation score, NaN on failure
  std::vector<std::string> failures;
};

struct SelectionTable {
  std::vector<SelectionEntry> entries;  // same order as the grid
  int n_splits = 0;

  const SelectionEntry& at(int k1, int k2) const {
    for (const auto& e : entries)
      if (e.point.k1 == k1 && e.point.k2 == k2) return e;
    fail(ErrorKind::InvalidArgument, "grid point (" + std::to_string(k1) + "," + std::to_string(k2) + ") not in table");
  }
};

/// Half-split cross-validation over the grid. Each (split, pair) fit runs the
/// row-column estimator on the training cells with start seeds derived from
/// (seed, d, k1, k2), and is scored by the row-column objective on the
/// validation cells.
inline SelectionTable cv_selection(const TwoWayArray& data, const std::vector<GridPoint>& grid, int D,
                                   const FitConfig& config, std::uint64_t seed, unsigned threads = 1) {
  data.check_shape();
  if (grid.empty()) fail(ErrorKind::InvalidArgument, "grid is empty");
  if (!data.is_complete()) fail(ErrorKind::MissingDataUnsupported, "cross-validation expects a complete array");
  const ModelDims base{data.rows(), data.cols(), 1, 1};
  const auto splits = make_cv_splits(base, D, seed);
  const std::size_t G = grid.size();

  std::vector<double> score(static_cast<std::size_t>(D) * G, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::string> message(score.size());
  parallel_for(score.size(), threads, [&](std::size_t task) {
    const std::size_t d = task / G, g = task % G;
    const GridPoint pt = grid[g];
    try {
      FitConfig cfg = config;
      cfg.allow_empty_lines = true;
      cfg.initial.reset();
      cfg.seed = derive_seed(seed, {d, static_cast<std::uint64_t>(pt.k1), static_cast<std::uint64_t>(pt.k2)});
      const TwoWayArray train = data.restricted_to(splits[d].train_mask);
      const FitResult fr = fit_rowcol_cl(train, {data.rows(), data.cols(), pt.k1, pt.k2}, cfg);
      const TwoWayArray valid = data.restricted_to(splits[d].valid_mask);
      score[task] = rowcol_objective(valid, fr.params, true);
      if (!std::isfinite(score[task])) message[task] = "non-finite validation score";
    } catch (const Error& e) {
      message[task] = e.what();
    }
  });

  SelectionTable table;
  table.n_splits = D;
  for (std::size_t g = 0; g < G; ++g) {
    SelectionEntry e;
    e.point = grid[g];
    e.n_params = n_free_params(grid[g].k1, grid[g].k2);
    double acc = 0.0;
    for (int d = 0; d < D; ++d) {
      const double x = score[d * G + g];
      e.scores.push_back(x);
      if (!std::isfinite(x)) {
        e.flagged = true;
        e.failures.push_back("split " + std::to_string(d + 1) + ": " + message[d * G + g]);
      }
      acc += x;
    }
    e.cl_cv = e.flagged ? std::numeric_limits<double>::quiet_NaN() : acc / D;
    table.entries.push_back(std::move(e));
  }

  for (int d = 0; d < D; ++d) {
    double best = kNegInf;
    for (std::size_t g = 0; g < G; ++g)
      if (std::isfinite(score[d * G + g])) best = std::max(best, score[d * G + g]);
    if (best == kNegInf) continue;
    for (std::size_t g = 0; g < G; ++g)
      if (std::isfinite(score[d * G + g]) && score[d * G + g] >= best - 1e-6) ++table.entries[g].n_cv;
  }

  Matrix cl(static_cast<Eigen::Index>(G), 1);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t g = 0; g < G; ++g) {
    cl(g, 0) = table.entries[g].cl_cv;
    if (std::isfinite(cl(g, 0))) {
      lo = std::min(lo, cl(g, 0));
      hi = std::max(hi, cl(g, 0));
    }
  }
  if (hi > lo) {
    const Matrix q = relative_performance(cl);
    for (std::size_t g = 0; g < G; ++g) table.entries[g].q = q(g, 0);
  } else {
    // a single distinct score: every defined candidate is the best one
    for (auto& e : table.entries) e.q = std::isfinite(e.cl_cv) ? 1.0 : std::numeric_limits<double>::quiet_NaN();
  }
  return table;
}

/// The candidate with the fewest free parameters among those with q >= threshold.
/// Ties in parameter count go to the higher q, then to grid order.
inline GridPoint select_parsimonious(const SelectionTable& table, double threshold = 0.98) {
  const SelectionEntry* best = nullptr;
  for (const auto& e : table.entries) {
    if (!std::isfinite(e.q) || e.q < threshold) continue;
    if (!best || e.n_params < best->n_params || (e.n_params == best->n_params && e.q > best->q)) best = &e;
  }
  if (!best) fail(ErrorKind::DegenerateRange, "no candidate reaches the q threshold");
  return best->point;
}

}  // namespace twoway
