#pragma once

#include <vector>

#include "twoway/row_composite.hpp"

namespace twoway {

struct Prediction {
  std::vector<int> row_labels;  // 1..k1
  std::vector<int> col_labels;  // 1..k2
  Matrix row_posteriors;        // r x k1
  Matrix col_posteriors;        // s x k2
  Matrix cell_means;            // r x s, psi at the predicted label pair
};

namespace detail {

/// 1-based argmax of a posterior row; the lowest index wins ties.
inline int map_label(const Eigen::Ref<const Vector>& p) {
  int best = 0;
  for (int k = 1; k < p.size(); ++k)
    if (p(k) > p(best)) best = k;
  return best + 1;
}

}  // namespace detail

/// MAP labels. Row posteriors come from the row composite E-step. Column
/// posteriors average the per-row smoothed state marginals over rows, so every
/// row informs the segmentation without enumerating row configurations.
inline Prediction predict_map(const TwoWayArray& data, const ModelParams& params, bool allow_empty = false) {
  const RowCLPosteriors post = row_e_step(data, params, allow_empty);
  const int r = data.rows(), s = data.cols(), k2 = params.k2();
  Prediction out;
  out.row_posteriors = post.w1_hat;
  out.col_posteriors = Matrix::Zero(s, k2);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < s; ++j)
      for (int v = 0; v < k2; ++v) out.col_posteriors(j, v) += post.z1_marg(i, j, v) / r;

  for (int i = 0; i < r; ++i) out.row_labels.push_back(detail::map_label(out.row_posteriors.row(i).transpose()));
  for (int j = 0; j < s; ++j) out.col_labels.push_back(detail::map_label(out.col_posteriors.row(j).transpose()));
  out.cell_means.resize(r, s);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < s; ++j) out.cell_means(i, j) = params.Psi(out.row_labels[i] - 1, out.col_labels[j] - 1);
  return out;
}

}  // namespace twoway
