#pragma once

#include <random>

#include "twoway/types.hpp"

namespace testing_support {

using twoway::Matrix;
using twoway::ModelParams;
using twoway::TwoWayArray;
using twoway::Vector;

inline Vector random_simplex(std::mt19937_64& rng, int k, double floor = 0.05) {
  std::gamma_distribution<double> g(1.0, 1.0);
  Vector x(k);
  for (int i = 0; i < k; ++i) x(i) = g(rng) + floor;
  return x / x.sum();
}

inline ModelParams random_params(std::mt19937_64& rng, int k1, int k2) {
  std::uniform_real_distribution<double> mean(-2.0, 2.0), var(0.3, 1.5);
  ModelParams p;
  p.lambda = random_simplex(rng, k1);
  p.Pi.resize(k2, k2);
  for (int a = 0; a < k2; ++a) p.Pi.row(a) = random_simplex(rng, k2).transpose();
  p.Psi.resize(k1, k2);
  for (int u = 0; u < k1; ++u)
    for (int v = 0; v < k2; ++v) p.Psi(u, v) = mean(rng);
  p.sigma2 = var(rng);
  return p;
}

inline TwoWayArray random_data(std::mt19937_64& rng, int r, int s, double missing = 0.0) {
  std::normal_distribution<double> n(0.0, 1.5);
  std::bernoulli_distribution drop(missing);
  Matrix y(r, s);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < s; ++j) y(i, j) = n(rng);
  TwoWayArray a = TwoWayArray::complete(y);
  if (missing > 0.0) {
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < s; ++j) a.mask(i, j) = !drop(rng);
    // keep every row and column non-empty
    for (int i = 0; i < r; ++i) a.mask(i, i % s) = true;
    for (int j = 0; j < s; ++j) a.mask(j % r, j) = true;
  }
  return a;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace testing_support
