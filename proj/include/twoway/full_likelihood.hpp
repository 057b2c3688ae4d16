#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "twoway/core_model.hpp"
#include "twoway/em.hpp"
#include "twoway/hmm.hpp"
#include "twoway/tensor.hpp"

namespace twoway {

/// Exact posteriors under the full model.
struct FullPosteriors {
  Matrix w_hat;         // r x k1, p(U_i = u | Y)
  Vector z1_hat;        // k2, p(V_1 = v | Y)
  Tensor<3> zpair_hat;  // (s-1) x k2 x k2, p(V_{j-1} = a, V_j = b | Y), slice j-1
  Tensor<4> wz_hat;     // r x s x k1 x k2, p(U_i = u, V_j = v | Y)
  double loglik = 0.0;
};

namespace detail {

inline std::uint64_t checked_power(int base, int exponent, std::uint64_t cap, const char* what) {
  std::uint64_t n = 1;
  for (int e = 0; e < exponent; ++e) {
    if (n > cap / static_cast<std::uint64_t>(base))
      fail(ErrorKind::EnumerationTooLarge, std::string(what) + ": " + std::to_string(base) + "^" +
                                               std::to_string(exponent) + " exceeds the cap of " +
                                               std::to_string(cap));
    n *= static_cast<std::uint64_t>(base);
  }
  if (n > cap) fail(ErrorKind::EnumerationTooLarge, what);
  return n;
}

inline void check_full_inputs(const TwoWayArray& data, const ModelParams& params, std::uint64_t cap) {
  data.check_shape();
  validate_params(params, dims_of(data, params));
  if (!data.is_complete())
    fail(ErrorKind::MissingDataUnsupported, "the full likelihood requires a complete array");
  checked_power(params.k1(), data.rows(), cap, "row configurations");
}

/// Walks all k1^r row configurations in lexicographic order (row 1 most
/// significant) with prefix sums of column log-emissions. A step recomputes
/// only the rows whose labels changed.
class RowConfigWalk {
 public:
  RowConfigWalk(const TwoWayArray& data, const ModelParams& params)
      : r_(data.rows()), s_(data.cols()), k1_(params.k1()), k2_(params.k2()),
        cells_(cell_log_emissions(data, params)), labels_(r_, 0),
        prefix_(static_cast<std::size_t>(r_ + 1) * s_ * k2_, 0.0), prefix_loglam_(r_ + 1, 0.0) {
    loglam_.resize(k1_);
    for (int u = 0; u < k1_; ++u) loglam_[u] = safe_log(params.lambda(u));
    rebuild_from(0);
  }

  const std::vector<int>& labels() const { return labels_; }
  double log_prior() const { return prefix_loglam_[r_]; }
  double emission(int j, int v) const { return total_[static_cast<std::size_t>(j) * k2_ + v]; }

  bool next() {
    int p = r_ - 1;
    while (p >= 0 && labels_[p] == k1_ - 1) --p;
    if (p < 0) return false;
    ++labels_[p];
    for (int i = p + 1; i < r_; ++i) labels_[i] = 0;
    rebuild_from(p);
    return true;
  }

 private:
  void rebuild_from(int p) {
    const std::size_t block = static_cast<std::size_t>(s_) * k2_;
    const int K = k1_ * k2_;
    for (int i = p; i < r_; ++i) {
      const double* prev = &prefix_[i * block];
      double* cur = &prefix_[(i + 1) * block];
      const int u = labels_[i];
      for (int j = 0; j < s_; ++j) {
        const double* cell = &cells_[(static_cast<std::size_t>(i) * s_ + j) * K + u * k2_];
        for (int v = 0; v < k2_; ++v) cur[j * k2_ + v] = prev[j * k2_ + v] + cell[v];
      }
      prefix_loglam_[i + 1] = prefix_loglam_[i] + loglam_[u];
    }
    total_ = &prefix_[r_ * block];
  }

  int r_, s_, k1_, k2_;
  std::vector<double> cells_;
  std::vector<int> labels_;
  std::vector<double> prefix_;
  std::vector<double> prefix_loglam_;
  std::vector<double> loglam_;
  const double* total_ = nullptr;
};

/// Two passes over the row configurations: the first computes every log p(Y|u)p(u)
/// and the normaliser; the second hands each configuration with non-negligible
/// posterior weight, together with its fitted chain recursion, to `sink`.
/// Skipped configurations carry less than 1e-18 posterior mass in total.
template <class Sink>
double full_pass(const TwoWayArray& data, const ModelParams& params, std::uint64_t cap, Sink* sink) {
  check_full_inputs(data, params, cap);
  const Vector rho = stationary_distribution(params.Pi);
  const int s = data.cols();

  std::vector<double> logw;
  ChainRecursion rec;
  {
    RowConfigWalk walk(data, params);
    do {
      const double lp = walk.log_prior();
      logw.push_back(lp == kNegInf ? kNegInf
                                   : lp + rec.forward(s, params.Pi, rho,
                                                      [&](int j, int v) { return walk.emission(j, v); }));
    } while (walk.next());
  }
  const double logp = log_sum_exp(logw);
  if (!std::isfinite(logp)) fail(ErrorKind::InvalidEmission, "full likelihood is zero");
  if (!sink) return logp;

  const double cutoff = std::log(1e-18 / static_cast<double>(logw.size()));
  RowConfigWalk walk(data, params);
  std::size_t c = 0;
  do {
    const double lw = logw[c++] - logp;
    if (lw < cutoff) continue;
    rec.forward(s, params.Pi, rho, [&](int j, int v) { return walk.emission(j, v); });
    (*sink)(walk.labels(), std::exp(lw), rec);
  } while (walk.next());
  return logp;
}

}  // namespace detail

/// log p(Y) = log sum_u p(u) p(Y | u), each p(Y | u) by the chain recursion.
inline double full_loglik(const TwoWayArray& data, const ModelParams& params,
                          std::uint64_t cap = kDefaultEnumerationCap) {
  struct NoSink {
    void operator()(const std::vector<int>&, double, detail::ChainRecursion&) {}
  };
  return detail::full_pass(data, params, cap, static_cast<NoSink*>(nullptr));
}

/// Naive double sum over all (u, v) configurations, for cross-checking only.
inline double brute_force_loglik(const TwoWayArray& data, const ModelParams& params) {
  data.check_shape();
  validate_params(params, dims_of(data, params));
  if (!data.is_complete()) fail(ErrorKind::MissingDataUnsupported, "brute force requires a complete array");
  const int r = data.rows(), s = data.cols(), k1 = params.k1(), k2 = params.k2();
  constexpr std::uint64_t kCap = 1000000;
  const std::uint64_t nu = detail::checked_power(k1, r, kCap, "brute force row configurations");
  detail::checked_power(k2, s, kCap / nu, "brute force joint configurations");

  const Vector rho = stationary_distribution(params.Pi);
  std::vector<int> u(r, 0), v(s, 0);
  auto bump = [](std::vector<int>& x, int k) {
    for (int p = static_cast<int>(x.size()) - 1; p >= 0; --p) {
      if (++x[p] < k) return true;
      x[p] = 0;
    }
    return false;
  };
  std::vector<double> terms;
  do {
    double lu = 0.0;
    for (int i = 0; i < r; ++i) lu += safe_log(params.lambda(u[i]));
    std::fill(v.begin(), v.end(), 0);
    do {
      double t = lu + safe_log(rho(v[0]));
      for (int j = 1; j < s; ++j) t += safe_log(params.Pi(v[j - 1], v[j]));
      if (t != kNegInf)
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < s; ++j) t += log_emission(data.values(i, j), params.Psi(u[i], v[j]), params.sigma2);
      terms.push_back(t);
    } while (bump(v, k2));
  } while (bump(u, k1));
  return log_sum_exp(terms);
}

inline FullPosteriors full_e_step(const TwoWayArray& data, const ModelParams& params,
                                  std::uint64_t cap = kDefaultEnumerationCap) {
  const int r = data.rows(), s = data.cols(), k1 = params.k1(), k2 = params.k2();
  FullPosteriors out;
  out.w_hat = Matrix::Zero(r, k1);
  out.z1_hat = Vector::Zero(k2);
  out.zpair_hat = Tensor<3>(s > 1 ? s - 1 : 0, k2, k2);
  out.wz_hat = Tensor<4>(r, s, k1, k2);

  auto sink = [&](const std::vector<int>& labels, double w, detail::ChainRecursion& rec) {
    for (int i = 0; i < r; ++i) out.w_hat(i, labels[i]) += w;
    rec.backward(
        params.Pi,
        [&](int j, int v, double p) {
          if (j == 0) out.z1_hat(v) += w * p;
          for (int i = 0; i < r; ++i) out.wz_hat(i, j, labels[i], v) += w * p;
        },
        [&](int j, int a, int b, double p) { out.zpair_hat(j, a, b) += w * p; });
  };
  out.loglik = detail::full_pass(data, params, cap, &sink);
  return out;
}

/// Full-likelihood EM. The joint row/column posteriors are folded straight
/// into the M-step statistics, so no r x s x k1 x k2 array is stored.
inline FitResult fit_full(const TwoWayArray& data, const ModelDims& dims, const FitConfig& config) {
  data.check_shape();
  dims.check();
  if (dims.r != data.rows() || dims.s != data.cols())
    fail(ErrorKind::DimensionMismatch, "dims disagree with the data array");
  if (!data.is_complete()) fail(ErrorKind::MissingDataUnsupported, "the full likelihood requires a complete array");
  detail::checked_power(dims.k1, dims.r, config.enumeration_cap, "row configurations");

  const int r = dims.r, s = dims.s, k1 = dims.k1, k2 = dims.k2;
  const double shift = observed_mean(data);

  auto step = [&](const ModelParams& cur, ModelParams& next) {
    Matrix w_hat = Matrix::Zero(r, k1);
    Vector z1 = Vector::Zero(k2);
    Matrix pairs = Matrix::Zero(k2, k2);
    GaussianStats stats(k1, k2, shift);
    auto sink = [&](const std::vector<int>& labels, double w, detail::ChainRecursion& rec) {
      for (int i = 0; i < r; ++i) w_hat(i, labels[i]) += w;
      rec.backward(
          cur.Pi,
          [&](int j, int v, double p) {
            if (j == 0) z1(v) += w * p;
            const double wp = w * p;
            for (int i = 0; i < r; ++i) stats.add(labels[i], v, wp, data.values(i, j));
          },
          [&](int, int a, int b, double p) { pairs(a, b) += w * p; });
    };
    const double ll = detail::full_pass(data, cur, config.enumeration_cap, &sink);

    next.lambda = w_hat.colwise().sum().transpose() / static_cast<double>(r);
    next.Pi = detail::update_transitions(z1, pairs, cur.Pi);
    stats.update(next, static_cast<double>(r) * s);
    apply_floors(next);
    return ll;
  };
  return detail::run_em(data, dims, config, Method::Full, step);
}

}  // namespace twoway
