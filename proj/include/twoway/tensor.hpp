#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace twoway {

/// Dense row-major N-dimensional array of doubles. Used for the posterior
/// blocks that do not fit a matrix (pairwise slices, row x column x state joints).
template <std::size_t N>
class Tensor {
 public:
  Tensor() { dims_.fill(0); }

  template <class... Extents>
    requires(sizeof...(Extents) == N)
  explicit Tensor(Extents... extents) : dims_{static_cast<std::size_t>(extents)...} {
    std::size_t total = 1;
    for (auto d : dims_) total *= d;
    data_.assign(total, 0.0);
  }

  template <class... Idx>
    requires(sizeof...(Idx) == N)
  double& operator()(Idx... idx) {
    return data_[offset(static_cast<std::size_t>(idx)...)];
  }

  template <class... Idx>
    requires(sizeof...(Idx) == N)
  double operator()(Idx... idx) const {
    return data_[offset(static_cast<std::size_t>(idx)...)];
  }

  std::size_t dim(std::size_t axis) const { return dims_[axis]; }
  const std::array<std::size_t, N>& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  void fill(double value) { data_.assign(data_.size(), value); }

 private:
  template <class... Idx>
  std::size_t offset(Idx... idx) const {
    const std::array<std::size_t, N> index{idx...};
    std::size_t off = 0;
    for (std::size_t a = 0; a < N; ++a) off = off * dims_[a] + index[a];
    return off;
  }

  std::array<std::size_t, N> dims_;
  std::vector<double> data_;
};

}  // namespace twoway
