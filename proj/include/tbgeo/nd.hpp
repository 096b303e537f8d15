#pragma once

#include <cassert>
#include <vector>

namespace tbg {

// Dense rank-3 / rank-4 arrays with row-major layout. Index order is part of
// each field's documented convention (see manifold.hpp), not of this container.
template <typename T>
class Nd3 {
 public:
  Nd3() : d0_(0), d1_(0), d2_(0) {}
  Nd3(int d0, int d1, int d2, T init = T{})
      : d0_(d0), d1_(d1), d2_(d2), v_(static_cast<size_t>(d0) * d1 * d2, init) {}

  T& operator()(int i, int j, int k) { return v_[idx(i, j, k)]; }
  const T& operator()(int i, int j, int k) const { return v_[idx(i, j, k)]; }

  int d0() const { return d0_; }
  int d1() const { return d1_; }
  int d2() const { return d2_; }
  size_t size() const { return v_.size(); }
  const std::vector<T>& flat() const { return v_; }
  std::vector<T>& flat() { return v_; }

 private:
  size_t idx(int i, int j, int k) const {
    assert(i >= 0 && i < d0_ && j >= 0 && j < d1_ && k >= 0 && k < d2_);
    return (static_cast<size_t>(i) * d1_ + j) * d2_ + k;
  }
  int d0_, d1_, d2_;
  std::vector<T> v_;
};

template <typename T>
class Nd4 {
 public:
  Nd4() : d0_(0), d1_(0), d2_(0), d3_(0) {}
  Nd4(int d0, int d1, int d2, int d3, T init = T{})
      : d0_(d0), d1_(d1), d2_(d2), d3_(d3),
        v_(static_cast<size_t>(d0) * d1 * d2 * d3, init) {}

  T& operator()(int i, int j, int k, int l) { return v_[idx(i, j, k, l)]; }
  const T& operator()(int i, int j, int k, int l) const { return v_[idx(i, j, k, l)]; }

  int d0() const { return d0_; }
  int d1() const { return d1_; }
  int d2() const { return d2_; }
  int d3() const { return d3_; }
  size_t size() const { return v_.size(); }
  const std::vector<T>& flat() const { return v_; }
  std::vector<T>& flat() { return v_; }

 private:
  size_t idx(int i, int j, int k, int l) const {
    assert(i >= 0 && i < d0_ && j >= 0 && j < d1_ && k >= 0 && k < d2_ && l >= 0 && l < d3_);
    return ((static_cast<size_t>(i) * d1_ + j) * d2_ + k) * d3_ + l;
  }
  int d0_, d1_, d2_, d3_;
  std::vector<T> v_;
};

template <typename T>
double max_abs(const Nd3<T>& a) {
  double m = 0;
  for (const auto& x : a.flat()) m = std::max(m, std::abs(x));
  return m;
}

template <typename T>
double max_abs(const Nd4<T>& a) {
  double m = 0;
  for (const auto& x : a.flat()) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace tbg
