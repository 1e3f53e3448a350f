#pragma once

#include <cassert>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace orunet {

/// Dense row-major tensor. Layout for 4D data is (n, c, h, w).
template <typename T>
struct TensorT {
  std::vector<int64_t> shape;
  std::vector<T> data;

  TensorT() = default;
  explicit TensorT(std::vector<int64_t> s) : shape(std::move(s)), data(count(shape), T(0)) {}

  static TensorT zeros(std::vector<int64_t> s) { return TensorT(std::move(s)); }
  static TensorT full(std::vector<int64_t> s, T value) {
    TensorT t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), value);
    return t;
  }

  static int64_t count(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t d : s) {
      if (d < 0) throw std::invalid_argument("negative tensor dimension");
      n *= d;
    }
    return n;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int64_t dim(int i) const { return shape.at(static_cast<size_t>(i)); }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  void fill(T value) { std::fill(data.begin(), data.end(), value); }
  void zero() { fill(T(0)); }

  T& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

  // 2D (h, w)
  T& at(int64_t y, int64_t x) {
    assert(rank() == 2);
    return data[static_cast<size_t>(y * shape[1] + x)];
  }
  const T& at(int64_t y, int64_t x) const {
    assert(rank() == 2);
    return data[static_cast<size_t>(y * shape[1] + x)];
  }

  // 3D (c, h, w)
  T& at(int64_t c, int64_t y, int64_t x) {
    assert(rank() == 3);
    return data[static_cast<size_t>((c * shape[1] + y) * shape[2] + x)];
  }
  const T& at(int64_t c, int64_t y, int64_t x) const {
    assert(rank() == 3);
    return data[static_cast<size_t>((c * shape[1] + y) * shape[2] + x)];
  }

  // 4D (n, c, h, w)
  T& at(int64_t n, int64_t c, int64_t y, int64_t x) {
    assert(rank() == 4);
    return data[static_cast<size_t>(((n * shape[1] + c) * shape[2] + y) * shape[3] + x)];
  }
  const T& at(int64_t n, int64_t c, int64_t y, int64_t x) const {
    assert(rank() == 4);
    return data[static_cast<size_t>(((n * shape[1] + c) * shape[2] + y) * shape[3] + x)];
  }

  bool same_shape(const TensorT& other) const { return shape == other.shape; }

  std::string shape_str() const {
    std::string s = "(";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ", ";
      s += std::to_string(shape[i]);
    }
    return s + ")";
  }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

/// Row-major C = alpha * op(A) * op(B) + beta * C, backed by BLAS.
/// op(A) is (m, k), op(B) is (k, n), C is (m, n).
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, float alpha,
          const float* a, int64_t lda, const float* b, int64_t ldb, float beta, float* c,
          int64_t ldc);
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, double alpha,
          const double* a, int64_t lda, const double* b, int64_t ldb, double beta, double* c,
          int64_t ldc);

}  // namespace orunet
