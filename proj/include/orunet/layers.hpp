#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "orunet/tensor.hpp"

namespace orunet::nn {

// Workspace cap for the im2col buffer, in elements. Convolutions tile their
// output rows so the buffer never exceeds this.
constexpr int64_t kMaxColElems = 1 << 23;

/// 3x3 / 1x1 convolution over (n, c, h, w) tensors via tiled im2col + GEMM.
/// Stateless forward; backward recomputes the column buffer instead of
/// caching it and accumulates into grad_weight / grad_bias.
template <typename T>
struct Conv2d {
  int64_t in_ch = 0, out_ch = 0, kernel = 0, stride = 1, pad = 0;
  bool has_bias = false;
  TensorT<T> weight;  // (out_ch, in_ch, k, k)
  TensorT<T> bias;    // (out_ch)
  TensorT<T> grad_weight;
  TensorT<T> grad_bias;

  Conv2d() = default;
  Conv2d(int64_t in, int64_t out, int64_t k, int64_t s, int64_t p, bool with_bias)
      : in_ch(in), out_ch(out), kernel(k), stride(s), pad(p), has_bias(with_bias),
        weight({out, in, k, k}), bias({with_bias ? out : 0}),
        grad_weight({out, in, k, k}), grad_bias({with_bias ? out : 0}) {}

  int64_t out_size(int64_t in_size) const { return (in_size + 2 * pad - kernel) / stride + 1; }

  TensorT<T> forward(const TensorT<T>& x) const {
    const int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    if (x.dim(1) != in_ch)
      throw std::invalid_argument("Conv2d: expected " + std::to_string(in_ch) + " channels, got " +
                                  std::to_string(x.dim(1)));
    const int64_t ho = out_size(h), wo = out_size(w);
    TensorT<T> y({n, out_ch, ho, wo});
    const int64_t k_rows = in_ch * kernel * kernel;
    const int64_t rows_per_tile = tile_rows(wo, k_rows);
    std::vector<T> col(static_cast<size_t>(k_rows * rows_per_tile * wo));
    for (int64_t ni = 0; ni < n; ++ni) {
      for (int64_t oy0 = 0; oy0 < ho; oy0 += rows_per_tile) {
        const int64_t oy1 = std::min(ho, oy0 + rows_per_tile);
        const int64_t cols = (oy1 - oy0) * wo;
        im2col(x, ni, h, w, wo, oy0, oy1, col.data());
        T* out = &y.at(ni, 0, oy0, 0);
        gemm(false, false, out_ch, cols, k_rows, T(1), weight.ptr(), k_rows, col.data(), cols,
             T(0), out, cols);
        if (has_bias)
          for (int64_t co = 0; co < out_ch; ++co) {
            T* row = &y.at(ni, co, oy0, 0);
            for (int64_t j = 0; j < cols; ++j) row[j] += bias[co];
          }
      }
    }
    return y;
  }

  /// Returns grad wrt x; adds this call's contribution to grad_weight/grad_bias.
  TensorT<T> backward(const TensorT<T>& x, const TensorT<T>& grad_y) {
    const int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int64_t ho = out_size(h), wo = out_size(w);
    if (grad_y.dim(0) != n || grad_y.dim(1) != out_ch || grad_y.dim(2) != ho ||
        grad_y.dim(3) != wo)
      throw std::invalid_argument("Conv2d backward: grad shape mismatch");
    TensorT<T> grad_x(x.shape);
    const int64_t k_rows = in_ch * kernel * kernel;
    const int64_t rows_per_tile = tile_rows(wo, k_rows);
    std::vector<T> col(static_cast<size_t>(k_rows * rows_per_tile * wo));
    std::vector<T> dcol(static_cast<size_t>(k_rows * rows_per_tile * wo));
    for (int64_t ni = 0; ni < n; ++ni) {
      for (int64_t oy0 = 0; oy0 < ho; oy0 += rows_per_tile) {
        const int64_t oy1 = std::min(ho, oy0 + rows_per_tile);
        const int64_t cols = (oy1 - oy0) * wo;
        im2col(x, ni, h, w, wo, oy0, oy1, col.data());
        const T* dy = &grad_y.at(ni, 0, oy0, 0);
        // dW += dY * col^T
        gemm(false, true, out_ch, k_rows, cols, T(1), dy, cols, col.data(), cols, T(1),
             grad_weight.ptr(), k_rows);
        // dcol = W^T * dY
        gemm(true, false, k_rows, cols, out_ch, T(1), weight.ptr(), k_rows, dy, cols, T(0),
             dcol.data(), cols);
        col2im_add(grad_x, ni, h, w, wo, oy0, oy1, dcol.data());
        if (has_bias)
          for (int64_t co = 0; co < out_ch; ++co) {
            const T* row = &grad_y.at(ni, co, oy0, 0);
            double s = 0;
            for (int64_t j = 0; j < cols; ++j) s += row[j];
            grad_bias[co] += static_cast<T>(s);
          }
      }
    }
    return grad_x;
  }

  void zero_grad() {
    grad_weight.zero();
    grad_bias.zero();
  }

 private:
  // grad_y rows per im2col tile; out_ch appears in grad_y strides so the tile
  // must align with whole output rows.
  static int64_t tile_rows(int64_t wo, int64_t k_rows) {
    const int64_t target_cols = std::max<int64_t>(wo, kMaxColElems / std::max<int64_t>(1, k_rows));
    return std::max<int64_t>(1, target_cols / wo);
  }

  void im2col(const TensorT<T>& x, int64_t ni, int64_t h, int64_t w, int64_t wo, int64_t oy0,
              int64_t oy1, T* col) const {
    const int64_t cols = (oy1 - oy0) * wo;
    int64_t r = 0;
    for (int64_t ci = 0; ci < in_ch; ++ci)
      for (int64_t ky = 0; ky < kernel; ++ky)
        for (int64_t kx = 0; kx < kernel; ++kx, ++r) {
          T* dst = col + r * cols;
          for (int64_t oy = oy0; oy < oy1; ++oy, dst += wo) {
            const int64_t iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= h) {
              std::fill(dst, dst + wo, T(0));
              continue;
            }
            const T* src = &x.at(ni, ci, iy, 0);
            if (stride == 1) {
              const int64_t ix0 = kx - pad;
              for (int64_t ox = 0; ox < wo; ++ox) {
                const int64_t ix = ix0 + ox;
                dst[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
              }
            } else {
              for (int64_t ox = 0; ox < wo; ++ox) {
                const int64_t ix = ox * stride + kx - pad;
                dst[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
              }
            }
          }
        }
  }

  void col2im_add(TensorT<T>& gx, int64_t ni, int64_t h, int64_t w, int64_t wo, int64_t oy0,
                  int64_t oy1, const T* dcol) const {
    const int64_t cols = (oy1 - oy0) * wo;
    int64_t r = 0;
    for (int64_t ci = 0; ci < in_ch; ++ci)
      for (int64_t ky = 0; ky < kernel; ++ky)
        for (int64_t kx = 0; kx < kernel; ++kx, ++r) {
          const T* src = dcol + r * cols;
          for (int64_t oy = oy0; oy < oy1; ++oy, src += wo) {
            const int64_t iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= h) continue;
            T* dst = &gx.at(ni, ci, iy, 0);
            for (int64_t ox = 0; ox < wo; ++ox) {
              const int64_t ix = ox * stride + kx - pad;
              if (ix >= 0 && ix < w) dst[ix] += src[ox];
            }
          }
        }
  }
};

/// Transposed convolution with kernel 2 and stride 2 (exact x2 upsampling,
/// non-overlapping). Weight layout (in_ch, out_ch, 2, 2).
template <typename T>
struct ConvTranspose2x2 {
  int64_t in_ch = 0, out_ch = 0;
  TensorT<T> weight;  // (in_ch, out_ch, 2, 2)
  TensorT<T> grad_weight;

  ConvTranspose2x2() = default;
  ConvTranspose2x2(int64_t in, int64_t out)
      : in_ch(in), out_ch(out), weight({in, out, 2, 2}), grad_weight({in, out, 2, 2}) {}

  TensorT<T> forward(const TensorT<T>& x) const {
    const int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    if (x.dim(1) != in_ch) throw std::invalid_argument("ConvTranspose2x2: channel mismatch");
    TensorT<T> y({n, out_ch, 2 * h, 2 * w});
    const int64_t hw = h * w;
    std::vector<T> cols(static_cast<size_t>(out_ch * 4 * hw));
    for (int64_t ni = 0; ni < n; ++ni) {
      // cols = W^T (out_ch*4, in_ch) * x_n (in_ch, hw)
      gemm(true, false, out_ch * 4, hw, in_ch, T(1), weight.ptr(), out_ch * 4,
           &x.at(ni, 0, 0, 0), hw, T(0), cols.data(), hw);
      for (int64_t co = 0; co < out_ch; ++co)
        for (int64_t ky = 0; ky < 2; ++ky)
          for (int64_t kx = 0; kx < 2; ++kx) {
            const T* src = cols.data() + ((co * 2 + ky) * 2 + kx) * hw;
            for (int64_t iy = 0; iy < h; ++iy) {
              T* dst = &y.at(ni, co, 2 * iy + ky, kx);
              for (int64_t ix = 0; ix < w; ++ix) dst[2 * ix] = src[iy * w + ix];
            }
          }
    }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& x, const TensorT<T>& grad_y) {
    const int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    if (grad_y.dim(1) != out_ch || grad_y.dim(2) != 2 * h || grad_y.dim(3) != 2 * w)
      throw std::invalid_argument("ConvTranspose2x2 backward: grad shape mismatch");
    TensorT<T> grad_x(x.shape);
    const int64_t hw = h * w;
    std::vector<T> dcols(static_cast<size_t>(out_ch * 4 * hw));
    for (int64_t ni = 0; ni < n; ++ni) {
      for (int64_t co = 0; co < out_ch; ++co)
        for (int64_t ky = 0; ky < 2; ++ky)
          for (int64_t kx = 0; kx < 2; ++kx) {
            T* dst = dcols.data() + ((co * 2 + ky) * 2 + kx) * hw;
            for (int64_t iy = 0; iy < h; ++iy) {
              const T* src = &grad_y.at(ni, co, 2 * iy + ky, kx);
              for (int64_t ix = 0; ix < w; ++ix) dst[iy * w + ix] = src[2 * ix];
            }
          }
      // dW += x_n (in_ch, hw) * dcols^T (hw, out_ch*4)
      gemm(false, true, in_ch, out_ch * 4, hw, T(1), &x.at(ni, 0, 0, 0), hw, dcols.data(), hw,
           T(1), grad_weight.ptr(), out_ch * 4);
      // dx = W (in_ch, out_ch*4) * dcols (out_ch*4, hw)
      gemm(false, false, in_ch, hw, out_ch * 4, T(1), weight.ptr(), out_ch * 4, dcols.data(), hw,
           T(0), &grad_x.at(ni, 0, 0, 0), hw);
    }
    return grad_x;
  }

  void zero_grad() { grad_weight.zero(); }
};

/// Batch normalization over (n, h, w) per channel. Training uses batch
/// statistics and maintains running estimates; eval uses the running
/// estimates, so eval-mode forward is deterministic.
template <typename T>
struct BatchNorm2d {
  int64_t channels = 0;
  double eps = 1e-5;
  double momentum = 0.1;
  TensorT<T> scale, shift;              // learnable
  TensorT<T> running_mean, running_var; // buffers
  TensorT<T> grad_scale, grad_shift;

  struct Cache {
    TensorT<T> x_hat;
    std::vector<double> inv_std;
  };

  BatchNorm2d() = default;
  BatchNorm2d(int64_t ch, double epsilon)
      : channels(ch), eps(epsilon), scale(TensorT<T>::full({ch}, T(1))), shift({ch}),
        running_mean({ch}), running_var(TensorT<T>::full({ch}, T(1))), grad_scale({ch}),
        grad_shift({ch}) {}

  TensorT<T> forward_train(const TensorT<T>& x, Cache* cache) {
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (c != channels) throw std::invalid_argument("BatchNorm2d: channel mismatch");
    const double m = double(n) * h * w;
    TensorT<T> y(x.shape);
    cache->x_hat = TensorT<T>(x.shape);
    cache->inv_std.assign(static_cast<size_t>(c), 0.0);
    for (int64_t ci = 0; ci < c; ++ci) {
      double sum = 0, sq = 0;
      for (int64_t ni = 0; ni < n; ++ni) {
        const T* p = &x.at(ni, ci, 0, 0);
        for (int64_t i = 0; i < h * w; ++i) {
          sum += p[i];
          sq += double(p[i]) * double(p[i]);
        }
      }
      const double mean = sum / m;
      const double var = std::max(0.0, sq / m - mean * mean);
      const double inv_std = 1.0 / std::sqrt(var + eps);
      cache->inv_std[ci] = inv_std;
      running_mean[ci] = static_cast<T>((1 - momentum) * running_mean[ci] + momentum * mean);
      running_var[ci] = static_cast<T>((1 - momentum) * running_var[ci] + momentum * var);
      const double g = scale[ci], b = shift[ci];
      for (int64_t ni = 0; ni < n; ++ni) {
        const T* p = &x.at(ni, ci, 0, 0);
        T* ph = &cache->x_hat.at(ni, ci, 0, 0);
        T* py = &y.at(ni, ci, 0, 0);
        for (int64_t i = 0; i < h * w; ++i) {
          const double xh = (p[i] - mean) * inv_std;
          ph[i] = static_cast<T>(xh);
          py[i] = static_cast<T>(g * xh + b);
        }
      }
    }
    return y;
  }

  TensorT<T> forward_eval(const TensorT<T>& x) const {
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (c != channels) throw std::invalid_argument("BatchNorm2d: channel mismatch");
    TensorT<T> y(x.shape);
    for (int64_t ci = 0; ci < c; ++ci) {
      const double inv_std = 1.0 / std::sqrt(double(running_var[ci]) + eps);
      const double mean = running_mean[ci];
      const double g = scale[ci], b = shift[ci];
      for (int64_t ni = 0; ni < n; ++ni) {
        const T* p = &x.at(ni, ci, 0, 0);
        T* py = &y.at(ni, ci, 0, 0);
        for (int64_t i = 0; i < h * w; ++i)
          py[i] = static_cast<T>(g * ((p[i] - mean) * inv_std) + b);
      }
    }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& grad_y, const Cache& cache) {
    const int64_t n = grad_y.dim(0), c = grad_y.dim(1), h = grad_y.dim(2), w = grad_y.dim(3);
    const double m = double(n) * h * w;
    TensorT<T> grad_x(grad_y.shape);
    for (int64_t ci = 0; ci < c; ++ci) {
      double sum_dy = 0, sum_dy_xh = 0;
      for (int64_t ni = 0; ni < n; ++ni) {
        const T* dy = &grad_y.at(ni, ci, 0, 0);
        const T* xh = &cache.x_hat.at(ni, ci, 0, 0);
        for (int64_t i = 0; i < h * w; ++i) {
          sum_dy += dy[i];
          sum_dy_xh += double(dy[i]) * double(xh[i]);
        }
      }
      grad_shift[ci] += static_cast<T>(sum_dy);
      grad_scale[ci] += static_cast<T>(sum_dy_xh);
      const double g_inv = double(scale[ci]) * cache.inv_std[ci];
      const double mean_dy = sum_dy / m, mean_dy_xh = sum_dy_xh / m;
      for (int64_t ni = 0; ni < n; ++ni) {
        const T* dy = &grad_y.at(ni, ci, 0, 0);
        const T* xh = &cache.x_hat.at(ni, ci, 0, 0);
        T* dx = &grad_x.at(ni, ci, 0, 0);
        for (int64_t i = 0; i < h * w; ++i)
          dx[i] = static_cast<T>(g_inv * (dy[i] - mean_dy - double(xh[i]) * mean_dy_xh));
      }
    }
    return grad_x;
  }

  void zero_grad() {
    grad_scale.zero();
    grad_shift.zero();
  }
};

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
  TensorT<T> y(x.shape);
  for (int64_t i = 0; i < x.numel(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return y;
}

/// dx = dy where the forward output was positive, using y itself as the mask.
template <typename T>
TensorT<T> relu_backward(const TensorT<T>& y, const TensorT<T>& grad_y) {
  TensorT<T> dx(y.shape);
  for (int64_t i = 0; i < y.numel(); ++i) dx[i] = y[i] > T(0) ? grad_y[i] : T(0);
  return dx;
}

}  // namespace orunet::nn
