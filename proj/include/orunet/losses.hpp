#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "orunet/tensor.hpp"

namespace orunet::loss {

constexpr double kDiceEps = 1e-8;

namespace detail {

template <typename T>
void check_same_shape(const TensorT<T>& x, const TensorT<T>& y, const char* op) {
  if (!x.same_shape(y))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + x.shape_str() + " vs " +
                                y.shape_str());
}

template <typename T>
void check_unit_range(const TensorT<T>& t, const char* op) {
  for (T v : t.data)
    if (!(v >= T(0) && v <= T(1)))
      throw std::invalid_argument(std::string(op) + ": value outside [0,1]");
}

}  // namespace detail

/// Dice loss against soft ground truth. x and y are same-shape tensors of
/// probabilities / soft targets in [0,1]. TP, FP, FN are defined elementwise as
///   TP = max(0, y - |x - y|),  FP = max(0, x - y),  FN = max(0, y - x)
/// and summed over every dimension (batch included) before forming
///   loss = -2 tp / (2 tp + fp + fn + eps).
/// If grad_x is non-null it receives d(loss)/dx.
template <typename T>
T soft_dice_soft_gt(const TensorT<T>& x, const TensorT<T>& y, TensorT<T>* grad_x = nullptr) {
  detail::check_same_shape(x, y, "soft_dice_soft_gt");
  detail::check_unit_range(x, "soft_dice_soft_gt(x)");
  detail::check_unit_range(y, "soft_dice_soft_gt(y)");

  double tp = 0, fp = 0, fn = 0;
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) {
    const double xi = x[i], yi = y[i];
    tp += std::max(0.0, yi - std::abs(xi - yi));
    fp += std::max(0.0, xi - yi);
    fn += std::max(0.0, yi - xi);
  }
  const double denom = 2 * tp + fp + fn + kDiceEps;
  const double value = -2 * tp / denom;

  if (grad_x) {
    *grad_x = TensorT<T>(x.shape);
    const double d_tp = -2 * (fp + fn + kDiceEps) / (denom * denom);
    const double d_fp = 2 * tp / (denom * denom);
    const double d_fn = d_fp;
    for (int64_t i = 0; i < n; ++i) {
      const double xi = x[i], yi = y[i];
      double g = 0;
      if (yi - std::abs(xi - yi) > 0) g += d_tp * (xi > yi ? -1.0 : (xi < yi ? 1.0 : 0.0));
      if (xi > yi) g += d_fp;
      if (yi > xi) g -= d_fn;
      (*grad_x)[i] = static_cast<T>(g);
    }
  }
  return static_cast<T>(value);
}

/// Standard soft Dice loss against a binary target:
///   loss = -2 sum(x*y) / (sum(x) + sum(y) + eps),
/// sums taken over batch and spatial dimensions.
template <typename T>
T soft_dice_loss(const TensorT<T>& x, const TensorT<T>& y, TensorT<T>* grad_x = nullptr) {
  detail::check_same_shape(x, y, "soft_dice_loss");

  double inter = 0, sum_x = 0, sum_y = 0;
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) {
    inter += double(x[i]) * double(y[i]);
    sum_x += x[i];
    sum_y += y[i];
  }
  const double denom = sum_x + sum_y + kDiceEps;
  const double value = -2 * inter / denom;

  if (grad_x) {
    *grad_x = TensorT<T>(x.shape);
    for (int64_t i = 0; i < n; ++i)
      (*grad_x)[i] = static_cast<T>((-2 * double(y[i]) * denom + 2 * inter) / (denom * denom));
  }
  return static_cast<T>(value);
}

/// Pixel-wise cross-entropy over logits of shape (b, C, X, Y) against a
/// binary target of shape (b, 1, X, Y). Mean reduction over b*X*Y pixels,
/// computed in log-sum-exp form.
template <typename T>
T cross_entropy_loss(const TensorT<T>& logits, const TensorT<T>& target,
                     TensorT<T>* grad_logits = nullptr) {
  if (logits.rank() != 4 || target.rank() != 4 || target.dim(1) != 1)
    throw std::invalid_argument("cross_entropy_loss: expected (b,C,X,Y) logits, (b,1,X,Y) target");
  const int64_t b = logits.dim(0), c = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
  if (target.dim(0) != b || target.dim(2) != h || target.dim(3) != w)
    throw std::invalid_argument("cross_entropy_loss: shape mismatch " + logits.shape_str() +
                                " vs " + target.shape_str());

  if (grad_logits) *grad_logits = TensorT<T>(logits.shape);
  const double n_pix = double(b) * h * w;
  double total = 0;
  std::vector<double> p(static_cast<size_t>(c));
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        double m = -INFINITY;
        for (int64_t ci = 0; ci < c; ++ci) m = std::max(m, double(logits.at(bi, ci, y, x)));
        double z = 0;
        for (int64_t ci = 0; ci < c; ++ci) {
          p[ci] = std::exp(double(logits.at(bi, ci, y, x)) - m);
          z += p[ci];
        }
        const int64_t t = target.at(bi, 0, y, x) > T(0.5) ? 1 : 0;
        total += std::log(z) - (double(logits.at(bi, t, y, x)) - m);
        if (grad_logits)
          for (int64_t ci = 0; ci < c; ++ci)
            grad_logits->at(bi, ci, y, x) =
                static_cast<T>((p[ci] / z - (ci == t ? 1.0 : 0.0)) / n_pix);
      }
  return static_cast<T>(total / n_pix);
}

/// Mean squared error over all elements.
template <typename T>
T mse_loss(const TensorT<T>& x, const TensorT<T>& y, TensorT<T>* grad_x = nullptr) {
  detail::check_same_shape(x, y, "mse_loss");
  const int64_t n = x.numel();
  double total = 0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = double(x[i]) - double(y[i]);
    total += d * d;
  }
  if (grad_x) {
    *grad_x = TensorT<T>(x.shape);
    for (int64_t i = 0; i < n; ++i)
      (*grad_x)[i] = static_cast<T>(2 * (double(x[i]) - double(y[i])) / double(n));
  }
  return static_cast<T>(total / double(n));
}

/// Deep-supervision weights: raw weight 2^-i for head i, normalized to sum 1.
std::vector<double> ds_weights(int num_heads);

/// Average-pool a (b, 1, X, Y) binary target down `levels` times; level 0 is
/// the input itself, level i is non-overlapping 2x2 mean pooling applied i
/// times. Average pooling of a one-hot encoding yields soft labels in [0,1].
template <typename T>
std::vector<TensorT<T>> downsample_soft_gt(const TensorT<T>& target, int levels) {
  if (target.rank() != 4 || target.dim(1) != 1)
    throw std::invalid_argument("downsample_soft_gt: expected (b,1,X,Y) target");
  if (levels < 1) throw std::invalid_argument("downsample_soft_gt: levels must be >= 1");
  const int64_t div = int64_t(1) << (levels - 1);
  if (target.dim(2) % div != 0 || target.dim(3) % div != 0)
    throw std::invalid_argument("downsample_soft_gt: spatial size " + target.shape_str() +
                                " not divisible by " + std::to_string(div));

  std::vector<TensorT<T>> stack;
  stack.push_back(target);
  for (int lvl = 1; lvl < levels; ++lvl) {
    const TensorT<T>& prev = stack.back();
    const int64_t b = prev.dim(0), h = prev.dim(2) / 2, w = prev.dim(3) / 2;
    TensorT<T> cur({b, 1, h, w});
    for (int64_t bi = 0; bi < b; ++bi)
      for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x)
          cur.at(bi, 0, y, x) =
              static_cast<T>((double(prev.at(bi, 0, 2 * y, 2 * x)) +
                              double(prev.at(bi, 0, 2 * y, 2 * x + 1)) +
                              double(prev.at(bi, 0, 2 * y + 1, 2 * x)) +
                              double(prev.at(bi, 0, 2 * y + 1, 2 * x + 1))) /
                             4.0);
    stack.push_back(std::move(cur));
  }
  return stack;
}

/// Channel softmax for (b, C, X, Y) logits.
template <typename T>
TensorT<T> channel_softmax(const TensorT<T>& logits) {
  if (logits.rank() != 4) throw std::invalid_argument("channel_softmax: expected (b,C,X,Y)");
  const int64_t b = logits.dim(0), c = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
  TensorT<T> out(logits.shape);
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        double m = -INFINITY;
        for (int64_t ci = 0; ci < c; ++ci) m = std::max(m, double(logits.at(bi, ci, y, x)));
        double z = 0;
        for (int64_t ci = 0; ci < c; ++ci) z += std::exp(double(logits.at(bi, ci, y, x)) - m);
        for (int64_t ci = 0; ci < c; ++ci)
          out.at(bi, ci, y, x) =
              static_cast<T>(std::exp(double(logits.at(bi, ci, y, x)) - m) / z);
      }
  return out;
}

/// Backward through channel softmax: given d(loss)/d(probs), returns
/// d(loss)/d(logits).
template <typename T>
TensorT<T> channel_softmax_backward(const TensorT<T>& probs, const TensorT<T>& grad_probs) {
  detail::check_same_shape(probs, grad_probs, "channel_softmax_backward");
  const int64_t b = probs.dim(0), c = probs.dim(1), h = probs.dim(2), w = probs.dim(3);
  TensorT<T> grad(probs.shape);
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        double dot = 0;
        for (int64_t ci = 0; ci < c; ++ci)
          dot += double(grad_probs.at(bi, ci, y, x)) * double(probs.at(bi, ci, y, x));
        for (int64_t ci = 0; ci < c; ++ci)
          grad.at(bi, ci, y, x) = static_cast<T>(
              double(probs.at(bi, ci, y, x)) * (double(grad_probs.at(bi, ci, y, x)) - dot));
      }
  return grad;
}

/// Deep-supervision total loss. logits[i] has shape (b, C, X/2^i, Y/2^i);
/// targets[i] comes from downsample_soft_gt (level 0 binary, deeper levels
/// soft). Head 0 contributes soft Dice + cross-entropy against the binary
/// target; heads i >= 1 contribute MSE + soft-ground-truth Dice on the
/// foreground softmax channel. Heads are combined with ds_weights.
/// grad_logits, when non-null, receives one gradient tensor per head.
template <typename T>
T total_loss(const std::vector<TensorT<T>>& logits, const std::vector<TensorT<T>>& targets,
             std::vector<TensorT<T>>* grad_logits = nullptr) {
  if (logits.size() != targets.size())
    throw std::invalid_argument("total_loss: head count mismatch: " +
                                std::to_string(logits.size()) + " logits vs " +
                                std::to_string(targets.size()) + " targets");
  if (logits.empty()) throw std::invalid_argument("total_loss: no heads");
  const std::vector<double> weights = ds_weights(static_cast<int>(logits.size()));
  if (grad_logits) grad_logits->assign(logits.size(), TensorT<T>());

  const int64_t fg = 1;  // channel 1 carries the foreground probability
  double total = 0;
  for (size_t i = 0; i < logits.size(); ++i) {
    const TensorT<T>& z = logits[i];
    const TensorT<T>& y = targets[i];
    if (z.rank() != 4 || z.dim(1) < 2)
      throw std::invalid_argument("total_loss: logits need >= 2 channels");
    const int64_t b = z.dim(0), h = z.dim(2), w = z.dim(3);
    if (y.dim(0) != b || y.dim(1) != 1 || y.dim(2) != h || y.dim(3) != w)
      throw std::invalid_argument("total_loss: head " + std::to_string(i) + " target " +
                                  y.shape_str() + " does not match logits " + z.shape_str());

    TensorT<T> probs = channel_softmax(z);
    TensorT<T> fg_probs({b, 1, h, w});
    for (int64_t bi = 0; bi < b; ++bi)
      for (int64_t yy = 0; yy < h; ++yy)
        for (int64_t xx = 0; xx < w; ++xx) fg_probs.at(bi, 0, yy, xx) = probs.at(bi, fg, yy, xx);

    TensorT<T> grad_fg, grad_ce;
    TensorT<T>* gfg = grad_logits ? &grad_fg : nullptr;
    double head_loss;
    if (i == 0) {
      head_loss = double(soft_dice_loss(fg_probs, y, gfg)) +
                  double(cross_entropy_loss(z, y, grad_logits ? &grad_ce : nullptr));
    } else {
      TensorT<T> grad_fg2;
      head_loss = double(mse_loss(fg_probs, y, gfg)) +
                  double(soft_dice_soft_gt(fg_probs, y, grad_logits ? &grad_fg2 : nullptr));
      if (grad_logits)
        for (int64_t k = 0; k < grad_fg.numel(); ++k) grad_fg[k] += grad_fg2[k];
    }
    total += weights[i] * head_loss;

    if (grad_logits) {
      // Route the foreground-channel gradient through the softmax jacobian,
      // then add the cross-entropy logit gradient directly.
      TensorT<T> grad_probs(probs.shape);
      for (int64_t bi = 0; bi < b; ++bi)
        for (int64_t yy = 0; yy < h; ++yy)
          for (int64_t xx = 0; xx < w; ++xx)
            grad_probs.at(bi, fg, yy, xx) = grad_fg.at(bi, 0, yy, xx);
      TensorT<T> g = channel_softmax_backward(probs, grad_probs);
      const T wi = static_cast<T>(weights[i]);
      for (int64_t k = 0; k < g.numel(); ++k) g[k] *= wi;
      if (i == 0)
        for (int64_t k = 0; k < g.numel(); ++k) g[k] += wi * grad_ce[k];
      (*grad_logits)[i] = std::move(g);
    }
  }
  return static_cast<T>(total);
}

}  // namespace orunet::loss
