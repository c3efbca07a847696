#pragma once

// Fast guided filtering of feature stacks.
//
// For every channel independently, a low-resolution guide y and filter input z
// give per-window ridge-regression coefficients
//
//     a_k = (mean_k(y z) - mu_k zbar_k) / (sigma_k^2 + eps),   b_k = zbar_k - a_k mu_k,
//
// which are averaged over all windows covering each pixel (a_bar, b_bar),
// bilinearly upsampled, and applied to the high-resolution guide x:
//
//     q = a_bar_hr * x + b_bar_hr.

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>

#include "gunet/autodiff.hpp"
#include "gunet/ops.hpp"
#include "gunet/tensor.hpp"

namespace gunet {

struct GifParams {
  // Window half-width; kFullRadius makes a single window covering the whole map.
  static constexpr std::size_t kFullRadius = std::numeric_limits<std::size_t>::max();

  std::size_t radius = kFullRadius;
  double eps = 1e-3;

  bool full() const { return radius == kFullRadius; }

  static GifParams full_window(double eps) { return {kFullRadius, eps}; }
  static GifParams window(std::size_t radius, double eps) { return {radius, eps}; }

  void validate() const {
    if (!(eps >= 0.0) || !std::isfinite(eps)) {
      throw DataError("GifParams: eps must be a finite non-negative value, got " +
                      std::to_string(eps));
    }
  }
};

struct GifCoefficients {
  Tensor a_bar;
  Tensor b_bar;
};

namespace detail {

inline void require_nonsingular(const Tensor& var, double eps) {
  if (eps > 0.0) return;
  for (std::size_t n = 0; n < var.n(); ++n)
    for (std::size_t c = 0; c < var.c(); ++c)
      for (double v : var.plane(n, c))
        if (v <= 1e-300) {
          throw NumericalError("gif_coefficients: eps = 0 and channel " + std::to_string(c) +
                               " (batch item " + std::to_string(n) +
                               ") has a zero-variance window");
        }
}

inline Var window_mean(const Var& v, const GifParams& p) {
  return p.full() ? ag::spatial_mean(v) : ag::box_mean(v, p.radius);
}

}  // namespace detail

/// Differentiable coefficients. With a full window they have spatial size 1x1.
inline std::pair<Var, Var> gif_coefficients(const Var& y, const Var& z, const GifParams& params) {
  params.validate();
  y->value.require_same(z->value, "gif_coefficients (guide vs input)");
  const Var mu = detail::window_mean(y, params);
  const Var zbar = detail::window_mean(z, params);
  const Var yz = detail::window_mean(ag::mul(y, z), params);
  const Var yy = detail::window_mean(ag::mul(y, y), params);
  const Var var = ag::sub(yy, ag::mul(mu, mu));
  detail::require_nonsingular(var->value, params.eps);
  const Var cov = ag::sub(yz, ag::mul(mu, zbar));
  const Var a = ag::div(cov, ag::add_scalar(var, params.eps));
  const Var b = ag::sub(zbar, ag::mul(a, mu));
  if (params.full()) return {a, b};
  return {ag::box_mean(a, params.radius), ag::box_mean(b, params.radius)};
}

inline GifCoefficients gif_coefficients(const Tensor& y, const Tensor& z, const GifParams& params) {
  auto [a, b] = gif_coefficients(constant(y), constant(z), params);
  if (!params.full()) return {std::move(a->value), std::move(b->value)};
  // Report full-window coefficients at the input's resolution.
  return {resize_bilinear(a->value, y.h(), y.w()), resize_bilinear(b->value, y.h(), y.w())};
}

/// Guided 2x upsampling of z_lr using y_lr as the low-resolution guide and
/// x_hr as the high-resolution guide.
inline Var guided_upsample(const Var& x_hr, const Var& y_lr, const Var& z_lr,
                           const GifParams& params) {
  const Tensor& x = x_hr->value;
  const Tensor& y = y_lr->value;
  const Tensor& z = z_lr->value;
  if (x.c() != y.c() || x.c() != z.c() || x.n() != y.n() || x.n() != z.n()) {
    throw DataError("guided_upsample: channel/batch mismatch: x " + x.shape().str() + ", y " +
                    y.shape().str() + ", z " + z.shape().str());
  }
  if (y.shape() != z.shape()) {
    throw DataError("guided_upsample: guide " + y.shape().str() + " and input " +
                    z.shape().str() + " differ");
  }
  if (x.h() != 2 * y.h() || x.w() != 2 * y.w()) {
    throw DataError("guided_upsample: high-resolution guide " + x.shape().str() +
                    " must be exactly twice the size of " + y.shape().str());
  }
  auto [a, b] = gif_coefficients(y_lr, z_lr, params);
  const Var a_hr = ag::resize_bilinear(a, x.h(), x.w());
  const Var b_hr = ag::resize_bilinear(b, x.h(), x.w());
  return ag::add(ag::mul(a_hr, x_hr), b_hr);
}

inline Tensor guided_upsample(const Tensor& x_hr, const Tensor& y_lr, const Tensor& z_lr,
                              const GifParams& params) {
  return guided_upsample(constant(x_hr), constant(y_lr), constant(z_lr), params)->value;
}

/// Plain same-resolution guided filter q = a_bar * guide + b_bar.
inline Tensor guided_filter(const Tensor& guide, const Tensor& input, const GifParams& params) {
  const GifCoefficients coef = gif_coefficients(guide, input, params);
  return hadamard(coef.a_bar, guide) + coef.b_bar;
}

}  // namespace gunet
