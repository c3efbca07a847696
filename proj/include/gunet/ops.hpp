#pragma once

// Convolution, resampling and box-filter primitives on Tensor, together with
// the adjoint of each one (used by the autodiff layer).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "gunet/tensor.hpp"

namespace gunet {

namespace detail {

// Output positions o in [lo, hi] such that o * stride + k - pad lies in [0, extent).
inline bool valid_range(std::ptrdiff_t out_extent, std::ptrdiff_t in_extent, std::ptrdiff_t k,
                        std::ptrdiff_t stride, std::ptrdiff_t pad, std::ptrdiff_t& lo,
                        std::ptrdiff_t& hi) {
  const std::ptrdiff_t first = pad - k;
  lo = first <= 0 ? 0 : (first + stride - 1) / stride;
  const std::ptrdiff_t last = in_extent - 1 + pad - k;
  if (last < 0) return false;
  hi = std::min(out_extent - 1, last / stride);
  return lo <= hi;
}

// out[n, oc] += sum_ic w[oc, ic] (*) in[n, ic]; `out` has the conv output shape.
inline void correlate_accumulate(const Tensor& in, const Tensor& w, Tensor& out,
                                 std::size_t stride, std::size_t pad) {
  const auto H = static_cast<std::ptrdiff_t>(in.h());
  const auto W = static_cast<std::ptrdiff_t>(in.w());
  const auto OH = static_cast<std::ptrdiff_t>(out.h());
  const auto OW = static_cast<std::ptrdiff_t>(out.w());
  const auto KH = static_cast<std::ptrdiff_t>(w.h());
  const auto KW = static_cast<std::ptrdiff_t>(w.w());
  const auto s = static_cast<std::ptrdiff_t>(stride);
  const auto p = static_cast<std::ptrdiff_t>(pad);
  for (std::size_t n = 0; n < in.n(); ++n) {
    for (std::size_t oc = 0; oc < out.c(); ++oc) {
      double* o = out.plane(n, oc).data();
      for (std::size_t ic = 0; ic < in.c(); ++ic) {
        const double* x = in.plane(n, ic).data();
        const double* k = w.data().data() + w.index(oc, ic, 0, 0);
        for (std::ptrdiff_t kh = 0; kh < KH; ++kh) {
          std::ptrdiff_t oh0, oh1;
          if (!valid_range(OH, H, kh, s, p, oh0, oh1)) continue;
          for (std::ptrdiff_t kw = 0; kw < KW; ++kw) {
            std::ptrdiff_t ow0, ow1;
            if (!valid_range(OW, W, kw, s, p, ow0, ow1)) continue;
            const double wv = k[kh * KW + kw];
            for (std::ptrdiff_t oh = oh0; oh <= oh1; ++oh) {
              const double* xr = x + (oh * s + kh - p) * W + kw - p;
              double* orow = o + oh * OW;
              if (s == 1) {
                for (std::ptrdiff_t ow = ow0; ow <= ow1; ++ow) orow[ow] += wv * xr[ow];
              } else {
                for (std::ptrdiff_t ow = ow0; ow <= ow1; ++ow) orow[ow] += wv * xr[ow * s];
              }
            }
          }
        }
      }
    }
  }
}

// Adjoint of correlate_accumulate with respect to its input:
// gin[n, ic] += sum_oc w[oc, ic] stamped at stride-spaced positions of gout[n, oc].
inline void scatter_accumulate(const Tensor& gout, const Tensor& w, Tensor& gin,
                               std::size_t stride, std::size_t pad) {
  const auto H = static_cast<std::ptrdiff_t>(gin.h());
  const auto W = static_cast<std::ptrdiff_t>(gin.w());
  const auto OH = static_cast<std::ptrdiff_t>(gout.h());
  const auto OW = static_cast<std::ptrdiff_t>(gout.w());
  const auto KH = static_cast<std::ptrdiff_t>(w.h());
  const auto KW = static_cast<std::ptrdiff_t>(w.w());
  const auto s = static_cast<std::ptrdiff_t>(stride);
  const auto p = static_cast<std::ptrdiff_t>(pad);
  for (std::size_t n = 0; n < gout.n(); ++n) {
    for (std::size_t ic = 0; ic < gin.c(); ++ic) {
      double* gi = gin.plane(n, ic).data();
      for (std::size_t oc = 0; oc < gout.c(); ++oc) {
        const double* go = gout.plane(n, oc).data();
        const double* k = w.data().data() + w.index(oc, ic, 0, 0);
        for (std::ptrdiff_t kh = 0; kh < KH; ++kh) {
          std::ptrdiff_t oh0, oh1;
          if (!valid_range(OH, H, kh, s, p, oh0, oh1)) continue;
          for (std::ptrdiff_t kw = 0; kw < KW; ++kw) {
            std::ptrdiff_t ow0, ow1;
            if (!valid_range(OW, W, kw, s, p, ow0, ow1)) continue;
            const double wv = k[kh * KW + kw];
            for (std::ptrdiff_t oh = oh0; oh <= oh1; ++oh) {
              double* gr = gi + (oh * s + kh - p) * W + kw - p;
              const double* grow = go + oh * OW;
              if (s == 1) {
                for (std::ptrdiff_t ow = ow0; ow <= ow1; ++ow) gr[ow] += wv * grow[ow];
              } else {
                for (std::ptrdiff_t ow = ow0; ow <= ow1; ++ow) gr[ow * s] += wv * grow[ow];
              }
            }
          }
        }
      }
    }
  }
}

// Adjoint of correlate_accumulate with respect to the kernel.
inline void kernel_grad_accumulate(const Tensor& gout, const Tensor& in, Tensor& gw,
                                   std::size_t stride, std::size_t pad) {
  const auto H = static_cast<std::ptrdiff_t>(in.h());
  const auto W = static_cast<std::ptrdiff_t>(in.w());
  const auto OH = static_cast<std::ptrdiff_t>(gout.h());
  const auto OW = static_cast<std::ptrdiff_t>(gout.w());
  const auto KH = static_cast<std::ptrdiff_t>(gw.h());
  const auto KW = static_cast<std::ptrdiff_t>(gw.w());
  const auto s = static_cast<std::ptrdiff_t>(stride);
  const auto p = static_cast<std::ptrdiff_t>(pad);
  for (std::size_t n = 0; n < gout.n(); ++n) {
    for (std::size_t oc = 0; oc < gout.c(); ++oc) {
      const double* go = gout.plane(n, oc).data();
      for (std::size_t ic = 0; ic < in.c(); ++ic) {
        const double* x = in.plane(n, ic).data();
        double* k = gw.data().data() + gw.index(oc, ic, 0, 0);
        for (std::ptrdiff_t kh = 0; kh < KH; ++kh) {
          std::ptrdiff_t oh0, oh1;
          if (!valid_range(OH, H, kh, s, p, oh0, oh1)) continue;
          for (std::ptrdiff_t kw = 0; kw < KW; ++kw) {
            std::ptrdiff_t ow0, ow1;
            if (!valid_range(OW, W, kw, s, p, ow0, ow1)) continue;
            double acc = 0.0;
            for (std::ptrdiff_t oh = oh0; oh <= oh1; ++oh) {
              const double* xr = x + (oh * s + kh - p) * W + kw - p;
              const double* grow = go + oh * OW;
              if (s == 1) {
                for (std::ptrdiff_t ow = ow0; ow <= ow1; ++ow) acc += grow[ow] * xr[ow];
              } else {
                for (std::ptrdiff_t ow = ow0; ow <= ow1; ++ow) acc += grow[ow] * xr[ow * s];
              }
            }
            k[kh * KW + kw] += acc;
          }
        }
      }
    }
  }
}

inline void add_bias(Tensor& out, std::span<const double> bias) {
  if (bias.empty()) return;
  for (std::size_t n = 0; n < out.n(); ++n)
    for (std::size_t c = 0; c < out.c(); ++c)
      for (double& v : out.plane(n, c)) v += bias[c];
}

inline void check_bias(std::span<const double> bias, std::size_t channels, const char* op) {
  if (!bias.empty() && bias.size() != channels) {
    throw DataError(std::string(op) + ": bias length " + std::to_string(bias.size()) +
                    " does not match " + std::to_string(channels) + " output channels");
  }
}

}  // namespace detail

inline std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride,
                                   std::size_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

/// Dense cross-correlation with zero padding. `weight` is (c_out, c_in, kh, kw);
/// `bias` is empty or holds one value per output channel.
inline Tensor conv2d(const Tensor& input, const Tensor& weight, std::span<const double> bias,
                     std::size_t stride = 1, std::size_t pad = 0) {
  if (stride == 0) throw DataError("conv2d: stride must be positive");
  if (input.c() != weight.c()) {
    throw DataError("conv2d: input has " + std::to_string(input.c()) +
                    " channels but weight expects c_in = " + std::to_string(weight.c()) +
                    " (input " + input.shape().str() + ", weight " + weight.shape().str() + ")");
  }
  if (input.h() + 2 * pad < weight.h() || input.w() + 2 * pad < weight.w()) {
    throw DataError("conv2d: kernel " + weight.shape().str() + " larger than padded input " +
                    input.shape().str());
  }
  detail::check_bias(bias, weight.n(), "conv2d");
  Tensor out(input.n(), weight.n(), conv_out_extent(input.h(), weight.h(), stride, pad),
             conv_out_extent(input.w(), weight.w(), stride, pad));
  detail::add_bias(out, bias);
  detail::correlate_accumulate(input, weight, out, stride, pad);
  return out;
}

/// Gradient-of-convolution upsampling. `weight` is (c_in, c_out, kh, kw); the
/// output extent is (h - 1) * stride - 2 * pad + kh.
inline Tensor transposed_conv2d(const Tensor& input, const Tensor& weight,
                                std::span<const double> bias, std::size_t stride = 1,
                                std::size_t pad = 0) {
  if (stride == 0) throw DataError("transposed_conv2d: stride must be positive");
  if (input.c() != weight.n()) {
    throw DataError("transposed_conv2d: input has " + std::to_string(input.c()) +
                    " channels but weight expects c_in = " + std::to_string(weight.n()) +
                    " (input " + input.shape().str() + ", weight " + weight.shape().str() + ")");
  }
  if (input.h() == 0 || input.w() == 0 || (input.h() - 1) * stride + weight.h() <= 2 * pad ||
      (input.w() - 1) * stride + weight.w() <= 2 * pad) {
    throw DataError("transposed_conv2d: padding " + std::to_string(pad) +
                    " leaves no output for input " + input.shape().str());
  }
  detail::check_bias(bias, weight.c(), "transposed_conv2d");
  Tensor out(input.n(), weight.c(), (input.h() - 1) * stride - 2 * pad + weight.h(),
             (input.w() - 1) * stride - 2 * pad + weight.w());
  detail::add_bias(out, bias);
  detail::scatter_accumulate(input, weight, out, stride, pad);
  return out;
}

// Number of pixels in the clipped window [i - r, i + r] along one axis.
inline std::size_t clipped_extent(std::size_t i, std::size_t r, std::size_t extent) {
  const std::size_t lo = i >= r ? i - r : 0;
  const std::size_t hi = std::min(extent - 1, i + r);
  return hi - lo + 1;
}

namespace detail {

// Per-plane sum over the clipped (2r+1)^2 window using an integral image.
inline void box_sum_plane(std::span<const double> src, std::span<double> dst, std::size_t h,
                          std::size_t w, std::size_t r) {
  std::vector<double> integral((h + 1) * (w + 1), 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    double row = 0.0;
    for (std::size_t x = 0; x < w; ++x) {
      row += src[y * w + x];
      integral[(y + 1) * (w + 1) + x + 1] = integral[y * (w + 1) + x + 1] + row;
    }
  }
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t y0 = y >= r ? y - r : 0;
    const std::size_t y1 = std::min(h, y + r + 1);
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t x0 = x >= r ? x - r : 0;
      const std::size_t x1 = std::min(w, x + r + 1);
      dst[y * w + x] = integral[y1 * (w + 1) + x1] - integral[y0 * (w + 1) + x1] -
                       integral[y1 * (w + 1) + x0] + integral[y0 * (w + 1) + x0];
    }
  }
}

}  // namespace detail

/// Local mean over the (2r+1)^2 window clipped to the image, normalised by the
/// number of pixels actually inside the window.
inline Tensor box_mean(const Tensor& input, std::size_t radius) {
  if (radius == 0) return input;
  Tensor out(input.shape());
  const std::size_t h = input.h(), w = input.w();
  for (std::size_t n = 0; n < input.n(); ++n) {
    for (std::size_t c = 0; c < input.c(); ++c) {
      auto dst = out.plane(n, c);
      detail::box_sum_plane(input.plane(n, c), dst, h, w, radius);
      for (std::size_t y = 0; y < h; ++y) {
        const double cy = static_cast<double>(clipped_extent(y, radius, h));
        for (std::size_t x = 0; x < w; ++x) {
          dst[y * w + x] /= cy * static_cast<double>(clipped_extent(x, radius, w));
        }
      }
    }
  }
  return out;
}

/// Adjoint of box_mean: windows are symmetric, so the transpose is a box sum of
/// the upstream gradient divided by each window's count.
inline Tensor box_mean_adjoint(const Tensor& grad, std::size_t radius) {
  if (radius == 0) return grad;
  const std::size_t h = grad.h(), w = grad.w();
  Tensor scaled(grad.shape());
  for (std::size_t n = 0; n < grad.n(); ++n) {
    for (std::size_t c = 0; c < grad.c(); ++c) {
      auto src = grad.plane(n, c);
      auto dst = scaled.plane(n, c);
      for (std::size_t y = 0; y < h; ++y) {
        const double cy = static_cast<double>(clipped_extent(y, radius, h));
        for (std::size_t x = 0; x < w; ++x) {
          dst[y * w + x] = src[y * w + x] / (cy * static_cast<double>(clipped_extent(x, radius, w)));
        }
      }
    }
  }
  Tensor out(grad.shape());
  for (std::size_t n = 0; n < grad.n(); ++n)
    for (std::size_t c = 0; c < grad.c(); ++c)
      detail::box_sum_plane(scaled.plane(n, c), out.plane(n, c), h, w, radius);
  return out;
}

/// Replicates every pixel into a 2x2 block.
inline Tensor resize_nearest(const Tensor& input) {
  Tensor out(input.n(), input.c(), input.h() * 2, input.w() * 2);
  const std::size_t w = input.w(), ow = out.w();
  for (std::size_t n = 0; n < input.n(); ++n) {
    for (std::size_t c = 0; c < input.c(); ++c) {
      auto src = input.plane(n, c);
      auto dst = out.plane(n, c);
      for (std::size_t y = 0; y < out.h(); ++y)
        for (std::size_t x = 0; x < ow; ++x) dst[y * ow + x] = src[(y / 2) * w + x / 2];
    }
  }
  return out;
}

/// Adjoint of resize_nearest: sums each 2x2 block.
inline Tensor resize_nearest_adjoint(const Tensor& grad) {
  Tensor out(grad.n(), grad.c(), grad.h() / 2, grad.w() / 2);
  const std::size_t w = out.w(), gw = grad.w();
  for (std::size_t n = 0; n < grad.n(); ++n) {
    for (std::size_t c = 0; c < grad.c(); ++c) {
      auto src = grad.plane(n, c);
      auto dst = out.plane(n, c);
      for (std::size_t y = 0; y < grad.h(); ++y)
        for (std::size_t x = 0; x < gw; ++x) dst[(y / 2) * w + x / 2] += src[y * gw + x];
    }
  }
  return out;
}

namespace detail {

struct LerpTap {
  std::size_t i0;
  std::size_t i1;
  double frac;
};

// Half-pixel-centre sampling: src = (dst + 0.5) * in / out - 0.5, clamped.
inline std::vector<LerpTap> lerp_taps(std::size_t in, std::size_t out) {
  std::vector<LerpTap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t d = 0; d < out; ++d) {
    double src = (static_cast<double>(d) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto i0 = static_cast<std::size_t>(std::floor(src));
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    taps[d] = {i0, i1, src - static_cast<double>(i0)};
  }
  return taps;
}

}  // namespace detail

/// Separable bilinear resampling with half-pixel-centre alignment.
inline Tensor resize_bilinear(const Tensor& input, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw DataError("resize_bilinear: target dimensions must be > 0");
  if (input.h() == 0 || input.w() == 0) throw DataError("resize_bilinear: empty input");
  const auto ty = detail::lerp_taps(input.h(), out_h);
  const auto tx = detail::lerp_taps(input.w(), out_w);
  Tensor out(input.n(), input.c(), out_h, out_w);
  const std::size_t w = input.w();
  for (std::size_t n = 0; n < input.n(); ++n) {
    for (std::size_t c = 0; c < input.c(); ++c) {
      auto src = input.plane(n, c);
      auto dst = out.plane(n, c);
      for (std::size_t y = 0; y < out_h; ++y) {
        const auto& a = ty[y];
        const double* r0 = src.data() + a.i0 * w;
        const double* r1 = src.data() + a.i1 * w;
        for (std::size_t x = 0; x < out_w; ++x) {
          const auto& b = tx[x];
          const double top = r0[b.i0] + b.frac * (r0[b.i1] - r0[b.i0]);
          const double bot = r1[b.i0] + b.frac * (r1[b.i1] - r1[b.i0]);
          dst[y * out_w + x] = top + a.frac * (bot - top);
        }
      }
    }
  }
  return out;
}

/// Adjoint of resize_bilinear from an (out_h, out_w) gradient back to (in_h, in_w).
inline Tensor resize_bilinear_adjoint(const Tensor& grad, std::size_t in_h, std::size_t in_w) {
  const auto ty = detail::lerp_taps(in_h, grad.h());
  const auto tx = detail::lerp_taps(in_w, grad.w());
  Tensor out(grad.n(), grad.c(), in_h, in_w);
  const std::size_t gw = grad.w();
  for (std::size_t n = 0; n < grad.n(); ++n) {
    for (std::size_t c = 0; c < grad.c(); ++c) {
      auto src = grad.plane(n, c);
      auto dst = out.plane(n, c);
      for (std::size_t y = 0; y < grad.h(); ++y) {
        const auto& a = ty[y];
        for (std::size_t x = 0; x < gw; ++x) {
          const auto& b = tx[x];
          const double g = src[y * gw + x];
          dst[a.i0 * in_w + b.i0] += g * (1 - a.frac) * (1 - b.frac);
          dst[a.i0 * in_w + b.i1] += g * (1 - a.frac) * b.frac;
          dst[a.i1 * in_w + b.i0] += g * a.frac * (1 - b.frac);
          dst[a.i1 * in_w + b.i1] += g * a.frac * b.frac;
        }
      }
    }
  }
  return out;
}

/// Centre crop to (h, w).
inline Tensor center_crop(const Tensor& input, std::size_t h, std::size_t w) {
  if (h > input.h() || w > input.w()) {
    throw DataError("center_crop: target " + std::to_string(h) + "x" + std::to_string(w) +
                    " exceeds input " + input.shape().str());
  }
  const std::size_t y0 = (input.h() - h) / 2, x0 = (input.w() - w) / 2;
  Tensor out(input.n(), input.c(), h, w);
  for (std::size_t n = 0; n < input.n(); ++n)
    for (std::size_t c = 0; c < input.c(); ++c)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) out.at(n, c, y, x) = input.at(n, c, y0 + y, x0 + x);
  return out;
}

}  // namespace gunet
