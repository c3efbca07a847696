#pragma once

// Direct-loop reference implementations, written independently of the
// library's optimised kernels.

#include <cmath>
#include <complex>
#include <numbers>

#include "gunet/rng.hpp"
#include "gunet/tensor.hpp"

namespace oracle {

using gunet::Tensor;

inline Tensor random_tensor(gunet::Shape s, gunet::Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(s);
  for (double& v : t.storage()) v = rng.uniform(lo, hi);
  return t;
}

inline Tensor conv2d(const Tensor& in, const Tensor& w, const std::vector<double>& bias, int stride,
                     int pad) {
  const int H = int(in.h()), W = int(in.w()), KH = int(w.h()), KW = int(w.w());
  const int OH = (H + 2 * pad - KH) / stride + 1, OW = (W + 2 * pad - KW) / stride + 1;
  Tensor out(in.n(), w.n(), OH, OW);
  for (std::size_t n = 0; n < in.n(); ++n)
    for (std::size_t oc = 0; oc < w.n(); ++oc)
      for (int oh = 0; oh < OH; ++oh)
        for (int ow = 0; ow < OW; ++ow) {
          double acc = bias.empty() ? 0.0 : bias[oc];
          for (std::size_t ic = 0; ic < in.c(); ++ic)
            for (int kh = 0; kh < KH; ++kh)
              for (int kw = 0; kw < KW; ++kw) {
                const int ih = oh * stride + kh - pad, iw = ow * stride + kw - pad;
                if (ih < 0 || iw < 0 || ih >= H || iw >= W) continue;
                acc += w.at(oc, ic, kh, kw) * in.at(n, ic, ih, iw);
              }
          out.at(n, oc, oh, ow) = acc;
        }
  return out;
}

// Every input pixel stamps its scaled kernel into an uncropped canvas; the
// padding is cropped afterwards.
inline Tensor transposed_conv2d(const Tensor& in, const Tensor& w, const std::vector<double>& bias,
                                int stride, int pad) {
  const int H = int(in.h()), W = int(in.w()), KH = int(w.h()), KW = int(w.w());
  const int FH = (H - 1) * stride + KH, FW = (W - 1) * stride + KW;
  Tensor full(in.n(), w.c(), FH, FW);
  for (std::size_t n = 0; n < in.n(); ++n)
    for (std::size_t ic = 0; ic < in.c(); ++ic)
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j)
          for (std::size_t oc = 0; oc < w.c(); ++oc)
            for (int kh = 0; kh < KH; ++kh)
              for (int kw = 0; kw < KW; ++kw)
                full.at(n, oc, i * stride + kh, j * stride + kw) += in.at(n, ic, i, j) * w.at(ic, oc, kh, kw);
  Tensor out(in.n(), w.c(), FH - 2 * pad, FW - 2 * pad);
  for (std::size_t n = 0; n < out.n(); ++n)
    for (std::size_t oc = 0; oc < out.c(); ++oc)
      for (std::size_t i = 0; i < out.h(); ++i)
        for (std::size_t j = 0; j < out.w(); ++j)
          out.at(n, oc, i, j) = full.at(n, oc, i + pad, j + pad) + (bias.empty() ? 0.0 : bias[oc]);
  return out;
}

inline Tensor box_mean(const Tensor& in, int r) {
  Tensor out(in.shape());
  const int H = int(in.h()), W = int(in.w());
  for (std::size_t n = 0; n < in.n(); ++n)
    for (std::size_t c = 0; c < in.c(); ++c)
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
          double s = 0, cnt = 0;
          for (int a = i - r; a <= i + r; ++a)
            for (int b = j - r; b <= j + r; ++b)
              if (a >= 0 && b >= 0 && a < H && b < W) s += in.at(n, c, a, b), cnt += 1;
          out.at(n, c, i, j) = s / cnt;
        }
  return out;
}

// O(N^4) definition of the forward DFT.
inline std::vector<std::complex<double>> dft2d(const Tensor& t) {
  const std::size_t H = t.h(), W = t.w();
  std::vector<std::complex<double>> out(H * W);
  for (std::size_t u = 0; u < H; ++u)
    for (std::size_t v = 0; v < W; ++v) {
      std::complex<double> acc = 0;
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          const double ang = -2.0 * std::numbers::pi *
                             (double(u * y % H) / double(H) + double(v * x % W) / double(W));
          acc += t.at(0, 0, y, x) * std::complex<double>(std::cos(ang), std::sin(ang));
        }
      out[u * W + v] = acc;
    }
  return out;
}

}  // namespace oracle
