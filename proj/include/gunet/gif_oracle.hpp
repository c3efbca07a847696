#pragma once

// Reference guided-filter coefficients computed with explicit window loops.
// O(pixels * window^2); intended for tests and diagnostics only.

#include <algorithm>
#include <cstddef>

#include "gunet/guided_filter.hpp"
#include "gunet/tensor.hpp"

namespace gunet {

inline GifCoefficients gif_naive_oracle(const Tensor& y, const Tensor& z, const GifParams& params) {
  y.require_same(z, "gif_naive_oracle");
  const std::size_t H = y.h(), W = y.w();
  GifCoefficients out{Tensor(y.shape()), Tensor(y.shape())};

  for (std::size_t n = 0; n < y.n(); ++n) {
    for (std::size_t c = 0; c < y.c(); ++c) {
      if (params.full()) {
        double sy = 0, sz = 0, syz = 0, syy = 0;
        for (std::size_t i = 0; i < H; ++i)
          for (std::size_t j = 0; j < W; ++j) {
            const double a = y.at(n, c, i, j), b = z.at(n, c, i, j);
            sy += a, sz += b, syz += a * b, syy += a * a;
          }
        const double N = static_cast<double>(H * W);
        const double mu = sy / N, zbar = sz / N;
        const double a = (syz / N - mu * zbar) / (syy / N - mu * mu + params.eps);
        const double b = zbar - a * mu;
        for (std::size_t i = 0; i < H; ++i)
          for (std::size_t j = 0; j < W; ++j) {
            out.a_bar.at(n, c, i, j) = a;
            out.b_bar.at(n, c, i, j) = b;
          }
        continue;
      }

      const auto r = static_cast<std::ptrdiff_t>(params.radius);
      const auto h = static_cast<std::ptrdiff_t>(H), w = static_cast<std::ptrdiff_t>(W);
      Tensor a_k(1, 1, H, W), b_k(1, 1, H, W);
      // First pass: one regression per window centre k.
      for (std::ptrdiff_t ki = 0; ki < h; ++ki)
        for (std::ptrdiff_t kj = 0; kj < w; ++kj) {
          double sy = 0, sz = 0, syz = 0, syy = 0, N = 0;
          for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(0, ki - r); i <= std::min(h - 1, ki + r); ++i)
            for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, kj - r); j <= std::min(w - 1, kj + r); ++j) {
              const double a = y.at(n, c, i, j), b = z.at(n, c, i, j);
              sy += a, sz += b, syz += a * b, syy += a * a, N += 1;
            }
          const double mu = sy / N, zbar = sz / N;
          const double var = syy / N - mu * mu;
          const double a = (syz / N - mu * zbar) / (var + params.eps);
          a_k.at(0, 0, ki, kj) = a;
          b_k.at(0, 0, ki, kj) = zbar - a * mu;
        }
      // Second pass: average over the windows that contain each pixel.
      for (std::ptrdiff_t i = 0; i < h; ++i)
        for (std::ptrdiff_t j = 0; j < w; ++j) {
          double sa = 0, sb = 0, N = 0;
          for (std::ptrdiff_t ki = std::max<std::ptrdiff_t>(0, i - r); ki <= std::min(h - 1, i + r); ++ki)
            for (std::ptrdiff_t kj = std::max<std::ptrdiff_t>(0, j - r); kj <= std::min(w - 1, j + r); ++kj) {
              sa += a_k.at(0, 0, ki, kj);
              sb += b_k.at(0, 0, ki, kj);
              N += 1;
            }
          out.a_bar.at(n, c, i, j) = sa / N;
          out.b_bar.at(n, c, i, j) = sb / N;
        }
    }
  }
  return out;
}

}  // namespace gunet
