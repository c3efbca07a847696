#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "gunet/tensor.hpp"

namespace gunet {

inline bool is_power_of_two(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

namespace detail {

// In-place iterative radix-2 forward transform (e^{-2 pi i k n / N} kernel).
class Radix2 {
 public:
  explicit Radix2(std::size_t n) : n_(n), twiddle_(n / 2), rev_(n) {
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twiddle_[k] = {std::cos(angle), std::sin(angle)};
    }
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b)
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
      rev_[i] = r;
    }
  }

  void operator()(std::span<std::complex<double>> a) const {
    for (std::size_t i = 0; i < n_; ++i)
      if (i < rev_[i]) std::swap(a[i], a[rev_[i]]);
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t step = n_ / len;
      for (std::size_t start = 0; start < n_; start += len) {
        for (std::size_t j = 0; j < half; ++j) {
          const std::complex<double> t = twiddle_[j * step] * a[start + j + half];
          a[start + j + half] = a[start + j] - t;
          a[start + j] += t;
        }
      }
    }
  }

 private:
  std::size_t n_;
  std::vector<std::complex<double>> twiddle_;
  std::vector<std::size_t> rev_;
};

}  // namespace detail

/// Unnormalised forward 2-D DFT of a real h x w plane (row-column radix-2).
inline ComplexPlane dft2d(std::span<const double> plane, std::size_t h, std::size_t w) {
  if (!is_power_of_two(h) || !is_power_of_two(w)) {
    throw DataError("dft2d: plane is " + std::to_string(h) + "x" + std::to_string(w) +
                    "; both dimensions must be powers of two (centre-crop or pad the image first)");
  }
  if (plane.size() != h * w) throw DataError("dft2d: plane length does not match dimensions");
  std::vector<std::complex<double>> buf(h * w);
  for (std::size_t i = 0; i < h * w; ++i) buf[i] = plane[i];

  const detail::Radix2 row_fft(w);
  for (std::size_t r = 0; r < h; ++r) row_fft(std::span(buf).subspan(r * w, w));

  const detail::Radix2 col_fft(h);
  std::vector<std::complex<double>> col(h);
  for (std::size_t c = 0; c < w; ++c) {
    for (std::size_t r = 0; r < h; ++r) col[r] = buf[r * w + c];
    col_fft(col);
    for (std::size_t r = 0; r < h; ++r) buf[r * w + c] = col[r];
  }

  ComplexPlane out(h, w);
  for (std::size_t i = 0; i < h * w; ++i) {
    out.re[i] = buf[i].real();
    out.im[i] = buf[i].imag();
  }
  return out;
}

inline ComplexPlane dft2d(const Tensor& t, std::size_t n = 0, std::size_t c = 0) {
  return dft2d(t.plane(n, c), t.h(), t.w());
}

}  // namespace gunet
