#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gunet {

// Malformed shapes, bad files and invalid arguments.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values or ill-conditioned problems.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t numel() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  bool operator==(const Shape&) const = default;

  std::string str() const {
    std::ostringstream os;
    os << "(" << n << ", " << c << ", " << h << ", " << w << ")";
    return os.str();
  }
};

// Dense (n, c, h, w) array of doubles stored row-major.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0) : shape_(shape), data_(shape.numel(), fill) {}
  Tensor(std::size_t n, std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
      : Tensor(Shape{n, c, h, w}, fill) {}
  Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.numel()) {
      throw DataError("tensor data length " + std::to_string(data_.size()) +
                      " does not match shape " + shape_.str());
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t n() const { return shape_.n; }
  std::size_t c() const { return shape_.c; }
  std::size_t h() const { return shape_.h; }
  std::size_t w() const { return shape_.w; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::size_t index(std::size_t in, std::size_t ic, std::size_t ih, std::size_t iw) const {
    return ((in * shape_.c + ic) * shape_.h + ih) * shape_.w + iw;
  }
  double& at(std::size_t in, std::size_t ic, std::size_t ih, std::size_t iw) {
    return data_[index(in, ic, ih, iw)];
  }
  double at(std::size_t in, std::size_t ic, std::size_t ih, std::size_t iw) const {
    return data_[index(in, ic, ih, iw)];
  }

  // One (h, w) slice.
  std::span<double> plane(std::size_t in, std::size_t ic) {
    return std::span<double>(data_).subspan(index(in, ic, 0, 0), shape_.plane());
  }
  std::span<const double> plane(std::size_t in, std::size_t ic) const {
    return std::span<const double>(data_).subspan(index(in, ic, 0, 0), shape_.plane());
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  double sum() const {
    double s = 0.0;
    for (double v : data_) s += v;
    return s;
  }

  Tensor& operator+=(const Tensor& o) {
    require_same(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Tensor& operator-=(const Tensor& o) {
    require_same(o, "-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Tensor& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
  friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
  friend Tensor operator*(Tensor a, double s) { return a *= s; }
  friend Tensor operator*(double s, Tensor a) { return a *= s; }

  void require_same(const Tensor& o, const char* what) const {
    if (o.shape_ != shape_) {
      throw DataError(std::string(what) + ": shape mismatch " + shape_.str() + " vs " +
                      o.shape_.str());
    }
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

inline Tensor hadamard(const Tensor& a, const Tensor& b) {
  a.require_same(b, "hadamard");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  a.require_same(b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Complex 2-D spectrum with split real/imaginary storage.
struct ComplexPlane {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<double> re;
  std::vector<double> im;

  ComplexPlane() = default;
  ComplexPlane(std::size_t rows, std::size_t cols)
      : h(rows), w(cols), re(rows * cols, 0.0), im(rows * cols, 0.0) {}

  double magnitude(std::size_t r, std::size_t c) const {
    return std::hypot(re[r * w + c], im[r * w + c]);
  }
};

// Real 2-D plane, used for magnitude spectra.
struct Plane {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<double> values;

  Plane() = default;
  Plane(std::size_t rows, std::size_t cols, double fill = 0.0)
      : h(rows), w(cols), values(rows * cols, fill) {}

  double& at(std::size_t r, std::size_t c) { return values[r * w + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * w + c]; }
  std::size_t size() const { return values.size(); }
};

inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) {
    throw DataError("concat_channels: incompatible shapes " + a.shape().str() + " and " +
                    b.shape().str());
  }
  Tensor out(a.n(), a.c() + b.c(), a.h(), a.w());
  const std::size_t p = a.shape().plane();
  for (std::size_t n = 0; n < a.n(); ++n) {
    std::copy_n(a.plane(n, 0).data(), a.c() * p, out.plane(n, 0).data());
    std::copy_n(b.plane(n, 0).data(), b.c() * p, out.plane(n, a.c()).data());
  }
  return out;
}

// Channels [begin, begin + count) of every batch item.
inline Tensor slice_channels(const Tensor& t, std::size_t begin, std::size_t count) {
  if (begin + count > t.c()) throw DataError("slice_channels: range exceeds channel count");
  Tensor out(t.n(), count, t.h(), t.w());
  const std::size_t p = t.shape().plane();
  for (std::size_t n = 0; n < t.n(); ++n) {
    std::copy_n(t.plane(n, begin).data(), count * p, out.plane(n, 0).data());
  }
  return out;
}

}  // namespace gunet
