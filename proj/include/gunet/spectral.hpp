#pragma once

// Fourier-domain bias analysis of freshly initialised networks.
//
// Spectra stay in raw DFT layout: DC sits in the corners and the 2-pixel
// checkerboard frequency (N/2, N/2) sits at the centre pixel.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "gunet/fft.hpp"
#include "gunet/rng.hpp"
#include "gunet/tensor.hpp"
#include "gunet/unet.hpp"

namespace gunet {

inline void require_square_pow2(std::size_t h, std::size_t w, const char* what) {
  if (h != w || !is_power_of_two(h)) {
    throw DataError(std::string(what) + ": expected a square power-of-two image, got " + std::to_string(h) +
                    "x" + std::to_string(w) + " (centre-crop upstream)");
  }
}

/// Channel-averaged |DFT| of sample n.
inline Plane spectrum_magnitude(const Tensor& image, std::size_t n = 0) {
  require_square_pow2(image.h(), image.w(), "spectrum_magnitude");
  Plane out(image.h(), image.w());
  for (std::size_t c = 0; c < image.c(); ++c) {
    const ComplexPlane f = dft2d(image, n, c);
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += std::hypot(f.re[i], f.im[i]);
  }
  for (double& v : out.values) v /= double(image.c());
  return out;
}

inline void require_same_dims(const Plane& a, const Plane& b, const char* what) {
  if (a.h != b.h || a.w != b.w) throw DataError(std::string(what) + ": planes differ in size");
}

inline double spectral_distance(const Plane& out, const Plane& in) {
  require_same_dims(out, in, "spectral_distance");
  double s = 0;
  for (std::size_t i = 0; i < out.values.size(); ++i) s += std::abs(std::log1p(out.values[i]) - std::log1p(in.values[i]));
  return s / double(out.values.size());
}

inline constexpr std::size_t kNyquistWindow = 11;

inline double nyquist_peak_ratio(const Plane& spec) {
  require_square_pow2(spec.h, spec.w, "nyquist_peak_ratio");
  if (spec.h < kNyquistWindow) throw DataError("nyquist_peak_ratio: plane smaller than the 11x11 neighbourhood");
  const std::size_t cy = spec.h / 2, cx = spec.w / 2, r = kNyquistWindow / 2;
  std::vector<double> ring;
  ring.reserve(kNyquistWindow * kNyquistWindow - 1);
  for (std::size_t y = cy - r; y <= cy + r; ++y)
    for (std::size_t x = cx - r; x <= cx + r; ++x)
      if (y != cy || x != cx) ring.push_back(spec.at(y, x));
  std::sort(ring.begin(), ring.end());
  const std::size_t m = ring.size() / 2;
  const double median = ring.size() % 2 ? ring[m] : 0.5 * (ring[m - 1] + ring[m]);
  const double centre = spec.at(cy, cx);
  if (median == 0.0) return centre == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return centre / median;
}

/// Mean magnitude per integer radius (rounded) about DC, using wrapped
/// frequencies. Length N/2; bins beyond it (the corners of frequency space) are dropped.
inline std::vector<double> radial_profile(const Plane& spec) {
  require_square_pow2(spec.h, spec.w, "radial_profile");
  const std::size_t N = spec.h, bins = N / 2;
  std::vector<double> sum(bins, 0.0);
  std::vector<std::size_t> count(bins, 0);
  for (std::size_t y = 0; y < N; ++y)
    for (std::size_t x = 0; x < N; ++x) {
      const double fy = double(std::min(y, N - y)), fx = double(std::min(x, N - x));
      const auto bin = static_cast<std::size_t>(std::lround(std::hypot(fy, fx)));
      if (bin >= bins) continue;
      sum[bin] += spec.at(y, x);
      ++count[bin];
    }
  for (std::size_t b = 0; b < bins; ++b) sum[b] = count[b] ? sum[b] / double(count[b]) : 0.0;
  return sum;
}

/// Mean of the outer quarter of the radial profile.
inline double radial_tail(const std::vector<double>& profile) {
  if (profile.empty()) throw DataError("radial_tail: empty profile");
  const std::size_t begin = profile.size() - std::max<std::size_t>(1, profile.size() / 4);
  double s = 0;
  for (std::size_t i = begin; i < profile.size(); ++i) s += profile[i];
  return s / double(profile.size() - begin);
}

/// log(1 + M) scaled to [0, 1], multiplied by 2^ev, clamped.
inline Plane visualize_spectrum(const Plane& spec, double ev = 0.0) {
  Plane out(spec.h, spec.w);
  double peak = 0;
  for (std::size_t i = 0; i < spec.values.size(); ++i) {
    out.values[i] = std::log1p(std::max(0.0, spec.values[i]));
    peak = std::max(peak, out.values[i]);
  }
  const double gain = peak > 0 ? std::exp2(ev) / peak : 0.0;
  for (double& v : out.values) v = std::clamp(v * gain, 0.0, 1.0);
  return out;
}

inline Tensor center_crop_square(const Tensor& t, std::size_t size) {
  if (t.h() < size || t.w() < size) {
    throw DataError("centre crop to " + std::to_string(size) + " needs an image at least that large, got " +
                    t.shape().str());
  }
  return center_crop(t, size, size);
}

enum class SpectrumAveraging { Magnitude, Complex };

inline std::string averaging_label(SpectrumAveraging a) { return a == SpectrumAveraging::Magnitude ? "mag" : "complex"; }

inline SpectrumAveraging parse_averaging(const std::string& s) {
  if (s == "mag") return SpectrumAveraging::Magnitude;
  if (s == "complex") return SpectrumAveraging::Complex;
  throw DataError("averaging mode must be mag or complex, got '" + s + "'");
}

// Per-channel exposure matching rescales each output channel to the mean and
// standard deviation of the corresponding input channel before its spectrum is
// taken, so spectra compare shape rather than the arbitrary gain of an
// untrained network.
enum class ExposureMatch { None, PerChannel };

inline std::string exposure_label(ExposureMatch e) { return e == ExposureMatch::None ? "none" : "channel"; }

inline ExposureMatch parse_exposure(const std::string& s) {
  if (s == "none") return ExposureMatch::None;
  if (s == "channel") return ExposureMatch::PerChannel;
  throw DataError("exposure match must be none or channel, got '" + s + "'");
}

inline Tensor match_exposure(const Tensor& out, const Tensor& ref) {
  if (out.shape() != ref.shape()) throw DataError("match_exposure: shapes differ " + out.shape().str() + " vs " + ref.shape().str());
  auto moments = [](std::span<const double> p) {
    double m = 0, v = 0;
    for (double x : p) m += x;
    m /= double(p.size());
    for (double x : p) v += (x - m) * (x - m);
    return std::pair{m, std::sqrt(v / double(p.size()))};
  };
  Tensor r = out;
  for (std::size_t n = 0; n < out.n(); ++n)
    for (std::size_t c = 0; c < out.c(); ++c) {
      const auto [mo, so] = moments(out.plane(n, c));
      const auto [mr, sr] = moments(ref.plane(n, c));
      const double gain = so > 0 ? sr / so : 0.0;
      for (double& v : r.plane(n, c)) v = (v - mo) * gain + mr;
    }
  return r;
}

struct AnalysisOptions {
  SpectrumAveraging averaging = SpectrumAveraging::Magnitude;
  ExposureMatch exposure = ExposureMatch::None;
  std::size_t size = 256;
  std::size_t threads = 0;  // 0: hardware concurrency
};

struct SpectrumStats {
  double spectral_distance = 0;
  double nyquist_peak_ratio = 0;
  std::vector<double> radial_profile;
  double radial_tail = 0;
};

inline SpectrumStats derive_stats(const Plane& out, const Plane& in) {
  SpectrumStats s;
  s.spectral_distance = spectral_distance(out, in);
  s.nyquist_peak_ratio = nyquist_peak_ratio(out);
  s.radial_profile = radial_profile(out);
  s.radial_tail = radial_tail(s.radial_profile);
  return s;
}

struct SpectrumReport {
  std::string arch;
  Plane input_spectrum;         // mean over inputs
  Plane mean_output_spectrum;   // mean over samples and inputs
  Tensor mean_output_image;     // (n_inputs, c, N, N): per-input spatial mean over samples
  std::size_t n_model_samples = 0;
  std::size_t n_inputs = 0;
  SpectrumStats stats;                     // of the aggregate spectrum
  std::vector<SpectrumStats> per_sample;   // one model sample each, averaged over inputs
  std::vector<double> input_radial_profile;
  double input_radial_tail = 0;

  double mean_sample_distance() const { return mean_of(&SpectrumStats::spectral_distance); }
  double mean_sample_nyquist() const { return mean_of(&SpectrumStats::nyquist_peak_ratio); }
  double mean_sample_tail() const { return mean_of(&SpectrumStats::radial_tail); }

 private:
  double mean_of(double SpectrumStats::*field) const {
    double s = 0;
    for (const auto& p : per_sample) s += p.*field;
    return per_sample.empty() ? 0.0 : s / double(per_sample.size());
  }
};

namespace detail {

// Everything one model sample contributes, summed over inputs.
struct SampleResult {
  Plane magnitude;                       // sum over inputs of channel-averaged |F|
  std::vector<ComplexPlane> transforms;  // per input and channel, only for complex averaging
  std::vector<Tensor> outputs;           // per input
};

inline SampleResult run_sample(const NetworkSpec& base, std::uint64_t seed, const std::vector<Tensor>& inputs,
                               const AnalysisOptions& opt) {
  NetworkSpec spec = base;
  spec.seed = seed;
  Network net = build_network(spec);
  const std::size_t N = inputs.front().h();
  SampleResult r;
  r.magnitude = Plane(N, N);
  for (const Tensor& in : inputs) {
    Tensor out = net.forward(in);
    if (!out.all_finite()) throw NumericalError("model_average_analysis: non-finite network output");
    if (opt.exposure == ExposureMatch::PerChannel) out = match_exposure(out, in);
    const Plane m = spectrum_magnitude(out);
    for (std::size_t i = 0; i < m.values.size(); ++i) r.magnitude.values[i] += m.values[i];
    if (opt.averaging == SpectrumAveraging::Complex)
      for (std::size_t c = 0; c < out.c(); ++c) r.transforms.push_back(dft2d(out, 0, c));
    r.outputs.push_back(std::move(out));
  }
  return r;
}

}  // namespace detail

/// Sample s uses build seed derive_seed(seed, s), so architectures analysed
/// with the same seed see matched sample streams. Samples run in parallel
/// waves; reductions follow sample order, so results do not depend on the
/// thread count.
inline SpectrumReport model_average_analysis(const NetworkSpec& spec, const std::vector<Tensor>& raw_inputs,
                                             std::size_t samples = 50, std::uint64_t seed = 0,
                                             const AnalysisOptions& opt = {}) {
  if (raw_inputs.empty()) throw DataError("model_average_analysis: no input images");
  if (samples == 0) throw DataError("model_average_analysis: samples must be at least 1");
  if (!is_power_of_two(opt.size) || opt.size < 32)
    throw DataError("model_average_analysis: size must be a power of two >= 32, got " + std::to_string(opt.size));
  spec.validate();
  if (opt.exposure == ExposureMatch::PerChannel && spec.in_channels != spec.out_channels)
    throw DataError("model_average_analysis: exposure matching needs equal input and output channel counts");

  std::vector<Tensor> inputs;
  for (const Tensor& t : raw_inputs) {
    if (t.n() != 1 || t.c() != spec.in_channels)
      throw DataError("model_average_analysis: expected single images with " + std::to_string(spec.in_channels) +
                      " channels, got " + t.shape().str());
    inputs.push_back(center_crop_square(t, opt.size));
  }
  const std::size_t N = opt.size, nin = inputs.size(), cout = spec.out_channels;

  SpectrumReport rep;
  rep.arch = fusion_label(spec.fusion.type);
  rep.n_model_samples = samples;
  rep.n_inputs = nin;
  rep.input_spectrum = Plane(N, N);
  for (const Tensor& in : inputs) {
    const Plane m = spectrum_magnitude(in);
    for (std::size_t i = 0; i < m.values.size(); ++i) rep.input_spectrum.values[i] += m.values[i] / double(nin);
  }
  rep.input_radial_profile = radial_profile(rep.input_spectrum);
  rep.input_radial_tail = radial_tail(rep.input_radial_profile);

  Plane mag_sum(N, N);
  std::vector<ComplexPlane> complex_sum(nin * cout, ComplexPlane(N, N));
  Tensor image_sum(nin, cout, N, N);

  std::size_t threads = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, samples);
  std::vector<detail::SampleResult> wave(threads);
  std::vector<std::exception_ptr> errors(threads);

  for (std::size_t base = 0; base < samples; base += threads) {
    const std::size_t count = std::min(threads, samples - base);
    auto job = [&](std::size_t k) {
      try {
        wave[k] = detail::run_sample(spec, Rng::derive_seed(seed, base + k), inputs, opt);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    };
    if (count == 1) {
      job(0);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t k = 0; k < count; ++k) pool.emplace_back(job, k);
      for (auto& t : pool) t.join();
    }
    for (std::size_t k = 0; k < count; ++k)
      if (errors[k]) std::rethrow_exception(errors[k]);

    for (std::size_t k = 0; k < count; ++k) {
      detail::SampleResult& r = wave[k];
      Plane per(N, N);
      for (std::size_t i = 0; i < per.values.size(); ++i) {
        per.values[i] = r.magnitude.values[i] / double(nin);
        mag_sum.values[i] += r.magnitude.values[i];
      }
      rep.per_sample.push_back(derive_stats(per, rep.input_spectrum));
      for (std::size_t j = 0; j < r.transforms.size(); ++j)
        for (std::size_t i = 0; i < N * N; ++i) {
          complex_sum[j].re[i] += r.transforms[j].re[i];
          complex_sum[j].im[i] += r.transforms[j].im[i];
        }
      for (std::size_t j = 0; j < nin; ++j)
        for (std::size_t c = 0; c < cout; ++c) {
          auto dst = image_sum.plane(j, c);
          auto src = r.outputs[j].plane(0, c);
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
      r = {};
    }
  }

  rep.mean_output_spectrum = Plane(N, N);
  if (opt.averaging == SpectrumAveraging::Magnitude) {
    for (std::size_t i = 0; i < N * N; ++i) rep.mean_output_spectrum.values[i] = mag_sum.values[i] / double(samples * nin);
  } else {
    const double norm = 1.0 / (double(samples) * double(nin) * double(cout));
    for (const ComplexPlane& f : complex_sum)
      for (std::size_t i = 0; i < N * N; ++i) rep.mean_output_spectrum.values[i] += std::hypot(f.re[i], f.im[i]) * norm;
  }
  image_sum *= 1.0 / double(samples);
  rep.mean_output_image = std::move(image_sum);
  rep.stats = derive_stats(rep.mean_output_spectrum, rep.input_spectrum);
  for (const SpectrumStats& s : rep.per_sample)
    if (!std::isfinite(s.spectral_distance) || !std::isfinite(s.nyquist_peak_ratio))
      throw NumericalError("model_average_analysis: non-finite spectral statistics");
  return rep;
}

}  // namespace gunet
