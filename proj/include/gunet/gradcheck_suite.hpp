#pragma once

// The full central-difference gradient suite: every differentiable op, the
// guided upsampling layer and a tiny network of each variant. Shared by the
// `gradcheck` command and the acceptance run.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gunet/autodiff.hpp"
#include "gunet/guided_filter.hpp"
#include "gunet/nn.hpp"
#include "gunet/rng.hpp"
#include "gunet/unet.hpp"

namespace gunet {

inline constexpr double kOpGradTol = 1e-5;
inline constexpr double kLayerGradTol = 1e-3;

struct GradSuiteEntry {
  std::string module;
  double tolerance = 0;
  double worst_rel_error = 0;
  std::size_t checks = 0;
  bool passed = true;
};

namespace detail {

inline Tensor uniform_tensor(Shape s, Rng& rng, double lo = -1, double hi = 1) {
  Tensor t(s);
  for (double& v : t.storage()) v = rng.uniform(lo, hi);
  return t;
}

inline Var uniform_param(Shape s, Rng& rng, double lo = -1, double hi = 1) {
  return parameter(uniform_tensor(s, rng, lo, hi));
}

// Inner product with a fixed random tensor so that every output entry matters.
inline Var probe(const Var& v, Rng& rng) {
  return ag::sum(ag::mul(v, constant(uniform_tensor(v->value.shape(), rng))));
}

// Values closer than `gap` to zero are pushed away so kinks (ReLU, |.|) are not straddled.
inline void avoid_zero(const Var& v, double gap = 1e-3) {
  for (double& x : v->value.storage())
    if (std::abs(x) < gap) x = x < 0 ? -0.25 : 0.25;
}

}  // namespace detail

/// `trials` random shapes per module; each entry reports the worst relative error.
inline std::vector<GradSuiteEntry> run_gradcheck_suite(std::uint64_t seed = 0, std::size_t trials = 5) {
  Rng rng(seed);
  std::vector<GradSuiteEntry> out;
  using detail::probe;
  using detail::uniform_param;

  auto run = [&](const std::string& module, double tol, const std::function<GradCheckReport(Rng&)>& one) {
    GradSuiteEntry e{module, tol, 0, 0, true};
    for (std::size_t t = 0; t < trials; ++t) {
      const GradCheckReport r = one(rng);
      e.worst_rel_error = std::max(e.worst_rel_error, r.max_rel_error);
      e.passed = e.passed && r.passed;
      ++e.checks;
    }
    out.push_back(e);
  };
  auto shape = [](Rng& r, std::size_t min_hw = 3) {
    return Shape{1 + r.below(2), 1 + r.below(3), min_hw + r.below(4), min_hw + r.below(4)};
  };

  run("conv2d", kOpGradTol, [&](Rng& r) {
    const Shape s = shape(r, 4);
    Var x = uniform_param(s, r), w = uniform_param({2, s.c, 3, 3}, r), b = uniform_param({1, 2, 1, 1}, r);
    const std::size_t stride = 1 + r.below(2);
    Tensor p = detail::uniform_tensor(conv2d(x->value, w->value, {}, stride, 1).shape(), r);
    return gradient_check([&] { return ag::sum(ag::mul(ag::conv2d(x, w, b, stride, 1), constant(p))); }, {x, w, b},
                          kOpGradTol, r);
  });
  run("transposed_conv2d", kOpGradTol, [&](Rng& r) {
    const Shape s = shape(r);
    Var x = uniform_param(s, r), w = uniform_param({s.c, 2, 4, 4}, r), b = uniform_param({1, 2, 1, 1}, r);
    Tensor p = detail::uniform_tensor(transposed_conv2d(x->value, w->value, {}, 2, 1).shape(), r);
    return gradient_check([&] { return ag::sum(ag::mul(ag::transposed_conv2d(x, w, b, 2, 1), constant(p))); },
                          {x, w, b}, kOpGradTol, r);
  });
  run("box_mean", kOpGradTol, [&](Rng& r) {
    Var x = uniform_param(shape(r), r);
    const std::size_t radius = 1 + r.below(3);
    Tensor p = detail::uniform_tensor(x->value.shape(), r);
    return gradient_check([&] { return ag::sum(ag::mul(ag::box_mean(x, radius), constant(p))); }, {x}, kOpGradTol, r);
  });
  run("resize_nearest", kOpGradTol, [&](Rng& r) {
    Var x = uniform_param(shape(r), r);
    Tensor p = detail::uniform_tensor(resize_nearest(x->value).shape(), r);
    return gradient_check([&] { return ag::sum(ag::mul(ag::resize_nearest(x), constant(p))); }, {x}, kOpGradTol, r);
  });
  run("resize_bilinear", kOpGradTol, [&](Rng& r) {
    Var x = uniform_param(shape(r), r);
    const std::size_t oh = 1 + r.below(9), ow = 1 + r.below(9);
    Tensor p = detail::uniform_tensor({x->value.n(), x->value.c(), oh, ow}, r);
    return gradient_check([&] { return ag::sum(ag::mul(ag::resize_bilinear(x, oh, ow), constant(p))); }, {x},
                          kOpGradTol, r);
  });
  run("relu", kOpGradTol, [&](Rng& r) {
    Var x = uniform_param(shape(r), r);
    detail::avoid_zero(x);
    Tensor p = detail::uniform_tensor(x->value.shape(), r);
    return gradient_check([&] { return ag::sum(ag::mul(ag::relu(x), constant(p))); }, {x}, kOpGradTol, r);
  });
  run("batchnorm", kOpGradTol, [&](Rng& r) {
    const Shape s = shape(r);
    Var x = uniform_param(s, r), g = uniform_param({1, s.c, 1, 1}, r, 0.5, 1.5), b = uniform_param({1, s.c, 1, 1}, r);
    Tensor p = detail::uniform_tensor(s, r);
    return gradient_check([&] { return ag::sum(ag::mul(ag::batchnorm(x, g, b), constant(p))); }, {x, g, b},
                          kOpGradTol, r);
  });
  run("elementwise", kOpGradTol, [&](Rng& r) {
    const Shape s = shape(r);
    Var a = uniform_param(s, r), b = uniform_param(s, r, 0.5, 2.0), c = uniform_param({s.n, 2, s.h, s.w}, r);
    Tensor p = detail::uniform_tensor({s.n, s.c + 2, s.h, s.w}, r);
    Tensor pm = detail::uniform_tensor({s.n, s.c, 1, 1}, r);
    return gradient_check(
        [&] {
          Var q = ag::div(ag::sub(ag::mul(a, b), ag::scale(a, 0.5)), ag::add_scalar(b, 0.1));
          Var cat = ag::concat_channels(q, c);
          return ag::add(ag::sum(ag::mul(cat, constant(p))), ag::sum(ag::mul(ag::spatial_mean(q), constant(pm))));
        },
        {a, b, c}, kOpGradTol, r);
  });
  run("loss_l1_cosine", kOpGradTol, [&](Rng& r) {
    Var x = uniform_param({1 + r.below(2), 3, 3 + r.below(3), 3}, r);
    Tensor t = detail::uniform_tensor(x->value.shape(), r);
    for (std::size_t i = 0; i < t.size(); ++i)
      if (std::abs(x->value[i] - t[i]) < 1e-3) x->value[i] += 0.01;
    return gradient_check([&] { return loss_l1_cosine(x, t, 5.0); }, {x}, kOpGradTol, r);
  });
  run("loss_smooth_l1", kOpGradTol, [&](Rng& r) {
    Var x = uniform_param(shape(r), r, -3, 3);
    Tensor t = detail::uniform_tensor(x->value.shape(), r);
    return gradient_check([&] { return loss_smooth_l1(x, t); }, {x}, kOpGradTol, r);
  });
  run("gif_coefficients", kOpGradTol, [&](Rng& r) {
    const Shape s = shape(r, 4);
    Var y = uniform_param(s, r), z = uniform_param(s, r);
    const GifParams g = r.below(2) ? GifParams::full_window(1e-2) : GifParams::window(1 + r.below(2), 1e-2);
    const Shape cs = g.full() ? Shape{s.n, s.c, 1, 1} : s;
    Tensor pa = detail::uniform_tensor(cs, r), pb = detail::uniform_tensor(cs, r);
    return gradient_check(
        [&] {
          auto [a, b] = gif_coefficients(y, z, g);
          return ag::add(ag::sum(ag::mul(a, constant(pa))), ag::sum(ag::mul(b, constant(pb))));
        },
        {y, z}, kOpGradTol, r);
  });
  run("guided_upsample", kLayerGradTol, [&](Rng& r) {
    const std::size_t n = 1 + r.below(2), c = 1 + r.below(3), h = 3 + r.below(3), w = 3 + r.below(3);
    Var x = uniform_param({n, c, 2 * h, 2 * w}, r), y = uniform_param({n, c, h, w}, r), z = uniform_param({n, c, h, w}, r);
    const GifParams g = r.below(2) ? GifParams::full_window(1e-3) : GifParams::window(1, 1e-3);
    Tensor p = detail::uniform_tensor(x->value.shape(), r);
    return gradient_check([&] { return ag::sum(ag::mul(guided_upsample(x, y, z, g), constant(p))); }, {x, y, z},
                          kLayerGradTol, r);
  });

  for (FusionType t : {FusionType::Autoencoder, FusionType::ConcatTC, FusionType::ConcatNN, FusionType::ConcatBI,
                       FusionType::Guided}) {
    run("network/" + fusion_label(t), kLayerGradTol, [&](Rng& r) {
      NetworkSpec spec;
      spec.levels = {2, 3};
      spec.bottleneck_blocks = 1;
      spec.fusion.type = t;
      spec.seed = r.next_u64();
      Network net = build_network(spec);
      const Tensor x = detail::uniform_tensor({1, 3, 16, 16}, r, 0, 1);
      const Tensor target = detail::uniform_tensor({1, 3, 16, 16}, r, 0, 1);
      std::vector<Var> params;
      for (const auto& e : net.params().entries()) params.push_back(e.param);
      return gradient_check([&] { return loss_smooth_l1(net.forward(constant(x)), target); }, params, kLayerGradTol,
                            r, 96);
    });
  }
  return out;
}

}  // namespace gunet
