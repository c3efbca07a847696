#pragma once

// Parameter initialisation, parameter storage with Adam, and losses.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "gunet/autodiff.hpp"
#include "gunet/rng.hpp"
#include "gunet/tensor.hpp"

namespace gunet {

/// I.i.d. N(0, 2 / fan_in) samples (He et al. initialisation for ReLU nets).
inline Tensor he_init(Shape shape, std::size_t fan_in, Rng& rng) {
  if (fan_in == 0) throw DataError("he_init: fan_in must be positive");
  const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
  Tensor t(shape);
  for (double& v : t.storage()) v = std_dev * rng.normal();
  return t;
}

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Named parameters in registration order, with per-parameter Adam moments.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Var param;
    Tensor m;
    Tensor v;
    std::size_t t = 0;
  };

  Var add(const std::string& name, Tensor init) {
    if (index_.count(name)) throw DataError("ParamStore: duplicate parameter name '" + name + "'");
    index_[name] = entries_.size();
    Entry e{name, parameter(std::move(init), name), {}, {}, 0};
    e.m = Tensor(e.param->value.shape());
    e.v = Tensor(e.param->value.shape());
    entries_.push_back(std::move(e));
    return entries_.back().param;
  }

  const Var& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw DataError("ParamStore: no parameter named '" + name + "'");
    return entries_[it->second].param;
  }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::size_t scalar_count() const {
    std::size_t total = 0;
    for (const auto& e : entries_) total += e.param->value.size();
    return total;
  }

  void zero_grad() {
    for (auto& e : entries_) e.param->ensure_grad().fill(0.0);
  }

  /// Bias-corrected Adam update followed by zeroing of the gradients.
  void adam_step(const AdamConfig& cfg) {
    for (auto& e : entries_) {
      Tensor& p = e.param->value;
      const Tensor& g = e.param->ensure_grad();
      ++e.t;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(e.t));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(e.t));
      for (std::size_t i = 0; i < p.size(); ++i) {
        e.m[i] = cfg.beta1 * e.m[i] + (1.0 - cfg.beta1) * g[i];
        e.v[i] = cfg.beta2 * e.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        const double mhat = e.m[i] / c1;
        const double vhat = e.v[i] / c2;
        p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
      }
    }
    zero_grad();
  }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

inline constexpr double kCosineNormFloor = 1e-12;

/// mean |pred - target| + lambda * mean over pixels of (1 - cos(pred_px, target_px)),
/// where pixel vectors run over channels. Pixels where either vector has norm
/// below 1e-12 add nothing to the cosine term.
inline Var loss_l1_cosine(const Var& pred, const Tensor& target, double lambda = 5.0) {
  const Tensor& p = pred->value;
  p.require_same(target, "loss_l1_cosine");
  const std::size_t N = p.n(), C = p.c(), HW = p.shape().plane();
  const double numel = static_cast<double>(p.size());
  const double pixels = static_cast<double>(N * HW);

  double l1 = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) l1 += std::abs(p[i] - target[i]);

  double cos_term = 0.0;
  std::vector<double> pn(N * HW), tn(N * HW), cosv(N * HW);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t i = 0; i < HW; ++i) {
      double dot = 0.0, pp = 0.0, tt = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        const double a = p.plane(n, c)[i], b = target.plane(n, c)[i];
        dot += a * b;
        pp += a * a;
        tt += b * b;
      }
      const std::size_t k = n * HW + i;
      pn[k] = std::sqrt(pp);
      tn[k] = std::sqrt(tt);
      if (pn[k] < kCosineNormFloor || tn[k] < kCosineNormFloor) {
        cosv[k] = 1.0;
        continue;
      }
      cosv[k] = dot / (pn[k] * tn[k]);
      cos_term += 1.0 - cosv[k];
    }

  Tensor out(1, 1, 1, 1, l1 / numel + lambda * cos_term / pixels);
  return detail::make_result(
      std::move(out), {pred},
      [target, lambda, numel, pixels, pn = std::move(pn), tn = std::move(tn),
       cosv = std::move(cosv)](Node& self) {
        const Var& pred = self.parents[0];
        const Tensor& p = pred->value;
        Tensor& gp = pred->ensure_grad();
        const double g = self.grad[0];
        const std::size_t N = p.n(), C = p.c(), HW = p.shape().plane();
        for (std::size_t i = 0; i < p.size(); ++i) {
          const double d = p[i] - target[i];
          if (d != 0.0) gp[i] += g * (d > 0 ? 1.0 : -1.0) / numel;
        }
        for (std::size_t n = 0; n < N; ++n)
          for (std::size_t i = 0; i < HW; ++i) {
            const std::size_t k = n * HW + i;
            if (pn[k] < kCosineNormFloor || tn[k] < kCosineNormFloor) continue;
            for (std::size_t c = 0; c < C; ++c) {
              const double a = p.plane(n, c)[i], b = target.plane(n, c)[i];
              const double dcos = b / (pn[k] * tn[k]) - cosv[k] * a / (pn[k] * pn[k]);
              gp.plane(n, c)[i] -= g * lambda * dcos / pixels;
            }
          }
      });
}

/// Mean Huber loss with its transition at |d| = 1.
inline Var loss_smooth_l1(const Var& pred, const Tensor& target) {
  const Tensor& p = pred->value;
  p.require_same(target, "loss_smooth_l1");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = std::abs(p[i] - target[i]);
    total += d < 1.0 ? 0.5 * d * d : d - 0.5;
  }
  const double numel = static_cast<double>(p.size());
  return detail::make_result(Tensor(1, 1, 1, 1, total / numel), {pred},
                             [target, numel](Node& self) {
                               const Var& pred = self.parents[0];
                               Tensor& gp = pred->ensure_grad();
                               const double g = self.grad[0] / numel;
                               for (std::size_t i = 0; i < gp.size(); ++i) {
                                 const double d = pred->value[i] - target[i];
                                 gp[i] += g * std::clamp(d, -1.0, 1.0);
                               }
                             });
}

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t coords_checked = 0;
  bool passed = false;
};

/// Central-difference check of d fn / d inputs. `fn` must rebuild the graph from
/// the current values of `inputs`; at least `min_coords` coordinates (or all of
/// them, if fewer) are sampled. Relative error is measured against the larger
/// of the two derivative estimates, floored at 1e-3 of the largest analytic
/// gradient seen so tiny components do not dominate.
template <typename Fn>
GradCheckReport gradient_check(Fn&& fn, const std::vector<Var>& inputs, double tol, Rng& rng,
                               std::size_t min_coords = 64, double step = 1e-5) {
  for (const auto& in : inputs) {
    in->requires_grad = true;
    in->ensure_grad().fill(0.0);
  }
  Var loss = fn();
  backward(loss);

  std::size_t total = 0;
  for (const auto& in : inputs) total += in->value.size();
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  if (total <= min_coords) {
    for (std::size_t k = 0; k < inputs.size(); ++k)
      for (std::size_t i = 0; i < inputs[k]->value.size(); ++i) coords.emplace_back(k, i);
  } else {
    // Spread samples over every input, then fill the rest uniformly.
    for (std::size_t k = 0; k < inputs.size(); ++k)
      coords.emplace_back(k, rng.below(inputs[k]->value.size()));
    while (coords.size() < min_coords) {
      std::uint64_t flat = rng.below(total);
      std::size_t k = 0;
      while (flat >= inputs[k]->value.size()) flat -= inputs[k]->value.size(), ++k;
      coords.emplace_back(k, static_cast<std::size_t>(flat));
    }
  }

  std::vector<double> analytic, numeric;
  for (auto [k, i] : coords) {
    analytic.push_back(inputs[k]->grad[i]);
    double& x = inputs[k]->value[i];
    const double orig = x;
    x = orig + step;
    const double fp = fn()->value[0];
    x = orig - step;
    const double fm = fn()->value[0];
    x = orig;
    numeric.push_back((fp - fm) / (2.0 * step));
  }

  double scale = 0.0;
  for (double a : analytic) scale = std::max(scale, std::abs(a));
  GradCheckReport report;
  report.coords_checked = coords.size();
  for (std::size_t j = 0; j < analytic.size(); ++j) {
    const double err = std::abs(analytic[j] - numeric[j]);
    const double denom =
        std::max({std::abs(analytic[j]), std::abs(numeric[j]), 1e-3 * scale, 1e-12});
    report.max_abs_error = std::max(report.max_abs_error, err);
    report.max_rel_error = std::max(report.max_rel_error, err / denom);
  }
  report.passed = report.max_rel_error <= tol;
  return report;
}

}  // namespace gunet
