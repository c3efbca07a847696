#pragma once

// Reverse-mode differentiation over Tensor values.
//
// A Var is a shared handle to a graph node. Operations record their parents
// and a closure that pushes the node's gradient into them; backward() walks
// the graph once in reverse topological order. Leaf gradients accumulate
// across backward() calls, interior gradients are reset at the start of each.

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "gunet/ops.hpp"
#include "gunet/tensor.hpp"

namespace gunet {

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;
  std::string name;

  bool is_leaf() const { return !backward_fn; }

  Tensor& ensure_grad() {
    if (grad.shape() != value.shape()) grad = Tensor(value.shape());
    return grad;
  }
  void zero_grad() {
    if (grad.shape() == value.shape()) grad.fill(0.0);
  }
};

inline Var constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return node;
}

inline Var parameter(Tensor value, std::string name = {}) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  node->name = std::move(name);
  node->ensure_grad();
  return node;
}

namespace detail {

inline bool& grad_disabled() {
  thread_local bool disabled = false;
  return disabled;
}

// Builds a result node; parents and the backward closure are kept only when
// some input needs a gradient.
inline Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (grad_disabled()) return node;
  bool needs = false;
  for (const auto& p : parents) needs = needs || (p && p->requires_grad);
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(fn);
  }
  return node;
}

inline void accumulate(const Var& target, const Tensor& delta) {
  if (target && target->requires_grad) target->ensure_grad() += delta;
}

}  // namespace detail

// Suspends graph recording on the current thread for inference-only passes.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_disabled()) { detail::grad_disabled() = true; }
  ~NoGradGuard() { detail::grad_disabled() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Reverse sweep from a scalar loss. Throws DataError for non-scalar losses.
inline void backward(const Var& loss) {
  if (!loss || loss->value.size() != 1) {
    throw DataError("backward: loss must be a scalar, got shape " +
                    (loss ? loss->value.shape().str() : std::string("(null)")));
  }
  if (!loss->requires_grad) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.get(), 0}};
  seen.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent && parent->requires_grad && seen.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* node : order) {
    if (!node->is_leaf()) {
      node->ensure_grad();
      node->zero_grad();
    }
  }
  loss->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (!(*it)->is_leaf()) (*it)->backward_fn(**it);
  }
}

namespace ag {

inline std::span<const double> bias_span(const Var& b) {
  return b ? b->value.data() : std::span<const double>{};
}

inline Var conv2d(const Var& x, const Var& w, const Var& b, std::size_t stride, std::size_t pad) {
  Tensor out = gunet::conv2d(x->value, w->value, bias_span(b), stride, pad);
  return detail::make_result(std::move(out), {x, w, b}, [stride, pad](Node& self) {
    const Var& x = self.parents[0];
    const Var& w = self.parents[1];
    const Var& b = self.parents[2];
    if (x->requires_grad)
      gunet::detail::scatter_accumulate(self.grad, w->value, x->ensure_grad(), stride, pad);
    if (w->requires_grad)
      gunet::detail::kernel_grad_accumulate(self.grad, x->value, w->ensure_grad(), stride, pad);
    if (b && b->requires_grad) {
      Tensor& gb = b->ensure_grad();
      for (std::size_t n = 0; n < self.grad.n(); ++n)
        for (std::size_t c = 0; c < self.grad.c(); ++c)
          for (double v : self.grad.plane(n, c)) gb[c] += v;
    }
  });
}

inline Var transposed_conv2d(const Var& x, const Var& w, const Var& b, std::size_t stride,
                             std::size_t pad) {
  Tensor out = gunet::transposed_conv2d(x->value, w->value, bias_span(b), stride, pad);
  return detail::make_result(std::move(out), {x, w, b}, [stride, pad](Node& self) {
    const Var& x = self.parents[0];
    const Var& w = self.parents[1];
    const Var& b = self.parents[2];
    // The transposed convolution is the input-adjoint of a convolution whose
    // output is x; its own adjoints are that convolution and its kernel gradient.
    if (x->requires_grad)
      gunet::detail::correlate_accumulate(self.grad, w->value, x->ensure_grad(), stride, pad);
    if (w->requires_grad)
      gunet::detail::kernel_grad_accumulate(x->value, self.grad, w->ensure_grad(), stride, pad);
    if (b && b->requires_grad) {
      Tensor& gb = b->ensure_grad();
      for (std::size_t n = 0; n < self.grad.n(); ++n)
        for (std::size_t c = 0; c < self.grad.c(); ++c)
          for (double v : self.grad.plane(n, c)) gb[c] += v;
    }
  });
}

inline Var relu(const Var& x) {
  Tensor out(x->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x->value[i] > 0.0 ? x->value[i] : 0.0;
  return detail::make_result(std::move(out), {x}, [](Node& self) {
    const Var& x = self.parents[0];
    Tensor& gx = x->ensure_grad();
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (x->value[i] > 0.0) gx[i] += self.grad[i];
  });
}

inline Var add(const Var& a, const Var& b) {
  return detail::make_result(a->value + b->value, {a, b}, [](Node& self) {
    detail::accumulate(self.parents[0], self.grad);
    detail::accumulate(self.parents[1], self.grad);
  });
}

inline Var sub(const Var& a, const Var& b) {
  return detail::make_result(a->value - b->value, {a, b}, [](Node& self) {
    detail::accumulate(self.parents[0], self.grad);
    detail::accumulate(self.parents[1], -1.0 * self.grad);
  });
}

inline Var mul(const Var& a, const Var& b) {
  return detail::make_result(hadamard(a->value, b->value), {a, b}, [](Node& self) {
    const Var& a = self.parents[0];
    const Var& b = self.parents[1];
    if (a->requires_grad) a->ensure_grad() += hadamard(self.grad, b->value);
    if (b->requires_grad) b->ensure_grad() += hadamard(self.grad, a->value);
  });
}

inline Var div(const Var& a, const Var& b) {
  a->value.require_same(b->value, "div");
  Tensor out(a->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] / b->value[i];
  return detail::make_result(std::move(out), {a, b}, [](Node& self) {
    const Var& a = self.parents[0];
    const Var& b = self.parents[1];
    if (a->requires_grad) {
      Tensor& ga = a->ensure_grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] / b->value[i];
    }
    if (b->requires_grad) {
      Tensor& gb = b->ensure_grad();
      for (std::size_t i = 0; i < gb.size(); ++i) {
        gb[i] -= self.grad[i] * self.value[i] / b->value[i];
      }
    }
  });
}

inline Var add_scalar(const Var& a, double s) {
  Tensor out = a->value;
  for (double& v : out.storage()) v += s;
  return detail::make_result(std::move(out), {a},
                             [](Node& self) { detail::accumulate(self.parents[0], self.grad); });
}

inline Var scale(const Var& a, double s) {
  return detail::make_result(a->value * s, {a}, [s](Node& self) {
    detail::accumulate(self.parents[0], self.grad * s);
  });
}

inline Var sum(const Var& a) {
  Tensor out(1, 1, 1, 1, a->value.sum());
  return detail::make_result(std::move(out), {a}, [](Node& self) {
    const Var& a = self.parents[0];
    Tensor& ga = a->ensure_grad();
    const double g = self.grad[0];
    for (double& v : ga.storage()) v += g;
  });
}

inline Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a->value.size())); }

inline Var concat_channels(const Var& a, const Var& b) {
  return detail::make_result(gunet::concat_channels(a->value, b->value), {a, b}, [](Node& self) {
    const Var& a = self.parents[0];
    const Var& b = self.parents[1];
    if (a->requires_grad) a->ensure_grad() += slice_channels(self.grad, 0, a->value.c());
    if (b->requires_grad) b->ensure_grad() += slice_channels(self.grad, a->value.c(), b->value.c());
  });
}

inline Var box_mean(const Var& x, std::size_t radius) {
  return detail::make_result(gunet::box_mean(x->value, radius), {x}, [radius](Node& self) {
    detail::accumulate(self.parents[0], box_mean_adjoint(self.grad, radius));
  });
}

// Per-(n, c) spatial mean, shape (n, c, 1, 1).
inline Var spatial_mean(const Var& x) {
  const Tensor& v = x->value;
  Tensor out(v.n(), v.c(), 1, 1);
  const double inv = 1.0 / static_cast<double>(v.shape().plane());
  for (std::size_t n = 0; n < v.n(); ++n)
    for (std::size_t c = 0; c < v.c(); ++c) {
      double s = 0.0;
      for (double e : v.plane(n, c)) s += e;
      out.at(n, c, 0, 0) = s * inv;
    }
  return detail::make_result(std::move(out), {x}, [inv](Node& self) {
    const Var& x = self.parents[0];
    Tensor& gx = x->ensure_grad();
    for (std::size_t n = 0; n < gx.n(); ++n)
      for (std::size_t c = 0; c < gx.c(); ++c) {
        const double g = self.grad.at(n, c, 0, 0) * inv;
        for (double& e : gx.plane(n, c)) e += g;
      }
  });
}

inline Var resize_nearest(const Var& x) {
  return detail::make_result(gunet::resize_nearest(x->value), {x}, [](Node& self) {
    detail::accumulate(self.parents[0], resize_nearest_adjoint(self.grad));
  });
}

inline Var resize_bilinear(const Var& x, std::size_t out_h, std::size_t out_w) {
  return detail::make_result(gunet::resize_bilinear(x->value, out_h, out_w), {x}, [](Node& self) {
    const Var& x = self.parents[0];
    detail::accumulate(x, resize_bilinear_adjoint(self.grad, x->value.h(), x->value.w()));
  });
}

enum class NormStats { Batch, Running };

struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;

  explicit BatchNormState(std::size_t channels = 0)
      : running_mean(channels, 0.0), running_var(channels, 1.0) {}
};

/// Per-channel normalisation over (n, h, w). With NormStats::Batch the current
/// input's statistics are used (and, when `state` is given and `update` is set,
/// folded into the running averages); with NormStats::Running the stored
/// averages are used as constants.
inline Var batchnorm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5,
                     NormStats stats = NormStats::Batch, BatchNormState* state = nullptr,
                     bool update = false) {
  const Tensor& v = x->value;
  const std::size_t C = v.c();
  if (gamma->value.size() != C || beta->value.size() != C) {
    throw DataError("batchnorm: affine parameters do not match " + std::to_string(C) + " channels");
  }
  const double count = static_cast<double>(v.n() * v.shape().plane());
  std::vector<double> mu(C, 0.0), inv_std(C, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    double m, var;
    if (stats == NormStats::Running) {
      if (!state) throw DataError("batchnorm: running statistics requested without state");
      m = state->running_mean[c];
      var = state->running_var[c];
    } else {
      double s = 0.0;
      for (std::size_t n = 0; n < v.n(); ++n)
        for (double e : v.plane(n, c)) s += e;
      m = s / count;
      double ss = 0.0;
      for (std::size_t n = 0; n < v.n(); ++n)
        for (double e : v.plane(n, c)) ss += (e - m) * (e - m);
      var = ss / count;
      if (state && update) {
        const double unbiased = count > 1 ? var * count / (count - 1) : var;
        state->running_mean[c] = (1 - state->momentum) * state->running_mean[c] + state->momentum * m;
        state->running_var[c] =
            (1 - state->momentum) * state->running_var[c] + state->momentum * unbiased;
      }
    }
    mu[c] = m;
    inv_std[c] = 1.0 / std::sqrt(var + eps);
  }

  Tensor xhat(v.shape());
  Tensor out(v.shape());
  for (std::size_t n = 0; n < v.n(); ++n)
    for (std::size_t c = 0; c < C; ++c) {
      auto src = v.plane(n, c);
      auto xh = xhat.plane(n, c);
      auto dst = out.plane(n, c);
      const double g = gamma->value[c], b = beta->value[c];
      for (std::size_t i = 0; i < src.size(); ++i) {
        xh[i] = (src[i] - mu[c]) * inv_std[c];
        dst[i] = g * xh[i] + b;
      }
    }

  const bool batch_stats = stats == NormStats::Batch;
  return detail::make_result(
      std::move(out), {x, gamma, beta},
      [xhat = std::move(xhat), inv_std = std::move(inv_std), count, batch_stats](Node& self) {
        const Var& x = self.parents[0];
        const Var& gamma = self.parents[1];
        const Var& beta = self.parents[2];
        const Tensor& dy = self.grad;
        const std::size_t C = dy.c();
        for (std::size_t c = 0; c < C; ++c) {
          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (std::size_t n = 0; n < dy.n(); ++n) {
            auto g = dy.plane(n, c);
            auto xh = xhat.plane(n, c);
            for (std::size_t i = 0; i < g.size(); ++i) {
              sum_dy += g[i];
              sum_dy_xhat += g[i] * xh[i];
            }
          }
          if (gamma->requires_grad) gamma->ensure_grad()[c] += sum_dy_xhat;
          if (beta->requires_grad) beta->ensure_grad()[c] += sum_dy;
          if (!x->requires_grad) continue;
          const double gm = gamma->value[c];
          Tensor& gx = x->ensure_grad();
          for (std::size_t n = 0; n < dy.n(); ++n) {
            auto g = dy.plane(n, c);
            auto xh = xhat.plane(n, c);
            auto dst = gx.plane(n, c);
            for (std::size_t i = 0; i < g.size(); ++i) {
              if (batch_stats) {
                dst[i] += gm * inv_std[c] *
                          (g[i] - sum_dy / count - xh[i] * sum_dy_xhat / count);
              } else {
                dst[i] += gm * inv_std[c] * g[i];
              }
            }
          }
        }
      });
}

}  // namespace ag
}  // namespace gunet
