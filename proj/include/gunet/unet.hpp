#pragma once

// Recursive encoder/decoder networks: the plain autoencoder, three concatenating
// UNets (transposed-convolution, nearest and bilinear resize-convolution
// upsampling) and the guided-upsampling GUNet.
//
// One level of width c at resolution R, followed by its child at R/2:
//
//   x = PreSkip(in)                 1x1 conv, in -> c                   (R)
//   y = Down(x)                     BN-ReLU-3x3 conv stride 2, c -> c   (R/2)
//   d = PostDown(y)                 BN-ReLU-3x3 conv, c -> c_next       (R/2)
//   z = Project(child(d))           1x1 conv, c_next -> c               (R/2)
//   f = Fuse(x, y, z)               see FusionType                      (R)
//   out = PostFuse(f)               1x1 conv, c -> c_out                (R)
//
// The innermost child is a stack of pre-activation residual blocks at the last
// level width. The outermost PostFuse is the linear output head.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gunet/autodiff.hpp"
#include "gunet/guided_filter.hpp"
#include "gunet/nn.hpp"
#include "gunet/rng.hpp"
#include "gunet/tensor.hpp"

namespace gunet {

using ag::BatchNormState;
using ag::NormStats;

enum class FusionType { Autoencoder, ConcatTC, ConcatNN, ConcatBI, Guided };

struct FusionKind {
  FusionType type = FusionType::Guided;
  GifParams gif{};  // used by FusionType::Guided only

  static FusionKind autoencoder() { return {FusionType::Autoencoder, {}}; }
  static FusionKind concat_tc() { return {FusionType::ConcatTC, {}}; }
  static FusionKind concat_nn() { return {FusionType::ConcatNN, {}}; }
  static FusionKind concat_bi() { return {FusionType::ConcatBI, {}}; }
  static FusionKind guided(GifParams p = {}) { return {FusionType::Guided, p}; }
};

inline std::string fusion_label(FusionType t) {
  switch (t) {
    case FusionType::Autoencoder: return "ae";
    case FusionType::ConcatTC: return "tc";
    case FusionType::ConcatNN: return "nn";
    case FusionType::ConcatBI: return "bi";
    case FusionType::Guided: return "gunet";
  }
  return "?";
}

inline std::string fusion_display_name(FusionType t) {
  switch (t) {
    case FusionType::Autoencoder: return "Autoencoder";
    case FusionType::ConcatTC: return "TC-UNet";
    case FusionType::ConcatNN: return "NN-UNet";
    case FusionType::ConcatBI: return "BI-UNet";
    case FusionType::Guided: return "GUNet";
  }
  return "?";
}

inline FusionType parse_fusion(const std::string& label) {
  if (label == "ae") return FusionType::Autoencoder;
  if (label == "tc") return FusionType::ConcatTC;
  if (label == "nn") return FusionType::ConcatNN;
  if (label == "bi") return FusionType::ConcatBI;
  if (label == "gunet") return FusionType::Guided;
  throw DataError("unknown architecture '" + label + "' (expected tc, nn, bi, gunet or ae)");
}

struct NetworkSpec {
  std::vector<std::size_t> levels{16, 32, 64, 128};
  FusionKind fusion{};
  std::size_t bottleneck_blocks = 4;
  std::size_t in_channels = 3;
  std::size_t out_channels = 3;
  std::size_t conv_kernel = 3;
  std::size_t skip_kernel = 1;
  std::size_t tc_kernel = 4;
  std::uint64_t seed = 0;
  NormStats norm_stats = NormStats::Batch;
  double bn_eps = 1e-5;

  std::size_t bottleneck_width() const { return levels.back(); }
  std::size_t divisor() const { return std::size_t{1} << levels.size(); }

  void validate() const {
    if (levels.empty()) throw DataError("NetworkSpec: at least one level is required");
    for (std::size_t w : levels)
      if (w == 0) throw DataError("NetworkSpec: level widths must be positive");
    if (in_channels == 0 || out_channels == 0) throw DataError("NetworkSpec: channel counts must be positive");
    if (conv_kernel % 2 == 0) throw DataError("NetworkSpec: conv_kernel must be odd");
    if (skip_kernel % 2 == 0) throw DataError("NetworkSpec: skip_kernel must be odd");
    if (tc_kernel < 2 || tc_kernel % 2 != 0)
      throw DataError("NetworkSpec: tc_kernel must be even for stride-2 transposed convolution");
    if (fusion.type == FusionType::Guided && !(fusion.gif.eps > 0.0))
      throw DataError("NetworkSpec: guided fusion requires eps > 0");
  }
};

inline void to_json(nlohmann::json& j, const GifParams& p) {
  j = nlohmann::json{{"eps", p.eps}};
  if (p.full()) j["radius"] = "full";
  else j["radius"] = p.radius;
}

inline void from_json(const nlohmann::json& j, GifParams& p) {
  p.eps = j.value("eps", 1e-3);
  const auto& r = j.at("radius");
  if (r.is_string()) {
    if (r.get<std::string>() != "full") throw DataError("GifParams: radius must be an integer or \"full\"");
    p.radius = GifParams::kFullRadius;
  } else {
    p.radius = r.get<std::size_t>();
  }
}

inline void to_json(nlohmann::json& j, const NetworkSpec& s) {
  j = nlohmann::json{{"levels", s.levels},
                     {"fusion", fusion_label(s.fusion.type)},
                     {"bottleneck_blocks", s.bottleneck_blocks},
                     {"in_channels", s.in_channels},
                     {"out_channels", s.out_channels},
                     {"conv_kernel", s.conv_kernel},
                     {"skip_kernel", s.skip_kernel},
                     {"tc_kernel", s.tc_kernel},
                     {"seed", s.seed},
                     {"norm_stats", s.norm_stats == NormStats::Batch ? "batch" : "running"},
                     {"bn_eps", s.bn_eps}};
  if (s.fusion.type == FusionType::Guided) j["gif"] = s.fusion.gif;
}

inline void from_json(const nlohmann::json& j, NetworkSpec& s) {
  NetworkSpec d;
  s.levels = j.value("levels", d.levels);
  s.fusion.type = parse_fusion(j.value("fusion", std::string("gunet")));
  if (j.contains("gif")) s.fusion.gif = j.at("gif").get<GifParams>();
  s.bottleneck_blocks = j.value("bottleneck_blocks", d.bottleneck_blocks);
  s.in_channels = j.value("in_channels", d.in_channels);
  s.out_channels = j.value("out_channels", d.out_channels);
  s.conv_kernel = j.value("conv_kernel", d.conv_kernel);
  s.skip_kernel = j.value("skip_kernel", d.skip_kernel);
  s.tc_kernel = j.value("tc_kernel", d.tc_kernel);
  s.seed = j.value("seed", d.seed);
  const std::string stats = j.value("norm_stats", std::string("batch"));
  if (stats != "batch" && stats != "running") throw DataError("NetworkSpec: norm_stats must be batch or running");
  s.norm_stats = stats == "batch" ? NormStats::Batch : NormStats::Running;
  s.bn_eps = j.value("bn_eps", d.bn_eps);
}

// Intermediate tensors at one fusion site, recorded on request.
struct FusionTrace {
  std::size_t level = 0;
  Tensor x, y, z, fused;
};

struct ForwardOptions {
  bool update_running_stats = false;
  // Test rig: replace the child branch output z with the guide y at fusion sites.
  bool force_z_equals_y = false;
  std::vector<FusionTrace>* trace = nullptr;
};

class Network {
 public:
  Network(NetworkSpec spec, Rng& rng) : spec_(std::move(spec)) {
    spec_.validate();
    std::size_t cin = spec_.in_channels;
    for (std::size_t i = 0; i < spec_.levels.size(); ++i) {
      const std::string p = "L" + std::to_string(i) + ".";
      const std::size_t c = spec_.levels[i];
      const std::size_t next =
          i + 1 < spec_.levels.size() ? spec_.levels[i + 1] : spec_.bottleneck_width();
      const std::size_t cout = i == 0 ? spec_.out_channels : c;
      const std::size_t k = spec_.conv_kernel, s = spec_.skip_kernel;
      add_conv(p + "pre_skip", c, cin, s, rng);
      add_bn(p + "down.bn", c);
      add_conv(p + "down", c, c, k, rng);
      add_bn(p + "post_down.bn", c);
      add_conv(p + "post_down", next, c, k, rng);
      add_conv(p + "project", c, next, s, rng);
      switch (spec_.fusion.type) {
        case FusionType::Autoencoder:
          add_conv(p + "up", c, c, k, rng);
          break;
        case FusionType::ConcatTC: {
          const std::size_t t = spec_.tc_kernel;
          add_param(p + "up.w", he_init({c, c, t, t}, c * t * t, rng));
          add_param(p + "up.b", Tensor(1, c, 1, 1));
          add_conv(p + "fuse", c, 2 * c, s, rng);
          break;
        }
        case FusionType::ConcatNN:
        case FusionType::ConcatBI:
          add_conv(p + "up", c, c, k, rng);
          add_conv(p + "fuse", c, 2 * c, s, rng);
          break;
        case FusionType::Guided:
          break;
      }
      add_conv(p + "post_fuse", cout, c, s, rng);
      cin = next;
    }
    const std::size_t bw = spec_.bottleneck_width();
    for (std::size_t b = 0; b < spec_.bottleneck_blocks; ++b) {
      const std::string p = "B" + std::to_string(b) + ".";
      add_bn(p + "bn1", bw);
      add_conv(p + "conv1", bw, bw, spec_.conv_kernel, rng);
      add_bn(p + "bn2", bw);
      add_conv(p + "conv2", bw, bw, spec_.conv_kernel, rng);
    }
  }

  const NetworkSpec& spec() const { return spec_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  std::map<std::string, BatchNormState>& norm_states() { return bn_state_; }
  const std::map<std::string, BatchNormState>& norm_states() const { return bn_state_; }

  std::size_t param_count() const { return params_.scalar_count(); }

  Var forward(const Var& image, const ForwardOptions& opt = {}) {
    const Tensor& v = image->value;
    if (v.c() != spec_.in_channels) {
      throw DataError("Network::forward: expected " + std::to_string(spec_.in_channels) +
                      " input channels, got " + v.shape().str());
    }
    const std::size_t d = spec_.divisor();
    if (v.h() % d != 0 || v.w() % d != 0 || v.h() == 0 || v.w() == 0) {
      throw DataError("Network::forward: spatial size " + std::to_string(v.h()) + "x" +
                      std::to_string(v.w()) + " must be divisible by " + std::to_string(d));
    }
    return level(0, image, opt);
  }

  Tensor forward(const Tensor& image, const ForwardOptions& opt = {}) {
    NoGradGuard guard;
    return forward(constant(image), opt)->value;
  }

 private:
  void add_param(const std::string& name, Tensor t) { params_.add(name, std::move(t)); }

  void add_conv(const std::string& name, std::size_t cout, std::size_t cin, std::size_t k, Rng& rng) {
    add_param(name + ".w", he_init({cout, cin, k, k}, cin * k * k, rng));
    add_param(name + ".b", Tensor(1, cout, 1, 1));
  }

  void add_bn(const std::string& name, std::size_t c) {
    add_param(name + ".gamma", Tensor(1, c, 1, 1, 1.0));
    add_param(name + ".beta", Tensor(1, c, 1, 1, 0.0));
    bn_state_.emplace(name, BatchNormState(c));
  }

  const Var& p(const std::string& name) const { return params_.get(name); }

  Var conv(const std::string& name, const Var& x, std::size_t stride = 1) const {
    const Var& w = p(name + ".w");
    return ag::conv2d(x, w, p(name + ".b"), stride, w->value.h() / 2);
  }

  Var bn_relu(const std::string& name, const Var& x, const ForwardOptions& opt) {
    return ag::relu(ag::batchnorm(x, p(name + ".gamma"), p(name + ".beta"), spec_.bn_eps,
                                  spec_.norm_stats, &bn_state_.at(name), opt.update_running_stats));
  }

  Var bottleneck(Var h, const ForwardOptions& opt) {
    for (std::size_t b = 0; b < spec_.bottleneck_blocks; ++b) {
      const std::string pre = "B" + std::to_string(b) + ".";
      Var r = conv(pre + "conv1", bn_relu(pre + "bn1", h, opt));
      r = conv(pre + "conv2", bn_relu(pre + "bn2", r, opt));
      h = ag::add(h, r);
    }
    return h;
  }

  Var level(std::size_t i, const Var& in, const ForwardOptions& opt) {
    const std::string pre = "L" + std::to_string(i) + ".";
    const Var x = conv(pre + "pre_skip", in);
    const Var y = conv(pre + "down", bn_relu(pre + "down.bn", x, opt), 2);
    const Var d = conv(pre + "post_down", bn_relu(pre + "post_down.bn", y, opt));
    const Var child = i + 1 < spec_.levels.size() ? level(i + 1, d, opt) : bottleneck(d, opt);
    Var z = conv(pre + "project", child);
    if (opt.force_z_equals_y) z = y;

    const std::size_t H = x->value.h(), W = x->value.w();
    Var fused;
    switch (spec_.fusion.type) {
      case FusionType::Autoencoder:
        fused = conv(pre + "up", ag::resize_bilinear(z, H, W));
        break;
      case FusionType::ConcatTC: {
        const Var& w = p(pre + "up.w");
        const std::size_t pad = (w->value.h() - 2) / 2;
        const Var u = ag::transposed_conv2d(z, w, p(pre + "up.b"), 2, pad);
        fused = conv(pre + "fuse", ag::concat_channels(x, u));
        break;
      }
      case FusionType::ConcatNN:
        fused = conv(pre + "fuse", ag::concat_channels(x, conv(pre + "up", ag::resize_nearest(z))));
        break;
      case FusionType::ConcatBI:
        fused = conv(pre + "fuse",
                     ag::concat_channels(x, conv(pre + "up", ag::resize_bilinear(z, H, W))));
        break;
      case FusionType::Guided:
        fused = guided_upsample(x, y, z, spec_.fusion.gif);
        break;
    }
    if (opt.trace) opt.trace->push_back({i, x->value, y->value, z->value, fused->value});
    return conv(pre + "post_fuse", fused);
  }

  NetworkSpec spec_;
  ParamStore params_;
  std::map<std::string, BatchNormState> bn_state_;
};

inline Network build_network(const NetworkSpec& spec, Rng& rng) { return Network(spec, rng); }

inline Network build_network(const NetworkSpec& spec) {
  Rng rng(spec.seed);
  return Network(spec, rng);
}

inline std::size_t param_count(const Network& net) { return net.param_count(); }

}  // namespace gunet
