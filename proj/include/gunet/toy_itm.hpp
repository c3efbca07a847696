#pragma once

// Toy inverse tone mapping: synthetic HDR scenes, their tone-mapped LDR
// versions, a training loop and resumable checkpoints.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gunet/nn.hpp"
#include "gunet/rng.hpp"
#include "gunet/tensor.hpp"
#include "gunet/unet.hpp"

namespace gunet {

struct ToyItmSample {
  Tensor hdr;  // (1, 3, s, s), linear light, >= 0
  Tensor ldr;  // clip(gain * hdr^(1/gamma), 0, 1)
  double gamma = 2.2;
  double gain = 1.0;
};

struct ToyDatasetConfig {
  double gamma_lo = 1.8, gamma_hi = 2.4;
  double gain_lo = 0.5, gain_hi = 2.0;
  double emitter_max = 32.0;  // peak emitter radiance relative to the diffuse range [0, 1]
};

inline Tensor tone_map(const Tensor& hdr, double gamma, double gain) {
  Tensor ldr = hdr;
  for (double& v : ldr.storage()) v = std::clamp(gain * std::pow(std::max(v, 0.0), 1.0 / gamma), 0.0, 1.0);
  return ldr;
}

inline ToyItmSample make_toy_sample(Rng& rng, std::size_t size, const ToyDatasetConfig& cfg = {}) {
  const double S = double(size);
  Tensor hdr(1, 3, size, size);

  // Diffuse base: a coloured linear gradient.
  double base[3], gx[3], gy[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = rng.uniform(0.05, 0.5);
    gx[c] = rng.uniform(-0.3, 0.3);
    gy[c] = rng.uniform(-0.3, 0.3);
  }
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t x = 0; x < size; ++x)
        hdr.at(0, c, y, x) = std::clamp(base[c] + gx[c] * (x / S - 0.5) + gy[c] * (y / S - 0.5), 0.0, 1.0);

  struct Disc {
    double cx, cy, r, rgb[3];
  };
  auto paint = [&](const Disc& d, bool additive) {
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t x = 0; x < size; ++x) {
        const double dist = std::hypot(x + 0.5 - d.cx, y + 0.5 - d.cy);
        const double cover = std::clamp(d.r - dist + 0.5, 0.0, 1.0);  // one-pixel antialiased rim
        if (cover <= 0) continue;
        for (std::size_t c = 0; c < 3; ++c) {
          double& v = hdr.at(0, c, y, x);
          v = additive ? v + cover * d.rgb[c] : (1 - cover) * v + cover * d.rgb[c];
        }
      }
  };

  const std::size_t discs = 1 + rng.below(3);
  for (std::size_t i = 0; i < discs; ++i) {
    Disc d{rng.uniform(0, S), rng.uniform(0, S), rng.uniform(0.08, 0.25) * S, {}};
    for (double& v : d.rgb) v = rng.uniform(0.0, 1.0);
    paint(d, false);
  }
  const std::size_t emitters = 1 + rng.below(3);
  for (std::size_t i = 0; i < emitters; ++i) {
    const double peak = std::exp(rng.uniform(std::log(2.0), std::log(cfg.emitter_max)));
    Disc d{rng.uniform(0, S), rng.uniform(0, S), rng.uniform(0.02, 0.07) * S, {}};
    const double tint = rng.uniform(0.6, 1.0);
    for (double& v : d.rgb) v = peak * rng.uniform(tint, 1.0);
    paint(d, true);
  }

  ToyItmSample s;
  s.gamma = rng.uniform(cfg.gamma_lo, cfg.gamma_hi);
  s.gain = rng.uniform(cfg.gain_lo, cfg.gain_hi);
  s.ldr = tone_map(hdr, s.gamma, s.gain);
  s.hdr = std::move(hdr);
  return s;
}

/// Sample i is drawn from its own stream, so datasets of different lengths share prefixes.
inline std::vector<ToyItmSample> make_toy_dataset(std::uint64_t seed, std::size_t count, std::size_t size = 64,
                                                  const ToyDatasetConfig& cfg = {}) {
  if (count == 0 || size == 0) throw DataError("make_toy_dataset: count and size must be positive");
  std::vector<ToyItmSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(Rng::derive_seed(seed, i));
    out.push_back(make_toy_sample(rng, size, cfg));
  }
  return out;
}

inline std::vector<ToyItmSample> make_toy_dataset(Rng& rng, std::size_t count, std::size_t size = 64,
                                                  const ToyDatasetConfig& cfg = {}) {
  return make_toy_dataset(rng.next_u64(), count, size, cfg);
}

enum class TrainLoss { L1Cosine, SmoothL1 };

inline std::string loss_label(TrainLoss l) { return l == TrainLoss::L1Cosine ? "l1_cosine" : "smooth_l1"; }

inline TrainLoss parse_loss(const std::string& s) {
  if (s == "l1_cosine") return TrainLoss::L1Cosine;
  if (s == "smooth_l1") return TrainLoss::SmoothL1;
  throw DataError("loss must be l1_cosine or smooth_l1, got '" + s + "'");
}

struct TrainConfig {
  AdamConfig adam{};
  std::size_t batch = 4;
  std::size_t iters = 500;
  TrainLoss loss = TrainLoss::L1Cosine;
  double lambda = 5.0;
  std::uint64_t seed = 0;  // batch selection stream
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"lr", c.adam.lr},       {"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"adam_eps", c.adam.eps},
       {"batch", c.batch},      {"iters", c.iters},      {"loss", loss_label(c.loss)},
       {"lambda", c.lambda},    {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.adam.lr = j.value("lr", d.adam.lr);
  c.adam.beta1 = j.value("beta1", d.adam.beta1);
  c.adam.beta2 = j.value("beta2", d.adam.beta2);
  c.adam.eps = j.value("adam_eps", d.adam.eps);
  c.batch = j.value("batch", d.batch);
  c.iters = j.value("iters", d.iters);
  c.loss = parse_loss(j.value("loss", loss_label(d.loss)));
  c.lambda = j.value("lambda", d.lambda);
  c.seed = j.value("seed", d.seed);
}

/// Sorted distinct dataset indices for one iteration, a function of (seed, iteration) only.
inline std::vector<std::size_t> batch_indices(std::uint64_t seed, std::size_t iteration, std::size_t dataset_size,
                                              std::size_t batch) {
  if (batch == 0 || batch > dataset_size)
    throw DataError("batch size " + std::to_string(batch) + " must be in [1, dataset size " +
                    std::to_string(dataset_size) + "]");
  Rng rng(Rng::derive_seed(seed, iteration));
  std::vector<std::size_t> idx(dataset_size);
  for (std::size_t i = 0; i < dataset_size; ++i) idx[i] = i;
  for (std::size_t i = 0; i < batch; ++i) std::swap(idx[i], idx[i + rng.below(dataset_size - i)]);
  idx.resize(batch);
  std::sort(idx.begin(), idx.end());
  return idx;
}

namespace detail {

inline Tensor stack(const std::vector<ToyItmSample>& data, const std::vector<std::size_t>& idx,
                    Tensor ToyItmSample::*field) {
  const Tensor& first = data[idx.front()].*field;
  Tensor out(idx.size(), first.c(), first.h(), first.w());
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const Tensor& t = data[idx[b]].*field;
    if (t.shape() != first.shape()) throw DataError("training batch mixes image sizes");
    std::copy(t.storage().begin(), t.storage().end(), out.storage().begin() + std::ptrdiff_t(b * t.size()));
  }
  return out;
}

}  // namespace detail

struct TrainState {
  std::size_t iteration = 0;  // iterations completed
  std::vector<double> losses;
};

/// Runs iterations [state.iteration, state.iteration + iters). `on_step` sees each loss.
inline void train_toy(Network& net, const std::vector<ToyItmSample>& data, const TrainConfig& cfg,
                      TrainState& state, std::size_t iters,
                      const std::function<void(std::size_t, double)>& on_step = {}) {
  if (data.empty()) throw DataError("train_toy: empty dataset");
  for (std::size_t k = 0; k < iters; ++k) {
    const std::size_t it = state.iteration;
    const auto idx = batch_indices(cfg.seed, it, data.size(), cfg.batch);
    const Tensor ldr = detail::stack(data, idx, &ToyItmSample::ldr);
    const Tensor hdr = detail::stack(data, idx, &ToyItmSample::hdr);
    Var pred = net.forward(constant(ldr), ForwardOptions{.update_running_stats = true});
    Var loss = cfg.loss == TrainLoss::L1Cosine ? loss_l1_cosine(pred, hdr, cfg.lambda) : loss_smooth_l1(pred, hdr);
    const double value = loss->value[0];
    if (!std::isfinite(value)) {
      throw NumericalError("train_toy: non-finite loss at iteration " + std::to_string(it + 1) +
                           " (lr " + std::to_string(cfg.adam.lr) + "); the run was aborted");
    }
    backward(loss);
    net.params().adam_step(cfg.adam);
    state.losses.push_back(value);
    ++state.iteration;
    if (on_step) on_step(it, value);
  }
}

// Checkpoints: <stem>.bin holds little-endian float64 arrays back to back;
// <stem>.json indexes them by name with shape and offset, and records the
// network spec, training config and iteration count.

inline constexpr const char* kCheckpointFormat = "gunet-checkpoint/1";

inline void save_checkpoint(const std::filesystem::path& stem, const Network& net, const TrainConfig& cfg,
                            const TrainState& state) {
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  std::filesystem::path bin = stem, idx = stem;
  bin += ".bin";
  idx += ".json";
  std::ofstream out(bin, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + bin.string() + "'");
  nlohmann::json tensors = nlohmann::json::array();
  std::size_t offset = 0;
  auto put = [&](const std::string& name, const Shape& s, const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * sizeof(double)));
    tensors.push_back({{"name", name}, {"shape", {s.n, s.c, s.h, s.w}}, {"offset", offset}, {"count", v.size()}});
    offset += v.size();
  };
  for (const auto& e : net.params().entries()) {
    const Shape s = e.param->value.shape();
    put("param/" + e.name, s, e.param->value.storage());
    put("adam_m/" + e.name, s, e.m.storage());
    put("adam_v/" + e.name, s, e.v.storage());
  }
  for (const auto& [name, st] : net.norm_states()) {
    const Shape s{1, st.running_mean.size(), 1, 1};
    put("bn_mean/" + name, s, st.running_mean);
    put("bn_var/" + name, s, st.running_var);
  }
  nlohmann::json adam_t = nlohmann::json::object();
  for (const auto& e : net.params().entries()) adam_t[e.name] = e.t;
  const nlohmann::json index = {{"format", kCheckpointFormat},
                                {"binary", bin.filename().string()},
                                {"dtype", "float64-le"},
                                {"iteration", state.iteration},
                                {"spec", net.spec()},
                                {"training", cfg},
                                {"adam_t", adam_t},
                                {"tensors", tensors}};
  std::ofstream j(idx);
  if (!j) throw DataError("cannot write checkpoint index '" + idx.string() + "'");
  j << index.dump(2) << "\n";
}

struct Checkpoint {
  NetworkSpec spec;
  TrainConfig training;
  std::size_t iteration = 0;
};

/// Reads the index and rebuilds the network with its parameters, optimiser
/// moments and normalisation statistics.
inline Network load_checkpoint(const std::filesystem::path& stem, Checkpoint* meta = nullptr) {
  std::filesystem::path bin = stem, idx = stem;
  bin += ".bin";
  idx += ".json";
  std::ifstream ji(idx);
  if (!ji) throw DataError("cannot open checkpoint index '" + idx.string() + "'");
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(ji);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint index '" + idx.string() + "': " + e.what());
  }
  if (index.value("format", std::string()) != kCheckpointFormat)
    throw DataError("'" + idx.string() + "' is not a checkpoint index");

  const NetworkSpec spec = index.at("spec").get<NetworkSpec>();
  Network net = build_network(spec);

  std::ifstream bi(bin, std::ios::binary);
  if (!bi) throw DataError("cannot open checkpoint data '" + bin.string() + "'");
  std::vector<double> flat;
  {
    bi.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::size_t>(bi.tellg());
    if (bytes % sizeof(double) != 0) throw DataError("checkpoint data size is not a multiple of 8 bytes");
    flat.resize(bytes / sizeof(double));
    bi.seekg(0);
    bi.read(reinterpret_cast<char*>(flat.data()), std::streamsize(bytes));
  }

  std::map<std::string, std::pair<std::size_t, std::size_t>> where;
  for (const auto& t : index.at("tensors"))
    where[t.at("name").get<std::string>()] = {t.at("offset").get<std::size_t>(), t.at("count").get<std::size_t>()};
  auto fetch = [&](const std::string& name, std::vector<double>& dst) {
    auto it = where.find(name);
    if (it == where.end()) throw DataError("checkpoint lacks tensor '" + name + "'");
    const auto [off, count] = it->second;
    if (count != dst.size()) throw DataError("checkpoint tensor '" + name + "' has the wrong size");
    if (off + count > flat.size()) throw DataError("checkpoint data is truncated at '" + name + "'");
    std::copy(flat.begin() + std::ptrdiff_t(off), flat.begin() + std::ptrdiff_t(off + count), dst.begin());
  };
  const auto& adam_t = index.at("adam_t");
  for (auto& e : net.params().entries()) {
    fetch("param/" + e.name, e.param->value.storage());
    fetch("adam_m/" + e.name, e.m.storage());
    fetch("adam_v/" + e.name, e.v.storage());
    e.t = adam_t.at(e.name).get<std::size_t>();
  }
  for (auto& [name, st] : net.norm_states()) {
    fetch("bn_mean/" + name, st.running_mean);
    fetch("bn_var/" + name, st.running_var);
  }
  if (meta) {
    meta->spec = spec;
    meta->training = index.at("training").get<TrainConfig>();
    meta->iteration = index.at("iteration").get<std::size_t>();
  }
  return net;
}

/// Mean of losses[begin, end).
inline double window_mean(const std::vector<double>& v, std::size_t begin, std::size_t end) {
  if (begin >= end || end > v.size()) throw DataError("window_mean: bad range");
  double s = 0;
  for (std::size_t i = begin; i < end; ++i) s += v[i];
  return s / double(end - begin);
}

}  // namespace gunet
