#pragma once

// Command-line workbench. run_cli() is the whole program minus main(), so the
// test suite can drive it in-process.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gunet/gradcheck_suite.hpp"
#include "gunet/guided_filter.hpp"
#include "gunet/image_io.hpp"
#include "gunet/manifest.hpp"
#include "gunet/spectral.hpp"
#include "gunet/toy_itm.hpp"
#include "gunet/unet.hpp"

namespace gunet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericalFailure = 3 };

struct SpecOptions {
  std::string arch = "gunet";
  std::string levels = "16,32,64,128";
  std::size_t blocks = 4;
  std::string radius = "full";
  double eps = 1e-3;
  std::string norm = "batch";
  std::string spec_file;

  void add_to(CLI::App& app, bool with_arch = true) {
    if (with_arch)
      app.add_option("--arch", arch, "Architecture")->check(CLI::IsMember({"tc", "nn", "bi", "gunet", "ae"}));
    app.add_option("--levels", levels, "Comma-separated level widths");
    app.add_option("--blocks", blocks, "Bottleneck residual blocks");
    app.add_option("--radius", radius, "Guided-filter window radius, or 'full'");
    app.add_option("--eps", eps, "Guided-filter regulariser");
    app.add_option("--norm", norm, "Normalisation statistics")->check(CLI::IsMember({"batch", "running"}));
    app.add_option("--spec", spec_file, "NetworkSpec JSON file; overrides the flags above")->check(CLI::ExistingFile);
  }

  NetworkSpec build(std::uint64_t seed) const {
    NetworkSpec s;
    if (!spec_file.empty()) {
      std::ifstream in(spec_file);
      try {
        s = json::parse(in).get<NetworkSpec>();
      } catch (const json::exception& e) {
        throw DataError("malformed spec file '" + spec_file + "': " + e.what());
      }
    } else {
      s.levels = parse_levels(levels);
      s.bottleneck_blocks = blocks;
      s.fusion.type = parse_fusion(arch);
      s.fusion.gif = parse_gif(radius, eps);
      s.norm_stats = norm == "batch" ? NormStats::Batch : NormStats::Running;
    }
    s.seed = seed;
    s.validate();
    return s;
  }

  static std::vector<std::size_t> parse_levels(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t used = 0;
        const long long v = std::stoll(item, &used);
        if (used != item.size() || v <= 0) throw std::invalid_argument(item);
        out.push_back(static_cast<std::size_t>(v));
      } catch (const std::exception&) {
        throw DataError("--levels: '" + item + "' is not a positive integer");
      }
    }
    if (out.empty()) throw DataError("--levels: no widths given");
    return out;
  }

  static GifParams parse_gif(const std::string& radius, double eps) {
    if (radius == "full") return GifParams::full_window(eps);
    try {
      std::size_t used = 0;
      const long long r = std::stoll(radius, &used);
      if (used != radius.size() || r < 0) throw std::invalid_argument(radius);
      return GifParams::window(static_cast<std::size_t>(r), eps);
    } catch (const std::exception&) {
      throw DataError("--radius must be a non-negative integer or 'full', got '" + radius + "'");
    }
  }
};

inline std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("input directory '" + dir.string() + "' does not exist");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".ppm" || ext == ".pgm" || ext == ".pfm")) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw DataError("no .ppm/.pgm/.pfm images in '" + dir.string() + "'");
  return out;
}

// For display only: min-max stretch to [0, 1].
inline Tensor stretch(const Tensor& t) {
  const auto [lo, hi] = std::minmax_element(t.storage().begin(), t.storage().end());
  const double a = *lo, range = *hi - *lo;
  Tensor r = t;
  for (double& v : r.storage()) v = range > 0 ? (v - a) / range : 0.0;
  return r;
}

inline Tensor image_of(const Plane& p) { return Tensor(Shape{1, 1, p.h, p.w}, p.values); }

inline Tensor sample_of(const Tensor& t, std::size_t n) {
  Tensor r(1, t.c(), t.h(), t.w());
  for (std::size_t c = 0; c < t.c(); ++c) std::copy(t.plane(n, c).begin(), t.plane(n, c).end(), r.plane(0, c).begin());
  return r;
}

inline std::string fmt(double v, int prec = 6) {
  std::ostringstream s;
  s << std::setprecision(prec) << v;
  return s.str();
}

struct Context {
  std::vector<std::string> args;
  std::ostream& out;
  std::ostream& err;
  RunManifest manifest;
  fs::path out_dir;

  fs::path output(const std::string& name) {
    const fs::path p = out_dir / name;
    manifest.outputs.push_back(p.string());
    return p;
  }
  void finish() {
    fs::create_directories(out_dir);
    manifest.write(out_dir / "manifest.json");
    out << "manifest: " << (out_dir / "manifest.json").string() << "\n";
  }
};

// ---------------------------------------------------------------- spectra

struct SpectraOptions {
  SpecOptions spec;
  std::size_t samples = 50;
  std::string inputs;
  std::size_t size = 256;
  std::uint64_t seed = 0;
  std::string avg = "mag";
  std::string match = "none";
  double ev = 0.0;
  std::size_t threads = 0;
};

inline void write_profile_csv(const fs::path& p, const std::vector<double>& profile) {
  std::ofstream f(p);
  if (!f) throw DataError("cannot write '" + p.string() + "'");
  f << "radius,mean_magnitude\n" << std::setprecision(17);
  for (std::size_t r = 0; r < profile.size(); ++r) f << r << "," << profile[r] << "\n";
}

inline json stats_json(const SpectrumStats& s) {
  return {{"spectral_distance", s.spectral_distance},
          {"nyquist_peak_ratio", s.nyquist_peak_ratio},
          {"radial_tail", s.radial_tail}};
}

inline int cmd_spectra(Context& ctx, const SpectraOptions& o) {
  const NetworkSpec spec = o.spec.build(o.seed);
  AnalysisOptions a;
  a.averaging = parse_averaging(o.avg);
  a.exposure = parse_exposure(o.match);
  a.size = o.size;
  a.threads = o.threads;

  std::vector<Tensor> images;
  for (const fs::path& p : list_images(o.inputs)) {
    ctx.manifest.inputs.push_back(fs::absolute(p).string());
    Tensor t = load_image(p);
    if (t.c() == 1 && spec.in_channels == 3) t = concat_channels(concat_channels(t, t), t);
    images.push_back(std::move(t));
  }
  ctx.manifest.seed = o.seed;
  ctx.manifest.spec = spec;
  ctx.manifest.analysis = {{"samples", o.samples}, {"size", o.size},         {"averaging", o.avg},
                           {"exposure_match", o.match}, {"ev", o.ev},      {"seed_derivation", "derive_seed(seed, s)"}};

  const auto t0 = std::chrono::steady_clock::now();
  const SpectrumReport rep = model_average_analysis(spec, images, o.samples, o.seed, a);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::string tag = rep.arch;
  save_pfm(rep.mean_output_spectrum, ctx.output(tag + "_spectrum.pfm"));
  save_pnm(image_of(visualize_spectrum(rep.mean_output_spectrum, o.ev)), ctx.output(tag + "_spectrum.pgm"));
  write_profile_csv(ctx.output(tag + "_radial.csv"), rep.stats.radial_profile);
  save_pfm(rep.input_spectrum, ctx.output("input_spectrum.pfm"));
  save_pnm(image_of(visualize_spectrum(rep.input_spectrum, o.ev)), ctx.output("input_spectrum.pgm"));
  write_profile_csv(ctx.output("input_radial.csv"), rep.input_radial_profile);
  for (std::size_t i = 0; i < rep.n_inputs; ++i) {
    const std::string stem = tag + "_mean_output_" + std::to_string(i);
    const Tensor img = sample_of(rep.mean_output_image, i);
    save_pfm(img, ctx.output(stem + ".pfm"));
    save_pnm(stretch(img), ctx.output(stem + ".ppm"));
  }

  json per = json::array();
  for (const auto& s : rep.per_sample) per.push_back(stats_json(s));
  const json stats = {{"arch", rep.arch},
                      {"n_model_samples", rep.n_model_samples},
                      {"n_inputs", rep.n_inputs},
                      {"size", o.size},
                      {"aggregate", stats_json(rep.stats)},
                      {"sample_mean",
                       {{"spectral_distance", rep.mean_sample_distance()},
                        {"nyquist_peak_ratio", rep.mean_sample_nyquist()},
                        {"radial_tail", rep.mean_sample_tail()}}},
                      {"input_radial_tail", rep.input_radial_tail},
                      {"per_sample", per}};
  const fs::path sp = ctx.output(tag + "_stats.json");
  std::ofstream(sp) << stats.dump(2) << "\n";

  ctx.out << fusion_display_name(spec.fusion.type) << ": " << rep.n_model_samples << " samples x " << rep.n_inputs
          << " inputs at " << o.size << "^2 in " << fmt(secs, 3) << " s\n"
          << "  spectral_distance   " << fmt(rep.stats.spectral_distance) << "\n"
          << "  nyquist_peak_ratio  " << fmt(rep.stats.nyquist_peak_ratio) << "\n"
          << "  radial tail         " << fmt(rep.stats.radial_tail) << " (input " << fmt(rep.input_radial_tail)
          << ")\n";
  ctx.finish();
  return kOk;
}

// ---------------------------------------------------------------- forward

struct ForwardCmdOptions {
  SpecOptions spec;
  std::string input;
  std::string checkpoint;
  std::uint64_t seed = 0;
};

inline int cmd_forward(Context& ctx, const ForwardCmdOptions& o) {
  Network net = o.checkpoint.empty() ? build_network(o.spec.build(o.seed)) : load_checkpoint(o.checkpoint);
  const Tensor x = load_image(o.input);
  ctx.manifest.inputs.push_back(fs::absolute(o.input).string());
  if (!o.checkpoint.empty()) ctx.manifest.inputs.push_back(fs::absolute(o.checkpoint).string() + ".{json,bin}");
  ctx.manifest.seed = net.spec().seed;
  ctx.manifest.spec = net.spec();
  const Tensor y = net.forward(x);
  if (!y.all_finite()) throw NumericalError("forward: network produced non-finite values");
  save_pfm(y, ctx.output("output.pfm"));
  save_pnm(y, ctx.output("output.ppm"));
  ctx.out << "forward " << fusion_display_name(net.spec().fusion.type) << ": " << x.shape().str() << " -> "
          << y.shape().str() << "\n";
  ctx.finish();
  return kOk;
}

// ---------------------------------------------------------------- gif

struct GifCmdOptions {
  std::string guide;
  std::string input;
  std::string radius = "full";
  double eps = 1e-3;
};

inline int cmd_gif(Context& ctx, const GifCmdOptions& o) {
  const GifParams g = SpecOptions::parse_gif(o.radius, o.eps);
  g.validate();
  const Tensor guide = load_image(o.guide);
  const Tensor input = load_image(o.input);
  ctx.manifest.inputs = {fs::absolute(o.guide).string(), fs::absolute(o.input).string()};
  ctx.manifest.gif = g;
  Tensor q;
  std::string mode;
  if (input.shape() == guide.shape()) {
    mode = "filter";
    q = guided_filter(guide, input, g);
  } else if (input.c() == guide.c() && 2 * input.h() == guide.h() && 2 * input.w() == guide.w()) {
    mode = "upsample";
    q = guided_upsample(guide, resize_bilinear(guide, input.h(), input.w()), input, g);
  } else {
    throw DataError("gif: input " + input.shape().str() + " must match the guide " + guide.shape().str() +
                    " or be exactly half its size");
  }
  ctx.manifest.analysis = {{"mode", mode}};
  save_pfm(q, ctx.output("gif.pfm"));
  save_pnm(q, ctx.output("gif.ppm"));
  ctx.out << "gif " << mode << " radius " << o.radius << " eps " << fmt(o.eps) << ": max |q - guide| "
          << fmt(max_abs_diff(q, guide)) << "\n";
  ctx.finish();
  return kOk;
}

// ---------------------------------------------------------------- train-toy

struct TrainCmdOptions {
  SpecOptions spec;
  std::uint64_t seed = 0;
  std::uint64_t data_seed = 1;
  std::size_t dataset_size = 256;
  std::size_t size = 64;
  std::size_t iters = 500;
  std::size_t batch = 4;
  double lr = 3e-4;
  double lambda = 5.0;
  std::string loss = "l1_cosine";
  std::string resume;
};

inline int cmd_train(Context& ctx, const TrainCmdOptions& o) {
  TrainConfig cfg;
  Network net = build_network(o.spec.build(o.seed));
  TrainState state;
  if (!o.resume.empty()) {
    Checkpoint meta;
    net = load_checkpoint(o.resume, &meta);
    cfg = meta.training;
    state.iteration = meta.iteration;
    ctx.manifest.inputs.push_back(fs::absolute(o.resume).string() + ".{json,bin}");
  } else {
    cfg.adam.lr = o.lr;
    cfg.batch = o.batch;
    cfg.lambda = o.lambda;
    cfg.loss = parse_loss(o.loss);
    cfg.seed = Rng::derive_seed(o.seed, 0xBA7C4);
  }
  cfg.iters = o.iters;
  const auto data = make_toy_dataset(o.data_seed, o.dataset_size, o.size);
  ctx.manifest.seed = o.seed;
  ctx.manifest.spec = net.spec();
  ctx.manifest.training = cfg;
  ctx.manifest.training["dataset"] = {{"seed", o.data_seed}, {"count", o.dataset_size}, {"size", o.size}};
  ctx.manifest.training["start_iteration"] = state.iteration;
  ctx.manifest.training["desk_scale"] = "batch 4 and 64x64 crops in place of batch 32 at full resolution";

  fs::create_directories(ctx.out_dir);
  std::ofstream csv(ctx.output("loss.csv"));
  csv << "iteration,loss\n" << std::setprecision(17);
  const std::size_t report_every = std::max<std::size_t>(1, o.iters / 10);
  int code = kOk;
  try {
    train_toy(net, data, cfg, state, o.iters, [&](std::size_t it, double loss) {
      csv << it + 1 << "," << loss << "\n";
      if ((it + 1) % report_every == 0) ctx.out << "iter " << it + 1 << " loss " << fmt(loss) << "\n";
    });
  } catch (const NumericalError& e) {
    ctx.err << "error: " << e.what() << "\n";
    code = kNumericalFailure;
  }
  csv.close();
  save_checkpoint(ctx.out_dir / "checkpoint", net, cfg, state);
  ctx.manifest.outputs.push_back((ctx.out_dir / "checkpoint.json").string());
  ctx.manifest.outputs.push_back((ctx.out_dir / "checkpoint.bin").string());
  const std::size_t n = state.losses.size();
  if (n >= 2) {
    const std::size_t w = std::min<std::size_t>(50, n / 2);
    ctx.out << "first " << w << " mean " << fmt(window_mean(state.losses, 0, w)) << ", last " << w << " mean "
            << fmt(window_mean(state.losses, n - w, n)) << "\n";
  }
  ctx.finish();
  return code;
}

// ---------------------------------------------------------------- gradcheck

inline int cmd_gradcheck(Context& ctx, std::uint64_t seed, std::size_t trials) {
  ctx.manifest.seed = seed;
  ctx.manifest.analysis = {{"trials", trials}, {"step", 1e-5}, {"min_coords", 64}};
  const auto rows = run_gradcheck_suite(seed, trials);
  json table = json::array();
  bool ok = true;
  ctx.out << std::left << std::setw(20) << "module" << std::setw(14) << "worst_rel" << std::setw(10) << "tol"
          << "status\n";
  for (const auto& r : rows) {
    ctx.out << std::left << std::setw(20) << r.module << std::setw(14) << fmt(r.worst_rel_error, 3) << std::setw(10)
            << fmt(r.tolerance, 2) << (r.passed ? "ok" : "FAIL") << "\n";
    table.push_back({{"module", r.module}, {"worst_rel_error", r.worst_rel_error}, {"tolerance", r.tolerance},
                     {"checks", r.checks}, {"passed", r.passed}});
    ok = ok && r.passed;
  }
  std::ofstream(ctx.output("gradcheck.json")) << table.dump(2) << "\n";
  ctx.finish();
  return ok ? kOk : kNumericalFailure;
}

// ---------------------------------------------------------------- params

inline int cmd_params(Context& ctx, const SpecOptions& o) {
  json table = json::object();
  NetworkSpec base = o.build(0);
  ctx.manifest.spec = base;
  ctx.out << "levels";
  for (std::size_t w : base.levels) ctx.out << " " << w;
  ctx.out << ", " << base.bottleneck_blocks << " bottleneck blocks\n";
  std::vector<std::pair<std::size_t, FusionType>> rows;
  for (FusionType t : {FusionType::Guided, FusionType::ConcatNN, FusionType::ConcatBI, FusionType::ConcatTC,
                       FusionType::Autoencoder}) {
    NetworkSpec s = base;
    s.fusion.type = t;
    if (t == FusionType::Guided && !(s.fusion.gif.eps > 0)) s.fusion.gif.eps = 1e-3;
    const std::size_t n = build_network(s).param_count();
    table[fusion_label(t)] = n;
    ctx.out << std::left << std::setw(14) << fusion_display_name(t) << n << "\n";
  }
  std::ofstream(ctx.output("params.json")) << table.dump(2) << "\n";
  ctx.finish();
  return kOk;
}

// ---------------------------------------------------------------- dispatch

int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr);

inline int cmd_replay(const std::string& manifest_path, const std::string& out_override, std::ostream& out,
                      std::ostream& err) {
  const RunManifest m = RunManifest::read(manifest_path);
  std::vector<std::string> args = m.args;
  if (!out_override.empty()) {
    const std::string abs_out = fs::absolute(out_override).string();
    bool replaced = false;
    for (std::size_t i = 0; i + 1 < args.size(); ++i)
      if (args[i] == "--out") args[i + 1] = abs_out, replaced = true;
    if (!replaced) args.insert(args.end(), {"--out", abs_out});
  }
  // Relative paths in the recorded arguments refer to the original working directory.
  struct CwdGuard {
    fs::path saved = fs::current_path();
    ~CwdGuard() { fs::current_path(saved); }
  } guard;
  fs::current_path(m.cwd);
  out << "replaying:";
  for (const auto& a : args) out << " " << a;
  out << "\n";
  return run_cli(args, out, err);
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"GUNet workbench: guided upsampling, UNet variants and spectral bias analysis", "gunet"};
  app.require_subcommand(1);
  std::map<std::string, std::string> out_dirs;
  auto add_out = [&](CLI::App* sub, const std::string& fallback) {
    std::string& dst = out_dirs[sub->get_name()];
    dst = fallback;
    sub->add_option("--out", dst, "Output directory" + (fallback.empty() ? std::string() : " (default " + fallback + ")"));
  };

  SpectraOptions so;
  auto* spectra = app.add_subcommand("spectra", "Average output spectra of freshly initialised networks");
  so.spec.add_to(*spectra);
  spectra->add_option("--samples", so.samples, "Model samples")->check(CLI::PositiveNumber);
  spectra->add_option("--inputs", so.inputs, "Directory of input images")->required();
  spectra->add_option("--size", so.size, "Centre-crop size (power of two)");
  spectra->add_option("--seed", so.seed, "Base seed");
  spectra->add_option("--avg", so.avg, "Spectrum averaging")->check(CLI::IsMember({"mag", "complex"}));
  spectra->add_option("--match", so.match, "Exposure matching of outputs")->check(CLI::IsMember({"none", "channel"}));
  spectra->add_option("--ev", so.ev, "Visualisation exposure (stops)");
  spectra->add_option("--threads", so.threads, "Worker threads (0: all cores)");
  add_out(spectra, "out/spectra");

  ForwardCmdOptions fo;
  auto* forward = app.add_subcommand("forward", "Run one image through a checkpoint or a fresh network");
  fo.spec.add_to(*forward);
  forward->add_option("--input", fo.input, "Input image")->required()->check(CLI::ExistingFile);
  forward->add_option("--checkpoint", fo.checkpoint, "Checkpoint stem (without .json/.bin)");
  forward->add_option("--seed", fo.seed, "Initialisation seed for a fresh network");
  add_out(forward, "out/forward");

  GifCmdOptions go;
  auto* gif = app.add_subcommand("gif", "Guided filtering (same size) or 2x guided upsampling (half-size input)");
  gif->add_option("--guide", go.guide, "Guide image")->required()->check(CLI::ExistingFile);
  gif->add_option("--input", go.input, "Image to filter or upsample")->required()->check(CLI::ExistingFile);
  gif->add_option("--radius", go.radius, "Window radius, or 'full'");
  gif->add_option("--eps", go.eps, "Regulariser");
  add_out(gif, "out/gif");

  TrainCmdOptions to;
  auto* train = app.add_subcommand("train-toy", "Toy inverse tone mapping training");
  to.spec.add_to(*train);
  train->add_option("--seed", to.seed, "Initialisation and batch-order seed");
  train->add_option("--data-seed", to.data_seed, "Dataset seed");
  train->add_option("--dataset-size", to.dataset_size, "Number of synthetic scenes")->check(CLI::PositiveNumber);
  train->add_option("--size", to.size, "Scene size");
  train->add_option("--iters", to.iters, "Iterations");
  train->add_option("--batch", to.batch, "Batch size")->check(CLI::PositiveNumber);
  train->add_option("--lr", to.lr, "Adam learning rate");
  train->add_option("--lambda", to.lambda, "Cosine term weight");
  train->add_option("--loss", to.loss, "Loss")->check(CLI::IsMember({"l1_cosine", "smooth_l1"}));
  train->add_option("--resume", to.resume, "Checkpoint stem to continue from");
  add_out(train, "out/train-toy");

  std::uint64_t gc_seed = 0;
  std::size_t gc_trials = 5;
  auto* gradcheck = app.add_subcommand("gradcheck", "Central-difference gradient suite");
  gradcheck->add_option("--seed", gc_seed, "Seed");
  gradcheck->add_option("--trials", gc_trials, "Random shapes per module")->check(CLI::PositiveNumber);
  add_out(gradcheck, "out/gradcheck");

  SpecOptions po;
  auto* params = app.add_subcommand("params", "Parameter tallies of all five variants");
  po.add_to(*params, false);
  add_out(params, "out/params");

  std::string manifest_path;
  auto* replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  replay->add_option("manifest", manifest_path, "manifest.json")->required()->check(CLI::ExistingFile);
  add_out(replay, "");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  Context ctx{args, out, err, {}, out_dirs.at(command)};
  ctx.manifest.args = args;
  ctx.manifest.command = command;
  try {
    if (replay->parsed()) return cmd_replay(manifest_path, out_dirs.at("replay"), out, err);
    if (spectra->parsed()) return cmd_spectra(ctx, so);
    if (forward->parsed()) return cmd_forward(ctx, fo);
    if (gif->parsed()) return cmd_gif(ctx, go);
    if (train->parsed()) return cmd_train(ctx, to);
    if (gradcheck->parsed()) return cmd_gradcheck(ctx, gc_seed, gc_trials);
    if (params->parsed()) return cmd_params(ctx, po);
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

}  // namespace gunet::cli
