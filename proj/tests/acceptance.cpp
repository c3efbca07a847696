// Acceptance run: one PASS/FAIL line per criterion, followed by the measured
// values. Exit status is non-zero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cli_app.hpp"
#include "gunet/gif_oracle.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace gunet;

namespace {

const fs::path kNatural = GUNET_DATA_DIR "/natural";

struct Outcome {
  bool passed;
  std::string detail;
};

std::string num(double v, int prec = 4) {
  std::ostringstream s;
  s << std::setprecision(prec) << v;
  return s.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Tensor natural(const std::string& name) { return load_image(kNatural / (name + ".ppm")); }

// ------------------------------------------------------------------ 1

Outcome oracle_equivalence() {
  Rng rng(101);
  constexpr std::size_t kCases = 100;
  double conv = 0, tconv = 0, box = 0, gif = 0, dft = 0;
  auto dims = [&](std::size_t lo, std::size_t span) { return lo + rng.below(span); };

  for (std::size_t i = 0; i < kCases; ++i) {
    const std::size_t stride = 1 + rng.below(2), k = 1 + rng.below(4), pad = rng.below(k);
    const Tensor x = oracle::random_tensor({dims(1, 2), dims(1, 3), dims(k + 1, 6), dims(k + 1, 6)}, rng);
    const Tensor w = oracle::random_tensor({dims(1, 3), x.c(), k, k}, rng);
    std::vector<double> b(w.n());
    for (double& v : b) v = rng.uniform(-1, 1);
    conv = std::max(conv, max_abs_diff(conv2d(x, w, b, stride, pad), oracle::conv2d(x, w, b, int(stride), int(pad))));
  }
  for (std::size_t i = 0; i < kCases; ++i) {
    const std::size_t stride = 1 + rng.below(2), k = 2 + rng.below(3), pad = rng.below((k + 1) / 2);
    const Tensor x = oracle::random_tensor({dims(1, 2), dims(1, 3), dims(1, 5), dims(1, 5)}, rng);
    const Tensor w = oracle::random_tensor({x.c(), dims(1, 3), k, k}, rng);
    std::vector<double> b(w.c());
    for (double& v : b) v = rng.uniform(-1, 1);
    tconv = std::max(tconv, max_abs_diff(transposed_conv2d(x, w, b, stride, pad),
                                         oracle::transposed_conv2d(x, w, b, int(stride), int(pad))));
  }
  for (std::size_t i = 0; i < kCases; ++i) {
    const Tensor x = oracle::random_tensor({dims(1, 2), dims(1, 3), dims(1, 12), dims(1, 12)}, rng);
    const std::size_t r = rng.below(6);
    box = std::max(box, max_abs_diff(box_mean(x, r), oracle::box_mean(x, int(r))));
  }
  for (std::size_t i = 0; i < kCases; ++i) {
    const Shape s{dims(1, 2), dims(1, 3), dims(2, 10), dims(2, 10)};
    const Tensor y = oracle::random_tensor(s, rng, 0, 1), z = oracle::random_tensor(s, rng, 0, 1);
    const double eps = std::pow(10.0, -double(1 + rng.below(6)));
    const GifParams p = rng.below(4) == 0 ? GifParams::full_window(eps) : GifParams::window(1 + rng.below(4), eps);
    const GifCoefficients fast = gif_coefficients(y, z, p), ref = gif_naive_oracle(y, z, p);
    gif = std::max({gif, max_abs_diff(fast.a_bar, ref.a_bar), max_abs_diff(fast.b_bar, ref.b_bar)});
  }
  for (std::size_t i = 0; i < kCases; ++i) {
    const std::size_t h = std::size_t{1} << (1 + rng.below(4)), w = std::size_t{1} << (1 + rng.below(4));
    const Tensor x = oracle::random_tensor({1, 1, h, w}, rng);
    const ComplexPlane fast = dft2d(x);
    const auto ref = oracle::dft2d(x);
    for (std::size_t j = 0; j < h * w; ++j)
      dft = std::max({dft, std::abs(fast.re[j] - ref[j].real()), std::abs(fast.im[j] - ref[j].imag())});
  }
  const bool ok = conv <= 1e-10 && tconv <= 1e-10 && box <= 1e-10 && gif <= 1e-10 && dft <= 1e-9;
  return {ok, std::to_string(kCases) + " cases each; max err conv2d " + num(conv) + ", transposed_conv2d " + num(tconv) +
                  ", box_mean " + num(box) + ", gif_coefficients " + num(gif) + ", dft2d " + num(dft) +
                  " (tol 1e-10, dft 1e-9)"};
}

// ------------------------------------------------------------------ 2

Outcome gradient_suite() {
  const auto rows = run_gradcheck_suite(2024, 5);
  bool ok = true;
  double worst_op = 0, worst_layer = 0;
  std::string failed;
  for (const auto& r : rows) {
    ok = ok && r.passed;
    if (!r.passed) failed += " " + r.module;
    (r.tolerance == kOpGradTol ? worst_op : worst_layer) =
        std::max(r.tolerance == kOpGradTol ? worst_op : worst_layer, r.worst_rel_error);
  }
  return {ok, std::to_string(rows.size()) + " modules; worst rel err ops " + num(worst_op) + " (tol 1e-5), layers " +
                  num(worst_layer) + " (tol 1e-3)" + (failed.empty() ? "" : "; failed:" + failed)};
}

// ------------------------------------------------------------------ 3

Outcome self_guidance() {
  const Tensor x = center_crop(natural("astronaut"), 128, 128);
  const Tensor y = resize_bilinear(x, 64, 64);
  double full = 0, local = 0;
  full = max_abs_diff(guided_upsample(x, y, y, GifParams::full_window(1e-8)), x);
  local = max_abs_diff(guided_upsample(x, y, y, GifParams::window(2, 1e-8)), x);
  return {full <= 1e-3 && local <= 1e-3,
          "astronaut 128x128 crop, eps 1e-8: max|q - x| full window " + num(full) + ", radius 2 " + num(local) +
              " (tol 1e-3)"};
}

// ------------------------------------------------------------------ 4

Outcome parameter_counts() {
  std::vector<std::pair<FusionType, std::size_t>> frozen = {{FusionType::Guided, 1695283},
                                                            {FusionType::ConcatBI, 1935123},
                                                            {FusionType::ConcatNN, 1935123},
                                                            {FusionType::ConcatTC, 2087443},
                                                            {FusionType::Autoencoder, 1891363}};
  std::map<FusionType, std::size_t> n;
  std::string detail = "levels 16,32,64,128:";
  bool fixture = true;
  for (auto [t, expect] : frozen) {
    NetworkSpec s;
    s.fusion.type = t;
    n[t] = build_network(s).param_count();
    fixture = fixture && n[t] == expect;
    detail += " " + fusion_display_name(t) + " " + std::to_string(n[t]);
  }
  const bool order = n[FusionType::Guided] < n[FusionType::ConcatBI] && n[FusionType::Guided] < n[FusionType::ConcatNN] &&
                     n[FusionType::ConcatBI] < n[FusionType::ConcatTC] && n[FusionType::ConcatNN] < n[FusionType::ConcatTC];
  return {order && fixture, detail + (fixture ? "; matches frozen tallies" : "; DIFFERS from frozen tallies")};
}

// ------------------------------------------------------------------ 5

Outcome spectral_bias(std::string& extra) {
  std::vector<Tensor> images;
  for (const char* name : {"astronaut", "chelsea", "coffee"}) images.push_back(natural(name));

  auto sweep = [&](ExposureMatch match) {
    std::map<FusionType, SpectrumReport> out;
    for (FusionType t : {FusionType::ConcatTC, FusionType::ConcatNN, FusionType::ConcatBI, FusionType::Guided,
                         FusionType::Autoencoder}) {
      NetworkSpec s;
      s.fusion.type = t;
      AnalysisOptions a;
      a.size = 128;
      a.exposure = match;
      out.emplace(t, model_average_analysis(s, images, 10, 1, a));
    }
    return out;
  };
  auto describe = [](const std::map<FusionType, SpectrumReport>& reps) {
    std::string s;
    for (const auto& [t, r] : reps)
      s += "    " + fusion_display_name(t) + ": distance " + num(r.mean_sample_distance()) + ", nyquist " +
           num(r.mean_sample_nyquist()) + ", tail " + num(r.mean_sample_tail()) + " (" +
           num(r.mean_sample_tail() / r.input_radial_tail) + "x input)\n";
    return s;
  };

  const auto matched = sweep(ExposureMatch::PerChannel);
  const auto raw = sweep(ExposureMatch::None);
  const auto& g = matched.at(FusionType::Guided);
  const auto& tc = matched.at(FusionType::ConcatTC);
  const auto& nn = matched.at(FusionType::ConcatNN);
  const double in_tail = g.input_radial_tail;
  const bool a = g.mean_sample_distance() < tc.mean_sample_distance() &&
                 g.mean_sample_distance() < nn.mean_sample_distance();
  const bool b = tc.mean_sample_nyquist() >= 2 * g.mean_sample_nyquist();
  const double g_ratio = g.mean_sample_tail() / in_tail;
  const bool c = nn.mean_sample_tail() < in_tail && g_ratio <= 2.0 && g_ratio >= 0.5;

  extra = "  per-channel exposure matched (criterion values):\n" + describe(matched) +
          "  raw outputs (no matching, for reference):\n" + describe(raw) + "    input tail " + num(in_tail) + "\n";
  return {a && b && c, "10 seeds x 3 images at 128^2, outputs exposure-matched per channel: (a) " +
                           std::string(a ? "ok" : "FAIL") + " (b) " + (b ? "ok" : "FAIL") + " TC/GUNet nyquist " +
                           num(tc.mean_sample_nyquist() / g.mean_sample_nyquist()) + " (c) " + (c ? "ok" : "FAIL") +
                           " NN tail/input " + num(nn.mean_sample_tail() / in_tail) + ", GUNet tail/input " +
                           num(g_ratio)};
}

// ------------------------------------------------------------------ 6

Outcome toy_training() {
  const auto data = make_toy_dataset(7, 256, 64);
  NetworkSpec s;
  s.fusion = FusionKind::guided(GifParams::full_window(1e-3));
  s.seed = 1;
  Network net = build_network(s);
  TrainConfig cfg;
  cfg.seed = 3;
  TrainState st;
  bool finite = true;
  try {
    train_toy(net, data, cfg, st, 500);
  } catch (const NumericalError&) {
    finite = false;
  }
  const std::size_t n = st.losses.size();
  if (!finite || n < 100) return {false, "training aborted with a non-finite loss after " + std::to_string(n) + " iterations"};
  const double first = window_mean(st.losses, 0, 50), last = window_mean(st.losses, n - 50, n);
  return {last <= 0.5 * first, "GUNet 64x64, L1+cosine lambda 5, Adam 3e-4, batch 4, 500 iters: first-50 mean " +
                                   num(first) + ", last-50 mean " + num(last) + " (ratio " + num(last / first) +
                                   ", need <= 0.5), no NaN"};
}

// ------------------------------------------------------------------ 7

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "gunet_acceptance_replay";
  fs::remove_all(dir);
  std::ostringstream sink;
  auto run = [&](std::vector<std::string> a) { return cli::run_cli(a, sink, sink); };
  const std::string in = kNatural.string();
  const std::vector<std::string> spectra = {"spectra", "--arch", "tc", "--samples", "4", "--inputs", in, "--size", "64",
                                            "--seed", "5"};
  auto with = [](std::vector<std::string> a, std::vector<std::string> b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  bool ok = run(with(spectra, {"--threads", "1", "--out", (dir / "s1").string()})) == 0;
  ok = ok && run(with(spectra, {"--threads", "4", "--out", (dir / "s4").string()})) == 0;
  ok = ok && run({"replay", (dir / "s4" / "manifest.json").string(), "--out", (dir / "s4r").string()}) == 0;
  ok = ok && run({"train-toy", "--levels", "4,8", "--blocks", "1", "--size", "16", "--dataset-size", "8", "--iters", "3",
                  "--out", (dir / "t").string()}) == 0;
  ok = ok && run({"replay", (dir / "t" / "manifest.json").string(), "--out", (dir / "tr").string()}) == 0;
  if (!ok) return {false, "a CLI run failed: " + sink.str()};

  std::size_t compared = 0, equal = 0;
  for (const auto& e : fs::directory_iterator(dir / "s1")) {
    const std::string f = e.path().filename().string();
    if (f == "manifest.json") continue;
    ++compared;
    const std::string ref = slurp(e.path());
    equal += ref == slurp(dir / "s4" / f) && ref == slurp(dir / "s4r" / f);
  }
  for (const char* f : {"loss.csv", "checkpoint.bin", "checkpoint.json"}) {
    ++compared;
    equal += slurp(dir / "t" / f) == slurp(dir / "tr" / f);
  }
  return {compared == equal && compared > 3,
          std::to_string(equal) + "/" + std::to_string(compared) +
              " artefacts byte-identical (spectra threads 1 vs 4 vs replay; train-toy vs replay)"};
}

// ------------------------------------------------------------------ 8

Outcome fourier_properties() {
  Rng rng(8);
  double parseval = 0;
  for (std::size_t n : {8, 32, 128}) {
    const Tensor x = oracle::random_tensor({1, 1, n, n}, rng);
    const ComplexPlane X = dft2d(x);
    double time = 0, freq = 0;
    for (double v : x.storage()) time += v * v;
    for (std::size_t i = 0; i < n * n; ++i) freq += X.re[i] * X.re[i] + X.im[i] * X.im[i];
    parseval = std::max(parseval, std::abs(freq / double(n * n) - time) / time);
  }

  constexpr std::size_t N = 64;
  Tensor checker(1, 1, N, N), impulse(1, 1, N, N);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) checker.at(0, 0, i, j) = (i + j) % 2 ? -1.0 : 1.0;
  impulse.at(0, 0, 0, 0) = 1.0;
  const Plane cb = spectrum_magnitude(checker), im = spectrum_magnitude(impulse);
  double cb_leak = 0, im_spread = 0;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) {
      if (i != N / 2 || j != N / 2) cb_leak = std::max(cb_leak, cb.at(i, j));
      im_spread = std::max(im_spread, std::abs(im.at(i, j) - 1.0));
    }
  const double peak = cb.at(N / 2, N / 2);
  const bool ok = parseval <= 1e-9 && std::abs(peak - double(N * N)) <= 1e-9 * N * N && cb_leak <= 1e-9 * peak &&
                  im_spread <= 1e-12;
  return {ok, "Parseval rel err " + num(parseval) + "; checkerboard peak " + num(peak, 6) + " at (N/2,N/2), max other bin " +
                  num(cb_leak) + "; impulse max |mag - 1| " + num(im_spread)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome(std::string&)> run;
  };
  const std::vector<Criterion> criteria = {
      {"oracle equivalence", [](std::string&) { return oracle_equivalence(); }},
      {"gradient suite", [](std::string&) { return gradient_suite(); }},
      {"self-guidance identity", [](std::string&) { return self_guidance(); }},
      {"parameter counts", [](std::string&) { return parameter_counts(); }},
      {"spectral bias", spectral_bias},
      {"toy ITM training", [](std::string&) { return toy_training(); }},
      {"determinism", [](std::string&) { return determinism(); }},
      {"Fourier properties", [](std::string&) { return fourier_properties(); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string extra;
    Outcome o;
    try {
      o = criteria[i].run(extra);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.passed;
    std::printf("[%s] %zu. %s (%.1f s): %s\n", o.passed ? "PASS" : "FAIL", i + 1, criteria[i].name, secs,
                o.detail.c_str());
    if (!extra.empty()) std::printf("%s", extra.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
