#pragma once

// Run manifests: a JSON record, written next to every CLI output, holding
// everything needed to replay the run bit-exactly.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gunet/tensor.hpp"

namespace gunet {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kManifestFormat = "gunet-run-manifest/1";

struct RunManifest {
  std::string command;
  std::vector<std::string> args;  // argv after the program name, replayable as-is
  std::string cwd = std::filesystem::current_path().string();  // relative paths in args resolve here
  std::uint64_t seed = 0;
  nlohmann::json spec = nullptr;
  nlohmann::json gif = nullptr;
  nlohmann::json analysis = nullptr;
  nlohmann::json training = nullptr;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  nlohmann::json to_json() const {
    return {{"format", kManifestFormat},
            {"tool_version", kToolVersion},
            {"command", command},
            {"args", args},
            {"cwd", cwd},
            {"seed", seed},
            {"spec", spec},
            {"gif", gif},
            {"analysis", analysis},
            {"training", training},
            {"inputs", inputs},
            {"outputs", outputs},
            {"conventions",
             {{"dtype", "float64"},
              {"layout", "nchw"},
              {"padding", "zero"},
              {"bilinear", "half-pixel centres, edge clamp"},
              {"box_mean", "clipped-window count"},
              {"rng", "splitmix64 counter, Box-Muller"}}}};
  }

  static RunManifest from_json(const nlohmann::json& j) {
    if (j.value("format", std::string()) != kManifestFormat) throw DataError("not a run manifest (format field missing or unknown)");
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.args = j.at("args").get<std::vector<std::string>>();
    m.cwd = j.value("cwd", m.cwd);
    m.seed = j.value("seed", std::uint64_t{0});
    m.spec = j.value("spec", nlohmann::json());
    m.gif = j.value("gif", nlohmann::json());
    m.analysis = j.value("analysis", nlohmann::json());
    m.training = j.value("training", nlohmann::json());
    m.inputs = j.value("inputs", std::vector<std::string>{});
    m.outputs = j.value("outputs", std::vector<std::string>{});
    return m;
  }

  void write(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest '" + path.string() + "'");
    out << to_json().dump(2) << "\n";
  }

  static RunManifest read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest '" + path.string() + "'");
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("malformed manifest '" + path.string() + "': " + e.what());
    }
  }
};

}  // namespace gunet
