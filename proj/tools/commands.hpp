#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hyloc::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Provenance record written next to every output artifact.
struct RunManifest {
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string tool_version = kToolVersion;
  double wall_time_s = 0.0;

  std::string to_json() const;
};

/// Manifest location for an output: <out>/manifest.json for directories,
/// <out>.manifest.json for files.
std::filesystem::path manifest_path(const std::filesystem::path& out, bool out_is_dir);

struct SimulateArgs {
  std::optional<std::filesystem::path> config;
  std::string preset;
  std::optional<double> duration;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  std::optional<std::filesystem::path> config_out;  // INI of the effective config
};

struct LabelArgs {
  std::vector<std::filesystem::path> traces;
  int k = 3;
  std::filesystem::path out;
};

struct SelectorArgs {
  std::vector<std::filesystem::path> labels;
  std::vector<int> chain_order;
  int epochs = 400;
  double learning_rate = 0.5;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

/// Training settings; the INI file ([train], [fusion], [blackbox]) is read
/// first and explicit flags override it.
struct TrainArgs {
  std::string model = "fusion";
  std::vector<std::filesystem::path> traces;
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> selector;
  std::optional<int> epochs;
  std::optional<double> train_fraction;
  std::string ablate = "none";  // none | no-attention | no-anchor-selection
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

struct EvaluateArgs {
  std::string method;  // rf | rf-selector | vo | ekf | fusion | blackbox
  std::filesystem::path trace;
  std::optional<std::filesystem::path> model;
  std::optional<std::filesystem::path> selector;
  std::filesystem::path out;  // directory
};

struct CompareArgs {
  std::vector<std::filesystem::path> results;  // evaluate output directories
  std::filesystem::path out;
};

struct GradcheckArgs {
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

struct AblateArgs {
  std::vector<std::filesystem::path> traces;
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> selector;
  std::optional<int> epochs;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::filesystem::path out;  // directory
};

// Each command writes its artifacts plus a manifest and returns the manifest.
RunManifest cmd_simulate(const SimulateArgs& args);
RunManifest cmd_label_anchors(const LabelArgs& args);
RunManifest cmd_train_selector(const SelectorArgs& args);
RunManifest cmd_train(const TrainArgs& args);
RunManifest cmd_evaluate(const EvaluateArgs& args);
RunManifest cmd_compare(const CompareArgs& args);
/// Throws NumericalError when a block exceeds 1e-4 (after writing the report).
RunManifest cmd_gradcheck(const GradcheckArgs& args);
RunManifest cmd_ablate(const AblateArgs& args);

/// Parses arguments, runs the command and maps errors to exit codes:
/// 0 ok, 2 validation, 3 IO, 4 numerical, 1 anything else.
int run(int argc, char** argv);

}  // namespace hyloc::cli
