#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "spend/cube.hpp"

namespace spend::pipeline {

struct Thresholds {
  double snr_gain = 3.0;
  double mse_ratio = 0.4;       // denoised / raw MSE-to-clean, at most
  double frechet_ratio = 0.5;   // denoised / raw mean distortion, at most
};

struct PipelineConfig {
  std::filesystem::path phantom;  // phantom spec JSON
  std::filesystem::path noise;    // noise spec JSON
  std::filesystem::path train;    // train config JSON (with a "model" section)
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
  /// Empty means pick the axis from the noise analysis.
  std::optional<Axis> permute_axis;
  double unmix_lambda = 0.0;
  Thresholds thresholds;
  int verbosity = 1;
};

/// Reads a pipeline config; relative paths resolve against the file's directory.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Failure in one stage; the message names the stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause)
      : Error("stage '" + stage + "' failed: " + cause), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct PipelineResult {
  nlohmann::json report;
  bool passed = false;
};

/// synth -> analyze -> permute -> train -> denoise -> unmix -> metrics.
/// Every stage writes its outputs under output_dir; report.json is written
/// last and holds no timestamps, so equal seeds give identical bytes.
PipelineResult run_pipeline(const PipelineConfig& cfg);

}  // namespace spend::pipeline
