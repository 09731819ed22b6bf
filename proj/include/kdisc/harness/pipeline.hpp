#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdisc/core/parallel.hpp"
#include "kdisc/harness/config.hpp"

namespace kdisc::harness {

enum class Stage { Synth, Engineer, Select, Tune, Train, Evaluate, Calibrate, Explain, Report };

const std::vector<Stage>& all_stages();
const char* to_string(Stage s);
Stage stage_from_string(const std::string& s);

/// Per-stage bookkeeping: hashes of what was read and written.
struct ManifestEntry {
  std::map<std::string, std::string> inputs;   ///< work-relative path -> sha256
  std::map<std::string, std::string> outputs;  ///< work-relative path -> sha256
  std::vector<std::string> volatile_outputs;   ///< timing files, excluded from determinism checks
  nlohmann::json config = nlohmann::json::object();
  double duration_seconds = 0.0;

  nlohmann::json to_json() const;
  static ManifestEntry from_json(const nlohmann::json& j);
};

struct RunManifest {
  std::map<std::string, ManifestEntry> stages;

  static RunManifest load(const std::filesystem::path& path);  ///< empty when absent
  void save(const std::filesystem::path& path) const;
  nlohmann::json to_json() const;
};

struct StageResult {
  Stage stage = Stage::Synth;
  ManifestEntry entry;
  std::vector<std::string> notes;
};

/// Runs one stage. Upstream artifacts must already be in the work directory;
/// otherwise StageOrderError names the stage to run first. Outputs and the
/// manifest entry are written before returning.
StageResult run_stage(Stage stage, const PipelineConfig& cfg, Exec exec = Exec::Parallel);

/// Runs every enabled stage in order.
std::vector<StageResult> run_all(const PipelineConfig& cfg, Exec exec = Exec::Parallel);

/// Work-directory layout.
namespace paths {
inline constexpr const char* kManifest = "manifest.json";
std::filesystem::path stage_dir(const PipelineConfig& cfg, Stage s);
std::filesystem::path cohort_file(const PipelineConfig& cfg);
}  // namespace paths

}  // namespace kdisc::harness
