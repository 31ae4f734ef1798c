#pragma once
// Executes a parsed RunConfig: writes the experiment CSV and a JSON sidecar
// (<output>.meta.json) with the full config, seed, version and a result summary.

#include <filesystem>
#include <string>

#include "ionmem/config.hpp"

namespace ionmem {

std::string artifact_version();

struct RunOptions {
  std::filesystem::path base_dir;  // relative paths in the config resolve here; empty = cwd
  std::string output_override;
};

struct RunReport {
  std::filesystem::path csv_path;
  std::filesystem::path metadata_path;
  std::string csv;
  std::string summary;  // JSON object, also embedded in the metadata
};

/// Runs the experiment. Solver, fit and I/O failures propagate as exceptions.
RunReport run(const RunConfig& config, const RunOptions& options = {});

}  // namespace ionmem
