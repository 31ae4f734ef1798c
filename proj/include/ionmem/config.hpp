#pragma once
/**
 * Run configuration files.
 *
 * Grammar (line oriented, '#' starts a comment):
 *
 *   file    := { line }
 *   line    := blank | section | entry
 *   section := '[' name ']'
 *   entry   := key '=' value
 *   value   := word | number { number }
 *   number  := factor { '*' factor }       e.g. 0.4, 2*pi*1.6e6, inf
 *   factor  := decimal float | 'pi'
 *
 * Entries before the first section are top level (experiment, seed, output).
 * Unknown sections and keys are rejected; all problems are reported together,
 * each tagged with its line number.
 */

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ionmem/crystal.hpp"
#include "ionmem/detection.hpp"
#include "ionmem/memory.hpp"
#include "ionmem/pulses.hpp"

namespace ionmem {

enum class Experiment { Crystal, Modes, Sk1Scan, RabiScan, Storage, Relaxation, Readout, Fit };

std::string to_string(Experiment e);

struct CrystalBlock {
  std::size_t ions = 0;
  std::optional<double> classify_tolerance;  // m
  std::size_t max_iterations = SolverOptions{}.max_iterations;
};

struct Sk1Block {
  Pulse target{constants::kPi, 0.0};
  double epsilon_min = -0.3;
  double epsilon_max = 0.3;
  double epsilon_step = 0.01;
};

struct RabiBlock {
  double omega0 = 0.0;
  double gradient_per_site = 0.0;
  std::vector<double> sites{0.0};
  double duration = 0.0;
  double step = 0.0;
};

struct StorageBlock {
  std::vector<double> times;
  std::size_t reps = 200;
  double epsilon = 0.0;
};

struct RelaxationBlock {
  std::vector<double> times;
  std::size_t reps = 200;
};

struct ReadoutBlock {
  DetectionModel model;
  std::vector<double> times;
  std::optional<std::uint64_t> threshold;
};

enum class FitModel { ExponentialOffset, Exponential, Rabi };

struct FitBlock {
  std::string input;
  FitModel model = FitModel::ExponentialOffset;
  std::string time_column = "time_s";
  std::string value_column;
  std::optional<std::string> sigma_column;
};

struct RunConfig {
  Experiment experiment = Experiment::Storage;
  std::uint64_t seed = 0;
  std::string output;
  std::string source;  // verbatim config text, recorded in run metadata

  std::optional<TrapConfig> trap;
  std::optional<CrystalBlock> crystal;
  std::optional<Sk1Block> sk1;
  std::optional<RabiBlock> rabi;
  std::optional<NoiseModel> noise;
  std::optional<StorageBlock> storage;
  std::optional<RelaxationBlock> relaxation;
  std::optional<ReadoutBlock> detection;
  std::optional<FitBlock> fit;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

/// Throws ConfigError listing every problem found.
RunConfig parse_config(std::string_view text);

}  // namespace ionmem
