#pragma once
// CSV writers for every experiment output and a small numeric reader for the
// fit step. Output uses '.' decimals, '\n' line endings and a header row.

#include <string>
#include <string_view>
#include <vector>

#include "ionmem/analysis.hpp"
#include "ionmem/crystal.hpp"
#include "ionmem/detection.hpp"
#include "ionmem/memory.hpp"
#include "ionmem/pulses.hpp"

namespace ionmem {

/// Shortest round-trip-stable form with the given number of significant digits.
std::string format_number(double v, int significant = 12);

std::string crystal_csv(const Positions& positions);
std::string modes_csv(const ModeSpectrum& modes);
std::string sweep_csv(const std::vector<SweepPoint>& sweep);
std::string experiment_csv(const ExperimentResult& result);
std::string readout_csv(const ReadoutCurve& curve);
std::string fit_csv(const FitResult& fit);

struct RabiTrace {
  double site;
  std::vector<double> times;
  std::vector<double> populations;
};
std::string rabi_csv(const std::vector<RabiTrace>& traces);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Throws std::out_of_range if the column is missing.
  std::vector<double> column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

/// Parses a numeric CSV with a header row. Throws std::runtime_error naming
/// the offending line on malformed input.
CsvTable parse_csv(std::string_view text);

}  // namespace ionmem
