#pragma once
// Photon-count readout: Poisson statistics, heating-driven count loss and
// threshold discrimination of bright and dark ions.

#include <cstdint>
#include <optional>
#include <vector>

#include "ionmem/rng.hpp"

namespace ionmem {

enum class IonState { Dark, Bright };

struct DetectionModel {
  double bright_rate = 20.0;  // mean counts per detection window
  double dark_rate = 1.0;
  double heating_tau = 0.256;  // s
  bool cooling_on = true;

  void validate() const;
};

struct ReadoutOutcome {
  std::uint64_t counts = 0;
  IonState classified = IonState::Dark;
};

struct Threshold {
  std::uint64_t counts;  // classify bright when counts >= threshold
  double error;          // average misclassification probability
};

/// Time-independent while cooling is on; bright rate decays as e^(-t/heating_tau) otherwise.
double mean_counts(const DetectionModel& model, double t, IonState state);

std::uint64_t sample_counts(double mean, Rng& rng);

ReadoutOutcome classify_counts(std::uint64_t counts, std::uint64_t threshold);

/// P(N <= n) for N ~ Poisson(mean).
double poisson_cdf(std::int64_t n, double mean);

/// 1/2 [P(N < n | bright) + P(N >= n | dark)].
double misclassification(double bright_rate, double dark_rate, std::uint64_t threshold);

/// Exhaustive scan over 0 .. ceil(bright + 10 sqrt(bright)); ties go to the smaller threshold.
Threshold optimal_threshold(double bright_rate, double dark_rate);

struct ReadoutCurve {
  std::vector<double> times;
  std::vector<double> mean_bright_counts;
  std::vector<double> readout_error;
  std::uint64_t threshold = 0;
};

/// Misclassification versus time at a fixed threshold; defaults to the t = 0 optimum.
ReadoutCurve readout_error_curve(const DetectionModel& model, const std::vector<double>& times,
                                 std::optional<std::uint64_t> fixed_threshold = std::nullopt);

}  // namespace ionmem
