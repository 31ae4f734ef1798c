#pragma once
/**
 * Shot-by-shot simulation of the spin-echo storage experiment:
 *
 *   |0> --SK1(pi/2, phi)-- wait t/2 --SK1(pi, phi)-- wait t/2 --SK1(pi/2, phi + pi)-- measure
 *
 * Dephasing enters as one Gaussian phase per shot whose variance reproduces the
 * coherence factor of the configured noise model. Relaxation is bright -> dark
 * amplitude damping, unravelled as quantum jumps. SPAM error flips the
 * recorded bit.
 */

#include <cstdint>
#include <limits>
#include <variant>
#include <vector>

#include "ionmem/rng.hpp"

namespace ionmem {

struct PhenomenologicalDephasing {
  double t2;  // s
};

/// Stationary Gaussian detuning noise with exponential autocorrelation.
struct OrnsteinUhlenbeckDephasing {
  double sigma;  // rad/s, standard deviation of the detuning
  double tau_c;  // s
};

using Dephasing = std::variant<PhenomenologicalDephasing, OrnsteinUhlenbeckDephasing>;

struct NoiseModel {
  Dephasing dephasing = PhenomenologicalDephasing{0.4};
  double relaxation_time = std::numeric_limits<double>::infinity();  // s
  double spam_error = 0.0;
  /// Optional slow drift: per time point, T2 is scaled by exp(t2_jitter * N(0,1)).
  /// Applies to phenomenological dephasing only.
  double t2_jitter = 0.0;

  /// Throws std::invalid_argument on out-of-range parameters.
  void validate() const;
};

enum class StorageBasis { Plus, Minus, L, R };

inline constexpr StorageBasis kAllBases[] = {StorageBasis::Plus, StorageBasis::Minus, StorageBasis::L,
                                             StorageBasis::R};

/// Initial microwave phase realising the basis: 0, pi, pi/2, 3pi/2.
double basis_phase(StorageBasis basis);

struct ExperimentResult {
  std::vector<double> times;
  std::vector<double> estimates;
  std::vector<double> standard_errors;
  std::size_t repetitions = 0;
};

/// Decay of the transverse coherence after storage time t, with or without a
/// refocusing pulse at t/2.
double coherence_factor(const NoiseModel& noise, double t, bool echo);

/// One shot of the storage sequence. Returns 1 for a bright outcome.
int run_storage_shot(const NoiseModel& noise, double t, StorageBasis basis, double epsilon, Rng& rng);

/// One shot of the relaxation sequence (pi pulse, wait t, measure). Returns 1 for bright.
int run_relaxation_shot(const NoiseModel& noise, double t, Rng& rng);

/// reps shots per time point, bases cycled Plus, Minus, L, R. Point i draws from
/// substream ("storage", i) of seed.
ExperimentResult storage_curve(const NoiseModel& noise, const std::vector<double>& times,
                               std::size_t reps, double epsilon, std::uint64_t seed);

ExperimentResult relaxation_curve(const NoiseModel& noise, const std::vector<double>& times,
                                  std::size_t reps, std::uint64_t seed);

}  // namespace ionmem
