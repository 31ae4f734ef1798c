#include "ionmem/memory.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "ionmem/analysis.hpp"
#include "ionmem/crystal.hpp"
#include "ionmem/pulses.hpp"

namespace ionmem {

using constants::kPi;

namespace {

struct StorageSequences {
  Unitary2 prepare, echo, reverse;
};

StorageSequences storage_sequences(StorageBasis basis, double epsilon) {
  const double phi = basis_phase(basis);
  return {sequence_unitary(sk1_sequence(Pulse(kPi / 2.0, phi)), epsilon),
          sequence_unitary(sk1_sequence(Pulse(kPi, phi)), epsilon),
          sequence_unitary(sk1_sequence(Pulse(kPi / 2.0, phi + kPi)), epsilon)};
}

// Quantum-jump unravelling of amplitude damping with decay probability gamma.
void amplitude_damp(QubitState& psi, double gamma, double u) {
  if (gamma <= 0.0) return;
  const double p_jump = gamma * std::norm(psi[1]);
  if (u < p_jump) {
    psi = kGround;
    return;
  }
  psi[1] *= std::sqrt(1.0 - gamma);
  psi.normalize();
}

double decay_probability(const NoiseModel& noise, double dt) {
  if (std::isinf(noise.relaxation_time)) return 0.0;
  return -std::expm1(-dt / noise.relaxation_time);
}

int measure(const NoiseModel& noise, const QubitState& psi, double u_measure, double u_spam) {
  int bit = u_measure < std::norm(psi[1]) ? 1 : 0;
  if (u_spam < noise.spam_error) bit ^= 1;
  return bit;
}

int storage_shot(const NoiseModel& noise, double t, const StorageSequences& seq, Rng& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  // Fixed draw order keeps streams aligned across parameter changes.
  const double xi = normal(rng);
  const double u_jump1 = uniform(rng);
  const double u_jump2 = uniform(rng);
  const double u_measure = uniform(rng);
  const double u_spam = uniform(rng);

  // exp(-var / 2) = coherence, so var = -2 ln C.
  const double c = coherence_factor(noise, t, true);
  const double phase = c > 0.0 ? std::sqrt(-2.0 * std::log(c)) * xi : 2.0 * kPi * uniform(rng);
  const double gamma = decay_probability(noise, 0.5 * t);

  QubitState psi = seq.prepare * kGround;
  psi[1] *= std::polar(1.0, phase);
  amplitude_damp(psi, gamma, u_jump1);
  psi = seq.echo * psi;
  amplitude_damp(psi, gamma, u_jump2);
  psi = seq.reverse * psi;
  return measure(noise, psi, u_measure, u_spam);
}

ExperimentResult summarize(const std::vector<double>& times, const std::vector<std::size_t>& bright,
                           std::size_t reps) {
  ExperimentResult out;
  out.times = times;
  out.repetitions = reps;
  for (std::size_t k : bright) {
    const double p = static_cast<double>(k) / static_cast<double>(reps);
    out.estimates.push_back(p);
    out.standard_errors.push_back(binomial_stderr(p, reps));
  }
  return out;
}

void check_grid(const std::vector<double>& times, std::size_t reps) {
  if (times.empty()) throw std::invalid_argument("time grid must be non-empty");
  if (reps < 1) throw std::invalid_argument("reps must be >= 1");
  for (double t : times) {
    if (!(t >= 0.0)) throw std::invalid_argument("storage times must be >= 0");
  }
}

}  // namespace

void NoiseModel::validate() const {
  if (const auto* p = std::get_if<PhenomenologicalDephasing>(&dephasing)) {
    if (!(p->t2 > 0.0)) throw std::invalid_argument("t2 must be > 0");
  } else {
    const auto& ou = std::get<OrnsteinUhlenbeckDephasing>(dephasing);
    if (!(ou.sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
    if (!(ou.tau_c > 0.0)) throw std::invalid_argument("tau_c must be > 0");
  }
  if (!(relaxation_time > 0.0)) throw std::invalid_argument("relaxation_time must be > 0");
  if (!(spam_error >= 0.0 && spam_error < 0.5)) throw std::invalid_argument("spam_error must be in [0, 0.5)");
  if (!(t2_jitter >= 0.0)) throw std::invalid_argument("t2_jitter must be >= 0");
}

double basis_phase(StorageBasis basis) {
  switch (basis) {
    case StorageBasis::Plus:
      return 0.0;
    case StorageBasis::Minus:
      return kPi;
    case StorageBasis::L:
      return kPi / 2.0;
    case StorageBasis::R:
      return 3.0 * kPi / 2.0;
  }
  throw std::invalid_argument("unknown basis");
}

double coherence_factor(const NoiseModel& noise, double t, bool echo) {
  if (t < 0.0) throw std::invalid_argument("t must be >= 0");
  if (const auto* p = std::get_if<PhenomenologicalDephasing>(&noise.dephasing)) {
    return std::exp(-t / p->t2);
  }
  // Gaussian accumulated phase: C = exp(-Var / 2).
  //   Ramsey: Var = 2 s^2 tc^2 (x - 1 + e^-x)
  //   echo:   Var = 2 s^2 tc^2 (x - 3 + 4 e^(-x/2) - e^-x),  x = t / tc
  const auto& ou = std::get<OrnsteinUhlenbeckDephasing>(noise.dephasing);
  const double x = t / ou.tau_c;
  double shape = 0.0;
  if (x < 1.0) {
    // Taylor series; the closed forms cancel catastrophically for quasi-static noise.
    //   Ramsey: sum_{n>=2} (-x)^n / n!,  echo: sum_{n>=3} (-x)^n (4 / 2^n - 1) / n!
    double term = 1.0;  // (-x)^n / n!
    double half_power = 1.0;  // 2^-n
    for (int n = 1; n <= 30; ++n) {
      term *= -x / n;
      half_power *= 0.5;
      if (n >= 2) shape += echo ? term * (4.0 * half_power - 1.0) : term;
    }
  } else {
    shape = echo ? x - 3.0 + 4.0 * std::exp(-0.5 * x) - std::exp(-x) : x - 1.0 + std::exp(-x);
  }
  const double variance = 2.0 * ou.sigma * ou.sigma * ou.tau_c * ou.tau_c * shape;
  return std::exp(-0.5 * variance);
}

int run_storage_shot(const NoiseModel& noise, double t, StorageBasis basis, double epsilon, Rng& rng) {
  if (t < 0.0) throw std::invalid_argument("t must be >= 0");
  return storage_shot(noise, t, storage_sequences(basis, epsilon), rng);
}

int run_relaxation_shot(const NoiseModel& noise, double t, Rng& rng) {
  if (t < 0.0) throw std::invalid_argument("t must be >= 0");
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double u_jump = uniform(rng);
  const double u_measure = uniform(rng);
  const double u_spam = uniform(rng);

  QubitState psi = sequence_unitary(sk1_sequence(Pulse(kPi, 0.0)), 0.0) * kGround;
  amplitude_damp(psi, decay_probability(noise, t), u_jump);
  return measure(noise, psi, u_measure, u_spam);
}

ExperimentResult storage_curve(const NoiseModel& noise, const std::vector<double>& times,
                               std::size_t reps, double epsilon, std::uint64_t seed) {
  noise.validate();
  check_grid(times, reps);
  StorageSequences per_basis[4];
  for (std::size_t b = 0; b < 4; ++b) per_basis[b] = storage_sequences(kAllBases[b], epsilon);

  std::vector<std::size_t> bright(times.size(), 0);
  for (std::size_t i = 0; i < times.size(); ++i) {
    Rng rng = make_rng(seed, "storage", i);
    NoiseModel point_noise = noise;
    if (noise.t2_jitter > 0.0) {
      if (auto* p = std::get_if<PhenomenologicalDephasing>(&point_noise.dephasing)) {
        p->t2 *= std::exp(noise.t2_jitter * std::normal_distribution<double>(0.0, 1.0)(rng));
      }
    }
    for (std::size_t shot = 0; shot < reps; ++shot) {
      bright[i] += static_cast<std::size_t>(storage_shot(point_noise, times[i], per_basis[shot % 4], rng));
    }
  }
  return summarize(times, bright, reps);
}

ExperimentResult relaxation_curve(const NoiseModel& noise, const std::vector<double>& times,
                                  std::size_t reps, std::uint64_t seed) {
  noise.validate();
  check_grid(times, reps);
  std::vector<std::size_t> bright(times.size(), 0);
  for (std::size_t i = 0; i < times.size(); ++i) {
    Rng rng = make_rng(seed, "relaxation", i);
    for (std::size_t shot = 0; shot < reps; ++shot) {
      bright[i] += static_cast<std::size_t>(run_relaxation_shot(noise, times[i], rng));
    }
  }
  return summarize(times, bright, reps);
}

}  // namespace ionmem
