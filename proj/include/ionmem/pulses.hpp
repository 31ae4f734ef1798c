#pragma once
// Single-qubit rotations, SK1 composite pulses and Rabi nonuniformity.

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace ionmem {

using Complex = std::complex<double>;
using QubitState = Eigen::Vector2cd;

/// Rotation by theta about the equatorial axis at angle phi.
/// Negative angles are folded into theta >= 0 by shifting phi by pi.
struct Pulse {
  double theta = 0.0;
  double phi = 0.0;

  Pulse() = default;
  Pulse(double theta_, double phi_);
};

class PulseSequence {
 public:
  /// Pulses are applied in order, first element first. Throws on an empty list.
  explicit PulseSequence(std::vector<Pulse> pulses);

  const std::vector<Pulse>& pulses() const { return pulses_; }
  std::size_t size() const { return pulses_.size(); }

 private:
  std::vector<Pulse> pulses_;
};

class Unitary2 {
 public:
  Unitary2() : m_(Eigen::Matrix2cd::Identity()) {}
  explicit Unitary2(const Eigen::Matrix2cd& m) : m_(m) {}

  const Eigen::Matrix2cd& matrix() const { return m_; }
  Complex operator()(int row, int col) const { return m_(row, col); }

  /// Composition: (a * b) applies b first.
  friend Unitary2 operator*(const Unitary2& a, const Unitary2& b) { return Unitary2(a.m_ * b.m_); }
  QubitState operator*(const QubitState& psi) const { return m_ * psi; }

  Unitary2 adjoint() const { return Unitary2(m_.adjoint()); }
  /// ||U^dagger U - I||_F
  double unitarity_error() const;

 private:
  Eigen::Matrix2cd m_;
};

struct RabiProfile {
  double omega0;             // rad/s at the reference ion
  double gradient_per_site;  // fractional change per ion spacing

  RabiProfile(double omega0_, double gradient_per_site_);
  /// omega0 * (1 + gradient)^site
  double omega_at(double site) const;
};

inline const QubitState kGround{Complex(1.0, 0.0), Complex(0.0, 0.0)};
inline const QubitState kExcited{Complex(0.0, 0.0), Complex(1.0, 0.0)};

Unitary2 rotation_unitary(const Pulse& p);

/// Target pulse followed by 2pi pulses at phi - phi1 and phi + phi1,
/// phi1 = arccos(-theta / 4pi). Throws std::domain_error for theta outside (0, 4pi].
PulseSequence sk1_sequence(const Pulse& target);
double sk1_phase(double theta);

/// Ordered product with every rotation angle scaled by (1 + epsilon).
Unitary2 sequence_unitary(const PulseSequence& seq, double epsilon);

/// |<target psi | U psi>|^2 with |target psi> = R(target)|psi>.
double transfer_fidelity(const Unitary2& u, const Pulse& target, const QubitState& initial);

/// |Tr(U^dagger V)| / 2; 1 iff equal up to global phase.
double phase_insensitive_overlap(const Unitary2& u, const Unitary2& v);

/// Average gate fidelity (|Tr(U^dagger V)|^2 + 2) / 6 against the target rotation.
double average_gate_fidelity(const Unitary2& u, const Unitary2& target);

/// Bright population sin^2(Omega_site t / 2) after a resonant drive of the given duration.
double rabi_population(const RabiProfile& profile, double site, double duration);

/// Per-site gradient reproducing omega_far = omega0 (1 + g)^sites.
double rabi_gradient_from_endpoints(double omega0, double omega_far, double sites);

struct SweepPoint {
  double epsilon;
  double single_pulse_fidelity;
  double sk1_fidelity;
};

/// Fidelity of the bare and SK1-corrected target pulse from |0> over an area-error grid.
std::vector<SweepPoint> area_error_sweep(const Pulse& target, double eps_min, double eps_max,
                                         double eps_step);

}  // namespace ionmem
