#include "ionmem/pulses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ionmem/crystal.hpp"

namespace ionmem {

using constants::kPi;

Pulse::Pulse(double theta_, double phi_) : theta(theta_), phi(phi_) {
  if (theta < 0.0) {
    theta = -theta;
    phi += kPi;
  }
}

PulseSequence::PulseSequence(std::vector<Pulse> pulses) : pulses_(std::move(pulses)) {
  if (pulses_.empty()) throw std::invalid_argument("pulse sequence must be non-empty");
}

double Unitary2::unitarity_error() const {
  return (m_.adjoint() * m_ - Eigen::Matrix2cd::Identity()).norm();
}

RabiProfile::RabiProfile(double omega0_, double gradient_per_site_)
    : omega0(omega0_), gradient_per_site(gradient_per_site_) {
  if (!(omega0 > 0.0)) throw std::invalid_argument("omega0 must be > 0");
  if (!(std::abs(gradient_per_site) < 1.0)) throw std::invalid_argument("|gradient_per_site| must be < 1");
}

double RabiProfile::omega_at(double site) const {
  return omega0 * std::pow(1.0 + gradient_per_site, site);
}

Unitary2 rotation_unitary(const Pulse& p) {
  const double c = std::cos(0.5 * p.theta);
  const double s = std::sin(0.5 * p.theta);
  const Complex minus_i(0.0, -1.0);
  Eigen::Matrix2cd m;
  m << c, minus_i * std::polar(1.0, -p.phi) * s,
       minus_i * std::polar(1.0, p.phi) * s, c;
  return Unitary2(m);
}

double sk1_phase(double theta) {
  if (!(theta > 0.0) || theta > 4.0 * kPi) throw std::domain_error("SK1 phase undefined");
  return std::acos(-theta / (4.0 * kPi));
}

PulseSequence sk1_sequence(const Pulse& target) {
  const double phi1 = sk1_phase(target.theta);
  return PulseSequence({target,
                        Pulse(2.0 * kPi, target.phi - phi1),
                        Pulse(2.0 * kPi, target.phi + phi1)});
}

Unitary2 sequence_unitary(const PulseSequence& seq, double epsilon) {
  if (!(epsilon > -1.0)) throw std::invalid_argument("epsilon must be > -1");
  Unitary2 u;
  for (const Pulse& p : seq.pulses()) {
    u = rotation_unitary(Pulse(p.theta * (1.0 + epsilon), p.phi)) * u;
  }
  return u;
}

double transfer_fidelity(const Unitary2& u, const Pulse& target, const QubitState& initial) {
  const QubitState want = rotation_unitary(target) * initial;
  const QubitState got = u * initial;
  const double f = std::norm(want.dot(got));
  return std::clamp(f, 0.0, 1.0);
}

double phase_insensitive_overlap(const Unitary2& u, const Unitary2& v) {
  return std::abs((u.matrix().adjoint() * v.matrix()).trace()) / 2.0;
}

double average_gate_fidelity(const Unitary2& u, const Unitary2& target) {
  const double tr = std::abs((target.matrix().adjoint() * u.matrix()).trace());
  return (tr * tr + 2.0) / 6.0;
}

double rabi_population(const RabiProfile& profile, double site, double duration) {
  if (duration < 0.0) throw std::invalid_argument("duration must be >= 0");
  const double s = std::sin(0.5 * profile.omega_at(site) * duration);
  return s * s;
}

double rabi_gradient_from_endpoints(double omega0, double omega_far, double sites) {
  if (!(omega0 > 0.0) || !(omega_far > 0.0) || !(sites > 0.0)) {
    throw std::invalid_argument("endpoints must be positive");
  }
  return std::pow(omega_far / omega0, 1.0 / sites) - 1.0;
}

std::vector<SweepPoint> area_error_sweep(const Pulse& target, double eps_min, double eps_max,
                                         double eps_step) {
  if (!(eps_step > 0.0) || eps_max < eps_min) throw std::invalid_argument("bad epsilon grid");
  const PulseSequence single({target});
  const PulseSequence composite = sk1_sequence(target);
  const auto count = static_cast<std::size_t>(std::floor((eps_max - eps_min) / eps_step + 1e-9)) + 1;
  std::vector<SweepPoint> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    // Index-based grid so the endpoints are hit without accumulated drift.
    const double eps = eps_min + static_cast<double>(k) * eps_step;
    out.push_back({eps, transfer_fidelity(sequence_unitary(single, eps), target, kGround),
                   transfer_fidelity(sequence_unitary(composite, eps), target, kGround)});
  }
  return out;
}

}  // namespace ionmem
