#pragma once
/**
 * Coulomb crystals of identical ions in an anisotropic static trap.
 *
 * The transverse confinement is harmonic (omega_x, omega_y). The axial
 * confinement is either harmonic or an even polynomial in z, so that long
 * crystals with a flattened density can be modelled.
 *
 * Public functions take and return SI quantities. Internally all work is
 * done in the scaled units
 *     l  = (q^2 / (4 pi eps0 m w_ref^2))^(1/3)
 *     E0 = m w_ref^2 l^2
 * in which the mutual Coulomb energy of two ions is simply 1/r.
 */

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace ionmem {

namespace constants {
inline constexpr double kEpsilon0 = 8.8541878128e-12;       // F/m
inline constexpr double kElementaryCharge = 1.602176634e-19;  // C
inline constexpr double kAtomicMassUnit = 1.66053906660e-27;  // kg
inline constexpr double kPi = 3.14159265358979323846;
}  // namespace constants

/// N x 3 ion coordinates, one row per ion.
using Positions = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

struct HarmonicAxial {
  double omega_z;  // rad/s
};

/// V(z) = sum_k coefficients[k] * z^(2k+2); coefficients in J/m^(2k+2).
struct PolynomialAxial {
  std::vector<double> coefficients;
};

using AxialModel = std::variant<HarmonicAxial, PolynomialAxial>;

class TrapConfig {
 public:
  /// Throws std::invalid_argument if the trap does not confine.
  /// reference_frequency defaults to omega_z (harmonic) or min(omega_x, omega_y).
  TrapConfig(double omega_x, double omega_y, AxialModel axial, double mass, double charge,
             std::optional<double> reference_frequency = std::nullopt);

  double omega_x() const { return omega_x_; }
  double omega_y() const { return omega_y_; }
  const AxialModel& axial() const { return axial_; }
  double mass() const { return mass_; }
  double charge() const { return charge_; }

  double reference_frequency() const { return omega_ref_; }
  double length_scale() const { return length_; }
  double energy_scale() const { return mass_ * omega_ref_ * omega_ref_ * length_ * length_; }
  double force_scale() const { return energy_scale() / length_; }

  /// Even-power coefficients c2, c4, ... in SI. Harmonic(w) gives {m w^2 / 2}.
  std::vector<double> axial_coefficients() const;
  /// Same coefficients in scaled units.
  const std::vector<double>& scaled_axial_coefficients() const { return scaled_axial_; }

  /// Squared transverse frequencies in units of w_ref^2.
  double scaled_kx() const { return (omega_x_ / omega_ref_) * (omega_x_ / omega_ref_); }
  double scaled_ky() const { return (omega_y_ / omega_ref_) * (omega_y_ / omega_ref_); }

 private:
  double omega_x_;
  double omega_y_;
  AxialModel axial_;
  double mass_;
  double charge_;
  double omega_ref_;
  double length_;
  std::vector<double> scaled_axial_;
};

struct CrystalConfiguration {
  Positions positions;        // m
  double energy = 0.0;         // J
  double gradient_norm = 0.0;  // J/m
  std::size_t iterations = 0;
};

struct ModeSpectrum {
  Eigen::VectorXd frequencies;  // rad/s, ascending
  Eigen::MatrixXd eigenvectors;  // columns, matching frequencies
};

enum class StructureKind { Linear, Zigzag, Other };

struct StructureClass {
  StructureKind kind = StructureKind::Other;
  double transverse_extent = 0.0;  // m
};

std::string to_string(StructureKind kind);

class DegenerateConfiguration : public std::runtime_error {
 public:
  DegenerateConfiguration() : std::runtime_error("degenerate configuration") {}
};

class UnstableConfiguration : public std::runtime_error {
 public:
  explicit UnstableConfiguration(double lowest_eigenvalue);
  double lowest_eigenvalue() const { return lowest_; }

 private:
  double lowest_;
};

/// Raised when the minimizer hits its iteration cap; carries the best point found.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, CrystalConfiguration best)
      : std::runtime_error(what), best_(std::move(best)) {}
  const CrystalConfiguration& best() const { return best_; }

 private:
  CrystalConfiguration best_;
};

struct SolverOptions {
  double gradient_tolerance = 1e-9;  // scaled units
  std::size_t max_iterations = 100000;
  std::size_t history = 12;          // L-BFGS memory
  double jitter = 1e-3;              // scaled units
};

double total_energy(const TrapConfig& trap, const Positions& positions);
Positions energy_gradient(const TrapConfig& trap, const Positions& positions);
/// 3N x 3N Hessian in J/m^2, coordinates ordered (x0, y0, z0, x1, ...).
Eigen::MatrixXd energy_hessian(const TrapConfig& trap, const Positions& positions);

/// Equally spaced chain sized by a 1D energy scan, plus seeded transverse jitter.
Positions initial_guess(const TrapConfig& trap, std::size_t n, std::uint64_t seed,
                        double jitter = SolverOptions{}.jitter);

CrystalConfiguration solve_equilibrium(const TrapConfig& trap, std::size_t n, std::uint64_t seed,
                                       const std::optional<Positions>& initial = std::nullopt,
                                       const SolverOptions& options = {});

ModeSpectrum normal_modes(const TrapConfig& trap, const CrystalConfiguration& crystal);

/// Default classification tolerance, 1e-4 l.
double default_structure_tolerance(const TrapConfig& trap);

StructureClass classify_structure(const CrystalConfiguration& crystal, double tolerance);

/// max z - min z.
double axial_span(const Positions& positions);

}  // namespace ionmem
