#pragma once
// Weighted nonlinear least squares for the decay and oscillation models used
// to summarise simulated experiments.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ionmem {

struct FitResult {
  std::vector<std::string> names;
  std::vector<double> params;
  std::vector<double> standard_errors;  // 1 sigma from the linearised covariance
  double residual_norm = 0.0;           // sqrt(chi^2)
  std::size_t iterations = 0;
  bool converged = false;
  bool identifiable = true;  // false if the normal matrix is singular
  bool at_bound = false;     // a parameter ended on its box constraint
  std::string message;

  /// Throws std::out_of_range for unknown names.
  double value(const std::string& name) const;
  double error(const std::string& name) const;
};

/// Residual model: value and parameter gradient at one abscissa.
struct CurveModel {
  std::vector<std::string> names;
  std::function<double(double t, const Eigen::VectorXd& p)> value;
  std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& p)> gradient;
  Eigen::VectorXd lower;  // box constraints, may be +-inf
  Eigen::VectorXd upper;
};

struct LevenbergMarquardtOptions {
  std::size_t max_iterations = 500;
  double step_tolerance = 1e-10;  // relative
};

/// Minimises sum_i ((y_i - f(t_i; p)) / sigma_i)^2 from p0.
FitResult levenberg_marquardt(const CurveModel& model, std::span<const double> t, std::span<const double> y,
                              std::span<const double> sigma, Eigen::VectorXd p0,
                              const LevenbergMarquardtOptions& options = {});

CurveModel exponential_offset_model();  // A + B exp(-t / T)
CurveModel pure_exponential_model();    // C exp(-t / tau)
CurveModel rabi_model();                // offset + amplitude sin^2(Omega t / 2)

/// F = A + B exp(-t/T). Needs >= 4 points and positive sigmas.
FitResult fit_exponential_offset(std::span<const double> t, std::span<const double> y,
                                 std::span<const double> sigma);

/// C exp(-t/tau). Needs >= 2 points.
FitResult fit_pure_exponential(std::span<const double> t, std::span<const double> y,
                               std::span<const double> sigma);

/// offset + amplitude sin^2(Omega t / 2), seeded from the periodogram peak.
/// Throws std::runtime_error("no oscillation detected") when there is no peak.
FitResult fit_rabi(std::span<const double> t, std::span<const double> y, std::span<const double> sigma);

/// Angular frequency of the strongest periodogram peak of the mean-removed data,
/// or 0 if no peak clears the noise floor.
double dominant_angular_frequency(std::span<const double> t, std::span<const double> y);

double binomial_stderr(double p_hat, std::size_t n);

/// Error bar for fitting binomial estimates: binomial_stderr, except that
/// p_hat in {0, 1} uses (k + 1/2) / (n + 1) so the weight stays finite.
double binomial_sigma(double p_hat, std::size_t n);

}  // namespace ionmem
