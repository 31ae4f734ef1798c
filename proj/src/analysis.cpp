#include "ionmem/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ionmem {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTwoPi = 6.283185307179586476925;

void check_inputs(std::span<const double> t, std::span<const double> y, std::span<const double> sigma,
                  std::size_t min_points) {
  if (t.size() != y.size() || t.size() != sigma.size()) {
    throw std::invalid_argument("times, values and sigmas must have equal length");
  }
  if (t.size() < min_points) throw std::invalid_argument("underdetermined");
  for (double s : sigma) {
    if (!(s > 0.0)) throw std::invalid_argument("sigmas must be > 0");
  }
}

double chi_square(const CurveModel& model, std::span<const double> t, std::span<const double> y,
                  std::span<const double> sigma, const Eigen::VectorXd& p) {
  double c = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double r = (y[i] - model.value(t[i], p)) / sigma[i];
    c += r * r;
  }
  return c;
}

Eigen::VectorXd clamp_to_box(const CurveModel& model, Eigen::VectorXd p) {
  return p.cwiseMax(model.lower).cwiseMin(model.upper);
}

// Indices sorted by time.
std::vector<std::size_t> time_order(std::span<const double> t) {
  std::vector<std::size_t> idx(t.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return t[a] < t[b]; });
  return idx;
}

double time_span(std::span<const double> t) {
  const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
  return *hi - *lo;
}

}  // namespace

double FitResult::value(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return params[i];
  }
  throw std::out_of_range("no fit parameter named " + name);
}

double FitResult::error(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return standard_errors[i];
  }
  throw std::out_of_range("no fit parameter named " + name);
}

FitResult levenberg_marquardt(const CurveModel& model, std::span<const double> t, std::span<const double> y,
                              std::span<const double> sigma, Eigen::VectorXd p0,
                              const LevenbergMarquardtOptions& options) {
  const auto m = static_cast<Eigen::Index>(t.size());
  const Eigen::Index np = p0.size();

  auto jacobian = [&](const Eigen::VectorXd& p, Eigen::MatrixXd& jac, Eigen::VectorXd& res) {
    jac.resize(m, np);
    res.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto k = static_cast<std::size_t>(i);
      res[i] = (y[k] - model.value(t[k], p)) / sigma[k];
      jac.row(i) = -model.gradient(t[k], p).transpose() / sigma[k];
    }
  };

  Eigen::VectorXd p = clamp_to_box(model, std::move(p0));
  Eigen::MatrixXd jac;
  Eigen::VectorXd res;
  jacobian(p, jac, res);
  double cost = res.squaredNorm();

  FitResult out;
  out.names = model.names;
  double lambda = 1e-3;
  std::size_t iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * res;
    const double dmax = std::max(jtj.diagonal().maxCoeff(), std::numeric_limits<double>::min());
    const Eigen::VectorXd damping = jtj.diagonal().cwiseMax(1e-15 * dmax);

    bool improved = false;
    while (lambda < 1e20) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * damping;
      const Eigen::VectorXd delta = a.ldlt().solve(-jtr);
      const Eigen::VectorXd trial = clamp_to_box(model, p + delta);
      const Eigen::VectorXd step = trial - p;
      const double small = options.step_tolerance * (p.norm() + options.step_tolerance);
      const double trial_cost = chi_square(model, t, y, sigma, trial);
      if (std::isfinite(trial_cost) && trial_cost <= cost) {
        p = trial;
        const bool tiny = step.norm() <= small;
        jacobian(p, jac, res);
        cost = res.squaredNorm();
        lambda = std::max(lambda * 0.1, 1e-12);
        improved = true;
        if (tiny || cost == 0.0) out.converged = true;
        break;
      }
      if (step.norm() <= small) {
        // No descent left at the resolution of the step tolerance.
        out.converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (out.converged) break;
    if (!improved) break;
  }
  out.iterations = iter;
  if (!out.converged) {
    out.message = iter >= options.max_iterations ? "iteration limit reached" : "damping limit reached";
  }

  out.params.assign(p.data(), p.data() + np);
  out.residual_norm = std::sqrt(cost);

  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  const Eigen::VectorXd diag = jtj.diagonal();
  const double dmax = diag.maxCoeff();
  bool singular = !(dmax > 0.0);
  if (!singular) {
    for (Eigen::Index j = 0; j < np; ++j) {
      if (!(diag[j] > 1e-20 * dmax)) singular = true;
    }
  }
  if (!singular) {
    const Eigen::VectorXd scale = diag.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd corr = scale.asDiagonal() * jtj * scale.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
    if (!(eig.eigenvalues().minCoeff() > 1e-12 * eig.eigenvalues().maxCoeff())) singular = true;
    if (!singular) {
      const Eigen::MatrixXd cov = scale.asDiagonal() * corr.inverse() * scale.asDiagonal();
      for (Eigen::Index j = 0; j < np; ++j) out.standard_errors.push_back(std::sqrt(std::max(cov(j, j), 0.0)));
    }
  }
  if (singular) {
    out.identifiable = false;
    out.standard_errors.assign(static_cast<std::size_t>(np), kInf);
    out.message = out.message.empty() ? "parameters not identifiable" : out.message + "; parameters not identifiable";
  }

  for (Eigen::Index j = 0; j < np; ++j) {
    const double tol = 1e-9 * (std::abs(p[j]) + 1e-300);
    if ((std::isfinite(model.lower[j]) && p[j] - model.lower[j] <= tol) ||
        (std::isfinite(model.upper[j]) && model.upper[j] - p[j] <= tol)) {
      out.at_bound = true;
      out.message = out.message.empty() ? model.names[static_cast<std::size_t>(j)] + " at bound"
                                        : out.message + "; " + model.names[static_cast<std::size_t>(j)] + " at bound";
    }
  }
  return out;
}

CurveModel exponential_offset_model() {
  CurveModel m;
  m.names = {"A", "B", "T"};
  m.value = [](double t, const Eigen::VectorXd& p) { return p[0] + p[1] * std::exp(-t / p[2]); };
  m.gradient = [](double t, const Eigen::VectorXd& p) {
    const double e = std::exp(-t / p[2]);
    return Eigen::Vector3d(1.0, e, p[1] * e * t / (p[2] * p[2])).eval();
  };
  m.lower = Eigen::Vector3d(-kInf, -kInf, 0.0);
  m.upper = Eigen::Vector3d(kInf, kInf, kInf);
  return m;
}

CurveModel pure_exponential_model() {
  CurveModel m;
  m.names = {"C", "tau"};
  m.value = [](double t, const Eigen::VectorXd& p) { return p[0] * std::exp(-t / p[1]); };
  m.gradient = [](double t, const Eigen::VectorXd& p) {
    const double e = std::exp(-t / p[1]);
    return Eigen::Vector2d(e, p[0] * e * t / (p[1] * p[1])).eval();
  };
  m.lower = Eigen::Vector2d(-kInf, 0.0);
  m.upper = Eigen::Vector2d(kInf, kInf);
  return m;
}

CurveModel rabi_model() {
  CurveModel m;
  m.names = {"Omega", "amplitude", "offset"};
  m.value = [](double t, const Eigen::VectorXd& p) {
    const double s = std::sin(0.5 * p[0] * t);
    return p[2] + p[1] * s * s;
  };
  m.gradient = [](double t, const Eigen::VectorXd& p) {
    const double s = std::sin(0.5 * p[0] * t);
    return Eigen::Vector3d(0.5 * p[1] * t * std::sin(p[0] * t), s * s, 1.0).eval();
  };
  m.lower = Eigen::Vector3d(0.0, -kInf, -kInf);
  m.upper = Eigen::Vector3d(kInf, kInf, kInf);
  return m;
}

FitResult fit_exponential_offset(std::span<const double> t, std::span<const double> y,
                                 std::span<const double> sigma) {
  check_inputs(t, y, sigma, 4);
  const auto order = time_order(t);
  const std::size_t n = order.size();
  const std::size_t quarter = std::max<std::size_t>(1, n / 4);
  double head = 0.0, tail = 0.0;
  for (std::size_t k = 0; k < quarter; ++k) {
    head += y[order[k]];
    tail += y[order[n - 1 - k]];
  }
  head /= static_cast<double>(quarter);
  tail /= static_cast<double>(quarter);

  const double span = time_span(t);
  const double a0 = tail;
  const double b0 = head - tail;
  double t0 = span / 3.0;
  // Log-slope of (y - A) over the points still well above the tail.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int used = 0;
  if (b0 != 0.0) {
    for (std::size_t i : order) {
      const double u = (y[i] - a0) / b0;
      if (u > 0.05) {
        const double l = std::log(u);
        sx += t[i];
        sy += l;
        sxx += t[i] * t[i];
        sxy += t[i] * l;
        ++used;
      }
    }
  }
  if (used >= 2) {
    const double slope = (used * sxy - sx * sy) / (used * sxx - sx * sx);
    if (slope < 0.0 && std::isfinite(slope)) t0 = -1.0 / slope;
  }

  CurveModel model = exponential_offset_model();
  model.lower[2] = 1e-4 * span;
  model.upper[2] = 1e4 * span;
  return levenberg_marquardt(model, t, y, sigma, Eigen::Vector3d(a0, b0, std::clamp(t0, model.lower[2], model.upper[2])));
}

FitResult fit_pure_exponential(std::span<const double> t, std::span<const double> y,
                               std::span<const double> sigma) {
  check_inputs(t, y, sigma, 2);
  const double span = time_span(t);
  if (!(span > 0.0)) throw std::invalid_argument("underdetermined");

  // Weighted log-linear regression on the positive points: ln y = ln C - t / tau.
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  int used = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (y[i] <= 0.0) continue;
    const double w = (y[i] / sigma[i]) * (y[i] / sigma[i]);
    const double l = std::log(y[i]);
    sw += w;
    sx += w * t[i];
    sy += w * l;
    sxx += w * t[i] * t[i];
    sxy += w * t[i] * l;
    ++used;
  }
  double c0 = *std::max_element(y.begin(), y.end());
  double tau0 = span / 2.0;
  if (used >= 2) {
    const double det = sw * sxx - sx * sx;
    const double slope = (sw * sxy - sx * sy) / det;
    const double intercept = (sy - slope * sx) / sw;
    if (std::isfinite(slope) && slope < 0.0) {
      tau0 = -1.0 / slope;
      c0 = std::exp(intercept);
    }
  }
  CurveModel model = pure_exponential_model();
  model.lower[1] = 1e-4 * span;
  model.upper[1] = 1e4 * span;
  return levenberg_marquardt(model, t, y, sigma, Eigen::Vector2d(c0, std::clamp(tau0, model.lower[1], model.upper[1])));
}

double dominant_angular_frequency(std::span<const double> t, std::span<const double> y) {
  const std::size_t n = t.size();
  if (n < 3) return 0.0;
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double ymax = *std::max_element(y.begin(), y.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
  if (!(var > 1e-24 * (1.0 + ymax * ymax))) return 0.0;

  const auto order = time_order(t);
  std::vector<double> gaps;
  for (std::size_t k = 1; k < n; ++k) gaps.push_back(t[order[k]] - t[order[k - 1]]);
  std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2), gaps.end());
  const double median_dt = gaps[gaps.size() / 2];
  const double span = time_span(t);
  if (!(median_dt > 0.0) || !(span > 0.0)) return 0.0;

  const double f_lo = 0.5 / span;
  const double f_hi = 0.5 / median_dt;
  const double df = 0.1 / span;
  const auto bins = static_cast<std::size_t>((f_hi - f_lo) / df) + 1;
  std::vector<double> power(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    const double f = f_lo + df * static_cast<double>(b);
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t i = 0; i < n; ++i) acc += (y[i] - mean) * std::polar(1.0, -kTwoPi * f * t[i]);
    power[b] = std::norm(acc) / (static_cast<double>(n) * var);
  }
  const auto peak = static_cast<std::size_t>(std::max_element(power.begin(), power.end()) - power.begin());
  // Normalised power of white noise is ~Exp(1); demand a false-alarm level
  // far below one over the number of independent frequencies.
  const double independent = std::max(1.0, static_cast<double>(bins) / 10.0);
  if (power[peak] < std::log(independent) + 10.0) return 0.0;

  double f_peak = f_lo + df * static_cast<double>(peak);
  if (peak > 0 && peak + 1 < bins) {
    const double a = power[peak - 1], b = power[peak], c = power[peak + 1];
    const double denom = a - 2.0 * b + c;
    if (denom < 0.0) f_peak += 0.5 * df * (a - c) / denom;
  }
  return kTwoPi * f_peak;
}

FitResult fit_rabi(std::span<const double> t, std::span<const double> y, std::span<const double> sigma) {
  check_inputs(t, y, sigma, 6);
  const double omega0 = dominant_angular_frequency(t, y);
  if (!(omega0 > 0.0)) throw std::runtime_error("no oscillation detected");
  if (omega0 * time_span(t) < kTwoPi) throw std::runtime_error("no oscillation detected: data span less than one period");
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  return levenberg_marquardt(rabi_model(), t, y, sigma, Eigen::Vector3d(omega0, *hi - *lo, *lo));
}

double binomial_stderr(double p_hat, std::size_t n) {
  if (!(p_hat >= 0.0 && p_hat <= 1.0)) throw std::invalid_argument("p_hat must be in [0, 1]");
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  return std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(n));
}

double binomial_sigma(double p_hat, std::size_t n) {
  const double s = binomial_stderr(p_hat, n);
  if (s > 0.0) return s;
  const double nn = static_cast<double>(n);
  return binomial_stderr((p_hat * nn + 0.5) / (nn + 1.0), n);
}

}  // namespace ionmem
