#include "ionmem/crystal.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <sstream>

#include "ionmem/rng.hpp"

namespace ionmem {

namespace {

using Vec = Eigen::VectorXd;

double polynomial_energy(const std::vector<double>& c, double z) {
  const double z2 = z * z;
  double power = z2;
  double v = 0.0;
  for (double ck : c) {
    v += ck * power;
    power *= z2;
  }
  return v;
}

double polynomial_slope(const std::vector<double>& c, double z) {
  const double z2 = z * z;
  double power = z;  // z^(2k+1)
  double v = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) {
    v += static_cast<double>(2 * k + 2) * c[k] * power;
    power *= z2;
  }
  return v;
}

double polynomial_curvature(const std::vector<double>& c, double z) {
  const double z2 = z * z;
  double power = 1.0;  // z^(2k)
  double v = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) {
    v += static_cast<double>((2 * k + 2) * (2 * k + 1)) * c[k] * power;
    power *= z2;
  }
  return v;
}

// Everything below works on flattened scaled coordinates (x0, y0, z0, x1, ...).

class ScaledPotential {
 public:
  explicit ScaledPotential(const TrapConfig& trap)
      : kx_(trap.scaled_kx()), ky_(trap.scaled_ky()), axial_(trap.scaled_axial_coefficients()) {}

  // Returns +inf for coincident ions.
  double energy(const Vec& r) const {
    const Eigen::Index n = r.size() / 3;
    double e = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double x = r[3 * i], y = r[3 * i + 1], z = r[3 * i + 2];
      e += 0.5 * (kx_ * x * x + ky_ * y * y) + polynomial_energy(axial_, z);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double dx = r[3 * i] - r[3 * j];
        const double dy = r[3 * i + 1] - r[3 * j + 1];
        const double dz = r[3 * i + 2] - r[3 * j + 2];
        const double d2 = dx * dx + dy * dy + dz * dz;
        if (d2 == 0.0) return std::numeric_limits<double>::infinity();
        e += 1.0 / std::sqrt(d2);
      }
    }
    return e;
  }

  // Returns false for coincident ions.
  bool gradient(const Vec& r, Vec& g) const {
    const Eigen::Index n = r.size() / 3;
    g.resize(r.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      g[3 * i] = kx_ * r[3 * i];
      g[3 * i + 1] = ky_ * r[3 * i + 1];
      g[3 * i + 2] = polynomial_slope(axial_, r[3 * i + 2]);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double dx = r[3 * i] - r[3 * j];
        const double dy = r[3 * i + 1] - r[3 * j + 1];
        const double dz = r[3 * i + 2] - r[3 * j + 2];
        const double d2 = dx * dx + dy * dy + dz * dz;
        if (d2 == 0.0) return false;
        const double inv3 = 1.0 / (d2 * std::sqrt(d2));
        g[3 * i] -= dx * inv3;
        g[3 * i + 1] -= dy * inv3;
        g[3 * i + 2] -= dz * inv3;
        g[3 * j] += dx * inv3;
        g[3 * j + 1] += dy * inv3;
        g[3 * j + 2] += dz * inv3;
      }
    }
    return true;
  }

  Eigen::MatrixXd hessian(const Vec& r) const {
    const Eigen::Index n = r.size() / 3;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(3 * n, 3 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      h(3 * i, 3 * i) = kx_;
      h(3 * i + 1, 3 * i + 1) = ky_;
      h(3 * i + 2, 3 * i + 2) = polynomial_curvature(axial_, r[3 * i + 2]);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const Eigen::Vector3d d = r.segment<3>(3 * i) - r.segment<3>(3 * j);
        const double d2 = d.squaredNorm();
        if (d2 == 0.0) throw DegenerateConfiguration();
        const double inv = 1.0 / std::sqrt(d2);
        const Eigen::Matrix3d block =
            (3.0 * d * d.transpose() / d2 - Eigen::Matrix3d::Identity()) * (inv * inv * inv);
        h.block<3, 3>(3 * i, 3 * i) += block;
        h.block<3, 3>(3 * j, 3 * j) += block;
        h.block<3, 3>(3 * i, 3 * j) -= block;
        h.block<3, 3>(3 * j, 3 * i) -= block;
      }
    }
    return h;
  }

  // Energy of N ions equally spaced on [-a, a].
  double chain_energy(std::size_t n, double half_length) const {
    if (n == 1) return 0.0;
    const double spacing = 2.0 * half_length / static_cast<double>(n - 1);
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      e += polynomial_energy(axial_, -half_length + spacing * static_cast<double>(i));
    }
    for (std::size_t d = 1; d < n; ++d) {
      e += static_cast<double>(n - d) / (spacing * static_cast<double>(d));
    }
    return e;
  }

 private:
  double kx_;
  double ky_;
  std::vector<double> axial_;
};

Vec to_scaled(const TrapConfig& trap, const Positions& positions) {
  Vec r(positions.size());
  Eigen::Map<Positions>(r.data(), positions.rows(), 3) = positions / trap.length_scale();
  return r;
}

Positions to_si(const TrapConfig& trap, const Vec& r) {
  return Eigen::Map<const Positions>(r.data(), r.size() / 3, 3) * trap.length_scale();
}

// Golden-section minimum of a unimodal function on [lo, hi].
template <typename F>
double golden_section(F f, double lo, double hi) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200 && (b - a) > 1e-10 * (1.0 + std::abs(b)); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// L-BFGS search direction via the two-loop recursion.
Vec lbfgs_direction(const Vec& g, const std::deque<Vec>& s, const std::deque<Vec>& y,
                    const std::deque<double>& rho) {
  Vec q = g;
  std::vector<double> alpha(s.size());
  for (std::size_t k = s.size(); k-- > 0;) {
    alpha[k] = rho[k] * s[k].dot(q);
    q -= alpha[k] * y[k];
  }
  if (!s.empty()) {
    q *= s.back().dot(y.back()) / y.back().squaredNorm();
  }
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double beta = rho[k] * y[k].dot(q);
    q += (alpha[k] - beta) * s[k];
  }
  return -q;
}

CrystalConfiguration make_configuration(const TrapConfig& trap, const ScaledPotential& potential,
                                        const Vec& r, const Vec& g, std::size_t iterations) {
  CrystalConfiguration out;
  out.positions = to_si(trap, r);
  out.energy = potential.energy(r) * trap.energy_scale();
  out.gradient_norm = g.norm() * trap.force_scale();
  out.iterations = iterations;
  return out;
}

}  // namespace

TrapConfig::TrapConfig(double omega_x, double omega_y, AxialModel axial, double mass,
                       double charge, std::optional<double> reference_frequency)
    : omega_x_(omega_x), omega_y_(omega_y), axial_(std::move(axial)), mass_(mass), charge_(charge) {
  if (!(omega_x_ > 0.0)) throw std::invalid_argument("omega_x must be > 0");
  if (!(omega_y_ > 0.0)) throw std::invalid_argument("omega_y must be > 0");
  if (!(mass_ > 0.0)) throw std::invalid_argument("mass must be > 0");
  if (charge_ == 0.0 || !std::isfinite(charge_)) throw std::invalid_argument("charge must be nonzero");

  if (const auto* h = std::get_if<HarmonicAxial>(&axial_)) {
    if (!(h->omega_z > 0.0)) throw std::invalid_argument("omega_z must be > 0");
  } else {
    const auto& c = std::get<PolynomialAxial>(axial_).coefficients;
    if (c.empty() || !(c.back() > 0.0)) {
      throw std::invalid_argument("axial potential is not confining: highest-order coefficient must be > 0");
    }
    for (double ck : c) {
      if (!std::isfinite(ck)) throw std::invalid_argument("axial coefficients must be finite");
    }
  }

  if (reference_frequency) {
    omega_ref_ = *reference_frequency;
  } else if (const auto* h = std::get_if<HarmonicAxial>(&axial_)) {
    omega_ref_ = h->omega_z;
  } else {
    omega_ref_ = std::min(omega_x_, omega_y_);
  }
  if (!(omega_ref_ > 0.0)) throw std::invalid_argument("reference_frequency must be > 0");

  const double coulomb = charge_ * charge_ / (4.0 * constants::kPi * constants::kEpsilon0);
  length_ = std::cbrt(coulomb / (mass_ * omega_ref_ * omega_ref_));

  const auto si = axial_coefficients();
  scaled_axial_.resize(si.size());
  double lk = length_ * length_;
  for (std::size_t k = 0; k < si.size(); ++k) {
    scaled_axial_[k] = si[k] * lk / energy_scale();
    lk *= length_ * length_;
  }
}

std::vector<double> TrapConfig::axial_coefficients() const {
  if (const auto* h = std::get_if<HarmonicAxial>(&axial_)) {
    return {0.5 * mass_ * h->omega_z * h->omega_z};
  }
  return std::get<PolynomialAxial>(axial_).coefficients;
}

std::string to_string(StructureKind kind) {
  switch (kind) {
    case StructureKind::Linear:
      return "Linear";
    case StructureKind::Zigzag:
      return "Zigzag";
    case StructureKind::Other:
      break;
  }
  return "Other";
}

UnstableConfiguration::UnstableConfiguration(double lowest_eigenvalue)
    : std::runtime_error("unstable configuration"), lowest_(lowest_eigenvalue) {}

double total_energy(const TrapConfig& trap, const Positions& positions) {
  if (positions.rows() < 1) throw std::invalid_argument("need at least one ion");
  const double e = ScaledPotential(trap).energy(to_scaled(trap, positions));
  if (!std::isfinite(e)) throw DegenerateConfiguration();
  return e * trap.energy_scale();
}

Positions energy_gradient(const TrapConfig& trap, const Positions& positions) {
  if (positions.rows() < 1) throw std::invalid_argument("need at least one ion");
  Vec g;
  if (!ScaledPotential(trap).gradient(to_scaled(trap, positions), g)) {
    throw DegenerateConfiguration();
  }
  return Eigen::Map<const Positions>(g.data(), positions.rows(), 3) * trap.force_scale();
}

Eigen::MatrixXd energy_hessian(const TrapConfig& trap, const Positions& positions) {
  const double scale = trap.energy_scale() / (trap.length_scale() * trap.length_scale());
  return ScaledPotential(trap).hessian(to_scaled(trap, positions)) * scale;
}

Positions initial_guess(const TrapConfig& trap, std::size_t n, std::uint64_t seed, double jitter) {
  if (n == 0) throw std::invalid_argument("need at least one ion");
  const ScaledPotential potential(trap);

  double half = 0.0;
  if (n > 1) {
    double hi = static_cast<double>(n);
    while (potential.chain_energy(n, 2.0 * hi) < potential.chain_energy(n, hi)) hi *= 2.0;
    half = golden_section([&](double a) { return potential.chain_energy(n, a); }, 1e-6, 2.0 * hi);
  }

  Rng rng = make_rng(seed, "crystal.initial");
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Positions r(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    r(row, 0) = jitter * unit(rng);
    r(row, 1) = jitter * unit(rng);
    r(row, 2) = n == 1 ? 0.0 : -half + 2.0 * half * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return r * trap.length_scale();
}

namespace {

struct Minimum {
  Vec x;
  Vec g;
  std::size_t iterations = 0;
};

// L-BFGS with backtracking; Newton steps take over if the line search stalls.
Minimum minimize(const ScaledPotential& potential, Vec x, const SolverOptions& options,
                 std::size_t max_iterations) {
  double f = potential.energy(x);
  Vec g;
  if (!std::isfinite(f) || !potential.gradient(x, g)) throw DegenerateConfiguration();

  std::deque<Vec> s_hist, y_hist;
  std::deque<double> rho_hist;
  constexpr double kArmijo = 1e-4;
  constexpr double kMaxDisplacement = 0.25;  // per coordinate per step, scaled units

  std::size_t iter = 0;
  bool stalled = false;
  Vec x_new, g_new;
  while (iter < max_iterations) {
    const double gnorm = g.norm();
    if (gnorm < options.gradient_tolerance) break;

    Vec d = lbfgs_direction(g, s_hist, y_hist, rho_hist);
    double gd = g.dot(d);
    if (!(gd < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -g;
      gd = -gnorm * gnorm;
    }
    double alpha = 1.0;
    const double dmax = d.cwiseAbs().maxCoeff();
    if (dmax > kMaxDisplacement) alpha = kMaxDisplacement / dmax;

    // Close to the minimum energy differences drown in roundoff; there a
    // smaller gradient norm is accepted instead of sufficient decrease.
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f));
    bool accepted = false;
    double f_new = f;
    while (alpha > 1e-20) {
      x_new = x + alpha * d;
      f_new = potential.energy(x_new);
      if (std::isfinite(f_new)) {
        if (f_new <= f + kArmijo * alpha * gd) {
          potential.gradient(x_new, g_new);
          accepted = true;
          break;
        }
        if (std::abs(f_new - f) <= noise && potential.gradient(x_new, g_new) && g_new.norm() < gnorm) {
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    ++iter;

    if (!accepted) {
      if (!s_hist.empty()) {
        s_hist.clear();
        y_hist.clear();
        rho_hist.clear();
        continue;
      }
      stalled = true;
      break;
    }

    Vec s = x_new - x;
    Vec y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-14 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > options.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    x.swap(x_new);
    g.swap(g_new);
    f = f_new;
  }

  if (stalled && g.norm() >= options.gradient_tolerance) {
    for (int k = 0; k < 50 && g.norm() >= options.gradient_tolerance; ++k, ++iter) {
      Eigen::LDLT<Eigen::MatrixXd> ldlt(potential.hessian(x));
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
      x_new = x - ldlt.solve(g);
      if (!potential.gradient(x_new, g_new) || !(g_new.norm() < g.norm())) break;
      x.swap(x_new);
      g.swap(g_new);
    }
  }
  return {std::move(x), std::move(g), iter};
}

}  // namespace

CrystalConfiguration solve_equilibrium(const TrapConfig& trap, std::size_t n, std::uint64_t seed,
                                       const std::optional<Positions>& initial,
                                       const SolverOptions& options) {
  if (n == 0) throw std::invalid_argument("need at least one ion");
  const ScaledPotential potential(trap);

  Minimum result;
  if (initial) {
    if (initial->rows() != static_cast<Eigen::Index>(n)) {
      throw std::invalid_argument("initial configuration has wrong number of ions");
    }
    result = minimize(potential, to_scaled(trap, *initial), options, options.max_iterations);
  } else {
    // Relax the on-axis chain first (transverse gradients vanish there, so it
    // stays on axis). If that chain is a saddle, restart from an alternating
    // offset along the softer transverse axis: random starts tend to freeze in
    // kinked zigzags.
    const Vec jitter = to_scaled(trap, initial_guess(trap, n, seed, options.jitter));
    Vec chain = Vec::Zero(static_cast<Eigen::Index>(3 * n));
    for (std::size_t i = 0; i < n; ++i) chain[static_cast<Eigen::Index>(3 * i + 2)] = jitter[static_cast<Eigen::Index>(3 * i + 2)];
    Minimum line = minimize(potential, chain, options, options.max_iterations);

    Vec start = line.x;
    if (n > 1) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(potential.hessian(line.x), Eigen::EigenvaluesOnly);
      if (eig.info() == Eigen::Success && eig.eigenvalues()[0] < 0.0) {
        const Eigen::Index axis = trap.scaled_kx() < trap.scaled_ky() ? 0 : 1;
        Rng rng = make_rng(seed, "crystal.soft-mode");
        double sign = std::bernoulli_distribution(0.5)(rng) ? 0.05 : -0.05;
        for (std::size_t i = 0; i < n; ++i, sign = -sign) start[static_cast<Eigen::Index>(3 * i) + axis] = sign;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      start[static_cast<Eigen::Index>(3 * i)] += jitter[static_cast<Eigen::Index>(3 * i)];
      start[static_cast<Eigen::Index>(3 * i + 1)] += jitter[static_cast<Eigen::Index>(3 * i + 1)];
    }
    const std::size_t remaining = options.max_iterations - std::min(options.max_iterations, line.iterations);
    result = minimize(potential, start, options, remaining);
    result.iterations += line.iterations;
  }

  auto out = make_configuration(trap, potential, result.x, result.g, result.iterations);
  if (!(result.g.norm() < options.gradient_tolerance)) {
    std::ostringstream msg;
    msg << "equilibrium solver did not converge after " << result.iterations
        << " iterations (scaled gradient norm " << result.g.norm() << ")";
    throw ConvergenceError(msg.str(), std::move(out));
  }
  return out;
}

ModeSpectrum normal_modes(const TrapConfig& trap, const CrystalConfiguration& crystal) {
  const Eigen::MatrixXd h = ScaledPotential(trap).hessian(to_scaled(trap, crystal.positions));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
  if (eig.info() != Eigen::Success) throw std::runtime_error("Hessian eigendecomposition failed");
  const Eigen::VectorXd& lambda = eig.eigenvalues();  // ascending
  const double scale = std::max(std::abs(lambda.maxCoeff()), std::abs(lambda.minCoeff()));
  if (lambda.minCoeff() < -1e-8 * scale) throw UnstableConfiguration(lambda.minCoeff());

  ModeSpectrum out;
  out.frequencies = lambda.cwiseMax(0.0).cwiseSqrt() * trap.reference_frequency();
  out.eigenvectors = eig.eigenvectors();
  return out;
}

double default_structure_tolerance(const TrapConfig& trap) { return 1e-4 * trap.length_scale(); }

StructureClass classify_structure(const CrystalConfiguration& crystal, double tolerance) {
  const Positions& p = crystal.positions;
  const Eigen::Index n = p.rows();
  StructureClass out;
  for (Eigen::Index i = 0; i < n; ++i) {
    out.transverse_extent = std::max(out.transverse_extent, std::hypot(p(i, 0), p(i, 1)));
  }
  if (out.transverse_extent < tolerance) {
    out.kind = StructureKind::Linear;
    return out;
  }

  // Principal transverse plane from the second-moment matrix of (x, y).
  Eigen::Matrix2d moment = Eigen::Matrix2d::Zero();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector2d t(p(i, 0), p(i, 1));
    moment += t * t.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(moment);
  const Eigen::Vector2d major = eig.eigenvectors().col(1);
  const Eigen::Vector2d minor = eig.eigenvectors().col(0);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return p(a, 2) < p(b, 2); });

  int previous_sign = 0;
  int displaced = 0;
  for (Eigen::Index i : order) {
    const Eigen::Vector2d t(p(i, 0), p(i, 1));
    if (std::abs(t.dot(minor)) >= tolerance) {
      out.kind = StructureKind::Other;
      return out;
    }
    const double d = t.dot(major);
    if (std::abs(d) < tolerance) continue;
    const int sign = d > 0 ? 1 : -1;
    if (sign == previous_sign) {
      out.kind = StructureKind::Other;
      return out;
    }
    previous_sign = sign;
    ++displaced;
  }
  out.kind = displaced >= 2 ? StructureKind::Zigzag : StructureKind::Other;
  return out;
}

double axial_span(const Positions& positions) {
  if (positions.rows() == 0) return 0.0;
  return positions.col(2).maxCoeff() - positions.col(2).minCoeff();
}

}  // namespace ionmem
