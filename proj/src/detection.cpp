#include "ionmem/detection.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace ionmem {

void DetectionModel::validate() const {
  if (!(dark_rate >= 0.0)) throw std::invalid_argument("dark_rate must be >= 0");
  if (!(bright_rate > dark_rate)) throw std::invalid_argument("bright_rate must exceed dark_rate");
  if (!(heating_tau > 0.0)) throw std::invalid_argument("heating_tau must be > 0");
}

double mean_counts(const DetectionModel& model, double t, IonState state) {
  if (t < 0.0) throw std::invalid_argument("t must be >= 0");
  if (state == IonState::Dark) return model.dark_rate;
  if (model.cooling_on) return model.bright_rate;
  return model.bright_rate * std::exp(-t / model.heating_tau);
}

std::uint64_t sample_counts(double mean, Rng& rng) {
  if (!(mean >= 0.0)) throw std::invalid_argument("mean must be >= 0");
  if (mean == 0.0) return 0;
  return std::poisson_distribution<std::uint64_t>(mean)(rng);
}

ReadoutOutcome classify_counts(std::uint64_t counts, std::uint64_t threshold) {
  return {counts, counts >= threshold ? IonState::Bright : IonState::Dark};
}

double poisson_cdf(std::int64_t n, double mean) {
  if (n < 0) return 0.0;
  if (mean == 0.0) return 1.0;
  // Sum pmf terms in log space from k = 0; stable for the count ranges used here.
  double sum = 0.0;
  double log_term = -mean;
  for (std::int64_t k = 0; k <= n; ++k) {
    if (k > 0) log_term += std::log(mean) - std::log(static_cast<double>(k));
    sum += std::exp(log_term);
  }
  return std::min(sum, 1.0);
}

double misclassification(double bright_rate, double dark_rate, std::uint64_t threshold) {
  const auto n = static_cast<std::int64_t>(threshold);
  const double bright_missed = poisson_cdf(n - 1, bright_rate);
  const double dark_flagged = 1.0 - poisson_cdf(n - 1, dark_rate);
  return 0.5 * (bright_missed + dark_flagged);
}

Threshold optimal_threshold(double bright_rate, double dark_rate) {
  if (!(dark_rate >= 0.0) || !(bright_rate > dark_rate)) {
    throw std::invalid_argument("need bright_rate > dark_rate >= 0");
  }
  const auto upper = static_cast<std::uint64_t>(std::ceil(bright_rate + 10.0 * std::sqrt(bright_rate)));
  Threshold best{0, misclassification(bright_rate, dark_rate, 0)};
  for (std::uint64_t n = 1; n <= upper; ++n) {
    const double e = misclassification(bright_rate, dark_rate, n);
    if (e < best.error) best = {n, e};
  }
  return best;
}

ReadoutCurve readout_error_curve(const DetectionModel& model, const std::vector<double>& times,
                                 std::optional<std::uint64_t> fixed_threshold) {
  model.validate();
  if (times.empty()) throw std::invalid_argument("time grid must be non-empty");
  ReadoutCurve out;
  out.threshold = fixed_threshold ? *fixed_threshold
                                  : optimal_threshold(mean_counts(model, 0.0, IonState::Bright),
                                                      mean_counts(model, 0.0, IonState::Dark))
                                        .counts;
  for (double t : times) {
    const double bright = mean_counts(model, t, IonState::Bright);
    out.times.push_back(t);
    out.mean_bright_counts.push_back(bright);
    out.readout_error.push_back(misclassification(bright, mean_counts(model, t, IonState::Dark), out.threshold));
  }
  return out;
}

}  // namespace ionmem
