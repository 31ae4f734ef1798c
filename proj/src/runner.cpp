#include "ionmem/runner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ionmem/analysis.hpp"
#include "ionmem/csv.hpp"

namespace ionmem {

namespace {

using json = nlohmann::json;

std::filesystem::path resolve(const RunOptions& options, const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_relative() && !options.base_dir.empty()) p = options.base_dir / p;
  return p;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

// JSON has no infinities; report them as strings.
json number(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

template <typename T>
const T& require(const std::optional<T>& block, const char* name) {
  if (!block) throw std::runtime_error(std::string("missing [") + name + "] block");
  return *block;
}

struct Output {
  std::string csv;
  json summary;
};

Output run_crystal(const RunConfig& cfg, bool modes_csv_out) {
  const TrapConfig& trap = require(cfg.trap, "trap");
  const CrystalBlock& block = require(cfg.crystal, "crystal");
  SolverOptions options;
  options.max_iterations = block.max_iterations;
  const CrystalConfiguration crystal = solve_equilibrium(trap, block.ions, cfg.seed, std::nullopt, options);
  const double tol = block.classify_tolerance.value_or(default_structure_tolerance(trap));
  const StructureClass structure = classify_structure(crystal, tol);
  const ModeSpectrum modes = normal_modes(trap, crystal);

  Output out;
  out.csv = modes_csv_out ? modes_csv(modes) : crystal_csv(crystal.positions);
  out.summary = {
      {"ions", block.ions},
      {"energy_j", crystal.energy},
      {"gradient_norm_j_per_m", crystal.gradient_norm},
      {"iterations", crystal.iterations},
      {"structure", to_string(structure.kind)},
      {"transverse_extent_m", structure.transverse_extent},
      {"classify_tolerance_m", tol},
      {"axial_span_m", axial_span(crystal.positions)},
      {"length_scale_m", trap.length_scale()},
      {"lowest_mode_rad_s", modes.frequencies[0]},
      {"highest_mode_rad_s", modes.frequencies[modes.frequencies.size() - 1]},
  };
  return out;
}

Output run_sk1(const RunConfig& cfg) {
  const Sk1Block& block = require(cfg.sk1, "sk1");
  const auto sweep = area_error_sweep(block.target, block.epsilon_min, block.epsilon_max, block.epsilon_step);
  double worst_sk1 = 1.0, worst_single = 1.0;
  for (const auto& p : sweep) {
    worst_sk1 = std::min(worst_sk1, p.sk1_fidelity);
    worst_single = std::min(worst_single, p.single_pulse_fidelity);
  }
  Output out;
  out.csv = sweep_csv(sweep);
  out.summary = {{"points", sweep.size()},
                 {"sk1_phase_rad", sk1_phase(block.target.theta)},
                 {"min_sk1_fidelity", worst_sk1},
                 {"min_single_pulse_fidelity", worst_single}};
  return out;
}

Output run_rabi(const RunConfig& cfg) {
  const RabiBlock& block = require(cfg.rabi, "rabi");
  const RabiProfile profile(block.omega0, block.gradient_per_site);
  const auto steps = static_cast<std::size_t>(std::floor(block.duration / block.step + 1e-9));
  std::vector<RabiTrace> traces;
  json sites = json::array();
  for (double site : block.sites) {
    RabiTrace trace{site, {}, {}};
    for (std::size_t k = 0; k <= steps; ++k) {
      const double t = static_cast<double>(k) * block.step;
      trace.times.push_back(t);
      trace.populations.push_back(rabi_population(profile, site, t));
    }
    traces.push_back(std::move(trace));
    sites.push_back({{"site", site}, {"omega_rad_s", profile.omega_at(site)}});
  }
  Output out;
  out.csv = rabi_csv(traces);
  out.summary = {{"gradient_per_site", block.gradient_per_site}, {"sites", sites}};
  return out;
}

json curve_summary(const ExperimentResult& r) {
  return {{"points", r.times.size()}, {"reps", r.repetitions}};
}

Output run_storage(const RunConfig& cfg) {
  const NoiseModel& noise = require(cfg.noise, "noise");
  const StorageBlock& block = require(cfg.storage, "storage");
  const auto result = storage_curve(noise, block.times, block.reps, block.epsilon, cfg.seed);
  return {experiment_csv(result), curve_summary(result)};
}

Output run_relaxation(const RunConfig& cfg) {
  const NoiseModel& noise = require(cfg.noise, "noise");
  const RelaxationBlock& block = require(cfg.relaxation, "relaxation");
  const auto result = relaxation_curve(noise, block.times, block.reps, cfg.seed);
  return {experiment_csv(result), curve_summary(result)};
}

Output run_readout(const RunConfig& cfg) {
  const ReadoutBlock& block = require(cfg.detection, "detection");
  const auto curve = readout_error_curve(block.model, block.times, block.threshold);
  Output out;
  out.csv = readout_csv(curve);
  out.summary = {{"threshold", curve.threshold},
                 {"readout_error_first", curve.readout_error.front()},
                 {"readout_error_last", curve.readout_error.back()}};
  return out;
}

Output run_fit(const RunConfig& cfg, const RunOptions& options) {
  const FitBlock& block = require(cfg.fit, "fit");
  const CsvTable table = parse_csv(read_file(resolve(options, block.input)));
  const auto t = table.column(block.time_column);
  const auto y = table.column(block.value_column);

  std::vector<double> sigma(t.size(), 1.0);
  if (block.sigma_column) {
    sigma = table.column(*block.sigma_column);
  } else if (table.has_column("stderr") && table.has_column("reps")) {
    // Binomial error bars; points at exactly 0 or 1 get a finite floor.
    const auto reps = table.column("reps");
    for (std::size_t i = 0; i < y.size(); ++i) {
      sigma[i] = binomial_sigma(std::clamp(y[i], 0.0, 1.0), static_cast<std::size_t>(reps[i]));
    }
  }

  FitResult fit;
  switch (block.model) {
    case FitModel::ExponentialOffset:
      fit = fit_exponential_offset(t, y, sigma);
      break;
    case FitModel::Exponential:
      fit = fit_pure_exponential(t, y, sigma);
      break;
    case FitModel::Rabi:
      fit = fit_rabi(t, y, sigma);
      break;
  }
  if (!fit.converged) throw std::runtime_error("fit did not converge: " + fit.message);

  json params = json::object();
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    params[fit.names[i]] = {{"value", number(fit.params[i])}, {"stderr", number(fit.standard_errors[i])}};
  }
  Output out;
  out.csv = fit_csv(fit);
  out.summary = {{"params", params},
                 {"residual_norm", fit.residual_norm},
                 {"converged", fit.converged},
                 {"identifiable", fit.identifiable},
                 {"at_bound", fit.at_bound},
                 {"message", fit.message}};
  return out;
}

}  // namespace

std::string artifact_version() { return IONMEM_VERSION; }

RunReport run(const RunConfig& config, const RunOptions& options) {
  Output out;
  switch (config.experiment) {
    case Experiment::Crystal:
      out = run_crystal(config, false);
      break;
    case Experiment::Modes:
      out = run_crystal(config, true);
      break;
    case Experiment::Sk1Scan:
      out = run_sk1(config);
      break;
    case Experiment::RabiScan:
      out = run_rabi(config);
      break;
    case Experiment::Storage:
      out = run_storage(config);
      break;
    case Experiment::Relaxation:
      out = run_relaxation(config);
      break;
    case Experiment::Readout:
      out = run_readout(config);
      break;
    case Experiment::Fit:
      out = run_fit(config, options);
      break;
  }

  RunReport report;
  report.csv_path = resolve(options, options.output_override.empty() ? config.output : options.output_override);
  report.metadata_path = report.csv_path;
  report.metadata_path += ".meta.json";
  report.csv = std::move(out.csv);
  report.summary = out.summary.dump();

  const json meta = {{"artifact", "ionmem"},
                     {"version", artifact_version()},
                     {"experiment", to_string(config.experiment)},
                     {"seed", config.seed},
                     {"config", config.source},
                     {"summary", out.summary}};
  write_file(report.csv_path, report.csv);
  write_file(report.metadata_path, meta.dump(2) + "\n");
  return report;
}

}  // namespace ionmem
