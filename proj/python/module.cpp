#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ionmem/analysis.hpp"
#include "ionmem/config.hpp"
#include "ionmem/crystal.hpp"
#include "ionmem/detection.hpp"
#include "ionmem/memory.hpp"
#include "ionmem/pulses.hpp"
#include "ionmem/runner.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace ionmem;

namespace {

PulseSequence to_sequence(const std::vector<std::pair<double, double>>& pulses) {
  std::vector<Pulse> out;
  for (const auto& [theta, phi] : pulses) out.emplace_back(theta, phi);
  return PulseSequence(std::move(out));
}

std::vector<std::pair<double, double>> from_sequence(const PulseSequence& seq) {
  std::vector<std::pair<double, double>> out;
  for (const auto& p : seq.pulses()) out.emplace_back(p.theta, p.phi);
  return out;
}

TrapConfig make_trap(double omega_x, double omega_y, std::optional<double> omega_z,
                     std::optional<std::vector<double>> coefficients, double mass_amu,
                     std::optional<double> reference_frequency) {
  if (omega_z.has_value() == coefficients.has_value())
    throw std::invalid_argument("give exactly one of omega_z and coefficients");
  AxialModel axial = omega_z ? AxialModel(HarmonicAxial{*omega_z}) : AxialModel(PolynomialAxial{*coefficients});
  return TrapConfig(omega_x, omega_y, std::move(axial), mass_amu * constants::kAtomicMassUnit,
                    constants::kElementaryCharge, reference_frequency);
}

}  // namespace

PYBIND11_MODULE(ionmem, m) {
  m.doc() = "Trapped-ion quantum memory simulator";
  m.attr("__version__") = artifact_version();

  // Leaked on purpose: the type must outlive interpreter teardown.
  static auto* config_error = new py::exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::list errors;
      for (const auto& s : e.errors()) errors.append(s);
      py::object instance = py::reinterpret_borrow<py::object>(config_error->ptr())(e.what());
      instance.attr("errors") = errors;
      PyErr_SetObject(config_error->ptr(), instance.ptr());
    }
  });
  py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);
  py::register_exception<UnstableConfiguration>(m, "UnstableConfiguration", PyExc_RuntimeError);
  py::register_exception<DegenerateConfiguration>(m, "DegenerateConfiguration", PyExc_ValueError);

  // crystal
  py::class_<TrapConfig>(m, "TrapConfig")
      .def(py::init(&make_trap), "omega_x"_a, "omega_y"_a, py::kw_only(), "omega_z"_a = py::none(),
           "coefficients"_a = py::none(), "mass_amu"_a = 170.936, "reference_frequency"_a = py::none(),
           "Harmonic axial trap if omega_z is given, else V(z) = sum_k coefficients[k] z^(2k+2) "
           "in J/m^(2k+2).")
      .def_property_readonly("omega_x", &TrapConfig::omega_x)
      .def_property_readonly("omega_y", &TrapConfig::omega_y)
      .def_property_readonly("mass", &TrapConfig::mass)
      .def_property_readonly("reference_frequency", &TrapConfig::reference_frequency)
      .def_property_readonly("length_scale", &TrapConfig::length_scale)
      .def_property_readonly("energy_scale", &TrapConfig::energy_scale)
      .def_property_readonly("axial_coefficients", &TrapConfig::axial_coefficients);

  py::class_<CrystalConfiguration>(m, "CrystalConfiguration")
      .def_readonly("positions", &CrystalConfiguration::positions)
      .def_readonly("energy", &CrystalConfiguration::energy)
      .def_readonly("gradient_norm", &CrystalConfiguration::gradient_norm)
      .def_readonly("iterations", &CrystalConfiguration::iterations);

  py::class_<ModeSpectrum>(m, "ModeSpectrum")
      .def_readonly("frequencies", &ModeSpectrum::frequencies)
      .def_readonly("eigenvectors", &ModeSpectrum::eigenvectors);

  py::class_<StructureClass>(m, "StructureClass")
      .def_property_readonly("kind", [](const StructureClass& s) { return to_string(s.kind); })
      .def_readonly("transverse_extent", &StructureClass::transverse_extent);

  m.def("total_energy", &total_energy, "trap"_a, "positions"_a);
  m.def("energy_gradient", &energy_gradient, "trap"_a, "positions"_a);
  m.def("energy_hessian", &energy_hessian, "trap"_a, "positions"_a);
  m.def("initial_guess", &initial_guess, "trap"_a, "n"_a, "seed"_a, "jitter"_a = SolverOptions{}.jitter);
  m.def(
      "solve_equilibrium",
      [](const TrapConfig& trap, std::size_t n, std::uint64_t seed, std::optional<Positions> initial,
         double gradient_tolerance, std::size_t max_iterations) {
        SolverOptions options;
        options.gradient_tolerance = gradient_tolerance;
        options.max_iterations = max_iterations;
        py::gil_scoped_release release;
        return solve_equilibrium(trap, n, seed, initial, options);
      },
      "trap"_a, "n"_a, "seed"_a, "initial"_a = py::none(), "gradient_tolerance"_a = SolverOptions{}.gradient_tolerance,
      "max_iterations"_a = SolverOptions{}.max_iterations);
  m.def("normal_modes", &normal_modes, "trap"_a, "crystal"_a);
  m.def(
      "classify_structure",
      [](const TrapConfig& trap, const CrystalConfiguration& crystal, std::optional<double> tolerance) {
        return classify_structure(crystal, tolerance.value_or(default_structure_tolerance(trap)));
      },
      "trap"_a, "crystal"_a, "tolerance"_a = py::none());
  m.def("axial_span", &axial_span, "positions"_a);

  // pulses
  m.def("rotation_unitary", [](double theta, double phi) { return rotation_unitary(Pulse(theta, phi)).matrix(); },
        "theta"_a, "phi"_a);
  m.def("sk1_phase", &sk1_phase, "theta"_a);
  m.def("sk1_sequence", [](double theta, double phi) { return from_sequence(sk1_sequence(Pulse(theta, phi))); },
        "theta"_a, "phi"_a = 0.0);
  m.def(
      "sequence_unitary",
      [](const std::vector<std::pair<double, double>>& pulses, double epsilon) {
        return sequence_unitary(to_sequence(pulses), epsilon).matrix();
      },
      "pulses"_a, "epsilon"_a);
  m.def(
      "transfer_fidelity",
      [](const Eigen::Matrix2cd& u, double theta, double phi, const QubitState& initial) {
        return transfer_fidelity(Unitary2(u), Pulse(theta, phi), initial);
      },
      "u"_a, "theta"_a, "phi"_a, "initial"_a = kGround);
  m.def(
      "average_gate_fidelity",
      [](const Eigen::Matrix2cd& u, const Eigen::Matrix2cd& target) {
        return average_gate_fidelity(Unitary2(u), Unitary2(target));
      },
      "u"_a, "target"_a);
  m.def(
      "area_error_sweep",
      [](double theta, double phi, double eps_min, double eps_max, double eps_step) {
        std::vector<double> eps, single, sk1;
        for (const auto& p : area_error_sweep(Pulse(theta, phi), eps_min, eps_max, eps_step)) {
          eps.push_back(p.epsilon);
          single.push_back(p.single_pulse_fidelity);
          sk1.push_back(p.sk1_fidelity);
        }
        return py::dict("epsilon"_a = eps, "single_pulse_fidelity"_a = single, "sk1_fidelity"_a = sk1);
      },
      "theta"_a, "phi"_a, "eps_min"_a, "eps_max"_a, "eps_step"_a);
  m.def(
      "rabi_population",
      [](double omega0, double gradient_per_site, double site, double duration) {
        return rabi_population(RabiProfile(omega0, gradient_per_site), site, duration);
      },
      "omega0"_a, "gradient_per_site"_a, "site"_a, "duration"_a);
  m.def("rabi_gradient_from_endpoints", &rabi_gradient_from_endpoints, "omega0"_a, "omega_far"_a, "sites"_a);

  // memory
  py::class_<NoiseModel>(m, "NoiseModel")
      .def(py::init([](std::optional<double> t2, std::optional<double> ou_sigma, std::optional<double> ou_tau_c,
                       double relaxation_time, double spam_error, double t2_jitter) {
             NoiseModel n;
             if (ou_sigma || ou_tau_c) {
               if (t2 || !ou_sigma || !ou_tau_c)
                 throw std::invalid_argument("give either t2 or both ou_sigma and ou_tau_c");
               n.dephasing = OrnsteinUhlenbeckDephasing{*ou_sigma, *ou_tau_c};
             } else if (t2) {
               n.dephasing = PhenomenologicalDephasing{*t2};
             }
             n.relaxation_time = relaxation_time;
             n.spam_error = spam_error;
             n.t2_jitter = t2_jitter;
             n.validate();
             return n;
           }),
           py::kw_only(), "t2"_a = py::none(), "ou_sigma"_a = py::none(), "ou_tau_c"_a = py::none(),
           "relaxation_time"_a = std::numeric_limits<double>::infinity(), "spam_error"_a = 0.0, "t2_jitter"_a = 0.0)
      .def_readonly("relaxation_time", &NoiseModel::relaxation_time)
      .def_readonly("spam_error", &NoiseModel::spam_error)
      .def_readonly("t2_jitter", &NoiseModel::t2_jitter);

  py::class_<ExperimentResult>(m, "ExperimentResult")
      .def_readonly("times", &ExperimentResult::times)
      .def_readonly("estimates", &ExperimentResult::estimates)
      .def_readonly("standard_errors", &ExperimentResult::standard_errors)
      .def_readonly("repetitions", &ExperimentResult::repetitions);

  m.def("coherence_factor", &coherence_factor, "noise"_a, "t"_a, "echo"_a = true);
  m.def(
      "storage_curve",
      [](const NoiseModel& noise, const std::vector<double>& times, std::size_t reps, double epsilon,
         std::uint64_t seed) {
        py::gil_scoped_release release;
        return storage_curve(noise, times, reps, epsilon, seed);
      },
      "noise"_a, "times"_a, "reps"_a, "epsilon"_a = 0.0, "seed"_a);
  m.def(
      "relaxation_curve",
      [](const NoiseModel& noise, const std::vector<double>& times, std::size_t reps, std::uint64_t seed) {
        py::gil_scoped_release release;
        return relaxation_curve(noise, times, reps, seed);
      },
      "noise"_a, "times"_a, "reps"_a, "seed"_a);

  // detection
  py::class_<DetectionModel>(m, "DetectionModel")
      .def(py::init([](double bright_rate, double dark_rate, double heating_tau, bool cooling_on) {
             DetectionModel d{bright_rate, dark_rate, heating_tau, cooling_on};
             d.validate();
             return d;
           }),
           py::kw_only(), "bright_rate"_a = 20.0, "dark_rate"_a = 1.0, "heating_tau"_a = 0.256, "cooling_on"_a = true)
      .def_readonly("bright_rate", &DetectionModel::bright_rate)
      .def_readonly("dark_rate", &DetectionModel::dark_rate)
      .def_readonly("heating_tau", &DetectionModel::heating_tau)
      .def_readonly("cooling_on", &DetectionModel::cooling_on);

  py::class_<ReadoutCurve>(m, "ReadoutCurve")
      .def_readonly("times", &ReadoutCurve::times)
      .def_readonly("mean_bright_counts", &ReadoutCurve::mean_bright_counts)
      .def_readonly("readout_error", &ReadoutCurve::readout_error)
      .def_readonly("threshold", &ReadoutCurve::threshold);

  m.def(
      "mean_counts",
      [](const DetectionModel& model, double t, bool bright) {
        return mean_counts(model, t, bright ? IonState::Bright : IonState::Dark);
      },
      "model"_a, "t"_a, "bright"_a);
  m.def("poisson_cdf", &poisson_cdf, "n"_a, "mean"_a);
  m.def("misclassification", &misclassification, "bright_rate"_a, "dark_rate"_a, "threshold"_a);
  m.def(
      "optimal_threshold",
      [](double bright_rate, double dark_rate) {
        const Threshold t = optimal_threshold(bright_rate, dark_rate);
        return py::make_tuple(t.counts, t.error);
      },
      "bright_rate"_a, "dark_rate"_a);
  m.def("readout_error_curve", &readout_error_curve, "model"_a, "times"_a, "threshold"_a = py::none());

  // analysis
  py::class_<FitResult>(m, "FitResult")
      .def_readonly("names", &FitResult::names)
      .def_readonly("params", &FitResult::params)
      .def_readonly("standard_errors", &FitResult::standard_errors)
      .def_readonly("residual_norm", &FitResult::residual_norm)
      .def_readonly("iterations", &FitResult::iterations)
      .def_readonly("converged", &FitResult::converged)
      .def_readonly("identifiable", &FitResult::identifiable)
      .def_readonly("at_bound", &FitResult::at_bound)
      .def_readonly("message", &FitResult::message)
      .def("value", &FitResult::value, "name"_a)
      .def("error", &FitResult::error, "name"_a);

  using FitFn = FitResult (*)(std::span<const double>, std::span<const double>, std::span<const double>);
  auto bind_fit = [&m](const char* name, FitFn fn) {
    m.def(
        name,
        [fn](const std::vector<double>& t, const std::vector<double>& y, const std::vector<double>& sigma) {
          return fn(t, y, sigma);
        },
        "t"_a, "y"_a, "sigma"_a);
  };
  bind_fit("fit_exponential_offset", &fit_exponential_offset);
  bind_fit("fit_pure_exponential", &fit_pure_exponential);
  bind_fit("fit_rabi", &fit_rabi);
  m.def("binomial_stderr", &binomial_stderr, "p_hat"_a, "n"_a);

  // runner
  m.def(
      "validate_config",
      [](const std::string& text) { return to_string(parse_config(text).experiment); }, "text"_a,
      "Parse a config and return its experiment name; raises ConfigError listing every problem.");
  m.def(
      "run",
      [](const std::string& text, const std::filesystem::path& base_dir, const std::string& output) {
        const RunConfig cfg = parse_config(text);
        RunOptions options;
        options.base_dir = base_dir;
        options.output_override = output;
        RunReport report;
        {
          py::gil_scoped_release release;
          report = run(cfg, options);
        }
        return py::dict("csv_path"_a = report.csv_path, "metadata_path"_a = report.metadata_path, "csv"_a = report.csv,
                        "summary"_a = report.summary);
      },
      "text"_a, "base_dir"_a = std::filesystem::path(), "output"_a = "",
      "Run the experiment described by config text; returns output paths, CSV text and JSON summary.");
}
