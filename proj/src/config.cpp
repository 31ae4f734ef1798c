#include "ionmem/config.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <set>

namespace ionmem {

namespace {

struct Entry {
  std::string value;
  int line = 0;
};

struct Section {
  int line = 0;
  std::map<std::string, Entry> entries;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-')) return false;
  }
  return true;
}

std::optional<double> parse_number(std::string_view token) {
  double product = 1.0;
  std::size_t start = 0;
  while (true) {
    const auto star = token.find('*', start);
    const auto factor = token.substr(start, star == std::string_view::npos ? std::string_view::npos : star - start);
    if (factor == "pi") {
      product *= constants::kPi;
    } else {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(factor.data(), factor.data() + factor.size(), v);
      if (factor.empty() || ec != std::errc() || ptr != factor.data() + factor.size()) return std::nullopt;
      product *= v;
    }
    if (star == std::string_view::npos) break;
    start = star + 1;
  }
  return product;
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t j = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > j) out.emplace_back(s.substr(j, i - j));
  }
  return out;
}

// Typed access to one section; records every key it is asked about so that
// leftovers can be reported as unknown.
class Block {
 public:
  Block(std::string name, const Section& section, std::vector<std::string>& errors)
      : name_(std::move(name)), section_(section), errors_(errors) {}

  ~Block() {
    for (const auto& [key, entry] : section_.entries) {
      if (!known_.count(key)) errors_.push_back(where(entry.line) + "unknown key '" + key + "'");
    }
  }

  bool has(const std::string& key) {
    known_.insert(key);
    return section_.entries.count(key) > 0;
  }

  int line(const std::string& key) const {
    const auto it = section_.entries.find(key);
    return it == section_.entries.end() ? section_.line : it->second.line;
  }

  void error(const std::string& key, const std::string& message) {
    errors_.push_back(where(line(key)) + key + ": " + message);
  }

  void missing(const std::string& key) {
    errors_.push_back(where(section_.line) + "missing required key '" + key + "'");
  }

  std::optional<std::string> word(const std::string& key, bool required = false) {
    if (!has(key)) {
      if (required) missing(key);
      return std::nullopt;
    }
    return section_.entries.at(key).value;
  }

  std::optional<std::vector<double>> numbers(const std::string& key, bool required = false) {
    const auto raw = word(key, required);
    if (!raw) return std::nullopt;
    std::vector<double> out;
    for (const auto& tok : split_ws(*raw)) {
      const auto v = parse_number(tok);
      if (!v) {
        error(key, "not a number: '" + tok + "'");
        return std::nullopt;
      }
      out.push_back(*v);
    }
    if (out.empty()) {
      error(key, "expected at least one number");
      return std::nullopt;
    }
    return out;
  }

  std::optional<double> number(const std::string& key, bool required = false) {
    const auto v = numbers(key, required);
    if (!v) return std::nullopt;
    if (v->size() != 1) {
      error(key, "expected a single number");
      return std::nullopt;
    }
    return v->front();
  }

  std::optional<std::uint64_t> integer(const std::string& key, bool required = false) {
    const auto raw = word(key, required);
    if (!raw) return std::nullopt;
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(raw->data(), raw->data() + raw->size(), v);
    if (raw->empty() || ec != std::errc() || ptr != raw->data() + raw->size()) {
      error(key, "expected a non-negative integer");
      return std::nullopt;
    }
    return v;
  }

  std::optional<bool> flag(const std::string& key) {
    const auto raw = word(key);
    if (!raw) return std::nullopt;
    if (*raw == "true" || *raw == "on" || *raw == "yes") return true;
    if (*raw == "false" || *raw == "off" || *raw == "no") return false;
    error(key, "expected true or false");
    return std::nullopt;
  }

  // Reads a number and checks pred; reports "<key> must be <what>" otherwise.
  template <typename Pred>
  std::optional<double> checked(const std::string& key, bool required, Pred pred, const std::string& what) {
    const auto v = number(key, required);
    if (v && !pred(*v)) {
      error(key, key + " must be " + what);
      return std::nullopt;
    }
    return v;
  }

  std::optional<double> positive(const std::string& key, bool required = false) {
    return checked(key, required, [](double x) { return x > 0.0; }, "> 0");
  }

  const std::string& name() const { return name_; }

 private:
  std::string where(int line) const { return "line " + std::to_string(line) + ": [" + name_ + "] "; }

  std::string name_;
  const Section& section_;
  std::vector<std::string>& errors_;
  std::set<std::string> known_;
};

std::optional<std::vector<double>> time_grid(Block& b, const std::string& key) {
  auto times = b.numbers(key, true);
  if (!times) return std::nullopt;
  for (double t : *times) {
    if (!(t >= 0.0)) {
      b.error(key, key + " must be >= 0");
      return std::nullopt;
    }
  }
  return times;
}

std::optional<TrapConfig> read_trap(Block& b) {
  const auto wx = b.positive("omega_x", true);
  const auto wy = b.positive("omega_y", true);
  const auto axial = b.word("axial", true);
  const auto wz = b.positive("omega_z");
  const auto coeffs = b.numbers("coefficients");
  const auto mass_amu = b.positive("mass_amu", true);
  const auto charge = b.number("charge_e");
  const auto reference = b.positive("reference_frequency");
  b.number("doppler_detuning");  // recorded for documentation, unused by the model

  std::optional<AxialModel> model;
  if (axial == "harmonic") {
    if (!b.has("omega_z")) b.missing("omega_z");
    if (b.has("coefficients")) b.error("coefficients", "only valid with axial = polynomial");
    if (wz) model = HarmonicAxial{*wz};
  } else if (axial == "polynomial") {
    if (!b.has("coefficients")) b.missing("coefficients");
    if (b.has("omega_z")) b.error("omega_z", "only valid with axial = harmonic");
    if (coeffs) {
      if (!(coeffs->back() > 0.0)) {
        b.error("coefficients", "axial potential is not confining: highest-order coefficient must be > 0");
      } else {
        model = PolynomialAxial{*coeffs};
      }
    }
  } else if (axial) {
    b.error("axial", "expected harmonic or polynomial");
  }
  if (charge && *charge == 0.0) b.error("charge_e", "charge_e must be nonzero");

  if (!wx || !wy || !model || !mass_amu || (charge && *charge == 0.0)) return std::nullopt;
  try {
    return TrapConfig(*wx, *wy, *model, *mass_amu * constants::kAtomicMassUnit,
                      charge.value_or(1.0) * constants::kElementaryCharge, reference);
  } catch (const std::invalid_argument& e) {
    b.error("axial", e.what());
    return std::nullopt;
  }
}

std::optional<CrystalBlock> read_crystal(Block& b) {
  CrystalBlock out;
  const auto ions = b.integer("ions", true);
  if (ions && *ions < 1) b.error("ions", "ions must be >= 1");
  const auto tol = b.positive("classify_tolerance");
  const auto iters = b.integer("max_iterations");
  if (!ions || *ions < 1) return std::nullopt;
  out.ions = static_cast<std::size_t>(*ions);
  out.classify_tolerance = tol;
  if (iters) out.max_iterations = static_cast<std::size_t>(*iters);
  return out;
}

std::optional<Sk1Block> read_sk1(Block& b) {
  Sk1Block out;
  bool ok = true;
  const auto theta = b.checked("theta", false, [](double t) { return t > 0.0 && t <= 4.0 * constants::kPi; },
                               "in (0, 4*pi]");
  if (b.has("theta") && !theta) ok = false;
  const auto phi = b.number("phi");
  out.target = Pulse(theta.value_or(constants::kPi), phi.value_or(0.0));
  out.epsilon_min = b.checked("epsilon_min", false, [](double e) { return e > -1.0; }, "> -1").value_or(out.epsilon_min);
  out.epsilon_max = b.number("epsilon_max").value_or(out.epsilon_max);
  if (const auto step = b.positive("epsilon_step")) out.epsilon_step = *step;
  if (out.epsilon_max < out.epsilon_min) {
    b.error("epsilon_max", "epsilon_max must be >= epsilon_min");
    ok = false;
  }
  if (!ok) return std::nullopt;
  return out;
}

std::optional<RabiBlock> read_rabi(Block& b) {
  RabiBlock out;
  const auto omega0 = b.positive("omega0", true);
  const auto gradient =
      b.checked("gradient_per_site", false, [](double g) { return std::abs(g) < 1.0; }, "in (-1, 1)");
  const auto omega_far = b.positive("omega_far");
  const auto far_site = b.positive("far_site");
  const auto sites = b.numbers("sites");
  const auto duration = b.positive("duration", true);
  const auto step = b.positive("step", true);
  if (b.has("gradient_per_site") == b.has("omega_far")) {
    b.error("gradient_per_site", "give exactly one of gradient_per_site or omega_far (with far_site)");
    return std::nullopt;
  }
  if (b.has("omega_far") && !b.has("far_site")) b.missing("far_site");
  if (!omega0 || !duration || !step) return std::nullopt;
  out.omega0 = *omega0;
  if (gradient) {
    out.gradient_per_site = *gradient;
  } else if (omega_far && far_site) {
    out.gradient_per_site = rabi_gradient_from_endpoints(*omega0, *omega_far, *far_site);
  } else {
    return std::nullopt;
  }
  if (sites) out.sites = *sites;
  out.duration = *duration;
  out.step = *step;
  return out;
}

std::optional<NoiseModel> read_noise(Block& b) {
  NoiseModel out;
  bool ok = true;
  const auto kind = b.word("dephasing", true);
  const auto t2 = b.positive("t2");
  const auto sigma = b.checked("sigma", false, [](double s) { return s >= 0.0; }, ">= 0");
  const auto tau_c = b.positive("tau_c");
  if (kind == "phenomenological") {
    if (!b.has("t2")) b.missing("t2");
    if (t2) out.dephasing = PhenomenologicalDephasing{*t2};
    else ok = false;
  } else if (kind == "ou") {
    if (!b.has("sigma")) b.missing("sigma");
    if (!b.has("tau_c")) b.missing("tau_c");
    if (sigma && tau_c) out.dephasing = OrnsteinUhlenbeckDephasing{*sigma, *tau_c};
    else ok = false;
  } else {
    if (kind) b.error("dephasing", "expected phenomenological or ou");
    ok = false;
  }
  if (const auto t1 = b.positive("relaxation_time")) out.relaxation_time = *t1;
  else if (b.has("relaxation_time")) ok = false;
  if (const auto spam = b.checked("spam_error", false, [](double s) { return s >= 0.0 && s < 0.5; }, "in [0, 0.5)")) {
    out.spam_error = *spam;
  } else if (b.has("spam_error")) {
    ok = false;
  }
  if (const auto j = b.checked("t2_jitter", false, [](double s) { return s >= 0.0; }, ">= 0")) out.t2_jitter = *j;
  else if (b.has("t2_jitter")) ok = false;
  if (!ok) return std::nullopt;
  return out;
}

std::optional<StorageBlock> read_storage(Block& b) {
  StorageBlock out;
  const auto times = time_grid(b, "times");
  const auto reps = b.integer("reps");
  if (reps && *reps < 1) b.error("reps", "reps must be >= 1");
  const auto eps = b.checked("epsilon", false, [](double e) { return e > -1.0; }, "> -1");
  if (!times || (reps && *reps < 1) || (b.has("epsilon") && !eps)) return std::nullopt;
  out.times = *times;
  if (reps) out.reps = static_cast<std::size_t>(*reps);
  if (eps) out.epsilon = *eps;
  return out;
}

std::optional<RelaxationBlock> read_relaxation(Block& b) {
  RelaxationBlock out;
  const auto times = time_grid(b, "times");
  const auto reps = b.integer("reps");
  if (reps && *reps < 1) b.error("reps", "reps must be >= 1");
  if (!times || (reps && *reps < 1)) return std::nullopt;
  out.times = *times;
  if (reps) out.reps = static_cast<std::size_t>(*reps);
  return out;
}

std::optional<ReadoutBlock> read_detection(Block& b) {
  ReadoutBlock out;
  const auto bright = b.positive("bright_rate");
  const auto dark = b.checked("dark_rate", false, [](double d) { return d >= 0.0; }, ">= 0");
  const auto tau = b.positive("heating_tau");
  const auto cooling = b.flag("cooling_on");
  const auto times = time_grid(b, "times");
  const auto threshold = b.integer("threshold");
  if (bright) out.model.bright_rate = *bright;
  if (dark) out.model.dark_rate = *dark;
  if (tau) out.model.heating_tau = *tau;
  if (cooling) out.model.cooling_on = *cooling;
  bool ok = times.has_value() && (!b.has("bright_rate") || bright) && (!b.has("dark_rate") || dark) &&
            (!b.has("heating_tau") || tau) && (!b.has("cooling_on") || cooling) && (!b.has("threshold") || threshold);
  if (!(out.model.bright_rate > out.model.dark_rate)) {
    b.error("bright_rate", "bright_rate must exceed dark_rate");
    ok = false;
  }
  if (!ok) return std::nullopt;
  out.times = *times;
  out.threshold = threshold;
  return out;
}

std::optional<FitBlock> read_fit(Block& b) {
  FitBlock out;
  const auto input = b.word("input", true);
  const auto model = b.word("model", true);
  const auto time_col = b.word("time_column");
  const auto value_col = b.word("value_column");
  const auto sigma_col = b.word("sigma_column");
  bool ok = input.has_value();
  if (model == "exp-offset") {
    out.model = FitModel::ExponentialOffset;
    out.value_column = "fidelity";
  } else if (model == "exp") {
    out.model = FitModel::Exponential;
    out.value_column = "mean_bright_counts";
  } else if (model == "rabi") {
    out.model = FitModel::Rabi;
    out.value_column = "population";
  } else {
    if (model) b.error("model", "expected exp-offset, exp or rabi");
    ok = false;
  }
  if (!ok) return std::nullopt;
  out.input = *input;
  if (time_col) out.time_column = *time_col;
  if (value_col) out.value_column = *value_col;
  out.sigma_column = sigma_col;
  return out;
}

std::optional<Experiment> parse_experiment(const std::string& s) {
  static const std::map<std::string, Experiment> names = {
      {"crystal", Experiment::Crystal},       {"modes", Experiment::Modes},
      {"sk1-scan", Experiment::Sk1Scan},      {"rabi-scan", Experiment::RabiScan},
      {"storage", Experiment::Storage},       {"relaxation", Experiment::Relaxation},
      {"readout", Experiment::Readout},       {"fit", Experiment::Fit}};
  const auto it = names.find(s);
  if (it == names.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> required_sections(Experiment e) {
  switch (e) {
    case Experiment::Crystal:
    case Experiment::Modes:
      return {"trap", "crystal"};
    case Experiment::Sk1Scan:
      return {"sk1"};
    case Experiment::RabiScan:
      return {"rabi"};
    case Experiment::Storage:
      return {"noise", "storage"};
    case Experiment::Relaxation:
      return {"noise", "relaxation"};
    case Experiment::Readout:
      return {"detection"};
    case Experiment::Fit:
      return {"fit"};
  }
  return {};
}

}  // namespace

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::Crystal:
      return "crystal";
    case Experiment::Modes:
      return "modes";
    case Experiment::Sk1Scan:
      return "sk1-scan";
    case Experiment::RabiScan:
      return "rabi-scan";
    case Experiment::Storage:
      return "storage";
    case Experiment::Relaxation:
      return "relaxation";
    case Experiment::Readout:
      return "readout";
    case Experiment::Fit:
      return "fit";
  }
  return "unknown";
}

namespace {

std::string join_errors(const std::vector<std::string>& errors) {
  std::string out = "invalid configuration:";
  for (const auto& e : errors) out += "\n  " + e;
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error(join_errors(errors)), errors_(std::move(errors)) {}

RunConfig parse_config(std::string_view text) {
  std::vector<std::string> errors;
  std::map<std::string, Section> sections;
  sections[""].line = 1;
  std::string current;

  int line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";

    if (line.front() == '[') {
      if (line.back() != ']') {
        errors.push_back(where + "malformed section header");
        continue;
      }
      current = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!valid_name(current)) {
        errors.push_back(where + "invalid section name '" + current + "'");
      } else if (sections.count(current)) {
        errors.push_back(where + "duplicate section [" + current + "]");
      }
      sections[current].line = line_no;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back(where + "expected 'key = value'");
      continue;
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!valid_name(key)) {
      errors.push_back(where + "invalid key '" + key + "'");
      continue;
    }
    if (value.empty()) {
      errors.push_back(where + key + ": missing value");
      continue;
    }
    auto& entries = sections[current].entries;
    if (entries.count(key)) {
      errors.push_back(where + "duplicate key '" + key + "'");
      continue;
    }
    entries[key] = Entry{value, line_no};
  }

  RunConfig cfg;
  cfg.source = std::string(text);

  std::optional<Experiment> experiment;
  {
    Section& top = sections[""];
    // Top-level problems read better without a section tag.
    for (const auto& [key, entry] : top.entries) {
      if (key != "experiment" && key != "seed" && key != "output") {
        errors.push_back("line " + std::to_string(entry.line) + ": unknown key '" + key + "'");
      }
    }
    if (const auto it = top.entries.find("experiment"); it == top.entries.end()) {
      errors.push_back("experiment required");
    } else if (!(experiment = parse_experiment(it->second.value))) {
      errors.push_back("line " + std::to_string(it->second.line) + ": unknown experiment '" + it->second.value + "'");
    }
    if (const auto it = top.entries.find("seed"); it == top.entries.end()) {
      errors.push_back("seed required");
    } else {
      const auto& v = it->second.value;
      const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), cfg.seed);
      if (ec != std::errc() || ptr != v.data() + v.size()) {
        errors.push_back("line " + std::to_string(it->second.line) + ": seed must be an unsigned 64-bit integer");
      }
    }
    if (const auto it = top.entries.find("output"); it != top.entries.end()) cfg.output = it->second.value;
  }
  if (experiment) {
    cfg.experiment = *experiment;
    if (cfg.output.empty()) cfg.output = to_string(*experiment) + ".csv";
    for (const auto& name : required_sections(*experiment)) {
      if (!sections.count(name)) errors.push_back("missing [" + name + "] block required by experiment " + to_string(*experiment));
    }
  }

  for (auto& [name, section] : sections) {
    if (name.empty()) continue;
    const std::size_t before = errors.size();
    bool parsed = true;
    {
      Block b(name, section, errors);
      if (name == "trap") parsed = (cfg.trap = read_trap(b)).has_value();
      else if (name == "crystal") parsed = (cfg.crystal = read_crystal(b)).has_value();
      else if (name == "sk1") parsed = (cfg.sk1 = read_sk1(b)).has_value();
      else if (name == "rabi") parsed = (cfg.rabi = read_rabi(b)).has_value();
      else if (name == "noise") parsed = (cfg.noise = read_noise(b)).has_value();
      else if (name == "storage") parsed = (cfg.storage = read_storage(b)).has_value();
      else if (name == "relaxation") parsed = (cfg.relaxation = read_relaxation(b)).has_value();
      else if (name == "detection") parsed = (cfg.detection = read_detection(b)).has_value();
      else if (name == "fit") parsed = (cfg.fit = read_fit(b)).has_value();
      else {
        errors.push_back("line " + std::to_string(section.line) + ": unknown section [" + name + "]");
        for (const auto& [key, entry] : section.entries) b.has(key);
      }
    }
    if (!parsed && errors.size() == before) {
      errors.push_back("line " + std::to_string(section.line) + ": [" + name + "] block is incomplete");
    }
  }

  if (!errors.empty()) throw ConfigError(std::move(errors));
  return cfg;
}

}  // namespace ionmem
