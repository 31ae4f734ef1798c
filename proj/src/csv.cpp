#include "ionmem/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace ionmem {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

std::string format_number(double v, int significant) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  if (v == 0.0) return "0";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", significant, v);
  return buf;
}

std::string crystal_csv(const Positions& positions) {
  std::string out = "ion,x,y,z\n";
  for (Eigen::Index i = 0; i < positions.rows(); ++i) {
    out += std::to_string(i) + ',' + format_number(positions(i, 0)) + ',' + format_number(positions(i, 1)) +
           ',' + format_number(positions(i, 2)) + '\n';
  }
  return out;
}

std::string modes_csv(const ModeSpectrum& modes) {
  std::string out = "mode,omega_rad_s\n";
  for (Eigen::Index k = 0; k < modes.frequencies.size(); ++k) {
    out += std::to_string(k) + ',' + format_number(modes.frequencies[k]) + '\n';
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepPoint>& sweep) {
  std::string out = "epsilon,single_pulse_fidelity,sk1_fidelity\n";
  for (const auto& p : sweep) {
    out += format_number(p.epsilon) + ',' + format_number(p.single_pulse_fidelity) + ',' +
           format_number(p.sk1_fidelity) + '\n';
  }
  return out;
}

std::string experiment_csv(const ExperimentResult& result) {
  std::string out = "time_s,fidelity,stderr,reps\n";
  for (std::size_t i = 0; i < result.times.size(); ++i) {
    out += format_number(result.times[i]) + ',' + format_number(result.estimates[i]) + ',' +
           format_number(result.standard_errors[i]) + ',' + std::to_string(result.repetitions) + '\n';
  }
  return out;
}

std::string readout_csv(const ReadoutCurve& curve) {
  std::string out = "time_s,mean_bright_counts,readout_error\n";
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    out += format_number(curve.times[i]) + ',' + format_number(curve.mean_bright_counts[i]) + ',' +
           format_number(curve.readout_error[i]) + '\n';
  }
  return out;
}

std::string fit_csv(const FitResult& fit) {
  std::string out = "param,value,stderr\n";
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    out += fit.names[i] + ',' + format_number(fit.params[i]) + ',' + format_number(fit.standard_errors[i]) + '\n';
  }
  return out;
}

std::string rabi_csv(const std::vector<RabiTrace>& traces) {
  std::string out = "site,time_s,population\n";
  for (const auto& trace : traces) {
    for (std::size_t i = 0; i < trace.times.size(); ++i) {
      out += format_number(trace.site) + ',' + format_number(trace.times[i]) + ',' +
             format_number(trace.populations[i]) + '\n';
    }
  }
  return out;
}

bool CsvTable::has_column(std::string_view name) const {
  for (const auto& h : header) {
    if (h == name) return true;
  }
  return false;
}

std::vector<double> CsvTable::column(std::string_view name) const {
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] != name) continue;
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& row : rows) out.push_back(row[c]);
    return out;
  }
  throw std::out_of_range("no CSV column named " + std::string(name));
}

CsvTable parse_csv(std::string_view text) {
  CsvTable table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split(line);
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw std::runtime_error("CSV line " + std::to_string(line_no) + ": expected " +
                               std::to_string(table.header.size()) + " fields, got " + std::to_string(fields.size()));
    }
    std::vector<double> row;
    for (const auto& f : fields) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw std::runtime_error("CSV line " + std::to_string(line_no) + ": not a number: '" + f + "'");
      }
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw std::runtime_error("CSV input is empty");
  return table;
}

}  // namespace ionmem
