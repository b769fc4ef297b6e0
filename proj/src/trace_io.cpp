#include "glosa/trace_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace glosa {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << std::setprecision(6);
  return out;
}

}  // namespace

void write_trace_csv(const SimTrace& trace, const std::string& path) {
  std::ofstream out = open_out(path);
  const size_t n_lights = trace.steps.empty() ? 0 : trace.steps.front().light_colors.size();
  out << "t_s,s_m,v_mps,a_mps2,j_mps3,force_n,warning";
  for (size_t i = 0; i < n_lights; ++i) out << ",light" << i + 1 << "_color";
  out << ",iec_j_per_m,aec_j_per_m\n";
  for (const auto& r : trace.steps) {
    out << r.t_s << ',' << r.s_m << ',' << r.v_mps << ',' << r.a_mps2 << ','
        << r.j_mps3 << ',' << r.force_n << ',' << to_string(r.warning);
    for (const auto c : r.light_colors) out << ',' << to_string(c);
    out << ',' << r.iec_j_per_m << ',' << r.aec_j_per_m << '\n';
  }
}

std::string format_summary(const SimSummary& s) {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "driver: " << to_string(s.kind) << "\n"
     << "  stops:            " << s.stop_count << "\n"
     << "  travel time:      " << s.travel_time_s << " s\n"
     << "  distance:         " << s.distance_m << " m\n"
     << "  final AEC:        " << s.final_aec_kwh_100km << " kWh/100km ("
     << s.final_aec_j_per_m << " J/m)\n"
     << "  rms jerk:         " << s.rms_jerk_mps3 << " m/s^3\n";
  os << "  crossings:        ";
  for (const auto& c : s.crossings) {
    os << "tl" << c.light_index + 1 << "@" << c.t_s << "s=" << to_string(c.color) << " ";
  }
  os << "\n";
  if (s.kind == DriverKind::advised_optimal) {
    os << "  mpc solves:       " << s.mpc_solves << " (" << s.mpc_fallbacks
       << " fallbacks)\n"
       << "  bound violation:  " << s.max_mpc_position_violation_m << " m\n";
  }
  if (s.red_crossing) os << "  WARNING: red-light crossing recorded\n";
  return os.str();
}

std::string format_compare_report(const CompareReport& report) {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "scenario: " << report.scenario_fingerprint << "\n\n";
  for (const auto& e : report.entries) os << format_summary(e) << "\n";
  os << "energy vs " << to_string(report.entries.front().kind) << ":\n";
  for (size_t i = 1; i < report.entries.size(); ++i) {
    os << "  " << to_string(report.entries[i].kind) << ": "
       << report.aec_reduction_pct_vs_first[i] << " % AEC reduction\n";
  }
  return os.str();
}

void write_plot_data(const std::vector<SimTrace>& traces, const std::string& out_dir) {
  for (const auto& trace : traces) {
    const std::string driver = to_string(trace.summary.kind);
    {
      std::ofstream out = open_out(out_dir + "/fig_abscissa_" + driver + ".csv");
      out << "t_s,s_m\n";
      for (const auto& r : trace.steps) out << r.t_s << ',' << r.s_m << '\n';
    }
    {
      std::ofstream out = open_out(out_dir + "/fig_velocity_" + driver + ".csv");
      out << "s_m,v_mps,v_kmh\n";
      for (const auto& r : trace.steps) {
        out << r.s_m << ',' << r.v_mps << ',' << r.v_mps / kKmhToMps << '\n';
      }
    }
    {
      std::ofstream out = open_out(out_dir + "/fig_acceleration_" + driver + ".csv");
      out << "s_m,a_mps2\n";
      for (const auto& r : trace.steps) out << r.s_m << ',' << r.a_mps2 << '\n';
    }
    {
      std::ofstream out = open_out(out_dir + "/fig_aec_" + driver + ".csv");
      out << "s_m,aec_j_per_m,aec_kwh_100km\n";
      for (const auto& r : trace.steps) {
        out << r.s_m << ',' << r.aec_j_per_m << ','
            << r.aec_j_per_m * kJPerMToKwhPer100km << '\n';
      }
    }
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out = open_out(path);
  out << content;
}

}  // namespace glosa
