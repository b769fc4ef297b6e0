#pragma once

#include <string>
#include <vector>

#include "glosa/sim.hpp"

namespace glosa {

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Column order: t_s, s_m, v_mps, a_mps2, j_mps3, force_n, warning,
/// light<i>_color..., iec_j_per_m, aec_j_per_m. SI units, 6 significant
/// digits.
void write_trace_csv(const SimTrace& trace, const std::string& path);

std::string format_summary(const SimSummary& summary);
std::string format_compare_report(const CompareReport& report);

/// One CSV per figure family and driver: abscissa vs time, velocity vs
/// abscissa, acceleration vs abscissa, average consumption vs abscissa.
void write_plot_data(const std::vector<SimTrace>& traces, const std::string& out_dir);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace glosa
