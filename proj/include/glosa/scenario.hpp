#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace glosa {

constexpr double kKmhToMps = 1.0 / 3.6;

enum class Color { green, red };

const char* to_string(Color c);

/// Raised when a scenario file cannot be parsed or violates an invariant.
/// The message names the offending section/field.
class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(const std::string& what) : std::runtime_error(what) {}
};

struct Waypoint {
  double x_m = 0.0;
  double y_m = 0.0;
};

// Planar polyline the vehicle follows. Only used to relate (X, Y) poses to
// the path abscissa s; curvature is ignored.
class PathGeometry {
 public:
  explicit PathGeometry(std::vector<Waypoint> waypoints);

  const std::vector<Waypoint>& waypoints() const { return waypoints_; }
  const std::vector<double>& abscissas() const { return abscissas_; }
  double total_length_m() const { return abscissas_.back(); }

  /// Interpolated point at abscissa s (clamped to [0, length]).
  Waypoint point_at(double s_m) const;
  /// Heading of the segment containing s, radians.
  double heading_at(double s_m) const;

 private:
  std::vector<Waypoint> waypoints_;
  std::vector<double> abscissas_;  // cumulative arclength per waypoint
};

// Periodic binary green/red timing of one signal. The yellow phase is folded
// into red. At the exact shift instant the new color applies.
struct PhaseSchedule {
  std::string tl_id;
  double stop_line_abscissa_m = 0.0;
  double cycle_s = 75.0;
  double green_duration_s = 40.0;
  double offset_s = 0.0;  // green-phase start relative to sim time zero

  Color initial_color() const { return phase_at(0.0); }
  Color phase_at(double t_s) const;

  /// Time into the cycle, in [0, cycle), with the green phase starting at 0.
  double cycle_time(double t_s) const;

  void validate(const std::string& context) const;
};

struct ShiftEvent {
  double time_s = 0.0;  // relative to the query time
  Color new_color = Color::red;
};

/// The next `count` phase shifts strictly after t, as (duration-from-t,
/// color-after-shift) pairs. A shift exactly at t counts as already applied.
std::vector<ShiftEvent> next_shifts(const PhaseSchedule& sched, double t_s,
                                    int count);

struct VehicleParams {
  double mass_kg = 1500.0;
  double frontal_area_m2 = 2.2;
  double air_density_kgpm3 = 1.225;
  double drag_coeff = 0.30;
  double rolling_coeff = 0.012;
  double gravity_mps2 = 9.81;
  double f_min_n = -6000.0;  // max braking force, < 0
  double f_max_n = 4000.0;   // max traction force, > 0
  double a_max_mps2 = 2.5;
  double j_min_mps3 = -3.0;
  double j_max_mps3 = 3.0;

  void validate(const std::string& context) const;
};

struct RoadLimits {
  double v_min_road_mps = 20.0 * kKmhToMps;
  double v_max_road_mps = 50.0 * kKmhToMps;
  double horizon_single_m = 100.0;
  double horizon_multi_m = 500.0;
  double d_comfort_mps2 = 1.0;

  void validate(const std::string& context) const;
};

struct FrictionSample {
  double abscissa_m = 0.0;
  double mu = 1.0;
};

struct OcpConfig {
  double t_f_s = 6.0;
  int n_steps = 30;
  double w_v = 1.0;
  double w_a = 1.0;
  double w_j = 10.0;
  double tolerance = 1e-6;
  int max_outer_iters = 8;     // drag relinearizations
  int max_inner_iters = 4000;  // projected-gradient iterations per QP

  double dt() const { return t_f_s / n_steps; }
  void validate(const std::string& context) const;
};

struct Scenario {
  PathGeometry path{{{0.0, 0.0}, {1.0, 0.0}}};
  std::vector<PhaseSchedule> lights;  // ascending stop_line_abscissa_m
  VehicleParams vehicle;
  RoadLimits limits;
  OcpConfig mpc;
  std::vector<FrictionSample> friction;  // carried, consumed by nothing
  double initial_speed_mps = 40.0 * kKmhToMps;
  double sim_step_s = 0.05;
  std::string name = "unnamed";

  void validate() const;
  /// Stable digest of everything that affects a run; used to detect
  /// cross-scenario comparisons.
  std::string fingerprint() const;
};

/// Parses and validates the structured text scenario format (see
/// docs in README). Throws ScenarioError naming the offending field.
Scenario load_scenario(const std::string& path_to_file);

/// Same parser on an in-memory string (test hook).
Scenario parse_scenario(const std::string& text, const std::string& name);

}  // namespace glosa
