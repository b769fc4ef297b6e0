#pragma once

#include <optional>
#include <string>
#include <vector>

#include "glosa/kinematics.hpp"
#include "glosa/scenario.hpp"

namespace glosa {

struct VehicleState {
  double x_m = 0.0;
  double y_m = 0.0;
  double psi_rad = 0.0;
  double v_mps = 0.0;
  double s_m = 0.0;  // abscissa, derived via localize
  double t_s = 0.0;  // simulation clock
};

enum class Warning { none, green, red, red_sound };

const char* to_string(Warning w);

class OffPathError : public std::runtime_error {
 public:
  explicit OffPathError(const std::string& what) : std::runtime_error(what) {}
};

/// Arclength of the orthogonal projection of (x, y) onto the path polyline;
/// ties break toward the smaller abscissa. Throws OffPathError when the
/// lateral distance exceeds tolerance.
double localize(double x_m, double y_m, double psi_rad, const PathGeometry& path,
                double lateral_tolerance_m = 10.0);

/// Indices of up to max_count lights strictly ahead of s whose first member
/// lies within horizon. Stateless; the Advisor adds the activation latch.
std::vector<int> lights_in_horizon(double s_m, const std::vector<PhaseSchedule>& lights,
                                   double horizon_m, int max_count = 4);

// Diagnostic record of the feasibility decision taken at one light.
struct LightPlan {
  int light_index = 0;      // 0-based index into scenario.lights
  Color color_now = Color::red;
  int green_phase = 1;      // j actually used
  VelocityInterval admissible;  // after intersection with the previous light
  double planned_arrival_s = 0.0;  // relative to now, for the stored profile
};

struct Advice {
  Warning warning = Warning::none;
  double v_ref_mps = 0.0;
  double a_ref_mps2 = 0.0;
  VelocityInterval v_adm;           // interval backing the stored plan
  int n_green = 0;                  // furthest light (1-based) the plan passes
  int n_pass = 1;                   // green phase targeted at that light
  bool active = false;              // advisor engaged at this state
  bool full_stop = false;           // no green reachable: brake to the line
  MotionSolution profile;           // reference maneuver for the plan
  std::vector<LightPlan> per_light; // diagnostics, one entry per analyzed light
  bool mpc_fallback = false;        // set by the optimal layer on solver failure
};

struct AdvisorOptions {
  double green_margin_s = 2.0;      // keep crossings strictly inside green
  double a_comfort_decel_mps2 = 1.5;
  double warning_deadband_mps = 0.1;
  double lateral_tolerance_m = 10.0;
  double escalate_urgency = 1.0;    // scales the comfort stopping distance
  double stop_standoff_m = 1.0;     // full-stop reference rests this far before the line
  double relaunch_accel_mps2 = 1.0; // pull-away toward the road minimum on green
};

// Non-optimal multiple-traffic-light advisor. Holds only the activation
// latch; one instance per simulated vehicle.
class Advisor {
 public:
  explicit Advisor(const Scenario& scenario, AdvisorOptions options = {});

  /// Full advisory pass: localization, activation check, per-light
  /// feasibility loop, warning escalation. Always returns an Advice; when no
  /// green is reachable at the first light the advice is a full-stop
  /// fallback with a red warning.
  Advice advise(const VehicleState& state);

  /// Upgrades red to red_sound when the first light ahead is red now or at
  /// projected arrival and the stop line is closer than the comfort stopping
  /// distance. Other warnings pass through.
  Warning escalate(const Advice& advice, const VehicleState& state,
                   const PhaseSchedule& first_light) const;

  bool active() const { return latch_; }
  const AdvisorOptions& options() const { return options_; }

 private:
  Advice plan(const VehicleState& state, const std::vector<int>& ahead);

  const Scenario* scenario_;
  AdvisorOptions options_;
  bool latch_ = false;
};

}  // namespace glosa
