#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "glosa/scenario.hpp"

namespace glosa {

// One speed-profile solve: a constant-acceleration leg of duration t1
// covering d1, optionally followed by a constant-speed leg covering d2.
// For first-light solves t_tot == t1 and d2 == 0.
struct MotionSolution {
  double a_mps2 = 0.0;   // acceleration during the first leg
  double v_t_mps = 0.0;  // target speed after the first leg
  double t1_s = 0.0;     // duration of the accelerated leg
  double t_tot_s = 0.0;  // total maneuver duration
  double d1_m = 0.0;     // distance covered by the accelerated leg
  double d2_m = 0.0;     // distance covered at constant speed

  /// Speed at maneuver time tau (held at v_t beyond t_tot).
  double speed_at(double tau_s) const;
  /// Distance covered by maneuver time tau (grows at v_t beyond t_tot).
  double distance_at(double tau_s) const;
};

/// Constant-acceleration profile over distance d arriving exactly at time t.
/// Infeasible when the required profile would pass through zero speed.
std::optional<MotionSolution> uam_fixed_time(double v_mps, double d_m, double t_s);

/// Constant-acceleration profile over distance d ending at speed v_t.
/// Degenerate (nullopt) when v == v_t == 0.
std::optional<MotionSolution> uam_fixed_target(double v_mps, double d_m, double v_t_mps);

constexpr double kNoSpeedCap = std::numeric_limits<double>::infinity();

/// Acceleration over l1, then constant speed to li, arriving exactly at
/// t_tot. Keeps the positive root of the arrival-time quadratic; infeasible
/// when the accelerated leg duration comes out non-positive or the target
/// speed exceeds v_cap.
std::optional<MotionSolution> uam_csm_fixed_total_time(double v_mps, double l1_m,
                                                       double li_m, double t_tot_s,
                                                       double v_cap_mps = kNoSpeedCap);

/// Acceleration over l1 to speed v_t, then constant speed to li.
std::optional<MotionSolution> uam_csm_fixed_target(double v_mps, double l1_m,
                                                   double li_m, double v_t_mps);

// Closed interval of admissible target speeds, with the generating motion
// solution attached to each finite endpoint where one exists.
struct VelocityInterval {
  double v_min_mps = 0.0;
  double v_max_mps = 0.0;
  bool empty = true;
  std::optional<MotionSolution> min_solution;
  std::optional<MotionSolution> max_solution;

  static VelocityInterval make_empty() { return {}; }
  static VelocityInterval of(double lo, double hi);
  bool contains(double v_mps) const {
    return !empty && v_mps >= v_min_mps && v_mps <= v_max_mps;
  }
};

/// Standard closed-interval intersection; empty absorbs. Endpoint solutions
/// follow the operand that supplied the surviving endpoint.
VelocityInterval intersect(const VelocityInterval& a, const VelocityInterval& b);

/// Admissible target-speed interval for traffic light `tl_index` (1-based;
/// 1 = first light ahead) and green phase `green_phase` (1 or 2; 2 only when
/// the light is currently green). `shifts` comes from next_shifts at the
/// current time; `margin_s` shrinks each green window on both sides so the
/// crossing lands strictly inside the phase. Infeasible solves yield the
/// empty interval.
VelocityInterval velocity_range(int tl_index, int green_phase, Color current,
                                double v_mps, double l1_m, double li_m,
                                const std::vector<ShiftEvent>& shifts,
                                const RoadLimits& limits, double margin_s = 0.0);

/// Arrival time at the target light for profile target speed v_t (UAM over
/// l1, then CSM to li; li == l1 means plain UAM). The decreasing function the
/// range construction inverts.
double arrival_time(double v_mps, double l1_m, double li_m, double v_t_mps);

}  // namespace glosa
