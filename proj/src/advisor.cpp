#include "glosa/advisor.hpp"

#include <algorithm>
#include <cmath>

namespace glosa {

const char* to_string(Warning w) {
  switch (w) {
    case Warning::none: return "none";
    case Warning::green: return "green";
    case Warning::red: return "red";
    case Warning::red_sound: return "red_sound";
  }
  return "?";
}

double localize(double x_m, double y_m, double psi_rad, const PathGeometry& path,
                double lateral_tolerance_m) {
  (void)psi_rad;  // heading is not needed to project onto the polyline
  const auto& wp = path.waypoints();
  const auto& ab = path.abscissas();
  double best_d2 = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  for (size_t i = 1; i < wp.size(); ++i) {
    const double ax = wp[i - 1].x_m, ay = wp[i - 1].y_m;
    const double bx = wp[i].x_m, by = wp[i].y_m;
    const double dx = bx - ax, dy = by - ay;
    const double len2 = dx * dx + dy * dy;
    double u = ((x_m - ax) * dx + (y_m - ay) * dy) / len2;
    u = std::clamp(u, 0.0, 1.0);
    const double px = ax + u * dx, py = ay + u * dy;
    const double d2 = (x_m - px) * (x_m - px) + (y_m - py) * (y_m - py);
    if (d2 < best_d2) {  // strict keeps the smaller abscissa on ties
      best_d2 = d2;
      best_s = ab[i - 1] + u * (ab[i] - ab[i - 1]);
    }
  }
  if (std::sqrt(best_d2) > lateral_tolerance_m) {
    throw OffPathError("point (" + std::to_string(x_m) + ", " + std::to_string(y_m) +
                       ") is " + std::to_string(std::sqrt(best_d2)) +
                       " m off the path (tolerance " +
                       std::to_string(lateral_tolerance_m) + " m)");
  }
  return best_s;
}

std::vector<int> lights_in_horizon(double s_m, const std::vector<PhaseSchedule>& lights,
                                   double horizon_m, int max_count) {
  std::vector<int> out;
  for (size_t i = 0; i < lights.size(); ++i) {
    if (lights[i].stop_line_abscissa_m <= s_m) continue;  // already passed
    if (out.empty() && lights[i].stop_line_abscissa_m - s_m >= horizon_m) break;
    out.push_back(static_cast<int>(i));
    if (static_cast<int>(out.size()) >= max_count) break;
  }
  return out;
}

Advisor::Advisor(const Scenario& scenario, AdvisorOptions options)
    : scenario_(&scenario), options_(options) {}

namespace {

Warning classify(double v_ref, double v, double deadband) {
  if (v_ref > v + deadband) return Warning::green;
  if (v_ref < v - deadband) return Warning::red;
  return Warning::none;
}

// Trivial constant-speed "solution" used when the advice is to hold speed.
MotionSolution hold_profile(double v) {
  MotionSolution sol;
  sol.a_mps2 = 0.0;
  sol.v_t_mps = v;
  sol.t1_s = 0.0;
  sol.t_tot_s = 0.0;
  sol.d1_m = 0.0;
  sol.d2_m = 0.0;
  return sol;
}

}  // namespace

Advice Advisor::advise(const VehicleState& state) {
  VehicleState st = state;
  st.s_m = localize(state.x_m, state.y_m, state.psi_rad, scenario_->path,
                    options_.lateral_tolerance_m);

  const auto& lights = scenario_->lights;
  auto ahead = lights_in_horizon(st.s_m, lights, scenario_->limits.horizon_multi_m);
  const bool any_ahead = std::any_of(lights.begin(), lights.end(), [&](const PhaseSchedule& l) {
    return l.stop_line_abscissa_m > st.s_m;
  });
  if (!any_ahead) {
    latch_ = false;  // corridor done
  } else if (!ahead.empty()) {
    latch_ = true;
  } else if (latch_) {
    // Latched: keep analyzing the lights ahead even beyond the horizon.
    for (size_t i = 0; i < lights.size(); ++i) {
      if (lights[i].stop_line_abscissa_m > st.s_m && static_cast<int>(ahead.size()) < 4) {
        ahead.push_back(static_cast<int>(i));
      }
    }
  }

  if (ahead.empty()) {
    Advice idle;
    idle.warning = Warning::none;
    idle.v_ref_mps = st.v_mps;
    idle.a_ref_mps2 = 0.0;
    idle.active = false;
    idle.profile = hold_profile(st.v_mps);
    return idle;
  }

  Advice advice = plan(st, ahead);
  advice.warning = escalate(advice, st, lights[static_cast<size_t>(ahead.front())]);
  return advice;
}

Advice Advisor::plan(const VehicleState& state, const std::vector<int>& ahead) {
  const auto& lights = scenario_->lights;
  const RoadLimits& limits = scenario_->limits;
  const double v = state.v_mps;
  const double l1 = lights[static_cast<size_t>(ahead.front())].stop_line_abscissa_m - state.s_m;

  Advice advice;
  advice.active = true;
  advice.n_green = 0;
  advice.n_pass = 1;

  VelocityInterval v_adm = VelocityInterval::of(limits.v_min_road_mps, limits.v_max_road_mps);

  for (size_t idx = 0; idx < ahead.size(); ++idx) {
    const int tl_index = static_cast<int>(idx) + 1;  // 1-based, per lights ahead
    const PhaseSchedule& sched = lights[static_cast<size_t>(ahead[idx])];
    const double li = sched.stop_line_abscissa_m - state.s_m;
    const Color color = sched.phase_at(state.t_s);
    const auto shifts = next_shifts(sched, state.t_s, 3);
    const int j_max = (color == Color::green) ? 2 : 1;

    bool stored = false;
    for (int j = 1; j <= j_max && !stored; ++j) {
      const VelocityInterval range =
          velocity_range(tl_index, j, color, v, l1, li, shifts, limits,
                         options_.green_margin_s);
      const VelocityInterval joint = intersect(range, v_adm);
      if (joint.empty) continue;  // try the next green phase, if any

      // Actual Velocity Check: keep the current speed when admissible.
      double v_ref;
      std::optional<MotionSolution> maneuver;
      if (joint.contains(v)) {
        v_ref = v;
        maneuver = hold_profile(v);
      } else {
        // Maneuver check: aim for the admissible endpoint closest to the
        // current speed and test it for comfort and feasibility.
        const double endpoint = (std::abs(joint.v_min_mps - v) <= std::abs(joint.v_max_mps - v))
                                    ? joint.v_min_mps
                                    : joint.v_max_mps;
        maneuver = (tl_index == 1) ? uam_fixed_target(v, l1, endpoint)
                                   : uam_csm_fixed_target(v, l1, li, endpoint);
        if (!maneuver) continue;
        const double a = maneuver->a_mps2;
        const bool comfortable = (a < 0.0) ? (-a <= options_.a_comfort_decel_mps2)
                                           : (a <= scenario_->vehicle.a_max_mps2);
        const bool legal = endpoint >= limits.v_min_road_mps &&
                           endpoint <= limits.v_max_road_mps;
        if (!comfortable || !legal) continue;
        v_ref = endpoint;
      }

      advice.v_ref_mps = v_ref;
      advice.a_ref_mps2 = maneuver->a_mps2;
      advice.v_adm = joint;
      advice.n_green = tl_index;
      advice.n_pass = j;
      advice.profile = *maneuver;
      advice.warning = classify(v_ref, v, options_.warning_deadband_mps);
      advice.per_light.push_back({ahead[idx], color, j, joint,
                                  maneuver->t1_s > 0.0
                                      ? arrival_time(v, l1, li, maneuver->v_t_mps)
                                      : (v > 0.0 ? li / v : 0.0)});
      v_adm = joint;
      stored = true;
    }
    if (!stored) break;  // algorithm terminates; last stored warning is issued
  }

  if (advice.n_green == 0) {
    const PhaseSchedule& first = lights[static_cast<size_t>(ahead.front())];
    if (v < limits.v_min_road_mps && first.phase_at(state.t_s) == Color::green) {
      // Standstill at the line: the UAM-over-l1 model cannot represent a
      // pull-away, so launch whenever the green outlasts the crossing.
      const double a = std::min(options_.relaunch_accel_mps2, scenario_->vehicle.a_max_mps2);
      const double t_cross = (-v + std::sqrt(v * v + 2.0 * a * l1)) / a;
      const auto shifts = next_shifts(first, state.t_s, 1);
      const bool green_holds = shifts.empty() ||
                               shifts.front().time_s > t_cross + options_.green_margin_s;
      if (green_holds) {
        MotionSolution launch;
        launch.a_mps2 = a;
        launch.v_t_mps = limits.v_min_road_mps;
        launch.t1_s = (limits.v_min_road_mps - v) / a;
        launch.d1_m = v * launch.t1_s + 0.5 * a * launch.t1_s * launch.t1_s;
        launch.t_tot_s = launch.t1_s;
        advice.warning = Warning::green;
        advice.v_ref_mps = limits.v_min_road_mps;
        advice.a_ref_mps2 = a;
        advice.n_green = 1;
        advice.n_pass = 1;
        advice.profile = launch;
        return advice;
      }
    }
    // No reachable green at the first light: brake to a stop just before
    // the line so the light stays ahead of the vehicle front.
    advice.full_stop = true;
    advice.warning = Warning::red;
    advice.v_ref_mps = 0.0;
    const double l_stop = l1 - options_.stop_standoff_m;
    if (v > 0.0 && l_stop > 0.01) {
      advice.a_ref_mps2 = -(v * v) / (2.0 * l_stop);
      if (auto stop = uam_fixed_target(v, l_stop, 0.0)) advice.profile = *stop;
    } else if (v > 0.0) {
      advice.a_ref_mps2 = -scenario_->vehicle.a_max_mps2;
      advice.profile = hold_profile(0.0);
    } else {
      advice.a_ref_mps2 = 0.0;
      advice.profile = hold_profile(0.0);
    }
  }
  return advice;
}

Warning Advisor::escalate(const Advice& advice, const VehicleState& state,
                          const PhaseSchedule& first_light) const {
  if (advice.warning != Warning::red) return advice.warning;
  const double l1 = first_light.stop_line_abscissa_m - state.s_m;
  if (l1 <= 0.0) return advice.warning;
  const bool red_now = first_light.phase_at(state.t_s) == Color::red;
  bool red_at_arrival = red_now;
  if (state.v_mps > 0.0) {
    red_at_arrival = first_light.phase_at(state.t_s + l1 / state.v_mps) == Color::red;
  }
  const double stop_dist =
      0.5 * state.v_mps * state.v_mps / scenario_->limits.d_comfort_mps2;
  if ((red_now || red_at_arrival) && l1 < options_.escalate_urgency * stop_dist) {
    return Warning::red_sound;
  }
  return advice.warning;
}

}  // namespace glosa
