#include "glosa/sim.hpp"

#include <algorithm>
#include <cmath>

namespace glosa {

const char* to_string(DriverKind k) {
  switch (k) {
    case DriverKind::baseline: return "baseline";
    case DriverKind::advised_nonoptimal: return "advised_nonoptimal";
    case DriverKind::advised_optimal: return "advised_optimal";
  }
  return "?";
}

std::optional<DriverKind> driver_kind_from(const std::string& name) {
  if (name == "baseline") return DriverKind::baseline;
  if (name == "advised_nonoptimal") return DriverKind::advised_nonoptimal;
  if (name == "advised_optimal") return DriverKind::advised_optimal;
  return std::nullopt;
}

PlantState step_plant(const PlantState& state, double commanded_a_mps2,
                      const VehicleParams& params, double dt_s) {
  const double c_drag = 0.5 * params.frontal_area_m2 * params.air_density_kgpm3 *
                        params.drag_coeff;
  const double resist = c_drag * state.v_mps * state.v_mps +
                        params.mass_kg * params.gravity_mps2 * params.rolling_coeff;
  const double f_cmd = params.mass_kg * commanded_a_mps2 + resist;
  const double f_sat = std::clamp(f_cmd, params.f_min_n, params.f_max_n);
  const double a = (f_sat - resist) / params.mass_kg;

  PlantState next;
  next.a_mps2 = a;
  next.force_n = f_sat;
  const double v_unfloored = state.v_mps + a * dt_s;
  if (v_unfloored < 0.0 && a < 0.0) {
    // Comes to rest within the step; the vehicle does not reverse.
    const double t_stop = -state.v_mps / a;
    next.s_m = state.s_m + state.v_mps * t_stop + 0.5 * a * t_stop * t_stop;
    next.v_mps = 0.0;
  } else {
    next.v_mps = std::max(0.0, v_unfloored);
    next.s_m = state.s_m + state.v_mps * dt_s + 0.5 * a * dt_s * dt_s;
  }
  return next;
}

std::optional<EnergySample> EnergyAccumulator::step(double force_n, double ds_m,
                                                    double dt_s) {
  time_s_ += dt_s;
  if (!(ds_m > 0.0)) return std::nullopt;  // IEC undefined at zero distance
  distance_m_ += ds_m;
  const double v_avg = ds_m / dt_s;
  const double traction = force_n >= 0.0 ? force_n : regen_ * force_n;
  const double power = traction * v_avg;
  const double iec = power * dt_s / ds_m;  // == traction
  aec_ = (iec + static_cast<double>(n_) * aec_) / static_cast<double>(n_ + 1);
  ++n_;
  EnergySample sample;
  sample.power_w = power;
  sample.iec_j_per_m = iec;
  sample.aec_j_per_m = aec_;
  sample.distance_m = distance_m_;
  sample.time_s = time_s_;
  return sample;
}

BaselineDriver::BaselineDriver(const Scenario& scenario, const SimOptions& options)
    : scenario_(&scenario), options_(options), cruise_mps_(scenario.initial_speed_mps) {}

double BaselineDriver::command(const PlantState& state, double t_s) {
  const auto& lights = scenario_->lights;
  const RoadLimits& limits = scenario_->limits;

  int first_ahead = -1;
  for (size_t i = 0; i < lights.size(); ++i) {
    if (lights[i].stop_line_abscissa_m > state.s_m) {
      first_ahead = static_cast<int>(i);
      break;
    }
  }
  if (committed_stop_light_ >= 0 && committed_stop_light_ != first_ahead) {
    committed_stop_light_ = -1;  // the latched light was passed
  }

  auto hold = [&](double target) {
    return std::clamp(options_.cruise_gain * (target - state.v_mps), -1.0,
                      options_.a_launch_mps2);
  };

  if (first_ahead < 0) return hold(cruise_mps_);

  const PhaseSchedule& light = lights[static_cast<size_t>(first_ahead)];
  const double dist = light.stop_line_abscissa_m - options_.baseline_standoff_m - state.s_m;

  if (committed_stop_light_ == first_ahead) {
    if (light.phase_at(t_s) == Color::green) {
      committed_stop_light_ = -1;  // relaunch
      return hold(cruise_mps_);
    }
    if (state.v_mps < options_.stop_speed_mps && dist < 2.0) {
      return -1.0;  // brake-hold at the line; the plant floors v at zero
    }
    if (dist <= 0.05) return -scenario_->vehicle.a_max_mps2;  // at the line
    return -(state.v_mps * state.v_mps) / (2.0 * std::max(dist, 0.05));
  }

  // Constant-speed arrival projection; commit to a stop when the phase will
  // be red on arrival and the line is inside the comfort stopping envelope.
  if (state.v_mps > options_.stop_speed_mps && dist > 0.0) {
    const double t_arrival = dist / state.v_mps;
    const bool red_at_arrival = light.phase_at(t_s + t_arrival) == Color::red;
    const double envelope =
        0.5 * state.v_mps * state.v_mps / limits.d_comfort_mps2;
    if (red_at_arrival && dist <= envelope) {
      committed_stop_light_ = first_ahead;
      return -(state.v_mps * state.v_mps) / (2.0 * std::max(dist, 0.05));
    }
  } else if (dist > 0.0 && dist < 2.0 && light.phase_at(t_s) == Color::red) {
    committed_stop_light_ = first_ahead;  // crept to the line on red
    return -1.0;
  }
  return hold(cruise_mps_);
}

namespace {

// Exact in-step crossing time of a stop line under constant acceleration.
double crossing_time(double s_prev, double v_prev, double a, double line, double dt) {
  const double d = line - s_prev;
  if (std::abs(a) < 1e-9) {
    return v_prev > 1e-12 ? std::clamp(d / v_prev, 0.0, dt) : dt;
  }
  const double disc = v_prev * v_prev + 2.0 * a * d;
  if (disc <= 0.0) return dt;
  const double tau = (-v_prev + std::sqrt(disc)) / a;
  return std::clamp(tau, 0.0, dt);
}

}  // namespace

AdvisedDriver::AdvisedDriver(const Scenario& scenario, DriverKind kind,
                             const SimOptions& options)
    : scenario_(&scenario),
      kind_(kind),
      options_(options),
      advisor_(scenario, options.advisor),
      mpc_(scenario, options.advisor) {
  if (options.mpc_log) mpc_.set_log(options.mpc_log);
}

double AdvisedDriver::command(const PlantState& plant, double t_s, int step_index,
                              Warning* warning) {
  VehicleState state;
  const Waypoint p = scenario_->path.point_at(plant.s_m);
  state.x_m = p.x_m;
  state.y_m = p.y_m;
  state.psi_rad = scenario_->path.heading_at(plant.s_m);
  state.v_mps = plant.v_mps;
  state.t_s = t_s;

  last_advice_ = advisor_.advise(state);

  double a_cmd;
  if (kind_ == DriverKind::advised_optimal && last_advice_.active) {
    mpc_.note_realized_accel(plant.a_mps2);
    if (step_index % options_.mpc_resolve_every == 0) {
      Advice optimal = mpc_.optimal_advise(state, last_advice_);
      if (!optimal.mpc_fallback) {
        plan_valid_ = true;
        plan_t0_ = t_s;
      } else {
        plan_valid_ = false;
      }
      last_advice_ = optimal;
    } else if (plan_valid_) {
      last_advice_.a_ref_mps2 = mpc_.plan().accel_at(t_s - plan_t0_);
      last_advice_.mpc_fallback = false;
    }
    a_cmd = plan_valid_ ? mpc_.plan().accel_at(t_s - plan_t0_)
                        : last_advice_.a_ref_mps2;
  } else {
    plan_valid_ = false;
    a_cmd = last_advice_.active
                ? last_advice_.a_ref_mps2
                : std::clamp(options_.cruise_gain *
                                 (last_advice_.v_ref_mps - plant.v_mps),
                             -1.0, options_.a_launch_mps2);
  }
  *warning = last_advice_.warning;
  return a_cmd;
}

SimTrace run(const Scenario& scenario, DriverKind kind, SimOptions options) {
  const double dt = scenario.sim_step_s;
  const double length = scenario.path.total_length_m();

  SimTrace trace;
  trace.summary.scenario_fingerprint = scenario.fingerprint();
  trace.summary.kind = kind;
  trace.summary.seed = options.seed;

  BaselineDriver baseline(scenario, options);
  AdvisedDriver advised(scenario, kind, options);
  EnergyAccumulator energy(options.regen_efficiency);

  PlantState plant;
  plant.s_m = 0.0;
  plant.v_mps = scenario.initial_speed_mps;

  double t = 0.0;
  double stopped_for_s = 0.0;
  bool stop_counted = false;
  double jerk_sq_sum = 0.0;
  long jerk_samples = 0;

  auto light_colors_at = [&](double when) {
    std::vector<Color> colors;
    colors.reserve(scenario.lights.size());
    for (const auto& l : scenario.lights) colors.push_back(l.phase_at(when));
    return colors;
  };

  StepRecord first;
  first.t_s = 0.0;
  first.v_mps = plant.v_mps;
  first.light_colors = light_colors_at(0.0);
  trace.steps.push_back(first);

  int step_index = 0;
  while (plant.s_m < length) {
    if (t > options.timeout_s) {
      throw SimTimeoutError("simulation exceeded " + std::to_string(options.timeout_s) +
                            " s at s = " + std::to_string(plant.s_m) + " m");
    }
    Warning warning = Warning::none;
    double a_cmd = 0.0;
    if (kind == DriverKind::baseline) {
      a_cmd = baseline.command(plant, t);
    } else {
      a_cmd = advised.command(plant, t, step_index, &warning);
    }

    const PlantState prev = plant;
    plant = step_plant(prev, a_cmd, scenario.vehicle, dt);

    // Stop-line crossings, with the in-step crossing instant resolved.
    for (size_t i = 0; i < scenario.lights.size(); ++i) {
      const double line = scenario.lights[i].stop_line_abscissa_m;
      if (prev.s_m < line && plant.s_m >= line) {
        const double tau = crossing_time(prev.s_m, prev.v_mps, plant.a_mps2, line, dt);
        const Color color = scenario.lights[i].phase_at(t + tau);
        trace.summary.crossings.push_back({static_cast<int>(i), t + tau, color});
        if (kind != DriverKind::baseline && color == Color::red) {
          trace.summary.red_crossing = true;
        }
      }
    }

    const double ds = plant.s_m - prev.s_m;
    const auto sample = energy.step(plant.force_n, ds, dt);

    if (plant.v_mps < options.stop_speed_mps) {
      stopped_for_s += dt;
      if (stopped_for_s >= options.stop_hold_s && !stop_counted) {
        ++trace.summary.stop_count;
        stop_counted = true;
      }
    } else {
      stopped_for_s = 0.0;
      stop_counted = false;
    }

    const double jerk = (plant.a_mps2 - prev.a_mps2) / dt;
    jerk_sq_sum += jerk * jerk;
    ++jerk_samples;

    t += dt;
    ++step_index;

    StepRecord rec;
    rec.t_s = t;
    rec.s_m = plant.s_m;
    rec.v_mps = plant.v_mps;
    rec.a_mps2 = plant.a_mps2;
    rec.j_mps3 = jerk;
    rec.force_n = plant.force_n;
    rec.warning = warning;
    rec.light_colors = light_colors_at(t);
    rec.iec_j_per_m = sample ? sample->iec_j_per_m : 0.0;
    rec.aec_j_per_m = energy.aec_j_per_m();
    trace.steps.push_back(std::move(rec));
  }

  trace.summary.travel_time_s = t;
  trace.summary.distance_m = plant.s_m;
  trace.summary.final_aec_j_per_m = energy.aec_j_per_m();
  trace.summary.final_aec_kwh_100km = energy.aec_kwh_per_100km();
  trace.summary.rms_jerk_mps3 =
      jerk_samples > 0 ? std::sqrt(jerk_sq_sum / static_cast<double>(jerk_samples)) : 0.0;
  if (kind == DriverKind::advised_optimal) {
    trace.summary.mpc_solves = advised.mpc().solve_count();
    trace.summary.mpc_fallbacks = advised.mpc().fallback_count();
    trace.summary.max_mpc_position_violation_m = advised.mpc().worst_position_violation_m();
  }
  return trace;
}

CompareReport compare(const std::vector<SimTrace>& traces) {
  if (traces.size() < 2) {
    throw CompareError("compare needs at least two traces");
  }
  CompareReport report;
  report.scenario_fingerprint = traces.front().summary.scenario_fingerprint;
  for (const auto& tr : traces) {
    if (tr.summary.scenario_fingerprint != report.scenario_fingerprint) {
      throw CompareError("traces come from different scenarios: " +
                         report.scenario_fingerprint + " vs " +
                         tr.summary.scenario_fingerprint);
    }
    report.entries.push_back(tr.summary);
  }
  const double base_aec = report.entries.front().final_aec_j_per_m;
  for (const auto& e : report.entries) {
    report.aec_reduction_pct_vs_first.push_back(
        base_aec != 0.0 ? 100.0 * (base_aec - e.final_aec_j_per_m) / base_aec : 0.0);
  }
  return report;
}

}  // namespace glosa
