#include "glosa/kinematics.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace glosa {

namespace {
constexpr double kEps = 1e-12;
}

double MotionSolution::speed_at(double tau_s) const {
  if (tau_s <= 0.0) return v_t_mps - a_mps2 * t1_s;  // initial speed
  if (tau_s < t1_s) return (v_t_mps - a_mps2 * t1_s) + a_mps2 * tau_s;
  return v_t_mps;
}

double MotionSolution::distance_at(double tau_s) const {
  const double v0 = v_t_mps - a_mps2 * t1_s;
  if (tau_s <= 0.0) return 0.0;
  if (tau_s < t1_s) return v0 * tau_s + 0.5 * a_mps2 * tau_s * tau_s;
  return d1_m + v_t_mps * (tau_s - t1_s);
}

std::optional<MotionSolution> uam_fixed_time(double v_mps, double d_m, double t_s) {
  if (!(d_m > 0.0) || !(t_s > 0.0) || v_mps < 0.0) return std::nullopt;
  MotionSolution sol;
  sol.a_mps2 = 2.0 * (d_m - v_mps * t_s) / (t_s * t_s);
  sol.v_t_mps = v_mps + sol.a_mps2 * t_s;  // == 2 d / t - v
  if (sol.v_t_mps < 0.0) return std::nullopt;  // would cross zero speed
  sol.t1_s = t_s;
  sol.t_tot_s = t_s;
  sol.d1_m = d_m;
  sol.d2_m = 0.0;
  return sol;
}

std::optional<MotionSolution> uam_fixed_target(double v_mps, double d_m, double v_t_mps) {
  if (!(d_m > 0.0) || v_mps < 0.0 || v_t_mps < 0.0) return std::nullopt;
  if (v_mps + v_t_mps <= kEps) return std::nullopt;  // degenerate: no motion
  MotionSolution sol;
  sol.a_mps2 = (v_t_mps * v_t_mps - v_mps * v_mps) / (2.0 * d_m);
  sol.v_t_mps = v_t_mps;
  sol.t1_s = 2.0 * d_m / (v_mps + v_t_mps);
  sol.t_tot_s = sol.t1_s;
  sol.d1_m = d_m;
  sol.d2_m = 0.0;
  return sol;
}

std::optional<MotionSolution> uam_csm_fixed_total_time(double v_mps, double l1_m,
                                                       double li_m, double t_tot_s,
                                                       double v_cap_mps) {
  if (!(l1_m > 0.0) || !(li_m > l1_m) || !(t_tot_s > 0.0) || v_mps < 0.0) {
    return std::nullopt;
  }
  const double d2 = li_m - l1_m;
  // t_tot * v_t^2 + (t_tot*v - l1 - li) * v_t - d2 * v = 0
  const double b = t_tot_s * v_mps - l1_m - li_m;
  const double disc = b * b + 4.0 * t_tot_s * d2 * v_mps;
  const double sq = std::sqrt(disc);
  const double root_plus = (-b + sq) / (2.0 * t_tot_s);
  // The "-" root is non-physical (<= 0); keep only "+".
  assert((-b - sq) / (2.0 * t_tot_s) <= kEps);
  if (!(root_plus > 0.0)) return std::nullopt;
  if (root_plus > v_cap_mps) return std::nullopt;  // beyond plausibility cap
  MotionSolution sol;
  sol.v_t_mps = root_plus;
  sol.t1_s = t_tot_s - d2 / root_plus;
  if (!(sol.t1_s > 0.0)) return std::nullopt;  // constant leg exceeds t_tot
  sol.a_mps2 = 2.0 * l1_m / (sol.t1_s * sol.t1_s) - 2.0 * v_mps / sol.t1_s;
  sol.t_tot_s = t_tot_s;
  sol.d1_m = l1_m;
  sol.d2_m = d2;
  return sol;
}

std::optional<MotionSolution> uam_csm_fixed_target(double v_mps, double l1_m,
                                                   double li_m, double v_t_mps) {
  if (!(li_m > l1_m) || !(v_t_mps > 0.0)) return std::nullopt;
  auto uam = uam_fixed_target(v_mps, l1_m, v_t_mps);
  if (!uam) return std::nullopt;
  MotionSolution sol = *uam;
  sol.d2_m = li_m - l1_m;
  sol.t_tot_s = sol.t1_s + sol.d2_m / v_t_mps;
  return sol;
}

VelocityInterval VelocityInterval::of(double lo, double hi) {
  VelocityInterval iv;
  if (lo <= hi) {
    iv.v_min_mps = lo;
    iv.v_max_mps = hi;
    iv.empty = false;
  }
  return iv;
}

VelocityInterval intersect(const VelocityInterval& a, const VelocityInterval& b) {
  if (a.empty || b.empty) return VelocityInterval::make_empty();
  VelocityInterval out;
  out.v_min_mps = std::max(a.v_min_mps, b.v_min_mps);
  out.v_max_mps = std::min(a.v_max_mps, b.v_max_mps);
  if (out.v_min_mps > out.v_max_mps) return VelocityInterval::make_empty();
  out.empty = false;
  out.min_solution = (a.v_min_mps >= b.v_min_mps) ? a.min_solution : b.min_solution;
  out.max_solution = (a.v_max_mps <= b.v_max_mps) ? a.max_solution : b.max_solution;
  return out;
}

double arrival_time(double v_mps, double l1_m, double li_m, double v_t_mps) {
  const double t1 = 2.0 * l1_m / (v_mps + v_t_mps);
  if (li_m <= l1_m) return t1;
  return t1 + (li_m - l1_m) / v_t_mps;
}

namespace {

// Profile whose arrival at the target light happens exactly at time T, or
// nullopt when no non-stopping profile does.
std::optional<MotionSolution> solve_arrival_at(int tl_index, double v, double l1,
                                               double li, double T) {
  if (!(T > 0.0)) return std::nullopt;
  if (tl_index == 1) return uam_fixed_time(v, l1, T);
  return uam_csm_fixed_total_time(v, l1, li, T);
}

// Profile with target speed v_t for this light geometry.
std::optional<MotionSolution> solve_target(int tl_index, double v, double l1,
                                           double li, double v_t) {
  if (tl_index == 1) return uam_fixed_target(v, l1, v_t);
  return uam_csm_fixed_target(v, l1, li, v_t);
}

}  // namespace

VelocityInterval velocity_range(int tl_index, int green_phase, Color current,
                                double v_mps, double l1_m, double li_m,
                                const std::vector<ShiftEvent>& shifts,
                                const RoadLimits& limits, double margin_s) {
  if (tl_index < 1 || green_phase < 1 || green_phase > 2) {
    return VelocityInterval::make_empty();
  }
  if (green_phase == 2 && current != Color::green) {
    return VelocityInterval::make_empty();  // red lights: first green only
  }

  // Arrival window [t_lo, t_hi]. t_lo < 0 means "no earliest-arrival bound".
  double t_lo = -1.0;
  double t_hi = -1.0;
  if (current == Color::green && green_phase == 1) {
    if (shifts.empty()) return VelocityInterval::make_empty();
    t_hi = shifts[0].time_s - margin_s;  // green -> red shift
  } else if (current == Color::green && green_phase == 2) {
    if (shifts.size() < 3) return VelocityInterval::make_empty();
    t_lo = shifts[1].time_s + margin_s;  // red -> green shift
    t_hi = shifts[2].time_s - margin_s;  // second green -> red shift
  } else {  // red, first green
    if (shifts.size() < 2) return VelocityInterval::make_empty();
    t_lo = shifts[0].time_s + margin_s;  // red -> green shift
    t_hi = shifts[1].time_s - margin_s;  // green -> red shift
  }
  if (t_hi <= 0.0 || (t_lo > 0.0 && t_lo >= t_hi)) {
    return VelocityInterval::make_empty();
  }

  // Latest admissible arrival gives the minimum target speed.
  double v_min = 0.0;
  std::optional<MotionSolution> min_sol = solve_arrival_at(tl_index, v_mps, l1_m, li_m, t_hi);
  if (min_sol) {
    v_min = min_sol->v_t_mps;
  } else if (tl_index == 1) {
    // Arriving exactly at t_hi would require stopping first; any slower
    // target still arrives earlier than t_hi, so only the zero floor binds.
    v_min = 0.0;
    min_sol.reset();
  } else {
    return VelocityInterval::make_empty();
  }

  // Earliest admissible arrival (when bounded) gives the maximum target
  // speed, further capped by the road limit.
  double v_max = limits.v_max_road_mps;
  std::optional<MotionSolution> max_sol;
  if (t_lo > 0.0) {
    const auto lo_sol = solve_arrival_at(tl_index, v_mps, l1_m, li_m, t_lo);
    if (!lo_sol) return VelocityInterval::make_empty();  // cannot arrive late enough
    v_max = std::min(lo_sol->v_t_mps, limits.v_max_road_mps);
    if (lo_sol->v_t_mps <= limits.v_max_road_mps) max_sol = lo_sol;
  }
  if (v_min > v_max) return VelocityInterval::make_empty();
  if (!max_sol) max_sol = solve_target(tl_index, v_mps, l1_m, li_m, v_max);

  VelocityInterval out = VelocityInterval::of(v_min, v_max);
  out.min_solution = min_sol ? min_sol : solve_target(tl_index, v_mps, l1_m, li_m, v_min);
  out.max_solution = max_sol;
  return out;
}

}  // namespace glosa
