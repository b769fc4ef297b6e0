#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "glosa/advisor.hpp"
#include "glosa/scenario.hpp"

namespace glosa {

// Piecewise-constant-in-time abscissa bounds over the prediction horizon.
// Breakpoints are interior and strictly increasing; the new interval applies
// at the breakpoint itself. Unbounded sides are +/-infinity.
struct PositionBounds {
  double t_f_s = 0.0;
  std::vector<double> breakpoints_s;
  std::vector<double> s_min_m;  // breakpoints + 1 entries
  std::vector<double> s_max_m;

  static PositionBounds unbounded(double t_f_s);
  std::pair<double, double> at(double t_s) const;
  bool contains(double s_m, double t_s, double tol_m = 0.0) const;
};

/// Builds the admissible time-space region for the first (at most two)
/// lights ahead, per light color and phase-shift time, then intersects the
/// per-light regions. Shift times are snapped to the OCP grid on the side
/// that cannot allow a red crossing. Returns nullopt when the intersection
/// is empty on some interval (contradictory plan).
std::optional<PositionBounds> position_bounds(double s0_m,
                                              const std::vector<PhaseSchedule>& lights_ahead,
                                              double t_now_s, const OcpConfig& cfg,
                                              const Advice& advice);

enum class OcpStatus { optimal, max_iter, infeasible };

const char* to_string(OcpStatus s);

// Trajectories on the uniform grid t_k = k * dt, k = 0..n_steps. Jerk is the
// control, constant per step (j has n_steps entries); s, v, a follow by exact
// integration, so acceleration is continuous across steps by construction.
struct OcpSolution {
  OcpStatus status = OcpStatus::infeasible;
  std::vector<double> t_s, s_m, v_mps, a_mps2, force_n;
  std::vector<double> j_mps3;  // n_steps entries
  double objective = 0.0;
  int outer_iters = 0;
  int inner_iters = 0;
  double max_violation = 0.0;            // normalized constraint residual
  double max_position_violation_m = 0.0;  // vs the position bounds, meters

  double accel_at(double tau_s) const;  // piecewise linear between grid points
  double speed_at(double tau_s) const;
};

// v_ref / a_ref sampled on the OCP grid (n_steps + 1 points each).
struct OcpReference {
  std::vector<double> v_mps;
  std::vector<double> a_mps2;
};

/// Samples the advisor's piecewise motion profile over the horizon, holding
/// the final constant speed beyond the end of the maneuver.
OcpReference sample_reference(const MotionSolution& profile, const OcpConfig& cfg);

// Dual variables kept between solves to warm-start the projected gradient.
struct OcpWarmStart {
  std::vector<double> lambda;
};

/// Direct transcription of the jerk-penalizing OCP: decision variables are
/// the per-step jerks; the quadratic cost tracks the reference and penalizes
/// jerk; the v^2 drag term in the force recovery is relinearized around the
/// previous iterate until fixed point. Each convex subproblem is solved in
/// the dual by a projected gradient with an active-set polish.
OcpSolution solve_ocp(double s0_m, double v0_mps, double a0_mps2,
                      const OcpReference& ref, const PositionBounds& bounds,
                      const VehicleParams& params, const OcpConfig& cfg,
                      OcpWarmStart* warm = nullptr);

// Receding-horizon wrapper: builds bounds and reference from the non-optimal
// advice, solves the OCP and re-issues the advice with the smoothed
// acceleration. Holds warm-start state; one instance per vehicle.
class MpcAdvisor {
 public:
  MpcAdvisor(const Scenario& scenario, AdvisorOptions advisor_options = {});

  /// base must come from Advisor::advise at the same state. On solver
  /// failure returns base unchanged with mpc_fallback set.
  Advice optimal_advise(const VehicleState& state, const Advice& base);

  /// Realized plant acceleration, fed back as the next solve's a0.
  void note_realized_accel(double a_mps2) { current_accel_ = a_mps2; }

  /// One line per solve (status, iterations, objective) at debug verbosity.
  void set_log(std::function<void(const std::string&)> sink) { log_ = std::move(sink); }

  bool has_plan() const { return has_plan_; }
  const OcpSolution& plan() const { return last_; }
  double worst_position_violation_m() const { return worst_position_violation_; }
  int solve_count() const { return solves_; }
  int fallback_count() const { return fallbacks_; }

 private:
  const Scenario* scenario_;
  AdvisorOptions advisor_options_;
  std::function<void(const std::string&)> log_;
  OcpWarmStart warm_;
  OcpSolution last_;
  bool has_plan_ = false;
  double current_accel_ = 0.0;
  double worst_position_violation_ = 0.0;
  int solves_ = 0;
  int fallbacks_ = 0;
};

}  // namespace glosa
