#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "glosa/advisor.hpp"
#include "glosa/mpc.hpp"
#include "glosa/scenario.hpp"

namespace glosa {

enum class DriverKind { baseline, advised_nonoptimal, advised_optimal };

const char* to_string(DriverKind k);
std::optional<DriverKind> driver_kind_from(const std::string& name);

class SimTimeoutError : public std::runtime_error {
 public:
  explicit SimTimeoutError(const std::string& what) : std::runtime_error(what) {}
};

class CompareError : public std::runtime_error {
 public:
  explicit CompareError(const std::string& what) : std::runtime_error(what) {}
};

struct PlantState {
  double s_m = 0.0;
  double v_mps = 0.0;
  double a_mps2 = 0.0;   // realized acceleration over the last step
  double force_n = 0.0;  // saturated longitudinal force over the last step
};

/// Point-mass longitudinal plant. The force needed for the commanded
/// acceleration is saturated to [f_min, f_max], the realized acceleration is
/// recovered from the saturated force, and the state advances by the exact
/// constant-acceleration update with the speed floored at zero.
PlantState step_plant(const PlantState& state, double commanded_a_mps2,
                      const VehicleParams& params, double dt_s);

struct EnergySample {
  double power_w = 0.0;
  double iec_j_per_m = 0.0;
  double aec_j_per_m = 0.0;
  double distance_m = 0.0;  // cumulative
  double time_s = 0.0;      // cumulative
};

constexpr double kJPerMToKwhPer100km = 100000.0 / 3.6e6;

// Instantaneous/average energy consumption accounting. Steps with zero
// travelled distance are skipped; negative traction contributes through the
// optional regeneration efficiency.
class EnergyAccumulator {
 public:
  explicit EnergyAccumulator(double regen_efficiency = 0.0)
      : regen_(regen_efficiency) {}

  /// Returns the sample for the step, or nullopt when ds == 0 (standstill).
  std::optional<EnergySample> step(double force_n, double ds_m, double dt_s);

  double aec_j_per_m() const { return aec_; }
  double aec_kwh_per_100km() const { return aec_ * kJPerMToKwhPer100km; }
  long samples() const { return n_; }

 private:
  double regen_ = 0.0;
  double aec_ = 0.0;
  long n_ = 0;
  double distance_m_ = 0.0;
  double time_s_ = 0.0;
};

struct SimOptions {
  double timeout_s = 600.0;
  int mpc_resolve_every = 4;      // plant steps between OCP re-solves
  double regen_efficiency = 0.0;  // 0 = traction power clamped at zero
  double stop_speed_mps = 0.1;
  double stop_hold_s = 1.0;
  double a_launch_mps2 = 1.0;
  double cruise_gain = 0.8;       // speed-hold proportional gain, 1/s
  double baseline_standoff_m = 1.0;
  unsigned seed = 0;              // recorded in the summary; the run is deterministic
  AdvisorOptions advisor;
  std::function<void(const std::string&)> mpc_log;  // per-solve debug lines
};

// Cruise at the initial speed; when the first light ahead will be red at the
// projected arrival and lies within the comfort stopping envelope, brake to
// a stop just before the line, hold while red, relaunch on green.
class BaselineDriver {
 public:
  BaselineDriver(const Scenario& scenario, const SimOptions& options);
  double command(const PlantState& state, double t_s);

 private:
  const Scenario* scenario_;
  SimOptions options_;
  double cruise_mps_;
  int committed_stop_light_ = -1;
};

// Follows the advisory perfectly: the non-optimal kind applies a_ref from
// the advice, the optimal kind tracks the receding-horizon acceleration plan
// (re-solved every mpc_resolve_every steps) and falls back to the advice on
// solver failure.
class AdvisedDriver {
 public:
  AdvisedDriver(const Scenario& scenario, DriverKind kind, const SimOptions& options);
  double command(const PlantState& state, double t_s, int step_index, Warning* warning);
  const MpcAdvisor& mpc() const { return mpc_; }
  const Advice& last_advice() const { return last_advice_; }

 private:
  const Scenario* scenario_;
  DriverKind kind_;
  SimOptions options_;
  Advisor advisor_;
  MpcAdvisor mpc_;
  Advice last_advice_;
  bool plan_valid_ = false;
  double plan_t0_ = 0.0;
};

struct Crossing {
  int light_index = 0;
  double t_s = 0.0;
  Color color = Color::green;
};

struct StepRecord {
  double t_s = 0.0;
  double s_m = 0.0;
  double v_mps = 0.0;
  double a_mps2 = 0.0;
  double j_mps3 = 0.0;
  double force_n = 0.0;
  Warning warning = Warning::none;
  std::vector<Color> light_colors;
  double iec_j_per_m = 0.0;
  double aec_j_per_m = 0.0;
};

struct SimSummary {
  std::string scenario_fingerprint;
  DriverKind kind = DriverKind::baseline;
  unsigned seed = 0;
  int stop_count = 0;
  double travel_time_s = 0.0;
  double distance_m = 0.0;
  double final_aec_j_per_m = 0.0;
  double final_aec_kwh_100km = 0.0;
  double rms_jerk_mps3 = 0.0;
  std::vector<Crossing> crossings;
  bool red_crossing = false;  // any stop line crossed while red
  int mpc_solves = 0;
  int mpc_fallbacks = 0;
  double max_mpc_position_violation_m = 0.0;
};

struct SimTrace {
  std::vector<StepRecord> steps;
  SimSummary summary;
};

/// Closed-loop run: sense -> (advise) -> drive -> plant -> record, at the
/// scenario step until the end of the path. Throws SimTimeoutError if the
/// vehicle fails to finish within options.timeout_s.
SimTrace run(const Scenario& scenario, DriverKind kind, SimOptions options = {});

struct CompareReport {
  std::string scenario_fingerprint;
  std::vector<SimSummary> entries;
  /// 100 * (aec_first - aec_k) / aec_first for each entry.
  std::vector<double> aec_reduction_pct_vs_first;
};

/// Joint report over runs of the same scenario; throws CompareError when the
/// traces come from different scenarios.
CompareReport compare(const std::vector<SimTrace>& traces);

}  // namespace glosa
