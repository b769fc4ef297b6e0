#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "glosa/mpc.hpp"
#include "glosa/sim.hpp"
#include "test_helpers.hpp"

using namespace glosa;
using namespace glosa::testing;

namespace {

OcpConfig small_cfg(int n_steps, double t_f) {
  OcpConfig cfg;
  cfg.t_f_s = t_f;
  cfg.n_steps = n_steps;
  return cfg;
}

MotionSolution constant_profile(double v) {
  MotionSolution p;
  p.v_t_mps = v;
  return p;
}

// Propagates a jerk sequence with the same exact per-step integration the
// solver uses and returns (objective, feasible) for the brute-force lattice.
struct Propagated {
  double objective = 0.0;
  bool feasible = true;
  std::vector<double> s, v, a;
};

Propagated propagate(const std::vector<double>& j, double s0, double v0, double a0,
                     const OcpReference& ref, const PositionBounds& bounds,
                     const VehicleParams& p, const OcpConfig& cfg, double tol = 1e-9) {
  Propagated out;
  const double dt = cfg.dt();
  const double c_drag = 0.5 * p.frontal_area_m2 * p.air_density_kgpm3 * p.drag_coeff;
  const double c_roll = p.mass_kg * p.gravity_mps2 * p.rolling_coeff;
  double s = s0, v = v0, a = a0;
  out.s = {s};
  out.v = {v};
  out.a = {a};
  for (size_t k = 0; k < j.size(); ++k) {
    if (j[k] < p.j_min_mps3 - tol || j[k] > p.j_max_mps3 + tol) out.feasible = false;
    s += v * dt + 0.5 * a * dt * dt + j[k] * dt * dt * dt / 6.0;
    v += a * dt + 0.5 * j[k] * dt * dt;
    a += j[k] * dt;
    out.s.push_back(s);
    out.v.push_back(v);
    out.a.push_back(a);
    const auto [lo, hi] = bounds.at((k + 1) * dt);
    if (s < lo - tol || s > hi + tol) out.feasible = false;
    if (v < -tol) out.feasible = false;
    if (a > p.a_max_mps2 + tol) out.feasible = false;
    const double force = p.mass_kg * a + c_drag * v * v + c_roll;
    if (force < p.f_min_n - 1e-6 || force > p.f_max_n + 1e-6) out.feasible = false;
    const double dv = v - ref.v_mps[k + 1];
    const double da = a - ref.a_mps2[k + 1];
    out.objective += dt * (cfg.w_v * dv * dv + cfg.w_a * da * da + cfg.w_j * j[k] * j[k]);
  }
  return out;
}

}  // namespace

TEST_CASE("position_bounds: red light, shift beyond the horizon") {
  OcpConfig cfg = small_cfg(30, 6.0);
  Advice advice;
  advice.n_green = 0;
  // red until t=10 > t_f: stay ahead for the whole horizon
  auto b = position_bounds(0.0, {light(50, 75, 40, 10 + 35)}, 0.0, cfg, advice);
  // offset 45: green [45, 85) - 75 -> [-30, 10)? tau(0)=floor_mod(-45,75)=30 < 40: green!
  // build explicitly instead: red now, next green at +10
  auto bb = position_bounds(0.0, {light(50, 75, 30, 10)}, 0.0, cfg, advice);
  REQUIRE(bb);
  CHECK(bb->breakpoints_s.empty());
  CHECK(bb->s_max_m[0] == doctest::Approx(50.0));
  CHECK(bb->at(3.0).second == doctest::Approx(50.0));
  CHECK(std::isinf(bb->at(3.0).first));
  (void)b;
}

TEST_CASE("position_bounds: red light, shift inside the horizon") {
  OcpConfig cfg = small_cfg(30, 6.0);  // dt = 0.2
  Advice advice;
  advice.n_green = 0;
  // red now, green at t=3.1 -> constraint until the grid point at 3.2
  auto b = position_bounds(0.0, {light(50, 75, 30, 3.1)}, 0.0, cfg, advice);
  REQUIRE(b);
  REQUIRE(b->breakpoints_s.size() == 1);
  CHECK(b->breakpoints_s[0] == doctest::Approx(3.2));
  CHECK(b->at(3.0).second == doctest::Approx(50.0));
  CHECK(std::isinf(b->at(3.3).second));
}

TEST_CASE("position_bounds: green light the plan passes forces being beyond") {
  OcpConfig cfg = small_cfg(30, 6.0);
  Advice advice;
  advice.n_green = 1;
  advice.n_pass = 1;
  // green now, red at t=4.05 -> snapped down to 4.0: s_min = 50 from then on
  auto b = position_bounds(0.0, {light(50, 75, 40, 75 - (40 - 4.05))}, 0.0, cfg, advice);
  REQUIRE(b);
  REQUIRE(b->breakpoints_s.size() == 1);
  CHECK(b->breakpoints_s[0] == doctest::Approx(4.0));
  CHECK(std::isinf(b->at(2.0).second));
  CHECK(b->at(4.0).first == doctest::Approx(50.0));
  CHECK(b->at(5.9).first == doctest::Approx(50.0));
}

TEST_CASE("position_bounds: green light the plan cannot pass forces staying ahead") {
  OcpConfig cfg = small_cfg(30, 6.0);
  Advice advice;
  advice.n_green = 0;  // N_green < i
  auto b = position_bounds(0.0, {light(50, 75, 40, 75 - (40 - 4.05))}, 0.0, cfg, advice);
  REQUIRE(b);
  CHECK(b->at(4.0).second == doctest::Approx(50.0));
  CHECK(std::isinf(b->at(2.0).second));  // free before the shift
  // same when the plan targets the second green
  Advice pass2;
  pass2.n_green = 1;
  pass2.n_pass = 2;
  auto b2 = position_bounds(0.0, {light(50, 75, 40, 75 - (40 - 4.05))}, 0.0, cfg, pass2);
  REQUIRE(b2);
  CHECK(b2->at(4.0).second == doctest::Approx(50.0));
}

TEST_CASE("position_bounds: two lights intersect; contradictions are reported") {
  OcpConfig cfg = small_cfg(30, 6.0);
  Advice advice;
  advice.n_green = 2;
  advice.n_pass = 1;
  // light1 green, plan passes during current green ending at 4.0
  // light2 red until beyond horizon
  auto b = position_bounds(0.0,
                           {light(50, 75, 40, 75 - (40 - 4.0)), light(120, 75, 30, 10.0)},
                           0.0, cfg, advice);
  REQUIRE(b);
  CHECK(b->at(4.1).first == doctest::Approx(50.0));
  CHECK(b->at(4.1).second == doctest::Approx(120.0));
  CHECK(b->at(0.0).second == doctest::Approx(120.0));

  // narrow but feasible: beyond light1 from t=2.0, ahead of a light 0.5 m
  // past it that stays red through the horizon
  Advice weird;
  weird.n_green = 1;
  weird.n_pass = 1;
  auto narrow = position_bounds(
      0.0, {light(50, 75, 40, 75 - (40 - 2.0)), light(50.5, 75, 30, 10.0)}, 0.0, cfg, weird);
  REQUIRE(narrow);
  CHECK(narrow->at(2.0).first == doctest::Approx(50.0));
  CHECK(narrow->at(2.0).second == doctest::Approx(50.5));

  // contradictory plan: claims to pass light2 during a green ending at 2.0 s
  // while light1 stays red until 4.0 s -> on [2, 4) the region is empty
  Advice lying;
  lying.n_green = 2;
  lying.n_pass = 1;
  auto empty = position_bounds(0.0, {light(50, 75, 30, 4.0), light(120, 75, 30, 47.0)},
                               0.0, cfg, lying);
  CHECK_FALSE(empty);
}

TEST_CASE("position_bounds: pre-violated when a light is behind") {
  OcpConfig cfg = small_cfg(30, 6.0);
  Advice advice;
  CHECK_FALSE(position_bounds(60.0, {light(50, 75, 30, 10)}, 0.0, cfg, advice));
}

TEST_CASE("sample_reference holds the target speed beyond the maneuver") {
  OcpConfig cfg = small_cfg(30, 6.0);
  auto sol = uam_fixed_target(10.0, 40.0, 12.0);
  REQUIRE(sol);
  const OcpReference ref = sample_reference(*sol, cfg);
  REQUIRE(ref.v_mps.size() == 31);
  CHECK(ref.v_mps[0] == doctest::Approx(10.0));
  CHECK(ref.a_mps2[0] == doctest::Approx(sol->a_mps2));
  // t1 = 80/22 = 3.64 s; beyond it the reference is flat at 12
  CHECK(ref.v_mps[30] == doctest::Approx(12.0));
  CHECK(ref.a_mps2[30] == doctest::Approx(0.0));
  for (size_t k = 1; k < ref.v_mps.size(); ++k) CHECK(ref.v_mps[k] >= ref.v_mps[k - 1] - 1e-12);
}

TEST_CASE("solve_ocp: reference-tracking fixed point has zero cost") {
  VehicleParams p;
  OcpConfig cfg = small_cfg(30, 6.0);
  const double v0 = 10.0;
  const OcpReference ref = sample_reference(constant_profile(v0), cfg);
  const auto bounds = PositionBounds::unbounded(cfg.t_f_s);
  const OcpSolution sol = solve_ocp(0.0, v0, 0.0, ref, bounds, p, cfg);
  REQUIRE(sol.status == OcpStatus::optimal);
  CHECK(sol.objective == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
  for (double j : sol.j_mps3) CHECK(std::abs(j) < 1e-6);
  for (double a : sol.a_mps2) CHECK(std::abs(a) < 1e-6);
  for (double v : sol.v_mps) CHECK(v == doctest::Approx(v0).epsilon(1e-9));
}

TEST_CASE("solve_ocp: zero tracking weights, free bounds, nonzero a0") {
  // min integral of j^2 with only the jerk in the cost: j = 0 is feasible
  // (v stays positive, forces inside the box) and uniquely optimal
  VehicleParams p;
  OcpConfig cfg = small_cfg(5, 1.0);
  cfg.w_v = 0.0;
  cfg.w_a = 0.0;
  const OcpReference ref = sample_reference(constant_profile(10.0), cfg);
  const auto bounds = PositionBounds::unbounded(cfg.t_f_s);
  const OcpSolution sol = solve_ocp(0.0, 10.0, 1.0, ref, bounds, p, cfg);
  REQUIRE(sol.status == OcpStatus::optimal);
  CHECK(sol.objective == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
  for (double j : sol.j_mps3) CHECK(std::abs(j) < 1e-6);
  // acceleration is carried along unchanged
  CHECK(sol.a_mps2.back() == doctest::Approx(1.0));
}

TEST_CASE("solve_ocp: step reference is tracked smoothly within jerk bounds") {
  VehicleParams p;
  OcpConfig cfg = small_cfg(30, 6.0);
  const double v0 = 10.0;
  const OcpReference ref = sample_reference(constant_profile(v0 + 2.0), cfg);
  const auto bounds = PositionBounds::unbounded(cfg.t_f_s);
  const OcpSolution sol = solve_ocp(0.0, v0, 0.0, ref, bounds, p, cfg);
  REQUIRE(sol.status == OcpStatus::optimal);
  const double dt = cfg.dt();
  for (size_t k = 0; k + 1 < sol.a_mps2.size(); ++k) {
    CHECK(std::abs(sol.a_mps2[k + 1] - sol.a_mps2[k]) <= p.j_max_mps3 * dt + 1e-9);
  }
  // the speed moves toward the step without overshooting it wildly
  CHECK(sol.v_mps.back() > v0 + 1.0);
  CHECK(sol.v_mps.back() < v0 + 2.5);
  // strictly better than refusing to move (the a = 0 trajectory)
  const Propagated zero = propagate(std::vector<double>(30, 0.0), 0.0, v0, 0.0, ref,
                                    bounds, p, cfg);
  CHECK(sol.objective < zero.objective);
}

TEST_CASE("solve_ocp: coarse brute-force lattice is never beaten by more than tol") {
  VehicleParams p;
  OcpConfig cfg = small_cfg(6, 1.2);
  const double v0 = 8.0;
  const double a0 = 0.0;
  const OcpReference ref = sample_reference(constant_profile(10.0), cfg);
  const auto bounds = PositionBounds::unbounded(cfg.t_f_s);
  const OcpSolution sol = solve_ocp(0.0, v0, a0, ref, bounds, p, cfg);
  REQUIRE(sol.status == OcpStatus::optimal);

  const double levels[5] = {p.j_min_mps3, 0.5 * p.j_min_mps3, 0.0, 0.5 * p.j_max_mps3,
                            p.j_max_mps3};
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> j(6, 0.0);
  for (int c = 0; c < 5 * 5 * 5 * 5 * 5 * 5; ++c) {
    int x = c;
    for (int i = 0; i < 6; ++i) {
      j[static_cast<size_t>(i)] = levels[x % 5];
      x /= 5;
    }
    const Propagated prop = propagate(j, 0.0, v0, a0, ref, bounds, p, cfg);
    if (prop.feasible) best = std::min(best, prop.objective);
  }
  REQUIRE(best < std::numeric_limits<double>::infinity());
  CHECK(sol.objective <= best + 1e-3);
}

TEST_CASE("solve_ocp: red-light position bound is honored to 1e-4 m") {
  VehicleParams p;
  OcpConfig cfg = small_cfg(30, 6.0);
  // cruising at 12 m/s toward a line 40 m ahead that stays red beyond the
  // horizon: the solver must brake to stay ahead of it
  PositionBounds bounds = PositionBounds::unbounded(cfg.t_f_s);
  bounds.s_max_m[0] = 40.0;
  const OcpReference ref = sample_reference(constant_profile(12.0), cfg);
  const OcpSolution sol = solve_ocp(0.0, 12.0, 0.0, ref, bounds, p, cfg);
  REQUIRE(sol.status == OcpStatus::optimal);
  CHECK(sol.max_position_violation_m <= 1e-4);
  for (size_t k = 0; k < sol.s_m.size(); ++k) CHECK(sol.s_m[k] <= 40.0 + 1e-4);
  CHECK(sol.v_mps.back() < 2.0);  // nearly stopped at the line
  for (double v : sol.v_mps) CHECK(v >= -1e-9);
}

TEST_CASE("solve_ocp: infeasible when physics cannot satisfy the bounds") {
  VehicleParams p;
  OcpConfig cfg = small_cfg(30, 6.0);
  // 12 m/s toward a line 2 m ahead: f_min cannot stop the vehicle in time
  PositionBounds bounds = PositionBounds::unbounded(cfg.t_f_s);
  bounds.s_max_m[0] = 2.0;
  const OcpReference ref = sample_reference(constant_profile(12.0), cfg);
  const OcpSolution sol = solve_ocp(0.0, 12.0, 0.0, ref, bounds, p, cfg);
  CHECK(sol.status == OcpStatus::infeasible);
}

TEST_CASE("solve_ocp: force recovery matches the dynamics at every grid point") {
  VehicleParams p;
  OcpConfig cfg = small_cfg(30, 6.0);
  auto prof = uam_fixed_target(9.0, 60.0, 13.0);
  REQUIRE(prof);
  const OcpReference ref = sample_reference(*prof, cfg);
  const auto bounds = PositionBounds::unbounded(cfg.t_f_s);
  const OcpSolution sol = solve_ocp(0.0, 9.0, 0.0, ref, bounds, p, cfg);
  REQUIRE(sol.status == OcpStatus::optimal);
  const double c_drag = 0.5 * p.frontal_area_m2 * p.air_density_kgpm3 * p.drag_coeff;
  const double c_roll = p.mass_kg * p.gravity_mps2 * p.rolling_coeff;
  for (size_t k = 0; k < sol.force_n.size(); ++k) {
    const double expect = p.mass_kg * sol.a_mps2[k] + c_drag * sol.v_mps[k] * sol.v_mps[k] + c_roll;
    CHECK(std::abs(sol.force_n[k] - expect) < 1e-9);
    CHECK(sol.force_n[k] <= p.f_max_n + 1e-4);
    CHECK(sol.force_n[k] >= p.f_min_n - 1e-4);
  }
}

TEST_CASE("solve_ocp: jerk dominance over the dynamically feasible reference") {
  VehicleParams p;
  OcpConfig cfg = small_cfg(30, 6.0);
  std::mt19937 rng(5150);
  std::uniform_real_distribution<double> v_d(6.0, 13.0);
  std::uniform_real_distribution<double> dv_d(-2.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double v0 = v_d(rng);
    const double vt = std::max(1.0, v0 + dv_d(rng));
    auto prof = uam_fixed_target(v0, 80.0, vt);
    REQUIRE(prof);
    const OcpReference ref = sample_reference(*prof, cfg);
    const auto bounds = PositionBounds::unbounded(cfg.t_f_s);
    const OcpSolution sol = solve_ocp(0.0, v0, 0.0, ref, bounds, p, cfg);
    REQUIRE(sol.status == OcpStatus::optimal);
    // jerk sequence reproducing the reference accel by finite differences
    std::vector<double> j_ref(30);
    bool representable = true;
    for (int k = 0; k < 30; ++k) {
      j_ref[static_cast<size_t>(k)] = (ref.a_mps2[static_cast<size_t>(k) + 1] -
                                       ref.a_mps2[static_cast<size_t>(k)]) / cfg.dt();
      if (std::abs(j_ref[static_cast<size_t>(k)]) > p.j_max_mps3) representable = false;
    }
    if (!representable) continue;
    const Propagated cand = propagate(j_ref, 0.0, v0, prof->a_mps2, ref, bounds, p, cfg);
    if (!cand.feasible) continue;
    // candidate starts from the reference's initial accel; rerun the solver
    // from the same state for a like-for-like comparison
    const OcpSolution sol2 = solve_ocp(0.0, v0, prof->a_mps2, ref, bounds, p, cfg);
    REQUIRE(sol2.status == OcpStatus::optimal);
    CHECK(sol2.objective <= cand.objective + 1e-6);
  }
}

TEST_CASE("solve_ocp: warm-start determinism") {
  VehicleParams p;
  OcpConfig cfg = small_cfg(30, 6.0);
  auto prof = uam_fixed_target(9.0, 60.0, 12.0);
  REQUIRE(prof);
  const OcpReference ref = sample_reference(*prof, cfg);
  PositionBounds bounds = PositionBounds::unbounded(cfg.t_f_s);
  bounds.s_max_m[0] = 70.0;
  OcpWarmStart warm;
  const OcpSolution first = solve_ocp(0.0, 9.0, 0.0, ref, bounds, p, cfg, &warm);
  const OcpSolution second = solve_ocp(0.0, 9.0, 0.0, ref, bounds, p, cfg, &warm);
  REQUIRE(first.status == OcpStatus::optimal);
  REQUIRE(second.status == OcpStatus::optimal);
  CHECK(std::abs(first.objective - second.objective) <= cfg.tolerance);
}

TEST_CASE("MpcAdvisor: steady state returns the base advice values") {
  Scenario sc = straight_scenario(800, {light(150, 75, 40, 0), light(300, 75, 40, 0),
                                        light(450, 75, 40, 30), light(600, 75, 40, 30)});
  Advisor advisor(sc);
  MpcAdvisor mpc(sc);
  VehicleState st;
  st.x_m = 0.0;
  st.y_m = 0.0;
  st.v_mps = 11.111;
  st.t_s = 0.0;
  const Advice base = advisor.advise(st);
  REQUIRE(base.active);
  REQUIRE(base.warning == Warning::none);
  const Advice opt = mpc.optimal_advise(st, base);
  CHECK_FALSE(opt.mpc_fallback);
  CHECK(opt.warning == Warning::none);
  CHECK(opt.a_ref_mps2 == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
  CHECK(opt.v_ref_mps == doctest::Approx(11.111).epsilon(1e-6));
}

TEST_CASE("MpcAdvisor: accel-step base advice is rate limited") {
  Scenario sc = straight_scenario(900, {light(200, 75, 40, 0), light(400, 75, 34, 0),
                                        light(600, 75, 40, 8), light(800, 75, 50, 15)});
  Advisor advisor(sc);
  MpcAdvisor mpc(sc);
  VehicleState st;
  st.v_mps = 11.111;
  const Advice base = advisor.advise(st);
  REQUIRE(base.active);
  REQUIRE(base.warning == Warning::green);
  REQUIRE(base.a_ref_mps2 > 0.0);
  mpc.note_realized_accel(0.0);
  const Advice opt = mpc.optimal_advise(st, base);
  REQUIRE_FALSE(opt.mpc_fallback);
  // first new accel within one jerk-step of the current (zero) accel
  CHECK(std::abs(opt.a_ref_mps2) <= sc.vehicle.j_max_mps3 * sc.mpc.dt() + 1e-9);
  const auto& plan = mpc.plan();
  for (size_t k = 0; k + 1 < plan.a_mps2.size(); ++k) {
    CHECK(std::abs(plan.a_mps2[k + 1] - plan.a_mps2[k]) <=
          sc.vehicle.j_max_mps3 * sc.mpc.dt() + 1e-9);
  }
  CHECK(plan.max_position_violation_m <= 1e-4);
}

TEST_CASE("MpcAdvisor: contradictory bounds fall back to the base advice") {
  Scenario sc = straight_scenario(500, {light(100, 75, 40, 0)});
  Advisor advisor(sc);
  MpcAdvisor mpc(sc);
  VehicleState st;
  st.v_mps = 11.111;
  Advice base = advisor.advise(st);
  REQUIRE(base.active);
  // doctor the advice into claiming a pass through a light whose green ends
  // immediately: must-be-beyond from t=0 contradicts s0 = 0
  Scenario trap = straight_scenario(500, {light(100, 75, 40, 75 - 39.9)});
  Advisor trap_advisor(trap);
  MpcAdvisor trap_mpc(trap);
  Advice claim = base;
  claim.n_green = 1;
  claim.n_pass = 1;
  const Advice out = trap_mpc.optimal_advise(st, claim);
  CHECK(out.mpc_fallback);
  CHECK(out.v_ref_mps == claim.v_ref_mps);
  CHECK(out.a_ref_mps2 == claim.a_ref_mps2);
}
