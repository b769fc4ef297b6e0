#include "glosa/mpc.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

namespace glosa {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

const char* to_string(OcpStatus s) {
  switch (s) {
    case OcpStatus::optimal: return "optimal";
    case OcpStatus::max_iter: return "max-iter";
    case OcpStatus::infeasible: return "infeasible";
  }
  return "?";
}

PositionBounds PositionBounds::unbounded(double t_f_s) {
  PositionBounds b;
  b.t_f_s = t_f_s;
  b.s_min_m = {-kInf};
  b.s_max_m = {kInf};
  return b;
}

std::pair<double, double> PositionBounds::at(double t_s) const {
  size_t i = 0;
  while (i < breakpoints_s.size() && t_s >= breakpoints_s[i]) ++i;
  return {s_min_m[i], s_max_m[i]};
}

bool PositionBounds::contains(double s_m, double t_s, double tol_m) const {
  const auto [lo, hi] = at(t_s);
  return s_m >= lo - tol_m && s_m <= hi + tol_m;
}

std::optional<PositionBounds> position_bounds(double s0_m,
                                              const std::vector<PhaseSchedule>& lights_ahead,
                                              double t_now_s, const OcpConfig& cfg,
                                              const Advice& advice) {
  const double t_f = cfg.t_f_s;
  const double dt = cfg.dt();

  // Each light contributes a (lo, hi) pair before its shift time T and
  // another from T on. The shift is snapped to the grid on the side that
  // cannot open a red crossing between grid points.
  struct Region {
    double T = 0.0;
    double lo_before = -kInf, hi_before = kInf;
    double lo_after = -kInf, hi_after = kInf;
  };
  std::vector<Region> regions;

  int index = 0;  // 1-based light index, matching advice.n_green counting
  for (const auto& light : lights_ahead) {
    if (index >= 2) break;  // at most two lights fit in the horizon
    ++index;
    const double s_tl = light.stop_line_abscissa_m;
    if (s_tl <= s0_m) return std::nullopt;  // caller must pass lights ahead
    const Color color = light.phase_at(t_now_s);
    const auto shifts = next_shifts(light, t_now_s, 1);
    const double t_shift = shifts.front().time_s;

    Region r;
    if (color == Color::red) {
      if (t_shift >= t_f) {
        r.T = t_f;
        r.hi_before = s_tl;  // ahead of the light for the whole horizon
      } else {
        // Beyond the light only after the red->green shift; round the shift
        // up to the grid so the crossing cannot precede it.
        r.T = std::min(t_f, std::ceil(t_shift / dt - 1e-9) * dt);
        r.hi_before = s_tl;
      }
    } else {
      if (t_shift > t_f) {
        r.T = 0.0;  // phase holds through the horizon: no constraint
      } else {
        r.T = std::max(0.0, std::floor(t_shift / dt + 1e-9) * dt);
        const bool cannot_pass = (advice.n_green < index) || (advice.n_pass > 1);
        if (cannot_pass) {
          r.hi_after = s_tl;  // stay ahead of the line once the green ends
        } else {
          r.lo_after = s_tl;  // plan passes during this green: be beyond
        }
      }
    }
    regions.push_back(r);
  }

  PositionBounds out;
  out.t_f_s = t_f;
  std::vector<double> bps;
  for (const auto& r : regions) {
    if (r.T > 0.0 && r.T < t_f) bps.push_back(r.T);
  }
  std::sort(bps.begin(), bps.end());
  bps.erase(std::unique(bps.begin(), bps.end()), bps.end());
  out.breakpoints_s = bps;
  assert(bps.size() <= 2);  // two lights, one shift each

  std::vector<double> starts = {0.0};
  starts.insert(starts.end(), bps.begin(), bps.end());
  for (double start : starts) {
    double lo = -kInf, hi = kInf;
    for (const auto& r : regions) {
      const bool after = start >= r.T;
      lo = std::max(lo, after ? r.lo_after : r.lo_before);
      hi = std::min(hi, after ? r.hi_after : r.hi_before);
    }
    if (lo > hi) return std::nullopt;  // contradictory plan
    out.s_min_m.push_back(lo);
    out.s_max_m.push_back(hi);
  }
  return out;
}

OcpReference sample_reference(const MotionSolution& profile, const OcpConfig& cfg) {
  OcpReference ref;
  const int n = cfg.n_steps;
  const double dt = cfg.dt();
  ref.v_mps.resize(n + 1);
  ref.a_mps2.resize(n + 1);
  for (int k = 0; k <= n; ++k) {
    const double tau = k * dt;
    ref.v_mps[k] = profile.speed_at(tau);
    ref.a_mps2[k] = (tau < profile.t1_s) ? profile.a_mps2 : 0.0;
  }
  return ref;
}

double OcpSolution::accel_at(double tau_s) const {
  if (a_mps2.empty()) return 0.0;
  const double t_end = t_s.back();
  if (tau_s <= 0.0) return a_mps2.front();
  if (tau_s >= t_end) return a_mps2.back();
  const double dt = t_s[1] - t_s[0];
  const size_t k = std::min(static_cast<size_t>(tau_s / dt), a_mps2.size() - 2);
  const double u = (tau_s - t_s[k]) / dt;
  return a_mps2[k] + u * (a_mps2[k + 1] - a_mps2[k]);
}

double OcpSolution::speed_at(double tau_s) const {
  if (v_mps.empty()) return 0.0;
  if (tau_s <= 0.0) return v_mps.front();
  if (tau_s >= t_s.back()) return v_mps.back();
  const double dt = t_s[1] - t_s[0];
  const size_t k = std::min(static_cast<size_t>(tau_s / dt), v_mps.size() - 2);
  const double u = (tau_s - t_s[k]) / dt;
  return v_mps[k] + u * (v_mps[k + 1] - v_mps[k]);
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Sensitivities of the grid states to the per-step jerks, plus the fixed
// part of the tracking Hessian. Depends only on the grid and weights.
struct Transcription {
  int n = 0;
  double dt = 0.0;
  double w_v = 0.0, w_a = 0.0, w_j = 0.0;
  MatrixXd Sa, Sv, Ss;  // n x n, row k-1 = d(state at grid k)/dJ
  MatrixXd P;
  Eigen::LLT<MatrixXd> P_llt;

  bool matches(const OcpConfig& cfg) const {
    return n == cfg.n_steps && dt == cfg.dt() && w_v == cfg.w_v &&
           w_a == cfg.w_a && w_j == cfg.w_j;
  }
};

const Transcription& transcription_for(const OcpConfig& cfg) {
  thread_local Transcription tr;
  if (tr.matches(cfg)) return tr;
  const int n = cfg.n_steps;
  const double dt = cfg.dt();
  tr.n = n;
  tr.dt = dt;
  tr.w_v = cfg.w_v;
  tr.w_a = cfg.w_a;
  tr.w_j = cfg.w_j;
  tr.Sa = MatrixXd::Zero(n, n);
  tr.Sv = MatrixXd::Zero(n, n);
  tr.Ss = MatrixXd::Zero(n, n);
  VectorXd sa = VectorXd::Zero(n), sv = VectorXd::Zero(n), ss = VectorXd::Zero(n);
  for (int k = 0; k < n; ++k) {
    VectorXd sa_next = sa;
    sa_next(k) += dt;
    VectorXd sv_next = sv + dt * sa;
    sv_next(k) += 0.5 * dt * dt;
    VectorXd ss_next = ss + dt * sv + 0.5 * dt * dt * sa;
    ss_next(k) += dt * dt * dt / 6.0;
    sa = sa_next;
    sv = sv_next;
    ss = ss_next;
    tr.Sa.row(k) = sa.transpose();
    tr.Sv.row(k) = sv.transpose();
    tr.Ss.row(k) = ss.transpose();
  }
  tr.P = 2.0 * dt *
         (cfg.w_v * tr.Sv.transpose() * tr.Sv + cfg.w_a * tr.Sa.transpose() * tr.Sa +
          cfg.w_j * MatrixXd::Identity(n, n));
  tr.P_llt.compute(tr.P);
  return tr;
}

struct QpResult {
  VectorXd x;
  VectorXd lambda;
  bool optimal = false;
  bool infeasible = false;
  double violation = 0.0;
  int iters = 0;
};

// min 1/2 x'Px + q'x  s.t.  A x <= b, solved through the nonnegative dual
// with FISTA and an exact active-set polish. Rows must be normalized.
QpResult solve_qp_dual(const Transcription& tr, const VectorXd& q, const MatrixXd& A,
                       const VectorXd& b, int max_iters, VectorXd lambda0) {
  QpResult res;
  const VectorXd x_free = -tr.P_llt.solve(q);
  const int m = static_cast<int>(A.rows());
  if (m == 0) {
    res.x = x_free;
    res.lambda = VectorXd();
    res.optimal = true;
    return res;
  }

  const MatrixXd B = tr.P_llt.solve(MatrixXd(A.transpose()));  // P^-1 A'
  const MatrixXd M = A * B;
  const VectorXd d = b - A * x_free;

  // Lipschitz constant of the dual gradient.
  VectorXd pw = VectorXd::Ones(m);
  double lip = 1.0;
  for (int it = 0; it < 30; ++it) {
    pw = M * pw;
    const double nrm = pw.norm();
    if (nrm < 1e-300) break;
    lip = nrm;
    pw /= nrm;
  }
  lip = lip * 1.02 + 1e-12;

  VectorXd lambda = (lambda0.size() == m) ? lambda0 : VectorXd::Zero(m);
  lambda = lambda.cwiseMax(0.0);
  VectorXd y = lambda;
  double theta = 1.0;

  const double eps_feas = 1e-9;
  const double eps_comp = 1e-8;

  auto primal_from = [&](const VectorXd& lam) -> VectorXd { return x_free - B * lam; };

  auto try_polish = [&](const VectorXd& lam, const VectorXd& slack) -> bool {
    std::vector<int> act;
    for (int i = 0; i < m; ++i) {
      if (lam(i) > 1e-10 || slack(i) < 1e-7) act.push_back(i);
    }
    const int na = static_cast<int>(act.size());
    if (na == 0) {
      res.x = x_free;
      res.lambda = VectorXd::Zero(m);
      res.optimal = true;
      return true;
    }
    const int n = tr.n;
    MatrixXd kkt = MatrixXd::Zero(n + na, n + na);
    kkt.topLeftCorner(n, n) = tr.P;
    for (int i = 0; i < na; ++i) {
      kkt.block(n + i, 0, 1, n) = A.row(act[i]);
      kkt.block(0, n + i, n, 1) = A.row(act[i]).transpose();
      kkt(n + i, n + i) = -1e-12;
    }
    VectorXd rhs(n + na);
    rhs.head(n) = -q;
    for (int i = 0; i < na; ++i) rhs(n + i) = b(act[i]);
    Eigen::LDLT<MatrixXd> ldlt(kkt);
    if (ldlt.info() != Eigen::Success) return false;
    const VectorXd sol = ldlt.solve(rhs);
    const VectorXd xp = sol.head(n);
    const VectorXd nu = sol.tail(na);
    if ((nu.array() < -1e-8).any()) return false;
    const VectorXd resid = A * xp - b;
    if (resid.maxCoeff() > eps_feas) return false;
    if ((tr.P * xp + q + A.transpose() * [&] {
          VectorXd full = VectorXd::Zero(m);
          for (int i = 0; i < na; ++i) full(act[i]) = nu(i);
          return full;
        }()).cwiseAbs().maxCoeff() > 1e-7) {
      return false;
    }
    res.x = xp;
    res.lambda = VectorXd::Zero(m);
    for (int i = 0; i < na; ++i) res.lambda(act[i]) = std::max(0.0, nu(i));
    res.optimal = true;
    return true;
  };

  VectorXd lambda_prev = lambda;
  for (int it = 1; it <= max_iters; ++it) {
    const VectorXd grad = M * y + d;
    VectorXd lambda_next = (y - grad / lip).cwiseMax(0.0);
    const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    y = lambda_next + ((theta - 1.0) / theta_next) * (lambda_next - lambda_prev);
    // Gradient restart keeps momentum from overshooting.
    if (grad.dot(lambda_next - lambda_prev) > 0.0) {
      y = lambda_next;
      theta = 1.0;
    } else {
      theta = theta_next;
    }
    lambda_prev = lambda_next;
    lambda = lambda_next;

    if (it % 20 == 0 || it == max_iters) {
      const VectorXd x = primal_from(lambda);
      const VectorXd slack = b - A * x;
      const double viol = std::max(0.0, -slack.minCoeff());
      double comp = 0.0;
      for (int i = 0; i < m; ++i) comp = std::max(comp, std::abs(lambda(i) * slack(i)));
      res.iters = it;
      res.violation = viol;
      if (viol <= 1e-6 && try_polish(lambda, slack)) {
        res.lambda = (res.lambda.size() == m) ? res.lambda : lambda;
        return res;
      }
      if (viol <= eps_feas && comp <= eps_comp) {
        res.x = x;
        res.lambda = lambda;
        res.optimal = true;
        return res;
      }
    }
  }
  res.x = primal_from(lambda);
  res.lambda = lambda;
  const VectorXd slack = b - A * res.x;
  res.violation = std::max(0.0, -slack.minCoeff());
  res.optimal = false;
  res.infeasible = res.violation > 1e-4;
  return res;
}

}  // namespace

OcpSolution solve_ocp(double s0_m, double v0_mps, double a0_mps2,
                      const OcpReference& ref, const PositionBounds& bounds,
                      const VehicleParams& params, const OcpConfig& cfg,
                      OcpWarmStart* warm) {
  const Transcription& tr = transcription_for(cfg);
  const int n = cfg.n_steps;
  const double dt = cfg.dt();
  assert(static_cast<int>(ref.v_mps.size()) == n + 1);

  // Zero-jerk trajectories: the affine part of the state maps.
  VectorXd a0v(n), v0v(n), s0v(n);
  for (int k = 1; k <= n; ++k) {
    const double tk = k * dt;
    a0v(k - 1) = a0_mps2;
    v0v(k - 1) = v0_mps + a0_mps2 * tk;
    s0v(k - 1) = s0_m + v0_mps * tk + 0.5 * a0_mps2 * tk * tk;
  }
  VectorXd vref(n), aref(n);
  for (int k = 1; k <= n; ++k) {
    vref(k - 1) = ref.v_mps[k];
    aref(k - 1) = ref.a_mps2[k];
  }
  const VectorXd q = 2.0 * dt *
                     (cfg.w_v * tr.Sv.transpose() * (v0v - vref) +
                      cfg.w_a * tr.Sa.transpose() * (a0v - aref));

  const double c_drag = 0.5 * params.frontal_area_m2 * params.air_density_kgpm3 *
                        params.drag_coeff;
  const double c_roll = params.mass_kg * params.gravity_mps2 * params.rolling_coeff;

  // Grid-point position bounds (finite entries only become rows).
  std::vector<double> lo_k(n + 1, -kInf), hi_k(n + 1, kInf);
  for (int k = 0; k <= n; ++k) {
    const auto [lo, hi] = bounds.at(k * dt);
    lo_k[k] = lo;
    hi_k[k] = hi;
  }

  OcpSolution out;
  out.status = OcpStatus::infeasible;

  // Linearization point for the v^2 drag term.
  VectorXd v_bar = vref.cwiseMax(0.0);
  VectorXd j_sol = VectorXd::Zero(n);
  QpResult qp;
  int outer = 0;
  bool outer_converged = false;
  int inner_total = 0;

  for (outer = 1; outer <= cfg.max_outer_iters; ++outer) {
    std::vector<VectorXd> rows;
    std::vector<double> rhs;
    rows.reserve(static_cast<size_t>(6 * n));
    rhs.reserve(static_cast<size_t>(6 * n));

    auto add_row = [&](const VectorXd& r, double ub) {
      // Screen rows no jerk sequence inside the box can violate.
      double worst = 0.0;
      for (int i = 0; i < n; ++i) {
        worst += r(i) > 0.0 ? r(i) * params.j_max_mps3 : r(i) * params.j_min_mps3;
      }
      if (worst < ub - 1e-9 * (1.0 + std::abs(ub))) return;
      const double nrm = r.norm();
      rows.push_back(r / nrm);
      rhs.push_back(ub / nrm);
    };

    for (int k = 0; k < n; ++k) {
      VectorXd e = VectorXd::Zero(n);
      e(k) = 1.0;
      add_row(e, params.j_max_mps3);
      add_row(-e, -params.j_min_mps3);
    }
    for (int k = 1; k <= n; ++k) {
      add_row(tr.Sa.row(k - 1).transpose(), params.a_max_mps2 - a0v(k - 1));
      add_row(-tr.Sv.row(k - 1).transpose(), v0v(k - 1));  // v >= 0
      if (std::isfinite(hi_k[k])) {
        add_row(tr.Ss.row(k - 1).transpose(), hi_k[k] - s0v(k - 1));
      }
      if (std::isfinite(lo_k[k])) {
        add_row(-tr.Ss.row(k - 1).transpose(), s0v(k - 1) - lo_k[k]);
      }
      const double vb = v_bar(k - 1);
      const VectorXd f_row = params.mass_kg * tr.Sa.row(k - 1).transpose() +
                             2.0 * c_drag * vb * tr.Sv.row(k - 1).transpose();
      const double f_affine = params.mass_kg * a0v(k - 1) +
                              2.0 * c_drag * vb * v0v(k - 1) - c_drag * vb * vb + c_roll;
      add_row(f_row, params.f_max_n - f_affine);
      add_row(-f_row, f_affine - params.f_min_n);
    }

    const int m = static_cast<int>(rows.size());
    MatrixXd A(m, n);
    VectorXd b(m);
    for (int i = 0; i < m; ++i) {
      A.row(i) = rows[static_cast<size_t>(i)].transpose();
      b(i) = rhs[static_cast<size_t>(i)];
    }

    VectorXd lambda0;
    if (warm && static_cast<int>(warm->lambda.size()) == m) {
      lambda0 = Eigen::Map<const VectorXd>(warm->lambda.data(), m);
    }
    qp = solve_qp_dual(tr, q, A, b, cfg.max_inner_iters, lambda0);
    inner_total += qp.iters;
    if (qp.infeasible) {
      out.status = OcpStatus::infeasible;
      out.outer_iters = outer;
      out.inner_iters = inner_total;
      out.max_violation = qp.violation;
      return out;
    }
    if (warm) warm->lambda.assign(qp.lambda.data(), qp.lambda.data() + qp.lambda.size());

    j_sol = qp.x;
    const VectorXd v_new = v0v + tr.Sv * j_sol;
    const double delta = (v_new - v_bar).cwiseAbs().maxCoeff();
    v_bar = v_new.cwiseMax(0.0);
    if (delta <= 1e-6) {
      outer_converged = true;
      break;
    }
  }

  // Exact propagation of the accepted jerk sequence.
  out.t_s.resize(n + 1);
  out.s_m.resize(n + 1);
  out.v_mps.resize(n + 1);
  out.a_mps2.resize(n + 1);
  out.force_n.resize(n + 1);
  out.j_mps3.assign(j_sol.data(), j_sol.data() + n);
  double s = s0_m, v = v0_mps, a = a0_mps2;
  double objective = 0.0;
  double pos_viol = std::max({0.0, lo_k[0] - s, s - hi_k[0]});
  out.t_s[0] = 0.0;
  out.s_m[0] = s;
  out.v_mps[0] = v;
  out.a_mps2[0] = a;
  out.force_n[0] = params.mass_kg * a + c_drag * v * v + c_roll;
  for (int k = 0; k < n; ++k) {
    const double j = j_sol(k);
    s += v * dt + 0.5 * a * dt * dt + j * dt * dt * dt / 6.0;
    v += a * dt + 0.5 * j * dt * dt;
    a += j * dt;
    out.t_s[k + 1] = (k + 1) * dt;
    out.s_m[k + 1] = s;
    out.v_mps[k + 1] = v;
    out.a_mps2[k + 1] = a;
    out.force_n[k + 1] = params.mass_kg * a + c_drag * v * v + c_roll;
    const double dv = v - ref.v_mps[k + 1];
    const double da = a - ref.a_mps2[k + 1];
    objective += dt * (cfg.w_v * dv * dv + cfg.w_a * da * da + cfg.w_j * j * j);
    pos_viol = std::max({pos_viol, lo_k[k + 1] - s, s - hi_k[k + 1]});
  }
  out.objective = objective;
  out.outer_iters = outer;
  out.inner_iters = inner_total;
  out.max_violation = qp.violation;
  out.max_position_violation_m = std::max(0.0, pos_viol);
  out.status = (qp.optimal && outer_converged) ? OcpStatus::optimal : OcpStatus::max_iter;
  return out;
}

MpcAdvisor::MpcAdvisor(const Scenario& scenario, AdvisorOptions advisor_options)
    : scenario_(&scenario), advisor_options_(advisor_options) {}

Advice MpcAdvisor::optimal_advise(const VehicleState& state, const Advice& base) {
  if (!base.active) return base;

  Advice out = base;
  out.mpc_fallback = true;

  const double s0 = localize(state.x_m, state.y_m, state.psi_rad, scenario_->path,
                             advisor_options_.lateral_tolerance_m);
  std::vector<PhaseSchedule> ahead;
  for (const auto& l : scenario_->lights) {
    if (l.stop_line_abscissa_m > s0 && ahead.size() < 2) ahead.push_back(l);
  }

  const auto bounds = position_bounds(s0, ahead, state.t_s, scenario_->mpc, base);
  if (!bounds || !bounds->contains(s0, 0.0, 1e-9)) {
    ++fallbacks_;
    return out;
  }

  const OcpReference ref = sample_reference(base.profile, scenario_->mpc);
  OcpSolution sol = solve_ocp(s0, state.v_mps, current_accel_, ref, *bounds,
                              scenario_->vehicle, scenario_->mpc, &warm_);
  ++solves_;
  if (log_) {
    log_("mpc solve t=" + std::to_string(state.t_s) + " s0=" + std::to_string(s0) +
         " status=" + to_string(sol.status) + " outer=" + std::to_string(sol.outer_iters) +
         " inner=" + std::to_string(sol.inner_iters) +
         " obj=" + std::to_string(sol.objective));
  }
  if (sol.status != OcpStatus::optimal) {
    ++fallbacks_;
    warm_.lambda.clear();
    return out;
  }

  last_ = std::move(sol);
  has_plan_ = true;
  worst_position_violation_ =
      std::max(worst_position_violation_, last_.max_position_violation_m);

  out.mpc_fallback = false;
  out.a_ref_mps2 = last_.a_mps2[1];
  out.v_ref_mps = last_.v_mps.back();
  const double eps = advisor_options_.warning_deadband_mps;
  Warning w = Warning::none;
  if (out.v_ref_mps > state.v_mps + eps) w = Warning::green;
  if (out.v_ref_mps < state.v_mps - eps) w = Warning::red;
  if (base.warning == Warning::red_sound && w == Warning::red) w = Warning::red_sound;
  out.warning = w;
  return out;
}

}  // namespace glosa
