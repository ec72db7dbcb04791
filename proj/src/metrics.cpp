#include "aempc/metrics.hpp"

#include "aempc/nlp.hpp"

#include <cmath>

namespace aempc {

namespace {

Vec next_state(const RunLog& log, int k) {
  if (k + 1 < log.steps()) return log.records[k + 1].x;
  if (log.x_final.size() > 0) return log.x_final;
  throw ContractViolation("run log truncated: next state unavailable");
}

}  // namespace

PerformanceReport transient_metric(const RunLog& log, const ParametricModel& m) {
  if (log.steps() == 0) throw ContractViolation("transient_metric: empty log");
  PerformanceReport rep;
  rep.T = log.steps();
  double sum_w_sq = 0.0;
  for (int k = 0; k < rep.T; ++k) {
    const auto& r = log.records[k];
    rep.transient_lhs += r.stage_cost - r.setpoint_cost;
    rep.avg_cost += r.stage_cost;
    const Vec w = next_state(log, k) - eval_nominal(m, r.x, r.u, r.theta);
    rep.accumulated_w += w.norm();
    sum_w_sq += w.squaredNorm();
    const Vec xtilde = m.G(r.x, r.u) * (r.theta - r.theta_hat);
    rep.accumulated_xtilde += xtilde.norm();
    if (k + 1 < rep.T) {
      const double dth = (log.records[k + 1].theta - r.theta).norm();
      rep.theta_variation += dth;
      rep.sum_sqrt_dtheta += std::sqrt(dth);
    }
  }
  rep.avg_cost /= rep.T;
  rep.w_l2 = std::sqrt(sum_w_sq);
  const int tail_start = rep.T - std::max(1, rep.T / 10);
  rep.lambda_inf_estimate = -std::numeric_limits<double>::infinity();
  for (int k = tail_start; k < rep.T; ++k)
    rep.lambda_inf_estimate =
        std::max(rep.lambda_inf_estimate, log.records[k].setpoint_cost);
  return rep;
}

TailCheck average_performance_check(const RunLog& log, double tail_fraction) {
  const int T = log.steps();
  const int tail = static_cast<int>(tail_fraction * T);
  if (tail < 100)
    throw ContractViolation(
        "average_performance_check: tail_fraction * T must be >= 100");
  TailCheck c;
  c.lambda_inf_estimate = -std::numeric_limits<double>::infinity();
  for (int k = T - tail; k < T; ++k) {
    c.avg_tail_cost += log.records[k].stage_cost;
    c.lambda_inf_estimate =
        std::max(c.lambda_inf_estimate, log.records[k].setpoint_cost);
  }
  c.avg_tail_cost /= tail;
  c.slack = c.lambda_inf_estimate - c.avg_tail_cost;
  return c;
}

IndicativeBound indicative_transient_rhs(const RunLog& log,
                                         const ParametricModel& m,
                                         const StageCost& cost,
                                         const DesignArtifacts& design,
                                         const ConstraintSet& Z, const Box& Theta,
                                         double beta, int horizon) {
  IndicativeBound b;
  UniformSampler rng(7);
  SteadyStateSolver ss(m, design.theta_bar, design.tube.K, Z.box_x.mid());
  for (int i = 0; i < 200; ++i) {
    const Vec x1 = rng.box_sample(Z.box_x), x2 = rng.box_sample(Z.box_x);
    const Vec u1 = rng.box_sample(Z.box_u), u2 = rng.box_sample(Z.box_u);
    const Vec th1 = rng.box_sample(Theta), th2 = rng.box_sample(Theta);
    const double den = (x1 - x2).norm() + (u1 - u2).norm() + (th1 - th2).norm();
    if (den < 1e-12) continue;
    b.L_dyn = std::max(b.L_dyn, (eval_nominal(m, x1, u1, th1) -
                                 eval_nominal(m, x2, u2, th2)).norm() / den);
    b.L_ell = std::max(b.L_ell, std::abs(cost.value(x1, u1) - cost.value(x2, u2)) /
                                    ((x1 - x2).norm() + (u1 - u2).norm()));
    try {
      const Vec v1 = rng.box_sample(Z.box_u), v2 = rng.box_sample(Z.box_u);
      const double dh = (ss.parametric(v1, th1) - ss.parametric(v2, th2)).norm();
      const double dd = (v1 - v2).norm() + (th1 - th2).norm();
      if (dd > 1e-12) b.L_h = std::max(b.L_h, dh / dd);
    } catch (const NumericalError&) {
    }
  }
  b.L_kappa = std::max(1.0, design.tube.K.operatorNorm());
  b.L_s = b.L_h * b.L_ell;

  // C_dyn,kappa = sum_{i<=N} [L_dyn (1 + L_kappa)]^i; purely indicative,
  // typically astronomically conservative.
  double c_dyn = 0.0, pw = 1.0;
  for (int i = 0; i <= horizon; ++i) {
    c_dyn += pw;
    pw *= b.L_dyn * (1.0 + b.L_kappa);
  }
  const double L_f = 2.0 * design.terminal.P_f.operatorNorm() *
                         diameter(Z.box_x) + design.terminal.p_max;
  const double C_A = c_dyn * (b.L_ell * (horizon - 1) + L_f) +
                     std::sqrt(design.mu) * L_f * (1.0 + b.L_h);
  const PerformanceReport rep = transient_metric(log, m);
  const double T = rep.T;
  const double C_J = 2.0 * (b.L_ell * diameter(Z.box_x) * horizon + L_f +
                            beta * b.L_ell * diameter(Z.box_x));
  b.rhs = (C_A + std::sqrt(design.mu) * beta * b.L_s) *
              (2.0 * std::sqrt(T) * rep.w_l2 +
               std::sqrt(T / design.mu) * (log.theta_hat0 - log.records[0].theta).norm() +
               std::sqrt(2.0 * T * log.c_theta / design.mu) * rep.sum_sqrt_dtheta) +
          C_J;
  b.certified = false;
  return b;
}

namespace {

double steady_infeasibility(const ParametricModel& m, const DesignArtifacts& d,
                            const ConstraintSet& Z, const Box& Theta,
                            const Box& D, const SteadyStateSolver& ss,
                            const Vec& v, const Vec& theta) {
  // Max violation of the MPC's steady-state feasibility conditions at input v.
  const TubeParams& tube = d.tube;
  double worst = -std::numeric_limits<double>::infinity();
  const Vec z_s = ss.nominal(v);
  const double s_inf =
      max_disturbance_norm(m, tube.P, z_s, Theta, D, d.theta_bar) /
      (1.0 - tube.rho - tube.L_w);
  for (int i = 0; i < Z.n_c(); ++i)
    worst = std::max(worst, Z.g[i].value(z_s, v) + tube.c(i) * s_inf);
  const Vec x_s = ss.parametric(v, theta);
  for (int i = 0; i < m.n_x; ++i) {
    worst = std::max(worst, x_s(i) - Z.box_x.upper(i) - d.setpoint_inflation);
    worst = std::max(worst, Z.box_x.lower(i) - d.setpoint_inflation - x_s(i));
  }
  return worst;
}

}  // namespace

double best_achievable_cost(const ParametricModel& m, const StageCost& cost,
                            const DesignArtifacts& design, const ConstraintSet& Z,
                            const Box& Theta, const Box& D, const Vec& theta,
                            int multistarts) {
  SteadyStateSolver ss(m, design.theta_bar, design.tube.K, Z.box_x.mid());
  double best = std::numeric_limits<double>::infinity();
  for (int s = 0; s < multistarts; ++s) {
    Vec v0(m.n_u);
    for (int i = 0; i < m.n_u; ++i)
      v0(i) = Z.box_u.lower(i) +
              (Z.box_u.upper(i) - Z.box_u.lower(i)) * (s + 0.5) / multistarts;
    NlpProblem p;
    p.n = m.n_u;
    p.m_eq = 0;
    p.m_ineq = Z.n_c() + 2 * m.n_x;
    p.x0 = v0;
    p.f = [&](const Vec& v) -> double {
      try {
        return steady_cost(ss, cost, v, theta);
      } catch (const NumericalError&) {
        return std::numeric_limits<double>::quiet_NaN();
      }
    };
    p.grad = [&](const Vec& v) { return fd::gradient(p.f, v); };
    p.ineq = [&](const Vec& v) -> Vec {
      Vec r(p.m_ineq);
      try {
        const TubeParams& tube = design.tube;
        const Vec z_s = ss.nominal(v);
        const double s_inf =
            max_disturbance_norm(m, tube.P, z_s, Theta, D, design.theta_bar) /
            (1.0 - tube.rho - tube.L_w);
        int row = 0;
        for (int i = 0; i < Z.n_c(); ++i)
          r(row++) = Z.g[i].value(z_s, v) + tube.c(i) * s_inf;
        const Vec x_s = ss.parametric(v, theta);
        for (int i = 0; i < m.n_x; ++i) {
          r(row++) = x_s(i) - Z.box_x.upper(i) - design.setpoint_inflation;
          r(row++) = Z.box_x.lower(i) - design.setpoint_inflation - x_s(i);
        }
      } catch (const NumericalError&) {
        r.setConstant(std::numeric_limits<double>::quiet_NaN());
      }
      return r;
    };
    p.ineq_jac = [&](const Vec& v) { return fd::jacobian(p.ineq, v); };
    NlpOptions opts;
    opts.max_iter = 120;
    const NlpResult res = nlp_solve(p, opts);
    if (!res.ok()) continue;
    try {
      if (steady_infeasibility(m, design, Z, Theta, D, ss, res.x, theta) > 1e-7)
        continue;
      best = std::min(best, steady_cost(ss, cost, res.x, theta));
    } catch (const NumericalError&) {
      continue;
    }
  }
  return best;
}

double best_achievable_cost_grid(const ParametricModel& m, const StageCost& cost,
                                 const DesignArtifacts& design,
                                 const ConstraintSet& Z, const Box& Theta,
                                 const Box& D, const Vec& theta, int grid_pts) {
  SteadyStateSolver ss(m, design.theta_bar, design.tube.K, Z.box_x.mid());
  double best = std::numeric_limits<double>::infinity();
  for (const Vec& v : Z.box_u.grid(grid_pts)) {
    try {
      if (steady_infeasibility(m, design, Z, Theta, D, ss, v, theta) > 0.0)
        continue;
      best = std::min(best, steady_cost(ss, cost, v, theta));
    } catch (const NumericalError&) {
      continue;
    }
  }
  return best;
}

std::vector<BetaSweepRow> beta_sweep_report(
    const std::vector<std::pair<double, const RunLog*>>& logs_by_beta,
    const ParametricModel& m, const StageCost& cost,
    const DesignArtifacts& design, const ConstraintSet& Z, const Box& Theta,
    const Box& D, double tail_fraction) {
  std::vector<BetaSweepRow> rows;
  for (const auto& [beta, log] : logs_by_beta) {
    BetaSweepRow row;
    row.beta = beta;
    const int T = log->steps();
    const int tail = std::max(1, static_cast<int>(tail_fraction * T));
    for (int k = T - tail; k < T; ++k)
      row.tail_setpoint_cost += log->records[k].setpoint_cost;
    row.tail_setpoint_cost /= tail;
    row.best_achievable = best_achievable_cost(
        m, cost, design, Z, Theta, D, log->records[T - 1].theta_hat);
    row.gap = row.tail_setpoint_cost - row.best_achievable;
    rows.push_back(row);
  }
  std::sort(rows.begin(), rows.end(),
            [](const BetaSweepRow& a, const BetaSweepRow& b) { return a.beta < b.beta; });
  return rows;
}

std::vector<LmsAuditStep> build_audit_trace(const RunLog& log,
                                            const ParametricModel& m,
                                            int* first_active_step) {
  // Updates are frozen before the activation step; the telescoped bound is
  // audited from the first step whose transition feeds an active update.
  const int start = std::max(0, log.lms_activation);
  if (first_active_step) *first_active_step = start;
  std::vector<LmsAuditStep> trace;
  for (int k = start; k < log.steps(); ++k) {
    const auto& r = log.records[k];
    LmsAuditStep s;
    s.xtilde_sq = (m.G(r.x, r.u) * (r.theta - r.theta_hat)).squaredNorm();
    Vec w;
    try {
      w = next_state(log, k) - eval_nominal(m, r.x, r.u, r.theta);
    } catch (const ContractViolation&) {
      break;
    }
    s.w_sq = w.squaredNorm();
    s.dtheta_true =
        k + 1 < log.steps() ? (log.records[k + 1].theta - r.theta).norm() : 0.0;
    trace.push_back(s);
  }
  return trace;
}

double consecutive_prediction_ratio(const std::vector<Vec>& states,
                                    const std::vector<MpcSolution>& solutions) {
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < solutions.size(); ++k) {
    const Mat& prev = solutions[k].x_hat;
    const Mat& next = solutions[k + 1].x_hat;
    const int N = static_cast<int>(prev.cols()) - 1;
    const double denom =
        std::max(1e-12, (states[k + 1] - prev.col(1)).norm());
    for (int j = 1; j <= N; ++j) {
      const double num = (next.col(j - 1) - prev.col(j)).norm();
      worst = std::max(worst, num / denom);
    }
  }
  return worst;
}

}  // namespace aempc
