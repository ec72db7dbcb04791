#pragma once

#include "aempc/design.hpp"
#include "aempc/lms.hpp"
#include "aempc/mpc.hpp"
#include "aempc/simulate.hpp"

namespace aempc {

struct PerformanceReport {
  int T = 0;
  double transient_lhs = 0.0;  // sum of stage cost minus optimized setpoint cost
  double avg_cost = 0.0;
  double lambda_inf_estimate = 0.0;  // max setpoint cost over the final 10%
  double accumulated_w = 0.0;        // sum ||w_k||
  double w_l2 = 0.0;                 // sqrt(sum ||w_k||^2)
  double accumulated_xtilde = 0.0;   // sum ||xtilde_{1|k}||
  double theta_variation = 0.0;      // sum ||theta_{k+1} - theta_k||
  double sum_sqrt_dtheta = 0.0;      // sum sqrt(||dtheta_k||)
};

/// Direct summation of the transient performance quantities; w_k is
/// reconstructed from the logged true parameters as x_{k+1} - f(x_k,u_k,theta_k).
PerformanceReport transient_metric(const RunLog& log, const ParametricModel& m);

struct TailCheck {
  double avg_tail_cost = 0.0;
  double lambda_inf_estimate = 0.0;
  double slack = 0.0;  // lambda_inf - avg_tail_cost
};

TailCheck average_performance_check(const RunLog& log, double tail_fraction);

/// Indicative (non-certified) evaluation of the transient bound's right-hand
/// side from sampled Lipschitz estimates; for reporting only.
struct IndicativeBound {
  double rhs = 0.0;
  double L_dyn = 0.0, L_kappa = 0.0, L_ell = 0.0, L_h = 0.0, L_s = 0.0;
  bool certified = false;
};

IndicativeBound indicative_transient_rhs(const RunLog& log,
                                         const ParametricModel& m,
                                         const StageCost& cost,
                                         const DesignArtifacts& design,
                                         const ConstraintSet& Z, const Box& Theta,
                                         double beta, int horizon);

/// Smallest steady-state cost over setpoints feasible for the MPC's robust
/// terminal conditions (NLP multistart over the steady input).
double best_achievable_cost(const ParametricModel& m, const StageCost& cost,
                            const DesignArtifacts& design, const ConstraintSet& Z,
                            const Box& Theta, const Box& D, const Vec& theta,
                            int multistarts = 7);

/// Same quantity by dense grid search (test oracle for scalar inputs).
double best_achievable_cost_grid(const ParametricModel& m, const StageCost& cost,
                                 const DesignArtifacts& design,
                                 const ConstraintSet& Z, const Box& Theta,
                                 const Box& D, const Vec& theta, int grid_pts);

struct BetaSweepRow {
  double beta = 0.0;
  double tail_setpoint_cost = 0.0;
  double best_achievable = 0.0;
  double gap = 0.0;
};

/// One row per beta: tail mean of the optimized setpoint cost against the
/// best achievable steady-state cost under the final parameter estimate.
std::vector<BetaSweepRow> beta_sweep_report(
    const std::vector<std::pair<double, const RunLog*>>& logs_by_beta,
    const ParametricModel& m, const StageCost& cost,
    const DesignArtifacts& design, const ConstraintSet& Z, const Box& Theta,
    const Box& D, double tail_fraction = 0.1);

/// LMS audit trace from a run log, starting at the estimator activation step.
std::vector<LmsAuditStep> build_audit_trace(const RunLog& log,
                                            const ParametricModel& m,
                                            int* first_active_step = nullptr);

/// Proposition-3-style boundedness: largest ratio between consecutive
/// prediction distances and the one-step prediction error along a run with
/// retained solutions.
double consecutive_prediction_ratio(const std::vector<Vec>& states,
                                    const std::vector<MpcSolution>& solutions);

}  // namespace aempc
