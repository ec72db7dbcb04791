#pragma once

#include "aempc/model.hpp"
#include "aempc/sets.hpp"
#include "aempc/types.hpp"

namespace aempc {

/// State of the projected least-mean-squares estimator.
struct EstimatorState {
  Vec theta_hat;
  double mu = 0.0;
  Box box;                 // Theta
  int activation_step = 0; // updates before this step leave theta_hat frozen
  int step = 0;
  // Running sums of squared innovations, for bound auditing.
  double sum_innovation_sq = 0.0;

  EstimatorState() = default;
  EstimatorState(Vec theta0, double gain, Box theta_box, int k0 = 0)
      : theta_hat(std::move(theta0)), mu(gain), box(std::move(theta_box)),
        activation_step(k0) {
    if (mu <= 0.0) throw ContractViolation("EstimatorState: mu must be > 0");
    if (!box.contains(theta_hat))
      throw ContractViolation("EstimatorState: theta0 outside Theta");
  }
};

/// mu = 0.99 / max_Z ||G(x,u)||^2, the max sampled on a grid over Z; the 0.99
/// deflation absorbs grid under-approximation of the semi-infinite max.
double compute_gain(const ParametricModel& m, const ConstraintSet& Z,
                    int grid_density);

/// One-step certainty-equivalent prediction xhat_{1|k} = f0 + G*theta_hat.
Vec predict_one_step(const EstimatorState& est, const ParametricModel& m,
                     const Vec& x_k, const Vec& u_k);

/// Projected LMS update from the measured transition (x_k, u_k, x_next).
/// Pure: returns the successor state. Frozen (before activation_step) updates
/// advance the step counter only.
EstimatorState lms_update(const EstimatorState& est, const ParametricModel& m,
                          const Vec& x_k, const Vec& u_k, const Vec& x_next);

/// One recorded step of an audit trace.
struct LmsAuditStep {
  double xtilde_sq = 0.0;     // ||G (theta - theta_hat)||^2
  double w_sq = 0.0;          // ||E d||^2
  double dtheta_true = 0.0;   // ||theta_{k+1} - theta_k||
};

/// Telescoped bound: lhs = sum ||xtilde||^2,
/// rhs = (1/mu)||theta_hat0 - theta0||^2 + sum [ ||w||^2 + (2 c_theta/mu)||dtheta|| ].
struct LmsAudit {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds(double tol = 1e-10) const { return lhs <= rhs + tol; }
};

LmsAudit audit_bound(const std::vector<LmsAuditStep>& trace, double mu,
                     double c_theta, double theta_err0_sq);

}  // namespace aempc
