#include "aempc/lms.hpp"

namespace aempc {

double compute_gain(const ParametricModel& m, const ConstraintSet& Z,
                    int grid_density) {
  const int pts = std::max(2, grid_density);
  double max_sq = 0.0;
  for (const Vec& x : Z.box_x.grid(pts)) {
    for (const Vec& u : Z.box_u.grid(pts)) {
      const double nrm = m.G(x, u).operatorNorm();
      max_sq = std::max(max_sq, nrm * nrm);
    }
  }
  if (max_sq <= 0.0)
    throw ContractViolation(
        "compute_gain: regressor vanishes on Z, estimation impossible");
  return 0.99 / max_sq;
}

Vec predict_one_step(const EstimatorState& est, const ParametricModel& m,
                     const Vec& x_k, const Vec& u_k) {
  return m.f0(x_k, u_k) + m.G(x_k, u_k) * est.theta_hat;
}

EstimatorState lms_update(const EstimatorState& est, const ParametricModel& m,
                          const Vec& x_k, const Vec& u_k, const Vec& x_next) {
  EstimatorState out = est;
  out.step = est.step + 1;
  if (est.step < est.activation_step) return out;
  const Vec innovation = x_next - predict_one_step(est, m, x_k, u_k);
  const Vec theta_tilde =
      est.theta_hat + est.mu * m.G(x_k, u_k).transpose() * innovation;
  out.theta_hat = project_box(theta_tilde, est.box);
  out.sum_innovation_sq += innovation.squaredNorm();
  return out;
}

LmsAudit audit_bound(const std::vector<LmsAuditStep>& trace, double mu,
                     double c_theta, double theta_err0_sq) {
  LmsAudit a;
  a.rhs = theta_err0_sq / mu;
  for (const auto& s : trace) {
    a.lhs += s.xtilde_sq;
    a.rhs += s.w_sq + (2.0 * c_theta / mu) * s.dtheta_true;
  }
  return a;
}

}  // namespace aempc
