#include "aempc/tube.hpp"

namespace aempc {

double propagate_size(const TubeParams& tp, const ParametricModel& m,
                      const Vec& z, const Vec& v, double s, const Box& Theta,
                      const Box& D, const Vec& theta_bar) {
  (void)v;  // the mismatch bound is evaluated at the tube center only
  if (s < 0.0) throw ContractViolation("propagate_size: s must be >= 0");
  return (tp.rho + tp.L_w) * s +
         max_disturbance_norm(m, tp.P, z, Theta, D, theta_bar);
}

bool terminal_size_condition(const TubeParams& tp, const ParametricModel& m,
                             const Vec& z_N, double s_N, const Box& Theta,
                             const Box& D, const Vec& theta_bar) {
  return (1.0 - tp.rho - tp.L_w) * s_N >=
         max_disturbance_norm(m, tp.P, z_N, Theta, D, theta_bar);
}

double tightened_constraint(const TubeParams& tp, const Constraint& g_i, int i,
                            const Vec& z, const Vec& v, double s) {
  return g_i.value(z, v) + tp.c(i) * s;
}

bool tube_contains(const TubeParams& tp, const TubeState& tube, const Vec& x,
                   double slack) {
  return ellipsoid_norm(tp.P, x - tube.center) <= tube.size + slack;
}

}  // namespace aempc
