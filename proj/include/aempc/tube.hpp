#pragma once

#include "aempc/params.hpp"
#include "aempc/sets.hpp"

namespace aempc {

/// Homothetic tube cross-section {x : ||x - center||_P <= size}.
struct TubeState {
  Vec center;
  double size = 0.0;
};

/// s_next = (rho + L_w) s + max_{theta,d} ||G(z)(theta - theta_bar) + E(z) d||_P.
double propagate_size(const TubeParams& tp, const ParametricModel& m,
                      const Vec& z, const Vec& v, double s, const Box& Theta,
                      const Box& D, const Vec& theta_bar);

/// Terminal-tube invariance: (1 - rho - L_w) s_N >= disturbance norm at z_N.
bool terminal_size_condition(const TubeParams& tp, const ParametricModel& m,
                             const Vec& z_N, double s_N, const Box& Theta,
                             const Box& D, const Vec& theta_bar);

/// g_i(z, v) + c_i * s; the MPC imposes <= 0.
double tightened_constraint(const TubeParams& tp, const Constraint& g_i, int i,
                            const Vec& z, const Vec& v, double s);

/// ||x - center||_P <= size (+ slack for roundoff).
bool tube_contains(const TubeParams& tp, const TubeState& tube, const Vec& x,
                   double slack = 1e-12);

}  // namespace aempc
