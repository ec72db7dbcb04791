#pragma once

#include "aempc/types.hpp"

#include <optional>

namespace aempc {

/// Parametric discrete-time system
///   x+ = f0(x,u) + G(x,u)*theta + E(x,u)*d,
/// with the nominal map f(x,u,theta) = f0(x,u) + G(x,u)*theta.
struct ParametricModel {
  int n_x = 0;
  int n_u = 0;
  int n_theta = 0;
  int n_d = 0;

  std::function<Vec(const Vec&, const Vec&)> f0;
  std::function<Mat(const Vec&, const Vec&)> G;  // n_x x n_theta
  std::function<Mat(const Vec&, const Vec&)> E;  // n_x x n_d

  std::function<Mat(const Vec&, const Vec&)> df0_dx;  // n_x x n_x
  std::function<Mat(const Vec&, const Vec&)> df0_du;  // n_x x n_u
  /// Per-column state derivative of the regressor: dG_dx(x,u)[i] = d[G]_{:,i}/dx.
  std::function<std::vector<Mat>(const Vec&, const Vec&)> dG_dx;
  /// Per-column state derivative of E; empty function means identically zero.
  std::function<std::vector<Mat>(const Vec&, const Vec&)> dE_dx;

  /// Optional override for the sampled Hessian bound H.
  std::optional<double> hessian_bound_hint;

  void check_point(const Vec& x, const Vec& u, const Vec& theta,
                   const Vec& d) const {
    if (x.size() != n_x || u.size() != n_u || theta.size() != n_theta ||
        d.size() != n_d)
      throw ContractViolation("ParametricModel: dimension mismatch");
  }
};

/// Economic stage cost with first and (optional) second derivatives.
struct StageCost {
  std::function<double(const Vec&, const Vec&)> value;
  std::function<Vec(const Vec&, const Vec&)> grad_x;
  std::function<Vec(const Vec&, const Vec&)> grad_u;
  std::function<Mat(const Vec&, const Vec&)> hess_xx;  // optional; FD fallback if empty
};

/// x+ = f0 + G*theta + E*d.
Vec eval_dynamics(const ParametricModel& m, const Vec& x, const Vec& u,
                  const Vec& theta, const Vec& d);

/// Nominal map f(x,u,theta) = f0 + G*theta.
Vec eval_nominal(const ParametricModel& m, const Vec& x, const Vec& u,
                 const Vec& theta);

/// df/dx at (x,u,theta) (analytic).
Mat jacobian_x(const ParametricModel& m, const Vec& x, const Vec& u,
               const Vec& theta);

/// df/du at (x,u,theta) (analytic).
Mat jacobian_u(const ParametricModel& m, const Vec& x, const Vec& u,
               const Vec& theta);

/// Jacobian of the closed-loop map f_kappa(x, v_s, theta) =
/// f(x, K(x - z_s) + v_s, theta) with z_s the nominal steady state for v_s:
/// A_K = df/dx + df/du * K evaluated at (x, K(x - z_s) + v_s, theta).
Mat jacobian_closed_loop(const ParametricModel& m, const Mat& K, const Vec& x,
                         const Vec& v_s, const Vec& z_s, const Vec& theta);

/// Upper bound on max_i lambda_max(d^2 [f_kappa]_i / dx^2) over
/// Z_x x Z_u x Theta, sampled on a grid; honors hessian_bound_hint.
/// Hessians are obtained by central differences of the analytic Jacobian.
double hessian_bound(const ParametricModel& m, const Mat& K, const Box& Z_x,
                     const Box& Z_u, const Box& Theta,
                     const std::function<Vec(const Vec&)>& steady_for_input,
                     int grid_density);

/// The continuous stirred-tank reactor benchmark instance.
struct CstrInstance {
  double delta = 0.55;
  double Ts = 0.025;
  Vec theta_bar;    // [0.0995, 1.0050]
  Vec scaling;      // (1e5, 400), baked into G
  ParametricModel model;
  Box state_box;    // (30): [0.03, 0.25]^3
  Box input_box;    // (30): [0.049, 0.449]
  Box theta_box;    // +-1.5% around theta_bar
  Box disturbance_box;  // 5e-4 * [-1,1]^3
  StageCost cost;   // l(x,u) = -[x]_2
  Vec x0_default;   // [0.06, 0.16, 0.12]

  /// Continuous-time right-hand side of the nominal part, f0_c + G_c*theta
  /// (used by discretization-consistency tests).
  Vec continuous_rhs(const Vec& x, const Vec& u, const Vec& theta) const;
};

CstrInstance make_cstr();

}  // namespace aempc
