#pragma once

#include "aempc/model.hpp"
#include "aempc/types.hpp"

#include <map>

namespace aempc {

/// kappa(x, z, v) = K (x - z) + v.
inline Vec feedback_kappa(const Mat& K, const Vec& x, const Vec& z,
                          const Vec& v) {
  return K * (x - z) + v;
}

/// Newton-based realization of the steady-state manifold h:
///   z_s = h(v, theta_bar) solves f(z, v, theta_bar) = z,
///   x   = h(v, theta)     solves f(x, K(x - z_s) + v, theta) = x.
/// Solutions are cached per (v, theta); the previous solution seeds Newton.
class SteadyStateSolver {
 public:
  SteadyStateSolver(const ParametricModel& model, Vec theta_bar, Mat K,
                    Vec x_init_hint, double newton_tol = 1e-10,
                    int max_iter = 50);

  /// h(v, theta_bar).
  Vec nominal(const Vec& v) const;

  /// h(v, theta), coupled through the feedback around h(v, theta_bar).
  Vec parametric(const Vec& v, const Vec& theta) const;

  /// d h(v, theta_bar) / dv via the implicit function theorem.
  Mat nominal_input_jacobian(const Vec& v) const;

  const Mat& gain() const { return K_; }
  const Vec& theta_bar() const { return theta_bar_; }
  double tol() const { return newton_tol_; }

 private:
  Vec newton(const std::function<Vec(const Vec&)>& residual,
             const std::function<Mat(const Vec&)>& jacobian, Vec x) const;

  const ParametricModel* model_;
  Vec theta_bar_;
  Mat K_;
  Vec hint_;
  double newton_tol_;
  int max_iter_;
  mutable std::map<std::vector<double>, Vec> cache_;
  mutable Vec last_;
};

/// l_s(v, theta) = l(h(v,theta), kappa(h(v,theta), h(v,theta_bar), v)).
double steady_cost(const SteadyStateSolver& ss, const StageCost& cost,
                   const Vec& v, const Vec& theta);

/// Shifted cost: l(x, kappa(x, h(v_s,theta_bar), v_s)) - l_s(v_s, theta).
double shifted_cost(const SteadyStateSolver& ss, const StageCost& cost,
                    const Vec& x, const Vec& v_s, const Vec& theta);

/// Gradient of the shifted cost in x (includes the kappa-composition term
/// K' * dl/du).
Vec shifted_cost_grad_x(const SteadyStateSolver& ss, const StageCost& cost,
                        const Vec& x, const Vec& v_s, const Vec& theta);

/// p = (I - A_K(x_s, v_s, theta))^{-T} * (d lbar/dx)' at the setpoint.
/// Throws if I - A_K is singular (A_K has an eigenvalue at 1).
Vec p_vector(const ParametricModel& model, const StageCost& cost, const Mat& K,
             const Vec& x_s, const Vec& v_s, const Vec& z_s, const Vec& theta);

/// l_f(x, x_s, v_s, theta) = ||x - x_s||^2_Pf + p'(x - x_s).
double eval_terminal_cost(const Mat& P_f, const Vec& p, const Vec& x,
                          const Vec& x_s);

}  // namespace aempc
