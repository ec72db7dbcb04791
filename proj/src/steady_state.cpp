#include "aempc/steady_state.hpp"

#include <cmath>
#include <sstream>

namespace aempc {

SteadyStateSolver::SteadyStateSolver(const ParametricModel& model,
                                     Vec theta_bar, Mat K, Vec x_init_hint,
                                     double newton_tol, int max_iter)
    : model_(&model), theta_bar_(std::move(theta_bar)), K_(std::move(K)),
      hint_(std::move(x_init_hint)), newton_tol_(newton_tol),
      max_iter_(max_iter) {
  if (K_.size() == 0) K_ = Mat::Zero(model.n_u, model.n_x);
  last_ = hint_;
}

Vec SteadyStateSolver::newton(const std::function<Vec(const Vec&)>& residual,
                              const std::function<Mat(const Vec&)>& jacobian,
                              Vec x) const {
  Vec r = residual(x);
  double rn = r.lpNorm<Eigen::Infinity>();
  for (int it = 0; it < max_iter_; ++it) {
    if (rn <= newton_tol_) return x;
    const Mat J = jacobian(x);
    Eigen::PartialPivLU<Mat> lu(J);
    const Vec step = lu.solve(-r);
    if (!step.allFinite()) break;
    double alpha = 1.0;
    bool progressed = false;
    for (int ls = 0; ls < 30; ++ls) {
      const Vec x_try = x + alpha * step;
      const Vec r_try = residual(x_try);
      const double rn_try = r_try.lpNorm<Eigen::Infinity>();
      if (std::isfinite(rn_try) && rn_try < rn) {
        x = x_try;
        r = r_try;
        rn = rn_try;
        progressed = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!progressed) break;
  }
  if (rn <= newton_tol_) return x;
  std::ostringstream oss;
  oss << "steady_state: Newton did not converge (last residual " << rn << ")";
  throw NumericalError(oss.str());
}

Vec SteadyStateSolver::nominal(const Vec& v) const {
  std::vector<double> key(v.data(), v.data() + v.size());
  key.push_back(0.0);  // tag: nominal
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  const ParametricModel& m = *model_;
  auto residual = [&](const Vec& z) -> Vec {
    return eval_nominal(m, z, v, theta_bar_) - z;
  };
  auto jac = [&](const Vec& z) -> Mat {
    return jacobian_x(m, z, v, theta_bar_) - Mat::Identity(m.n_x, m.n_x);
  };
  Vec z = newton(residual, jac, last_);
  cache_.emplace(std::move(key), z);
  last_ = z;
  return z;
}

Vec SteadyStateSolver::parametric(const Vec& v, const Vec& theta) const {
  std::vector<double> key(v.data(), v.data() + v.size());
  key.push_back(1.0);  // tag: parametric
  key.insert(key.end(), theta.data(), theta.data() + theta.size());
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  const Vec z_s = nominal(v);
  const ParametricModel& m = *model_;
  auto residual = [&](const Vec& x) -> Vec {
    return eval_nominal(m, x, feedback_kappa(K_, x, z_s, v), theta) - x;
  };
  auto jac = [&](const Vec& x) -> Mat {
    const Vec u = feedback_kappa(K_, x, z_s, v);
    return jacobian_x(m, x, u, theta) + jacobian_u(m, x, u, theta) * K_ -
           Mat::Identity(m.n_x, m.n_x);
  };
  Vec x = newton(residual, jac, z_s);
  cache_.emplace(std::move(key), x);
  last_ = x;
  return x;
}

Mat SteadyStateSolver::nominal_input_jacobian(const Vec& v) const {
  const Vec z = nominal(v);
  const Mat A = jacobian_x(*model_, z, v, theta_bar_);
  const Mat B = jacobian_u(*model_, z, v, theta_bar_);
  // f(h,v) = h  =>  (I - A) dh = B dv.
  return Eigen::PartialPivLU<Mat>(Mat::Identity(model_->n_x, model_->n_x) - A)
      .solve(B);
}

double steady_cost(const SteadyStateSolver& ss, const StageCost& cost,
                   const Vec& v, const Vec& theta) {
  const Vec x = ss.parametric(v, theta);
  const Vec z_s = ss.nominal(v);
  return cost.value(x, feedback_kappa(ss.gain(), x, z_s, v));
}

double shifted_cost(const SteadyStateSolver& ss, const StageCost& cost,
                    const Vec& x, const Vec& v_s, const Vec& theta) {
  const Vec z_s = ss.nominal(v_s);
  return cost.value(x, feedback_kappa(ss.gain(), x, z_s, v_s)) -
         steady_cost(ss, cost, v_s, theta);
}

Vec shifted_cost_grad_x(const SteadyStateSolver& ss, const StageCost& cost,
                        const Vec& x, const Vec& v_s, const Vec& theta) {
  (void)theta;  // the subtracted steady cost does not depend on x
  const Vec z_s = ss.nominal(v_s);
  const Vec u = feedback_kappa(ss.gain(), x, z_s, v_s);
  return cost.grad_x(x, u) + ss.gain().transpose() * cost.grad_u(x, u);
}

Vec p_vector(const ParametricModel& model, const StageCost& cost, const Mat& K,
             const Vec& x_s, const Vec& v_s, const Vec& z_s, const Vec& theta) {
  const Vec u_s = feedback_kappa(K, x_s, z_s, v_s);
  const Vec q = cost.grad_x(x_s, u_s) + K.transpose() * cost.grad_u(x_s, u_s);
  const Mat A_K = jacobian_closed_loop(model, K, x_s, v_s, z_s, theta);
  const Mat M = Mat::Identity(model.n_x, model.n_x) - A_K;
  Eigen::FullPivLU<Mat> lu(M);
  if (!lu.isInvertible()) {
    Eigen::EigenSolver<Mat> eig(A_K);
    std::ostringstream oss;
    oss << "p_vector: I - A_K singular; A_K eigenvalues:";
    for (int i = 0; i < model.n_x; ++i)
      oss << ' ' << eig.eigenvalues()(i).real() << (eig.eigenvalues()(i).imag() >= 0 ? "+" : "")
          << eig.eigenvalues()(i).imag() << "i";
    throw NumericalError(oss.str());
  }
  return lu.transpose().solve(q);
}

double eval_terminal_cost(const Mat& P_f, const Vec& p, const Vec& x,
                          const Vec& x_s) {
  const Vec dx = x - x_s;
  return dx.dot(P_f * dx) + p.dot(dx);
}

}  // namespace aempc
