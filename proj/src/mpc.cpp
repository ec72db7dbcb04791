#include "aempc/mpc.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace aempc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

MpcController::MpcController(ControllerConfig cfg)
    : cfg_(std::move(cfg)),
      lay_{cfg_.horizon, cfg_.model.n_x, cfg_.model.n_u},
      ss_(cfg_.model, cfg_.design.theta_bar, cfg_.design.tube.K,
          cfg_.Z.box_x.mid()) {
  if (cfg_.horizon < 1) throw ContractViolation("MpcController: N >= 1 required");
  if (cfg_.beta <= 0.0) throw ContractViolation("MpcController: beta > 0 required");
  if (cfg_.design.tube.P.rows() != cfg_.model.n_x)
    throw ContractViolation("MpcController: design/model dimension mismatch");
}

double MpcController::scale() const {
  if (cfg_.objective_scale > 0.0) return cfg_.objective_scale;
  return 1.0 / std::max(1.0, cfg_.beta / 25.0);
}

Vec MpcController::p_and_grads(const Vec& x_s, const Vec& v_s, const Vec& theta,
                               Mat* dp_dxs, Mat* dp_dvs) const {
  const ParametricModel& m = cfg_.model;
  const Mat& K = cfg_.design.tube.K;
  const Vec z_s = ss_.nominal(v_s);
  const Vec p = p_vector(m, cfg_.cost, K, x_s, v_s, z_s, theta);
  if (!dp_dxs && !dp_dvs) return p;

  const Mat A_K = jacobian_closed_loop(m, K, x_s, v_s, z_s, theta);
  const Mat M = Mat::Identity(m.n_x, m.n_x) - A_K;
  Eigen::PartialPivLU<Mat> luT(M.transpose());

  auto q_of = [&](const Vec& xs, const Vec& vs) -> Vec {
    const Vec zs = ss_.nominal(vs);
    const Vec u = feedback_kappa(K, xs, zs, vs);
    return cfg_.cost.grad_x(xs, u) + K.transpose() * cfg_.cost.grad_u(xs, u);
  };

  // dp = (I - A_K)^{-T} (dA_K' p + dq), with dA_K and dq by central
  // differences; the linear solve itself is differentiated exactly.
  if (dp_dxs) {
    dp_dxs->resize(m.n_x, m.n_x);
    Vec xp = x_s, xm = x_s;
    for (int j = 0; j < m.n_x; ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(x_s(j)));
      xp(j) += h;
      xm(j) -= h;
      const Mat dA = (jacobian_closed_loop(m, K, xp, v_s, z_s, theta) -
                      jacobian_closed_loop(m, K, xm, v_s, z_s, theta)) /
                     (2.0 * h);
      const Vec dq = (q_of(xp, v_s) - q_of(xm, v_s)) / (2.0 * h);
      dp_dxs->col(j) = luT.solve(dA.transpose() * p + dq);
      xp(j) = x_s(j);
      xm(j) = x_s(j);
    }
  }
  if (dp_dvs) {
    dp_dvs->resize(m.n_x, m.n_u);
    Vec vp = v_s, vm = v_s;
    for (int j = 0; j < m.n_u; ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(v_s(j)));
      vp(j) += h;
      vm(j) -= h;
      const Vec zp = ss_.nominal(vp), zm = ss_.nominal(vm);
      const Mat dA = (jacobian_closed_loop(m, K, x_s, vp, zp, theta) -
                      jacobian_closed_loop(m, K, x_s, vm, zm, theta)) /
                     (2.0 * h);
      const Vec dq = (q_of(x_s, vp) - q_of(x_s, vm)) / (2.0 * h);
      dp_dvs->col(j) = luT.solve(dA.transpose() * p + dq);
      vp(j) = v_s(j);
      vm(j) = v_s(j);
    }
  }
  return p;
}

NlpProblem MpcController::build_problem(const Vec& x_k, const Vec& theta_hat,
                                        double lambda,
                                        const Vec& warm_start) const {
  const MpcLayout lay = lay_;
  const ParametricModel& m = cfg_.model;
  const TubeParams& tube = cfg_.design.tube;
  const TerminalParams& term = cfg_.design.terminal;
  const int N = lay.N, n_x = lay.n_x, n_u = lay.n_u, n_c = cfg_.Z.n_c();
  const double rhoL = tube.rho + tube.L_w;
  const double sigma = scale();
  const bool has_cap = std::isfinite(lambda);
  const Vec theta_bar = cfg_.design.theta_bar;
  const double infl = cfg_.design.setpoint_inflation;

  NlpProblem p;
  p.n = lay.size();
  p.x0 = warm_start;
  // Equalities: dynamics, terminal steady state, artificial setpoint. The
  // tube recursion enters as an inclusion (inequality); see below.
  p.m_eq = N * n_x + 2 * n_x;
  p.m_ineq =
      N * n_c + n_c + 1 + 1 + 2 * n_x + (N + 1) + N + (has_cap ? 1 : 0);

  // Certainty-equivalent rollout shared by objective and gradient.
  auto rollout = [this, lay, x_k, theta_hat](const Vec& w, Mat& xh, Mat& uh) {
    const ParametricModel& mm = cfg_.model;
    const Mat& K = cfg_.design.tube.K;
    xh.resize(lay.n_x, lay.N + 1);
    uh.resize(lay.n_u, lay.N);
    xh.col(0) = x_k;
    for (int j = 0; j < lay.N; ++j) {
      uh.col(j) = K * (xh.col(j) - w.segment(lay.z(j), lay.n_x)) +
                  w.segment(lay.v(j), lay.n_u);
      xh.col(j + 1) = eval_nominal(mm, xh.col(j), uh.col(j), theta_hat);
    }
  };

  p.f = [this, lay, rollout, theta_hat, sigma](const Vec& w) -> double {
    try {
      Mat xh, uh;
      rollout(w, xh, uh);
      double J = 0.0;
      for (int j = 0; j < lay.N; ++j) J += cfg_.cost.value(xh.col(j), uh.col(j));
      const Vec x_s = w.segment(lay.xs(), lay.n_x);
      const Vec v_s = w.segment(lay.vs(), lay.n_u);
      const Vec u_s = feedback_kappa(cfg_.design.tube.K, x_s,
                                     (Vec)w.segment(lay.z(lay.N), lay.n_x), v_s);
      const Vec p_vec = p_and_grads(x_s, v_s, theta_hat, nullptr, nullptr);
      J += eval_terminal_cost(cfg_.design.terminal.P_f, p_vec, xh.col(lay.N), x_s);
      J += cfg_.beta * cfg_.cost.value(x_s, u_s);
      return sigma * J;
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };

  p.grad = [this, lay, rollout, theta_hat, sigma](const Vec& w) -> Vec {
    try {
      const ParametricModel& mm = cfg_.model;
      const Mat& K = cfg_.design.tube.K;
      const Mat& P_f = cfg_.design.terminal.P_f;
      Mat xh, uh;
      rollout(w, xh, uh);
      const Vec x_s = w.segment(lay.xs(), lay.n_x);
      const Vec v_s = w.segment(lay.vs(), lay.n_u);
      const Vec z_N = w.segment(lay.z(lay.N), lay.n_x);
      const Vec u_s = feedback_kappa(K, x_s, z_N, v_s);

      Mat dp_dxs, dp_dvs;
      const Vec p_vec = p_and_grads(x_s, v_s, theta_hat, &dp_dxs, &dp_dvs);
      const Vec dxN = xh.col(lay.N) - x_s;

      Vec g = Vec::Zero(lay.size());
      // Backward sweep through the rollout.
      Vec adj = 2.0 * P_f * dxN + p_vec;  // d l_f / d xhat_N
      for (int j = lay.N - 1; j >= 0; --j) {
        const Vec gx = cfg_.cost.grad_x(xh.col(j), uh.col(j));
        const Vec gu = cfg_.cost.grad_u(xh.col(j), uh.col(j));
        const Mat A = jacobian_x(mm, xh.col(j), uh.col(j), theta_hat);
        const Mat B = jacobian_u(mm, xh.col(j), uh.col(j), theta_hat);
        const Vec back = gu + B.transpose() * adj;
        g.segment(lay.v(j), lay.n_u) += back;
        g.segment(lay.z(j), lay.n_x) -= K.transpose() * back;
        adj = gx + K.transpose() * gu + (A + B * K).transpose() * adj;
      }
      // Terminal cost: setpoint and steady-input sensitivities.
      g.segment(lay.xs(), lay.n_x) +=
          -2.0 * P_f * dxN - p_vec + dp_dxs.transpose() * dxN;
      g.segment(lay.vs(), lay.n_u) += dp_dvs.transpose() * dxN;
      // beta-weighted artificial setpoint cost.
      const Vec gxs = cfg_.cost.grad_x(x_s, u_s);
      const Vec gus = cfg_.cost.grad_u(x_s, u_s);
      g.segment(lay.xs(), lay.n_x) +=
          cfg_.beta * (gxs + K.transpose() * gus);
      g.segment(lay.z(lay.N), lay.n_x) -= cfg_.beta * K.transpose() * gus;
      g.segment(lay.vs(), lay.n_u) += cfg_.beta * gus;
      return (sigma * g).eval();
    } catch (const NumericalError&) {
      return Vec::Constant(lay.size(), std::numeric_limits<double>::quiet_NaN());
    }
  };

  p.eq = [this, lay, theta_bar, theta_hat](const Vec& w) -> Vec {
    const ParametricModel& mm = cfg_.model;
    const Mat& K = cfg_.design.tube.K;
    const int N = lay.N, n_x = lay.n_x;
    Vec r(N * n_x + 2 * n_x);
    for (int j = 0; j < N; ++j)
      r.segment(j * n_x, n_x) =
          w.segment(lay.z(j + 1), n_x) -
          eval_nominal(mm, w.segment(lay.z(j), n_x), w.segment(lay.v(j), lay.n_u),
                       theta_bar);
    const Vec z_N = w.segment(lay.z(N), n_x);
    const Vec v_s = w.segment(lay.vs(), lay.n_u);
    r.segment(N * n_x, n_x) = z_N - eval_nominal(mm, z_N, v_s, theta_bar);
    const Vec x_s = w.segment(lay.xs(), n_x);
    const Vec u_s = feedback_kappa(K, x_s, z_N, v_s);
    r.segment(N * n_x + n_x, n_x) = x_s - eval_nominal(mm, x_s, u_s, theta_hat);
    return r;
  };

  p.eq_jac = [this, lay, theta_bar, theta_hat](const Vec& w) -> Mat {
    const ParametricModel& mm = cfg_.model;
    const Mat& K = cfg_.design.tube.K;
    const int N = lay.N, n_x = lay.n_x, n_u = lay.n_u;
    Mat J = Mat::Zero(N * n_x + 2 * n_x, lay.size());
    for (int j = 0; j < N; ++j) {
      const Vec z = w.segment(lay.z(j), n_x);
      const Vec v = w.segment(lay.v(j), n_u);
      J.block(j * n_x, lay.z(j + 1), n_x, n_x).setIdentity();
      J.block(j * n_x, lay.z(j), n_x, n_x) = -jacobian_x(mm, z, v, theta_bar);
      J.block(j * n_x, lay.v(j), n_x, n_u) = -jacobian_u(mm, z, v, theta_bar);
    }
    {
      const Vec z_N = w.segment(lay.z(N), n_x);
      const Vec v_s = w.segment(lay.vs(), n_u);
      J.block(N * n_x, lay.z(N), n_x, n_x) =
          Mat::Identity(n_x, n_x) - jacobian_x(mm, z_N, v_s, theta_bar);
      J.block(N * n_x, lay.vs(), n_x, n_u) = -jacobian_u(mm, z_N, v_s, theta_bar);

      const Vec x_s = w.segment(lay.xs(), n_x);
      const Vec u_s = feedback_kappa(K, x_s, z_N, v_s);
      const Mat A = jacobian_x(mm, x_s, u_s, theta_hat);
      const Mat B = jacobian_u(mm, x_s, u_s, theta_hat);
      J.block(N * n_x + n_x, lay.xs(), n_x, n_x) =
          Mat::Identity(n_x, n_x) - A - B * K;
      J.block(N * n_x + n_x, lay.z(N), n_x, n_x) = B * K;
      J.block(N * n_x + n_x, lay.vs(), n_x, n_u) = -B;
    }
    return J;
  };

  p.ineq = [this, lay, x_k, rhoL, lambda, has_cap, infl, theta_bar,
            theta_hat](const Vec& w) -> Vec {
    const ParametricModel& mm = cfg_.model;
    const TubeParams& tube = cfg_.design.tube;
    const Mat& K = tube.K;
    const int N = lay.N, n_x = lay.n_x, n_u = lay.n_u, n_c = cfg_.Z.n_c();
    Vec r(N * n_c + n_c + 1 + 1 + 2 * n_x + (N + 1) + N + (has_cap ? 1 : 0));
    int row = 0;
    for (int j = 0; j < N; ++j) {
      const Vec z = w.segment(lay.z(j), n_x);
      const Vec v = w.segment(lay.v(j), n_u);
      for (int i = 0; i < n_c; ++i)
        r(row++) = cfg_.Z.g[i].value(z, v) + tube.c(i) * w(lay.s(j));
    }
    const Vec z_N = w.segment(lay.z(N), n_x);
    const Vec v_s = w.segment(lay.vs(), n_u);
    for (int i = 0; i < n_c; ++i)
      r(row++) = cfg_.Z.g[i].value(z_N, v_s) + tube.c(i) * w(lay.s(N));
    {
      const Vec dz = x_k - w.segment(lay.z(0), n_x);
      r(row++) = dz.dot(tube.P * dz) - w(lay.s(0)) * w(lay.s(0));
    }
    r(row++) = max_disturbance_norm(mm, tube.P, z_N, cfg_.Theta, cfg_.D,
                                    theta_bar) -
               (1.0 - rhoL) * w(lay.s(N));
    {
      const Vec x_s = w.segment(lay.xs(), n_x);
      for (int i = 0; i < n_x; ++i) {
        r(row++) = x_s(i) - (cfg_.Z.box_x.upper(i) + infl);
        r(row++) = (cfg_.Z.box_x.lower(i) - infl) - x_s(i);
      }
    }
    for (int j = 0; j <= N; ++j) r(row++) = -w(lay.s(j));
    for (int j = 0; j < N; ++j) {
      const double mnorm = max_disturbance_norm(mm, tube.P,
                                                w.segment(lay.z(j), n_x),
                                                cfg_.Theta, cfg_.D, theta_bar);
      r(row++) = rhoL * w(lay.s(j)) + mnorm - w(lay.s(j + 1));
    }
    if (has_cap) {
      const Vec x_s = w.segment(lay.xs(), n_x);
      const Vec u_s = feedback_kappa(K, x_s, z_N, v_s);
      r(row++) = cfg_.cost.value(x_s, u_s) - lambda;
    }
    return r;
  };

  p.ineq_jac = [this, lay, x_k, rhoL, has_cap, theta_bar,
                theta_hat](const Vec& w) -> Mat {
    const ParametricModel& mm = cfg_.model;
    const TubeParams& tube = cfg_.design.tube;
    const Mat& K = tube.K;
    const int N = lay.N, n_x = lay.n_x, n_u = lay.n_u, n_c = cfg_.Z.n_c();
    const int rows = N * n_c + n_c + 1 + 1 + 2 * n_x + (N + 1) + N +
                     (has_cap ? 1 : 0);
    Mat J = Mat::Zero(rows, lay.size());
    int row = 0;
    for (int j = 0; j < N; ++j) {
      const Vec z = w.segment(lay.z(j), n_x);
      const Vec v = w.segment(lay.v(j), n_u);
      for (int i = 0; i < n_c; ++i) {
        J.block(row, lay.z(j), 1, n_x) =
            cfg_.Z.g[i].grad_x(z, v).transpose();
        J.block(row, lay.v(j), 1, n_u) =
            cfg_.Z.g[i].grad_u(z, v).transpose();
        J(row, lay.s(j)) = tube.c(i);
        ++row;
      }
    }
    const Vec z_N = w.segment(lay.z(N), n_x);
    const Vec v_s = w.segment(lay.vs(), n_u);
    for (int i = 0; i < n_c; ++i) {
      J.block(row, lay.z(N), 1, n_x) =
          cfg_.Z.g[i].grad_x(z_N, v_s).transpose();
      J.block(row, lay.vs(), 1, n_u) =
          cfg_.Z.g[i].grad_u(z_N, v_s).transpose();
      J(row, lay.s(N)) = tube.c(i);
      ++row;
    }
    {
      const Vec dz = x_k - w.segment(lay.z(0), n_x);
      J.block(row, lay.z(0), 1, n_x) = (-2.0 * tube.P * dz).transpose();
      J(row, lay.s(0)) = -2.0 * w(lay.s(0));
      ++row;
    }
    {
      J.block(row, lay.z(N), 1, n_x) =
          max_disturbance_norm_grad(mm, tube.P, z_N, cfg_.Theta, cfg_.D,
                                    theta_bar)
              .transpose();
      J(row, lay.s(N)) = -(1.0 - rhoL);
      ++row;
    }
    for (int i = 0; i < n_x; ++i) {
      J(row++, lay.xs() + i) = 1.0;
      J(row++, lay.xs() + i) = -1.0;
    }
    for (int j = 0; j <= N; ++j) J(row++, lay.s(j)) = -1.0;
    for (int j = 0; j < N; ++j) {
      J.block(row, lay.z(j), 1, n_x) =
          max_disturbance_norm_grad(mm, tube.P, w.segment(lay.z(j), n_x),
                                    cfg_.Theta, cfg_.D, theta_bar)
              .transpose();
      J(row, lay.s(j)) = rhoL;
      J(row, lay.s(j + 1)) = -1.0;
      ++row;
    }
    if (has_cap) {
      const Vec x_s = w.segment(lay.xs(), n_x);
      const Vec u_s = feedback_kappa(K, x_s, z_N, v_s);
      const Vec gx = cfg_.cost.grad_x(x_s, u_s);
      const Vec gu = cfg_.cost.grad_u(x_s, u_s);
      J.block(row, lay.xs(), 1, n_x) =
          (gx + K.transpose() * gu).transpose();
      J.block(row, lay.z(N), 1, n_x) = (-K.transpose() * gu).transpose();
      J.block(row, lay.vs(), 1, n_u) = gu.transpose();
      ++row;
    }
    return J;
  };

  return p;
}

MpcSolution MpcController::unpack(const Vec& w, const Vec& x_k,
                                  const Vec& theta_hat) const {
  const MpcLayout& lay = lay_;
  MpcSolution sol;
  sol.z.resize(lay.n_x, lay.N + 1);
  sol.v.resize(lay.n_u, lay.N);
  sol.s.resize(lay.N + 1);
  for (int j = 0; j <= lay.N; ++j) {
    sol.z.col(j) = w.segment(lay.z(j), lay.n_x);
    sol.s(j) = w(lay.s(j));
  }
  for (int j = 0; j < lay.N; ++j) sol.v.col(j) = w.segment(lay.v(j), lay.n_u);
  sol.v_s = w.segment(lay.vs(), lay.n_u);
  sol.x_s_hat = w.segment(lay.xs(), lay.n_x);
  sol.u_s_hat =
      feedback_kappa(cfg_.design.tube.K, sol.x_s_hat, sol.z.col(lay.N), sol.v_s);
  sol.x_hat.resize(lay.n_x, lay.N + 1);
  sol.x_hat.col(0) = x_k;
  double J = 0.0;
  for (int j = 0; j < lay.N; ++j) {
    const Vec u = feedback_kappa(cfg_.design.tube.K, sol.x_hat.col(j),
                                 sol.z.col(j), sol.v.col(j));
    J += cfg_.cost.value(sol.x_hat.col(j), u);
    sol.x_hat.col(j + 1) = eval_nominal(cfg_.model, sol.x_hat.col(j), u, theta_hat);
  }
  try {
    const Vec p_vec = p_and_grads(sol.x_s_hat, sol.v_s, theta_hat, nullptr, nullptr);
    J += eval_terminal_cost(cfg_.design.terminal.P_f, p_vec,
                            sol.x_hat.col(lay.N), sol.x_s_hat);
  } catch (const NumericalError&) {
    J = std::numeric_limits<double>::quiet_NaN();
  }
  sol.setpoint_cost = cfg_.cost.value(sol.x_s_hat, sol.u_s_hat);
  sol.cost = J + cfg_.beta * sol.setpoint_cost;
  return sol;
}

std::pair<double, double> MpcController::constraint_residuals(
    const Vec& w, const Vec& x_k, const Vec& theta_hat, double lambda) const {
  const NlpProblem p = build_problem(x_k, theta_hat, lambda, w);
  const Vec h = p.eq(w);
  const Vec g = p.ineq(w);
  const double eq_res = h.size() ? h.cwiseAbs().maxCoeff() : 0.0;
  const double in_res = g.size() ? std::max(0.0, g.maxCoeff()) : 0.0;
  return {eq_res, in_res};
}

Vec MpcController::candidate_vector(const Vec& theta_hat) const {
  if (!have_prev_)
    throw ContractViolation("candidate_vector: no previous solution");
  const MpcLayout& lay = lay_;
  Vec w(lay.size());
  for (int j = 0; j < lay.N; ++j) {
    w.segment(lay.z(j), lay.n_x) = prev_.z.col(j + 1);
    w(lay.s(j)) = prev_.s(j + 1);
    if (j < lay.N - 1)
      w.segment(lay.v(j), lay.n_u) = prev_.v.col(j + 1);
    else
      w.segment(lay.v(j), lay.n_u) = prev_.v_s;
  }
  w.segment(lay.z(lay.N), lay.n_x) = prev_.z.col(lay.N);
  w(lay.s(lay.N)) = prev_.s(lay.N);
  w.segment(lay.vs(), lay.n_u) = prev_.v_s;
  w.segment(lay.xs(), lay.n_x) = ss_.parametric(prev_.v_s, theta_hat);
  return w;
}

Vec MpcController::cold_start_vector(const Vec& x, const Vec& theta_hat) const {
  const MpcLayout& lay = lay_;
  const Vec v_ref = cfg_.design.v_s;
  Vec w = Vec::Zero(lay.size());
  for (int j = 0; j <= lay.N; ++j) w.segment(lay.z(j), lay.n_x) = x;
  for (int j = 0; j < lay.N; ++j) w.segment(lay.v(j), lay.n_u) = v_ref;
  w.segment(lay.vs(), lay.n_u) = v_ref;
  w(lay.s(0)) = 0.0;
  for (int j = 0; j < lay.N; ++j)
    w(lay.s(j + 1)) = propagate_size(cfg_.design.tube, cfg_.model, x, v_ref,
                                     w(lay.s(j)), cfg_.Theta, cfg_.D,
                                     cfg_.design.theta_bar);
  try {
    w.segment(lay.xs(), lay.n_x) = ss_.parametric(v_ref, theta_hat);
  } catch (const NumericalError&) {
    w.segment(lay.xs(), lay.n_x) = x;
  }
  return w;
}

double MpcController::lambda_value(const Vec& theta_hat) const {
  if (!have_prev_) return kInf;
  // (14): cost of the candidate setpoint carried over from the previous solve.
  const Vec x_s = ss_.parametric(prev_.v_s, theta_hat);
  const Vec u_s = feedback_kappa(cfg_.design.tube.K, x_s,
                                 prev_.z.col(lay_.N), prev_.v_s);
  return cfg_.cost.value(x_s, u_s);
}

std::pair<Vec, MpcSolution> MpcController::step(const Vec& x_k,
                                                const Vec& theta_hat) {
  const auto t0 = std::chrono::steady_clock::now();
  const double lambda = lambda_value(theta_hat);
  Vec warm = have_prev_ ? candidate_vector(theta_hat)
                        : cold_start_vector(x_k, theta_hat);

  MpcSolution sol;
  bool solved = false;
  if (solver_enabled_) {
    NlpProblem prob = build_problem(x_k, theta_hat, lambda, warm);
    NlpOptions opts = cfg_.nlp;
    if (hessian_warm_.rows() == lay_.size()) opts.hessian_init = hessian_warm_;
    const NlpResult res = nlp_solve(prob, opts);
    if (res.ok()) {
      sol = unpack(res.x, x_k, theta_hat);
      sol.status = res.status;
      sol.kkt = res.kkt;
      sol.iters = res.iters;
      hessian_warm_ = res.hessian;
      solved = true;
    } else {
      hessian_warm_.resize(0, 0);
    }
  }
  if (!solved) {
    if (!have_prev_)
      throw NumericalError(
          "MpcController: initial problem infeasible or solver failed at k=0");
    sol = unpack(warm, x_k, theta_hat);  // shifted candidate (Appendix-A form)
    sol.status = NlpStatus::max_iterations;
    sol.iters = 0;
    sol.candidate_used = true;
  }
  sol.lambda = lambda;
  sol.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  const Vec u = feedback_kappa(cfg_.design.tube.K, x_k, sol.z.col(0), sol.v.col(0));
  prev_ = sol;
  have_prev_ = true;
  ++k_;
  return {u, sol};
}

}  // namespace aempc
