#include "aempc/nlp.hpp"

#include "aempc/qp.hpp"

#include <cmath>
#include <fstream>

namespace aempc {

namespace {

double constraint_violation(const Vec& h, const Vec& g) {
  double v = 0.0;
  for (Eigen::Index i = 0; i < h.size(); ++i) v += std::abs(h(i));
  for (Eigen::Index i = 0; i < g.size(); ++i) v += std::max(0.0, g(i));
  return v;
}

bool all_finite(const Vec& v) { return v.allFinite(); }

void audit_gradients(const NlpProblem& p, const NlpOptions& opts) {
  const Vec g_fd = fd::gradient(p.f, p.x0);
  const Vec g_an = p.grad(p.x0);
  const double scale = std::max(1.0, g_fd.norm());
  if ((g_an - g_fd).norm() > opts.grad_check_tol * scale)
    throw NumericalError("nlp: objective gradient fails finite-difference audit");
  if (p.m_eq > 0) {
    const Mat J_fd = fd::jacobian(p.eq, p.x0);
    const Mat J_an = p.eq_jac(p.x0);
    if ((J_an - J_fd).norm() > opts.grad_check_tol * std::max(1.0, J_fd.norm()))
      throw NumericalError("nlp: equality Jacobian fails finite-difference audit");
  }
  if (p.m_ineq > 0) {
    const Mat J_fd = fd::jacobian(p.ineq, p.x0);
    const Mat J_an = p.ineq_jac(p.x0);
    if ((J_an - J_fd).norm() > opts.grad_check_tol * std::max(1.0, J_fd.norm()))
      throw NumericalError("nlp: inequality Jacobian fails finite-difference audit");
  }
}

}  // namespace

KktResiduals check_kkt(const NlpProblem& p, const Vec& x, const Vec& lambda_eq,
                       const Vec& mu_ineq) {
  KktResiduals r;
  Vec grad_L = p.grad(x);
  if (p.m_eq > 0) grad_L += p.eq_jac(x).transpose() * lambda_eq;
  Vec g;
  if (p.m_ineq > 0) {
    grad_L += p.ineq_jac(x).transpose() * mu_ineq;
    g = p.ineq(x);
  }
  r.stationarity = grad_L.lpNorm<Eigen::Infinity>();
  double feas = 0.0;
  if (p.m_eq > 0) feas = p.eq(x).lpNorm<Eigen::Infinity>();
  double comp = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    feas = std::max(feas, g(i));
    comp = std::max(comp, std::abs(mu_ineq(i) * g(i)));
  }
  r.feasibility = feas;
  r.complementarity = comp;
  return r;
}

NlpResult nlp_solve(const NlpProblem& p, const NlpOptions& opts) {
  NlpResult res;
  res.x = p.x0;
  res.lambda_eq = Vec::Zero(p.m_eq);
  res.mu_ineq = Vec::Zero(p.m_ineq);
  if (!all_finite(p.x0)) {
    res.status = NlpStatus::callback_nan;
    return res;
  }
  if (opts.check_gradients) audit_gradients(p, opts);

  std::ofstream trace;
  if (!opts.trace_path.empty()) trace.open(opts.trace_path);

  const int n = p.n;
  Mat B = opts.hessian_init.size() == n * n && opts.hessian_init.rows() == n
              ? opts.hessian_init
              : Mat::Identity(n, n);

  Vec x = p.x0;
  double fx = p.f(x);
  Vec gx = p.grad(x);
  Vec h = p.m_eq > 0 ? p.eq(x) : Vec(0);
  Mat Jh = p.m_eq > 0 ? p.eq_jac(x) : Mat(0, n);
  Vec g = p.m_ineq > 0 ? p.ineq(x) : Vec(0);
  Mat Jg = p.m_ineq > 0 ? p.ineq_jac(x) : Mat(0, n);
  double nu = 1.0;

  for (res.iters = 0; res.iters < opts.max_iter; ++res.iters) {
    if (!std::isfinite(fx) || !all_finite(gx) || !all_finite(h) || !all_finite(g)) {
      res.status = NlpStatus::callback_nan;
      break;
    }

    QpResult qp = qp_solve(B, gx, Jh, h, Jg, g);
    Vec d;
    bool restoration_step = false;
    if (qp.solved) {
      d = qp.x;
      res.lambda_eq = qp.lambda_eq;
      res.mu_ineq = qp.mu_ineq;
    } else {
      // Restoration: Gauss-Newton step on the violated constraints.
      ++res.restoration_count;
      restoration_step = true;
      std::vector<int> viol;
      for (Eigen::Index i = 0; i < g.size(); ++i)
        if (g(i) > 0.0) viol.push_back(static_cast<int>(i));
      Mat J(p.m_eq + viol.size(), n);
      Vec r(p.m_eq + viol.size());
      if (p.m_eq > 0) {
        J.topRows(p.m_eq) = Jh;
        r.head(p.m_eq) = h;
      }
      for (std::size_t k = 0; k < viol.size(); ++k) {
        J.row(p.m_eq + k) = Jg.row(viol[k]);
        r(p.m_eq + k) = g(viol[k]);
      }
      if (J.rows() == 0) {
        res.status = NlpStatus::qp_failure;
        break;
      }
      Mat JtJ = J.transpose() * J;
      JtJ.diagonal().array() += 1e-8 * std::max(1.0, JtJ.diagonal().maxCoeff());
      d = Eigen::LDLT<Mat>(JtJ).solve(-J.transpose() * r);
      if (!all_finite(d)) {
        res.status = NlpStatus::qp_failure;
        break;
      }
    }

    // Convergence test with the latest multipliers at the current point.
    {
      const KktResiduals kkt = check_kkt(p, x, res.lambda_eq, res.mu_ineq);
      if (kkt.stationarity <= opts.tol_stat && kkt.feasibility <= opts.tol_feas &&
          kkt.complementarity <= opts.tol_comp) {
        res.status = NlpStatus::solved;
        res.kkt = kkt;
        break;
      }
    }

    // Exact l1 penalty must dominate the multipliers.
    double mult_inf = 0.0;
    if (res.lambda_eq.size() > 0)
      mult_inf = res.lambda_eq.lpNorm<Eigen::Infinity>();
    if (res.mu_ineq.size() > 0)
      mult_inf = std::max(mult_inf, res.mu_ineq.lpNorm<Eigen::Infinity>());
    nu = std::max(nu, 1.5 * mult_inf + 1e-3);

    const double viol0 = constraint_violation(h, g);
    const double phi0 = fx + nu * viol0;
    const double dir_deriv = gx.dot(d) - nu * viol0;

    double alpha = 1.0;
    bool accepted = false;
    Vec x_try, h_try(p.m_eq), g_try(p.m_ineq);
    double f_try = 0.0;
    for (int ls = 0; ls < 40; ++ls) {
      x_try = x + alpha * d;
      f_try = p.f(x_try);
      if (p.m_eq > 0) h_try = p.eq(x_try);
      if (p.m_ineq > 0) g_try = p.ineq(x_try);
      if (std::isfinite(f_try) && all_finite(h_try) && all_finite(g_try)) {
        const double viol_try = constraint_violation(h_try, g_try);
        if (restoration_step) {
          // Restoration only needs to make progress on feasibility.
          if (viol_try <= (1.0 - 1e-4 * alpha) * viol0) {
            accepted = true;
            break;
          }
        } else {
          const double phi = f_try + nu * viol_try;
          if (phi <= phi0 + 1e-4 * alpha * dir_deriv) {
            accepted = true;
            break;
          }
        }
      }
      alpha *= 0.5;
      if (alpha < 1e-12) break;
    }
    if (!accepted) {
      res.status = NlpStatus::line_search_failure;
      break;
    }

    // Damped BFGS on the Lagrangian.
    Vec grad_L_old = gx;
    if (p.m_eq > 0) grad_L_old += Jh.transpose() * res.lambda_eq;
    if (p.m_ineq > 0) grad_L_old += Jg.transpose() * res.mu_ineq;

    x = x_try;
    fx = f_try;
    gx = p.grad(x);
    if (p.m_eq > 0) {
      h = h_try;
      Jh = p.eq_jac(x);
    }
    if (p.m_ineq > 0) {
      g = g_try;
      Jg = p.ineq_jac(x);
    }

    Vec grad_L_new = gx;
    if (p.m_eq > 0) grad_L_new += Jh.transpose() * res.lambda_eq;
    if (p.m_ineq > 0) grad_L_new += Jg.transpose() * res.mu_ineq;

    const Vec s = alpha * d;
    Vec yv = grad_L_new - grad_L_old;
    const double sBs = s.dot(B * s);
    double sy = s.dot(yv);
    if (sBs > 1e-14) {
      if (sy < 0.2 * sBs) {
        const double theta = 0.8 * sBs / (sBs - sy);
        yv = theta * yv + (1.0 - theta) * (B * s);
        sy = s.dot(yv);
      }
      if (sy > 1e-14) {
        const Vec Bs = B * s;
        B -= (Bs * Bs.transpose()) / sBs;
        B += (yv * yv.transpose()) / sy;
      }
    }

    if (trace.is_open()) {
      trace << res.iters << ' ' << fx << ' ' << constraint_violation(h, g) << ' '
            << alpha << ' ' << nu << ' ' << (restoration_step ? "R" : "S")
            << '\n';
    }
  }

  res.x = x;
  res.f = p.f(x);
  res.hessian = B;
  if (res.status == NlpStatus::max_iterations || res.status == NlpStatus::solved) {
    res.kkt = check_kkt(p, x, res.lambda_eq, res.mu_ineq);
    if (res.status == NlpStatus::max_iterations &&
        res.kkt.stationarity <= opts.tol_stat &&
        res.kkt.feasibility <= opts.tol_feas &&
        res.kkt.complementarity <= opts.tol_comp)
      res.status = NlpStatus::solved;
  }
  return res;
}

}  // namespace aempc
