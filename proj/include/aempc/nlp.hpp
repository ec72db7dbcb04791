#pragma once

#include "aempc/types.hpp"

namespace aempc {

/// Smooth NLP
///   min f(x)  s.t.  eq(x) = 0,  ineq(x) <= 0,
/// with caller-supplied derivatives.
struct NlpProblem {
  int n = 0;
  int m_eq = 0;
  int m_ineq = 0;
  Vec x0;
  std::function<double(const Vec&)> f;
  std::function<Vec(const Vec&)> grad;
  std::function<Vec(const Vec&)> eq;
  std::function<Mat(const Vec&)> eq_jac;
  std::function<Vec(const Vec&)> ineq;
  std::function<Mat(const Vec&)> ineq_jac;
};

struct KktResiduals {
  double stationarity = 0.0;
  double feasibility = 0.0;     // max of equality |.| and positive inequality parts
  double complementarity = 0.0;
};

enum class NlpStatus {
  solved,
  max_iterations,
  qp_failure,
  line_search_failure,
  callback_nan,
};

struct NlpOptions {
  double tol_stat = 1e-6;
  double tol_feas = 1e-8;
  double tol_comp = 1e-6;
  int max_iter = 300;
  bool check_gradients = false;   // FD audit of user gradients at x0
  double grad_check_tol = 1e-4;
  std::string trace_path;         // per-iteration trace file (optional)
  Mat hessian_init;               // warm-start Hessian approximation (optional)
};

struct NlpResult {
  Vec x;
  Vec lambda_eq;
  Vec mu_ineq;
  double f = 0.0;
  KktResiduals kkt;
  NlpStatus status = NlpStatus::max_iterations;
  int iters = 0;
  int restoration_count = 0;
  Mat hessian;  // final BFGS approximation, reusable for warm starts

  bool ok() const { return status == NlpStatus::solved; }
};

/// SQP with damped BFGS, l1-penalty line search, and dense active-set QP
/// subproblems. Deterministic given identical inputs.
NlpResult nlp_solve(const NlpProblem& p, const NlpOptions& opts = {});

/// Independent KKT residual evaluation from raw callbacks.
KktResiduals check_kkt(const NlpProblem& p, const Vec& x, const Vec& lambda_eq,
                       const Vec& mu_ineq);

}  // namespace aempc
