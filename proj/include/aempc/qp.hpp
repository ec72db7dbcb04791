#pragma once

#include "aempc/types.hpp"

namespace aempc {

/// Convex QP
///   min 0.5 x'Hx + g'x
///   s.t. CE x + ce = 0,  CI x + ci <= 0,
/// with H positive definite. Equalities are eliminated through a null-space
/// basis (rank-revealing QR), the reduced problem is solved with the dual
/// active-set method of Goldfarb and Idnani.
struct QpResult {
  Vec x;
  Vec lambda_eq;   // multipliers of CE x + ce = 0
  Vec mu_ineq;     // multipliers of CI x + ci <= 0 (nonnegative)
  bool solved = false;
  bool infeasible = false;
  int active_set_iters = 0;
  std::string message;
};

QpResult qp_solve(const Mat& H, const Vec& g, const Mat& CE, const Vec& ce,
                  const Mat& CI, const Vec& ci);

}  // namespace aempc
