#include "aempc/qp.hpp"

#include <cmath>
#include <limits>

namespace aempc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Goldfarb-Idnani dual active-set method for
///   min 0.5 q'Hq + d'q  s.t.  A q <= b   (rows of A are constraint normals).
/// H must be positive definite.
struct GiResult {
  Vec q;
  Vec mu;  // one multiplier per row of A, >= 0
  bool solved = false;
  bool infeasible = false;
  int iters = 0;
};

GiResult gi_solve(const Mat& H, const Vec& d, const Mat& A, const Vec& b) {
  const int n = static_cast<int>(d.size());
  const int m = static_cast<int>(b.size());
  GiResult res;
  res.mu = Vec::Zero(m);

  Eigen::LLT<Mat> llt(H);
  if (llt.info() != Eigen::Success) {
    Mat Hr = H;
    Hr.diagonal().array() += 1e-10 * std::max(1.0, H.diagonal().maxCoeff());
    llt.compute(Hr);
    if (llt.info() != Eigen::Success) return res;
  }

  // J = L^{-T}; maintained under active-set changes via Givens rotations.
  Mat J = llt.matrixU().solve(Mat::Identity(n, n));
  Vec q = llt.solve(-d);
  if (m == 0) {
    res.q = q;
    res.solved = true;
    return res;
  }

  Mat R = Mat::Zero(n, n);
  std::vector<int> active;
  Vec u = Vec::Zero(n + 1);
  Vec s = A * q - b;  // slacks; feasible when <= 0
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  const double tol = 1e-11 * scale;

  const int max_iters = 50 * (n + m + 10);

  int p = -1;
  double sp = 0.0;
  Vec np;
  int nact = 0;
  bool choosing = true;

  for (res.iters = 0; res.iters < max_iters; ++res.iters) {
    if (choosing) {
      // most violated inactive constraint
      p = -1;
      double worst = tol;
      for (int i = 0; i < m; ++i) {
        bool is_active = false;
        for (int k = 0; k < nact; ++k)
          if (active[k] == i) {
            is_active = true;
            break;
          }
        if (is_active) continue;
        const double si = A.row(i).dot(q) - b(i);
        if (si > worst) {
          worst = si;
          p = i;
        }
      }
      if (p < 0) {
        res.q = q;
        res.solved = true;
        for (int k = 0; k < nact; ++k) res.mu(active[k]) = u(k);
        return res;
      }
      np = -A.row(p).transpose();  // GI convention: n_p' q >= b_p form
      sp = -(A.row(p).dot(q) - b(p));
      u(nact) = 0.0;
      choosing = false;
    }

    // Step directions: z in primal space, r in dual space.
    const Vec Jtnp = J.transpose() * np;
    Vec z = Vec::Zero(n);
    for (int col = nact; col < n; ++col) z += J.col(col) * Jtnp(col);
    Vec r(nact);
    if (nact > 0) {
      r = R.topLeftCorner(nact, nact)
              .triangularView<Eigen::Upper>()
              .solve(Jtnp.head(nact));
    }

    // Partial (dual) step length.
    double t1 = kInf;
    int blocking = -1;
    for (int k = 0; k < nact; ++k) {
      if (r(k) > 1e-14) {
        const double tk = u(k) / r(k);
        if (tk < t1) {
          t1 = tk;
          blocking = k;
        }
      }
    }
    // Full (primal) step length.
    const double ztnp = z.dot(np);
    const double t2 = (std::abs(ztnp) > 1e-14) ? -sp / ztnp : kInf;

    const double t = std::min(t1, t2);
    if (t >= kInf) {
      res.infeasible = true;  // no step restores feasibility: inconsistent QP
      return res;
    }

    if (t2 >= kInf) {
      // Dual-only step: drop the blocking constraint.
      for (int k = 0; k < nact; ++k) u(k) -= t * r(k);
      u(nact) += t;
      // Remove constraint `blocking` from the active set factorization.
      for (int k = blocking; k + 1 < nact; ++k) {
        active[k] = active[k + 1];
        u(k) = u(k + 1);
        R.col(k) = R.col(k + 1);
      }
      u(nact - 1) = u(nact);
      --nact;
      active.resize(nact);
      // Re-triangularize R and update J with Givens rotations.
      for (int k = blocking; k < nact; ++k) {
        Eigen::JacobiRotation<double> rot;
        rot.makeGivens(R(k, k), R(k + 1, k));
        R.applyOnTheLeft(k, k + 1, rot.adjoint());
        J.applyOnTheRight(k, k + 1, rot);
        R(k + 1, k) = 0.0;
      }
      continue;
    }

    // Primal (and dual) step.
    q += t * z;
    for (int k = 0; k < nact; ++k) u(k) -= t * r(k);
    u(nact) += t;
    sp += t * ztnp;

    if (t == t2 && sp > -tol * 10 - 1e-300) {
      // Constraint p becomes active.
      active.push_back(p);
      ++nact;
      // Append column to R: R_new = J' * np limited to first nact rows, with
      // rows below nact rotated to zero.
      Vec col = J.transpose() * np;
      for (int row = n - 1; row >= nact; --row) {
        Eigen::JacobiRotation<double> rot;
        rot.makeGivens(col(row - 1), col(row));
        col.applyOnTheLeft(row - 1, row, rot.adjoint());
        J.applyOnTheRight(row - 1, row, rot);
      }
      R.col(nact - 1).setZero();
      R.col(nact - 1).head(nact) = col.head(nact);
      choosing = true;
      continue;
    }

    // Partial step: drop the blocking constraint and keep working on p.
    for (int k = blocking; k + 1 < nact; ++k) {
      active[k] = active[k + 1];
      u(k) = u(k + 1);
      R.col(k) = R.col(k + 1);
    }
    u(nact - 1) = u(nact);
    --nact;
    active.resize(nact);
    for (int k = blocking; k < nact; ++k) {
      Eigen::JacobiRotation<double> rot;
      rot.makeGivens(R(k, k), R(k + 1, k));
      R.applyOnTheLeft(k, k + 1, rot.adjoint());
      J.applyOnTheRight(k, k + 1, rot);
      R(k + 1, k) = 0.0;
    }
  }
  return res;  // iteration limit: neither solved nor provably infeasible
}

}  // namespace

QpResult qp_solve(const Mat& H, const Vec& g, const Mat& CE, const Vec& ce,
                  const Mat& CI, const Vec& ci) {
  const int n = static_cast<int>(g.size());
  const int me = static_cast<int>(ce.size());
  const int mi = static_cast<int>(ci.size());
  QpResult res;
  res.lambda_eq = Vec::Zero(me);
  res.mu_ineq = Vec::Zero(mi);

  Vec x_part = Vec::Zero(n);
  Mat Z;  // null-space basis of CE
  int nz = n;
  if (me > 0) {
    Eigen::ColPivHouseholderQR<Mat> qr(CE.transpose());
    const int rank = static_cast<int>(qr.rank());
    // Min-norm particular solution of CE x = -ce.
    x_part = qr.transpose().solve(-ce);
    const double resid = (CE * x_part + ce).cwiseAbs().maxCoeff();
    if (resid > 1e-8 * std::max(1.0, ce.cwiseAbs().maxCoeff())) {
      res.infeasible = true;
      res.message = "inconsistent equality constraints";
      return res;
    }
    Mat Q = qr.householderQ();
    nz = n - rank;
    Z = Q.rightCols(nz);
  } else {
    Z = Mat::Identity(n, n);
  }

  if (nz == 0) {
    res.x = x_part;
    if (mi > 0 && ((CI * res.x + ci).array() > 1e-8).any()) {
      res.infeasible = true;
      res.message = "equalities pin an inequality-infeasible point";
      return res;
    }
    res.solved = true;
  } else {
    const Mat Hz = Z.transpose() * H * Z;
    const Vec gz = Z.transpose() * (g + H * x_part);
    GiResult gi;
    if (mi > 0) {
      const Mat Az = CI * Z;
      const Vec bz = -(ci + CI * x_part);
      gi = gi_solve(Hz, gz, Az, bz);
    } else {
      gi = gi_solve(Hz, gz, Mat::Zero(0, nz), Vec::Zero(0));
    }
    res.active_set_iters = gi.iters;
    if (gi.infeasible) {
      res.infeasible = true;
      res.message = "active-set method detected inconsistent inequalities";
      return res;
    }
    if (!gi.solved) {
      res.message = "active-set iteration limit";
      return res;
    }
    res.x = x_part + Z * gi.q;
    res.mu_ineq = gi.mu;
    res.solved = true;
  }

  if (me > 0) {
    // Recover equality multipliers from stationarity:
    // CE' lambda = -(H x + g + CI' mu).
    const Vec rhs = -(H * res.x + g +
                      (mi > 0 ? Vec(CI.transpose() * res.mu_ineq) : Vec::Zero(n)));
    res.lambda_eq = CE.transpose()
                        .colPivHouseholderQr()
                        .solve(rhs);
  }
  return res;
}

}  // namespace aempc
