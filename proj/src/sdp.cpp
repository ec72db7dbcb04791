#include "aempc/sdp.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <limits>

namespace aempc {

namespace {

void validate(const SdpProblem& p) {
  if (p.objective.size() != p.num_vars)
    throw ContractViolation("sdp: objective length != num_vars");
  for (const auto& b : p.blocks) {
    const auto n = b.constant.rows();
    if (b.constant.cols() != n)
      throw ContractViolation("sdp: non-square block");
    if (!b.constant.isApprox(b.constant.transpose(), 1e-12))
      throw ContractViolation("sdp: non-symmetric constant matrix");
    for (const auto& [idx, M] : b.coeffs) {
      if (idx < 0 || idx >= p.num_vars)
        throw ContractViolation("sdp: coefficient variable index out of range");
      if (M.rows() != n || M.cols() != n)
        throw ContractViolation("sdp: coefficient dimension mismatch");
      if (!M.isApprox(M.transpose(), 1e-12))
        throw ContractViolation("sdp: non-symmetric coefficient matrix");
    }
  }
}

struct BarrierWork {
  // Per-block factorization workspace reused across iterations.
  std::vector<Mat> F;
  std::vector<Eigen::LLT<Mat>> llt;
};

Mat assemble(const LmiBlock& b, const Vec& y) {
  Mat F = b.constant;
  for (const auto& [idx, M] : b.coeffs) F += y(idx) * M;
  return F;
}

bool strictly_feasible(const std::vector<LmiBlock>& blocks, const Vec& y,
                       BarrierWork& work) {
  work.F.resize(blocks.size());
  work.llt.resize(blocks.size());
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    work.F[k] = assemble(blocks[k], y);
    work.llt[k].compute(work.F[k]);
    if (work.llt[k].info() != Eigen::Success) return false;
  }
  return true;
}

double barrier_value(double t, const Vec& c, const Vec& y,
                     const BarrierWork& work) {
  double val = t * c.dot(y);
  for (std::size_t k = 0; k < work.llt.size(); ++k) {
    const auto& L = work.llt[k].matrixLLT();
    for (Eigen::Index i = 0; i < L.rows(); ++i) val -= 2.0 * std::log(L(i, i));
  }
  return val;
}

/// Minimize t*c'y - sum_b log det F_b(y) by damped Newton from a strictly
/// feasible y. Returns false on breakdown.
bool center(const std::vector<LmiBlock>& blocks, const Vec& c, double t, Vec& y,
            int max_newton, int& newton_total, double* early_exit_coord = nullptr,
            int early_exit_index = -1, bool verbose = false) {
  const int m = static_cast<int>(y.size());
  BarrierWork work;
  if (!strictly_feasible(blocks, y, work)) {
    if (verbose) std::fprintf(stderr, "[sdp center] start not strictly feasible\n");
    return false;
  }

  for (int iter = 0; iter < max_newton; ++iter) {
    Vec g = t * c;
    Mat H = Mat::Zero(m, m);
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      const auto& blk = blocks[k];
      const Eigen::Index n = blk.constant.rows();
      Mat Finv = work.llt[k].solve(Mat::Identity(n, n));
      const int nv = static_cast<int>(blk.coeffs.size());
      std::vector<Mat> W(nv);
      for (int a = 0; a < nv; ++a) {
        W[a] = Finv * blk.coeffs[a].second;
        g(blk.coeffs[a].first) -= W[a].trace();
      }
      for (int a = 0; a < nv; ++a) {
        const int ia = blk.coeffs[a].first;
        for (int b = a; b < nv; ++b) {
          const int ib = blk.coeffs[b].first;
          const double hab = (W[a].array() * W[b].transpose().array()).sum();
          H(ia, ib) += hab;
          if (ia != ib) H(ib, ia) += hab;
        }
      }
    }
    H.diagonal().array() += 1e-12;
    Eigen::LDLT<Mat> ldlt(H);
    if (ldlt.info() != Eigen::Success) {
      if (verbose) std::fprintf(stderr, "[sdp center] LDLT failure\n");
      return false;
    }
    const Vec dy = ldlt.solve(-g);
    const double decrement_sq = -g.dot(dy);
    if (!std::isfinite(decrement_sq)) {
      if (verbose) std::fprintf(stderr, "[sdp center] non-finite decrement\n");
      return false;
    }
    if (decrement_sq <= 2e-10) return true;  // centered

    const double phi0 = barrier_value(t, c, y, work);
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      Vec y_try = y + alpha * dy;
      BarrierWork trial;
      if (strictly_feasible(blocks, y_try, trial)) {
        const double phi = barrier_value(t, c, y_try, trial);
        if (phi <= phi0 - 1e-4 * alpha * decrement_sq) {
          y = std::move(y_try);
          work = std::move(trial);
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    ++newton_total;
    if (!accepted) return true;  // stalled: treat as centered at this stage
    if (early_exit_index >= 0 && y(early_exit_index) < *early_exit_coord)
      return true;
  }
  return true;
}

std::vector<LmiBlock> with_bounds(const std::vector<LmiBlock>& blocks, int m,
                                  double R) {
  std::vector<LmiBlock> out = blocks;
  for (int i = 0; i < m; ++i) {
    LmiBlock lo, hi;
    lo.constant = Mat::Constant(1, 1, R);
    lo.coeffs.push_back({i, Mat::Constant(1, 1, 1.0)});
    hi.constant = Mat::Constant(1, 1, R);
    hi.coeffs.push_back({i, Mat::Constant(1, 1, -1.0)});
    out.push_back(std::move(lo));
    out.push_back(std::move(hi));
  }
  return out;
}

}  // namespace

SdpResult sdp_solve(const SdpProblem& problem, const SdpOptions& opts) {
  validate(problem);
  SdpResult res;
  const int m = problem.num_vars;

  // Phase 1: min tau  s.t.  F_b(y) + tau*I >= 0, to find a strict interior.
  std::vector<LmiBlock> aug;
  aug.reserve(problem.blocks.size());
  for (const auto& b : problem.blocks) {
    LmiBlock a = b;
    a.coeffs.push_back({m, Mat::Identity(b.constant.rows(), b.constant.cols())});
    aug.push_back(std::move(a));
  }
  aug = with_bounds(aug, m + 1, opts.var_bound);

  Vec y_aug = Vec::Zero(m + 1);
  double lam_min0 = 0.0;
  for (const auto& b : problem.blocks) {
    Eigen::SelfAdjointEigenSolver<Mat> eig(b.constant, Eigen::EigenvaluesOnly);
    lam_min0 = std::min(lam_min0, eig.eigenvalues().minCoeff());
  }
  y_aug(m) = -lam_min0 + 1.0;

  Vec c1 = Vec::Zero(m + 1);
  c1(m) = 1.0;
  double t = 1.0;
  const double phase1_target = -1e-6;
  double total_dim = 0.0;
  for (const auto& b : aug) total_dim += static_cast<double>(b.constant.rows());
  bool interior_found = false;
  for (int stage = 0; stage < 80; ++stage) {
    double cutoff = phase1_target;
    const int before = res.newton_iters;
    if (!center(aug, c1, t, y_aug, opts.max_newton, res.newton_iters, &cutoff, m,
                opts.verbose))
      break;
    if (opts.verbose)
      std::fprintf(stderr, "[sdp phase1] stage=%d t=%.3e tau=%.6e newton=%d\n",
                   stage, t, y_aug(m), res.newton_iters - before);
    if (y_aug(m) < phase1_target) {
      interior_found = true;
      break;
    }
    if (total_dim / t < 0.25 * std::abs(phase1_target)) break;
    t /= opts.barrier_shrink;
  }
  if (!interior_found) {
    res.status = SdpStatus::infeasible;
    res.message = "phase-1 slack did not become negative (tau = " +
                  std::to_string(y_aug(m)) + ")";
    res.y = y_aug.head(m);
    return res;
  }

  Vec y = y_aug.head(m);
  const auto blocks = with_bounds(problem.blocks, m, opts.var_bound);
  double blocks_dim = 0.0;
  for (const auto& b : blocks) blocks_dim += static_cast<double>(b.constant.rows());

  if (!opts.minimize_objective || problem.objective.lpNorm<Eigen::Infinity>() == 0.0) {
    // Feasibility-only: re-center once so callers get a well-conditioned point.
    center(blocks, Vec::Zero(m), 1.0, y, opts.max_newton, res.newton_iters);
    res.y = y;
    res.objective = problem.objective.dot(y);
    res.status = SdpStatus::solved;
    return res;
  }

  t = std::max(1.0, blocks_dim / std::max(1.0, std::abs(problem.objective.dot(y))));
  bool converged = false;
  for (int stage = 0; stage < 80; ++stage) {
    if (!center(blocks, problem.objective, t, y, opts.max_newton,
                res.newton_iters)) {
      res.status = SdpStatus::numerical_failure;
      res.message = "barrier centering breakdown";
      res.y = y;
      return res;
    }
    const double obj = problem.objective.dot(y);
    res.stage_objectives.push_back(obj);
    const double gap = blocks_dim / t;
    if (gap <= opts.gap_tol * (1.0 + std::abs(obj))) {
      converged = true;
      break;
    }
    t /= opts.barrier_shrink;
  }
  res.y = y;
  res.objective = problem.objective.dot(y);
  res.status = converged ? SdpStatus::solved : SdpStatus::max_iterations;
  if (!converged) res.message = "barrier stage limit reached";
  return res;
}

LmiReport verify_lmi(const std::vector<LmiBlock>& blocks, const Vec& y,
                     double tol) {
  LmiReport rep;
  rep.min_eig.reserve(blocks.size());
  rep.worst = std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Mat> eig;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    eig.compute(assemble(blocks[k], y), Eigen::EigenvaluesOnly);
    const double lam = eig.eigenvalues().minCoeff();
    rep.min_eig.push_back(lam);
    if (lam < rep.worst) {
      rep.worst = lam;
      rep.worst_block = static_cast<int>(k);
    }
  }
  if (blocks.empty()) rep.worst = 0.0;
  (void)tol;
  return rep;
}

nlohmann::json sdp_to_json(const SdpProblem& problem) {
  nlohmann::json j;
  j["num_vars"] = problem.num_vars;
  j["objective"] = std::vector<double>(
      problem.objective.data(), problem.objective.data() + problem.objective.size());
  auto mat_to_json = [](const Mat& M) {
    std::vector<std::vector<double>> rows(M.rows(), std::vector<double>(M.cols()));
    for (Eigen::Index r = 0; r < M.rows(); ++r)
      for (Eigen::Index c = 0; c < M.cols(); ++c) rows[r][c] = M(r, c);
    return rows;
  };
  j["blocks"] = nlohmann::json::array();
  for (const auto& b : problem.blocks) {
    nlohmann::json jb;
    jb["constant"] = mat_to_json(b.constant);
    jb["coeffs"] = nlohmann::json::array();
    for (const auto& [idx, M] : b.coeffs)
      jb["coeffs"].push_back({{"var", idx}, {"matrix", mat_to_json(M)}});
    j["blocks"].push_back(std::move(jb));
  }
  return j;
}

}  // namespace aempc
