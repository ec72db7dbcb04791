#pragma once

#include "aempc/types.hpp"

#include <nlohmann/json_fwd.hpp>

namespace aempc {

/// One LMI block: constant + sum_i y_i * coeffs[i].second >= 0 (PSD).
struct LmiBlock {
  Mat constant;
  std::vector<std::pair<int, Mat>> coeffs;
};

/// min objective . y  s.t. every block is PSD.
struct SdpProblem {
  std::vector<LmiBlock> blocks;
  Vec objective;
  int num_vars = 0;
};

enum class SdpStatus { solved, infeasible, max_iterations, numerical_failure };

struct SdpOptions {
  double feas_tol = 1e-8;
  double gap_tol = 1e-7;         // relative complementarity gap target
  double barrier_shrink = 0.2;   // barrier parameter multiplied by this factor
  int max_newton = 200;          // Newton iterations per barrier stage
  double var_bound = 1e8;        // |y_i| <= var_bound (keeps the barrier bounded)
  bool minimize_objective = true;  // false: feasibility only (phase 1 + centering)
  bool verbose = false;
};

struct SdpResult {
  Vec y;
  SdpStatus status = SdpStatus::numerical_failure;
  double objective = 0.0;
  int newton_iters = 0;
  std::vector<double> stage_objectives;  // objective after each barrier stage
  std::string message;

  bool ok() const { return status == SdpStatus::solved; }
};

SdpResult sdp_solve(const SdpProblem& problem, const SdpOptions& opts = {});

/// Per-block minimum eigenvalues of the LMIs at a candidate point.
struct LmiReport {
  std::vector<double> min_eig;
  double worst = 0.0;
  int worst_block = -1;
  bool ok(double tol) const { return worst >= -tol; }
};

LmiReport verify_lmi(const std::vector<LmiBlock>& blocks, const Vec& y,
                     double tol);

/// Dump of the assembled problem, for cross-checking with external solvers.
nlohmann::json sdp_to_json(const SdpProblem& problem);

}  // namespace aempc
