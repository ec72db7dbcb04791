#pragma once

#include "aempc/nlp.hpp"
#include "aempc/params.hpp"
#include "aempc/sets.hpp"
#include "aempc/steady_state.hpp"
#include "aempc/tube.hpp"

#include <memory>

namespace aempc {

struct ControllerConfig {
  int horizon = 25;
  double beta = 50.0;
  ParametricModel model;
  StageCost cost;
  ConstraintSet Z;
  Box Theta;
  Box D;
  DesignArtifacts design;
  NlpOptions nlp;
  /// Objective pre-scaling keeps gradients O(1) for large beta; 0 = auto.
  double objective_scale = 0.0;
};

/// Index bookkeeping for the decision vector
/// [z_0..z_N, v_0..v_{N-1}, v_s, s_0..s_N, x_s].
struct MpcLayout {
  int N = 0, n_x = 0, n_u = 0;
  int z(int j) const { return j * n_x; }
  int v(int j) const { return (N + 1) * n_x + j * n_u; }
  int vs() const { return (N + 1) * n_x + N * n_u; }
  int s(int j) const { return vs() + n_u + j; }
  int xs() const { return vs() + n_u + (N + 1); }
  int size() const { return xs() + n_x; }
};

struct MpcSolution {
  Mat z;       // n_x x (N+1)
  Mat v;       // n_u x N
  Vec v_s;     // n_u
  Vec s;       // N+1
  Vec x_s_hat; // n_x
  Vec u_s_hat; // n_u
  Mat x_hat;   // n_x x (N+1), certainty-equivalent prediction
  double cost = 0.0;           // objective (stage sum + terminal + beta term)
  double setpoint_cost = 0.0;  // l(x_s_hat, u_s_hat)
  double lambda = 0.0;         // cap active at this solve (inf at k = 0)
  NlpStatus status = NlpStatus::max_iterations;
  KktResiduals kkt;
  int iters = 0;
  bool candidate_used = false;
  double solve_seconds = 0.0;
};

class MpcController {
 public:
  explicit MpcController(ControllerConfig cfg);

  /// One closed-loop controller step: lambda update, solve (or candidate
  /// fallback), input computation.
  std::pair<Vec, MpcSolution> step(const Vec& x_k, const Vec& theta_hat);

  /// The transcribed NLP for given data; exposed for tests and audits.
  NlpProblem build_problem(const Vec& x_k, const Vec& theta_hat, double lambda,
                           const Vec& warm_start) const;

  /// Decision vector of the shifted feasibility candidate.
  Vec candidate_vector(const Vec& theta_hat) const;

  /// Cold-start guess: frozen nominal trajectory at x with constant input.
  Vec cold_start_vector(const Vec& x, const Vec& theta_hat) const;

  /// Decode a decision vector (recomputes the certainty-equivalent rollout).
  MpcSolution unpack(const Vec& w, const Vec& x_k, const Vec& theta_hat) const;

  /// Constraint residuals of a decision vector: max equality |.|, max
  /// inequality positive part (used by feasibility audits).
  std::pair<double, double> constraint_residuals(const Vec& w, const Vec& x_k,
                                                 const Vec& theta_hat,
                                                 double lambda) const;

  void set_solver_enabled(bool enabled) { solver_enabled_ = enabled; }
  bool has_previous() const { return have_prev_; }
  const MpcSolution& previous() const { return prev_; }
  double lambda_value(const Vec& theta_hat) const;
  const MpcLayout& layout() const { return lay_; }
  const SteadyStateSolver& steady_solver() const { return ss_; }
  int steps_taken() const { return k_; }

 private:
  double scale() const;
  Vec p_and_grads(const Vec& x_s, const Vec& v_s, const Vec& theta,
                  Mat* dp_dxs, Mat* dp_dvs) const;

  ControllerConfig cfg_;
  MpcLayout lay_;
  SteadyStateSolver ss_;
  int k_ = 0;
  bool have_prev_ = false;
  bool solver_enabled_ = true;
  MpcSolution prev_;
  Mat hessian_warm_;
};

}  // namespace aempc
