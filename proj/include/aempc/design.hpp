#pragma once

#include "aempc/params.hpp"
#include "aempc/sdp.hpp"
#include "aempc/sets.hpp"
#include "aempc/steady_state.hpp"
#include "aempc/tube.hpp"

namespace aempc {

/// Raised when no feasible tube/terminal design exists for the given data.
struct DesignError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DesignOptions {
  GridSpec grid;
  // Euler discretization floors the attainable contraction at 1 - Ts for
  // modes the input cannot reach; scan above that floor.
  std::vector<double> rho_scan = {0.976, 0.980, 0.984, 0.988, 0.992};
  double lmi_tol = 1e-8;
  SdpOptions sdp;
};

/// Per-rho record of the tube design scan.
struct TubeScanEntry {
  double rho = 0.0;
  bool sdp_feasible = false;
  bool contraction_budget_ok = false;  // rho + L_w < 1
  bool steady_tube_ok = false;         // tightened steady-state margins <= 1
  double L_w = 0.0;
  double w_bar = 0.0;
  double objective = 0.0;  // (43a)-style tightening consumption, or inf
  std::string note;
};

struct TubeDesignDiagnostics {
  std::vector<TubeScanEntry> scan;
  int selected = -1;
};

/// Lipschitz bound on the parametric mismatch in the P-metric:
/// max over x-grid and Theta vertices of
///   || P^{1/2} (sum_i d[G]_{:,i}/dx * [theta - theta_bar]_i) P^{-1/2} ||.
double compute_Lw(const ParametricModel& m, const Mat& P, const Box& Z_x,
                  const Box& Theta, const Vec& theta_bar, int grid_density);

/// Tube design: scan over contraction rates, inner SDP in (X, Y, c) per rate,
/// mismatch bounds recomputed a posteriori, steady-state tightening rechecked.
TubeParams design_tube(const ParametricModel& m, const ConstraintSet& Z,
                       const Box& Theta, const Box& D, const Vec& theta_bar,
                       const Vec& z_s, const Vec& v_s, const DesignOptions& opts,
                       TubeDesignDiagnostics* diag = nullptr);

/// Terminal-cost design: Hessian bound H, setpoint-grid p_max, alpha, scalar
/// envelope Q, then the Lyapunov-type SDP minimizing tr(P_f).
TerminalParams design_terminal(const ParametricModel& m, const StageCost& cost,
                               const TubeParams& tube, const ConstraintSet& Z,
                               const Box& Theta, const Vec& theta_bar,
                               const Vec& v_s_ref, double setpoint_inflation,
                               const DesignOptions& opts);

struct DecreaseReport {
  int samples = 0;
  int violations = 0;
  int skipped = 0;
  double worst_margin = 0.0;  // most positive lhs-rhs excess observed
};

/// Monte Carlo check of the terminal cost decrease inequality over
/// Z_x x Z_u x Theta.
DecreaseReport verify_terminal_decrease(const ParametricModel& m,
                                        const StageCost& cost,
                                        const TerminalParams& terminal,
                                        const TubeParams& tube,
                                        const ConstraintSet& Z, const Box& Theta,
                                        const Vec& theta_bar,
                                        double setpoint_inflation,
                                        int sample_count, std::uint64_t seed);

struct ContainmentReport {
  int samples = 0;
  int escapes = 0;
  double worst_margin = 0.0;  // most positive ||x+ - z+||_P - s+ observed
};

/// Monte Carlo one-step containment check of the homothetic tube.
ContainmentReport verify_tube_containment(const ParametricModel& m,
                                          const TubeParams& tube,
                                          const ConstraintSet& Z,
                                          const Box& Theta, const Box& D,
                                          const Vec& theta_bar, int sample_count,
                                          std::uint64_t seed);

/// Re-assemble the design LMIs on a (refined) grid and report eigenvalues.
LmiReport verify_tube_lmis(const ParametricModel& m, const ConstraintSet& Z,
                           const Box& Theta, const TubeParams& tube,
                           const GridSpec& grid);
LmiReport verify_terminal_lmis(const ParametricModel& m, const TubeParams& tube,
                               const TerminalParams& terminal,
                               const ConstraintSet& Z, const Box& Theta,
                               const Vec& theta_bar, const Vec& v_s_ref,
                               const GridSpec& grid);

/// Full offline pipeline: LMS gain, tube, terminal cost, fine-grid
/// verification with one automatic grid doubling on failure.
DesignArtifacts design_all(const ParametricModel& m, const StageCost& cost,
                           const ConstraintSet& Z, const Box& Theta,
                           const Box& D, const Vec& theta_bar, const Vec& v_s_ref,
                           const DesignOptions& opts,
                           TubeDesignDiagnostics* diag = nullptr);

}  // namespace aempc
