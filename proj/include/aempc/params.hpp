#pragma once

#include "aempc/types.hpp"

#include <string>

namespace aempc {

/// Homothetic ellipsoidal tube ingredients (metric, feedback, contraction,
/// bounds, and constraint tightening).
struct TubeParams {
  Mat P;        // SPD tube metric
  Mat K;        // auxiliary feedback gain (n_u x n_x)
  double rho = 0.0;    // contraction rate in the P-metric
  double L_w = 0.0;    // Lipschitz bound on the parametric model mismatch
  double w_bar = 0.0;  // global disturbance-norm bound over the design region
  Vec c;               // per-constraint tightening factors
  double s_max = 0.0;  // w_bar / (1 - rho - L_w)
};

/// Economic terminal cost ingredients.
struct TerminalParams {
  Mat P_f;
  Mat Q;
  double alpha = 0.0;
  double H = 0.0;      // Hessian bound of the closed-loop dynamics
  double p_max = 0.0;  // max ||p|| over the setpoint design grid
};

/// Everything the controller loads from the offline design.
struct DesignArtifacts {
  int schema_version = 1;
  std::string model_name;
  Vec theta_bar;
  double mu = 0.0;  // LMS gain
  TubeParams tube;
  TerminalParams terminal;
  Vec z_s;  // design steady-state reference (nominal parameters)
  Vec v_s;
  double setpoint_inflation = 0.0;  // box inflation admitted for x_s_hat
};

}  // namespace aempc
