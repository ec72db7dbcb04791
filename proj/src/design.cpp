#include "aempc/design.hpp"

#include "aempc/lms.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace aempc {

namespace {

std::vector<Mat> sym_basis(int n) {
  std::vector<Mat> basis;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      Mat E = Mat::Zero(n, n);
      E(i, j) = 1.0;
      E(j, i) = 1.0;
      basis.push_back(std::move(E));
    }
  return basis;
}

bool jacobians_input_independent(const ParametricModel& m, const Box& Z_x,
                                 const Box& Z_u, const Vec& theta) {
  const Vec x = Z_x.mid();
  const Mat A_lo = jacobian_x(m, x, Z_u.lower, theta);
  const Mat A_hi = jacobian_x(m, x, Z_u.upper, theta);
  const Mat B_lo = jacobian_u(m, x, Z_u.lower, theta);
  const Mat B_hi = jacobian_u(m, x, Z_u.upper, theta);
  const double scale = std::max(1.0, A_lo.cwiseAbs().maxCoeff());
  return (A_lo - A_hi).cwiseAbs().maxCoeff() < 1e-13 * scale &&
         (B_lo - B_hi).cwiseAbs().maxCoeff() < 1e-13 * scale;
}

/// Contraction LMI blocks (Lyapunov form in X = P^{-1}, Y = K X) on the grid.
std::vector<LmiBlock> contraction_blocks(const ParametricModel& m,
                                         const std::vector<Vec>& z_grid,
                                         const std::vector<Vec>& v_grid,
                                         const std::vector<Vec>& thetas,
                                         double rho,
                                         const std::vector<Mat>& Xb, int y_base) {
  const int n_x = m.n_x, n_u = m.n_u;
  std::vector<LmiBlock> blocks;
  blocks.reserve(z_grid.size() * v_grid.size() * thetas.size());
  for (const Vec& z : z_grid) {
    for (const Vec& v : v_grid) {
      for (const Vec& th : thetas) {
        const Mat A = jacobian_x(m, z, v, th);
        const Mat B = jacobian_u(m, z, v, th);
        LmiBlock blk;
        blk.constant = Mat::Zero(2 * n_x, 2 * n_x);
        for (std::size_t k = 0; k < Xb.size(); ++k) {
          Mat M = Mat::Zero(2 * n_x, 2 * n_x);
          const Mat AE = A * Xb[k];
          M.topLeftCorner(n_x, n_x) = rho * rho * Xb[k];
          M.topRightCorner(n_x, n_x) = AE.transpose();
          M.bottomLeftCorner(n_x, n_x) = AE;
          M.bottomRightCorner(n_x, n_x) = Xb[k];
          blk.coeffs.push_back({static_cast<int>(k), std::move(M)});
        }
        for (int r = 0; r < n_u; ++r) {
          for (int cidx = 0; cidx < n_x; ++cidx) {
            Mat El = Mat::Zero(n_u, n_x);
            El(r, cidx) = 1.0;
            const Mat BE = B * El;
            Mat M = Mat::Zero(2 * n_x, 2 * n_x);
            M.topRightCorner(n_x, n_x) = BE.transpose();
            M.bottomLeftCorner(n_x, n_x) = BE;
            blk.coeffs.push_back({y_base + r * n_x + cidx, std::move(M)});
          }
        }
        blocks.push_back(std::move(blk));
      }
    }
  }
  return blocks;
}

struct GradientPair {
  Vec gx;
  Vec gu;
};

/// Unique constraint gradients over the grid (a single entry for affine g).
std::vector<GradientPair> unique_gradients(const Constraint& g,
                                           const std::vector<Vec>& z_grid,
                                           const std::vector<Vec>& v_grid) {
  std::vector<GradientPair> out;
  for (const Vec& z : z_grid) {
    for (const Vec& v : v_grid) {
      GradientPair gp{g.grad_x(z, v), g.grad_u(z, v)};
      bool dup = false;
      for (const auto& q : out) {
        if ((q.gx - gp.gx).lpNorm<Eigen::Infinity>() < 1e-14 &&
            (q.gu - gp.gu).lpNorm<Eigen::Infinity>() < 1e-14) {
          dup = true;
          break;
        }
      }
      if (!dup) out.push_back(std::move(gp));
    }
  }
  return out;
}

LmiBlock tightening_block(const GradientPair& gp, int gamma_var,
                          const std::vector<Mat>& Xb, int y_base, int n_x,
                          int n_u) {
  LmiBlock blk;
  blk.constant = Mat::Zero(1 + n_x, 1 + n_x);
  Mat Mg = Mat::Zero(1 + n_x, 1 + n_x);
  Mg(0, 0) = 1.0;
  blk.coeffs.push_back({gamma_var, std::move(Mg)});
  for (std::size_t k = 0; k < Xb.size(); ++k) {
    const Vec row = Xb[k] * gp.gx;  // (g_x' X)' restricted to basis element
    Mat M = Mat::Zero(1 + n_x, 1 + n_x);
    M.block(0, 1, 1, n_x) = row.transpose();
    M.block(1, 0, n_x, 1) = row;
    M.block(1, 1, n_x, n_x) = Xb[k];
    blk.coeffs.push_back({static_cast<int>(k), std::move(M)});
  }
  for (int r = 0; r < n_u; ++r) {
    for (int cidx = 0; cidx < n_x; ++cidx) {
      // (g_u' Y) with Y basis element E_{r,c} contributes g_u(r) at column c.
      Mat M = Mat::Zero(1 + n_x, 1 + n_x);
      M(0, 1 + cidx) = gp.gu(r);
      M(1 + cidx, 0) = gp.gu(r);
      blk.coeffs.push_back({y_base + r * n_x + cidx, std::move(M)});
    }
  }
  return blk;
}

Mat sym_from_vars(const Vec& y, const std::vector<Mat>& Xb, int offset, int n) {
  Mat X = Mat::Zero(n, n);
  for (std::size_t k = 0; k < Xb.size(); ++k) X += y(offset + k) * Xb[k];
  return X;
}

double exact_tightening(const GradientPair& gp, const Mat& X, const Mat& K) {
  const Vec dir = gp.gx + K.transpose() * gp.gu;
  return std::sqrt(std::max(0.0, dir.dot(X * dir)));
}

Mat sqrt_spd(const Mat& P) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(P);
  return eig.operatorSqrt();
}

}  // namespace

double compute_Lw(const ParametricModel& m, const Mat& P, const Box& Z_x,
                  const Box& Theta, const Vec& theta_bar, int grid_density) {
  const Mat S = sqrt_spd(P);
  const Mat S_inv = S.inverse();
  const Vec u0 = Z_x.mid();  // G is input-independent in the design path
  double L = 0.0;
  for (const Vec& z : Z_x.grid(std::max(2, grid_density))) {
    const auto dG = m.dG_dx(z, Vec::Zero(m.n_u));
    for (const Vec& th : Theta.vertices()) {
      Mat Gx = Mat::Zero(m.n_x, m.n_x);
      for (int i = 0; i < m.n_theta; ++i) Gx += dG[i] * (th(i) - theta_bar(i));
      L = std::max(L, (S * Gx * S_inv).operatorNorm());
    }
  }
  (void)u0;
  return L;
}

TubeParams design_tube(const ParametricModel& m, const ConstraintSet& Z,
                       const Box& Theta, const Box& D, const Vec& theta_bar,
                       const Vec& z_s, const Vec& v_s, const DesignOptions& opts,
                       TubeDesignDiagnostics* diag) {
  const int n_x = m.n_x, n_u = m.n_u, n_c = Z.n_c();
  Vec margin(n_c);
  for (int i = 0; i < n_c; ++i) {
    margin(i) = -Z.g[i].value(z_s, v_s);
    if (margin(i) <= 0.0)
      throw ContractViolation(
          "design_tube: reference steady state violates constraint " +
          std::to_string(i));
  }

  const auto Xb = sym_basis(n_x);
  const int n_sx = static_cast<int>(Xb.size());
  const int y_base = n_sx;
  const int gamma_base = n_sx + n_u * n_x;
  const int n_vars = gamma_base + n_c;

  const bool input_indep = jacobians_input_independent(m, Z.box_x, Z.box_u, theta_bar);
  const auto z_grid = Z.box_x.grid(opts.grid.state_pts);
  const std::vector<Vec> v_grid =
      input_indep ? std::vector<Vec>{Z.box_u.mid()} : Z.box_u.grid(opts.grid.input_pts);
  const auto theta_vs = Theta.vertices();

  std::vector<std::vector<GradientPair>> grads(n_c);
  for (int i = 0; i < n_c; ++i) grads[i] = unique_gradients(Z.g[i], z_grid, v_grid);

  Vec objective = Vec::Zero(n_vars);
  for (int i = 0; i < n_c; ++i)
    objective(gamma_base + i) = 1.0 / (margin(i) * margin(i));

  TubeDesignDiagnostics local_diag;
  TubeDesignDiagnostics& dg = diag ? *diag : local_diag;

  TubeParams best;
  double best_objective = std::numeric_limits<double>::infinity();
  int best_index = -1;

  for (double rho : opts.rho_scan) {
    TubeScanEntry entry;
    entry.rho = rho;
    entry.objective = std::numeric_limits<double>::infinity();

    SdpProblem prob;
    prob.num_vars = n_vars;
    prob.objective = objective;
    prob.blocks = contraction_blocks(m, z_grid, v_grid, theta_vs, rho, Xb, y_base);
    {
      LmiBlock xi;  // X >= I fixes the free scaling of the Lyapunov variables
      xi.constant = -Mat::Identity(n_x, n_x);
      for (int k = 0; k < n_sx; ++k) xi.coeffs.push_back({k, Xb[k]});
      prob.blocks.push_back(std::move(xi));
    }
    for (int i = 0; i < n_c; ++i)
      for (const auto& gp : grads[i])
        prob.blocks.push_back(
            tightening_block(gp, gamma_base + i, Xb, y_base, n_x, n_u));

    if (const char* dump = std::getenv("AEMPC_DUMP_SDP")) {
      std::ofstream out(std::string(dump) + "_rho" + std::to_string(rho) + ".json");
      out << sdp_to_json(prob) << '\n';
    }
    const SdpResult sol = sdp_solve(prob, opts.sdp);
    if (!sol.ok()) {
      entry.note = "SDP " + std::string(sol.status == SdpStatus::infeasible
                                            ? "infeasible"
                                            : "not solved") +
                   (sol.message.empty() ? "" : ": " + sol.message);
      dg.scan.push_back(entry);
      continue;
    }
    entry.sdp_feasible = true;

    const Mat X = sym_from_vars(sol.y, Xb, 0, n_x);
    Mat Y(n_u, n_x);
    for (int r = 0; r < n_u; ++r)
      for (int cidx = 0; cidx < n_x; ++cidx) Y(r, cidx) = sol.y(y_base + r * n_x + cidx);
    Eigen::LLT<Mat> llt(X);
    if (llt.info() != Eigen::Success) {
      entry.note = "solved X not positive definite";
      dg.scan.push_back(entry);
      continue;
    }
    Mat P = llt.solve(Mat::Identity(n_x, n_x));
    P = 0.5 * (P + P.transpose());
    const Mat K = Y * P;

    entry.L_w = compute_Lw(m, P, Z.box_x, Theta, theta_bar, opts.grid.state_pts);
    if (rho + entry.L_w >= 1.0) {
      entry.note = "rho + L_w >= 1";
      dg.scan.push_back(entry);
      continue;
    }
    entry.contraction_budget_ok = true;

    double w_bar = 0.0;
    for (const Vec& z : z_grid)
      w_bar = std::max(w_bar, max_disturbance_norm(m, P, z, Theta, D, theta_bar));
    entry.w_bar = w_bar;

    const double s_max = w_bar / (1.0 - rho - entry.L_w);
    Vec c(n_c);
    bool steady_ok = true;
    for (int i = 0; i < n_c; ++i) {
      double ci = 0.0;
      for (const auto& gp : grads[i]) ci = std::max(ci, exact_tightening(gp, X, K));
      c(i) = ci;
      if (ci * s_max > margin(i)) steady_ok = false;
    }
    if (!steady_ok) {
      std::ostringstream oss;
      oss << "steady-state tube exceeds a constraint margin [";
      for (int i = 0; i < n_c; ++i)
        oss << (i ? " " : "") << c(i) * s_max / margin(i);
      oss << "]";
      entry.note = oss.str();
      dg.scan.push_back(entry);
      continue;
    }
    entry.steady_tube_ok = true;

    double obj = 0.0;
    for (int i = 0; i < n_c; ++i) {
      const double term = c(i) * s_max / margin(i);
      obj += term * term;
    }
    entry.objective = obj;
    dg.scan.push_back(entry);

    if (obj < best_objective) {
      best_objective = obj;
      best_index = static_cast<int>(dg.scan.size()) - 1;
      best.P = P;
      best.K = K;
      best.rho = rho;
      best.L_w = entry.L_w;
      best.w_bar = w_bar;
      best.c = c;
      best.s_max = s_max;
    }
  }

  dg.selected = best_index;
  if (best_index < 0) {
    std::ostringstream oss;
    oss << "design_tube: no feasible contraction rate; scan:";
    for (const auto& e : dg.scan)
      oss << " [rho=" << e.rho << ": " << (e.note.empty() ? "rejected" : e.note)
          << "]";
    throw DesignError(oss.str());
  }
  return best;
}

TerminalParams design_terminal(const ParametricModel& m, const StageCost& cost,
                               const TubeParams& tube, const ConstraintSet& Z,
                               const Box& Theta, const Vec& theta_bar,
                               const Vec& v_s_ref, double setpoint_inflation,
                               const DesignOptions& opts) {
  const int n_x = m.n_x;
  SteadyStateSolver ss(m, theta_bar, tube.K, Z.box_x.mid());

  TerminalParams tp;
  tp.H = hessian_bound(
      m, tube.K, Z.box_x, Z.box_u, Theta,
      [&](const Vec& v) { return ss.nominal(v); }, opts.grid.state_pts);

  const Box infl_box(Z.box_x.lower.array() - setpoint_inflation,
                     Z.box_x.upper.array() + setpoint_inflation);
  auto thetas = Theta.vertices();
  thetas.push_back(Theta.mid());

  tp.p_max = 0.0;
  for (const Vec& v : Z.box_u.grid(opts.grid.input_pts)) {
    try {
      const Vec z_s = ss.nominal(v);
      for (const Vec& th : thetas) {
        const Vec x_s = ss.parametric(v, th);
        if (!infl_box.contains(x_s)) continue;
        const Vec p = p_vector(m, cost, tube.K, x_s, v, z_s, th);
        tp.p_max = std::max(tp.p_max, p.norm());
      }
    } catch (const NumericalError&) {
      continue;  // no admissible equilibrium at this input sample
    }
  }
  tp.alpha = std::sqrt(static_cast<double>(n_x)) * 0.5 * tp.H * tp.p_max;

  // Scalar envelope of the shifted-cost Hessian.
  double lam_bar = -std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Mat> eig;
  for (const Vec& v : Z.box_u.grid(std::min(3, opts.grid.input_pts))) {
    bool have_ss = true;
    try {
      ss.nominal(v);
    } catch (const NumericalError&) {
      have_ss = false;
    }
    if (!have_ss) continue;
    for (const Vec& th : thetas) {
      for (const Vec& x : Z.box_x.grid(std::min(4, opts.grid.state_pts))) {
        const Mat Hxx = fd::jacobian(
            [&](const Vec& xx) { return shifted_cost_grad_x(ss, cost, xx, v, th); },
            x);
        eig.compute(0.5 * (Hxx + Hxx.transpose()), Eigen::EigenvaluesOnly);
        lam_bar = std::max(lam_bar, eig.eigenvalues().maxCoeff());
      }
    }
  }
  if (!std::isfinite(lam_bar)) lam_bar = 0.0;
  const double q_scalar = std::max(lam_bar + tp.alpha, 0.0);
  tp.Q = q_scalar * Mat::Identity(n_x, n_x);

  // Lyapunov SDP for P_f on the design grid.
  const bool input_indep = jacobians_input_independent(m, Z.box_x, Z.box_u, theta_bar);
  const std::vector<Vec> v_grid =
      input_indep ? std::vector<Vec>{v_s_ref}
                  : Z.box_u.grid(std::min(3, opts.grid.input_pts));
  const auto Xb = sym_basis(n_x);
  SdpProblem prob;
  prob.num_vars = static_cast<int>(Xb.size());
  prob.objective = Vec::Zero(prob.num_vars);
  {
    int k = 0;
    for (int i = 0; i < n_x; ++i)
      for (int j = i; j < n_x; ++j, ++k)
        if (i == j) prob.objective(k) = 1.0;  // tr(P_f)
  }
  double worst_radius = 0.0;
  Vec worst_point;
  for (const Vec& v : v_grid) {
    Vec z_s;
    try {
      z_s = ss.nominal(v);
    } catch (const NumericalError&) {
      continue;
    }
    for (const Vec& x : Z.box_x.grid(opts.grid.state_pts)) {
      for (const Vec& th : thetas) {
        const Mat A_K = jacobian_closed_loop(m, tube.K, x, v, z_s, th);
        const double radius = A_K.eigenvalues().cwiseAbs().maxCoeff();
        if (radius > worst_radius) {
          worst_radius = radius;
          worst_point = x;
        }
        LmiBlock blk;
        blk.constant = -tp.Q;
        for (std::size_t k = 0; k < Xb.size(); ++k) {
          Mat M = Xb[k] - A_K.transpose() * Xb[k] * A_K;
          blk.coeffs.push_back({static_cast<int>(k), std::move(M)});
        }
        prob.blocks.push_back(std::move(blk));
      }
    }
  }
  {
    LmiBlock floor;  // P_f strictly positive definite
    floor.constant = -1e-8 * std::max(1.0, q_scalar) * Mat::Identity(n_x, n_x);
    for (std::size_t k = 0; k < Xb.size(); ++k)
      floor.coeffs.push_back({static_cast<int>(k), Xb[k]});
    prob.blocks.push_back(std::move(floor));
  }

  const SdpResult sol = sdp_solve(prob, opts.sdp);
  if (!sol.ok()) {
    std::ostringstream oss;
    oss << "design_terminal: Lyapunov SDP " << sol.message
        << "; largest closed-loop spectral radius " << worst_radius
        << " at grid point";
    if (worst_point.size() > 0)
      for (int i = 0; i < worst_point.size(); ++i) oss << ' ' << worst_point(i);
    throw DesignError(oss.str());
  }
  tp.P_f = sym_from_vars(sol.y, Xb, 0, n_x);
  return tp;
}

DecreaseReport verify_terminal_decrease(const ParametricModel& m,
                                        const StageCost& cost,
                                        const TerminalParams& terminal,
                                        const TubeParams& tube,
                                        const ConstraintSet& Z, const Box& Theta,
                                        const Vec& theta_bar,
                                        double setpoint_inflation,
                                        int sample_count, std::uint64_t seed) {
  SteadyStateSolver ss(m, theta_bar, tube.K, Z.box_x.mid());
  const Box infl_box(Z.box_x.lower.array() - setpoint_inflation,
                     Z.box_x.upper.array() + setpoint_inflation);
  UniformSampler rng(seed);
  DecreaseReport rep;
  rep.worst_margin = -std::numeric_limits<double>::infinity();
  while (rep.samples < sample_count) {
    const Vec x = rng.box_sample(Z.box_x);
    const Vec v = rng.box_sample(Z.box_u);
    const Vec th = rng.box_sample(Theta);
    Vec z_s, x_s;
    try {
      z_s = ss.nominal(v);
      x_s = ss.parametric(v, th);
    } catch (const NumericalError&) {
      ++rep.skipped;
      ++rep.samples;
      continue;
    }
    if (!infl_box.contains(x_s)) {
      ++rep.skipped;
      ++rep.samples;
      continue;
    }
    Vec p;
    try {
      p = p_vector(m, cost, tube.K, x_s, v, z_s, th);
    } catch (const NumericalError&) {
      ++rep.skipped;
      ++rep.samples;
      continue;
    }
    const Vec u = feedback_kappa(tube.K, x, z_s, v);
    const Vec x_plus = eval_nominal(m, x, u, th);
    const double lhs = eval_terminal_cost(terminal.P_f, p, x_plus, x_s) -
                       eval_terminal_cost(terminal.P_f, p, x, x_s);
    const double rhs = -cost.value(x, u) + steady_cost(ss, cost, v, th);
    const double excess = lhs - rhs;  // must stay <= tolerance
    rep.worst_margin = std::max(rep.worst_margin, excess);
    if (excess > 1e-8) ++rep.violations;
    ++rep.samples;
  }
  return rep;
}

ContainmentReport verify_tube_containment(const ParametricModel& m,
                                          const TubeParams& tube,
                                          const ConstraintSet& Z,
                                          const Box& Theta, const Box& D,
                                          const Vec& theta_bar, int sample_count,
                                          std::uint64_t seed) {
  UniformSampler rng(seed);
  ContainmentReport rep;
  rep.worst_margin = -std::numeric_limits<double>::infinity();
  const Mat L = Eigen::LLT<Mat>(tube.P).matrixL();
  const Mat L_invT = L.transpose().triangularView<Eigen::Upper>().solve(
      Mat::Identity(m.n_x, m.n_x));
  long attempts = 0;
  const long max_attempts = 200L * sample_count + 1000;
  while (rep.samples < sample_count && attempts < max_attempts) {
    ++attempts;
    const Vec z = rng.box_sample(Z.box_x);
    const Vec v = rng.box_sample(Z.box_u);
    if (!Z.member(z, v)) continue;
    const double s = rng.next() * tube.s_max;
    // Uniform point of the unit ball by rejection, mapped into the ellipsoid.
    Vec y(m.n_x);
    do {
      for (int i = 0; i < m.n_x; ++i) y(i) = rng.next(-1.0, 1.0);
    } while (y.squaredNorm() > 1.0);
    const Vec x = z + s * (L_invT * y);
    const Vec u = feedback_kappa(tube.K, x, z, v);
    if (!Z.member(x, u)) continue;  // Assumption hypotheses require (x,u) in Z
    const Vec th = rng.box_sample(Theta);
    const Vec d = rng.box_sample(D);
    const Vec x_plus = eval_dynamics(m, x, u, th, d);
    const Vec z_plus = eval_nominal(m, z, v, theta_bar);
    const double s_plus = propagate_size(tube, m, z, v, s, Theta, D, theta_bar);
    const double margin = ellipsoid_norm(tube.P, x_plus - z_plus) - s_plus;
    rep.worst_margin = std::max(rep.worst_margin, margin);
    if (margin > 1e-9) ++rep.escapes;
    ++rep.samples;
  }
  return rep;
}

LmiReport verify_tube_lmis(const ParametricModel& m, const ConstraintSet& Z,
                           const Box& Theta, const TubeParams& tube,
                           const GridSpec& grid) {
  const int n_x = m.n_x, n_u = m.n_u;
  const auto Xb = sym_basis(n_x);
  const int n_sx = static_cast<int>(Xb.size());
  const int y_base = n_sx;
  const int gamma_base = n_sx + n_u * n_x;
  const int n_c = Z.n_c();

  const bool input_indep = jacobians_input_independent(m, Z.box_x, Z.box_u,
                                                       (Vec)Theta.mid());
  const auto z_grid = Z.box_x.grid(grid.state_pts);
  const std::vector<Vec> v_grid =
      input_indep ? std::vector<Vec>{Z.box_u.mid()} : Z.box_u.grid(grid.input_pts);

  std::vector<LmiBlock> blocks = contraction_blocks(
      m, z_grid, v_grid, Theta.vertices(), tube.rho, Xb, y_base);
  for (int i = 0; i < n_c; ++i)
    for (const auto& gp : unique_gradients(Z.g[i], z_grid, v_grid))
      blocks.push_back(tightening_block(gp, gamma_base + i, Xb, y_base, n_x, n_u));

  const Mat X = Eigen::LLT<Mat>(tube.P).solve(Mat::Identity(n_x, n_x));
  const Mat Y = tube.K * X;
  Vec y(gamma_base + n_c);
  {
    int k = 0;
    for (int i = 0; i < n_x; ++i)
      for (int j = i; j < n_x; ++j, ++k) y(k) = 0.5 * (X(i, j) + X(j, i));
    for (int r = 0; r < n_u; ++r)
      for (int cidx = 0; cidx < n_x; ++cidx) y(y_base + r * n_x + cidx) = Y(r, cidx);
    for (int i = 0; i < n_c; ++i) y(gamma_base + i) = tube.c(i) * tube.c(i);
  }
  return verify_lmi(blocks, y, 0.0);
}

LmiReport verify_terminal_lmis(const ParametricModel& m, const TubeParams& tube,
                               const TerminalParams& terminal,
                               const ConstraintSet& Z, const Box& Theta,
                               const Vec& theta_bar, const Vec& v_s_ref,
                               const GridSpec& grid) {
  const int n_x = m.n_x;
  SteadyStateSolver ss(m, theta_bar, tube.K, Z.box_x.mid());
  const bool input_indep =
      jacobians_input_independent(m, Z.box_x, Z.box_u, theta_bar);
  const std::vector<Vec> v_grid =
      input_indep ? std::vector<Vec>{v_s_ref}
                  : Z.box_u.grid(std::min(3, grid.input_pts));
  auto thetas = Theta.vertices();
  thetas.push_back(Theta.mid());
  const auto Xb = sym_basis(n_x);
  std::vector<LmiBlock> blocks;
  for (const Vec& v : v_grid) {
    Vec z_s;
    try {
      z_s = ss.nominal(v);
    } catch (const NumericalError&) {
      continue;
    }
    for (const Vec& x : Z.box_x.grid(grid.state_pts)) {
      for (const Vec& th : thetas) {
        const Mat A_K = jacobian_closed_loop(m, tube.K, x, v, z_s, th);
        LmiBlock blk;
        blk.constant = -terminal.Q;
        for (std::size_t k = 0; k < Xb.size(); ++k)
          blk.coeffs.push_back(
              {static_cast<int>(k), Xb[k] - A_K.transpose() * Xb[k] * A_K});
        blocks.push_back(std::move(blk));
      }
    }
  }
  Vec y(static_cast<int>(Xb.size()));
  {
    int k = 0;
    for (int i = 0; i < n_x; ++i)
      for (int j = i; j < n_x; ++j, ++k)
        y(k) = 0.5 * (terminal.P_f(i, j) + terminal.P_f(j, i));
  }
  return verify_lmi(blocks, y, 0.0);
}

DesignArtifacts design_all(const ParametricModel& m, const StageCost& cost,
                           const ConstraintSet& Z, const Box& Theta,
                           const Box& D, const Vec& theta_bar, const Vec& v_s_ref,
                           const DesignOptions& opts,
                           TubeDesignDiagnostics* diag) {
  DesignArtifacts art;
  art.theta_bar = theta_bar;
  art.mu = compute_gain(m, Z, opts.grid.state_pts);
  art.v_s = v_s_ref;

  DesignOptions stage_opts = opts;
  std::string failure;
  for (int attempt = 0; attempt < 2; ++attempt) {
    SteadyStateSolver ss0(m, theta_bar, Mat::Zero(m.n_u, m.n_x), Z.box_x.mid());
    art.z_s = ss0.nominal(v_s_ref);

    art.tube = design_tube(m, Z, Theta, D, theta_bar, art.z_s, v_s_ref,
                           stage_opts, diag);

    // Inflation margin admitted for the artificial setpoint: sampled Lipschitz
    // constant of h times the largest parameter deviation from theta_bar.
    SteadyStateSolver ss(m, theta_bar, art.tube.K, Z.box_x.mid());
    double L_h_hat = 0.0;
    double max_dev = 0.0;
    for (const Vec& th : Theta.vertices())
      max_dev = std::max(max_dev, (th - theta_bar).norm());
    for (const Vec& v : Z.box_u.grid(stage_opts.grid.input_pts)) {
      try {
        const Vec z0 = ss.parametric(v, theta_bar);
        for (const Vec& th : Theta.vertices()) {
          const double dist = (th - theta_bar).norm();
          if (dist <= 0.0) continue;
          L_h_hat = std::max(L_h_hat, (ss.parametric(v, th) - z0).norm() / dist);
        }
      } catch (const NumericalError&) {
        continue;
      }
    }
    art.setpoint_inflation = 1.05 * L_h_hat * max_dev;

    art.terminal = design_terminal(m, cost, art.tube, Z, Theta, theta_bar,
                                   v_s_ref, art.setpoint_inflation, stage_opts);

    // Fine-grid re-verification (one automatic grid doubling on failure).
    const GridSpec fine = stage_opts.grid.refined(2);
    const LmiReport tube_rep = verify_tube_lmis(m, Z, Theta, art.tube, fine);
    const LmiReport term_rep = verify_terminal_lmis(m, art.tube, art.terminal, Z,
                                                    Theta, theta_bar, v_s_ref, fine);
    const double L_w_fine =
        compute_Lw(m, art.tube.P, Z.box_x, Theta, theta_bar, fine.state_pts);
    double w_bar_fine = art.tube.w_bar;
    for (const Vec& z : Z.box_x.grid(fine.state_pts))
      w_bar_fine = std::max(
          w_bar_fine, max_disturbance_norm(m, art.tube.P, z, Theta, D, theta_bar));

    bool ok = tube_rep.ok(opts.lmi_tol) && term_rep.ok(opts.lmi_tol) &&
              art.tube.rho + L_w_fine < 1.0;
    if (ok) {
      art.tube.L_w = std::max(art.tube.L_w, L_w_fine);
      art.tube.w_bar = w_bar_fine;
      art.tube.s_max = art.tube.w_bar / (1.0 - art.tube.rho - art.tube.L_w);
      for (int i = 0; i < Z.n_c(); ++i) {
        if (art.tube.c(i) * art.tube.s_max > -Z.g[i].value(art.z_s, v_s_ref)) {
          ok = false;
          failure = "steady-state tightening check failed on the fine grid";
          break;
        }
      }
      if (ok) return art;
    } else {
      failure = !tube_rep.ok(opts.lmi_tol)
                    ? "tube LMIs violated on the fine grid"
                    : (!term_rep.ok(opts.lmi_tol)
                           ? "terminal LMIs violated on the fine grid"
                           : "rho + L_w >= 1 on the fine grid");
    }
    stage_opts.grid = stage_opts.grid.refined(2);
  }
  throw DesignError("design_all: verification failed after grid doubling (" +
                    failure + ")");
}

}  // namespace aempc
