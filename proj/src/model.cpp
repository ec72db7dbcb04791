#include "aempc/model.hpp"

#include <cmath>

namespace aempc {

Vec eval_dynamics(const ParametricModel& m, const Vec& x, const Vec& u,
                  const Vec& theta, const Vec& d) {
  m.check_point(x, u, theta, d);
  return m.f0(x, u) + m.G(x, u) * theta + m.E(x, u) * d;
}

Vec eval_nominal(const ParametricModel& m, const Vec& x, const Vec& u,
                 const Vec& theta) {
  m.check_point(x, u, theta, Vec::Zero(m.n_d));
  return m.f0(x, u) + m.G(x, u) * theta;
}

Mat jacobian_x(const ParametricModel& m, const Vec& x, const Vec& u,
               const Vec& theta) {
  Mat A = m.df0_dx(x, u);
  const auto dG = m.dG_dx(x, u);
  for (int i = 0; i < m.n_theta; ++i) A += theta(i) * dG[i];
  return A;
}

Mat jacobian_u(const ParametricModel& m, const Vec& x, const Vec& u,
               const Vec& theta) {
  // G is input-independent in the supported design path (see offline design);
  // df/du therefore reduces to df0/du.
  return m.df0_du(x, u);
}

Mat jacobian_closed_loop(const ParametricModel& m, const Mat& K, const Vec& x,
                         const Vec& v_s, const Vec& z_s, const Vec& theta) {
  const Vec u = K * (x - z_s) + v_s;
  const Mat A = jacobian_x(m, x, u, theta);
  const Mat B = jacobian_u(m, x, u, theta);
  return A + B * K;
}

double hessian_bound(const ParametricModel& m, const Mat& K, const Box& Z_x,
                     const Box& Z_u, const Box& Theta,
                     const std::function<Vec(const Vec&)>& steady_for_input,
                     int grid_density) {
  if (m.hessian_bound_hint) return *m.hessian_bound_hint;
  const int pts = std::max(1, grid_density);
  const auto xs = Z_x.grid(pts);
  const auto vs = Z_u.grid(std::min(pts, 3));
  auto thetas = Theta.vertices();
  thetas.push_back(Theta.mid());

  double H = 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> eig;
  for (const Vec& v : vs) {
    const Vec z_s = steady_for_input(v);
    for (const Vec& x : xs) {
      for (const Vec& th : thetas) {
        // d^2 f_kappa / dx^2 component-wise, by central differences of A_K.
        std::vector<Mat> hess(m.n_x, Mat::Zero(m.n_x, m.n_x));
        Vec xp = x, xm = x;
        for (int j = 0; j < m.n_x; ++j) {
          const double h = 1e-5 * std::max(1.0, std::abs(x(j)));
          xp(j) = x(j) + h;
          xm(j) = x(j) - h;
          const Mat dA =
              (jacobian_closed_loop(m, K, xp, v, z_s, th) -
               jacobian_closed_loop(m, K, xm, v, z_s, th)) /
              (2.0 * h);
          for (int i = 0; i < m.n_x; ++i) hess[i].row(j) = dA.row(i);
          xp(j) = x(j);
          xm(j) = x(j);
        }
        for (int i = 0; i < m.n_x; ++i) {
          const Mat sym = 0.5 * (hess[i] + hess[i].transpose());
          eig.compute(sym, Eigen::EigenvaluesOnly);
          H = std::max(H, eig.eigenvalues().maxCoeff());
        }
      }
    }
  }
  return H;
}

namespace {

// Continuous-time CSTR pieces from the benchmark model; theta enters through
// the scaled regressor columns.
Vec cstr_f0c(const Vec& x, const Vec& u) {
  Vec f(3);
  f << 1.0 - x(0), -x(1), -x(2) + u(0);
  return f;
}

Mat cstr_Gc(const Vec& x, double delta, const Vec& scaling) {
  const double r1 = std::exp(-1.0 / x(2));
  const double r2 = std::exp(-delta / x(2));
  Mat G(3, 2);
  G << -x(0) * x(0) * r1 * scaling(0), -x(0) * r2 * scaling(1),
      x(0) * x(0) * r1 * scaling(0), 0.0,
      0.0, 0.0;
  return G;
}

std::vector<Mat> cstr_dGc_dx(const Vec& x, double delta, const Vec& scaling) {
  const double r1 = std::exp(-1.0 / x(2));
  const double r2 = std::exp(-delta / x(2));
  const double x3sq = x(2) * x(2);
  std::vector<Mat> d(2, Mat::Zero(3, 3));
  // column 1: scaling(0) * [-x1^2 r1; x1^2 r1; 0]
  d[0](0, 0) = -2.0 * x(0) * r1 * scaling(0);
  d[0](0, 2) = -x(0) * x(0) * r1 / x3sq * scaling(0);
  d[0](1, 0) = 2.0 * x(0) * r1 * scaling(0);
  d[0](1, 2) = x(0) * x(0) * r1 / x3sq * scaling(0);
  // column 2: scaling(1) * [-x1 r2; 0; 0]
  d[1](0, 0) = -r2 * scaling(1);
  d[1](0, 2) = -x(0) * r2 * delta / x3sq * scaling(1);
  return d;
}

}  // namespace

Vec CstrInstance::continuous_rhs(const Vec& x, const Vec& u,
                                 const Vec& theta) const {
  return cstr_f0c(x, u) + cstr_Gc(x, delta, scaling) * theta;
}

CstrInstance make_cstr() {
  CstrInstance c;
  c.theta_bar = Vec(2);
  c.theta_bar << 0.0995, 1.0050;
  c.scaling = Vec(2);
  c.scaling << 1e5, 400.0;

  const double Ts = c.Ts;
  const double delta = c.delta;
  const Vec scaling = c.scaling;

  ParametricModel m;
  m.n_x = 3;
  m.n_u = 1;
  m.n_theta = 2;
  m.n_d = 3;
  m.f0 = [Ts](const Vec& x, const Vec& u) -> Vec {
    return x + Ts * cstr_f0c(x, u);
  };
  m.G = [Ts, delta, scaling](const Vec& x, const Vec&) -> Mat {
    return Ts * cstr_Gc(x, delta, scaling);
  };
  m.E = [](const Vec&, const Vec&) -> Mat { return Mat::Identity(3, 3); };
  m.df0_dx = [Ts](const Vec&, const Vec&) -> Mat {
    Mat A = Mat::Identity(3, 3);
    A(0, 0) -= Ts;
    A(1, 1) -= Ts;
    A(2, 2) -= Ts;
    return A;
  };
  m.df0_du = [Ts](const Vec&, const Vec&) -> Mat {
    Mat B = Mat::Zero(3, 1);
    B(2, 0) = Ts;
    return B;
  };
  m.dG_dx = [Ts, delta, scaling](const Vec& x, const Vec&) -> std::vector<Mat> {
    auto d = cstr_dGc_dx(x, delta, scaling);
    for (auto& Mi : d) Mi *= Ts;
    return d;
  };
  m.dE_dx = [](const Vec&, const Vec&) -> std::vector<Mat> {
    return std::vector<Mat>(3, Mat::Zero(3, 3));
  };
  c.model = std::move(m);

  Vec xlo = Vec::Constant(3, 0.03), xhi = Vec::Constant(3, 0.25);
  c.state_box = Box(xlo, xhi);
  Vec ulo(1), uhi(1);
  ulo << 0.049;
  uhi << 0.449;
  c.input_box = Box(ulo, uhi);
  c.theta_box = Box(0.985 * c.theta_bar, 1.015 * c.theta_bar);
  c.disturbance_box =
      Box(Vec::Constant(3, -5e-4), Vec::Constant(3, 5e-4));

  c.cost.value = [](const Vec& x, const Vec&) -> double { return -x(1); };
  c.cost.grad_x = [](const Vec&, const Vec&) -> Vec {
    Vec g = Vec::Zero(3);
    g(1) = -1.0;
    return g;
  };
  c.cost.grad_u = [](const Vec&, const Vec&) -> Vec { return Vec::Zero(1); };
  c.cost.hess_xx = [](const Vec&, const Vec&) -> Mat { return Mat::Zero(3, 3); };

  c.x0_default = Vec(3);
  c.x0_default << 0.06, 0.16, 0.12;
  return c;
}

}  // namespace aempc
