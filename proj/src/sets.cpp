#include "aempc/sets.hpp"

#include <cmath>

namespace aempc {

ConstraintSet box_constraints(const Box& X, const Box& U) {
  ConstraintSet Z;
  Z.box_x = X;
  Z.box_u = U;
  const int nx = X.dim(), nu = U.dim();
  for (int i = 0; i < nx; ++i) {
    for (int sgn : {+1, -1}) {
      const double bound = sgn > 0 ? X.upper(i) : -X.lower(i);
      Constraint c;
      c.value = [i, sgn, bound](const Vec& x, const Vec&) {
        return sgn * x(i) - bound;
      };
      c.grad_x = [i, sgn, nx](const Vec&, const Vec&) {
        Vec g = Vec::Zero(nx);
        g(i) = sgn;
        return g;
      };
      c.grad_u = [nu](const Vec&, const Vec&) { return Vec::Zero(nu); };
      Z.g.push_back(std::move(c));
    }
  }
  for (int i = 0; i < nu; ++i) {
    for (int sgn : {+1, -1}) {
      const double bound = sgn > 0 ? U.upper(i) : -U.lower(i);
      Constraint c;
      c.value = [i, sgn, bound](const Vec&, const Vec& u) {
        return sgn * u(i) - bound;
      };
      c.grad_x = [nx](const Vec&, const Vec&) { return Vec::Zero(nx); };
      c.grad_u = [i, sgn, nu](const Vec&, const Vec&) {
        Vec g = Vec::Zero(nu);
        g(i) = sgn;
        return g;
      };
      Z.g.push_back(std::move(c));
    }
  }
  return Z;
}

Vec project_box(const Vec& v, const Box& box) {
  if (v.size() != box.dim())
    throw ContractViolation("project_box: dimension mismatch");
  return v.cwiseMax(box.lower).cwiseMin(box.upper);
}

double diameter(const Box& box) { return (box.upper - box.lower).norm(); }

double ellipsoid_norm(const Mat& P, const Vec& v) {
  if (P.rows() != P.cols() || P.rows() != v.size())
    throw ContractViolation("ellipsoid_norm: dimension mismatch");
  if (!P.isApprox(P.transpose(), 1e-10))
    throw ContractViolation("ellipsoid_norm: P not symmetric");
  Eigen::LLT<Mat> llt(P);
  if (llt.info() != Eigen::Success)
    throw ContractViolation("ellipsoid_norm: P not positive definite");
  return std::sqrt(std::max(0.0, v.dot(P * v)));
}

namespace {

struct ActiveVertex {
  Vec theta;
  Vec d;
  double value;
};

ActiveVertex max_vertex(const ParametricModel& m, const Mat& P, const Vec& z,
                        const Box& Theta, const Box& D, const Vec& theta_bar) {
  const Vec u0 = Vec::Zero(m.n_u);
  const Mat G = m.G(z, u0);
  const Mat E = m.E(z, u0);
  ActiveVertex best{Theta.mid(), D.mid(), -1.0};
  const int total_dims = Theta.dim() + D.dim();
  auto consider = [&](const Vec& th, const Vec& d) {
    const Vec b = G * (th - theta_bar) + E * d;
    const double val = std::sqrt(std::max(0.0, b.dot(P * b)));
    if (val > best.value) best = ActiveVertex{th, d, val};
  };
  if (total_dims <= 12) {
    for (const Vec& th : Theta.vertices())
      for (const Vec& d : D.vertices()) consider(th, d);
  } else {
    // Vertex count is exponential; fall back to seeded random vertices.
    UniformSampler rng(0x5eedULL + static_cast<std::uint64_t>(total_dims));
    for (int k = 0; k < 4096; ++k) {
      Vec th(Theta.dim()), d(D.dim());
      for (int i = 0; i < Theta.dim(); ++i)
        th(i) = rng.next() < 0.5 ? Theta.lower(i) : Theta.upper(i);
      for (int i = 0; i < D.dim(); ++i)
        d(i) = rng.next() < 0.5 ? D.lower(i) : D.upper(i);
      consider(th, d);
    }
  }
  return best;
}

}  // namespace

double max_disturbance_norm(const ParametricModel& m, const Mat& P,
                            const Vec& z, const Box& Theta, const Box& D,
                            const Vec& theta_bar) {
  return max_vertex(m, P, z, Theta, D, theta_bar).value;
}

Vec max_disturbance_norm_grad(const ParametricModel& m, const Mat& P,
                              const Vec& z, const Box& Theta, const Box& D,
                              const Vec& theta_bar) {
  const ActiveVertex v = max_vertex(m, P, z, Theta, D, theta_bar);
  const Vec u0 = Vec::Zero(m.n_u);
  const Vec b = m.G(z, u0) * (v.theta - theta_bar) + m.E(z, u0) * v.d;
  const double nrm = std::sqrt(std::max(1e-300, b.dot(P * b)));
  // d/dz ||b(z)||_P = (db/dz)' P b / ||b||_P at the active vertex.
  Mat db_dz = Mat::Zero(m.n_x, m.n_x);
  const auto dG = m.dG_dx(z, u0);
  for (int i = 0; i < m.n_theta; ++i)
    db_dz += dG[i] * (v.theta(i) - theta_bar(i));
  if (m.dE_dx) {
    const auto dE = m.dE_dx(z, u0);
    for (int j = 0; j < m.n_d; ++j) db_dz += dE[j] * v.d(j);
  }
  return db_dz.transpose() * (P * b) / nrm;
}

}  // namespace aempc
