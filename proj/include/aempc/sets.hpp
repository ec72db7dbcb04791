#pragma once

#include "aempc/model.hpp"
#include "aempc/types.hpp"

namespace aempc {

/// One smooth scalar constraint g(x,u) <= 0 with gradients.
struct Constraint {
  std::function<double(const Vec&, const Vec&)> value;
  std::function<Vec(const Vec&, const Vec&)> grad_x;
  std::function<Vec(const Vec&, const Vec&)> grad_u;
};

/// Constraint set Z = {(x,u) : g_i(x,u) <= 0} together with the convex
/// projections Z_x, Z_u used by the offline design.
struct ConstraintSet {
  std::vector<Constraint> g;
  Box box_x;
  Box box_u;

  int n_c() const { return static_cast<int>(g.size()); }

  bool member(const Vec& x, const Vec& u, double tol = 0.0) const {
    for (const auto& gi : g)
      if (gi.value(x, u) > tol) return false;
    return true;
  }
};

/// Constraint set consisting exactly of the faces of two boxes.
ConstraintSet box_constraints(const Box& X, const Box& U);

/// Euclidean projection onto an axis-aligned box (componentwise clamp).
Vec project_box(const Vec& v, const Box& box);

/// c_theta: the largest distance between two points of the box, i.e. the
/// Euclidean norm of its diagonal.
double diameter(const Box& box);

/// sqrt(v' P v) for symmetric positive definite P.
double ellipsoid_norm(const Mat& P, const Vec& v);

/// max over theta in Theta, d in D of || G(z)(theta - theta_bar) + E(z) d ||_P.
/// The objective is a norm of a map affine in (theta, d), so the maximum over
/// the box product is attained at vertices; enumerated exactly up to 12 total
/// box dimensions, randomly sampled above that (documented suboptimality).
double max_disturbance_norm(const ParametricModel& m, const Mat& P,
                            const Vec& z, const Box& Theta, const Box& D,
                            const Vec& theta_bar);

/// Gradient of max_disturbance_norm with respect to z, at the active vertex.
Vec max_disturbance_norm_grad(const ParametricModel& m, const Mat& P,
                              const Vec& z, const Box& Theta, const Box& D,
                              const Vec& theta_bar);

}  // namespace aempc
