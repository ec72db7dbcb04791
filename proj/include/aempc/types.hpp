#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace aempc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Thrown when a caller violates a documented precondition.
struct ContractViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical routine fails to converge or breaks down.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Axis-aligned box {x : lower <= x <= upper}, componentwise.
struct Box {
  Vec lower;
  Vec upper;

  Box() = default;
  Box(Vec lo, Vec up) : lower(std::move(lo)), upper(std::move(up)) {
    if (lower.size() != upper.size())
      throw ContractViolation("Box: bound dimensions differ");
    if (((upper - lower).array() < 0.0).any())
      throw ContractViolation("Box: lower exceeds upper");
  }

  int dim() const { return static_cast<int>(lower.size()); }

  Vec mid() const { return 0.5 * (lower + upper); }
  Vec width() const { return upper - lower; }

  bool contains(const Vec& x, double tol = 0.0) const {
    return (x.array() >= lower.array() - tol).all() &&
           (x.array() <= upper.array() + tol).all();
  }

  /// All 2^dim corner points, in lexicographic bit order.
  std::vector<Vec> vertices() const {
    const int n = dim();
    std::vector<Vec> out;
    out.reserve(std::size_t{1} << n);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
      Vec v(n);
      for (int i = 0; i < n; ++i) v(i) = (mask >> i) & 1 ? upper(i) : lower(i);
      out.push_back(std::move(v));
    }
    return out;
  }

  /// Uniform grid with `pts` points per dimension (pts >= 1; pts == 1 gives the
  /// midpoint). Returned in row-major scan order.
  std::vector<Vec> grid(int pts) const {
    const int n = dim();
    if (pts < 1) throw ContractViolation("Box::grid: pts must be >= 1");
    std::vector<Vec> out;
    std::size_t total = 1;
    for (int i = 0; i < n; ++i) total *= static_cast<std::size_t>(pts);
    out.reserve(total);
    std::vector<int> idx(n, 0);
    for (std::size_t c = 0; c < total; ++c) {
      Vec v(n);
      for (int i = 0; i < n; ++i) {
        v(i) = pts == 1 ? 0.5 * (lower(i) + upper(i))
                        : lower(i) + (upper(i) - lower(i)) * idx[i] / (pts - 1);
      }
      out.push_back(std::move(v));
      for (int i = 0; i < n; ++i) {
        if (++idx[i] < pts) break;
        idx[i] = 0;
      }
    }
    return out;
  }
};

using ParameterBox = Box;
using DisturbanceBox = Box;

/// Grid densities used when discretizing semi-infinite conditions.
struct GridSpec {
  int state_pts = 6;
  int input_pts = 6;
  int theta_pts = 3;  // per-dimension samples of Theta where affinity does not hold
  GridSpec refined(int factor = 2) const {
    return GridSpec{state_pts * factor, input_pts * factor, theta_pts * factor};
  }
};

/// Deterministic uniform sampler (bit-stable across platforms).
class UniformSampler {
 public:
  explicit UniformSampler(std::uint64_t seed) : state_(seed) {}

  /// Uniform double in [0, 1).
  double next() {
    // splitmix64; mapped to [0,1) with 53 bits.
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z = z ^ (z >> 31);
    return static_cast<double>(z >> 11) * 0x1.0p-53;
  }

  double next(double lo, double hi) { return lo + (hi - lo) * next(); }

  Vec box_sample(const Box& b) {
    Vec v(b.dim());
    for (int i = 0; i < b.dim(); ++i) v(i) = next(b.lower(i), b.upper(i));
    return v;
  }

 private:
  std::uint64_t state_;
};

namespace fd {

/// Central finite-difference Jacobian of f: R^n -> R^m.
inline Mat jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x,
                    double rel_step = 1e-6) {
  const Vec f0 = f(x);
  Mat J(f0.size(), x.size());
  Vec xp = x, xm = x;
  for (int j = 0; j < x.size(); ++j) {
    const double h = rel_step * std::max(1.0, std::abs(x(j)));
    xp(j) = x(j) + h;
    xm(j) = x(j) - h;
    J.col(j) = (f(xp) - f(xm)) / (2.0 * h);
    xp(j) = x(j);
    xm(j) = x(j);
  }
  return J;
}

/// Central finite-difference gradient of a scalar function.
inline Vec gradient(const std::function<double(const Vec&)>& f, const Vec& x,
                    double rel_step = 1e-7) {
  Vec g(x.size());
  Vec xp = x, xm = x;
  for (int j = 0; j < x.size(); ++j) {
    const double h = rel_step * std::max(1.0, std::abs(x(j)));
    xp(j) = x(j) + h;
    xm(j) = x(j) - h;
    g(j) = (f(xp) - f(xm)) / (2.0 * h);
    xp(j) = x(j);
    xm(j) = x(j);
  }
  return g;
}

}  // namespace fd

}  // namespace aempc
