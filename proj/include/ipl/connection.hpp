#pragma once

// ConnectionSource: an su(2) connection on T x (annulus) in the coordinate
// coframe (dr, dtheta, dx, dy), with optional exact first derivatives.

#include "ipl/geometry.hpp"

#include <array>
#include <functional>
#include <limits>
#include <memory>
#include <string>

namespace ipl {

enum Coord : int { kR = 0, kTheta = 1, kX = 2, kY = 3 };

/// a[mu] is the coefficient of the coframe element mu.
struct Components {
  std::array<Mat2, 4> a{Mat2::Zero(), Mat2::Zero(), Mat2::Zero(), Mat2::Zero()};

  Mat2& operator[](int i) { return a[i]; }
  const Mat2& operator[](int i) const { return a[i]; }

  Components& operator+=(const Components& o) {
    for (int i = 0; i < 4; ++i) a[i] += o.a[i];
    return *this;
  }
  friend Components operator+(Components l, const Components& r) { return l += r; }
  friend Components operator*(double s, Components c) {
    for (auto& m : c.a) m *= s;
    return c;
  }

  /// Contraction with a coordinate vector v^mu.
  Mat2 contract(const std::array<double, 4>& v) const {
    return v[0] * a[0] + v[1] * a[1] + v[2] * a[2] + v[3] * a[3];
  }
};

/// Value and first partials: d[mu][nu] = d_mu a_nu.
struct Jet {
  Components value;
  std::array<Components, 4> d;

  Jet& operator+=(const Jet& o) {
    value += o.value;
    for (int i = 0; i < 4; ++i) d[i] += o.d[i];
    return *this;
  }
};

struct RadialDomain {
  double r_min = 0.0;
  double r_max = std::numeric_limits<double>::infinity();
  bool min_exclusive = false;

  bool contains(double r) const {
    if (!std::isfinite(r)) return false;
    const bool lo = min_exclusive ? r > r_min : r >= r_min;
    return lo && r <= r_max;
  }
};

class ConnectionSource {
 public:
  using EvalFn = std::function<Components(const Point&)>;
  using JetFn = std::function<Jet(const Point&)>;

  ConnectionSource() = default;
  ConnectionSource(EvalFn eval, JetFn jet, RadialDomain domain, TorusSpec torus,
                   std::string label = {})
      : eval_(std::move(eval)),
        jet_(std::move(jet)),
        domain_(domain),
        torus_(torus),
        label_(std::move(label)) {}

  Components evaluate(const Point& p) const {
    check(p);
    return eval_(p);
  }

  bool has_jet() const { return static_cast<bool>(jet_); }

  Jet jet(const Point& p) const {
    check(p);
    if (!jet_) throw PreconditionError("connection has no analytic derivatives");
    return jet_(p);
  }

  bool in_domain(const Point& p) const { return domain_.contains(p.r); }
  const RadialDomain& domain() const { return domain_; }
  const TorusSpec& torus() const { return torus_; }
  const std::string& label() const { return label_; }

  /// Minimum spacing of the underlying sample grid, if any (0 for analytic).
  double grid_spacing() const { return grid_spacing_; }
  void set_grid_spacing(double h) { grid_spacing_ = h; }

 private:
  void check(const Point& p) const {
    if (!domain_.contains(p.r))
      throw DomainError("point r = " + std::to_string(p.r) + " outside connection domain");
  }

  EvalFn eval_;
  JetFn jet_;
  RadialDomain domain_{};
  TorusSpec torus_{};
  std::string label_;
  double grid_spacing_ = 0.0;
};

/// The trivial flat connection d on r > 0.
inline ConnectionSource flat_connection(const TorusSpec& t = {}, double r_min = 0.0) {
  return ConnectionSource(
      [](const Point&) { return Components{}; }, [](const Point&) { return Jet{}; },
      RadialDomain{r_min, std::numeric_limits<double>::infinity(), r_min == 0.0}, t, "flat");
}

/// Conjugation by a constant g in SU(2): a -> g a g^{-1}.
inline ConnectionSource conjugate(const ConnectionSource& c, const Mat2& g) {
  const Mat2 gi = g.adjoint();
  auto conj = [g, gi](Components v) {
    for (auto& m : v.a) m = g * m * gi;
    return v;
  };
  ConnectionSource::JetFn jet;
  if (c.has_jet()) {
    jet = [c, conj](const Point& p) {
      Jet j = c.jet(p);
      j.value = conj(j.value);
      for (auto& d : j.d) d = conj(d);
      return j;
    };
  }
  return ConnectionSource([c, conj](const Point& p) { return conj(c.evaluate(p)); }, jet,
                          c.domain(), c.torus(), c.label() + "^g");
}

/// Sum of a base connection and an su(2)-valued 1-form.
inline ConnectionSource add_field(const ConnectionSource& base, const ConnectionSource& field,
                                  const std::string& label) {
  ConnectionSource::JetFn jet;
  if (base.has_jet() && field.has_jet()) {
    jet = [base, field](const Point& p) {
      Jet j = base.jet(p);
      j += field.jet(p);
      return j;
    };
  }
  return ConnectionSource(
      [base, field](const Point& p) { return base.evaluate(p) + field.evaluate(p); }, jet,
      base.domain(), base.torus(), label);
}

/// Smooth path s in [0, 1] -> point, with coordinate velocity.
struct Path {
  std::function<Point(double)> position;
  std::function<std::array<double, 4>(double)> velocity;
};

inline Path straight_path(const Point& a, const Point& b) {
  return Path{[a, b](double s) {
                Point p;
                for (int i = 0; i < 4; ++i) p[i] = a[i] + s * (b[i] - a[i]);
                return p;
              },
              [a, b](double) {
                return std::array<double, 4>{b.r - a.r, b.theta - a.theta, b.x - a.x, b.y - a.y};
              }};
}

/// Radial segment at fixed (theta, x, y), geometric in r.
inline Path radial_path(const Point& a, double r_end) {
  const double ratio = std::log(r_end / a.r);
  return Path{[a, ratio](double s) {
                Point p = a;
                p.r = a.r * std::exp(ratio * s);
                return p;
              },
              [a, ratio](double s) {
                return std::array<double, 4>{a.r * std::exp(ratio * s) * ratio, 0.0, 0.0, 0.0};
              }};
}

/// Parallel transport P exp(-int A) along a path by midpoint exponentials;
/// later steps multiply on the left.
inline Mat2 transport(const ConnectionSource& c, const Path& path, int steps) {
  if (steps < 1) throw PreconditionError("transport: steps must be positive");
  Mat2 h = Mat2::Identity();
  const double ds = 1.0 / steps;
  for (int k = 0; k < steps; ++k) {
    const double s = (k + 0.5) * ds;
    const Mat2 x = -ds * c.evaluate(path.position(s)).contract(path.velocity(s));
    h = su2::exp(x) * h;
  }
  return h;
}

/// Closest SU(2) matrix in the quaternion sense.
inline Mat2 renormalize_su2(const Mat2& m) {
  Complex a = 0.5 * (m(0, 0) + std::conj(m(1, 1)));
  Complex b = 0.5 * (m(0, 1) - std::conj(m(1, 0)));
  const double n = std::sqrt(std::norm(a) + std::norm(b));
  if (!(n > 0.0)) throw NumericalError("renormalize_su2: degenerate matrix");
  a /= n;
  b /= n;
  Mat2 u;
  u << a, b, -std::conj(b), std::conj(a);
  return u;
}

/// Writes g in SU(2) as q0 I - i (q . sigma); returns (q0, q).
inline std::pair<double, Eigen::Vector3d> quaternion(const Mat2& g) {
  const double q0 = 0.5 * (g(0, 0) + g(1, 1)).real();
  const Mat2 x = 0.5 * (g - g.adjoint());
  return {q0, -su2::to_vector(x)};
}

/// Phase phi in [0, pi] with g = exp(-i phi n.sigma), and the axis n.
inline std::pair<double, Eigen::Vector3d> su2_phase(const Mat2& g) {
  const auto [q0, q] = quaternion(g);
  const double s = q.norm();
  const double phi = std::atan2(s, q0);
  Eigen::Vector3d n = s > 0.0 ? Eigen::Vector3d(q / s) : Eigen::Vector3d(0.0, 0.0, 1.0);
  return {phi, n};
}

inline double unitarity_defect(const Mat2& g) {
  return std::max((g * g.adjoint() - Mat2::Identity()).norm(), std::abs(g.determinant() - 1.0));
}

}  // namespace ipl
