#pragma once

// Torus, dual torus, triviality lattice, grids and loops.
//
// Conventions: coordinates (r, theta, x, y) with w = r e^{i theta}; the torus
// is the rectangle [0, Lx) x [0, Ly). The twisted operator dbar + zeta dzbar
// with dbar = (d_x + i d_y)/2 acts on exp(2 pi i (n x / Lx + m y / Ly)) as
// i pi n / Lx - pi m / Ly + zeta.

#include "ipl/core.hpp"

#include <array>
#include <string>
#include <vector>

namespace ipl {

struct TorusSpec {
  double period_x = kTwoPi;
  double period_y = kTwoPi;

  double area() const { return period_x * period_y; }

  void validate() const {
    if (!(period_x > 0.0) || !(period_y > 0.0) || !std::isfinite(period_x) ||
        !std::isfinite(period_y))
      throw PreconditionError("torus periods must be positive and finite");
  }
};

/// Point on T x C in coordinates (r, theta, x, y).
struct Point {
  double r = 1.0;
  double theta = 0.0;
  double x = 0.0;
  double y = 0.0;

  double operator[](int i) const {
    switch (i) {
      case 0: return r;
      case 1: return theta;
      case 2: return x;
      default: return y;
    }
  }
  double& operator[](int i) {
    switch (i) {
      case 0: return r;
      case 1: return theta;
      case 2: return x;
      default: return y;
    }
  }
  Complex w() const { return std::polar(r, theta); }
};

/// Generators of the twists zeta with a nontrivial kernel of dbar + zeta dzbar.
inline std::array<Complex, 2> dual_lattice(const TorusSpec& t) {
  t.validate();
  return {Complex(kPi / t.period_y, 0.0), Complex(0.0, kPi / t.period_x)};
}

/// Symbol of the twisted operator on the Fourier mode (n, m).
inline Complex twisted_symbol(const TorusSpec& t, int n, int m, Complex zeta) {
  return Complex(-kPi * m / t.period_y, kPi * n / t.period_x) + zeta;
}

/// Twist carried by the flat line bundle with holonomy parameter xi.
inline Complex zeta_of_xi(double xi1, double xi2, const TorusSpec& t) {
  return {-kPi * xi2 / t.period_y, kPi * xi1 / t.period_x};
}

inline std::array<double, 2> xi_of_zeta(Complex zeta, const TorusSpec& t) {
  return {zeta.imag() * t.period_x / kPi, -zeta.real() * t.period_y / kPi};
}

/// Distance from zeta to the nearest lattice point.
inline double lattice_distance(Complex zeta, const TorusSpec& t) {
  const auto xi = xi_of_zeta(zeta, t);
  const double d1 = xi[0] - std::round(xi[0]);
  const double d2 = xi[1] - std::round(xi[1]);
  return std::abs(zeta_of_xi(d1, d2, t));
}

/// Brute-force membership test: does some mode (n, m) with |n|, |m| <= n_max
/// lie in the kernel of dbar + zeta dzbar?
inline bool kernel_scan(Complex zeta, const TorusSpec& t, int n_max, double tol = 1e-12) {
  for (int n = -n_max; n <= n_max; ++n)
    for (int m = -n_max; m <= n_max; ++m)
      if (std::abs(twisted_symbol(t, n, m, zeta)) <= tol) return true;
  return false;
}

/// Covering radius of the triviality lattice (half the rectangle diagonal).
inline double covering_radius(const TorusSpec& t) {
  const auto b = dual_lattice(t);
  return 0.5 * std::hypot(std::abs(b[0]), std::abs(b[1]));
}

struct DualTorusPoint {
  double xi1 = 0.0;
  double xi2 = 0.0;
  Complex zeta{0.0, 0.0};

  bool operator==(const DualTorusPoint& o) const {
    return xi1 == o.xi1 && xi2 == o.xi2 && zeta == o.zeta;
  }
};

inline DualTorusPoint reduce_dual(double xi1, double xi2, const TorusSpec& t = {}) {
  if (!std::isfinite(xi1) || !std::isfinite(xi2))
    throw PreconditionError("reduce_dual: non-finite input");
  DualTorusPoint p;
  p.xi1 = wrap_unit(xi1);
  p.xi2 = wrap_unit(xi2);
  p.zeta = zeta_of_xi(p.xi1, p.xi2, t);
  return p;
}

inline DualTorusPoint negate(const DualTorusPoint& p, const TorusSpec& t = {}) {
  return reduce_dual(-p.xi1, -p.xi2, t);
}

/// Distance on the dual torus R^2 / Z^2 (componentwise nearest representative).
inline double dual_distance(const DualTorusPoint& a, const DualTorusPoint& b) {
  double d1 = a.xi1 - b.xi1;
  double d2 = a.xi2 - b.xi2;
  d1 -= std::round(d1);
  d2 -= std::round(d2);
  return std::hypot(d1, d2);
}

/// True when xi = -xi in the dual torus, i.e. 2 xi is integral.
inline bool is_order_two(const DualTorusPoint& p, double tol = 1e-9) {
  auto near_half_integer = [tol](double v) {
    const double d = 2.0 * v - std::round(2.0 * v);
    return std::abs(d) <= 2.0 * tol;
  };
  return near_half_integer(p.xi1) && near_half_integer(p.xi2);
}

enum class Spacing { uniform, log_radial };

inline std::string to_string(Spacing s) { return s == Spacing::uniform ? "uniform" : "log"; }

struct AnnulusGrid {
  double r_min = 1.0;
  double r_max = 2.0;
  int n_r = 8;
  int n_theta = 16;
  int n_x = 4;
  int n_y = 4;
  Spacing spacing = Spacing::uniform;

  void validate() const {
    if (!(r_min > 0.0) || !(r_max > r_min))
      throw PreconditionError("AnnulusGrid: need 0 < r_min < r_max");
    if (n_r < 4 || n_theta < 4 || n_x < 4 || n_y < 4)
      throw PreconditionError("AnnulusGrid: all counts must be >= 4");
  }

  /// Radial coordinate used for uniform spacing (r or ln r).
  double to_s(double r) const { return spacing == Spacing::uniform ? r : std::log(r); }
  double from_s(double s) const { return spacing == Spacing::uniform ? s : std::exp(s); }
  double ds() const { return (to_s(r_max) - to_s(r_min)) / (n_r - 1); }

  std::vector<double> radii() const {
    validate();
    std::vector<double> out(n_r);
    const double s0 = to_s(r_min);
    const double h = ds();
    for (int i = 0; i < n_r; ++i) out[i] = from_s(s0 + h * i);
    out.front() = r_min;
    out.back() = r_max;
    return out;
  }

  std::vector<double> thetas() const { return periodic_nodes(n_theta, kTwoPi); }
  std::vector<double> xs(const TorusSpec& t) const { return periodic_nodes(n_x, t.period_x); }
  std::vector<double> ys(const TorusSpec& t) const { return periodic_nodes(n_y, t.period_y); }

  std::size_t size() const {
    return static_cast<std::size_t>(n_r) * n_theta * n_x * n_y;
  }
  std::size_t index(int ir, int it, int ix, int iy) const {
    return ((static_cast<std::size_t>(ir) * n_theta + it) * n_x + ix) * n_y + iy;
  }

  /// Smallest coordinate spacing over all four directions (theta measured in
  /// radians, radial spacing at the inner edge).
  double min_spacing(const TorusSpec& t) const {
    const auto rs = radii();
    double h = rs[1] - rs[0];
    h = std::min(h, kTwoPi / n_theta);
    h = std::min(h, t.period_x / n_x);
    h = std::min(h, t.period_y / n_y);
    return h;
  }

  static std::vector<double> periodic_nodes(int n, double period) {
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = period * i / n;
    return out;
  }
};

enum class LoopKind { x_circle, y_circle, theta_circle, polyline };

/// Closed loop. Circles start at `base`; a polyline joins its last vertex back
/// to the first.
struct Loop {
  LoopKind kind = LoopKind::x_circle;
  Point base{};
  int samples = 64;
  std::vector<Point> vertices;
  bool reversed = false;

  void validate() const {
    if (samples < 16) throw PreconditionError("Loop: sample count must be >= 16");
    if (kind == LoopKind::polyline && vertices.size() < 2)
      throw PreconditionError("Loop: polyline needs at least two vertices");
  }

  Loop reverse() const {
    Loop l = *this;
    l.reversed = !reversed;
    return l;
  }
};

}  // namespace ipl
