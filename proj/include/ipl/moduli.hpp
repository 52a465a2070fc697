#pragma once

// Linear algebra of the two moduli spaces: complex structures on T x R^2,
// tangent conditions for instantons and Higgs pairs on grids, L2 metrics,
// the dimension count and the k = 1 chart of rational maps.

#include "ipl/gauge.hpp"
#include "ipl/stability.hpp"

#include <Eigen/Dense>

#include <optional>

namespace ipl {

using Mat4 = Eigen::Matrix4d;

/// I_1, I_2, I_3 acting on (z1, z2, w1, w2).
inline std::array<Mat4, 3> complex_structures() {
  Mat4 I1, I2, I3;
  I1 << 0, -1, 0, 0,
        1, 0, 0, 0,
        0, 0, 0, -1,
        0, 0, 1, 0;
  I2 << 0, 0, -1, 0,
        0, 0, 0, 1,
        1, 0, 0, 0,
        0, -1, 0, 0;
  I3 << 0, 0, 0, -1,
        0, 0, -1, 0,
        0, 1, 0, 0,
        1, 0, 0, 0;
  return {I1, I2, I3};
}

struct QuaternionCheck {
  bool squares = false;        // I_j^2 = -Id
  bool product = false;        // I1 I2 = I3
  bool anticommute = false;    // I2 I1 = -I3
  int triple_sign = 0;         // I1 I2 I3 = triple_sign * Id
  bool ok() const { return squares && product && anticommute && triple_sign == -1; }
};

inline QuaternionCheck quaternion_check() {
  const auto I = complex_structures();
  const Mat4 id = Mat4::Identity();
  QuaternionCheck q;
  q.squares = (I[0] * I[0] == -id) && (I[1] * I[1] == -id) && (I[2] * I[2] == -id);
  q.product = I[0] * I[1] == I[2];
  q.anticommute = I[1] * I[0] == -I[2];
  const Mat4 t = I[0] * I[1] * I[2];
  q.triple_sign = t == id ? 1 : (t == -id ? -1 : 0);
  return q;
}

inline int moduli_dimension(int k) {
  if (k <= 0) throw PreconditionError("moduli_dimension: k must be >= 1 (no irreducible instantons for k = 0)");
  return 8 * k - 4;
}

/// f(w) = (a w + b) / (c w + d).
struct Mobius {
  Complex a{1.0, 0.0}, b{0.0, 0.0}, c{0.0, 0.0}, d{1.0, 0.0};
  Complex operator()(Complex w) const { return (a * w + b) / (c * w + d); }
  Complex derivative(Complex w) const { return (a * d - b * c) / std::pow(c * w + d, 2); }
  Complex determinant() const { return a * d - b * c; }
};

/// Degree-one maps (w + b)/(cw + d) with prescribed f(0) and f'(0), parameterised by c.
struct K1Chart {
  Complex f0{0.0, 0.0};
  Complex fp0{1.0, 0.0};
  int complex_parameters = 1;
  int fiber_real_dim = 2;  // torus T
  int base_real_dim = 2;   // the line C of the chart parameter
  std::optional<Complex> excluded;  // c = 1/f(0) drops the degree

  int total_real_dim() const { return fiber_real_dim + base_real_dim; }

  Mobius member(Complex c) const {
    if (excluded && std::abs(c - *excluded) <= 1e-14 * (1.0 + std::abs(c)))
      throw PreconditionError("K1Chart: parameter value drops the degree");
    Mobius m;
    m.c = c;
    m.d = (1.0 - c * f0) / fp0;
    m.b = f0 * m.d;
    return m;
  }
};

inline K1Chart k1_chart(Complex f0, Complex fp0) {
  if (fp0 == Complex(0.0)) throw PreconditionError("k1_chart: f'(0) = 0 is degenerate (degree drop)");
  if (!std::isfinite(std::abs(f0)) || !std::isfinite(std::abs(fp0)))
    throw PreconditionError("k1_chart: constraints must be finite");
  K1Chart k;
  k.f0 = f0;
  k.fp0 = fp0;
  if (f0 != Complex(0.0)) k.excluded = 1.0 / f0;
  return k;
}

namespace detail {

/// Periodic spectral differentiation on n equispaced nodes (n even).
inline Eigen::MatrixXd periodic_diff(int n, double period) {
  if (n % 2 != 0) throw PreconditionError("spectral differentiation needs an even node count");
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) {
        const int k = i - j;
        D(i, j) = 0.5 * (k % 2 == 0 ? 1.0 : -1.0) / std::tan(kPi * k / n) * (kTwoPi / period);
      }
  return D;
}

/// Fourth-order differences on n uniform nodes of spacing h, one-sided at the ends.
inline Eigen::MatrixXd fd4(int n, double h) {
  if (n < 5) throw PreconditionError("fd4: need at least 5 nodes");
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  const double c0[5] = {-25.0, 48.0, -36.0, 16.0, -3.0};
  const double c1[5] = {-3.0, -10.0, 18.0, -6.0, 1.0};
  for (int k = 0; k < 5; ++k) {
    D(0, k) = c0[k];
    D(1, k) = c1[k];
    D(n - 1, n - 1 - k) = -c0[k];
    D(n - 2, n - 1 - k) = -c1[k];
  }
  for (int i = 2; i < n - 2; ++i) {
    D(i, i - 2) = 1.0;
    D(i, i - 1) = -8.0;
    D(i, i + 1) = 8.0;
    D(i, i + 2) = -1.0;
  }
  return D / (12.0 * h);
}

inline double re_inner(const Mat2& a, const Mat2& b) { return (a.adjoint() * b).trace().real(); }

}  // namespace detail

using ScalarField = std::vector<Mat2>;
using FormField = std::vector<Components>;

/// Discrete d_A on an annulus grid: spectral in theta, x, y and fourth-order
/// differences in the radial grid coordinate. The adjoint is the exact adjoint
/// under the trapezoid inner product with volume r dr dtheta dx dy.
class GridOperator {
 public:
  GridOperator(const ConnectionSource& conn, const AnnulusGrid& grid, int band = 5)
      : grid_(grid), torus_(conn.torus()), band_(band) {
    grid.validate();
    if (grid.n_r < 2 * band + 2) throw PreconditionError("GridOperator: too few radial nodes for the band");
    r_ = grid.radii();
    for (double r : r_)
      if (!conn.domain().contains(r)) throw DomainError("GridOperator: grid leaves the connection domain");
    const auto th = grid.thetas(), xs = grid.xs(torus_), ys = grid.ys(torus_);
    D_[kR] = detail::fd4(grid.n_r, grid.ds());
    D_[kTheta] = detail::periodic_diff(grid.n_theta, kTwoPi);
    D_[kX] = detail::periodic_diff(grid.n_x, torus_.period_x);
    D_[kY] = detail::periodic_diff(grid.n_y, torus_.period_y);
    A_.resize(grid.size());
    W_.resize(grid.size());
    const double cell = (kTwoPi / grid.n_theta) * (torus_.period_x / grid.n_x) * (torus_.period_y / grid.n_y);
    for (int ir = 0; ir < grid.n_r; ++ir) {
      const double dr_ds = grid.spacing == Spacing::uniform ? 1.0 : r_[ir];
      const double trap = (ir == 0 || ir == grid.n_r - 1) ? 0.5 : 1.0;
      for (int it = 0; it < grid.n_theta; ++it)
        for (int ix = 0; ix < grid.n_x; ++ix)
          for (int iy = 0; iy < grid.n_y; ++iy) {
            const std::size_t k = grid.index(ir, it, ix, iy);
            A_[k] = conn.evaluate(Point{r_[ir], th[it], xs[ix], ys[iy]});
            W_[k] = trap * grid.ds() * dr_ds * r_[ir] * cell;
          }
    }
  }

  const AnnulusGrid& grid() const { return grid_; }
  const TorusSpec& torus() const { return torus_; }
  const std::vector<double>& radii() const { return r_; }
  double weight(std::size_t k) const { return W_[k]; }
  int band() const { return band_; }

  bool interior(std::size_t k) const {
    const int ir = static_cast<int>(k / (std::size_t(grid_.n_theta) * grid_.n_x * grid_.n_y));
    return ir >= band_ && ir < grid_.n_r - band_;
  }

  /// Coordinate partial derivative along axis mu (transpose = apply D^T).
  ScalarField partial(const ScalarField& f, int mu, bool transpose = false) const {
    check_size(f.size());
    ScalarField out(f.size(), Mat2::Zero());
    const Eigen::MatrixXd& D = D_[mu];
    const int n = static_cast<int>(D.rows());
    const std::size_t stride = stride_of(mu);
    parallel_for(f.size(), [&](std::size_t k) {
      const int i = static_cast<int>((k / stride) % n);
      const std::size_t base = k - std::size_t(i) * stride;
      Mat2 s = Mat2::Zero();
      for (int j = 0; j < n; ++j) {
        const double c = transpose ? D(j, i) : D(i, j);
        if (c != 0.0) s += c * f[base + std::size_t(j) * stride];
      }
      if (mu == kR && !transpose) s /= dr_ds(k);
      out[k] = s;
    });
    return out;
  }

  /// (d_A u)_mu = d_mu u + [A_mu, u].
  FormField d0(const ScalarField& u) const {
    FormField a(u.size());
    for (int mu = 0; mu < 4; ++mu) {
      const ScalarField du = partial(u, mu);
      for (std::size_t k = 0; k < u.size(); ++k) a[k][mu] = du[k] + su2::commutator(A_[k][mu], u[k]);
    }
    return a;
  }

  /// Exact adjoint of d0 under inner0 / inner1.
  ScalarField d0_adjoint(const FormField& a) const {
    check_size(a.size());
    ScalarField out(a.size(), Mat2::Zero());
    for (int mu = 0; mu < 4; ++mu) {
      ScalarField g(a.size());
      for (std::size_t k = 0; k < a.size(); ++k) {
        g[k] = W_[k] * metric(k, mu) * a[k][mu];
        if (mu == kR) g[k] /= dr_ds(k);
      }
      const ScalarField dt = partial(g, mu, true);
      for (std::size_t k = 0; k < a.size(); ++k)
        out[k] += dt[k] / W_[k] - metric(k, mu) * su2::commutator(A_[k][mu], a[k][mu]);
    }
    return out;
  }

  /// (d_A a)_{mu nu} at every node, packed as curvature samples.
  std::vector<CurvatureSample> d1(const FormField& a) const {
    check_size(a.size());
    std::array<std::array<ScalarField, 4>, 4> da;  // da[mu][nu] = d_mu a_nu
    for (int nu = 0; nu < 4; ++nu) {
      ScalarField f(a.size());
      for (std::size_t k = 0; k < a.size(); ++k) f[k] = a[k][nu];
      for (int mu = 0; mu < 4; ++mu)
        if (mu != nu) da[mu][nu] = partial(f, mu);
    }
    std::vector<CurvatureSample> out(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      out[k].point = point(k);
      for (int mu = 0; mu < 4; ++mu)
        for (int nu = mu + 1; nu < 4; ++nu)
          out[k].F[CurvatureSample::slot(mu, nu)] = da[mu][nu][k] - da[nu][mu][k] +
                                                     su2::commutator(A_[k][mu], a[k][nu]) +
                                                     su2::commutator(a[k][mu], A_[k][nu]);
    }
    return out;
  }

  double inner0(const ScalarField& u, const ScalarField& v, bool interior_only = false) const {
    check_size(u.size());
    check_size(v.size());
    double s = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k)
      if (!interior_only || interior(k)) s += W_[k] * detail::re_inner(u[k], v[k]);
    return s;
  }

  double inner1(const FormField& a, const FormField& b, bool interior_only = false) const {
    check_size(a.size());
    check_size(b.size());
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (interior_only && !interior(k)) continue;
      for (int mu = 0; mu < 4; ++mu) s += W_[k] * metric(k, mu) * detail::re_inner(a[k][mu], b[k][mu]);
    }
    return s;
  }

  Point point(std::size_t k) const {
    const std::size_t ny = grid_.n_y, nx = grid_.n_x, nt = grid_.n_theta;
    const int iy = static_cast<int>(k % ny);
    const int ix = static_cast<int>((k / ny) % nx);
    const int it = static_cast<int>((k / (ny * nx)) % nt);
    const int ir = static_cast<int>(k / (ny * nx * nt));
    return Point{r_[ir], kTwoPi * it / grid_.n_theta, torus_.period_x * ix / grid_.n_x,
                 torus_.period_y * iy / grid_.n_y};
  }

  template <class F>
  ScalarField sample_scalar(F&& f) const {
    ScalarField u(grid_.size());
    for (std::size_t k = 0; k < u.size(); ++k) u[k] = f(point(k));
    return u;
  }

  template <class F>
  FormField sample_form(F&& f) const {
    FormField a(grid_.size());
    for (std::size_t k = 0; k < a.size(); ++k) a[k] = f(point(k));
    return a;
  }

 private:
  void check_size(std::size_t n) const {
    if (n != grid_.size()) throw PreconditionError("field does not match the grid");
  }
  std::size_t stride_of(int mu) const {
    switch (mu) {
      case kR: return std::size_t(grid_.n_theta) * grid_.n_x * grid_.n_y;
      case kTheta: return std::size_t(grid_.n_x) * grid_.n_y;
      case kX: return grid_.n_y;
      default: return 1;
    }
  }
  double r_of(std::size_t k) const { return r_[k / stride_of(kR)]; }
  double dr_ds(std::size_t k) const { return grid_.spacing == Spacing::uniform ? 1.0 : r_of(k); }
  double metric(std::size_t k, int mu) const {
    if (mu != kTheta) return 1.0;
    const double r = r_of(k);
    return 1.0 / (r * r);
  }

  AnnulusGrid grid_;
  TorusSpec torus_;
  int band_;
  std::vector<double> r_;
  std::array<Eigen::MatrixXd, 4> D_;
  FormField A_;
  std::vector<double> W_;
};

/// su(2)-valued 1-form on an annulus grid in coordinate components (a_r, a_theta, a_x, a_y).
struct TangentVectorInstanton {
  AnnulusGrid grid;
  FormField a;

  void validate(double tol = 1e-10) const {
    if (a.size() != grid.size()) throw PreconditionError("TangentVectorInstanton: size does not match grid");
    for (const auto& c : a)
      for (const auto& m : c.a) {
        if (!m.allFinite()) throw PreconditionError("TangentVectorInstanton: non-finite entry");
        if (su2::algebra_defect(m) > tol * (1.0 + m.norm()))
          throw PreconditionError("TangentVectorInstanton: entries must be anti-hermitian and traceless");
      }
  }
};

inline void check_grid(const GridOperator& op, const AnnulusGrid& g) {
  const auto& h = op.grid();
  if (g.n_r != h.n_r || g.n_theta != h.n_theta || g.n_x != h.n_x || g.n_y != h.n_y ||
      g.r_min != h.r_min || g.r_max != h.r_max || g.spacing != h.spacing)
    throw PreconditionError("tangent vector lives on a different grid");
}

struct InstantonResidual {
  double gauge = 0.0;  // ||d_A* a||
  double asd = 0.0;    // ||d_A+ a||
};

/// L2 norms of d_A* a and d_A+ a over the radial interior of the grid.
inline InstantonResidual instanton_tangent_residual(const GridOperator& op, const TangentVectorInstanton& t) {
  t.validate();
  check_grid(op, t.grid);
  const ScalarField div = op.d0_adjoint(t.a);
  const auto da = op.d1(t.a);
  InstantonResidual res;
  res.gauge = std::sqrt(op.inner0(div, div, true));
  double s = 0.0;
  for (std::size_t k = 0; k < da.size(); ++k)
    if (op.interior(k)) s += op.weight(k) * std::pow(da[k].self_dual_norm(), 2);
  res.asd = std::sqrt(s);
  return res;
}

inline InstantonResidual instanton_tangent_residual(const ConnectionSource& c, const TangentVectorInstanton& t) {
  return instanton_tangent_residual(GridOperator(c, t.grid), t);
}

/// Contraction of the curvature with a constant vector field on T x C, given
/// in Cartesian components (x, y, w1, w2); a translation direction of the moduli.
inline TangentVectorInstanton translation_deformation(const ConnectionSource& c, const AnnulusGrid& grid,
                                                      const std::array<double, 4>& v,
                                                      const DiffOptions& o = {}) {
  GridOperator op(c, grid);
  TangentVectorInstanton t;
  t.grid = grid;
  t.a = op.sample_form([&](const Point& p) {
    const auto F = curvature(c, p, o);
    const double cs = std::cos(p.theta), sn = std::sin(p.theta);
    // coordinate components of v: (v^r, v^theta, v^x, v^y)
    const std::array<double, 4> u{cs * v[2] + sn * v[3], (-sn * v[2] + cs * v[3]) / p.r, v[0], v[1]};
    Components a;
    for (int nu = 0; nu < 4; ++nu)
      for (int mu = 0; mu < 4; ++mu) a[nu] += u[mu] * F.get(mu, nu);
    return a;
  });
  return t;
}

/// Pullback of a 1-form by a constant endomorphism I of (x, y, w1, w2).
inline TangentVectorInstanton apply_structure(const Mat4& I, const TangentVectorInstanton& t) {
  TangentVectorInstanton out = t;
  const double dth = kTwoPi / t.grid.n_theta;
  const auto r = t.grid.radii();
  const std::size_t per_r = std::size_t(t.grid.n_theta) * t.grid.n_x * t.grid.n_y;
  for (std::size_t k = 0; k < t.a.size(); ++k) {
    const double rr = r[k / per_r];
    const int it = static_cast<int>((k / (std::size_t(t.grid.n_x) * t.grid.n_y)) % t.grid.n_theta);
    const double cs = std::cos(it * dth), sn = std::sin(it * dth);
    const auto& a = t.a[k];
    const Mat2 at = a[kTheta] / rr;
    const std::array<Mat2, 4> cart{a[kX], a[kY], cs * a[kR] - sn * at, sn * a[kR] + cs * at};
    std::array<Mat2, 4> img;
    for (int i = 0; i < 4; ++i) {
      img[i] = Mat2::Zero();
      for (int j = 0; j < 4; ++j)
        if (I(j, i) != 0.0) img[i] += I(j, i) * cart[j];
    }
    out.a[k][kX] = img[0];
    out.a[k][kY] = img[1];
    out.a[k][kR] = cs * img[2] + sn * img[3];
    out.a[k][kTheta] = rr * (-sn * img[2] + cs * img[3]);
  }
  return out;
}

/// g(a1, a2) = integral of -Tr(a1 wedge *a2) by trapezoid quadrature.
inline double l2_metric(const GridOperator& op, const TangentVectorInstanton& a1, const TangentVectorInstanton& a2) {
  check_grid(op, a1.grid);
  check_grid(op, a2.grid);
  return op.inner1(a1.a, a2.a);
}

/// Dual-torus grid: nodes xi = (i / n1, j / n2).
struct DualGrid {
  int n1 = 8;
  int n2 = 8;
  std::vector<DualTorusPoint> punctures;  // +-xi0, to be avoided
  double puncture_tol = 1e-9;

  std::size_t size() const { return std::size_t(n1) * n2; }
  std::size_t index(int i, int j) const { return std::size_t(i) * n2 + j; }

  void validate() const {
    if (n1 < 4 || n2 < 4 || n1 % 2 || n2 % 2) throw PreconditionError("DualGrid: counts must be even and >= 4");
    for (const auto& p : punctures)
      for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j)
          if (dual_distance(reduce_dual(double(i) / n1, double(j) / n2), p) <= puncture_tol)
            throw PreconditionError("DualGrid: grid touches a singular point");
  }
};

/// Higgs pair (B, Phi) on the dual torus: B = B1 dxi1 + B2 dxi2, Phi = Phi_z dz, z = xi1 + i xi2.
struct HiggsPairGrid {
  DualGrid grid;
  ScalarField B1, B2, Phi;
};

struct TangentVectorHiggs {
  ScalarField b1, b2, phi;  // b = b1 dxi1 + b2 dxi2 in u(2), phi = phi_z dz
};

struct HiggsResidual {
  double curvature = 0.0;  // (i)  d_B b + [Phi, phi*] + [phi, Phi*]
  double holomorphy = 0.0; // (ii) dbar_B phi + [b^{0,1}, Phi]
  double gauge = 0.0;      // (iii) d_B* b - Re-part of [Phi, phi^dag]
};

namespace detail {

inline void check_fields(const DualGrid& g, std::initializer_list<const ScalarField*> fs) {
  for (const auto* f : fs) {
    if (f->size() != g.size()) throw PreconditionError("Higgs field does not match the dual grid");
    for (const auto& m : *f)
      if (!m.allFinite()) throw PreconditionError("Higgs field has non-finite entries");
  }
}

inline ScalarField dual_partial(const DualGrid& g, const ScalarField& f, int dir) {
  const Eigen::MatrixXd D = periodic_diff(dir == 0 ? g.n1 : g.n2, 1.0);
  ScalarField out(f.size(), Mat2::Zero());
  for (int i = 0; i < g.n1; ++i)
    for (int j = 0; j < g.n2; ++j) {
      Mat2 s = Mat2::Zero();
      if (dir == 0)
        for (int k = 0; k < g.n1; ++k) s += D(i, k) * f[g.index(k, j)];
      else
        for (int k = 0; k < g.n2; ++k) s += D(j, k) * f[g.index(i, k)];
      out[g.index(i, j)] = s;
    }
  return out;
}

}  // namespace detail

/// Pointwise residuals of the three linearized conditions; d_B* is the exact
/// adjoint of the spectral d_B (so it equals -sum_j (d_j b_j + [B_j, b_j])).
struct HiggsResidualFields {
  ScalarField curvature, holomorphy, gauge;
};

inline HiggsResidualFields higgs_tangent_fields(const HiggsPairGrid& bg, const TangentVectorHiggs& t) {
  const DualGrid& g = bg.grid;
  g.validate();
  detail::check_fields(g, {&bg.B1, &bg.B2, &bg.Phi, &t.b1, &t.b2, &t.phi});
  const auto d1b2 = detail::dual_partial(g, t.b2, 0), d2b1 = detail::dual_partial(g, t.b1, 1);
  const auto d1b1 = detail::dual_partial(g, t.b1, 0), d2b2 = detail::dual_partial(g, t.b2, 1);
  const auto d1p = detail::dual_partial(g, t.phi, 0), d2p = detail::dual_partial(g, t.phi, 1);
  HiggsResidualFields r;
  r.curvature.resize(g.size());
  r.holomorphy.resize(g.size());
  r.gauge.resize(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    using su2::commutator;
    const Mat2& P = bg.Phi[k];
    const Mat2& p = t.phi[k];
    // dz ^ dzbar = -2i dxi1 ^ dxi2
    r.curvature[k] = d1b2[k] - d2b1[k] + commutator(bg.B1[k], t.b2[k]) - commutator(bg.B2[k], t.b1[k]) -
                     2.0 * kI * (commutator(P, p.adjoint()) + commutator(p, P.adjoint()));
    const Mat2 Bbar = 0.5 * (bg.B1[k] + kI * bg.B2[k]);
    const Mat2 bbar = 0.5 * (t.b1[k] + kI * t.b2[k]);
    r.holomorphy[k] = 0.5 * (d1p[k] + kI * d2p[k]) + commutator(Bbar, p) + commutator(bbar, P);
    r.gauge[k] = -(d1b1[k] + d2b2[k] + commutator(bg.B1[k], t.b1[k]) + commutator(bg.B2[k], t.b2[k])) -
                 0.5 * (commutator(P, p.adjoint()) + commutator(P.adjoint(), p));
  }
  return r;
}

inline HiggsResidual higgs_tangent_residual(const HiggsPairGrid& bg, const TangentVectorHiggs& t) {
  const auto f = higgs_tangent_fields(bg, t);
  const double w = 1.0 / static_cast<double>(bg.grid.size());
  auto norm = [w](const ScalarField& s) {
    double acc = 0.0;
    for (const auto& m : s) acc += m.squaredNorm();
    return std::sqrt(w * acc);
  };
  return {norm(f.curvature), norm(f.holomorphy), norm(f.gauge)};
}

/// g-hat = integral of Re Tr(b1^dag b2) + Re Tr(phi1 phi2^dag) over the dual torus.
inline double l2_metric(const DualGrid& g, const TangentVectorHiggs& t1, const TangentVectorHiggs& t2) {
  detail::check_fields(g, {&t1.b1, &t1.b2, &t1.phi, &t2.b1, &t2.b2, &t2.phi});
  double s = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k)
    s += detail::re_inner(t1.b1[k], t2.b1[k]) + detail::re_inner(t1.b2[k], t2.b2[k]) +
         detail::re_inner(t2.phi[k], t1.phi[k]);
  return s / static_cast<double>(g.size());
}

/// Gram matrix of a family under a bilinear form.
template <class T, class G>
Eigen::MatrixXd gram(const std::vector<T>& family, G&& metric) {
  const int n = static_cast<int>(family.size());
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) M(i, j) = M(j, i) = metric(family[i], family[j]);
  return M;
}

}  // namespace ipl
