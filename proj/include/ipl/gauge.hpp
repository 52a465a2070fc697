#pragma once

// Curvature, anti-self-dual residual, holonomy and the integral identities of
// the decay analysis (monodromy drift, Weitzenbock).
//
// Orientation dx ^ dy ^ dw1 ^ dw2. In the orthonormal frame (x, y, r, t) with
// t = r dtheta the self-dual combinations are
//   S1 = F_xy + F_rt,  S2 = F_xr - F_yt,  S3 = F_xt + F_yr,
// and |F+|^2 = (|S1|^2 + |S2|^2 + |S3|^2) / 2 with Frobenius norms.

#include "ipl/connection.hpp"

#include <random>

namespace ipl {

/// Coordinate 2-form components, ordered r-theta, r-x, r-y, theta-x, theta-y, x-y.
struct CurvatureSample {
  Point point{};
  std::array<Mat2, 6> F{};

  static int slot(int mu, int nu) {
    static constexpr int table[4][4] = {{-1, 0, 1, 2}, {0, -1, 3, 4}, {1, 3, -1, 5}, {2, 4, 5, -1}};
    return table[mu][nu];
  }

  /// F_{mu nu} with antisymmetry.
  Mat2 get(int mu, int nu) const {
    if (mu == nu) return Mat2::Zero();
    const Mat2& m = F[slot(mu, nu)];
    return mu < nu ? m : Mat2(-m);
  }

  /// Orthonormal-frame component (theta entries divided by r).
  Mat2 ortho(int mu, int nu) const {
    double s = 1.0;
    if (mu == kTheta) s /= point.r;
    if (nu == kTheta) s /= point.r;
    return s * get(mu, nu);
  }

  double norm() const {
    double s = 0.0;
    for (int mu = 0; mu < 4; ++mu)
      for (int nu = mu + 1; nu < 4; ++nu) s += ortho(mu, nu).squaredNorm();
    return std::sqrt(s);
  }

  std::array<Mat2, 3> self_dual_parts() const {
    return {ortho(kX, kY) + ortho(kR, kTheta), ortho(kX, kR) - ortho(kY, kTheta),
            ortho(kX, kTheta) + ortho(kY, kR)};
  }

  std::array<Mat2, 3> anti_self_dual_parts() const {
    return {ortho(kX, kY) - ortho(kR, kTheta), ortho(kX, kR) + ortho(kY, kTheta),
            ortho(kX, kTheta) - ortho(kY, kR)};
  }

  double self_dual_norm() const {
    const auto s = self_dual_parts();
    return std::sqrt(0.5 * (s[0].squaredNorm() + s[1].squaredNorm() + s[2].squaredNorm()));
  }

  double algebra_defect() const {
    double d = 0.0;
    for (const auto& m : F) d = std::max(d, su2::algebra_defect(m));
    return d;
  }
};

enum class DerivativeMode { automatic, analytic, finite_difference };

struct DiffOptions {
  DerivativeMode mode = DerivativeMode::automatic;
  /// Base step; 0 selects grid spacing / 4 for sampled sources, otherwise
  /// 0.01 r radially and 0.02 (scaled by period / 2 pi) in the periodic directions.
  double step = 0.0;
};

namespace detail {

inline double fd_step(const ConnectionSource& c, const Point& p, int mu, const DiffOptions& o) {
  if (o.step != 0.0) return o.step;
  if (c.grid_spacing() > 0.0) return c.grid_spacing() / 4.0;
  switch (mu) {
    case kR: return 0.01 * p.r;
    case kTheta: return 0.02;
    case kX: return 0.02 * c.torus().period_x / kTwoPi;
    default: return 0.02 * c.torus().period_y / kTwoPi;
  }
}

template <class F>
auto richardson_derivative(const F& f, const Point& p, int mu, double h) {
  auto shifted = [&](double d) {
    Point q = p;
    q[mu] += d;
    return f(q);
  };
  auto d4 = [&](double s) {
    auto v = shifted(-2 * s);
    v += -8.0 * shifted(-s);
    v += 8.0 * shifted(s);
    v += -1.0 * shifted(2 * s);
    return (1.0 / (12.0 * s)) * v;
  };
  auto coarse = d4(h);
  auto fine = d4(0.5 * h);
  auto out = (16.0 / 15.0) * fine;
  out += (-1.0 / 15.0) * coarse;
  return out;
}

inline void check_step(const ConnectionSource& c, const Point& p, int mu, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw PreconditionError("degenerate finite-difference step");
  if (mu == kR && (!c.domain().contains(p.r - 2 * h) || !c.domain().contains(p.r + 2 * h)))
    throw DomainError("finite-difference stencil leaves the radial domain");
  if (mu == kR && h >= 0.25 * p.r) throw PreconditionError("degenerate finite-difference step");
}

struct CurvatureArray {
  std::array<Mat2, 6> F{};
  CurvatureArray& operator+=(const CurvatureArray& w) {
    for (int i = 0; i < 6; ++i) F[i] += w.F[i];
    return *this;
  }
  friend CurvatureArray operator*(double s, CurvatureArray w) {
    for (auto& m : w.F) m *= s;
    return w;
  }
};

struct ComponentsFn {
  const ConnectionSource* c;
  Components operator()(const Point& q) const { return c->evaluate(q); }
};

}  // namespace detail

/// Components plus derivatives, analytic or finite-difference.
inline Jet connection_jet(const ConnectionSource& c, const Point& p, const DiffOptions& o = {}) {
  const bool analytic = o.mode == DerivativeMode::analytic ||
                        (o.mode == DerivativeMode::automatic && c.has_jet());
  if (analytic) return c.jet(p);
  Jet j;
  j.value = c.evaluate(p);
  for (int mu = 0; mu < 4; ++mu) {
    const double h = detail::fd_step(c, p, mu, o);
    detail::check_step(c, p, mu, h);
    j.d[mu] = detail::richardson_derivative(detail::ComponentsFn{&c}, p, mu, h);
  }
  return j;
}

inline CurvatureSample curvature_from_jet(const Jet& j, const Point& p) {
  CurvatureSample s;
  s.point = p;
  for (int mu = 0; mu < 4; ++mu)
    for (int nu = mu + 1; nu < 4; ++nu)
      s.F[CurvatureSample::slot(mu, nu)] = j.d[mu][nu] - j.d[nu][mu] +
                                           su2::commutator(j.value[mu], j.value[nu]);
  return s;
}

inline CurvatureSample curvature(const ConnectionSource& c, const Point& p,
                                 const DiffOptions& o = {}) {
  return curvature_from_jet(connection_jet(c, p, o), p);
}

inline double asd_residual(const ConnectionSource& c, const Point& p, const DiffOptions& o = {}) {
  return curvature(c, p, o).self_dual_norm();
}

/// Largest cyclic sum D_mu F_{nu rho} + cyclic over the four index triples.
inline double bianchi_defect(const ConnectionSource& c, const Point& p, const DiffOptions& o = {}) {
  auto fn = [&](const Point& q) {
    detail::CurvatureArray w;
    w.F = curvature(c, q, o).F;
    return w;
  };
  const Components a = c.evaluate(p);
  const CurvatureSample base = curvature(c, p, o);
  std::array<CurvatureSample, 4> dF;
  for (int mu = 0; mu < 4; ++mu) {
    const double h = detail::fd_step(c, p, mu, o);
    detail::check_step(c, p, mu, h);
    dF[mu].point = p;
    dF[mu].F = detail::richardson_derivative(fn, p, mu, h).F;
  }
  double worst = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      for (int k = j + 1; k < 4; ++k) {
        auto D = [&](int m, int n, int l) {
          return Mat2(dF[m].get(n, l) + su2::commutator(a[m], base.get(n, l)));
        };
        worst = std::max(worst, (D(i, j, k) + D(j, k, i) + D(k, i, j)).norm());
      }
  return worst;
}

/// Paths making up a loop, in traversal order.
inline std::vector<Path> loop_paths(const Loop& loop, const TorusSpec& t) {
  loop.validate();
  std::vector<std::pair<Point, Point>> segs;
  if (loop.kind == LoopKind::polyline) {
    const auto& v = loop.vertices;
    for (std::size_t i = 0; i < v.size(); ++i) segs.emplace_back(v[i], v[(i + 1) % v.size()]);
  } else {
    Point end = loop.base;
    if (loop.kind == LoopKind::x_circle) end.x += t.period_x;
    if (loop.kind == LoopKind::y_circle) end.y += t.period_y;
    if (loop.kind == LoopKind::theta_circle) end.theta += kTwoPi;
    segs.emplace_back(loop.base, end);
  }
  std::vector<Path> out;
  if (loop.reversed) {
    for (auto it = segs.rbegin(); it != segs.rend(); ++it)
      out.push_back(straight_path(it->second, it->first));
  } else {
    for (const auto& s : segs) out.push_back(straight_path(s.first, s.second));
  }
  return out;
}

/// Path-ordered holonomy P exp(-oint A), renormalized to SU(2).
inline Mat2 holonomy(const ConnectionSource& c, const Loop& loop, int steps) {
  if (steps < 16) throw PreconditionError("holonomy: steps must be >= 16");
  Mat2 h = Mat2::Identity();
  for (const auto& path : loop_paths(loop, c.torus())) h = transport(c, path, steps) * h;
  return renormalize_su2(h);
}

inline Mat2 holonomy(const ConnectionSource& c, const Loop& loop) {
  return holonomy(c, loop, loop.samples);
}

/// Cylinder Phi(t, s) = p0 + t (p1 - p0) + s * period * e_circle, t, s in [0, 1].
struct CircleFamily {
  Point p0{};
  Point p1{};
  int circle = kX;

  void validate() const {
    if (circle != kTheta && circle != kX && circle != kY)
      throw PreconditionError("circle family: circle direction must be theta, x or y");
    if (p0.r <= 0.0 || p1.r <= 0.0) throw PreconditionError("circle family: r must be positive");
  }
};

struct DriftOptions {
  int t_samples = 10;
  int s_steps = 1000;
  int transport_steps = 200;
  double dt = 1e-3;
  DiffOptions diff{};
};

struct DriftResult {
  double defect = 0.0;
  double max_lhs = 0.0;
  double max_rhs = 0.0;
  std::vector<double> t, lhs, rhs;
};

/// max_t ( |d/dt (h^{-1} m h)| - int_{t x S^1} |F(d_t Phi, d_s Phi)| ds ).
inline DriftResult monodromy_drift_defect(const ConnectionSource& c, const CircleFamily& fam,
                                          const DriftOptions& o = {}) {
  fam.validate();
  if (o.t_samples < 1 || o.s_steps < 16 || !(o.dt > 0.0))
    throw PreconditionError("monodromy_drift_defect: invalid options");
  const TorusSpec& tor = c.torus();
  const double period = fam.circle == kTheta ? kTwoPi
                        : fam.circle == kX   ? tor.period_x
                                             : tor.period_y;
  auto at = [&](double t) {
    Point p;
    for (int i = 0; i < 4; ++i) p[i] = fam.p0[i] + t * (fam.p1[i] - fam.p0[i]);
    return p;
  };
  auto conjugated = [&](double t) {
    Loop l;
    l.kind = fam.circle == kTheta ? LoopKind::theta_circle
             : fam.circle == kX   ? LoopKind::x_circle
                                  : LoopKind::y_circle;
    l.base = at(t);
    l.samples = o.s_steps;
    const Mat2 m = holonomy(c, l);
    const Mat2 h = transport(c, straight_path(fam.p0, at(t)), o.transport_steps);
    return Mat2(h.adjoint() * m * h);
  };
  std::array<double, 4> dt_phi{};
  for (int i = 0; i < 4; ++i) dt_phi[i] = fam.p1[i] - fam.p0[i];

  DriftResult res;
  res.t.resize(o.t_samples);
  res.lhs.resize(o.t_samples);
  res.rhs.resize(o.t_samples);
  parallel_for(o.t_samples, [&](std::size_t k) {
    const double t = (k + 0.5) / o.t_samples;
    const double e = o.dt;
    const Mat2 d = (conjugated(t - 2 * e) - 8.0 * conjugated(t - e) + 8.0 * conjugated(t + e) -
                    conjugated(t + 2 * e)) /
                   (12.0 * e);
    double rhs = 0.0;
    for (int j = 0; j < o.s_steps; ++j) {
      Point p = at(t);
      p[fam.circle] += period * (j + 0.5) / o.s_steps;
      const CurvatureSample F = curvature(c, p, o.diff);
      Mat2 v = Mat2::Zero();
      for (int mu = 0; mu < 4; ++mu) v += dt_phi[mu] * period * F.get(mu, fam.circle);
      rhs += v.norm() / o.s_steps;
    }
    res.t[k] = t;
    res.lhs[k] = d.norm();
    res.rhs[k] = rhs;
  });
  res.defect = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < o.t_samples; ++k) {
    res.defect = std::max(res.defect, res.lhs[k] - res.rhs[k]);
    res.max_lhs = std::max(res.max_lhs, res.lhs[k]);
    res.max_rhs = std::max(res.max_rhs, res.rhs[k]);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Weitzenbock identity on T x {R <= r <= R'} x S^1.

/// One term M * P(r) * cos(k theta + 2 pi n x / Lx + 2 pi m y / Ly + phase) in
/// the orthonormal component `component` (0 = dr, 1 = r dtheta, 2 = dx, 3 = dy).
struct FourierTerm {
  int component = 0;
  Eigen::Vector3d su2{0.0, 0.0, 1.0};
  int k = 0;
  int n = 0;
  int m = 0;
  double phase = 0.0;
  std::vector<double> radial{1.0};
};

struct FourierField {
  std::vector<FourierTerm> terms;
  double R = 1.0;
  double R_outer = 2.0;
  TorusSpec torus{};

  void validate() const {
    if (!(R > 0.0) || !(R_outer > R)) throw PreconditionError("FourierField: need 0 < R < R'");
    for (const auto& t : terms)
      if (t.component < 0 || t.component > 3)
        throw PreconditionError("FourierField: component index out of range");
  }
};

/// Flat diagonal connection i sigma3 (c1 dx + c2 dy) on the torus.
struct DiagonalFlat {
  double c1 = 0.0;
  double c2 = 0.0;
};

inline std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

inline double poly_eval(const std::vector<double>& c, double r) {
  double v = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * r + *it;
  return v;
}

inline double poly_deriv(const std::vector<double>& c, double r) {
  double v = 0.0;
  for (std::size_t i = c.size(); i-- > 1;) v = v * r + static_cast<double>(i) * c[i];
  return v;
}

/// Random fixture vanishing to second order at R' and with a_r = 0 at R.
inline FourierField make_fourier_fixture(std::uint64_t seed, int n_terms, double R, double R_outer,
                                         const TorusSpec& t = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::uniform_int_distribution<int> comp(0, 3), kk(0, 3), nm(-2, 2);
  FourierField f;
  f.R = R;
  f.R_outer = R_outer;
  f.torus = t;
  for (int i = 0; i < n_terms; ++i) {
    FourierTerm term;
    term.component = comp(rng);
    term.su2 = Eigen::Vector3d(U(rng), U(rng), U(rng));
    term.k = kk(rng);
    term.n = nm(rng);
    term.m = nm(rng);
    term.phase = kPi * U(rng);
    std::vector<double> p{U(rng), U(rng) / R, U(rng) / (R * R)};
    p = poly_mul(p, {R_outer * R_outer, -2.0 * R_outer, 1.0});
    if (term.component == 0) p = poly_mul(p, {-R, 1.0});
    term.radial = p;
    f.terms.push_back(term);
  }
  return f;
}

struct WeitzenbockOptions {
  int n_gauss = 48;
  int n_theta = 0;  // 0 selects from the field's frequencies
  int n_x = 0;
  int n_y = 0;
};

struct WeitzenbockResult {
  double d_star_sq = 0.0;
  double d_sq = 0.0;
  double nabla_sq = 0.0;
  double inner_boundary = 0.0;
  double outer_flux = 0.0;
  double defect = 0.0;
};

namespace detail {

struct CartesianJet {
  std::array<Mat2, 4> A{};                // w1, w2, x, y
  std::array<std::array<Mat2, 4>, 4> dA;  // dA[mu][nu] = d_mu A_nu
  std::array<Mat2, 4> polar{};            // r, t, x, y orthonormal values
};

inline CartesianJet fourier_jet(const FourierField& f, double r, double th, double x, double y) {
  std::array<Mat2, 4> v, dr, dth, dx, dy;
  for (int i = 0; i < 4; ++i) v[i] = dr[i] = dth[i] = dx[i] = dy[i] = Mat2::Zero();
  const double kx = kTwoPi / f.torus.period_x, ky = kTwoPi / f.torus.period_y;
  for (const auto& t : f.terms) {
    const Mat2 M = su2::from_vector(t.su2);
    const double P = poly_eval(t.radial, r), dP = poly_deriv(t.radial, r);
    const double ph = t.k * th + t.n * kx * x + t.m * ky * y + t.phase;
    const double c = std::cos(ph), s = std::sin(ph);
    v[t.component] += (P * c) * M;
    dr[t.component] += (dP * c) * M;
    dth[t.component] += (-P * s * t.k) * M;
    dx[t.component] += (-P * s * t.n * kx) * M;
    dy[t.component] += (-P * s * t.m * ky) * M;
  }
  const double co = std::cos(th), si = std::sin(th);
  CartesianJet J;
  J.polar = v;
  J.A[0] = co * v[0] - si * v[1];
  J.A[1] = si * v[0] + co * v[1];
  J.A[2] = v[2];
  J.A[3] = v[3];
  // polar partials of Cartesian components
  std::array<Mat2, 4> Ar, Ath, Ax, Ay;
  Ar[0] = co * dr[0] - si * dr[1];
  Ar[1] = si * dr[0] + co * dr[1];
  Ath[0] = co * dth[0] - si * v[0] - si * dth[1] - co * v[1];
  Ath[1] = si * dth[0] + co * v[0] + co * dth[1] - si * v[1];
  Ax[0] = co * dx[0] - si * dx[1];
  Ax[1] = si * dx[0] + co * dx[1];
  Ay[0] = co * dy[0] - si * dy[1];
  Ay[1] = si * dy[0] + co * dy[1];
  for (int i = 2; i < 4; ++i) {
    Ar[i] = dr[i];
    Ath[i] = dth[i];
    Ax[i] = dx[i];
    Ay[i] = dy[i];
  }
  for (int nu = 0; nu < 4; ++nu) {
    J.dA[0][nu] = co * Ar[nu] - (si / r) * Ath[nu];
    J.dA[1][nu] = si * Ar[nu] + (co / r) * Ath[nu];
    J.dA[2][nu] = Ax[nu];
    J.dA[3][nu] = Ay[nu];
  }
  return J;
}

}  // namespace detail

/// ||d*a||^2 + ||d a||^2 - ||nabla a||^2 + int_{r=R} |a_t|^2 - (outer flux at R'),
/// all with respect to the flat diagonal connection Gamma; zero by the
/// Weitzenbock formula and integration by parts.
inline WeitzenbockResult weitzenbock_defect(const FourierField& f, const DiagonalFlat& gamma,
                                            const WeitzenbockOptions& o = {}) {
  f.validate();
  int kmax = 0, nmax = 0, mmax = 0;
  for (const auto& t : f.terms) {
    kmax = std::max(kmax, std::abs(t.k));
    nmax = std::max(nmax, std::abs(t.n));
    mmax = std::max(mmax, std::abs(t.m));
  }
  const int nth = o.n_theta > 0 ? o.n_theta : 4 * (kmax + 2);
  const int nx = o.n_x > 0 ? o.n_x : 4 * (nmax + 1);
  const int ny = o.n_y > 0 ? o.n_y : 4 * (mmax + 1);
  const double Lx = f.torus.period_x, Ly = f.torus.period_y;
  const double cell = (kTwoPi / nth) * (Lx / nx) * (Ly / ny);

  // boundary condition: the dr component vanishes on r = R
  double a_scale = 0.0, a_r_at_R = 0.0;
  for (int it = 0; it < nth; ++it)
    for (int ix = 0; ix < nx; ++ix)
      for (int iy = 0; iy < ny; ++iy) {
        const auto J = detail::fourier_jet(f, f.R, kTwoPi * it / nth, Lx * ix / nx, Ly * iy / ny);
        a_r_at_R = std::max(a_r_at_R, J.polar[0].norm());
        for (const auto& m : J.polar) a_scale = std::max(a_scale, m.norm());
      }
  if (a_r_at_R > 1e-12 * (1.0 + a_scale))
    throw PreconditionError("weitzenbock_defect: boundary condition violated, |a_r| at r = R is " +
                            std::to_string(a_r_at_R));

  const std::array<Mat2, 4> G{Mat2::Zero(), Mat2::Zero(), su2::idiag(gamma.c1),
                              su2::idiag(gamma.c2)};
  auto covariant = [&](const detail::CartesianJet& J) {
    std::array<std::array<Mat2, 4>, 4> N;
    for (int mu = 0; mu < 4; ++mu)
      for (int nu = 0; nu < 4; ++nu) N[mu][nu] = J.dA[mu][nu] + su2::commutator(G[mu], J.A[nu]);
    return N;
  };

  std::vector<double> rn, rw;
  gauss_legendre(o.n_gauss, f.R, f.R_outer, rn, rw);
  WeitzenbockResult res;
  std::vector<std::array<double, 3>> slab(rn.size());
  parallel_for(rn.size(), [&](std::size_t ir) {
    const double r = rn[ir];
    double ds = 0.0, d = 0.0, nab = 0.0;
    for (int it = 0; it < nth; ++it)
      for (int ix = 0; ix < nx; ++ix)
        for (int iy = 0; iy < ny; ++iy) {
          const auto J = detail::fourier_jet(f, r, kTwoPi * it / nth, Lx * ix / nx, Ly * iy / ny);
          const auto N = covariant(J);
          Mat2 div = Mat2::Zero();
          for (int mu = 0; mu < 4; ++mu) {
            div += N[mu][mu];
            for (int nu = 0; nu < 4; ++nu) {
              nab += N[mu][nu].squaredNorm();
              if (nu > mu) d += (N[mu][nu] - N[nu][mu]).squaredNorm();
            }
          }
          ds += div.squaredNorm();
        }
    slab[ir] = {ds * rw[ir] * r * cell, d * rw[ir] * r * cell, nab * rw[ir] * r * cell};
  });
  for (const auto& s : slab) {
    res.d_star_sq += s[0];
    res.d_sq += s[1];
    res.nabla_sq += s[2];
  }
  for (int it = 0; it < nth; ++it)
    for (int ix = 0; ix < nx; ++ix)
      for (int iy = 0; iy < ny; ++iy) {
        const double th = kTwoPi * it / nth, x = Lx * ix / nx, y = Ly * iy / ny;
        const auto Ji = detail::fourier_jet(f, f.R, th, x, y);
        res.inner_boundary += Ji.polar[1].squaredNorm() * cell;
        // V_r = <a_r, div a> - sum_mu <a_mu, (nabla_mu a)(e_r)> at R'
        const auto Jo = detail::fourier_jet(f, f.R_outer, th, x, y);
        const auto N = covariant(Jo);
        const double co = std::cos(th), si = std::sin(th);
        const Mat2 ar = co * Jo.A[0] + si * Jo.A[1];
        Mat2 div = Mat2::Zero();
        for (int mu = 0; mu < 4; ++mu) div += N[mu][mu];
        double V = (ar.conjugate().cwiseProduct(div)).real().sum();
        for (int mu = 0; mu < 4; ++mu) {
          const Mat2 nr = co * N[mu][0] + si * N[mu][1];
          V -= (Jo.A[mu].conjugate().cwiseProduct(nr)).real().sum();
        }
        res.outer_flux += V * f.R_outer * cell;
      }
  res.defect = res.d_star_sq + res.d_sq - res.nabla_sq + res.inner_boundary - res.outer_flux;
  return res;
}

}  // namespace ipl
