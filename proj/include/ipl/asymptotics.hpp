#pragma once

// Asymptotic invariants read off from holonomies on large rings: the flat
// limit Gamma and asymptotic state xi0, the limiting holonomy alpha and the
// residue mu, plus decay fits, the instanton number and the splitting of
// End(E) on one torus into ker nabla_Gamma and its complement.
//
// All holonomies of one extraction are pulled back to a single base fiber and
// their phases are signed against one reference axis, so the three invariants
// come out with a consistent overall sign. That sign is the Weyl ambiguity
// (xi0, mu, alpha) -> (-xi0, -mu, -alpha) and is fixed by `canonicalize`.

#include "ipl/gauge.hpp"
#include "ipl/models.hpp"

#include <limits>
#include <optional>

namespace ipl {

// ---------------------------------------------------------------------------
// Parameter conventions

/// xi of the flat line i(c1 dx + c2 dy) with c = 2 lambda (upper eigenline of
/// i sigma3 (lambda1 dx + lambda2 dy)).
inline std::array<double, 2> xi_of_lambda(Complex lambda, const TorusSpec& t = {}) {
  return {2.0 * lambda.real() * t.period_x / kTwoPi, 2.0 * lambda.imag() * t.period_y / kTwoPi};
}

inline Complex lambda_of_xi(double xi1, double xi2, const TorusSpec& t = {}) {
  return {kPi * xi1 / t.period_x, kPi * xi2 / t.period_y};
}

struct CanonicalParams {
  DualTorusPoint xi0;
  Complex lambda{0.0, 0.0};  // representative with xi in [-1/2, 1/2)^2
  Complex mu{0.0, 0.0};
  double alpha = 0.0;
  bool flipped = false;
  bool order_two = false;
};

/// Fixes the Weyl sign: the first of xi1, xi2 not in {0, 1/2} must lie in
/// (0, 1/2); otherwise Re mu > 0 (or Re mu = 0 < Im mu); otherwise alpha >= 0.
inline CanonicalParams canonicalize(double xi1, double xi2, Complex mu, double alpha,
                                    const TorusSpec& t = {}, double tol = 1e-3) {
  const double a = wrap_unit(xi1), b = wrap_unit(xi2);
  auto side = [tol](double v) {
    if (v <= tol || v >= 1.0 - tol || std::abs(v - 0.5) <= tol) return 0;
    return v < 0.5 ? 1 : -1;
  };
  int s = side(a);
  if (s == 0) s = side(b);
  if (s == 0 && std::abs(mu) > tol) {
    if (std::abs(mu.real()) > tol) s = mu.real() > 0.0 ? 1 : -1;
    else s = mu.imag() > 0.0 ? 1 : -1;
  }
  if (s == 0) s = alpha >= 0.0 ? 1 : -1;

  CanonicalParams c;
  c.flipped = s < 0;
  const double sa = c.flipped ? wrap_unit(-a) : a;
  const double sb = c.flipped ? wrap_unit(-b) : b;
  c.xi0 = reduce_dual(sa, sb, t);
  c.mu = c.flipped ? -mu : mu;
  c.alpha = wrap_unit(c.flipped ? -alpha : alpha, -0.5);
  c.lambda = lambda_of_xi(wrap_unit(sa, -0.5), wrap_unit(sb, -0.5), t);
  c.order_two = is_order_two(c.xi0, tol);
  return c;
}

inline CanonicalParams canonicalize(const ModelParams& p, const TorusSpec& t = {},
                                    double tol = 1e-3) {
  const auto xi = xi_of_lambda(p.lambda, t);
  return canonicalize(xi[0], xi[1], p.mu, p.alpha, t, tol);
}

// ---------------------------------------------------------------------------
// Extrapolation over rings

struct Extrapolation {
  double value = 0.0;
  double exponent = 0.0;
  double residual = 0.0;
};

/// Fits v(r) = v_inf + c1 r^-p (+ c2 r^-2p with six or more rings) with p
/// scanned on [0.25, 3]. Falls back to the outermost value when the fit
/// leaves the range of the data by more than its spread.
inline Extrapolation extrapolate(const std::vector<double>& r, const std::vector<double>& v) {
  if (r.size() != v.size() || r.size() < 2)
    throw PreconditionError("extrapolate: need matching samples on at least two rings");
  const int n = static_cast<int>(r.size());
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  double scale = 1.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  const double spread = *hi - *lo;
  if (spread <= 1e-14 * scale) {
    double mean = v[0];
    for (int i = 1; i < n; ++i) mean += (v[i] - v[0]) / n;
    return {mean, 0.0, 0.0};
  }
  const int terms = n >= 6 ? 3 : 2;
  Extrapolation best{v.back(), 0.0, std::numeric_limits<double>::infinity()};
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = v[i];
  for (int step = 0; step <= 55; ++step) {
    const double p = 0.25 + 0.05 * step;
    Eigen::MatrixXd A(n, terms);
    for (int i = 0; i < n; ++i) {
      const double x = std::pow(r[i] / r.front(), -p);
      A(i, 0) = 1.0;
      A(i, 1) = x;
      if (terms == 3) A(i, 2) = x * x;
    }
    const Eigen::VectorXd c = A.colPivHouseholderQr().solve(y);
    const double res = (A * c - y).norm();
    if (res < best.residual) best = {c[0], p, res};
  }
  if (std::abs(best.value - v.back()) > spread) best.value = v.back();
  return best;
}

// ---------------------------------------------------------------------------
// Ring scans

inline std::vector<double> default_rings() {
  std::vector<double> r;
  for (int i = 0; i < 8; ++i) r.push_back(100.0 * std::pow(1000.0, i / 7.0));
  return r;
}

struct AsymptoticOptions {
  std::vector<double> rings = default_rings();
  int n_theta = 16;
  int n_transverse = 2;
  double x0 = 0.0;
  double y0 = 0.0;
  int loop_steps = 64;
  int transport_steps = 256;
  double drift_tol = 1e-2;     // on the last-ring change of (lambda1, lambda2)
  double fit_tol = 0.02;       // on max r |zeta(w) - lambda - mu / w|
  double canonical_tol = 1e-3;
  double nilpotent_alpha_max = 0.1;
  bool compute_k = true;
};

struct RingData {
  double r = 0.0;
  std::vector<double> theta;
  std::vector<double> phase_x, phase_y;  // signed against the axis, unwrapped
  std::vector<double> mag_x, mag_y;      // unsigned, in [0, pi]
  double phase_theta = 0.0;
  double mag_theta = 0.0;
};

struct RingScan {
  TorusSpec torus;
  Eigen::Vector3d axis{0.0, 0.0, 1.0};
  std::vector<RingData> rings;
};

namespace detail {

inline void check_rings(const ConnectionSource& c, const std::vector<double>& rings,
                        std::size_t min_count) {
  if (rings.size() < min_count)
    throw PreconditionError("need at least " + std::to_string(min_count) + " rings");
  for (std::size_t i = 0; i < rings.size(); ++i) {
    if (!c.domain().contains(rings[i])) throw DomainError("ring radius outside the domain");
    if (i > 0 && !(rings[i] > rings[i - 1])) throw PreconditionError("rings must increase");
  }
}

inline double signed_phase(const Mat2& g, const Eigen::Vector3d& axis) {
  const auto [q0, q] = quaternion(g);
  const double mag = std::atan2(q.norm(), q0);
  return q.dot(axis) < 0.0 ? -mag : mag;
}

inline void unwrap(std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) v[i] = v[i - 1] + wrap_angle(v[i] - v[i - 1]);
}

inline void shift_towards(std::vector<double>& v, double target) {
  const double d = std::round((target - v.front()) / kTwoPi) * kTwoPi;
  for (auto& x : v) x += d;
}

}  // namespace detail

inline RingScan scan_rings(const ConnectionSource& c, const AsymptoticOptions& o) {
  detail::check_rings(c, o.rings, 4);
  if (o.n_theta < 4 || o.n_transverse < 1 || o.loop_steps < 16 || o.transport_steps < 1)
    throw PreconditionError("scan_rings: bad sampling options");
  const TorusSpec& t = c.torus();
  const int nr = static_cast<int>(o.rings.size()), nt = o.n_theta, nm = o.n_transverse;
  const Point base{o.rings.back(), 0.0, o.x0, o.y0};

  // pulled-back holonomies: [ring][theta][transverse] for x and y, [ring] for theta
  using Block = std::vector<std::vector<Mat2>>;
  std::vector<Block> hx(nr, Block(nt, std::vector<Mat2>(nm))), hy = hx;
  std::vector<Mat2> hth(nr);
  const int arc_steps = std::max(4, o.loop_steps / nt);

  parallel_for(nr, [&](std::size_t j) {
    const double r = o.rings[j];
    const Point ring0{r, 0.0, o.x0, o.y0};
    const Mat2 T = j + 1 == static_cast<std::size_t>(nr)
                       ? Mat2::Identity()
                       : transport(c, radial_path(base, r), o.transport_steps);
    Loop lt;
    lt.kind = LoopKind::theta_circle;
    lt.base = ring0;
    lt.samples = o.loop_steps;
    hth[j] = T.adjoint() * holonomy(c, lt) * T;

    Mat2 S = T;
    Point prev = ring0;
    for (int k = 0; k < nt; ++k) {
      Point p = ring0;
      p.theta = kTwoPi * k / nt;
      if (k > 0) S = transport(c, straight_path(prev, p), arc_steps) * S;
      prev = p;
      Mat2 Uy = S, Ux = S;
      Point py = p, px = p;
      for (int m = 0; m < nm; ++m) {
        Point qy = p, qx = p;
        qy.y = o.y0 + t.period_y * m / nm;
        qx.x = o.x0 + t.period_x * m / nm;
        if (m > 0) {
          Uy = transport(c, straight_path(py, qy), 8) * Uy;
          Ux = transport(c, straight_path(px, qx), 8) * Ux;
        }
        py = qy;
        px = qx;
        Loop l;
        l.samples = o.loop_steps;
        l.kind = LoopKind::x_circle;
        l.base = qy;
        hx[j][k][m] = Uy.adjoint() * holonomy(c, l) * Uy;
        l.kind = LoopKind::y_circle;
        l.base = qx;
        hy[j][k][m] = Ux.adjoint() * holonomy(c, l) * Ux;
      }
    }
  });

  RingScan scan;
  scan.torus = t;
  double best = 0.0;
  auto consider = [&](const Mat2& g) {
    const auto q = quaternion(g).second;
    if (q.norm() > best) {
      best = q.norm();
      scan.axis = q / q.norm();
    }
  };
  for (int j = 0; j < nr; ++j) {
    consider(hth[j]);
    for (int k = 0; k < nt; ++k)
      for (int m = 0; m < nm; ++m) {
        consider(hx[j][k][m]);
        consider(hy[j][k][m]);
      }
  }
  if (best < 1e-14) scan.axis = Eigen::Vector3d(0.0, 0.0, 1.0);
  Eigen::Index imax = 0;
  scan.axis.cwiseAbs().maxCoeff(&imax);
  if (scan.axis[imax] < 0.0) scan.axis = -scan.axis;

  scan.rings.resize(nr);
  for (int j = 0; j < nr; ++j) {
    RingData& d = scan.rings[j];
    d.r = o.rings[j];
    for (int k = 0; k < nt; ++k) {
      d.theta.push_back(kTwoPi * k / nt);
      auto average = [&](const std::vector<Mat2>& hs, std::vector<double>& ph,
                         std::vector<double>& mag) {
        std::vector<double> v;
        double m_sum = 0.0;
        for (const auto& g : hs) {
          v.push_back(detail::signed_phase(g, scan.axis));
          m_sum += su2_phase(g).first;
        }
        detail::unwrap(v);
        double s = 0.0;
        for (double x : v) s += x;
        ph.push_back(s / v.size());
        mag.push_back(m_sum / hs.size());
      };
      average(hx[j][k], d.phase_x, d.mag_x);
      average(hy[j][k], d.phase_y, d.mag_y);
    }
    detail::unwrap(d.phase_x);
    detail::unwrap(d.phase_y);
    d.phase_theta = detail::signed_phase(hth[j], scan.axis);
    d.mag_theta = su2_phase(hth[j]).first;
  }
  for (int j = nr - 2; j >= 0; --j) {
    detail::shift_towards(scan.rings[j].phase_x, scan.rings[j + 1].phase_x.front());
    detail::shift_towards(scan.rings[j].phase_y, scan.rings[j + 1].phase_y.front());
    auto& th = scan.rings[j].phase_theta;
    th += std::round((scan.rings[j + 1].phase_theta - th) / kTwoPi) * kTwoPi;
  }
  return scan;
}

/// zeta-type value (c1 + i c2) / 2 at one sample, c_j = phase_j / L_j.
inline Complex ring_value(const RingScan& s, std::size_t ring, std::size_t k) {
  const auto& d = s.rings[ring];
  return 0.5 * Complex(d.phase_x[k] / s.torus.period_x, d.phase_y[k] / s.torus.period_y);
}

// ---------------------------------------------------------------------------
// Flat limit and asymptotic state

struct FlatLimit {
  TorusSpec torus;
  double lambda1 = 0.0;  // Gamma = i sigma3 (lambda1 dx + lambda2 dy)
  double lambda2 = 0.0;
  std::vector<double> rings;
  std::vector<double> ring_lambda1, ring_lambda2;
  /// Upper monodromy eigenvalue exp(-i L c) per ring (theta and transverse average).
  std::vector<Complex> eigen_x, eigen_y;
  double drift = 0.0;

  Complex lambda() const { return {0.5 * lambda1, 0.5 * lambda2}; }
  DiagonalFlat gamma() const { return {lambda1, lambda2}; }
};

inline FlatLimit flat_limit(const RingScan& s, const AsymptoticOptions& o = {}) {
  FlatLimit fl;
  fl.torus = s.torus;
  for (std::size_t j = 0; j < s.rings.size(); ++j) {
    const auto& d = s.rings[j];
    double px = 0.0, py = 0.0;
    for (std::size_t k = 0; k < d.theta.size(); ++k) {
      px += d.phase_x[k];
      py += d.phase_y[k];
    }
    px /= d.theta.size();
    py /= d.theta.size();
    fl.rings.push_back(d.r);
    fl.ring_lambda1.push_back(px / s.torus.period_x);
    fl.ring_lambda2.push_back(py / s.torus.period_y);
    fl.eigen_x.push_back(std::polar(1.0, -px));
    fl.eigen_y.push_back(std::polar(1.0, -py));
  }
  const std::size_t n = fl.rings.size();
  fl.drift = std::hypot(fl.ring_lambda1[n - 1] - fl.ring_lambda1[n - 2],
                        fl.ring_lambda2[n - 1] - fl.ring_lambda2[n - 2]);
  if (!(fl.drift <= o.drift_tol))
    throw NumericalError("flat_limit: torus monodromies do not converge (drift " +
                         std::to_string(fl.drift) + ")");
  fl.lambda1 = extrapolate(fl.rings, fl.ring_lambda1).value;
  fl.lambda2 = extrapolate(fl.rings, fl.ring_lambda2).value;
  return fl;
}

inline FlatLimit flat_limit(const ConnectionSource& c, const AsymptoticOptions& o = {}) {
  return flat_limit(scan_rings(c, o), o);
}

struct AsymptoticState {
  DualTorusPoint xi0;
  bool order_two = false;
};

/// xi0 reduced mod 1 with the first component not in {0, 1/2} taken in (0, 1/2).
inline AsymptoticState asymptotic_states(const FlatLimit& fl, double tol = 1e-9) {
  const auto c = canonicalize(fl.lambda1 * fl.torus.period_x / kTwoPi,
                              fl.lambda2 * fl.torus.period_y / kTwoPi, 0.0, 0.0, fl.torus, tol);
  return {c.xi0, c.order_two};
}

// ---------------------------------------------------------------------------
// Limiting holonomy and residue

struct HolonomyLimit {
  double alpha = 0.0;
  std::vector<double> ring_alpha;
  double spread = 0.0;
  double exponent = 0.0;
  bool collision = false;  // eigenvalues coincide (alpha = 0 or -1/2): no branch to select
};

inline HolonomyLimit limiting_holonomy(const RingScan& s, double tol = 1e-6) {
  HolonomyLimit h;
  std::vector<double> r;
  for (const auto& d : s.rings) {
    r.push_back(d.r);
    h.ring_alpha.push_back(d.phase_theta / kTwoPi);
  }
  const auto [lo, hi] = std::minmax_element(h.ring_alpha.begin(), h.ring_alpha.end());
  h.spread = *hi - *lo;
  const auto e = extrapolate(r, h.ring_alpha);
  h.alpha = wrap_unit(e.value, -0.5);
  h.exponent = e.exponent;
  h.collision = std::abs(h.alpha) <= tol || std::abs(h.alpha + 0.5) <= tol;
  return h;
}

inline double limiting_holonomy(const ConnectionSource& c, const AsymptoticOptions& o = {}) {
  return limiting_holonomy(scan_rings(c, o)).alpha;
}

struct ResidueFit {
  Complex lambda{0.0, 0.0};
  Complex mu{0.0, 0.0};
  std::vector<Complex> ring_lambda, ring_mu;
  double residual = 0.0;  // max r |zeta(w) - lambda - mu / w|
  double exponent = 0.0;
};

inline ResidueFit residue_fit(const RingScan& s) {
  ResidueFit f;
  std::vector<double> r, lr, li, mr, mi;
  for (std::size_t j = 0; j < s.rings.size(); ++j) {
    const auto& d = s.rings[j];
    Complex lam = 0.0, mu = 0.0;
    for (std::size_t k = 0; k < d.theta.size(); ++k) {
      const Complex v = ring_value(s, j, k);
      lam += v;
      mu += v * std::polar(d.r, d.theta[k]);
    }
    lam /= static_cast<double>(d.theta.size());
    mu /= static_cast<double>(d.theta.size());
    f.ring_lambda.push_back(lam);
    f.ring_mu.push_back(mu);
    r.push_back(d.r);
    lr.push_back(lam.real());
    li.push_back(lam.imag());
    mr.push_back(mu.real());
    mi.push_back(mu.imag());
  }
  f.lambda = {extrapolate(r, lr).value, extrapolate(r, li).value};
  const auto er = extrapolate(r, mr), ei = extrapolate(r, mi);
  f.mu = {er.value, ei.value};
  f.exponent = std::min(er.exponent, ei.exponent);
  for (std::size_t j = 0; j < s.rings.size(); ++j) {
    const auto& d = s.rings[j];
    for (std::size_t k = 0; k < d.theta.size(); ++k) {
      const Complex w = std::polar(d.r, d.theta[k]);
      f.residual = std::max(f.residual, d.r * std::abs(ring_value(s, j, k) - f.lambda - f.mu / w));
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Nilpotent detection

struct NilpotentScore {
  bool nilpotent = false;
  double alpha_outer = 0.0;
  double scale_inner = 0.0;  // r ln r max |c - c_flat| on the first and middle ring
  double scale_outer = 0.0;
  double ratio = 0.0;
};

/// Nilpotent regime: theta-holonomy phases shrink towards 1 and
/// r ln r sup |c - c_flat| settles at a nonzero value.
inline NilpotentScore nilpotent_score(const RingScan& s, const FlatLimit& fl,
                                      const AsymptoticOptions& o = {}) {
  NilpotentScore n;
  const auto& in = s.rings.front();
  const auto& out = s.rings.back();
  // the middle ring keeps |c - c_flat| well above the error of the extrapolated flat limit
  const auto& mid = s.rings[(s.rings.size() - 1) / 2];
  bool shrinking = true;
  for (std::size_t j = 1; j < s.rings.size(); ++j)
    if (!(s.rings[j].mag_theta < s.rings[j - 1].mag_theta)) shrinking = false;
  n.alpha_outer = out.mag_theta / kTwoPi;
  const double flat_x = std::abs(wrap_angle(fl.lambda1 * s.torus.period_x));
  const double flat_y = std::abs(wrap_angle(fl.lambda2 * s.torus.period_y));
  auto scale = [&](const RingData& d) {
    double m = 0.0;
    for (std::size_t k = 0; k < d.theta.size(); ++k)
      m = std::max(m, std::abs(d.mag_x[k] - flat_x) / s.torus.period_x +
                          std::abs(d.mag_y[k] - flat_y) / s.torus.period_y);
    return d.r * std::log(d.r) * m;
  };
  n.scale_inner = scale(in);
  n.scale_outer = scale(mid);
  n.ratio = n.scale_inner > 0.0 ? n.scale_outer / n.scale_inner : 0.0;
  n.nilpotent = shrinking && n.alpha_outer < o.nilpotent_alpha_max && n.ratio >= 0.8 &&
                n.ratio <= 1.25 && n.scale_outer > 1e-3;
  return n;
}

/// Fit zeta(w) = lambda + mu / w over all ring samples.
inline ResidueFit residue(const ConnectionSource& c, const AsymptoticOptions& o = {}) {
  const RingScan s = scan_rings(c, o);
  if (nilpotent_score(s, flat_limit(s, o), o).nilpotent)
    throw NumericalError("residue: connection is in the nilpotent regime");
  const auto f = residue_fit(s);
  if (!(f.residual <= o.fit_tol))
    throw NumericalError("residue: fit residual " + std::to_string(f.residual) +
                         " above tolerance (non-semisimple or rings too small)");
  return f;
}

// ---------------------------------------------------------------------------
// Decay and energy

enum class CurvatureParts { all, pure };

struct DecayOptions {
  int n_theta = 8;
  int n_torus = 2;
  bool fit_log_power = true;
  CurvatureParts parts = CurvatureParts::all;
};

struct DecayFit {
  double gamma = 0.0;
  double log_power = 0.0;
  double amplitude = 0.0;
  bool non_monotone = false;
  std::vector<double> rings;
  std::vector<double> sup;
};

/// Largest |F| over a ring (theta and torus samples).
inline double ring_sup_curvature(const ConnectionSource& c, double r, const DecayOptions& o = {}) {
  const TorusSpec& t = c.torus();
  double sup = 0.0;
  for (int k = 0; k < o.n_theta; ++k)
    for (int a = 0; a < o.n_torus; ++a)
      for (int b = 0; b < o.n_torus; ++b) {
        const Point p{r, kTwoPi * k / o.n_theta, t.period_x * a / o.n_torus,
                      t.period_y * b / o.n_torus};
        const auto F = curvature(c, p);
        const double v = o.parts == CurvatureParts::all
                             ? F.norm()
                             : std::sqrt(F.ortho(kX, kY).squaredNorm() +
                                         F.ortho(kR, kTheta).squaredNorm());
        sup = std::max(sup, v);
      }
  return sup;
}

/// Least squares ln sup|F| = a + gamma ln r (+ p ln ln r). A flat input returns
/// gamma = -infinity.
inline DecayFit decay_exponent(const ConnectionSource& c, const std::vector<double>& rings,
                               const DecayOptions& o = {}) {
  detail::check_rings(c, rings, 6);
  if (rings.back() < 10.0 * rings.front())
    throw PreconditionError("decay_exponent: rings must span a decade");
  if (o.fit_log_power && rings.front() <= 1.0)
    throw PreconditionError("decay_exponent: log-power fit needs r > 1");
  DecayFit f;
  f.rings = rings;
  f.sup.resize(rings.size());
  parallel_for(rings.size(), [&](std::size_t j) { f.sup[j] = ring_sup_curvature(c, rings[j], o); });
  bool all_zero = true, any_zero = false;
  for (double s : f.sup) {
    all_zero = all_zero && s == 0.0;
    any_zero = any_zero || s == 0.0;
  }
  if (all_zero) {
    f.gamma = -std::numeric_limits<double>::infinity();
    return f;
  }
  if (any_zero) throw NumericalError("decay_exponent: curvature vanishes on some rings only");
  for (std::size_t j = 1; j < f.sup.size(); ++j)
    if (!(f.sup[j] < f.sup[j - 1])) f.non_monotone = true;
  const int n = static_cast<int>(rings.size()), m = o.fit_log_power ? 3 : 2;
  Eigen::MatrixXd A(n, m);
  Eigen::VectorXd y(n);
  for (int j = 0; j < n; ++j) {
    A(j, 0) = 1.0;
    A(j, 1) = std::log(rings[j]);
    if (m == 3) A(j, 2) = std::log(std::log(rings[j]));
    y[j] = std::log(f.sup[j]);
  }
  const Eigen::VectorXd x = A.colPivHouseholderQr().solve(y);
  f.amplitude = std::exp(x[0]);
  f.gamma = x[1];
  f.log_power = m == 3 ? x[2] : 0.0;
  return f;
}

struct InstantonOptions {
  double r_inner = 0.0;  // 0: domain minimum (twice it for an open domain), or 0 for the plane
  int n_theta = 8;
  int n_torus = 2;
  int gauss = 8;
  double panels_per_decade = 2.0;
  double divergence_eps = 0.05;
};

struct InstantonEstimate {
  double k = 0.0;
  double tail = 0.0;  // extrapolated contribution of r > R
  double decay = 0.0; // local exponent of mean |F| near R
  bool converged = true;
};

/// k = (1 / 8 pi^2) int_{T x {r <= R}} |F|^2 by Gauss quadrature in ln r.
inline InstantonEstimate instanton_number(const ConnectionSource& c, double R,
                                          const InstantonOptions& o = {}) {
  const auto& dom = c.domain();
  double a = o.r_inner;
  if (a == 0.0 && dom.r_min > 0.0) a = dom.min_exclusive ? 2.0 * dom.r_min : dom.r_min;
  if (!(R > a) || !dom.contains(R)) throw PreconditionError("instanton_number: need R in domain above the inner cutoff");
  if (a > 0.0 && !dom.contains(a)) throw DomainError("instanton_number: inner cutoff outside the domain");
  const TorusSpec& t = c.torus();
  const double vol = t.area() * kTwoPi;
  auto mean_sq = [&](double r) {
    double s = 0.0;
    for (int k = 0; k < o.n_theta; ++k)
      for (int i = 0; i < o.n_torus; ++i)
        for (int j = 0; j < o.n_torus; ++j) {
          const Point p{r, kTwoPi * k / o.n_theta, t.period_x * i / o.n_torus,
                        t.period_y * j / o.n_torus};
          const double f = curvature(c, p).norm();
          s += f * f;
        }
    return s / (o.n_theta * o.n_torus * o.n_torus);
  };
  std::vector<double> nodes, weights, rs, ws;
  double lo = a;
  if (a == 0.0) {
    lo = std::min(1.0, R);
    gauss_legendre(o.gauss, 0.0, lo, nodes, weights);
    for (int i = 0; i < o.gauss; ++i) {
      rs.push_back(nodes[i]);
      ws.push_back(weights[i] * nodes[i]);
    }
  }
  if (R > lo) {
    const double span = std::log(R / lo);
    const int panels = std::max(1, static_cast<int>(std::ceil(o.panels_per_decade * span / std::log(10.0))));
    for (int p = 0; p < panels; ++p) {
      gauss_legendre(o.gauss, std::log(lo) + span * p / panels, std::log(lo) + span * (p + 1) / panels,
                     nodes, weights);
      for (int i = 0; i < o.gauss; ++i) {
        const double r = std::exp(nodes[i]);
        rs.push_back(r);
        ws.push_back(weights[i] * r * r);
      }
    }
  }
  std::vector<double> vals(rs.size());
  parallel_for(rs.size(), [&](std::size_t i) { vals[i] = mean_sq(rs[i]); });
  double integral = 0.0;
  for (std::size_t i = 0; i < rs.size(); ++i) integral += ws[i] * vals[i];
  InstantonEstimate e;
  e.k = vol * integral / (8.0 * kPi * kPi);

  const double m1 = mean_sq(0.5 * R), m2 = mean_sq(R);
  if (m2 > 0.0 && m1 > 0.0) {
    e.decay = 0.5 * std::log(m2 / m1) / std::log(2.0);
    if (e.decay > -1.0 - o.divergence_eps)
      throw NumericalError("instanton_number: divergent tail, |F| ~ r^" + std::to_string(e.decay));
    e.tail = vol * m2 * R * R / (-(2.0 * e.decay + 2.0)) / (8.0 * kPi * kPi);
    e.converged = e.tail <= 1e-3 * std::max(e.k, 1e-300);
  } else if (m2 > 0.0 || m1 > 0.0) {
    e.converged = false;
  }
  return e;
}

// ---------------------------------------------------------------------------
// Invariants

struct AsymptoticDiagnostics {
  std::vector<double> rings;
  double flat_drift = 0.0;
  double residue_residual = 0.0;
  double alpha_spread = 0.0;
  bool alpha_collision = false;
  NilpotentScore nilpotent;
  double k_tail = 0.0;
  bool k_converged = true;
  bool weyl_flipped = false;
  bool order_two = false;
  Eigen::Vector3d axis{0.0, 0.0, 1.0};
};

struct AsymptoticInvariants {
  DualTorusPoint xi0;
  Complex lambda{0.0, 0.0};
  double alpha = 0.0;
  Complex mu{0.0, 0.0};
  double k_estimate = 0.0;
  ModelKind kind = ModelKind::semisimple;
  AsymptoticDiagnostics diagnostics;
};

inline AsymptoticInvariants extract_invariants(const ConnectionSource& c,
                                               const AsymptoticOptions& o = {},
                                               const InstantonOptions& ko = {}) {
  const RingScan s = scan_rings(c, o);
  const FlatLimit fl = flat_limit(s, o);
  AsymptoticInvariants inv;
  auto& dg = inv.diagnostics;
  dg.rings = o.rings;
  dg.flat_drift = fl.drift;
  dg.axis = s.axis;
  dg.nilpotent = nilpotent_score(s, fl, o);
  inv.kind = dg.nilpotent.nilpotent ? ModelKind::nilpotent : ModelKind::semisimple;

  double alpha = 0.0;
  Complex mu = 0.0;
  const auto h = limiting_holonomy(s);
  dg.alpha_spread = h.spread;
  const auto rf = residue_fit(s);
  dg.residue_residual = rf.residual;
  if (inv.kind == ModelKind::semisimple) {
    alpha = h.alpha;
    dg.alpha_collision = h.collision;
    mu = rf.mu;
  }
  const auto xi = std::array<double, 2>{fl.lambda1 * s.torus.period_x / kTwoPi,
                                        fl.lambda2 * s.torus.period_y / kTwoPi};
  const auto cp = canonicalize(xi[0], xi[1], mu, alpha, s.torus, o.canonical_tol);
  inv.xi0 = cp.xi0;
  inv.lambda = cp.lambda;
  inv.alpha = inv.kind == ModelKind::nilpotent ? 0.0 : cp.alpha;
  inv.mu = cp.mu;
  dg.weyl_flipped = cp.flipped;
  dg.order_two = cp.order_two;
  if (o.compute_k) {
    const auto k = instanton_number(c, o.rings.back(), ko);
    inv.k_estimate = k.k;
    dg.k_tail = k.tail;
    dg.k_converged = k.converged;
  }
  return inv;
}

// ---------------------------------------------------------------------------
// Splitting on one torus

/// End(E)-valued field on an n_x by n_y torus grid, index ix * n_y + iy.
struct TorusField {
  TorusSpec torus;
  int n_x = 16;
  int n_y = 16;
  std::vector<Mat2> values;

  Mat2& at(int ix, int iy) { return values[static_cast<std::size_t>(ix) * n_y + iy]; }
  const Mat2& at(int ix, int iy) const { return values[static_cast<std::size_t>(ix) * n_y + iy]; }
  double x(int ix) const { return torus.period_x * ix / n_x; }
  double y(int iy) const { return torus.period_y * iy / n_y; }
  void validate() const {
    torus.validate();
    if (n_x < 2 || n_y < 2 || values.size() != static_cast<std::size_t>(n_x) * n_y)
      throw PreconditionError("TorusField: inconsistent grid");
  }
};

inline TorusField make_torus_field(const TorusSpec& t, int n_x, int n_y,
                                   const std::function<Mat2(double, double)>& f) {
  TorusField u{t, n_x, n_y, {}};
  u.values.resize(static_cast<std::size_t>(n_x) * n_y);
  for (int i = 0; i < n_x; ++i)
    for (int j = 0; j < n_y; ++j) u.at(i, j) = f(u.x(i), u.y(j));
  return u;
}

/// L2 pairing Re int tr(a^dag b) by the periodic trapezoid rule.
inline double l2_inner(const TorusField& a, const TorusField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    s += (a.values[i].adjoint() * b.values[i]).trace().real();
  return s * a.torus.area() / a.values.size();
}

struct PerpSplit {
  TorusField kernel;
  TorusField perp;
};

namespace detail {

/// Mean of a series, exact for constant input.
inline Complex shifted_mean(const std::vector<Complex>& v) {
  Complex m = v.front();
  for (std::size_t i = 1; i < v.size(); ++i) m += (v[i] - v.front()) / static_cast<double>(v.size());
  return m;
}

}  // namespace detail

/// Splits u into its projection on ker nabla_Gamma (constant diagonal part, and
/// twisted constant off-diagonal part when 2 xi is integral) and the rest.
inline PerpSplit perp_decompose(const TorusField& u, const DiagonalFlat& g, double tol = 1e-9) {
  u.validate();
  const TorusSpec& t = u.torus;
  const double n1 = 2.0 * g.c1 * t.period_x / kTwoPi, n2 = 2.0 * g.c2 * t.period_y / kTwoPi;
  const bool twisted_kernel = std::abs(n1 - std::round(n1)) <= tol && std::abs(n2 - std::round(n2)) <= tol;
  const std::size_t N = u.values.size();
  std::vector<Complex> d0(N), d1(N), o12(N), o21(N);
  std::vector<Complex> mode(N);
  for (int i = 0; i < u.n_x; ++i)
    for (int j = 0; j < u.n_y; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * u.n_y + j;
      // e^{-2 i (c1 x + c2 y)}, written with the integral winding to keep it periodic on the grid
      mode[k] = twisted_kernel
                    ? std::polar(1.0, -kTwoPi * (std::round(n1) * i / u.n_x + std::round(n2) * j / u.n_y))
                    : Complex(1.0);
      const Mat2& m = u.values[k];
      d0[k] = m(0, 0);
      d1[k] = m(1, 1);
      o12[k] = m(0, 1) * std::conj(mode[k]);
      o21[k] = m(1, 0) * mode[k];
    }
  const Complex a0 = detail::shifted_mean(d0), a1 = detail::shifted_mean(d1);
  const Complex b12 = twisted_kernel ? detail::shifted_mean(o12) : Complex(0.0);
  const Complex b21 = twisted_kernel ? detail::shifted_mean(o21) : Complex(0.0);
  PerpSplit s{u, u};
  for (std::size_t k = 0; k < N; ++k) {
    Mat2 m;
    m << a0, b12 * mode[k], b21 * std::conj(mode[k]), a1;
    s.kernel.values[k] = m;
    s.perp.values[k] = u.values[k] - m;
  }
  return s;
}

inline PerpSplit perp_decompose(const TorusField& u, const FlatLimit& fl, double tol = 1e-9) {
  return perp_decompose(u, fl.gamma(), tol);
}

/// Smallest eigenvalue of nabla_Gamma^* nabla_Gamma on (ker nabla_Gamma)^perp over
/// Fourier modes with |n|, |m| <= N: |k|^2 on the diagonal, |k +- 2c|^2 off it.
inline double poincare_constant(const DiagonalFlat& g, const TorusSpec& t, int N) {
  if (N < 4) throw PreconditionError("poincare_constant: cutoff must be >= 4");
  t.validate();
  double best = std::numeric_limits<double>::infinity();
  const double zero = 1e-12;
  for (int n = -N; n <= N; ++n)
    for (int m = -N; m <= N; ++m) {
      const double kx = kTwoPi * n / t.period_x, ky = kTwoPi * m / t.period_y;
      const double diag = kx * kx + ky * ky;
      if (diag > zero) best = std::min(best, diag);
      for (double s : {1.0, -1.0}) {
        const double ex = kx + s * 2.0 * g.c1, ey = ky + s * 2.0 * g.c2;
        const double off = ex * ex + ey * ey;
        if (off > zero) best = std::min(best, off);
      }
    }
  return best;
}

inline double poincare_constant(const FlatLimit& fl, int N) {
  return poincare_constant(fl.gamma(), fl.torus, N);
}

}  // namespace ipl
