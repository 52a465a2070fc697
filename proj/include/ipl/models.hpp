#pragma once

// Exact model solutions and decaying perturbations.
//
// Semisimple: B = d + i alpha sigma3 dtheta, psi = sigma3 (lambda + mu / w) dw,
// lifted to A = d + i sigma3 (lambda1 + (mu1 cos + mu2 sin)/r) dx
//                + i sigma3 (lambda2 + (mu2 cos - mu1 sin)/r) dy + i alpha sigma3 dtheta
// with lambda = (lambda1 + i lambda2)/2 and mu = (mu1 + i mu2)/2.
// Nilpotent: B = d + i diag(-1, 1) dtheta / ln r^2, psi = N dw / (w ln r^2).

#include "ipl/hitchin.hpp"

#include <random>

namespace ipl {

enum class ModelKind { semisimple, nilpotent };

inline std::string to_string(ModelKind k) {
  return k == ModelKind::semisimple ? "semisimple" : "nilpotent";
}

struct ModelParams {
  Complex lambda{0.0, 0.0};
  Complex mu{0.0, 0.0};
  double alpha = 0.0;
  ModelKind kind = ModelKind::semisimple;

  void validate() const {
    if (!(alpha >= -0.5 && alpha < 0.5)) throw PreconditionError("alpha must lie in [-1/2, 1/2)");
    if (!std::isfinite(lambda.real()) || !std::isfinite(lambda.imag()) ||
        !std::isfinite(mu.real()) || !std::isfinite(mu.imag()))
      throw PreconditionError("model parameters must be finite");
    if (kind == ModelKind::nilpotent && (lambda != Complex{} || mu != Complex{} || alpha != 0.0))
      throw PreconditionError("nilpotent models require lambda = mu = alpha = 0");
  }
};

inline Mat2 nilpotent_N() {
  Mat2 n = Mat2::Zero();
  n(0, 1) = 1.0;
  return n;
}

/// Exact Higgs pair: superposition of the constant and residue solutions, or
/// the nilpotent solution.
inline HiggsPairOnPlane hitchin_model(const ModelParams& p, double r0 = 1.0) {
  p.validate();
  if (p.kind == ModelKind::nilpotent) {
    auto value = [](double r, double th) {
      const double L = 2.0 * std::log(r);
      PairValue v;
      v.b_theta = su2::idiag(-1.0 / L);
      v.psi = nilpotent_N() * (std::polar(1.0, -th) / (r * L));
      return v;
    };
    auto jet = [value](double r, double th) {
      const double L = 2.0 * std::log(r);
      PairJet j;
      j.value = value(r, th);
      j.d[0].b_theta = su2::idiag(2.0 / (r * L * L));
      j.d[0].psi = nilpotent_N() * (-std::polar(1.0, -th) * (L + 2.0) / (r * r * L * L));
      j.d[1].psi = -kI * j.value.psi;
      return j;
    };
    return HiggsPairOnPlane(value, jet,
                            RadialDomain{std::max(1.0, r0), std::numeric_limits<double>::infinity(),
                                         true},
                            "nilpotent");
  }
  const Complex lam = p.lambda, mu = p.mu;
  const double alpha = p.alpha;
  auto value = [lam, mu, alpha](double r, double th) {
    PairValue v;
    v.b_theta = su2::idiag(alpha);
    v.psi = su2::pauli_z() * (lam + mu * std::polar(1.0 / r, -th));
    return v;
  };
  auto jet = [value, mu](double r, double th) {
    PairJet j;
    j.value = value(r, th);
    const Complex e = mu * std::polar(1.0 / r, -th);
    j.d[0].psi = su2::pauli_z() * (-e / r);
    j.d[1].psi = su2::pauli_z() * (-kI * e);
    return j;
  };
  return HiggsPairOnPlane(value, jet,
                          RadialDomain{r0, std::numeric_limits<double>::infinity(), r0 == 0.0},
                          "semisimple");
}

/// Diagonal semisimple model on r >= r0, defined as the lift of hitchin_model.
inline ConnectionSource semisimple_model(const ModelParams& p, double r0 = 1.0,
                                         const TorusSpec& t = {}) {
  p.validate();
  if (p.kind != ModelKind::semisimple)
    throw PreconditionError("semisimple_model: nilpotent kind passed");
  if (!(r0 > 0.0)) throw PreconditionError("semisimple_model: r0 must exclude the pole at w = 0");
  return lift(hitchin_model(p, r0), t);
}

/// Nilpotent model on r > max(1, r0).
inline ConnectionSource nilpotent_model(double r0 = 1.0, const TorusSpec& t = {}) {
  ModelParams p;
  p.kind = ModelKind::nilpotent;
  return lift(hitchin_model(p, r0), t);
}

/// The nilpotent model conjugated by diag(e^{-i pi/4}, e^{i pi/4}); its
/// off-diagonal part is (1/(r ln r^2)) [[0, e^{-i theta}(dx - i dy)],
/// [-e^{i theta}(dx + i dy), 0]].
inline ConnectionSource nilpotent_model_printed_gauge(double r0 = 1.0, const TorusSpec& t = {}) {
  Mat2 g = Mat2::Zero();
  g(0, 0) = std::polar(1.0, -kPi / 4);
  g(1, 1) = std::polar(1.0, kPi / 4);
  return conjugate(nilpotent_model(r0, t), g);
}

/// Pullback of the semisimple model under theta -> -theta. It is self-dual
/// rather than anti-self-dual when mu != 0 and serves as an orientation check.
inline ConnectionSource theta_reflected_model(const ModelParams& p, double r0 = 1.0,
                                              const TorusSpec& t = {}) {
  p.validate();
  const double l1 = 2 * p.lambda.real(), l2 = 2 * p.lambda.imag();
  const double m1 = 2 * p.mu.real(), m2 = 2 * p.mu.imag();
  const double alpha = p.alpha;
  auto fx = [=](double r, double th) { return l1 + (m1 * std::cos(th) - m2 * std::sin(th)) / r; };
  auto fy = [=](double r, double th) { return l2 + (m1 * std::sin(th) + m2 * std::cos(th)) / r; };
  auto value = [=](const Point& q) {
    Components c;
    c[kX] = su2::idiag(fx(q.r, q.theta));
    c[kY] = su2::idiag(fy(q.r, q.theta));
    c[kTheta] = su2::idiag(alpha);
    return c;
  };
  auto jet = [=](const Point& q) {
    Jet j;
    j.value = value(q);
    const double r = q.r, co = std::cos(q.theta), si = std::sin(q.theta);
    j.d[kR][kX] = su2::idiag(-(m1 * co - m2 * si) / (r * r));
    j.d[kR][kY] = su2::idiag(-(m1 * si + m2 * co) / (r * r));
    j.d[kTheta][kX] = su2::idiag((-m1 * si - m2 * co) / r);
    j.d[kTheta][kY] = su2::idiag((m1 * co - m2 * si) / r);
    return j;
  };
  return ConnectionSource(value, jet, RadialDomain{r0, std::numeric_limits<double>::infinity()},
                          t, "theta-reflected");
}

// ---------------------------------------------------------------------------
// Perturbations with |a| <= amp r^{-(1+delta)} and |grad a| = O(r^{-(2+delta)}).

struct PerturbationTerm {
  int component = 0;  // orthonormal: 0 = dr, 1 = r dtheta, 2 = dx, 3 = dy
  Eigen::Vector3d su2 = Eigen::Vector3d::Zero();
  int k = 0;
  int n = 0;
  int m = 0;
  double phase = 0.0;
  int extra_decay = 0;  // 0: r^{-(1+delta)}, 1: r^{-(2+delta)}
};

struct PerturbationField {
  double delta = 0.5;
  double amplitude = 0.0;
  double r_on = 1.0;
  TorusSpec torus{};
  std::vector<PerturbationTerm> terms;

  /// Smooth step, 0 for r <= r_on and 1 for r >= 2 r_on; returns (s, s').
  std::pair<double, double> turn_on(double r) const {
    const double t = (r - r_on) / r_on;
    if (t <= 0.0) return {0.0, 0.0};
    if (t >= 1.0) return {1.0, 0.0};
    const double g0 = std::exp(-1.0 / t), g1 = std::exp(-1.0 / (1.0 - t));
    const double dg0 = g0 / (t * t), dg1 = g1 / ((1.0 - t) * (1.0 - t));
    const double den = g0 + g1;
    return {g0 / den, (dg0 * g1 + g0 * dg1) / (den * den) / r_on};
  }

  Jet jet(const Point& p) const {
    Jet j;
    const auto [s, ds] = turn_on(p.r);
    if (s == 0.0 && ds == 0.0) return j;
    const double kx = kTwoPi / torus.period_x, ky = kTwoPi / torus.period_y;
    for (const auto& t : terms) {
      const double e = 1.0 + delta + t.extra_decay;
      const double pw = std::pow(p.r, -e);
      double R = amplitude * s * pw;
      double dR = amplitude * (ds * pw - e * s * pw / p.r);
      if (t.component == 1) {  // coordinate dtheta component carries a factor r
        dR = R + p.r * dR;
        R *= p.r;
      }
      const double ph = t.k * p.theta + t.n * kx * p.x + t.m * ky * p.y + t.phase;
      const double c = std::cos(ph), sn = std::sin(ph);
      const Mat2 M = su2::from_vector(t.su2);
      const int comp = t.component;
      j.value[comp] += (R * c) * M;
      j.d[kR][comp] += (dR * c) * M;
      j.d[kTheta][comp] += (-R * sn * t.k) * M;
      j.d[kX][comp] += (-R * sn * t.n * kx) * M;
      j.d[kY][comp] += (-R * sn * t.m * ky) * M;
    }
    return j;
  }
};

inline PerturbationField make_perturbation(double delta, double amplitude, std::uint64_t seed,
                                           double r_on, const TorusSpec& t) {
  if (!(delta > 0.0)) throw PreconditionError("perturb: delta must be positive");
  if (!(amplitude >= 0.0)) throw PreconditionError("perturb: amplitude must be nonnegative");
  if (!(r_on > 0.0)) throw PreconditionError("perturb: turn-on radius must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  PerturbationField f;
  f.delta = delta;
  f.amplitude = amplitude;
  f.r_on = r_on;
  f.torus = t;
  static constexpr int torus_modes[3][2] = {{1, 0}, {0, 1}, {1, -1}};
  for (int comp = 0; comp < 4; ++comp) {
    for (int k = 0; k < 3; ++k) {
      PerturbationTerm term;
      term.component = comp;
      term.su2 = Eigen::Vector3d(U(rng), U(rng), U(rng));
      term.k = k;
      term.phase = kPi * U(rng);
      f.terms.push_back(term);
    }
    for (const auto& nm : torus_modes) {
      PerturbationTerm term;
      term.component = comp;
      term.su2 = Eigen::Vector3d(U(rng), U(rng), U(rng));
      term.k = static_cast<int>(rng() % 2);
      term.n = nm[0];
      term.m = nm[1];
      term.phase = kPi * U(rng);
      term.extra_decay = 1;
      f.terms.push_back(term);
    }
  }
  // sum of Frobenius norms of the coefficients is 1, and r^{-(2+delta)} <= r^{-(1+delta)}
  // once the field is switched on (r >= r_on >= 1)
  double total = 0.0;
  for (const auto& term : f.terms) total += su2::from_vector(term.su2).norm();
  for (auto& term : f.terms) term.su2 /= total;
  return f;
}

/// Adds a seeded smooth su(2) field with |a| <= amplitude r^{-(1+delta)},
/// switched on smoothly over [r_on, 2 r_on] (r_on >= 1).
inline ConnectionSource perturb(const ConnectionSource& c, double delta, double amplitude,
                                std::uint64_t seed, double r_on = 0.0) {
  const double on = std::max({1.0, r_on, c.domain().r_min});
  const PerturbationField f = make_perturbation(delta, amplitude, seed, on, c.torus());
  if (amplitude == 0.0) return c;
  ConnectionSource field([f](const Point& p) { return f.jet(p).value; },
                         [f](const Point& p) { return f.jet(p); }, c.domain(), c.torus(),
                         "perturbation");
  return add_field(c, field, c.label() + "+perturbation");
}

}  // namespace ipl
