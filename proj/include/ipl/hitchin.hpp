#pragma once

// Dimensional reduction between torus-invariant connections and Higgs pairs
// (B, psi) on the plane, psi = psi_w dw.
//
// Identification: a_x = i (psi_w + psi_w^dag), a_y = psi_w - psi_w^dag, so
// psi_w = (a_x + i a_y) / (2i). With it
//   |F+|^2 = (1/2) |F_B + [psi, psi*]|^2 + 8 |dbar_B psi|^2,
// where the first norm is of the dw1 ^ dw2 coefficient and the second of the
// dwbar ^ dw coefficient.

#include "ipl/gauge.hpp"

namespace ipl {

inline constexpr double kEquivalenceCurvature = 0.5;
inline constexpr double kEquivalenceDbar = 8.0;

struct PairValue {
  Mat2 b_r = Mat2::Zero();
  Mat2 b_theta = Mat2::Zero();
  Mat2 psi = Mat2::Zero();

  PairValue& operator+=(const PairValue& o) {
    b_r += o.b_r;
    b_theta += o.b_theta;
    psi += o.psi;
    return *this;
  }
  friend PairValue operator*(double s, PairValue v) {
    v.b_r *= s;
    v.b_theta *= s;
    v.psi *= s;
    return v;
  }
};

/// Value with partials d[0] = d/dr, d[1] = d/dtheta.
struct PairJet {
  PairValue value;
  std::array<PairValue, 2> d;
};

class HiggsPairOnPlane {
 public:
  using EvalFn = std::function<PairValue(double, double)>;
  using JetFn = std::function<PairJet(double, double)>;

  HiggsPairOnPlane() = default;
  HiggsPairOnPlane(EvalFn eval, JetFn jet, RadialDomain domain, std::string label = {})
      : eval_(std::move(eval)), jet_(std::move(jet)), domain_(domain), label_(std::move(label)) {}

  PairValue value(double r, double theta) const {
    check(r);
    return eval_(r, theta);
  }

  bool has_jet() const { return static_cast<bool>(jet_); }

  /// Analytic jet when available, otherwise Richardson-extrapolated differences.
  PairJet jet(double r, double theta) const {
    check(r);
    if (jet_) return jet_(r, theta);
    PairJet j;
    j.value = eval_(r, theta);
    Point p{r, theta, 0.0, 0.0};
    auto f = [this](const Point& q) { return value(q.r, q.theta); };
    const double hr = 0.01 * r;
    if (!domain_.contains(r - 2 * hr)) throw DomainError("finite-difference stencil leaves domain");
    j.d[0] = detail::richardson_derivative(f, p, kR, hr);
    j.d[1] = detail::richardson_derivative(f, p, kTheta, 0.02);
    return j;
  }

  const RadialDomain& domain() const { return domain_; }
  const std::string& label() const { return label_; }

 private:
  void check(double r) const {
    if (!(r > 0.0) || !domain_.contains(r))
      throw DomainError("Higgs pair evaluated outside its domain (r = " + std::to_string(r) + ")");
  }

  EvalFn eval_;
  JetFn jet_;
  RadialDomain domain_{};
  std::string label_;
};

inline Mat2 psi_to_ax(const Mat2& psi) { return kI * (psi + psi.adjoint()); }
inline Mat2 psi_to_ay(const Mat2& psi) { return psi - psi.adjoint(); }
inline Mat2 psi_from_axy(const Mat2& ax, const Mat2& ay) { return (ax + kI * ay) / (2.0 * kI); }

inline Components lift_value(const PairValue& v) {
  Components c;
  c[kR] = v.b_r;
  c[kTheta] = v.b_theta;
  c[kX] = psi_to_ax(v.psi);
  c[kY] = psi_to_ay(v.psi);
  return c;
}

inline PairValue reduce_value(const Components& c) {
  return PairValue{c[kR], c[kTheta], psi_from_axy(c[kX], c[kY])};
}

inline ConnectionSource lift(const HiggsPairOnPlane& pair, const TorusSpec& torus = {}) {
  ConnectionSource::JetFn jet;
  if (pair.has_jet()) {
    jet = [pair](const Point& p) {
      const PairJet pj = pair.jet(p.r, p.theta);
      Jet j;
      j.value = lift_value(pj.value);
      j.d[kR] = lift_value(pj.d[0]);
      j.d[kTheta] = lift_value(pj.d[1]);
      return j;
    };
  }
  return ConnectionSource([pair](const Point& p) { return lift_value(pair.value(p.r, p.theta)); },
                          jet, pair.domain(), torus, "lift(" + pair.label() + ")");
}

/// Raised when a connection fails the torus-invariance check.
class InvarianceError : public Error {
 public:
  InvarianceError(const std::string& msg, double deviation) : Error(msg), deviation_(deviation) {}
  double deviation() const { return deviation_; }

 private:
  double deviation_;
};

/// Largest change of the components under torus translations, over a probe set.
inline double torus_invariance_deviation(const ConnectionSource& c) {
  const auto& d = c.domain();
  const double base = std::max(d.r_min, 1e-3);
  std::vector<double> radii;
  for (double f : {1.5, 4.0, 16.0, 64.0}) {
    const double r = base * f;
    if (d.contains(r)) radii.push_back(r);
  }
  if (radii.empty()) radii.push_back(0.5 * (d.r_min + d.r_max));
  const auto& t = c.torus();
  double dev = 0.0;
  for (double r : radii)
    for (int it = 0; it < 5; ++it) {
      const double th = kTwoPi * (it + 0.3) / 5;
      const Components ref = c.evaluate({r, th, 0.0, 0.0});
      for (int ix = 0; ix < 3; ++ix)
        for (int iy = 0; iy < 3; ++iy) {
          if (ix == 0 && iy == 0) continue;
          const Components v = c.evaluate({r, th, t.period_x * (ix + 0.17) / 3.0,
                                           t.period_y * (iy + 0.41) / 3.0});
          for (int mu = 0; mu < 4; ++mu) dev = std::max(dev, (v[mu] - ref[mu]).norm());
        }
    }
  return dev;
}

inline HiggsPairOnPlane reduce(const ConnectionSource& c, double tolerance = 1e-10) {
  const double dev = torus_invariance_deviation(c);
  if (dev > tolerance)
    throw InvarianceError("reduce: connection is not torus-invariant (max deviation " +
                              std::to_string(dev) + ")",
                          dev);
  HiggsPairOnPlane::JetFn jet;
  if (c.has_jet()) {
    jet = [c](double r, double th) {
      const Jet j = c.jet({r, th, 0.0, 0.0});
      PairJet pj;
      pj.value = reduce_value(j.value);
      pj.d[0] = reduce_value(j.d[kR]);
      pj.d[1] = reduce_value(j.d[kTheta]);
      return pj;
    };
  }
  return HiggsPairOnPlane(
      [c](double r, double th) { return reduce_value(c.evaluate({r, th, 0.0, 0.0})); }, jet,
      c.domain(), "reduce(" + c.label() + ")");
}

struct HitchinResidual {
  double curvature = 0.0;  // |F_B + [psi, psi*]|, dw1 ^ dw2 coefficient
  double dbar = 0.0;       // |dbar_B psi|, dwbar ^ dw coefficient

  /// The anti-self-duality residual implied by the equivalence constants.
  double asd_equivalent() const {
    return std::sqrt(kEquivalenceCurvature * curvature * curvature +
                     kEquivalenceDbar * dbar * dbar);
  }
};

inline HitchinResidual hitchin_residual(const HiggsPairOnPlane& pair, double r, double theta) {
  if (!(r > 0.0)) throw DomainError("hitchin_residual: evaluation at the pole");
  const PairJet j = pair.jet(r, theta);
  const Mat2& br = j.value.b_r;
  const Mat2& bt = j.value.b_theta;
  const Mat2& psi = j.value.psi;
  const Mat2 FB = j.d[0].b_theta - j.d[1].b_r + su2::commutator(br, bt);
  const Mat2 bracket = su2::commutator(psi_to_ax(psi), psi_to_ay(psi));
  const Mat2 nr = j.d[0].psi + su2::commutator(br, psi);
  const Mat2 nt = (j.d[1].psi + su2::commutator(bt, psi)) / r;
  HitchinResidual res;
  res.curvature = (FB / r + bracket).norm();
  res.dbar = 0.5 * (nr + kI * nt).norm();
  return res;
}

inline HitchinResidual hitchin_residual(const HiggsPairOnPlane& pair, Complex w) {
  return hitchin_residual(pair, std::abs(w), std::arg(w));
}

}  // namespace ipl
