#pragma once

// Parabolic degrees, instability witnesses for extension bundles and the
// non-existence obstructions for k = 1 and for mu = 0.

#include "ipl/spectral.hpp"

namespace ipl {

/// Which eigenline of the flat infinity fiber a line subsheaf restricts into:
/// plus means L|T_inf lies in L_{-xi0}, minus means it lies in L_{xi0}.
enum class Side { plus, minus };

inline std::string to_string(Side s) { return s == Side::plus ? "plus" : "minus"; }

inline Side parse_side(const std::string& s) {
  if (s == "plus") return Side::plus;
  if (s == "minus") return Side::minus;
  throw PreconditionError("invalid side '" + s + "' (expected plus or minus)");
}

struct SubsheafSpec {
  int d_inf = 0;  // degree of the O(b) twist along P^1
  Side side = Side::plus;
  bool flat_at_infinity = true;
};

inline void check_alpha(double alpha, const char* where) {
  if (!(alpha >= -0.5 && alpha < 0.5)) throw PreconditionError(std::string(where) + ": alpha must lie in [-1/2, 1/2)");
}

inline double parabolic_degree(const SubsheafSpec& sub, double alpha, double area = 1.0) {
  check_alpha(alpha, "parabolic_degree");
  if (!(area > 0.0)) throw PreconditionError("parabolic_degree: area must be positive");
  if (!sub.flat_at_infinity)
    throw PreconditionError("parabolic_degree: side is undefined when L restricted to T_inf is not flat");
  const double a = alpha * area;
  return sub.side == Side::plus ? sub.d_inf + a : sub.d_inf - a;
}

struct IdealPoint {
  double x = 0.0;
  double y = 0.0;
  Complex w{0.0, 0.0};
};

/// Extension 0 -> L_{xi0}(b) -> E -> L_{-xi0}(-b) tensor I_Z -> 0 with |Z| = k.
struct ExtensionBundleSpec {
  DualTorusPoint xi0;
  int b = 0;
  int k = 1;
  std::vector<IdealPoint> points;  // optional; when given, one per unit of k

  void validate() const {
    if (k < 1) throw PreconditionError("ExtensionBundleSpec: k must be >= 1");
    if (!points.empty() && static_cast<int>(points.size()) != k)
      throw PreconditionError("ExtensionBundleSpec: expected k points");
    for (const auto& p : points)
      if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.w.real()) || !std::isfinite(p.w.imag()))
        throw PreconditionError("ExtensionBundleSpec: points must avoid the infinity fiber");
  }
};

struct StabilityVerdict {
  bool unstable = false;
  double degree = 0.0;  // parabolic degree of the witness
  SubsheafSpec witness;
  std::string message;
};

inline StabilityVerdict alpha_stable_extension(const ExtensionBundleSpec& spec, double alpha) {
  spec.validate();
  check_alpha(alpha, "alpha_stable_extension");
  StabilityVerdict v;
  v.witness = {spec.b, Side::minus, true};
  v.degree = parabolic_degree(v.witness, alpha);
  v.unstable = v.degree > 0.0;
  v.message = v.unstable ? "unstable: subsheaf L_{xi0}(b) has positive parabolic degree"
                         : "no destabilizer found in family";
  return v;
}

enum class Obstruction { ok, blocked_order2_k1, blocked_mu0 };

inline std::string to_string(Obstruction o) {
  switch (o) {
    case Obstruction::ok: return "ok";
    case Obstruction::blocked_order2_k1: return "blocked_order2_k1";
    case Obstruction::blocked_mu0: return "blocked_mu0";
  }
  return "?";
}

inline Obstruction existence_obstruction(int k, const DualTorusPoint& xi0, Complex mu, double tol = 1e-9) {
  if (k < 1) throw PreconditionError("existence_obstruction: k must be >= 1");
  const bool order_two = is_order_two(xi0, tol);
  if (order_two && k == 1) return Obstruction::blocked_order2_k1;
  if (!order_two && std::abs(mu) <= tol) return Obstruction::blocked_mu0;
  return Obstruction::ok;
}

struct H0Count {
  int finite = 0;    // jumping multiplicity on the annulus
  int infinity = 0;  // h0 of the infinity fiber L_{xi0} + L_{-xi0} twisted by L_xi
  int total = 0;
  int declared_k = 0;
  bool consistent = false;
  std::string message;
};

/// Sum of h0(T_w, E tensor L_xi) over the model's annulus and the infinity fiber, against k.
inline H0Count h0_total(const BundleModel& b, int k, const DualTorusPoint& xi, double tol = 1e-12) {
  if (k < 1) throw PreconditionError("h0_total: k must be >= 1");
  const auto s = detail::jumping_scan(b, xi, Branch::both, tol);
  H0Count h;
  h.finite = s.total_multiplicity();
  h.infinity = s.at_infinity;
  h.total = h.finite + h.infinity;
  h.declared_k = k;
  h.consistent = h.total == k;
  if (h.consistent)
    h.message = "ok";
  else if (h.infinity > k)
    h.message = "infinity fiber alone contributes " + std::to_string(h.infinity) + " > k = " + std::to_string(k);
  else
    h.message = "total " + std::to_string(h.total) + " differs from k = " + std::to_string(k);
  return h;
}

}  // namespace ipl
