#pragma once

// Spectral data of the Nahm transform for bundle models near infinity: on the
// fiber T_w the bundle is L_{zeta(w)} + L_{-zeta(w)}, and a twist xi jumps at w
// when zeta(w) = +-zeta(xi) modulo the triviality lattice. These w are the
// eigenvalues of the transformed Higgs field Phi(xi).

#include "ipl/geometry.hpp"

#include <Eigen/Eigenvalues>

#include <limits>

namespace ipl {

/// Smallest |symbol| of dbar + zeta dzbar over modes |n|, |m| <= N; zero on the lattice.
inline double dbar_min_singular(Complex zeta, int N, const TorusSpec& t = {}) {
  if (N < 4) throw PreconditionError("dbar_min_singular: cutoff must be >= 4");
  double best = std::numeric_limits<double>::infinity();
  for (int n = -N; n <= N; ++n)
    for (int m = -N; m <= N; ++m) best = std::min(best, std::abs(twisted_symbol(t, n, m, zeta)));
  return best;
}

/// zeta(w) = lambda + sum_j c_j w^-j on the annulus r_min <= |w| <= r_max.
struct BundleModel {
  Complex lambda{0.0, 0.0};
  std::vector<Complex> tail{Complex(1.0, 0.0)};  // tail[0] = mu
  double r_min = 5.0;
  double r_max = 1e3;
  TorusSpec torus{};

  Complex mu() const { return tail.empty() ? Complex(0.0) : tail[0]; }

  Complex zeta(Complex w) const {
    Complex s = 0.0;
    for (auto it = tail.rbegin(); it != tail.rend(); ++it) s = (s + *it) / w;
    return lambda + s;
  }

  /// Bound on |zeta(w) - lambda| over the annulus.
  double tail_bound() const {
    double s = 0.0;
    for (std::size_t j = 0; j < tail.size(); ++j) s += std::abs(tail[j]) * std::pow(r_min, -(j + 1.0));
    return s;
  }

  /// True when the tail stays within half the covering radius, so one lattice
  /// translate accounts for all jumping points near infinity.
  bool local() const { return tail_bound() < 0.5 * covering_radius(torus); }

  DualTorusPoint asymptotic_state() const {
    const auto xi = xi_of_zeta(lambda, torus);
    return reduce_dual(xi[0], xi[1], torus);
  }

  void validate() const {
    torus.validate();
    if (!(r_min > 0.0) || !(r_max > r_min)) throw PreconditionError("BundleModel: need 0 < r_min < r_max");
  }
};

enum class Branch { plus, minus, both };

struct JumpingPoint {
  Complex w{0.0, 0.0};
  int multiplicity = 1;
  int sign = 1;           // branch: zeta(w) = sign * zeta(xi) mod lattice
  Complex translate{0.0, 0.0};
};

struct SpectralData {
  DualTorusPoint xi;
  std::vector<JumpingPoint> points;
  int at_infinity = 0;  // translates whose root sits at w = infinity
  std::string diagnostic;

  int total_multiplicity() const {
    int s = 0;
    for (const auto& p : points) s += p.multiplicity;
    return s;
  }
};

namespace detail {

/// Roots u != 0 of c_1 u + ... + c_d u^d = tau, with multiplicities.
inline std::vector<std::pair<Complex, int>> tail_roots(const std::vector<Complex>& c, Complex tau) {
  int d = static_cast<int>(c.size());
  while (d > 0 && c[d - 1] == Complex(0.0)) --d;
  std::vector<std::pair<Complex, int>> out;
  if (d == 0) return out;
  if (d == 1) {
    if (tau != Complex(0.0)) out.push_back({tau / c[0], 1});
    return out;
  }
  // monic polynomial u^d + (c_{d-1}/c_d) u^{d-1} + ... + (c_1/c_d) u - tau/c_d
  Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(d, d);
  for (int i = 1; i < d; ++i) C(i, i - 1) = 1.0;
  std::vector<Complex> a(d);
  a[0] = -tau / c[d - 1];
  for (int k = 1; k < d; ++k) a[k] = c[k - 1] / c[d - 1];
  for (int k = 0; k < d; ++k) C(k, d - 1) = -a[k];
  const Eigen::VectorXcd ev = Eigen::ComplexEigenSolver<Eigen::MatrixXcd>(C, false).eigenvalues();
  std::vector<bool> used(d, false);
  double scale = 0.0;
  for (int i = 0; i < d; ++i) scale = std::max(scale, std::abs(ev[i]));
  // a root of order m splits by O(eps^(1/m)) under rounding
  for (int i = 0; i < d; ++i) {
    if (used[i]) continue;
    int mult = 1;
    Complex sum = ev[i];
    for (int j = i + 1; j < d; ++j)
      if (!used[j] && std::abs(ev[j] - ev[i]) <= 1e-5 * std::max(scale, 1e-300)) {
        used[j] = true;
        sum += ev[j];
        ++mult;
      }
    const Complex u = sum / static_cast<double>(mult);
    if (std::abs(u) > 1e-14 * std::max(scale, 1e-300)) out.push_back({u, mult});
  }
  return out;
}

}  // namespace detail

namespace detail {

/// Solutions of zeta(w) = +-zeta(xi) mod lattice on the annulus; translates
/// with |tau| <= tol are counted as roots at infinity.
inline SpectralData jumping_scan(const BundleModel& b, const DualTorusPoint& xi, Branch branch, double tol) {
  b.validate();
  const TorusSpec& t = b.torus;
  const Complex zx = zeta_of_xi(xi.xi1, xi.xi2, t);
  SpectralData out;
  out.xi = xi;
  const auto basis = dual_lattice(t);
  const double step = std::min(std::abs(basis[0]), std::abs(basis[1]));
  const double reach = b.tail_bound();
  for (int s : {1, -1}) {
    if ((branch == Branch::plus && s < 0) || (branch == Branch::minus && s > 0)) continue;
    const Complex base = double(s) * zx - b.lambda;
    const int M = static_cast<int>(std::ceil((reach + std::abs(base)) / step)) + 1;
    for (int i = -M; i <= M; ++i)
      for (int j = -M; j <= M; ++j) {
        const Complex omega = double(i) * basis[0] + double(j) * basis[1];
        const Complex tau = base + omega;
        if (std::abs(tau) <= tol) {
          ++out.at_infinity;
          continue;
        }
        if (std::abs(tau) > reach * (1.0 + 1e-12)) continue;
        for (const auto& [u, mult] : tail_roots(b.tail, tau)) {
          const Complex w = 1.0 / u;
          const double r = std::abs(w);
          if (r >= b.r_min && r <= b.r_max) out.points.push_back({w, mult, s, omega});
        }
      }
  }
  if (out.points.empty()) out.diagnostic = "no jumping points in the annulus";
  return out;
}

}  // namespace detail

/// Jumping points of the twist xi on the model's annulus.
inline SpectralData jumping_points(const BundleModel& b, const DualTorusPoint& xi,
                                   Branch branch = Branch::plus, double singular_tol = 1e-12) {
  b.validate();
  const Complex zx = zeta_of_xi(xi.xi1, xi.xi2, b.torus);
  for (int s : {1, -1})
    if (lattice_distance(double(s) * zx - b.lambda, b.torus) <= singular_tol)
      throw PreconditionError("jumping_points: xi is a singular point (pole of Phi)");
  return detail::jumping_scan(b, xi, branch, singular_tol);
}

struct ResidueEstimate {
  Complex value{0.0, 0.0};
  std::vector<Complex> samples;  // w(xi_j) * (zeta_j - zeta_0)
  std::vector<double> distances; // |zeta_j - zeta_0|
  double change = 0.0;           // last Neville correction
  bool converged = false;
};

/// Estimates the residue of Phi at +xi0 (sign = 1) or -xi0 (sign = -1) from
/// twists zeta_j approaching zeta(+-xi0), by Neville extrapolation to distance 0.
inline ResidueEstimate phi_residue(const BundleModel& b, int sign,
                                   const std::vector<Complex>& approach, double tol = 1e-8) {
  b.validate();
  if (sign != 1 && sign != -1) throw PreconditionError("phi_residue: sign must be +-1");
  if (approach.size() < 2) throw PreconditionError("phi_residue: need at least two samples");
  const TorusSpec& t = b.torus;
  ResidueEstimate e;
  for (const Complex& z : approach) {
    // nearest translate of sign * zeta_j - lambda
    const Complex base = double(sign) * z - b.lambda;
    const auto xi = xi_of_zeta(base, t);
    const Complex tau = base - zeta_of_xi(std::round(xi[0]), std::round(xi[1]), t);
    if (std::abs(tau) == 0.0) throw PreconditionError("phi_residue: sample at the singular point");
    Complex w = 0.0;
    for (const auto& [u, mult] : detail::tail_roots(b.tail, tau))
      if (std::abs(1.0 / u) > std::abs(w)) w = 1.0 / u;
    if (w == Complex(0.0)) throw NumericalError("phi_residue: no jumping point near infinity");
    e.samples.push_back(double(sign) * w * tau);
    e.distances.push_back(std::abs(tau));
  }
  for (std::size_t i = 1; i < e.distances.size(); ++i)
    if (!(e.distances[i] < e.distances[i - 1]))
      throw PreconditionError("phi_residue: approach sequence must converge");
  // Neville table in h = distance, evaluated at h = 0
  std::vector<Complex> P = e.samples;
  const auto& h = e.distances;
  const std::size_t n = P.size();
  Complex prev = P.back();
  for (std::size_t k = 1; k < n; ++k) {
    for (std::size_t i = n - 1; i >= k; --i) {
      P[i] = (h[i - k] * P[i] - h[i] * P[i - 1]) / (h[i - k] - h[i]);
      if (i == k) break;
    }
    e.change = std::abs(P[n - 1] - prev);
    prev = P[n - 1];
  }
  e.value = P[n - 1];
  e.converged = e.change <= tol * (1.0 + std::abs(e.value));
  return e;
}

struct NahmWeights {
  double plus = 1.0;   // 1 + alpha
  double minus = 1.0;  // 1 - alpha
  double degree = -2.0;
  double check = 0.0;  // degree + plus + minus
};

inline NahmWeights nahm_weights(double alpha) {
  if (!(alpha >= -0.5 && alpha < 0.5)) throw PreconditionError("nahm_weights: alpha must lie in [-1/2, 1/2)");
  NahmWeights w;
  w.plus = 1.0 + alpha;
  w.minus = 1.0 - alpha;
  w.check = w.degree + w.plus + w.minus;
  return w;
}

struct ModeCoefficient {
  int n = 0;
  int m = 0;
  Complex value{0.0, 0.0};
};

struct FourierGap {
  double gap = 0.0;
  bool in_region = true;
};

/// Lower-bound region on the unit lattice n + im: |lambda| <= 0.1 rho,
/// |w| >= 10 |mu| / rho with rho = 1 / sqrt 2 its covering radius.
inline bool fourier_gap_region(Complex lambda, Complex mu, Complex w) {
  const double rho = 1.0 / std::sqrt(2.0);
  return std::abs(lambda) <= 0.1 * rho * (1.0 + 1e-12) && std::abs(w) >= 10.0 * std::abs(mu) / rho * (1.0 - 1e-12);
}

/// sum |n + im + lambda + mu/w|^2 |s_nm|^2 - |lambda + mu/w|^2 sum |s_nm|^2.
inline FourierGap fourier_gap(Complex lambda, Complex mu, Complex w,
                              const std::vector<ModeCoefficient>& sigma) {
  if (w == Complex(0.0)) throw PreconditionError("fourier_gap: w must be nonzero");
  const Complex s = lambda + mu / w;
  double lhs = 0.0, mass = 0.0;
  for (const auto& c : sigma) {
    lhs += std::norm(Complex(c.n, c.m) + s) * std::norm(c.value);
    mass += std::norm(c.value);
  }
  return {lhs - std::norm(s) * mass, fourier_gap_region(lambda, mu, w)};
}

}  // namespace ipl
