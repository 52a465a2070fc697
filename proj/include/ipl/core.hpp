#pragma once

// Shared scalar/matrix types, su(2) helpers and error types.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ipl {

using Complex = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr Complex kI{0.0, 1.0};

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Evaluation point outside the domain of a connection or grid.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid arguments or violated preconditions.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed to converge or a fit is unacceptable.
class NumericalError : public Error {
 public:
  using Error::Error;
};

namespace su2 {

inline Mat2 identity() { return Mat2::Identity(); }
inline Mat2 zero() { return Mat2::Zero(); }

inline Mat2 pauli_x() {
  Mat2 m;
  m << 0.0, 1.0, 1.0, 0.0;
  return m;
}

inline Mat2 pauli_y() {
  Mat2 m;
  m << 0.0, -kI, kI, 0.0;
  return m;
}

inline Mat2 pauli_z() {
  Mat2 m;
  m << 1.0, 0.0, 0.0, -1.0;
  return m;
}

/// i * diag(a, -a)
inline Mat2 idiag(double a) {
  Mat2 m;
  m << kI * a, 0.0, 0.0, -kI * a;
  return m;
}

/// The anti-hermitian matrix i (v . sigma).
inline Mat2 from_vector(const Eigen::Vector3d& v) {
  return kI * (v[0] * pauli_x() + v[1] * pauli_y() + v[2] * pauli_z());
}

/// Inverse of from_vector on the anti-hermitian traceless part.
inline Eigen::Vector3d to_vector(const Mat2& m) {
  return {0.5 * (m(0, 1).imag() + m(1, 0).imag()),
          0.5 * (m(0, 1).real() - m(1, 0).real()),
          0.5 * (m(0, 0).imag() - m(1, 1).imag())};
}

/// Orthogonal projection onto su(2).
inline Mat2 project(const Mat2& m) {
  Mat2 ah = 0.5 * (m - m.adjoint());
  const Complex t = 0.5 * ah.trace();
  ah(0, 0) -= t;
  ah(1, 1) -= t;
  return ah;
}

inline Mat2 commutator(const Mat2& a, const Mat2& b) { return a * b - b * a; }

inline double frobenius(const Mat2& m) { return m.norm(); }

/// max(|M + M^dag|, |tr M|), zero exactly on su(2).
inline double algebra_defect(const Mat2& m) {
  return std::max((m + m.adjoint()).norm(), std::abs(m.trace()));
}

/// Exponential of an element of su(2), computed in closed form.
inline Mat2 exp(const Mat2& x) {
  const Eigen::Vector3d v = to_vector(x);
  const double n = v.norm();
  const double s = n > 1e-300 ? std::sin(n) / n : 1.0;
  return std::cos(n) * identity() + s * from_vector(v);
}

}  // namespace su2

/// Number of worker threads, capped by IPL_THREADS when set.
inline unsigned thread_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("IPL_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return n;
}

/// Runs fn(i) for i in [0, n). Results must be written to per-index slots so
/// that reductions stay deterministic.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = std::min<std::size_t>(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

/// Reduces x into [lo, lo + 1).
inline double wrap_unit(double x, double lo = 0.0) {
  double y = std::fmod(x - lo, 1.0);
  if (y < 0.0) y += 1.0;
  if (y >= 1.0) y = 0.0;
  return y + lo;
}

/// Reduces an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double y = std::remainder(a, kTwoPi);
  if (y <= -kPi) y += kTwoPi;
  return y;
}

/// 64-bit FNV-1a, used for the conventions fingerprint in reports.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Gauss-Legendre nodes and weights on [a, b].
inline void gauss_legendre(int n, double a, double b, std::vector<double>& nodes,
                           std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
    }
    nodes[i] = 0.5 * (b - a) * x + 0.5 * (b + a);
    weights[i] = (b - a) / ((1.0 - x * x) * dp * dp);
  }
}

}  // namespace ipl
