#pragma once

// Brute-force oracles, independent of the spectral solvers they check.

#include "ipl/asymptotics.hpp"

#include <random>

namespace ipl::oracle {

/// Periodic spectral differentiation matrix on n equispaced nodes (n even).
inline Eigen::MatrixXd spectral_diff(int n, double period) {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) {
        const int d = i - j;
        D(i, j) = 0.5 * (d % 2 == 0 ? 1.0 : -1.0) / std::tan(kPi * d / n) * (kTwoPi / period);
      }
  return D;
}

/// Covariant derivative nabla_j u = d_j u + [Gamma_j, u] on the grid.
inline TorusField covariant(const TorusField& u, const DiagonalFlat& g, int dir,
                            const Eigen::MatrixXd& D) {
  TorusField out = u;
  const Mat2 G = su2::idiag(dir == 0 ? g.c1 : g.c2);
  for (int i = 0; i < u.n_x; ++i)
    for (int j = 0; j < u.n_y; ++j) {
      Mat2 s = Mat2::Zero();
      if (dir == 0)
        for (int k = 0; k < u.n_x; ++k) s += D(i, k) * u.at(k, j);
      else
        for (int k = 0; k < u.n_y; ++k) s += D(j, k) * u.at(i, k);
      out.at(i, j) = s + su2::commutator(G, u.at(i, j));
    }
  return out;
}

/// Smallest Rayleigh quotient |nabla u|^2 / |u|^2 reached by locally optimal
/// descent from random trigonometric polynomials on the perp subspace.
inline double rayleigh_minimum(const DiagonalFlat& g, const TorusSpec& t, int trials,
                               std::uint64_t seed, int n = 12, int iterations = 120) {
  const Eigen::MatrixXd Dx = spectral_diff(n, t.period_x), Dy = spectral_diff(n, t.period_y);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N01;
  auto apply_H = [&](const TorusField& u) {
    TorusField h = u;
    for (auto& m : h.values) m.setZero();
    for (int dir = 0; dir < 2; ++dir) {
      const auto& D = dir == 0 ? Dx : Dy;
      const TorusField d1 = covariant(covariant(u, g, dir, D), g, dir, D);
      for (std::size_t k = 0; k < h.values.size(); ++k) h.values[k] -= d1.values[k];
    }
    return h;
  };
  auto perp = [&](const TorusField& u) { return perp_decompose(u, g).perp; };
  double best = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < trials; ++trial) {
    // every mode the grid resolves below Nyquist (that one is annihilated by D)
    const int K = n / 2 - 1, w = 2 * K + 1;
    std::vector<std::array<Complex, 4>> coef(std::size_t(w) * w);
    for (auto& c : coef)
      for (auto& z : c) z = Complex(N01(rng), N01(rng));
    TorusField u = make_torus_field(t, n, n, [&](double x, double y) {
      Mat2 m = Mat2::Zero();
      for (int a = -K; a <= K; ++a)
        for (int b = -K; b <= K; ++b) {
          const Complex e = std::polar(1.0, kTwoPi * (a * x / t.period_x + b * y / t.period_y));
          const auto& c = coef[std::size_t(a + K) * w + (b + K)];
          m(0, 0) += c[0] * e;
          m(0, 1) += c[1] * e;
          m(1, 0) += c[2] * e;
          m(1, 1) += c[3] * e;
        }
      return m;
    });
    u = perp(u);
    TorusField dir = u;
    bool have_dir = false;
    for (int it = 0; it < iterations; ++it) {
      const double uu = l2_inner(u, u);
      const TorusField Hu = apply_H(u);
      const double rq = l2_inner(u, Hu) / uu;
      TorusField r = Hu;
      for (std::size_t k = 0; k < r.values.size(); ++k) r.values[k] -= rq * u.values[k];
      r = perp(r);
      if (l2_inner(r, r) <= 1e-28 * uu) break;
      // locally optimal step: Rayleigh-Ritz on span{u, r, previous step}
      std::vector<TorusField> basis{u, r};
      if (have_dir) basis.push_back(dir);
      std::vector<TorusField> q;
      for (auto v : basis) {
        for (const auto& e : q) {
          const double c = l2_inner(e, v);
          for (std::size_t k = 0; k < v.values.size(); ++k) v.values[k] -= c * e.values[k];
        }
        const double nv = std::sqrt(l2_inner(v, v));
        if (nv < 1e-10 * std::sqrt(uu)) continue;
        for (auto& m : v.values) m /= nv;
        q.push_back(v);
      }
      const int m = static_cast<int>(q.size());
      std::vector<TorusField> hq;
      for (const auto& v : q) hq.push_back(apply_H(v));
      Eigen::MatrixXd A(m, m);
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) A(a, b) = 0.5 * (l2_inner(q[a], hq[b]) + l2_inner(q[b], hq[a]));
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
      const Eigen::VectorXd v = es.eigenvectors().col(0);
      TorusField next = q[0];
      for (auto& x : next.values) x.setZero();
      for (int a = 0; a < m; ++a)
        for (std::size_t k = 0; k < next.values.size(); ++k) next.values[k] += v[a] * q[a].values[k];
      for (std::size_t k = 0; k < next.values.size(); ++k)
        dir.values[k] = next.values[k] - v[0] * q[0].values[k];
      have_dir = true;
      u = next;
    }
    best = std::min(best, l2_inner(u, apply_H(u)) / l2_inner(u, u));
  }
  return best;
}

}  // namespace ipl::oracle
