#include "ipl/models.hpp"
#include "ipl/moduli.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ipl;

namespace {

AnnulusGrid test_grid(int n_r = 40) {
  AnnulusGrid g;
  g.r_min = 5.0;
  g.r_max = 40.0;
  g.n_r = n_r;
  g.n_theta = 16;
  g.n_x = 4;
  g.n_y = 4;
  g.spacing = Spacing::log_radial;
  return g;
}

ConnectionSource model() {
  ModelParams p;
  p.lambda = Complex(0.1, -0.05);
  p.mu = Complex(1.0, 0.5);
  p.alpha = 0.25;
  return semisimple_model(p);
}

Mat2 random_su2(std::mt19937_64& rng) {
  std::normal_distribution<double> N;
  return su2::from_vector(Eigen::Vector3d(N(rng), N(rng), N(rng)));
}

// smooth bump in r vanishing outside (r0, r1), with angular and torus dependence
ScalarField bump(const GridOperator& op, double r0, double r1, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Mat2 a = random_su2(rng), b = random_su2(rng);
  const TorusSpec t = op.torus();
  return op.sample_scalar([&](const Point& p) {
    if (p.r <= r0 || p.r >= r1) return Mat2(Mat2::Zero());
    const double s = (p.r - r0) / (r1 - r0);
    const double env = std::exp(-1.0 / (s * (1.0 - s)));
    return Mat2(env * (std::cos(p.theta) * a + std::sin(kTwoPi * p.x / t.period_x + p.theta) * b));
  });
}

TangentVectorInstanton random_tangent(const AnnulusGrid& g, std::mt19937_64& rng) {
  TangentVectorInstanton t;
  t.grid = g;
  t.a.resize(g.size());
  for (auto& c : t.a)
    for (auto& m : c.a) m = random_su2(rng);
  return t;
}

}  // namespace

TEST(ComplexStructures, AsPrinted) {
  const auto I = complex_structures();
  const Eigen::Vector4d v(1.0, 2.0, 3.0, 4.0);  // (z1, z2, w1, w2)
  EXPECT_EQ(I[0] * v, Eigen::Vector4d(-2.0, 1.0, -4.0, 3.0));
  EXPECT_EQ(I[1] * v, Eigen::Vector4d(-3.0, 4.0, 1.0, -2.0));
  EXPECT_EQ(I[2] * v, Eigen::Vector4d(-4.0, -3.0, 2.0, 1.0));
}

TEST(ComplexStructures, QuaternionRelations) {
  const auto I = complex_structures();
  const Mat4 id = Mat4::Identity();
  for (const auto& m : I) {
    EXPECT_EQ(m * m, -id);
    EXPECT_EQ(m.transpose() * m, id);
  }
  EXPECT_EQ(I[0] * I[1], I[2]);
  EXPECT_EQ(I[1] * I[0], -I[2]);
  EXPECT_EQ(I[1] * I[2], I[0]);
  EXPECT_EQ(I[2] * I[0], I[1]);
  const auto q = quaternion_check();
  EXPECT_TRUE(q.ok());
  EXPECT_EQ(q.triple_sign, -1);
}

TEST(ModuliDimension, Formula) {
  EXPECT_EQ(moduli_dimension(1), 4);
  EXPECT_EQ(moduli_dimension(2), 12);
  EXPECT_THROW(moduli_dimension(0), PreconditionError);
}

TEST(K1Chart, Examples) {
  const auto k = k1_chart(0.0, 1.0);
  EXPECT_FALSE(k.excluded.has_value());
  for (Complex c : {Complex(0.0), Complex(2.0, -1.0), Complex(-0.3, 5.0)}) {
    const auto f = k.member(c);
    EXPECT_EQ(f.b, Complex(0.0));
    EXPECT_EQ(f.d, Complex(1.0));
    EXPECT_EQ(f.c, c);
  }
  EXPECT_EQ(k.total_real_dim(), 4);
  EXPECT_EQ(k.total_real_dim(), moduli_dimension(1));
  EXPECT_EQ(k.complex_parameters, 1);
  EXPECT_THROW(k1_chart(1.0, 0.0), PreconditionError);
}

TEST(K1Chart, ConstraintsHold) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> N;
  for (int trial = 0; trial < 100; ++trial) {
    const Complex f0(N(rng), N(rng)), fp0(N(rng), N(rng)), c(N(rng), N(rng));
    const auto f = k1_chart(f0, fp0).member(c);
    EXPECT_NEAR(std::abs(f(0.0) - f0), 0.0, 1e-12 * (1.0 + std::abs(f0)));
    EXPECT_NEAR(std::abs(f.derivative(0.0) - fp0), 0.0, 1e-12 * (1.0 + std::abs(fp0)));
    EXPECT_GT(std::abs(f.determinant()), 0.0);
  }
  const auto k = k1_chart(2.0, 1.0);
  ASSERT_TRUE(k.excluded.has_value());
  EXPECT_THROW(k.member(0.5), PreconditionError);
}

TEST(GridOperator, ExactAdjoint) {
  const auto c = model();
  const GridOperator op(c, test_grid(24));
  std::mt19937_64 rng(1);
  ScalarField u(op.grid().size());
  for (auto& m : u) m = random_su2(rng);
  const auto a = random_tangent(op.grid(), rng);
  const double lhs = op.inner1(op.d0(u), a.a);
  const double rhs = op.inner0(u, op.d0_adjoint(a.a));
  EXPECT_NEAR(lhs, rhs, 1e-11 * (std::abs(lhs) + 1.0));
}

TEST(GridOperator, DerivativesOfSmoothFields) {
  const GridOperator op(flat_connection({}, 1.0), test_grid(48));
  const auto u = op.sample_scalar([](const Point& p) {
    return Mat2(std::log(p.r) * std::cos(2 * p.theta) * su2::pauli_x() * kI);
  });
  const auto du = op.d0(u);
  double err = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const Point p = op.point(k);
    const Mat2 dr = std::cos(2 * p.theta) / p.r * su2::pauli_x() * kI;
    const Mat2 dt = -2.0 * std::log(p.r) * std::sin(2 * p.theta) * su2::pauli_x() * kI;
    err = std::max({err, (du[k][kR] - dr).norm(), (du[k][kTheta] - dt).norm()});
  }
  EXPECT_LT(err, 1e-6);
}

TEST(InstantonTangent, ZeroTangent) {
  const auto c = model();
  const GridOperator op(c, test_grid());
  TangentVectorInstanton t;
  t.grid = test_grid();
  t.a.assign(t.grid.size(), Components{});
  const auto r = instanton_tangent_residual(op, t);
  EXPECT_EQ(r.gauge, 0.0);
  EXPECT_EQ(r.asd, 0.0);
}

TEST(InstantonTangent, PureGauge) {
  const auto c = model();
  const GridOperator op(c, test_grid(48));
  const auto u = bump(op, 8.0, 30.0, 3);
  TangentVectorInstanton t;
  t.grid = op.grid();
  t.a = op.d0(u);
  const auto r = instanton_tangent_residual(op, t);
  // first residual is the discrete Laplacian of u: <u, d* d u> = |d u|^2
  const ScalarField lap = op.d0_adjoint(t.a);
  EXPECT_NEAR(op.inner0(u, lap), op.inner1(t.a, t.a), 1e-10 * op.inner1(t.a, t.a));
  EXPECT_NEAR(r.gauge, std::sqrt(op.inner0(lap, lap, true)), 1e-12 * r.gauge);
  EXPECT_GT(r.gauge, 0.0);
  // d+ d u = [F+, u] = 0 up to discretization
  EXPECT_LT(r.asd, 1e-4 * std::sqrt(op.inner1(t.a, t.a)));
}

TEST(InstantonTangent, TranslationsAreModuliDirections) {
  const auto c = model();
  const auto grid = test_grid(64);
  const GridOperator op(c, grid);
  for (const auto& v : {std::array<double, 4>{1, 0, 0, 0}, std::array<double, 4>{0, 0, 1, 0},
                        std::array<double, 4>{0, 0, 0, 1}}) {
    const auto t = translation_deformation(c, grid, v);
    const auto r = instanton_tangent_residual(op, t);
    EXPECT_LE(r.gauge, 1e-4);
    EXPECT_LE(r.asd, 1e-4);
  }
  // torus translations of a torus-invariant solution: F(d_x, .) still nonzero
  const auto tx = translation_deformation(c, grid, {1, 0, 0, 0});
  EXPECT_GT(l2_metric(op, tx, tx), 0.0);
}

TEST(InstantonTangent, GaugeOrthogonality) {
  const auto c = model();
  const auto grid = test_grid(64);
  const GridOperator op(c, grid);
  const auto a = translation_deformation(c, grid, {0, 0, 1, 0});
  const double eps = instanton_tangent_residual(op, a).gauge;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto u = bump(op, 8.0, 30.0, seed);
    const double g = std::abs(op.inner1(a.a, op.d0(u)));
    EXPECT_LE(g, 1.0001 * eps * std::sqrt(op.inner0(u, u)) + 1e-14);
  }
}

TEST(InstantonTangent, Validation) {
  const auto c = model();
  const GridOperator op(c, test_grid());
  TangentVectorInstanton t;
  t.grid = test_grid();
  t.a.assign(t.grid.size(), Components{});
  t.a[3][1] = Mat2::Identity();
  EXPECT_THROW(instanton_tangent_residual(op, t), PreconditionError);
  t.a.pop_back();
  EXPECT_THROW(instanton_tangent_residual(op, t), PreconditionError);
  t.grid.n_r = 20;
  t.a.assign(t.grid.size(), Components{});
  EXPECT_THROW(instanton_tangent_residual(op, t), PreconditionError);
  AnnulusGrid bad = test_grid();
  bad.r_min = 0.5;
  EXPECT_THROW(GridOperator(nilpotent_model(), bad), DomainError);
}

TEST(L2Metric, SymmetricPositiveBilinear) {
  const auto c = model();
  const auto grid = test_grid(12);
  const GridOperator op(c, grid);
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  for (int s = 0; s < 100; ++s) {
    const auto a = random_tangent(grid, rng), b = random_tangent(grid, rng), d = random_tangent(grid, rng);
    const double gab = l2_metric(op, a, b), gba = l2_metric(op, b, a);
    EXPECT_NEAR(gab, gba, 1e-12 * (1.0 + std::abs(gab)));
    EXPECT_GT(l2_metric(op, a, a), 0.0);
    const double x = U(rng), y = U(rng);
    TangentVectorInstanton comb = a;
    for (std::size_t k = 0; k < comb.a.size(); ++k) comb.a[k] = x * a.a[k] + y * b.a[k];
    const double lin = x * l2_metric(op, a, d) + y * l2_metric(op, b, d);
    EXPECT_NEAR(l2_metric(op, comb, d), lin, 1e-10 * (1.0 + std::abs(lin)));
  }
}

TEST(L2Metric, ComplexStructuresAreIsometries) {
  const auto c = model();
  const auto grid = test_grid(12);
  const GridOperator op(c, grid);
  std::mt19937_64 rng(4);
  const auto I = complex_structures();
  for (int s = 0; s < 5; ++s) {
    const auto a = random_tangent(grid, rng);
    const double g = l2_metric(op, a, a);
    for (const auto& m : I) {
      const auto Ia = apply_structure(m, a);
      EXPECT_NEAR(l2_metric(op, Ia, Ia), g, 1e-10 * g);
      // I a is orthogonal to a pointwise
      EXPECT_NEAR(l2_metric(op, Ia, a), 0.0, 1e-10 * g);
    }
  }
}

namespace {

HiggsPairGrid diagonal_background(int n) {
  HiggsPairGrid bg;
  bg.grid.n1 = bg.grid.n2 = n;
  bg.grid.punctures = {reduce_dual(0.3 + 0.5 / n, 0.1 + 0.5 / n), reduce_dual(0.7 - 0.5 / n, 0.9 - 0.5 / n)};
  bg.B1.assign(bg.grid.size(), kI * Mat2(Eigen::Vector2cd(0.3, -0.1).asDiagonal()));
  bg.B2.assign(bg.grid.size(), kI * Mat2(Eigen::Vector2cd(-0.2, 0.4).asDiagonal()));
  bg.Phi.assign(bg.grid.size(), Mat2(Eigen::Vector2cd(Complex(1.0, 2.0), Complex(-0.5, 0.3)).asDiagonal()));
  return bg;
}

TangentVectorHiggs random_higgs_tangent(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> N;
  TangentVectorHiggs t;
  auto herm = [&] {
    Mat2 m;
    m << Complex(N(rng), N(rng)), Complex(N(rng), N(rng)), Complex(N(rng), N(rng)), Complex(N(rng), N(rng));
    return Mat2(0.5 * (m - m.adjoint()));
  };
  auto full = [&] {
    Mat2 m;
    m << Complex(N(rng), N(rng)), Complex(N(rng), N(rng)), Complex(N(rng), N(rng)), Complex(N(rng), N(rng));
    return m;
  };
  for (std::size_t k = 0; k < n; ++k) {
    t.b1.push_back(herm());
    t.b2.push_back(herm());
    t.phi.push_back(full());
  }
  return t;
}

// real coordinates of a tangent: per node 4 + 4 (b1, b2 in u(2)) and 8 (phi)
Eigen::VectorXd pack(const TangentVectorHiggs& t) {
  const std::size_t n = t.b1.size();
  Eigen::VectorXd v(16 * n);
  for (std::size_t k = 0; k < n; ++k) {
    int o = static_cast<int>(16 * k);
    for (const Mat2* m : {&t.b1[k], &t.b2[k]}) {
      v[o++] = (*m)(0, 0).imag();
      v[o++] = (*m)(1, 1).imag();
      v[o++] = (*m)(0, 1).real();
      v[o++] = (*m)(0, 1).imag();
    }
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        v[o++] = t.phi[k](i, j).real();
        v[o++] = t.phi[k](i, j).imag();
      }
  }
  return v;
}

TangentVectorHiggs unpack(const Eigen::VectorXd& v) {
  const std::size_t n = v.size() / 16;
  TangentVectorHiggs t;
  for (std::size_t k = 0; k < n; ++k) {
    int o = static_cast<int>(16 * k);
    for (ScalarField* f : {&t.b1, &t.b2}) {
      Mat2 m;
      m(0, 0) = Complex(0.0, v[o]);
      m(1, 1) = Complex(0.0, v[o + 1]);
      m(0, 1) = Complex(v[o + 2], v[o + 3]);
      m(1, 0) = -std::conj(m(0, 1));
      f->push_back(m);
      o += 4;
    }
    Mat2 p;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        p(i, j) = Complex(v[o], v[o + 1]);
        o += 2;
      }
    t.phi.push_back(p);
  }
  return t;
}

Eigen::VectorXd residual_vector(const HiggsPairGrid& bg, const TangentVectorHiggs& t) {
  const auto f = higgs_tangent_fields(bg, t);
  Eigen::VectorXd v(24 * bg.grid.size());
  int o = 0;
  for (const ScalarField* s : {&f.curvature, &f.holomorphy, &f.gauge})
    for (const auto& m : *s)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          v[o++] = m(i, j).real();
          v[o++] = m(i, j).imag();
        }
  return v;
}

}  // namespace

TEST(HiggsTangent, ZeroAndAbelian) {
  const auto bg = diagonal_background(8);
  TangentVectorHiggs z;
  z.b1.assign(bg.grid.size(), Mat2::Zero());
  z.b2 = z.b1;
  z.phi = z.b1;
  auto r = higgs_tangent_residual(bg, z);
  EXPECT_EQ(r.curvature, 0.0);
  EXPECT_EQ(r.holomorphy, 0.0);
  EXPECT_EQ(r.gauge, 0.0);

  TangentVectorHiggs d;
  d.b1.assign(bg.grid.size(), kI * Mat2(Eigen::Vector2cd(0.7, 0.2).asDiagonal()));
  d.b2.assign(bg.grid.size(), kI * Mat2(Eigen::Vector2cd(-0.1, 0.5).asDiagonal()));
  d.phi.assign(bg.grid.size(), Mat2(Eigen::Vector2cd(Complex(0.2, 0.1), Complex(3.0, -1.0)).asDiagonal()));
  r = higgs_tangent_residual(bg, d);
  EXPECT_LE(r.curvature, 1e-10);
  EXPECT_LE(r.holomorphy, 1e-10);
  EXPECT_LE(r.gauge, 1e-10);
}

TEST(HiggsTangent, ProjectionOntoConstraintKernel) {
  // nonabelian background: B = 0, Phi constant with distinct eigenvalues and an off-diagonal part
  const int n = 4;
  HiggsPairGrid bg;
  bg.grid.n1 = bg.grid.n2 = n;
  bg.grid.punctures = {reduce_dual(0.1, 0.1)};
  bg.B1.assign(bg.grid.size(), Mat2::Zero());
  bg.B2 = bg.B1;
  Mat2 P;
  P << Complex(1.0, 0.5), Complex(0.3, 0.0), Complex(0.0, 0.0), Complex(-1.0, -0.5);
  bg.Phi.assign(bg.grid.size(), P);

  std::mt19937_64 rng(8);
  const auto t = random_higgs_tangent(bg.grid.size(), rng);
  const Eigen::VectorXd x = pack(t);
  const int m = static_cast<int>(x.size());
  Eigen::MatrixXd L(24 * bg.grid.size(), m);
  for (int j = 0; j < m; ++j) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
    e[j] = 1.0;
    L.col(j) = residual_vector(bg, unpack(e));
  }
  EXPECT_NEAR((L * x - residual_vector(bg, t)).norm(), 0.0, 1e-9 * x.norm());
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(L, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s[i] > 1e-9 * s[0]) ++rank;
  ASSERT_LT(rank, m);
  const Eigen::MatrixXd K = svd.matrixV().rightCols(m - rank);
  const Eigen::VectorXd y = K * (K.transpose() * x);

  const auto before = higgs_tangent_residual(bg, t);
  const auto after = higgs_tangent_residual(bg, unpack(y));
  const double b = before.curvature + before.holomorphy + before.gauge;
  const double a = after.curvature + after.holomorphy + after.gauge;
  EXPECT_GT(b, 1.0);
  EXPECT_LT(a, 1e-9 * b);
  EXPECT_GT(y.norm(), 0.0);
}

TEST(HiggsTangent, PuncturesAndSizes) {
  auto bg = diagonal_background(8);
  bg.grid.punctures = {reduce_dual(0.25, 0.5)};
  std::mt19937_64 rng(1);
  const auto t = random_higgs_tangent(bg.grid.size(), rng);
  EXPECT_THROW(higgs_tangent_residual(bg, t), PreconditionError);
  bg = diagonal_background(8);
  auto bad = t;
  bad.phi.pop_back();
  EXPECT_THROW(higgs_tangent_residual(bg, bad), PreconditionError);
}

TEST(HiggsMetric, SymmetricPositive) {
  const auto bg = diagonal_background(6);
  std::mt19937_64 rng(12);
  for (int s = 0; s < 100; ++s) {
    const auto a = random_higgs_tangent(bg.grid.size(), rng);
    const auto b = random_higgs_tangent(bg.grid.size(), rng);
    EXPECT_NEAR(l2_metric(bg.grid, a, b), l2_metric(bg.grid, b, a), 1e-12);
    EXPECT_GT(l2_metric(bg.grid, a, a), 0.0);
  }
  std::vector<TangentVectorHiggs> fam;
  for (int i = 0; i < 4; ++i) fam.push_back(random_higgs_tangent(bg.grid.size(), rng));
  const Eigen::MatrixXd G = gram(fam, [&](const auto& x, const auto& y) { return l2_metric(bg.grid, x, y); });
  EXPECT_TRUE(G.isApprox(G.transpose()));
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(G).eigenvalues().minCoeff(), 0.0);
}
