#include "ipl/models.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ipl;

namespace {

ModelParams ss(Complex lambda, Complex mu, double alpha) {
  ModelParams p;
  p.lambda = lambda;
  p.mu = mu;
  p.alpha = alpha;
  return p;
}

std::vector<Complex> eigenvalues(const Mat2& g) {
  Eigen::ComplexEigenSolver<Mat2> es(g);
  return {es.eigenvalues()[0], es.eigenvalues()[1]};
}

bool has_eigenvalue(const Mat2& g, Complex z, double tol) {
  for (auto e : eigenvalues(g))
    if (std::abs(e - z) < tol) return true;
  return false;
}

}  // namespace

TEST(Curvature, FlatIsZero) {
  const auto c = flat_connection();
  const auto F = curvature(c, {3.0, 0.4, 1.0, 2.0});
  EXPECT_EQ(F.norm(), 0.0);
  EXPECT_EQ(asd_residual(c, {3.0, 0.4, 1.0, 2.0}), 0.0);
}

TEST(Curvature, ConstantDiagonalIsFlat) {
  const auto c = semisimple_model(ss({0.3, -0.2}, 0.0, 0.0));
  EXPECT_LT(curvature(c, {7.0, 1.1, 0.2, 0.3}).norm(), 1e-15);
}

TEST(Curvature, SemisimpleClosedForm) {
  // a_x = i s3 (2 cos th)/r, a_y = -i s3 (2 sin th)/r for mu = 1:
  // F_rx = -i s3 2 cos/r^2, F_ry = i s3 2 sin/r^2, F_tx = -i s3 2 sin/r, F_ty = -i s3 2 cos/r,
  // orthonormal squared norm 2 * 4 * 2 / r^4, so |F| = 4 / r^2.
  const auto c = semisimple_model(ss(0.0, 1.0, 0.0));
  for (double th : {0.0, 0.7, 2.5}) {
    const auto F = curvature(c, {10.0, th, 0.0, 0.0});
    EXPECT_NEAR(F.norm(), 0.04, 1e-8);
    const Mat2 expected_rx = su2::idiag(-2.0 * std::cos(th) / 100.0);
    EXPECT_LT((F.get(kR, kX) - expected_rx).norm(), 1e-15);
  }
}

TEST(Curvature, FiniteDifferenceMatchesAnalytic) {
  const auto c = perturb(semisimple_model(ss({0.1, 0.2}, {2.0, -1.0}, 0.25)), 0.5, 0.05, 11);
  DiffOptions fd;
  fd.mode = DerivativeMode::finite_difference;
  for (double r : {6.0, 40.0, 300.0}) {
    const Point p{r, 0.9, 1.3, 4.0};
    const auto a = curvature(c, p);
    const auto b = curvature(c, p, fd);
    for (int i = 0; i < 6; ++i) EXPECT_LT((a.F[i] - b.F[i]).norm(), 1e-9 * (1.0 + a.norm()));
  }
}

TEST(Curvature, FiniteDifferenceErrors) {
  const auto c = semisimple_model(ss(0.0, 1.0, 0.0), 5.0);
  DiffOptions fd;
  fd.mode = DerivativeMode::finite_difference;
  EXPECT_THROW(curvature(c, {5.0, 0.0, 0.0, 0.0}, fd), DomainError);
  EXPECT_THROW(curvature(c, {1.0, 0.0, 0.0, 0.0}), DomainError);
  fd.step = -1.0;
  EXPECT_THROW(curvature(c, {10.0, 0.0, 0.0, 0.0}, fd), PreconditionError);
}

TEST(Curvature, ComponentsInSu2) {
  const auto c = perturb(nilpotent_model(), 0.5, 0.1, 3);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const Point p{3.0 + 200 * U(rng), kTwoPi * U(rng), kTwoPi * U(rng), kTwoPi * U(rng)};
    EXPECT_LE(curvature(c, p).algebra_defect(), 1e-10);
  }
}

TEST(AsdResidual, SemisimpleModelsAreAsd) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const auto c = semisimple_model(
        ss({U(rng) - 0.5, U(rng) - 0.5}, {2 * U(rng) - 1, 2 * U(rng) - 1}, U(rng) - 0.5));
    const Point p{5.0 + 495.0 * U(rng), kTwoPi * U(rng), kTwoPi * U(rng), kTwoPi * U(rng)};
    EXPECT_LE(asd_residual(c, p), 1e-8);
  }
}

TEST(AsdResidual, OrientationOracle) {
  const auto c = theta_reflected_model(ss(0.1, {0.5, 0.3}, 0.2));
  EXPECT_GT(asd_residual(c, {10.0, 0.3, 0.0, 0.0}), 1e-3);
  // the reflected model is self-dual: its anti-self-dual part vanishes
  const auto F = curvature(c, {10.0, 0.3, 0.0, 0.0});
  for (const auto& m : F.anti_self_dual_parts()) EXPECT_LT(m.norm(), 1e-15);
}

TEST(Holonomy, FlatIsIdentity) {
  Loop l;
  l.base = {2.0, 0.1, 0.2, 0.3};
  for (auto kind : {LoopKind::x_circle, LoopKind::y_circle, LoopKind::theta_circle}) {
    l.kind = kind;
    EXPECT_LT((holonomy(flat_connection(), l) - Mat2::Identity()).norm(), 1e-15);
  }
}

TEST(Holonomy, ThetaCircleAlpha) {
  const auto c = semisimple_model(ss(0.0, 0.0, 0.25));
  Loop l;
  l.kind = LoopKind::theta_circle;
  l.base = {3.0, 0.0, 0.5, 0.5};
  const Mat2 h = holonomy(c, l);
  EXPECT_TRUE(has_eigenvalue(h, kI, 1e-12));
  EXPECT_TRUE(has_eigenvalue(h, -kI, 1e-12));
}

TEST(Holonomy, XCircleAbelian) {
  const TorusSpec t{3.0, 5.0};
  const Complex lambda{0.35, -0.2};
  const auto c = semisimple_model(ss(lambda, 0.0, 0.0), 1.0, t);
  Loop l;
  l.base = {1e6, 0.4, 0.0, 1.0};
  const double l1 = 2 * lambda.real();
  const Mat2 h = holonomy(c, l);
  EXPECT_TRUE(has_eigenvalue(h, std::polar(1.0, l1 * t.period_x), 1e-12));
  EXPECT_TRUE(has_eigenvalue(h, std::polar(1.0, -l1 * t.period_x), 1e-12));
}

TEST(Holonomy, LoopAndReverseCancel) {
  const auto c = perturb(semisimple_model(ss({0.1, 0.2}, {1.0, 0.5}, -0.3)), 0.5, 0.2, 5);
  Loop l;
  l.kind = LoopKind::polyline;
  l.vertices = {{4.0, 0.0, 0.0, 0.0}, {9.0, 1.0, 2.0, 0.5}, {6.0, 2.5, 1.0, 3.0}};
  const Mat2 a = holonomy(c, l);
  const Mat2 b = holonomy(c, l.reverse());
  EXPECT_LT((a * b - Mat2::Identity()).norm(), 1e-8);
  EXPECT_LT(unitarity_defect(a), 1e-12);
}

TEST(Holonomy, SecondOrderConvergence) {
  const auto c = perturb(semisimple_model(ss({0.1, 0.2}, {1.0, 0.5}, -0.3)), 0.5, 0.5, 9);
  Loop l;
  l.kind = LoopKind::theta_circle;
  l.base = {3.0, 0.0, 1.0, 2.0};
  const Mat2 ref = holonomy(c, l, 8192);
  const double e1 = (holonomy(c, l, 32) - ref).norm();
  const double e2 = (holonomy(c, l, 64) - ref).norm();
  EXPECT_GT(e1 / e2, 3.5);
  EXPECT_LT(e1 / e2, 4.5);
  EXPECT_THROW(holonomy(c, l, 8), PreconditionError);
}

TEST(Bianchi, AnalyticSourcesSatisfyIt) {
  const auto c = perturb(semisimple_model(ss({0.1, 0.2}, {1.0, 0.5}, -0.3)), 0.5, 0.3, 21);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Point p{3.0 + 50 * U(rng), kTwoPi * U(rng), kTwoPi * U(rng), kTwoPi * U(rng)};
    EXPECT_LE(bianchi_defect(c, p), 1e-6);
  }
}

TEST(MonodromyDrift, FlatFamily) {
  CircleFamily fam{{2.0, 0.0, 0.0, 0.0}, {5.0, 0.0, 0.0, 0.0}, kX};
  DriftOptions o;
  o.s_steps = 64;
  const auto r = monodromy_drift_defect(flat_connection(), fam, o);
  EXPECT_LE(r.defect, 0.0);
  EXPECT_EQ(r.max_lhs, 0.0);
}

TEST(MonodromyDrift, AbelianClosedForm) {
  // A = i s3 dx / r: m(t) = exp(-i s3 2 pi / r(t)), |dm/dt| = sqrt2 2 pi dr / r^2 = RHS
  ConnectionSource c(
      [](const Point& p) {
        Components a;
        a[kX] = su2::idiag(1.0 / p.r);
        return a;
      },
      [](const Point& p) {
        Jet j;
        j.value[kX] = su2::idiag(1.0 / p.r);
        j.d[kR][kX] = su2::idiag(-1.0 / (p.r * p.r));
        return j;
      },
      RadialDomain{0.5}, TorusSpec{}, "abelian");
  CircleFamily fam{{2.0, 0.0, 0.0, 0.0}, {3.0, 0.0, 0.0, 0.0}, kX};
  DriftOptions o;
  o.s_steps = 256;
  const auto r = monodromy_drift_defect(c, fam, o);
  for (std::size_t k = 0; k < r.t.size(); ++k) {
    const double rad = 2.0 + r.t[k];
    const double exact = std::sqrt(2.0) * kTwoPi / (rad * rad);
    EXPECT_NEAR(r.lhs[k], exact, 1e-8);
    EXPECT_NEAR(r.rhs[k], exact, 1e-8);
  }
}

TEST(MonodromyDrift, PerturbedFlatRespectsInequality) {
  const auto c = perturb(flat_connection(TorusSpec{}, 1.0), 0.5, 0.5, 33);
  CircleFamily fam{{3.0, 0.2, 0.0, 0.0}, {6.0, 0.2, 0.0, 1.0}, kX};
  DriftOptions o;
  o.s_steps = 400;
  const auto r = monodromy_drift_defect(c, fam, o);
  EXPECT_LE(r.defect, 1e-3);
  EXPECT_GT(r.max_rhs, 0.0);
}

TEST(Weitzenbock, ZeroField) {
  FourierField f;
  f.R = 1.0;
  f.R_outer = 2.0;
  EXPECT_EQ(weitzenbock_defect(f, {}).defect, 0.0);
}

TEST(Weitzenbock, SingleModeClosedForm) {
  FourierField f;
  f.R = 2.0;
  f.R_outer = 4.0;
  FourierTerm t;
  t.component = 3;
  t.n = 1;
  t.phase = -kPi / 2;  // cos(x - pi/2) = sin x
  f.terms = {t};
  const auto r = weitzenbock_defect(f, {});
  // |d a|^2 = |nabla a|^2 = 2 cos^2 x, integrated over T x annulus x circle
  const double expected = 2.0 * kPi * kTwoPi * kTwoPi * (16.0 - 4.0) / 2.0;
  EXPECT_NEAR(r.d_sq, expected, 1e-9 * expected);
  EXPECT_NEAR(r.nabla_sq, expected, 1e-9 * expected);
  EXPECT_LE(std::abs(r.defect), 1e-6);
}

TEST(Weitzenbock, RandomFixturesNontrivialGamma) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto f = make_fourier_fixture(seed, 5, 1.5, 3.0);
    const auto r = weitzenbock_defect(f, {0.3, -0.7});
    EXPECT_LE(std::abs(r.defect), 1e-6) << "seed " << seed;
    EXPECT_GT(r.nabla_sq, 1e-3);
  }
}

TEST(Weitzenbock, BoundaryViolationReported) {
  FourierField f;
  f.R = 1.0;
  f.R_outer = 2.0;
  FourierTerm t;
  t.component = 0;
  f.terms = {t};
  EXPECT_THROW(weitzenbock_defect(f, {}), PreconditionError);
}
