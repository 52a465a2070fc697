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

bool is_diagonal(const Components& c) {
  for (const auto& m : c.a)
    if (m(0, 1) != 0.0 || m(1, 0) != 0.0) return false;
  return true;
}

double ortho_norm(const Components& c, double r) {
  return std::sqrt(c[kR].squaredNorm() + c[kTheta].squaredNorm() / (r * r) +
                   c[kX].squaredNorm() + c[kY].squaredNorm());
}

}  // namespace

TEST(SemisimpleModel, TrivialParamsGiveFlat) {
  const auto c = semisimple_model(ss(0.0, 0.0, 0.0));
  const auto v = c.evaluate({2.0, 1.0, 0.0, 0.0});
  for (const auto& m : v.a) EXPECT_EQ(m.norm(), 0.0);
}

TEST(SemisimpleModel, AlphaOnly) {
  const auto v = semisimple_model(ss(0.0, 0.0, 0.25)).evaluate({2.0, 1.0, 0.3, 0.4});
  EXPECT_EQ(v[kTheta], su2::idiag(0.25));
  EXPECT_EQ(v[kR].norm(), 0.0);
  EXPECT_EQ(v[kX].norm(), 0.0);
  EXPECT_EQ(v[kY].norm(), 0.0);
}

TEST(SemisimpleModel, MuNormalization) {
  // mu = 1 means mu1 = 2: a_x = i s3 (mu1 cos)/r = i diag(1, -1) at r = 2, theta = 0
  const auto v = semisimple_model(ss(0.0, 1.0, 0.0)).evaluate({2.0, 0.0, 0.0, 0.0});
  EXPECT_LT((v[kX] - su2::idiag(1.0)).norm(), 1e-15);
  EXPECT_LT(v[kY].norm(), 1e-15);
}

TEST(SemisimpleModel, MatchesClosedFormula) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Complex lam{U(rng), U(rng)}, mu{U(rng), U(rng)};
    const double alpha = 0.49 * U(rng);
    const double r = 1.0 + 100.0 * std::abs(U(rng)), th = kPi * U(rng);
    const auto v = semisimple_model(ss(lam, mu, alpha)).evaluate({r, th, 0.0, 0.0});
    const double l1 = 2 * lam.real(), l2 = 2 * lam.imag(), m1 = 2 * mu.real(), m2 = 2 * mu.imag();
    const double ax = l1 + (m1 * std::cos(th) + m2 * std::sin(th)) / r;
    const double ay = l2 + (m2 * std::cos(th) - m1 * std::sin(th)) / r;
    EXPECT_LT((v[kX] - su2::idiag(ax)).norm(), 1e-14);
    EXPECT_LT((v[kY] - su2::idiag(ay)).norm(), 1e-14);
    EXPECT_LT((v[kTheta] - su2::idiag(alpha)).norm(), 1e-15);
    EXPECT_TRUE(is_diagonal(v));
  }
}

TEST(SemisimpleModel, LiftOfHitchinModelIsExact) {
  const auto p = ss({0.1, 0.2}, {2.0, -1.0}, 0.3);
  const auto a = semisimple_model(p);
  const auto b = lift(hitchin_model(p));
  for (double r : {1.5, 10.0, 1e3}) {
    const auto va = a.evaluate({r, 0.7, 0.0, 0.0});
    const auto vb = b.evaluate({r, 0.7, 0.0, 0.0});
    for (int mu = 0; mu < 4; ++mu) EXPECT_EQ(va[mu], vb[mu]);
  }
}

TEST(SemisimpleModel, Errors) {
  ModelParams p;
  p.kind = ModelKind::nilpotent;
  EXPECT_THROW(semisimple_model(p), PreconditionError);
  EXPECT_THROW(semisimple_model(ss(0.0, 0.0, 0.5)), PreconditionError);
  EXPECT_THROW(semisimple_model(ss(0.0, 1.0, 0.0)).evaluate({0.5, 0.0, 0.0, 0.0}), DomainError);
  p.mu = 1.0;
  EXPECT_THROW(p.validate(), PreconditionError);
}

TEST(NilpotentModel, ThetaComponentAtE) {
  const auto v = nilpotent_model().evaluate({std::exp(1.0), 0.3, 0.0, 0.0});
  EXPECT_LT((v[kTheta] - su2::idiag(-0.5)).norm(), 1e-15);
}

TEST(NilpotentModel, NeverDiagonal) {
  const auto c = nilpotent_model();
  for (double r : {1.01, 2.0, 50.0, 1e4}) EXPECT_FALSE(is_diagonal(c.evaluate({r, 0.2, 0.0, 0.0})));
  EXPECT_THROW(c.evaluate({1.0, 0.0, 0.0, 0.0}), DomainError);
  EXPECT_THROW(c.evaluate({0.5, 0.0, 0.0, 0.0}), DomainError);
}

TEST(NilpotentModel, PrintedFormulaIsAGaugeTransform) {
  const auto c = nilpotent_model_printed_gauge();
  for (double r : {1.5, 20.0}) {
    for (double th : {0.0, 1.0, 4.0}) {
      const auto v = c.evaluate({r, th, 0.3, 0.1});
      const double L = 2 * std::log(r);
      const Complex e = std::polar(1.0, -th);
      Mat2 ax, ay;
      ax << 0.0, e / (r * L), -std::conj(e) / (r * L), 0.0;
      ay << 0.0, -kI * e / (r * L), -kI * std::conj(e) / (r * L), 0.0;
      EXPECT_LT((v[kX] - ax).norm(), 1e-14);
      EXPECT_LT((v[kY] - ay).norm(), 1e-14);
      EXPECT_LT((v[kTheta] - su2::idiag(-1.0 / L)).norm(), 1e-14);
    }
  }
}

TEST(NilpotentModel, CurvatureClosedForm) {
  // |F| = sqrt(1 + 2 (l + 1)^2) / (r^2 l^2), l = ln r (gauge invariant)
  const auto c = nilpotent_model();
  for (double r : {3.0, 100.0, 1e4}) {
    const double l = std::log(r);
    const double expected = std::sqrt(1.0 + 2.0 * (l + 1) * (l + 1)) / (r * r * l * l);
    EXPECT_NEAR(curvature(c, {r, 0.4, 0.0, 0.0}).norm(), expected, 1e-12 * expected);
    EXPECT_NEAR(curvature(nilpotent_model_printed_gauge(), {r, 0.4, 0.0, 0.0}).norm(), expected,
                1e-12 * expected);
  }
}

TEST(NilpotentModel, AsdResidual) {
  const auto c = nilpotent_model();
  DiffOptions fd;
  fd.mode = DerivativeMode::finite_difference;
  for (double r = 10.0; r <= 1000.0; r *= 1.7) {
    EXPECT_LE(asd_residual(c, {r, 0.3 * r, 0.0, 0.0}), 1e-6);
    EXPECT_LE(asd_residual(c, {r, 0.3 * r, 0.0, 0.0}, fd), 1e-6);
  }
}

TEST(Perturb, ZeroAmplitudeIsIdentical) {
  const auto base = semisimple_model(ss(0.1, 1.0, 0.2));
  const auto c = perturb(base, 0.5, 0.0, 1);
  const Point p{7.0, 0.4, 0.1, 0.2};
  for (int mu = 0; mu < 4; ++mu) EXPECT_EQ(base.evaluate(p)[mu], c.evaluate(p)[mu]);
  EXPECT_THROW(perturb(base, 0.0, 0.1, 1), PreconditionError);
  EXPECT_THROW(perturb(base, -1.0, 0.1, 1), PreconditionError);
}

TEST(Perturb, DecayBound) {
  const auto flat = flat_connection(TorusSpec{}, 1.0);
  const auto c = perturb(flat, 0.5, 0.1, 17);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double sup = 0.0, grad_sup_inner = 0.0, grad_sup_outer = 0.0;
  for (double r : {2.0, 5.0, 50.0, 500.0, 5000.0}) {
    for (int i = 0; i < 400; ++i) {
      const Point p{r, kTwoPi * U(rng), kTwoPi * U(rng), kTwoPi * U(rng)};
      sup = std::max(sup, std::pow(r, 1.5) * ortho_norm(c.evaluate(p), r));
      const Jet j = c.jet(p);
      double g = 0.0;
      for (int mu = 0; mu < 4; ++mu) g += ortho_norm(j.d[mu], r) / (mu == kTheta ? r : 1.0);
      (r < 100 ? grad_sup_inner : grad_sup_outer) =
          std::max(r < 100 ? grad_sup_inner : grad_sup_outer, std::pow(r, 2.5) * g);
    }
  }
  EXPECT_LE(sup, 0.1 * (1 + 1e-12));
  EXPECT_GT(sup, 0.0);
  // r^{2.5} |grad a| stays bounded (coordinate-frame derivatives of orthonormal components)
  EXPECT_LT(grad_sup_outer, 2.0 * grad_sup_inner + 1.0);
}

TEST(Perturb, SeedDeterminism) {
  const auto base = semisimple_model(ss(0.1, 1.0, 0.2));
  const auto a = perturb(base, 0.5, 0.1, 99);
  const auto b = perturb(base, 0.5, 0.1, 99);
  const auto d = perturb(base, 0.5, 0.1, 100);
  const Point p{12.0, 0.4, 0.1, 0.2};
  for (int mu = 0; mu < 4; ++mu) EXPECT_EQ(a.evaluate(p)[mu], b.evaluate(p)[mu]);
  EXPECT_NE(a.evaluate(p)[kX], d.evaluate(p)[kX]);
}

TEST(Perturb, AnalyticJetMatchesFiniteDifferences) {
  const auto c = perturb(flat_connection(TorusSpec{3.0, 4.0}, 1.0), 0.5, 0.3, 5);
  DiffOptions fd;
  fd.mode = DerivativeMode::finite_difference;
  for (double r : {1.5, 3.0, 30.0}) {
    const Point p{r, 0.8, 0.6, 2.2};
    const Jet a = c.jet(p);
    const Jet b = connection_jet(c, p, fd);
    for (int mu = 0; mu < 4; ++mu)
      for (int nu = 0; nu < 4; ++nu) EXPECT_LT((a.d[mu][nu] - b.d[mu][nu]).norm(), 1e-8);
  }
}
