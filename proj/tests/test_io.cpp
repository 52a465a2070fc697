#include "ipl/io.hpp"

#include <gtest/gtest.h>

using namespace ipl;

namespace {

ModelParams params() {
  ModelParams p;
  p.lambda = Complex(0.1, -0.05);
  p.mu = Complex(1.0, 0.5);
  p.alpha = 0.25;
  return p;
}

AnnulusGrid grid() {
  AnnulusGrid g;
  g.r_min = 5.0;
  g.r_max = 50.0;
  g.n_r = 64;
  g.n_theta = 16;
  g.n_x = 4;
  g.n_y = 4;
  g.spacing = Spacing::log_radial;
  return g;
}

}  // namespace

TEST(Json, ModelParams) {
  const json j = json::parse(R"({"lambda": [0.1, -0.05], "mu": [1, 0.5], "alpha": 0.25, "kind": "semisimple"})");
  const auto p = model_from_json(j);
  EXPECT_EQ(p.lambda, Complex(0.1, -0.05));
  EXPECT_EQ(p.mu, Complex(1.0, 0.5));
  EXPECT_EQ(p.alpha, 0.25);
  EXPECT_EQ(to_json(p), j);
  EXPECT_THROW(model_from_json(json::parse(R"({"alpha": 0.5})")), SchemaError);
  EXPECT_THROW(model_from_json(json::parse(R"({"kind": "other"})")), SchemaError);
  EXPECT_THROW(model_from_json(json::parse(R"({"mu": [1, 2, 3]})")), SchemaError);
  EXPECT_THROW(model_from_json(json::parse(R"({"nu": 1})")), SchemaError);
  EXPECT_THROW(model_from_json(json::parse(R"({"kind": "nilpotent", "mu": 1})")), SchemaError);
}

TEST(Json, GridAndTorus) {
  const auto g = grid();
  const auto h = grid_from_json(to_json(g));
  EXPECT_EQ(h.n_r, g.n_r);
  EXPECT_EQ(h.spacing, g.spacing);
  EXPECT_EQ(h.r_max, g.r_max);
  EXPECT_THROW(grid_from_json(json::parse(R"({"r_min": 2, "r_max": 1, "n_r": 8, "n_theta": 8, "n_x": 4, "n_y": 4})")),
               SchemaError);
  EXPECT_THROW(grid_from_json(json::parse(R"({"r_min": 1, "r_max": 2, "n_r": 8.5, "n_theta": 8, "n_x": 4, "n_y": 4})")),
               SchemaError);
  EXPECT_THROW(torus_from_json(json::parse(R"({"period_x": -1, "period_y": 1})")), SchemaError);
}

TEST(TrigWeights, InterpolatesBandLimited) {
  for (int n : {4, 8, 16}) {
    const double period = 3.0;
    for (double t : {0.0, 0.37, 1.5, 2.99}) {
      const auto w = detail::trig_weights(n, period, t);
      double sum = 0.0, c = 0.0;
      for (int j = 0; j < n; ++j) {
        sum += w[j];
        c += w[j] * std::cos(kTwoPi * j / n);
      }
      EXPECT_NEAR(sum, 1.0, 1e-13);
      EXPECT_NEAR(c, std::cos(kTwoPi * t / period), 1e-13);
    }
  }
}

TEST(SampledConnection, InterpolatesModel) {
  const auto c = semisimple_model(params());
  const auto s = sample_connection(c, grid());
  const auto src = to_source(s);
  EXPECT_GT(src.grid_spacing(), 0.0);
  double err = 0.0;
  for (double r : {5.0, 7.3, 11.1, 23.0, 49.0})
    for (double th : {0.0, 0.4, 2.9, 5.5}) {
      const Point p{r, th, 0.7, 1.9};
      const auto a = c.evaluate(p), b = src.evaluate(p);
      for (int mu = 0; mu < 4; ++mu) err = std::max(err, (a[mu] - b[mu]).norm());
    }
  EXPECT_LT(err, 1e-5);
  EXPECT_THROW(src.evaluate(Point{4.0, 0.0, 0.0, 0.0}), DomainError);
  // finite-difference curvature of the interpolant stays near ASD
  EXPECT_LT(asd_residual(src, Point{20.0, 1.0, 0.3, 0.2}), 1e-4);
}

TEST(SampledConnection, JsonRoundTripIsExact) {
  const auto s = sample_connection(semisimple_model(params()), grid());
  const std::string text = to_json(s).dump();
  const auto back = sampled_connection_from_json(json::parse(text));
  ASSERT_EQ(back.values.size(), s.values.size());
  for (std::size_t k = 0; k < s.values.size(); ++k)
    for (int mu = 0; mu < 4; ++mu) EXPECT_EQ(back.values[k][mu], s.values[k][mu]);
  json bad = to_json(s);
  bad["components"].erase(0);
  EXPECT_THROW(sampled_connection_from_json(bad), SchemaError);
  bad = to_json(s);
  bad["reduced"] = true;
  EXPECT_THROW(sampled_connection_from_json(bad), SchemaError);
}

TEST(SampledHiggsPair, RoundTrip) {
  const auto pair = hitchin_model(params());
  auto g = grid();
  const auto s = sample_pair(pair, g);
  const json j = to_json(s);
  EXPECT_TRUE(j.at("reduced").get<bool>());
  EXPECT_FALSE(j.at("grid").contains("n_x"));
  const auto back = sampled_pair_from_json(json::parse(j.dump()));
  for (std::size_t k = 0; k < s.values.size(); ++k) EXPECT_EQ(back.values[k].psi, s.values[k].psi);
  const auto interp = to_pair(back);
  const auto a = pair.value(13.0, 1.1), b = interp.value(13.0, 1.1);
  EXPECT_LT((a.psi - b.psi).norm(), 1e-6);
  EXPECT_LT((a.b_theta - b.b_theta).norm(), 1e-6);
  EXPECT_THROW(sampled_connection_from_json(j), SchemaError);
}
