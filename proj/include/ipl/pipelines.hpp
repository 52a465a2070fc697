#pragma once

// Config-driven verification pipelines behind the ipl subcommands. Parsing is
// complete (and throws SchemaError) before any computation starts.

#include "ipl/asymptotics.hpp"
#include "ipl/config.hpp"
#include "ipl/oracles.hpp"
#include "ipl/report.hpp"

#include <filesystem>
#include <random>
#include <variant>

namespace ipl {

namespace pipeline {

using config::Section;

struct Common {
  std::string subcommand;
  std::optional<std::uint64_t> seed;
  std::string label;
  TorusSpec torus{};
};

inline std::uint64_t require_seed(const Common& c, const char* why) {
  if (!c.seed) throw SchemaError(std::string("seed: required (") + why + " is randomized)");
  return *c.seed;
}

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s{"conventions", "model-check", "invariants", "spectral",
                                          "stability",   "moduli",      "suite"};
  return s;
}

/// Independent stream per purpose, derived from the run seed.
inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t purpose) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(purpose)};
  return std::mt19937_64(seq);
}

inline json point_json(const Point& p) { return json::array({p.r, p.theta, p.x, p.y}); }

inline json xi_json(const DualTorusPoint& p) { return json::array({p.xi1, p.xi2}); }

// ---------------------------------------------------------------------------
// conventions

struct ConventionsConfig {
  Common common;
  int samples = 200;
  std::array<double, 2> r_range{5.0, 500.0};
  double asd_tol = 1e-8;
  double margin = 1e-3;
  int equivalence_samples = 100;
  double equivalence_tol = 1e-8;
};

inline ConventionsConfig parse_conventions(Section& root, Common common) {
  ConventionsConfig c;
  c.common = common;
  require_seed(common, "conventions");
  if (auto s = root.optional_child("orientation")) {
    c.samples = s->count("samples", c.samples);
    c.r_range = s->range("r_range", c.r_range);
    c.asd_tol = s->positive("tol", c.asd_tol);
    c.margin = s->positive("margin", c.margin);
    s->done();
  }
  if (auto s = root.optional_child("equivalence")) {
    c.equivalence_samples = s->count("samples", c.equivalence_samples);
    c.equivalence_tol = s->positive("tol", c.equivalence_tol);
    s->done();
  }
  return c;
}

/// Torus-invariant pair solving neither equation: the nilpotent pair with a
/// scaled Higgs field plus a non-holomorphic term.
inline HiggsPairOnPlane bent_pair(double scale, const Mat2& m) {
  const HiggsPairOnPlane base = hitchin_model(ModelParams{{}, {}, 0.0, ModelKind::nilpotent});
  auto value = [base, scale, m](double r, double th) {
    PairValue v = base.value(r, th);
    v.psi = scale * v.psi + m * (std::cos(th) / r);
    return v;
  };
  auto jet = [base, scale, m](double r, double th) {
    PairJet j = base.jet(r, th);
    j.value.psi = scale * j.value.psi + m * (std::cos(th) / r);
    j.d[0].psi = scale * j.d[0].psi - m * (std::cos(th) / (r * r));
    j.d[1].psi = scale * j.d[1].psi - m * (std::sin(th) / r);
    return j;
  };
  return HiggsPairOnPlane(value, jet, base.domain(), "bent");
}

inline Report run_conventions(const ConventionsConfig& c) {
  Report rep;
  const TorusSpec& t = c.common.torus;
  rep.results["sheet"] = convention_sheet(t);
  rep.results["conventions_hash"] = hex64(fnv1a(convention_sheet().dump()));

  auto rng = stream(*c.common.seed, 1);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double asd_sup = 0.0, reflected_inf = std::numeric_limits<double>::infinity();
  for (int i = 0; i < c.samples; ++i) {
    ModelParams p;
    p.lambda = Complex(U(rng) - 0.5, U(rng) - 0.5);
    p.mu = std::polar(0.5 + U(rng), kTwoPi * U(rng));
    p.alpha = U(rng) - 0.5;
    const Point q{c.r_range[0] + (c.r_range[1] - c.r_range[0]) * U(rng), kTwoPi * U(rng),
                  t.period_x * U(rng), t.period_y * U(rng)};
    asd_sup = std::max(asd_sup, asd_residual(semisimple_model(p, 1.0, t), q));
    reflected_inf = std::min(reflected_inf, asd_residual(theta_reflected_model(p, 1.0, t), q) * q.r * q.r);
  }
  rep.at_most("orientation.semisimple_asd_sup", asd_sup, c.asd_tol);
  rep.at_least("orientation.reflected_residual_r2_inf", reflected_inf, c.margin,
               "reflected model is anti-ASD: residual r^2 stays bounded below");

  double eq_err = 0.0, eq_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < c.equivalence_samples; ++i) {
    const Mat2 m = su2::from_vector({U(rng) - 0.5, U(rng) - 0.5, U(rng) - 0.5}) * kI;
    const auto pair = bent_pair(0.5 + U(rng), m);
    const auto conn = lift(pair, t);
    const double r = 2.0 + 30.0 * U(rng), th = kTwoPi * U(rng);
    const double asd = asd_residual(conn, {r, th, t.period_x * U(rng), t.period_y * U(rng)});
    const double eq = hitchin_residual(pair, r, th).asd_equivalent();
    eq_err = std::max(eq_err, std::abs(asd - eq) / (1.0 + asd));
    eq_min = std::min(eq_min, asd);
  }
  rep.at_most("equivalence.relative_error", eq_err, c.equivalence_tol,
              "|F+| against sqrt(c1 |F_B + [psi,psi*]|^2 + c2 |dbar psi|^2)");
  rep.results["equivalence_min_residual"] = eq_min;

  const auto basis = dual_lattice(t);
  bool members = true, half = true;
  for (Complex b : basis) {
    members = members && kernel_scan(b, t, 8);
    half = half && !kernel_scan(0.5 * b, t, 8);
  }
  rep.flag("lattice.basis_members", members);
  rep.flag("lattice.half_basis_excluded", half);
  rep.flag("quaternion.triple_product", quaternion_check().ok(), "I1 I2 I3 = -Id");
  return rep;
}

// ---------------------------------------------------------------------------
// model-check

struct ResidualSpec {
  int samples = 1000;
  std::array<double, 2> r_range{5.0, 500.0};
  double tol = 1e-8;
};

struct DecaySpec {
  std::vector<double> rings;
  double exponent = -2.0;
  double tol = 0.05;
};

struct NilpotentDecaySpec {
  std::vector<double> rings;
  double log_power = -2.0;
  double tol = 0.3;
};

struct DriftFamily {
  CircleFamily family;
  std::optional<ModelParams> model;  // flat when empty
  double amplitude = 0.5;
  double delta = 0.5;
};

struct InequalitySpec {
  std::optional<int> gap_samples;
  int gap_max_mode = 3;
  int gap_max_terms = 8;
  double gap_mu_max = 3.0;
  double gap_tol = 1e-12;

  std::vector<DriftFamily> drift;
  DriftOptions drift_options{};
  double drift_tol = 1e-3;

  std::optional<int> weitzenbock_fixtures;
  int weitzenbock_terms = 5;
  double weitzenbock_R = 1.5;
  double weitzenbock_R_outer = 3.0;
  DiagonalFlat weitzenbock_gamma{0.3, -0.7};
  double weitzenbock_tol = 1e-6;

  std::vector<DiagonalFlat> poincare;
  int poincare_N = 8;
  int poincare_trials = 100;
  double poincare_rel_tol = 0.01;
};

struct ModelCheckConfig {
  Common common;
  std::vector<ModelParams> models;
  std::optional<ResidualSpec> residual;
  std::optional<ResidualSpec> nilpotent;
  std::optional<DecaySpec> decay;
  std::optional<NilpotentDecaySpec> nilpotent_decay;
  std::optional<InequalitySpec> inequalities;
};

inline ResidualSpec parse_residual(Section s, ResidualSpec d) {
  d.samples = s.count("samples", d.samples);
  d.r_range = s.range("r_range", d.r_range);
  d.tol = s.positive("tol", d.tol);
  s.done();
  return d;
}

inline int circle_of(const std::string& s) { return s == "theta" ? kTheta : (s == "x" ? kX : kY); }

inline Point point_of(Section& s, const std::string& key) {
  const auto v = s.numbers(key);
  if (v.size() != 4) throw SchemaError(s.path(key) + ": expected [r, theta, x, y]");
  if (!(v[0] > 0.0)) throw SchemaError(s.path(key) + ": r must be positive");
  return {v[0], v[1], v[2], v[3]};
}

inline InequalitySpec parse_inequalities(Section s) {
  InequalitySpec q;
  if (auto g = s.optional_child("fourier_gap")) {
    q.gap_samples = g->count("samples", 10000);
    q.gap_max_mode = g->count("max_mode", q.gap_max_mode, 0, 64);
    q.gap_max_terms = g->count("max_terms", q.gap_max_terms, 1, 1000);
    q.gap_mu_max = g->positive("mu_max", q.gap_mu_max);
    q.gap_tol = g->positive("tol", q.gap_tol);
    g->done();
  }
  if (auto d = s.optional_child("drift")) {
    const json& fams = d->raw("families");
    if (!fams.is_array() || fams.empty()) throw SchemaError(d->path("families") + ": expected a non-empty array");
    for (std::size_t i = 0; i < fams.size(); ++i) {
      Section f(fams[i], d->path("families") + "[" + std::to_string(i) + "]");
      DriftFamily df;
      df.family.p0 = point_of(f, "p0");
      df.family.p1 = point_of(f, "p1");
      df.family.circle = circle_of(f.text("circle", "x", {"theta", "x", "y"}));
      if (f.has("model")) df.model = model_from_json(f.raw("model"));
      df.amplitude = f.number("amplitude", df.amplitude);
      if (df.amplitude < 0.0) throw SchemaError(f.path("amplitude") + ": must be nonnegative");
      df.delta = f.positive("delta", df.delta);
      f.done();
      q.drift.push_back(df);
    }
    q.drift_options.s_steps = d->count("s_steps", 400, 16);
    q.drift_options.t_samples = d->count("t_samples", 10);
    q.drift_options.transport_steps = d->count("transport_steps", 200);
    q.drift_tol = d->positive("tol", q.drift_tol);
    d->done();
  }
  if (auto w = s.optional_child("weitzenbock")) {
    q.weitzenbock_fixtures = w->count("fixtures", 20);
    q.weitzenbock_terms = w->count("terms", q.weitzenbock_terms, 1, 100);
    q.weitzenbock_R = w->positive("R", q.weitzenbock_R);
    q.weitzenbock_R_outer = w->positive("R_outer", q.weitzenbock_R_outer);
    if (!(q.weitzenbock_R_outer > q.weitzenbock_R)) throw SchemaError(w->path("R_outer") + ": must exceed R");
    const auto g = w->pair("gamma", {q.weitzenbock_gamma.c1, q.weitzenbock_gamma.c2});
    q.weitzenbock_gamma = {g[0], g[1]};
    q.weitzenbock_tol = w->positive("tol", q.weitzenbock_tol);
    w->done();
  }
  if (auto p = s.optional_child("poincare")) {
    const json& flats = p->raw("flats");
    if (!flats.is_array() || flats.empty()) throw SchemaError(p->path("flats") + ": expected a non-empty array");
    for (const auto& f : flats) {
      if (!f.is_array() || f.size() != 2 || !f[0].is_number() || !f[1].is_number())
        throw SchemaError(p->path("flats") + ": expected [c1, c2] pairs");
      q.poincare.push_back({f[0].get<double>(), f[1].get<double>()});
    }
    q.poincare_N = p->count("N", q.poincare_N, 4, 64);
    q.poincare_trials = p->count("trials", q.poincare_trials);
    q.poincare_rel_tol = p->positive("rel_tol", q.poincare_rel_tol);
    p->done();
  }
  s.done();
  return q;
}

inline ModelCheckConfig parse_model_check(Section& root, Common common) {
  ModelCheckConfig c;
  c.common = common;
  if (root.has("models")) c.models = config::models(root, "models");
  if (auto s = root.optional_child("residual")) c.residual = parse_residual(*s, {});
  if (auto s = root.optional_child("nilpotent")) c.nilpotent = parse_residual(*s, {1000, {10.0, 1000.0}, 1e-6});
  if (auto s = root.optional_child("decay")) {
    DecaySpec d;
    d.rings = config::rings(*s, "rings", {10, 20, 40, 80, 160, 320, 640, 1280});
    d.exponent = s->number("exponent", d.exponent);
    d.tol = s->positive("tol", d.tol);
    s->done();
    c.decay = d;
  }
  if (auto s = root.optional_child("nilpotent_decay")) {
    NilpotentDecaySpec d;
    std::vector<double> def;
    for (int i = 0; i <= 8; ++i) def.push_back(std::exp(2.0 + 0.5 * i));
    d.rings = config::rings(*s, "rings", def);
    d.log_power = s->number("log_power", d.log_power);
    d.tol = s->positive("tol", d.tol);
    s->done();
    c.nilpotent_decay = d;
  }
  if (auto s = root.optional_child("inequalities")) c.inequalities = parse_inequalities(*s);
  if (!c.residual && !c.nilpotent && !c.decay && !c.nilpotent_decay && !c.inequalities)
    throw SchemaError("model-check: expected at least one of residual, nilpotent, decay, nilpotent_decay, inequalities");
  if ((c.residual || c.decay) && c.models.empty()) throw SchemaError("model-check: 'models' is required");
  const bool randomized = c.residual || c.nilpotent ||
                          (c.inequalities && (c.inequalities->gap_samples || !c.inequalities->drift.empty() ||
                                              c.inequalities->weitzenbock_fixtures ||
                                              !c.inequalities->poincare.empty()));
  if (randomized) require_seed(common, "model-check");
  return c;
}

inline Point random_point(std::mt19937_64& rng, const std::array<double, 2>& r, const TorusSpec& t) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  return {r[0] + (r[1] - r[0]) * U(rng), kTwoPi * U(rng), t.period_x * U(rng), t.period_y * U(rng)};
}

inline json decay_json(const DecayFit& f) {
  return {{"gamma", f.gamma}, {"log_power", f.log_power}, {"amplitude", f.amplitude},
          {"non_monotone", f.non_monotone}, {"rings", f.rings}, {"sup", f.sup}};
}

inline void run_inequalities(const InequalitySpec& q, const Common& common, Report& rep) {
  const std::uint64_t seed = *common.seed;
  json out;
  if (q.gap_samples) {
    auto rng = stream(seed, 20);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::normal_distribution<double> N01;
    const double rho = 1.0 / std::sqrt(2.0);
    double worst = std::numeric_limits<double>::infinity();
    int outside = 0;
    for (int s = 0; s < *q.gap_samples; ++s) {
      const Complex lambda = std::polar(0.1 * rho * std::sqrt(U(rng)), kTwoPi * U(rng));
      const Complex mu = std::polar(q.gap_mu_max * U(rng), kTwoPi * U(rng));
      const Complex w =
          std::polar(10.0 * std::abs(mu) / rho * (1.0 + 10.0 * U(rng)) + 1e-9, kTwoPi * U(rng));
      std::vector<ModeCoefficient> sigma;
      const int terms = 1 + static_cast<int>(U(rng) * q.gap_max_terms);
      const int span = 2 * q.gap_max_mode + 1;
      for (int k = 0; k < terms; ++k)
        sigma.push_back({static_cast<int>(U(rng) * span) - q.gap_max_mode,
                         static_cast<int>(U(rng) * span) - q.gap_max_mode, Complex(N01(rng), N01(rng))});
      const auto g = fourier_gap(lambda, mu, w, sigma);
      outside += !g.in_region;
      worst = std::min(worst, g.gap);
    }
    rep.at_least("fourier_gap.min", worst, -q.gap_tol);
    rep.check("fourier_gap.samples_outside_region", outside, Relation::equal, 0.0);
    out["fourier_gap"] = {{"samples", *q.gap_samples}, {"min_gap", worst}};
  }
  if (!q.drift.empty()) {
    json fams = json::array();
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < q.drift.size(); ++i) {
      const auto& f = q.drift[i];
      const ConnectionSource base = f.model ? semisimple_model(*f.model, 1.0, common.torus)
                                            : flat_connection(common.torus, 1.0);
      const auto c = perturb(base, f.delta, f.amplitude, seed + 1000 + i);
      const auto r = monodromy_drift_defect(c, f.family, q.drift_options);
      worst = std::max(worst, r.defect);
      fams.push_back({{"defect", r.defect}, {"max_lhs", r.max_lhs}, {"max_rhs", r.max_rhs},
                      {"p0", point_json(f.family.p0)}, {"p1", point_json(f.family.p1)}});
    }
    rep.at_most("monodromy_drift.defect_max", worst, q.drift_tol);
    out["monodromy_drift"] = fams;
  }
  if (q.weitzenbock_fixtures) {
    auto rng = stream(seed, 21);
    double worst = 0.0, smallest = std::numeric_limits<double>::infinity();
    for (int i = 0; i < *q.weitzenbock_fixtures; ++i) {
      const auto f = make_fourier_fixture(rng(), q.weitzenbock_terms, q.weitzenbock_R,
                                          q.weitzenbock_R_outer, common.torus);
      const auto r = weitzenbock_defect(f, q.weitzenbock_gamma);
      worst = std::max(worst, std::abs(r.defect));
      smallest = std::min(smallest, r.nabla_sq);
    }
    rep.at_most("weitzenbock.defect_max", worst, q.weitzenbock_tol);
    out["weitzenbock"] = {{"fixtures", *q.weitzenbock_fixtures}, {"defect_max", worst},
                          {"nabla_sq_min", smallest}};
  }
  if (!q.poincare.empty()) {
    json rows = json::array();
    double worst = 0.0;
    for (std::size_t i = 0; i < q.poincare.size(); ++i) {
      const auto& g = q.poincare[i];
      const double c = poincare_constant(g, common.torus, q.poincare_N);
      const double o = oracle::rayleigh_minimum(g, common.torus, q.poincare_trials, seed + 2000 + i);
      const double rel = std::abs(o - c) / c;
      worst = std::max(worst, rel);
      rows.push_back({{"gamma", {g.c1, g.c2}}, {"constant", c}, {"oracle", o}, {"relative_gap", rel}});
    }
    rep.at_most("poincare.relative_gap_max", worst, q.poincare_rel_tol);
    out["poincare"] = rows;
  }
  rep.results["inequalities"] = out;
}

inline Report run_model_check(const ModelCheckConfig& c) {
  Report rep;
  const TorusSpec& t = c.common.torus;
  if (c.residual) {
    auto rng = stream(*c.common.seed, 10);
    std::vector<Point> pts;
    for (int i = 0; i < c.residual->samples; ++i) pts.push_back(random_point(rng, c.residual->r_range, t));
    json rows = json::array();
    double sup = 0.0;
    for (const auto& p : c.models) {
      const auto conn = semisimple_model(p, 1.0, t);
      DiffOptions o;
      o.mode = DerivativeMode::analytic;
      std::vector<double> res(pts.size());
      parallel_for(pts.size(), [&](std::size_t k) { res[k] = asd_residual(conn, pts[k], o); });
      const double m = *std::max_element(res.begin(), res.end());
      sup = std::max(sup, m);
      rows.push_back({{"model", to_json(p)}, {"asd_residual_sup", m}});
    }
    rep.at_most("semisimple.asd_residual_sup", sup, c.residual->tol);
    rep.results["semisimple_residuals"] = rows;
  }
  if (c.nilpotent) {
    auto rng = stream(*c.common.seed, 11);
    const auto pair = hitchin_model(ModelParams{{}, {}, 0.0, ModelKind::nilpotent});
    const auto conn = nilpotent_model(1.0, t);
    double asd = 0.0, curv = 0.0, dbar = 0.0;
    for (int i = 0; i < c.nilpotent->samples; ++i) {
      const Point p = random_point(rng, c.nilpotent->r_range, t);
      asd = std::max(asd, asd_residual(conn, p));
      const auto h = hitchin_residual(pair, p.r, p.theta);
      curv = std::max(curv, h.curvature);
      dbar = std::max(dbar, h.dbar);
    }
    rep.at_most("nilpotent.asd_residual_sup", asd, c.nilpotent->tol);
    rep.at_most("nilpotent.hitchin_curvature_sup", curv, c.nilpotent->tol);
    rep.at_most("nilpotent.hitchin_dbar_sup", dbar, c.nilpotent->tol);
  }
  if (c.decay) {
    json rows = json::array();
    double worst = 0.0;
    int fitted = 0;
    for (const auto& p : c.models) {
      if (p.mu == Complex(0.0)) continue;  // the exponent law is stated for mu != 0
      DecayOptions o;
      o.fit_log_power = false;
      const auto f = decay_exponent(semisimple_model(p, 1.0, t), c.decay->rings, o);
      worst = std::max(worst, std::abs(f.gamma - c.decay->exponent));
      ++fitted;
      rows.push_back({{"model", to_json(p)}, {"fit", decay_json(f)}});
    }
    rep.at_most("semisimple.decay_exponent_deviation", worst, c.decay->tol);
    rep.at_least("semisimple.decay_models_fitted", fitted, 1);
    rep.results["semisimple_decay"] = rows;
  }
  if (c.nilpotent_decay) {
    const auto& d = *c.nilpotent_decay;
    const auto conn = nilpotent_model(1.0, t);
    const auto full = decay_exponent(conn, d.rings);
    DecayOptions pure;
    pure.parts = CurvatureParts::pure;
    const auto part = decay_exponent(conn, d.rings, pure);
    rep.at_most("nilpotent.log_power_deviation", std::abs(full.log_power - d.log_power), d.tol);
    rep.results["nilpotent_decay"] = {{"full", decay_json(full)}, {"pure_components", decay_json(part)}};
  }
  if (c.inequalities) run_inequalities(*c.inequalities, c.common, rep);
  return rep;
}

// ---------------------------------------------------------------------------
// invariants

struct InvariantTolerances {
  double lambda = 1e-4;
  double alpha = 1e-6;
  double mu = 1e-4;
};

struct InvariantsConfig {
  Common common;
  std::vector<ModelParams> models;
  std::optional<std::pair<double, double>> perturbation;  // (amplitude, delta)
  InvariantTolerances exact{};
  InvariantTolerances perturbed{1e-2, 1e-3, 1e-2};
  AsymptoticOptions options{};
  std::optional<std::filesystem::path> connection_file;
  std::optional<SampledConnection> sampled;
};

inline InvariantTolerances parse_tolerances(Section s, InvariantTolerances d) {
  d.lambda = s.positive("lambda", d.lambda);
  d.alpha = s.positive("alpha", d.alpha);
  d.mu = s.positive("mu", d.mu);
  s.done();
  return d;
}

inline InvariantsConfig parse_invariants(Section& root, Common common, const std::filesystem::path& base) {
  InvariantsConfig c;
  c.common = common;
  c.models = config::models(root, "models");
  c.options.compute_k = false;
  if (auto s = root.optional_child("perturbation")) {
    const double amp = s->positive("amplitude", 0.05);
    const double delta = s->positive("delta", 0.5);
    s->done();
    c.perturbation = std::make_pair(amp, delta);
    require_seed(common, "the perturbation");
  }
  if (auto s = root.optional_child("tolerances")) c.exact = parse_tolerances(*s, c.exact);
  if (auto s = root.optional_child("perturbed_tolerances")) c.perturbed = parse_tolerances(*s, c.perturbed);
  if (auto s = root.optional_child("options")) {
    c.options.rings = config::rings(*s, "rings", c.options.rings);
    c.options.n_theta = s->count("n_theta", c.options.n_theta, 4, 4096);
    c.options.loop_steps = s->count("loop_steps", c.options.loop_steps, 4);
    c.options.transport_steps = s->count("transport_steps", c.options.transport_steps, 4);
    c.options.fit_tol = s->positive("fit_tol", c.options.fit_tol);
    c.options.compute_k = s->boolean("compute_k", c.options.compute_k);
    s->done();
  }
  c.options.x0 = 0.0;
  c.options.y0 = 0.0;
  if (root.has("connection_file")) {
    std::filesystem::path p = root.text("connection_file", "");
    if (p.is_relative()) p = base / p;
    std::ifstream f(p);
    if (!f) throw SchemaError("connection_file: cannot read " + p.string());
    json doc;
    try {
      doc = json::parse(f);
    } catch (const json::parse_error& e) {
      throw SchemaError("connection_file: " + std::string(e.what()));
    }
    c.sampled = sampled_connection_from_json(doc);
    c.connection_file = p;
    if (c.models.size() != 1) throw SchemaError("connection_file: 'models' must hold exactly the expected model");
    if (c.options.rings.back() > c.sampled->grid.r_max || c.options.rings.front() < c.sampled->grid.r_min)
      throw SchemaError("options.rings: must lie inside the sampled grid");
  }
  return c;
}

inline json invariants_json(const AsymptoticInvariants& v) {
  const auto& d = v.diagnostics;
  return {{"xi0", xi_json(v.xi0)},
          {"lambda", to_json(v.lambda)},
          {"alpha", v.alpha},
          {"mu", to_json(v.mu)},
          {"k_estimate", v.k_estimate},
          {"kind", to_string(v.kind)},
          {"diagnostics",
           {{"flat_drift", d.flat_drift},
            {"residue_residual", d.residue_residual},
            {"alpha_spread", d.alpha_spread},
            {"alpha_collision", d.alpha_collision},
            {"nilpotent_ratio", d.nilpotent.ratio},
            {"k_tail", d.k_tail},
            {"k_converged", d.k_converged},
            {"weyl_flipped", d.weyl_flipped},
            {"order_two", d.order_two}}}};
}

inline Report run_invariants(const InvariantsConfig& c) {
  Report rep;
  const TorusSpec& t = c.common.torus;
  json rows = json::array();
  std::array<double, 3> worst_exact{}, worst_pert{};
  bool kinds = true;
  auto compare = [&](const ModelParams& p, const AsymptoticInvariants& inv, std::array<double, 3>& worst) {
    const auto want = canonicalize(p, t, c.options.canonical_tol);
    const std::array<double, 3> err{std::abs(inv.lambda - want.lambda), std::abs(inv.alpha - want.alpha),
                                    std::abs(inv.mu - want.mu)};
    for (int i = 0; i < 3; ++i) worst[i] = std::max(worst[i], err[i]);
    kinds = kinds && inv.kind == p.kind;
    return json{{"lambda", err[0]}, {"alpha", err[1]}, {"mu", err[2]}};
  };
  if (c.sampled) {
    const auto inv = extract_invariants(to_source(*c.sampled), c.options);
    json row{{"model", to_json(c.models[0])}, {"source", c.connection_file->filename().string()},
             {"extracted", invariants_json(inv)}};
    row["error"] = compare(c.models[0], inv, worst_exact);
    rows.push_back(row);
  } else {
    for (std::size_t i = 0; i < c.models.size(); ++i) {
      const auto& p = c.models[i];
      const auto base = p.kind == ModelKind::nilpotent ? nilpotent_model(1.0, t) : semisimple_model(p, 1.0, t);
      const auto inv = extract_invariants(base, c.options);
      json row{{"model", to_json(p)}, {"extracted", invariants_json(inv)}};
      row["error"] = compare(p, inv, worst_exact);
      if (c.perturbation) {
        const auto pc = perturb(base, c.perturbation->second, c.perturbation->first, *c.common.seed + i);
        const auto pinv = extract_invariants(pc, c.options);
        row["perturbed"] = invariants_json(pinv);
        row["perturbed_error"] = compare(p, pinv, worst_pert);
      }
      rows.push_back(row);
    }
  }
  rep.at_most("exact.lambda_error_max", worst_exact[0], c.exact.lambda);
  rep.at_most("exact.alpha_error_max", worst_exact[1], c.exact.alpha);
  rep.at_most("exact.mu_error_max", worst_exact[2], c.exact.mu);
  if (c.perturbation) {
    rep.at_most("perturbed.lambda_error_max", worst_pert[0], c.perturbed.lambda);
    rep.at_most("perturbed.alpha_error_max", worst_pert[1], c.perturbed.alpha);
    rep.at_most("perturbed.mu_error_max", worst_pert[2], c.perturbed.mu);
  }
  rep.flag("kind_detected", kinds);
  rep.results["invariants"] = rows;
  return rep;
}

// ---------------------------------------------------------------------------
// spectral

struct SpectralConfig {
  Common common;
  BundleModel bundle;
  std::optional<int> counting_samples;
  std::array<double, 2> counting_radius{2e-6, 0.05};
  Branch counting_branch = Branch::both;
  int counting_expected = 1;
  std::optional<int> residue_samples;
  double residue_mu_max = 3.0;
  double residue_distance = 0.01;
  int residue_levels = 6;
  double residue_tol = 1e-8;
  std::optional<int> dichotomy_steps;
  double dichotomy_start = 0.01;
  int dichotomy_flat_samples = 100;
  double dichotomy_min_distance = 0.05;
  double dichotomy_r_min = 5.0;
  std::vector<DualTorusPoint> scan;
  Branch scan_branch = Branch::plus;
};

inline Branch branch_of(const std::string& s) {
  return s == "plus" ? Branch::plus : (s == "minus" ? Branch::minus : Branch::both);
}

inline std::string to_string(Branch b) {
  return b == Branch::plus ? "plus" : (b == Branch::minus ? "minus" : "both");
}

inline BundleModel parse_bundle(Section s, const TorusSpec& t) {
  BundleModel b;
  b.torus = t;
  b.lambda = s.complex("lambda", b.lambda);
  if (s.has("mu") && s.has("tail")) throw SchemaError(s.where() + ": give either mu or tail");
  if (s.has("mu")) b.tail = {s.complex("mu")};
  if (s.has("tail")) b.tail = s.complexes("tail");
  b.r_min = s.positive("r_min", b.r_min);
  b.r_max = s.positive("r_max", b.r_max);
  s.done();
  config::guarded(s.where(), [&] { b.validate(); return 0; });
  return b;
}

inline SpectralConfig parse_spectral(Section& root, Common common) {
  SpectralConfig c;
  c.common = common;
  c.bundle = parse_bundle(root.child("bundle"), common.torus);
  bool randomized = false;
  if (auto s = root.optional_child("counting")) {
    c.counting_samples = s->count("samples", 100);
    c.counting_radius = s->range("radius", c.counting_radius);
    c.counting_branch = branch_of(s->text("branch", "both", {"plus", "minus", "both"}));
    c.counting_expected = s->count("expected", c.counting_expected, 0, 1000);
    s->done();
    randomized = true;
  }
  if (auto s = root.optional_child("residues")) {
    c.residue_samples = s->count("mu_samples", 10);
    c.residue_mu_max = s->positive("mu_max", c.residue_mu_max);
    c.residue_distance = s->positive("distance", c.residue_distance);
    c.residue_levels = s->count("levels", c.residue_levels, 2, 40);
    c.residue_tol = s->positive("tol", c.residue_tol);
    s->done();
    randomized = true;
  }
  if (auto s = root.optional_child("dichotomy")) {
    c.dichotomy_steps = s->count("steps", 20, 1, 40);
    c.dichotomy_start = s->positive("start", c.dichotomy_start);
    c.dichotomy_flat_samples = s->count("flat_samples", c.dichotomy_flat_samples);
    c.dichotomy_min_distance = s->positive("min_lattice_distance", c.dichotomy_min_distance);
    c.dichotomy_r_min = s->positive("annulus_r_min", c.dichotomy_r_min);
    s->done();
    randomized = true;
  }
  if (root.has("xi")) {
    const json& v = root.raw("xi");
    if (!v.is_array()) throw SchemaError("xi: expected an array of [xi1, xi2]");
    for (const auto& p : v) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
        throw SchemaError("xi: expected an array of [xi1, xi2]");
      c.scan.push_back(reduce_dual(p[0].get<double>(), p[1].get<double>(), common.torus));
    }
    c.scan_branch = branch_of(root.text("branch", "plus", {"plus", "minus", "both"}));
  }
  if (!c.counting_samples && !c.residue_samples && !c.dichotomy_steps && c.scan.empty())
    throw SchemaError("spectral: expected at least one of counting, residues, dichotomy, xi");
  if (randomized) require_seed(common, "spectral");
  return c;
}

inline DualTorusPoint at_zeta(Complex z, const TorusSpec& t) {
  const auto xi = xi_of_zeta(z, t);
  return reduce_dual(xi[0], xi[1], t);
}

inline void add_points(Table& table, const DualTorusPoint& xi, const SpectralData& s) {
  for (const auto& p : s.points)
    table.rows.push_back({xi.xi1, xi.xi2, p.w.real(), p.w.imag(), double(p.multiplicity)});
}

inline Report run_spectral(const SpectralConfig& c) {
  Report rep;
  const TorusSpec& t = c.common.torus;
  const BundleModel& b = c.bundle;
  Table table{"jumping_points", {"xi1", "xi2", "re_w", "im_w", "mult"}, {}};
  json out;
  const Complex z0 = b.lambda;
  if (c.counting_samples) {
    auto rng = stream(*c.common.seed, 30);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    int bad = 0, singular = 0;
    const double lo = std::log(c.counting_radius[0]), hi = std::log(c.counting_radius[1]);
    for (int i = 0; i < *c.counting_samples; ++i) {
      const double rho = std::exp(lo + (hi - lo) * U(rng));
      const auto xi = at_zeta(z0 + std::polar(rho, kTwoPi * U(rng)), t);
      const auto s = detail::jumping_scan(b, xi, c.counting_branch, 1e-12);
      if (s.at_infinity) ++singular;
      if (s.total_multiplicity() != c.counting_expected) ++bad;
      add_points(table, xi, s);
    }
    rep.check("counting.mismatches", bad, Relation::equal, 0.0,
              "total jumping multiplicity against " + std::to_string(c.counting_expected));
    rep.check("counting.singular_samples", singular, Relation::equal, 0.0);
    out["counting"] = {{"samples", *c.counting_samples}, {"branch", to_string(c.counting_branch)},
                       {"mismatches", bad}};
  }
  if (c.residue_samples) {
    auto rng = stream(*c.common.seed, 31);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    json rows = json::array();
    double worst = 0.0;
    bool converged = true;
    for (int i = 0; i < *c.residue_samples; ++i) {
      BundleModel bi = b;
      bi.tail[0] = std::polar(c.residue_mu_max * (0.1 + 0.9 * U(rng)), kTwoPi * U(rng));
      const double phase = kTwoPi * U(rng);
      std::vector<Complex> plus, minus;
      for (int j = 1; j <= c.residue_levels; ++j) {
        const Complex d = std::polar(std::pow(2.0, -j) * c.residue_distance, phase);
        plus.push_back(z0 + d);
        minus.push_back(-z0 + d);
      }
      const auto ep = phi_residue(bi, 1, plus);
      const auto em = phi_residue(bi, -1, minus);
      const double e1 = std::abs(ep.value - bi.mu()), e2 = std::abs(em.value + bi.mu());
      worst = std::max({worst, e1, e2});
      converged = converged && ep.converged && em.converged;
      rows.push_back({{"mu", to_json(bi.mu())}, {"plus", to_json(ep.value)}, {"minus", to_json(em.value)}});
    }
    rep.at_most("residues.error_max", worst, c.residue_tol, "+mu at +xi0 and -mu at -xi0");
    rep.flag("residues.converged", converged);
    out["residues"] = rows;
  }
  if (c.dichotomy_steps) {
    double ratio = std::numeric_limits<double>::infinity();
    bool monotone = true, single = true;
    double previous = 0.0;
    json seq = json::array();
    for (int j = 1; j <= *c.dichotomy_steps; ++j) {
      const Complex d = std::polar(std::pow(2.0, -j) * c.dichotomy_start, 0.3 * j);
      const auto xi = at_zeta(z0 + d, t);
      const auto s = jumping_points(b, xi, Branch::both);
      if (s.total_multiplicity() != 1) {
        single = false;
        continue;
      }
      const double w = std::abs(s.points[0].w);
      ratio = std::min(ratio, w / (std::abs(b.mu()) / (2.0 * std::abs(d))));
      monotone = monotone && w > previous;
      previous = w;
      seq.push_back({{"distance", std::abs(d)}, {"abs_w", w}});
    }
    rep.at_least("dichotomy.blowup_ratio_min", ratio, 1.0, "|w| against |mu| / (2 |zeta - zeta0|)");
    rep.flag("dichotomy.blowup_monotone", monotone && single);

    BundleModel flat = b;
    flat.tail = {0.0};
    flat.r_min = c.dichotomy_r_min;
    auto rng = stream(*c.common.seed, 32);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    int found = 0, tested = 0, attempts = 0;
    while (tested < c.dichotomy_flat_samples && attempts < 1000 * c.dichotomy_flat_samples) {
      ++attempts;
      const auto xi = reduce_dual(U(rng), U(rng), t);
      const Complex z = zeta_of_xi(xi.xi1, xi.xi2, t);
      if (lattice_distance(z - z0, t) < c.dichotomy_min_distance ||
          lattice_distance(-z - z0, t) < c.dichotomy_min_distance)
        continue;
      ++tested;
      found += jumping_points(flat, xi, Branch::both).total_multiplicity();
    }
    rep.check("dichotomy.mu0_jumping_points", found, Relation::equal, 0.0);
    rep.check("dichotomy.mu0_samples", tested, Relation::equal, c.dichotomy_flat_samples);
    out["dichotomy"] = {{"approach", seq}, {"mu0_samples", tested}};
  }
  if (!c.scan.empty()) {
    json rows = json::array();
    for (const auto& xi : c.scan) {
      const auto s = detail::jumping_scan(b, xi, c.scan_branch, 1e-12);
      add_points(table, xi, s);
      rows.push_back({{"xi", xi_json(xi)}, {"multiplicity", s.total_multiplicity()},
                      {"at_infinity", s.at_infinity}, {"diagnostic", s.diagnostic}});
    }
    out["scan"] = rows;
  }
  rep.results = out;
  json tail = json::array();
  for (Complex z : b.tail) tail.push_back(to_json(z));
  rep.results["bundle"] = {{"lambda", to_json(b.lambda)}, {"tail", tail}, {"r_min", b.r_min}, {"r_max", b.r_max}};
  rep.tables.push_back(std::move(table));
  return rep;
}

// ---------------------------------------------------------------------------
// stability

struct ObstructionCase {
  int k = 1;
  DualTorusPoint xi0;
  Complex mu{0.0, 0.0};
  Obstruction expected = Obstruction::ok;
};

struct H0Case {
  BundleModel bundle;
  int k = 1;
  std::optional<DualTorusPoint> xi;  // the asymptotic state when empty
  bool expect_consistent = true;
};

struct StabilityConfig {
  Common common;
  std::vector<int> b;
  std::vector<double> alpha;
  DualTorusPoint xi0;
  int k = 1;
  std::vector<ObstructionCase> obstructions;
  std::vector<H0Case> h0;
};

inline Obstruction obstruction_of(const std::string& s) {
  if (s == "blocked_order2_k1") return Obstruction::blocked_order2_k1;
  if (s == "blocked_mu0") return Obstruction::blocked_mu0;
  return Obstruction::ok;
}

inline StabilityConfig parse_stability(Section& root, Common common) {
  StabilityConfig c;
  c.common = common;
  const TorusSpec& t = common.torus;
  if (auto s = root.optional_child("extension")) {
    for (double v : s->numbers("b")) {
      if (v != std::floor(v)) throw SchemaError("extension.b: expected integers");
      c.b.push_back(static_cast<int>(v));
    }
    c.alpha = s->numbers("alpha");
    for (double a : c.alpha) config::guarded("extension.alpha", [&] { check_alpha(a, "alpha"); return 0; });
    const auto x = config::xi_pair(*s, "xi0");
    c.xi0 = reduce_dual(x[0], x[1], t);
    c.k = s->count("k", 1, 1, 1000);
    s->done();
  }
  if (root.has("obstructions")) {
    const json& v = root.raw("obstructions");
    if (!v.is_array()) throw SchemaError("obstructions: expected an array of cases");
    for (std::size_t i = 0; i < v.size(); ++i) {
      Section s(v[i], "obstructions[" + std::to_string(i) + "]");
      ObstructionCase oc;
      oc.k = s.count("k", 1, 1, 1000);
      const auto x = config::xi_pair(s, "xi0");
      oc.xi0 = reduce_dual(x[0], x[1], t);
      oc.mu = s.complex("mu");
      oc.expected = obstruction_of(s.text("expected", "ok", {"ok", "blocked_order2_k1", "blocked_mu0"}));
      s.done();
      c.obstructions.push_back(oc);
    }
  }
  if (root.has("h0")) {
    const json& v = root.raw("h0");
    if (!v.is_array()) throw SchemaError("h0: expected an array of cases");
    for (std::size_t i = 0; i < v.size(); ++i) {
      Section s(v[i], "h0[" + std::to_string(i) + "]");
      H0Case h;
      h.bundle = parse_bundle(s.child("bundle"), t);
      h.k = s.count("k", 1, 1, 1000);
      if (s.has("xi") && !s.raw("xi").is_string()) {
        const auto x = config::xi_pair(s, "xi");
        h.xi = reduce_dual(x[0], x[1], t);
      } else {
        s.text("xi", "state", {"state"});
      }
      h.expect_consistent = s.text("expect", "consistent", {"consistent", "contradiction"}) == "consistent";
      s.done();
      c.h0.push_back(h);
    }
  }
  if (c.b.empty() && c.obstructions.empty() && c.h0.empty())
    throw SchemaError("stability: expected at least one of extension, obstructions, h0");
  return c;
}

inline Report run_stability(const StabilityConfig& c) {
  Report rep;
  if (!c.b.empty()) {
    json rows = json::array();
    int missed = 0;
    for (int b : c.b)
      for (double a : c.alpha) {
        ExtensionBundleSpec spec;
        spec.xi0 = c.xi0;
        spec.b = b;
        spec.k = c.k;
        const auto v = alpha_stable_extension(spec, a);
        missed += (b >= 1) != v.unstable;
        rows.push_back({{"b", b}, {"alpha", a}, {"unstable", v.unstable}, {"degree", v.degree},
                        {"witness", {{"d_inf", v.witness.d_inf}, {"side", to_string(v.witness.side)}}},
                        {"message", v.message}});
      }
    rep.check("extension.misclassified", missed, Relation::equal, 0.0, "b >= 1 must be unstable");
    rep.results["extension"] = rows;
  }
  if (!c.obstructions.empty()) {
    json rows = json::array();
    int wrong = 0;
    for (const auto& oc : c.obstructions) {
      const auto got = existence_obstruction(oc.k, oc.xi0, oc.mu);
      wrong += got != oc.expected;
      rows.push_back({{"k", oc.k}, {"xi0", xi_json(oc.xi0)}, {"mu", to_json(oc.mu)},
                      {"verdict", to_string(got)}, {"expected", to_string(oc.expected)}});
    }
    rep.check("obstructions.mismatches", wrong, Relation::equal, 0.0);
    rep.results["obstructions"] = rows;
  }
  if (!c.h0.empty()) {
    json rows = json::array();
    int wrong = 0;
    for (const auto& h : c.h0) {
      const auto xi = h.xi ? *h.xi : h.bundle.asymptotic_state();
      const auto r = h0_total(h.bundle, h.k, xi);
      wrong += r.consistent != h.expect_consistent;
      rows.push_back({{"xi", xi_json(xi)}, {"finite", r.finite}, {"infinity", r.infinity}, {"total", r.total},
                      {"k", r.declared_k}, {"consistent", r.consistent}, {"message", r.message}});
    }
    rep.check("h0.mismatches", wrong, Relation::equal, 0.0);
    rep.results["h0"] = rows;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// moduli

struct MetricSpec {
  ModelParams model;
  AnnulusGrid grid;
  int samples = 100;
  double symmetry_tol = 1e-12;
  double isometry_tol = 1e-10;
  std::optional<AnnulusGrid> translations;
  int higgs_n = 6;
  int higgs_samples = 100;
};

struct ModuliConfig {
  Common common;
  bool quaternion = false;
  std::optional<int> weight_samples;
  int weight_denominator = 1024;
  std::vector<int> dimensions;
  std::optional<std::pair<Complex, Complex>> chart;
  std::optional<MetricSpec> metric;
};

/// Grids for GridOperator: 2 band + 2 radial nodes, even periodic counts.
inline AnnulusGrid operator_grid(Section& s, const std::string& key) {
  const AnnulusGrid g = grid_from_json(s.raw(key));
  if (g.n_r < 12) throw SchemaError(s.path(key) + ".n_r: need at least 12 radial nodes");
  if (g.n_theta % 2 || g.n_x % 2 || g.n_y % 2)
    throw SchemaError(s.path(key) + ": n_theta, n_x and n_y must be even");
  return g;
}

inline ModuliConfig parse_moduli(Section& root, Common common) {
  ModuliConfig c;
  c.common = common;
  c.quaternion = root.boolean("quaternion", false);
  if (auto s = root.optional_child("weights")) {
    c.weight_samples = s->count("samples", 100);
    c.weight_denominator = s->count("denominator", c.weight_denominator, 2, 1 << 30);
    s->done();
  }
  if (auto s = root.optional_child("dimension")) {
    for (double k : s->numbers("k", {1.0})) {
      if (k != std::floor(k) || k < 1) throw SchemaError("dimension.k: expected integers >= 1");
      c.dimensions.push_back(static_cast<int>(k));
    }
    if (auto ch = s->optional_child("chart")) {
      c.chart = std::make_pair(ch->complex("f0", 0.0), ch->complex("fp0", 1.0));
      ch->done();
      config::guarded("dimension.chart", [&] { return k1_chart(c.chart->first, c.chart->second); });
    }
    s->done();
  }
  if (auto s = root.optional_child("metric")) {
    MetricSpec m;
    m.model = model_from_json(s->raw("model"));
    m.grid = operator_grid(*s, "grid");
    m.samples = s->count("samples", m.samples);
    m.symmetry_tol = s->positive("symmetry_tol", m.symmetry_tol);
    m.isometry_tol = s->positive("isometry_tol", m.isometry_tol);
    if (s->has("translation_grid")) m.translations = operator_grid(*s, "translation_grid");
    m.higgs_n = s->count("higgs_n", m.higgs_n, 4, 256);
    if (m.higgs_n % 2) throw SchemaError("metric.higgs_n: must be even");
    m.higgs_samples = s->count("higgs_samples", m.higgs_samples);
    s->done();
    c.metric = m;
  }
  if (!c.quaternion && !c.weight_samples && c.dimensions.empty() && !c.metric)
    throw SchemaError("moduli: expected at least one of quaternion, weights, dimension, metric");
  if (c.weight_samples || c.metric) require_seed(common, "moduli");
  return c;
}

inline Mat2 random_su2(std::mt19937_64& rng) {
  std::normal_distribution<double> N;
  return su2::from_vector(Eigen::Vector3d(N(rng), N(rng), N(rng)));
}

inline TangentVectorInstanton random_tangent(const AnnulusGrid& g, std::mt19937_64& rng) {
  TangentVectorInstanton t;
  t.grid = g;
  t.a.resize(g.size());
  for (auto& c : t.a)
    for (auto& m : c.a) m = random_su2(rng);
  return t;
}

inline TangentVectorHiggs random_higgs_tangent(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> N;
  auto full = [&] {
    Mat2 m;
    m << Complex(N(rng), N(rng)), Complex(N(rng), N(rng)), Complex(N(rng), N(rng)), Complex(N(rng), N(rng));
    return m;
  };
  TangentVectorHiggs t;
  for (std::size_t k = 0; k < n; ++k) {
    const Mat2 a = full(), b = full();
    t.b1.push_back(0.5 * (a - a.adjoint()));
    t.b2.push_back(0.5 * (b - b.adjoint()));
    t.phi.push_back(full());
  }
  return t;
}

inline json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline Report run_moduli(const ModuliConfig& c) {
  Report rep;
  if (c.quaternion) {
    const auto q = quaternion_check();
    rep.flag("quaternion.squares", q.squares, "I_j^2 = -Id");
    rep.flag("quaternion.product", q.product, "I1 I2 = I3");
    rep.flag("quaternion.anticommute", q.anticommute, "I2 I1 = -I3");
    rep.check("quaternion.triple_sign", q.triple_sign, Relation::equal, -1.0);
    json I = json::array();
    for (const auto& m : complex_structures()) I.push_back(matrix_json(m));
    rep.results["complex_structures"] = I;
  }
  if (c.weight_samples) {
    auto rng = stream(*c.common.seed, 40);
    std::uniform_int_distribution<int> K(-c.weight_denominator / 2, c.weight_denominator / 2 - 1);
    double worst = 0.0;
    for (int i = 0; i < *c.weight_samples; ++i) {
      const double a = double(K(rng)) / c.weight_denominator;
      worst = std::max(worst, std::abs(nahm_weights(a).check));
    }
    rep.check("weights.zero_sum_max", worst, Relation::equal, 0.0, "-2 + (1 + alpha) + (1 - alpha)");
  }
  if (!c.dimensions.empty()) {
    json dims = json::object();
    for (int k : c.dimensions) dims[std::to_string(k)] = moduli_dimension(k);
    rep.results["moduli_dimension"] = dims;
    if (c.chart) {
      const auto k = k1_chart(c.chart->first, c.chart->second);
      rep.check("chart.real_dimension", k.total_real_dim(), Relation::equal, moduli_dimension(1),
                "fiber T plus base C against 8k - 4 at k = 1");
      const auto f = k.member(0.0);
      rep.results["k1_chart"] = {{"f0", to_json(k.f0)},
                                 {"fp0", to_json(k.fp0)},
                                 {"complex_parameters", k.complex_parameters},
                                 {"fiber_real_dim", k.fiber_real_dim},
                                 {"base_real_dim", k.base_real_dim},
                                 {"total_real_dim", k.total_real_dim()},
                                 {"member_at_c0", {{"b", to_json(f.b)}, {"c", to_json(f.c)}, {"d", to_json(f.d)}}}};
      if (k.excluded) rep.results["k1_chart"]["excluded_c"] = to_json(*k.excluded);
    }
  }
  if (c.metric) {
    const auto& m = *c.metric;
    const auto conn = semisimple_model(m.model, 1.0, c.common.torus);
    const GridOperator op(conn, m.grid);
    auto rng = stream(*c.common.seed, 41);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    double sym = 0.0, lin = 0.0, iso = 0.0, orth = 0.0, pos = std::numeric_limits<double>::infinity();
    const auto I = complex_structures();
    for (int s = 0; s < m.samples; ++s) {
      const auto a = random_tangent(m.grid, rng), b = random_tangent(m.grid, rng), d = random_tangent(m.grid, rng);
      const double gab = l2_metric(op, a, b), gba = l2_metric(op, b, a), gaa = l2_metric(op, a, a);
      sym = std::max(sym, std::abs(gab - gba) / (1.0 + std::abs(gab)));
      pos = std::min(pos, gaa);
      const double x = U(rng), y = U(rng);
      TangentVectorInstanton comb = a;
      for (std::size_t k = 0; k < comb.a.size(); ++k) comb.a[k] = x * a.a[k] + y * b.a[k];
      const double want = x * l2_metric(op, a, d) + y * l2_metric(op, b, d);
      lin = std::max(lin, std::abs(l2_metric(op, comb, d) - want) / (1.0 + std::abs(want)));
      const auto Ia = apply_structure(I[s % 3], a);
      iso = std::max(iso, std::abs(l2_metric(op, Ia, Ia) - gaa) / gaa);
      orth = std::max(orth, std::abs(l2_metric(op, Ia, a)) / gaa);
    }
    rep.at_most("metric.symmetry", sym, m.symmetry_tol);
    rep.check("metric.positivity_min", pos, Relation::above, 0.0);
    rep.at_most("metric.bilinearity", lin, m.isometry_tol);
    rep.at_most("metric.structure_isometry", iso, m.isometry_tol, "g(I a, I a) = g(a, a)");
    rep.at_most("metric.structure_orthogonality", orth, m.isometry_tol, "g(I a, a) = 0");

    // Higgs side on a diagonal background with punctures off the grid
    HiggsPairGrid bg;
    const int n = m.higgs_n;
    bg.grid.n1 = bg.grid.n2 = n;
    bg.grid.punctures = {reduce_dual(0.3 + 0.5 / n, 0.1 + 0.5 / n), reduce_dual(0.7 - 0.5 / n, 0.9 - 0.5 / n)};
    bg.B1.assign(bg.grid.size(), kI * Mat2(Eigen::Vector2cd(0.3, -0.1).asDiagonal()));
    bg.B2.assign(bg.grid.size(), kI * Mat2(Eigen::Vector2cd(-0.2, 0.4).asDiagonal()));
    bg.Phi.assign(bg.grid.size(), Mat2(Eigen::Vector2cd(Complex(1.0, 2.0), Complex(-0.5, 0.3)).asDiagonal()));
    double hsym = 0.0, hpos = std::numeric_limits<double>::infinity();
    for (int s = 0; s < m.higgs_samples; ++s) {
      const auto a = random_higgs_tangent(bg.grid.size(), rng), b = random_higgs_tangent(bg.grid.size(), rng);
      const double gab = l2_metric(bg.grid, a, b);
      hsym = std::max(hsym, std::abs(gab - l2_metric(bg.grid, b, a)) / (1.0 + std::abs(gab)));
      hpos = std::min(hpos, l2_metric(bg.grid, a, a));
    }
    rep.at_most("higgs_metric.symmetry", hsym, m.symmetry_tol);
    rep.check("higgs_metric.positivity_min", hpos, Relation::above, 0.0);

    if (m.translations) {
      const GridOperator top(conn, *m.translations);
      std::vector<TangentVectorInstanton> fam;
      for (const auto& v : {std::array<double, 4>{1, 0, 0, 0}, std::array<double, 4>{0, 1, 0, 0},
                            std::array<double, 4>{0, 0, 1, 0}, std::array<double, 4>{0, 0, 0, 1}})
        fam.push_back(translation_deformation(conn, *m.translations, v));
      const Eigen::MatrixXd G = gram(fam, [&](const auto& x, const auto& y) { return l2_metric(top, x, y); });
      json res = json::array();
      for (const auto& f : fam) {
        const auto r = instanton_tangent_residual(top, f);
        res.push_back({{"gauge", r.gauge}, {"asd", r.asd}});
      }
      rep.results["translations"] = {{"basis", "x, y, w1, w2"}, {"gram", matrix_json(G)}, {"residuals", res}};
      rep.at_most("translations.gram_asymmetry", (G - G.transpose()).cwiseAbs().maxCoeff(),
                  m.symmetry_tol * (1.0 + G.cwiseAbs().maxCoeff()));
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// dispatch

struct SuiteConfig;

using AnyConfig = std::variant<ConventionsConfig, ModelCheckConfig, InvariantsConfig, SpectralConfig,
                               StabilityConfig, ModuliConfig, std::shared_ptr<SuiteConfig>>;

struct SuiteEntry {
  std::filesystem::path path;
  std::string stem;
  json document;
  AnyConfig parsed;
};

struct SuiteConfig {
  Common common;
  int repeats = 2;
  std::vector<SuiteEntry> entries;
};

struct ParseOptions {
  std::optional<std::uint64_t> seed;  // overrides the config
  std::filesystem::path base_dir = ".";
};

inline std::string entry_stem(const std::filesystem::path& p) {
  std::string s = p.filename().string();
  const auto dot = s.find('.');
  return dot == std::string::npos ? s : s.substr(0, dot);
}

inline json read_json_file(const std::filesystem::path& p) {
  std::ifstream f(p);
  if (!f) throw SchemaError("cannot read config " + p.string());
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw SchemaError(p.string() + ": " + e.what());
  }
}

inline AnyConfig parse(const json& doc, const ParseOptions& opts, json* echo = nullptr);

inline SuiteConfig parse_suite(Section& root, Common common, const ParseOptions& opts) {
  SuiteConfig c;
  c.common = common;
  c.repeats = root.count("repeats", 2, 2, 10);
  const json& v = root.raw("configs");
  if (!v.is_array() || v.empty()) throw SchemaError("configs: expected a non-empty array of paths");
  for (const auto& p : v) {
    if (!p.is_string()) throw SchemaError("configs: expected a non-empty array of paths");
    SuiteEntry e;
    e.path = p.get<std::string>();
    if (e.path.is_relative()) e.path = opts.base_dir / e.path;
    e.stem = entry_stem(e.path);
    e.document = read_json_file(e.path);
    ParseOptions sub{common.seed ? common.seed : std::nullopt, e.path.parent_path()};
    try {
      e.parsed = parse(e.document, sub);
    } catch (const SchemaError& err) {
      throw SchemaError(e.path.filename().string() + ": " + err.what());
    }
    if (std::holds_alternative<std::shared_ptr<SuiteConfig>>(e.parsed))
      throw SchemaError("configs: suites do not nest");
    c.entries.push_back(std::move(e));
  }
  return c;
}

/// Validates a whole document and returns the typed configuration. When
/// `echo` is given it receives the document with the effective seed.
inline AnyConfig parse(const json& doc, const ParseOptions& opts, json* echo) {
  Section root(doc, "config");
  const json& version = root.raw("schema_version");
  if (!version.is_number_integer() || version.get<long long>() != config::kSchemaVersion)
    throw SchemaError("schema_version: expected " + std::to_string(config::kSchemaVersion));
  Common common;
  common.subcommand = root.text("subcommand", "");
  if (std::find(subcommands().begin(), subcommands().end(), common.subcommand) == subcommands().end())
    throw SchemaError("subcommand: missing or unknown '" + common.subcommand + "'");
  if (root.has("seed")) {
    const json& s = root.raw("seed");
    if (!s.is_number_unsigned()) throw SchemaError("seed: expected a nonnegative integer");
    common.seed = s.get<std::uint64_t>();
  }
  if (opts.seed) common.seed = opts.seed;
  common.label = root.text("label", "");
  if (root.has("torus")) common.torus = torus_from_json(root.raw("torus"));

  AnyConfig out;
  const auto& sub = common.subcommand;
  if (sub == "conventions") out = parse_conventions(root, common);
  else if (sub == "model-check") out = parse_model_check(root, common);
  else if (sub == "invariants") out = parse_invariants(root, common, opts.base_dir);
  else if (sub == "spectral") out = parse_spectral(root, common);
  else if (sub == "stability") out = parse_stability(root, common);
  else if (sub == "moduli") out = parse_moduli(root, common);
  else out = std::make_shared<SuiteConfig>(parse_suite(root, common, opts));
  root.done();
  if (echo) {
    *echo = doc;
    if (common.seed) (*echo)["seed"] = *common.seed;
  }
  return out;
}

inline const Common& common_of(const AnyConfig& c) {
  return std::visit(
      [](const auto& x) -> const Common& {
        if constexpr (std::is_same_v<std::decay_t<decltype(x)>, std::shared_ptr<SuiteConfig>>)
          return x->common;
        else
          return x.common;
      },
      c);
}

inline Report execute(const AnyConfig& c);

inline Report run_suite(const SuiteConfig& c) {
  Report rep;
  json rows = json::array();
  for (const auto& e : c.entries) {
    std::vector<std::string> digests;
    bool pass = true;
    int failures = 0;
    for (int r = 0; r < c.repeats; ++r) {
      const Report sub = execute(e.parsed);
      const std::string text = strip_timing(sub.to_json()).dump();
      digests.push_back(hex64(fnv1a(text)));
      pass = sub.passed();
      failures = sub.failures();
    }
    bool same = true;
    for (const auto& d : digests) same = same && d == digests.front();
    rep.flag("determinism." + e.stem, same, "reports identical apart from wall time");
    rows.push_back({{"config", e.path.filename().string()}, {"subcommand", common_of(e.parsed).subcommand},
                    {"digests", digests}, {"pass", pass}, {"failed_checks", failures}});
  }
  rep.results["runs"] = rows;
  rep.results["repeats"] = c.repeats;
  return rep;
}

/// Runs a parsed configuration. Timing is measured around the run only.
inline Report execute(const AnyConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  Report rep = std::visit(
      [](const auto& x) -> Report {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, ConventionsConfig>) return run_conventions(x);
        else if constexpr (std::is_same_v<T, ModelCheckConfig>) return run_model_check(x);
        else if constexpr (std::is_same_v<T, InvariantsConfig>) return run_invariants(x);
        else if constexpr (std::is_same_v<T, SpectralConfig>) return run_spectral(x);
        else if constexpr (std::is_same_v<T, StabilityConfig>) return run_stability(x);
        else if constexpr (std::is_same_v<T, ModuliConfig>) return run_moduli(x);
        else return run_suite(*x);
      },
      c);
  const auto& common = common_of(c);
  rep.subcommand = common.subcommand;
  if (!common.label.empty()) rep.results["label"] = common.label;
  rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

}  // namespace pipeline

/// Exit status of a run: 0 when every check passes, 1 otherwise.
inline int exit_code(const Report& r) { return r.passed() ? 0 : 1; }

struct PreparedRun {
  pipeline::AnyConfig config;
  json echo;
};

/// Reads and validates a config file; every SchemaError surfaces here.
inline PreparedRun prepare(const std::filesystem::path& path, std::optional<std::uint64_t> seed = std::nullopt,
                           const std::string& expected_subcommand = {}) {
  const json doc = pipeline::read_json_file(path);
  PreparedRun p;
  p.config = pipeline::parse(doc, {seed, path.parent_path()}, &p.echo);
  const auto& sub = pipeline::common_of(p.config).subcommand;
  if (!expected_subcommand.empty() && sub != expected_subcommand)
    throw SchemaError("subcommand: config is for '" + sub + "', invoked as '" + expected_subcommand + "'");
  return p;
}

/// Executes a prepared run. A numerical error inside a pipeline becomes a
/// failed "run.completed" check, so a report is always produced.
inline Report run(const PreparedRun& p) {
  const auto start = std::chrono::steady_clock::now();
  Report r;
  try {
    r = pipeline::execute(p.config);
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    r = Report{};
    r.subcommand = pipeline::common_of(p.config).subcommand;
    r.flag("run.completed", false, e.what());
    r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  r.inputs = p.echo;
  return r;
}

inline Report run_config_file(const std::filesystem::path& path, std::optional<std::uint64_t> seed = std::nullopt,
                              const std::string& expected_subcommand = {}) {
  return run(prepare(path, seed, expected_subcommand));
}

}  // namespace ipl
