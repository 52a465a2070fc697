#pragma once

// JSON forms of the basic types and grid-sampled connections.
//
// Sampled connection document:
//   {"schema": "ipl.connection", "version": 1, "reduced": false,
//    "torus": {"period_x": .., "period_y": ..},
//    "grid": {"r_min": .., "r_max": .., "n_r": .., "n_theta": .., "n_x": .., "n_y": .., "spacing": "uniform"|"log"},
//    "components": [[re, im], ...]}
// Components are row-major over (ir, itheta, ix, iy, mu, row, col) with mu in
// (r, theta, x, y) coordinate order. A reduced document ("reduced": true) holds
// a Higgs pair instead: grid without n_x, n_y, components over
// (ir, itheta, field, row, col) with field in (b_r, b_theta, psi).

#include "ipl/hitchin.hpp"
#include "ipl/models.hpp"

#include <json.hpp>

namespace ipl {

using json = nlohmann::json;

/// Malformed configuration or document.
class SchemaError : public Error {
 public:
  using Error::Error;
};

inline json to_json(Complex z) { return json::array({z.real(), z.imag()}); }

inline Complex complex_from_json(const json& j, const std::string& what) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return {j[0].get<double>(), j[1].get<double>()};
  throw SchemaError(what + ": expected a number or [re, im]");
}

inline json to_json(const TorusSpec& t) { return {{"period_x", t.period_x}, {"period_y", t.period_y}}; }

namespace detail {

inline const json& require(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw SchemaError(where + ": missing key '" + key + "'");
  return j.at(key);
}

inline double number(const json& j, const std::string& key, const std::string& where) {
  const json& v = require(j, key, where);
  if (!v.is_number()) throw SchemaError(where + "." + key + ": expected a number");
  return v.get<double>();
}

inline int integer(const json& j, const std::string& key, const std::string& where) {
  const json& v = require(j, key, where);
  if (!v.is_number_integer()) throw SchemaError(where + "." + key + ": expected an integer");
  return v.get<int>();
}

inline void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* a : keys) known = known || k == a;
    if (!known) throw SchemaError(where + ": unknown key '" + k + "'");
  }
}

}  // namespace detail

inline TorusSpec torus_from_json(const json& j) {
  detail::only_keys(j, {"period_x", "period_y"}, "torus");
  TorusSpec t{detail::number(j, "period_x", "torus"), detail::number(j, "period_y", "torus")};
  try {
    t.validate();
  } catch (const PreconditionError& e) {
    throw SchemaError(std::string("torus: ") + e.what());
  }
  return t;
}

inline json to_json(const AnnulusGrid& g, bool with_torus_counts = true) {
  json j{{"r_min", g.r_min}, {"r_max", g.r_max}, {"n_r", g.n_r}, {"n_theta", g.n_theta},
         {"spacing", to_string(g.spacing)}};
  if (with_torus_counts) {
    j["n_x"] = g.n_x;
    j["n_y"] = g.n_y;
  }
  return j;
}

inline AnnulusGrid grid_from_json(const json& j, bool with_torus_counts = true) {
  const std::string w = "grid";
  if (with_torus_counts)
    detail::only_keys(j, {"r_min", "r_max", "n_r", "n_theta", "n_x", "n_y", "spacing"}, w);
  else
    detail::only_keys(j, {"r_min", "r_max", "n_r", "n_theta", "spacing"}, w);
  AnnulusGrid g;
  g.r_min = detail::number(j, "r_min", w);
  g.r_max = detail::number(j, "r_max", w);
  g.n_r = detail::integer(j, "n_r", w);
  g.n_theta = detail::integer(j, "n_theta", w);
  if (with_torus_counts) {
    g.n_x = detail::integer(j, "n_x", w);
    g.n_y = detail::integer(j, "n_y", w);
  }
  if (j.contains("spacing")) {
    const auto s = j.at("spacing");
    if (s == "uniform") g.spacing = Spacing::uniform;
    else if (s == "log") g.spacing = Spacing::log_radial;
    else throw SchemaError("grid.spacing: expected \"uniform\" or \"log\"");
  }
  try {
    g.validate();
  } catch (const PreconditionError& e) {
    throw SchemaError(std::string("grid: ") + e.what());
  }
  return g;
}

inline json to_json(const ModelParams& p) {
  return {{"lambda", to_json(p.lambda)}, {"mu", to_json(p.mu)}, {"alpha", p.alpha}, {"kind", to_string(p.kind)}};
}

inline ModelParams model_from_json(const json& j) {
  detail::only_keys(j, {"lambda", "mu", "alpha", "kind"}, "model");
  ModelParams p;
  if (j.contains("kind")) {
    const auto& k = j.at("kind");
    if (k == "semisimple") p.kind = ModelKind::semisimple;
    else if (k == "nilpotent") p.kind = ModelKind::nilpotent;
    else throw SchemaError("model.kind: expected \"semisimple\" or \"nilpotent\"");
  }
  if (j.contains("lambda")) p.lambda = complex_from_json(j.at("lambda"), "model.lambda");
  if (j.contains("mu")) p.mu = complex_from_json(j.at("mu"), "model.mu");
  if (j.contains("alpha")) p.alpha = detail::number(j, "alpha", "model");
  try {
    p.validate();
  } catch (const PreconditionError& e) {
    throw SchemaError(std::string("model: ") + e.what());
  }
  return p;
}

// ---------------------------------------------------------------------------
// Grid-sampled connections

namespace detail {

/// Weights of trigonometric interpolation on n equispaced nodes of a period.
inline std::vector<double> trig_weights(int n, double period, double t) {
  std::vector<double> w(n, 0.0);
  for (int j = 0; j < n; ++j) {
    const double phi = kTwoPi * (t / period - double(j) / n);
    const double s = std::sin(0.5 * phi);
    if (std::abs(s) < 1e-14) {
      std::fill(w.begin(), w.end(), 0.0);
      w[j] = 1.0;
      return w;
    }
    // even n: Dirichlet kernel with the Nyquist mode split symmetrically
    w[j] = (n % 2 == 0) ? std::sin(0.5 * n * phi) * std::cos(0.5 * phi) / (n * s)
                        : std::sin(0.5 * n * phi) / (n * s);
  }
  return w;
}

/// Natural cubic splines along the slow index of flat data laid out as
/// [node][line] with `line` complex entries per node; uniform spacing h.
struct RadialSpline {
  std::size_t n = 0, line = 0;
  double h = 1.0;
  std::vector<Complex> f, M;

  RadialSpline(std::vector<Complex> data, std::size_t nodes, double spacing)
      : n(nodes), line(data.size() / nodes), h(spacing), f(std::move(data)), M(f.size(), 0.0) {
    std::vector<double> c(n, 0.0);
    std::vector<Complex> d(n);
    for (std::size_t l = 0; l < line; ++l) {
      auto at = [&](std::size_t i) { return i * line + l; };
      // M_{i-1} + 4 M_i + M_{i+1} = 6 (f_{i+1} - 2 f_i + f_{i-1}) / h^2 with M_0 = M_{n-1} = 0
      for (std::size_t i = 1; i + 1 < n; ++i) d[i] = 6.0 / (h * h) * (f[at(i + 1)] - 2.0 * f[at(i)] + f[at(i - 1)]);
      c[1] = 0.25;
      d[1] *= 0.25;
      for (std::size_t i = 2; i + 1 < n; ++i) {
        c[i] = 1.0 / (4.0 - c[i - 1]);
        d[i] = c[i] * (d[i] - d[i - 1]);
      }
      for (std::size_t i = n - 2; i >= 1; --i) {
        M[at(i)] = i + 2 < n ? d[i] - c[i] * M[at(i + 1)] : d[i];
        if (i == 1) break;
      }
    }
  }

  /// Interval index and the four coefficients for (f_k, f_{k+1}, M_k, M_{k+1}) at grid coordinate u.
  std::pair<std::size_t, std::array<double, 4>> locate(double u) const {
    const std::size_t k = std::min<std::size_t>(std::size_t(std::max(0.0, std::floor(u))), n - 2);
    const double a = u - double(k), b = 1.0 - a;
    return {k, {b, a, h * h / 6.0 * (b * b * b - b), h * h / 6.0 * (a * a * a - a)}};
  }

  Complex value(std::size_t k, const std::array<double, 4>& c, std::size_t j) const {
    const std::size_t i0 = k * line + j, i1 = i0 + line;
    return c[0] * f[i0] + c[1] * f[i1] + c[2] * M[i0] + c[3] * M[i1];
  }
};

}  // namespace detail

struct SampledConnection {
  TorusSpec torus;
  AnnulusGrid grid;
  std::vector<Components> values;  // grid.index order

  void validate() const {
    grid.validate();
    torus.validate();
    if (values.size() != grid.size()) throw PreconditionError("SampledConnection: value count does not match grid");
    if (grid.n_r < 3) throw PreconditionError("SampledConnection: need at least 3 radial nodes");
  }
};

inline SampledConnection sample_connection(const ConnectionSource& c, const AnnulusGrid& g) {
  g.validate();
  SampledConnection s;
  s.torus = c.torus();
  s.grid = g;
  s.values.resize(g.size());
  const auto rs = g.radii(), th = g.thetas(), xs = g.xs(s.torus), ys = g.ys(s.torus);
  parallel_for(rs.size(), [&](std::size_t ir) {
    for (int it = 0; it < g.n_theta; ++it)
      for (int ix = 0; ix < g.n_x; ++ix)
        for (int iy = 0; iy < g.n_y; ++iy)
          s.values[g.index(int(ir), it, ix, iy)] = c.evaluate(Point{rs[ir], th[it], xs[ix], ys[iy]});
  });
  return s;
}

/// Interpolating source: natural cubic spline in the radial grid coordinate,
/// trigonometric interpolation in theta, x and y.
inline ConnectionSource to_source(const SampledConnection& s, const std::string& label = "sampled") {
  s.validate();
  const AnnulusGrid g = s.grid;
  std::vector<Complex> flat;
  flat.reserve(s.values.size() * 16);
  for (const auto& c : s.values)
    for (int mu = 0; mu < 4; ++mu)
      for (int e = 0; e < 4; ++e) flat.push_back(c[mu](e / 2, e % 2));
  auto spline = std::make_shared<const detail::RadialSpline>(std::move(flat), g.n_r, g.ds());
  const TorusSpec t = s.torus;
  auto eval = [g, t, spline](const Point& p) {
    const auto [k, c] = spline->locate((g.to_s(p.r) - g.to_s(g.r_min)) / g.ds());
    const auto wt = detail::trig_weights(g.n_theta, kTwoPi, p.theta);
    const auto wx = detail::trig_weights(g.n_x, t.period_x, p.x);
    const auto wy = detail::trig_weights(g.n_y, t.period_y, p.y);
    Components out;
    for (int it = 0; it < g.n_theta; ++it)
      for (int ix = 0; ix < g.n_x; ++ix) {
        const double wtx = wt[it] * wx[ix];
        if (wtx == 0.0) continue;
        for (int iy = 0; iy < g.n_y; ++iy) {
          const double w = wtx * wy[iy];
          if (w == 0.0) continue;
          const std::size_t l = ((std::size_t(it) * g.n_x + ix) * g.n_y + iy) * 16;
          for (int e = 0; e < 16; ++e) out[e / 4](e % 4 / 2, e % 2) += w * spline->value(k, c, l + e);
        }
      }
    return out;
  };
  ConnectionSource c(eval, {}, RadialDomain{g.r_min, g.r_max, false}, t, label);
  c.set_grid_spacing(g.min_spacing(t));
  return c;
}

namespace detail {

inline void push_matrix(json& arr, const Mat2& m) {
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) arr.push_back(json::array({m(i, j).real(), m(i, j).imag()}));
}

inline Mat2 read_matrix(const json& arr, std::size_t& pos) {
  Mat2 m;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) m(i, j) = complex_from_json(arr.at(pos++), "components");
  return m;
}

inline void check_header(const json& j, bool reduced) {
  if (require(j, "schema", "document") != "ipl.connection") throw SchemaError("document: schema must be ipl.connection");
  if (require(j, "version", "document") != 1) throw SchemaError("document: unsupported version");
  const json& r = require(j, "reduced", "document");
  if (!r.is_boolean() || r.get<bool>() != reduced)
    throw SchemaError(reduced ? "document: expected a reduced Higgs pair" : "document: expected a connection");
}

}  // namespace detail

inline json to_json(const SampledConnection& s) {
  s.validate();
  json comps = json::array();
  for (const auto& c : s.values)
    for (int mu = 0; mu < 4; ++mu) detail::push_matrix(comps, c[mu]);
  return {{"schema", "ipl.connection"}, {"version", 1}, {"reduced", false}, {"torus", to_json(s.torus)},
          {"grid", to_json(s.grid)}, {"components", std::move(comps)}};
}

inline SampledConnection sampled_connection_from_json(const json& j) {
  detail::only_keys(j, {"schema", "version", "reduced", "torus", "grid", "components"}, "document");
  detail::check_header(j, false);
  SampledConnection s;
  s.torus = torus_from_json(detail::require(j, "torus", "document"));
  s.grid = grid_from_json(detail::require(j, "grid", "document"));
  const json& comps = detail::require(j, "components", "document");
  if (!comps.is_array() || comps.size() != s.grid.size() * 16)
    throw SchemaError("components: expected " + std::to_string(s.grid.size() * 16) + " [re, im] pairs");
  s.values.resize(s.grid.size());
  std::size_t pos = 0;
  for (auto& c : s.values)
    for (int mu = 0; mu < 4; ++mu) c[mu] = detail::read_matrix(comps, pos);
  return s;
}

struct SampledHiggsPair {
  AnnulusGrid grid;  // n_x, n_y unused
  std::vector<PairValue> values;  // index ir * n_theta + itheta
};

inline SampledHiggsPair sample_pair(const HiggsPairOnPlane& pair, const AnnulusGrid& g) {
  g.validate();
  SampledHiggsPair s;
  s.grid = g;
  const auto rs = g.radii(), th = g.thetas();
  for (double r : rs)
    for (double t : th) s.values.push_back(pair.value(r, t));
  return s;
}

inline HiggsPairOnPlane to_pair(const SampledHiggsPair& s, const std::string& label = "sampled") {
  const AnnulusGrid g = s.grid;
  if (s.values.size() != std::size_t(g.n_r) * g.n_theta) throw PreconditionError("SampledHiggsPair: size mismatch");
  std::vector<Complex> flat;
  flat.reserve(s.values.size() * 12);
  for (const auto& v : s.values)
    for (const Mat2* m : {&v.b_r, &v.b_theta, &v.psi})
      for (int e = 0; e < 4; ++e) flat.push_back((*m)(e / 2, e % 2));
  auto spline = std::make_shared<const detail::RadialSpline>(std::move(flat), g.n_r, g.ds());
  auto eval = [g, spline](double r, double theta) {
    const auto [k, c] = spline->locate((g.to_s(r) - g.to_s(g.r_min)) / g.ds());
    const auto wt = detail::trig_weights(g.n_theta, kTwoPi, theta);
    PairValue out;
    for (int it = 0; it < g.n_theta; ++it) {
      if (wt[it] == 0.0) continue;
      const std::size_t l = std::size_t(it) * 12;
      for (int e = 0; e < 12; ++e) {
        Mat2& m = e < 4 ? out.b_r : (e < 8 ? out.b_theta : out.psi);
        m((e % 4) / 2, e % 2) += wt[it] * spline->value(k, c, l + e);
      }
    }
    return out;
  };
  return HiggsPairOnPlane(eval, {}, RadialDomain{g.r_min, g.r_max, false}, label);
}

inline json to_json(const SampledHiggsPair& s) {
  json comps = json::array();
  for (const auto& v : s.values) {
    detail::push_matrix(comps, v.b_r);
    detail::push_matrix(comps, v.b_theta);
    detail::push_matrix(comps, v.psi);
  }
  return {{"schema", "ipl.connection"}, {"version", 1}, {"reduced", true}, {"grid", to_json(s.grid, false)},
          {"components", std::move(comps)}};
}

inline SampledHiggsPair sampled_pair_from_json(const json& j) {
  detail::only_keys(j, {"schema", "version", "reduced", "grid", "components"}, "document");
  detail::check_header(j, true);
  SampledHiggsPair s;
  s.grid = grid_from_json(detail::require(j, "grid", "document"), false);
  const json& comps = detail::require(j, "components", "document");
  const std::size_t n = std::size_t(s.grid.n_r) * s.grid.n_theta;
  if (!comps.is_array() || comps.size() != n * 12)
    throw SchemaError("components: expected " + std::to_string(n * 12) + " [re, im] pairs");
  std::size_t pos = 0;
  for (std::size_t k = 0; k < n; ++k) {
    PairValue v;
    v.b_r = detail::read_matrix(comps, pos);
    v.b_theta = detail::read_matrix(comps, pos);
    v.psi = detail::read_matrix(comps, pos);
    s.values.push_back(v);
  }
  return s;
}

}  // namespace ipl
