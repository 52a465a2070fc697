#pragma once

// Strict reader for JSON run configurations. Every key a parser does not ask
// for is reported as unknown when the section is closed.

#include "ipl/io.hpp"

#include <optional>
#include <set>

namespace ipl::config {

inline constexpr int kSchemaVersion = 1;

class Section {
 public:
  Section(const json& j, std::string where) : j_(&j), where_(std::move(where)) {
    if (!j.is_object()) throw SchemaError(where_ + ": expected an object");
  }

  const std::string& where() const { return where_; }
  bool has(const std::string& key) const { return j_->contains(key); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return detail::require(*j_, key, where_);
  }

  double number(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number()) throw SchemaError(path(key) + ": expected a number");
    return v.get<double>();
  }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

  /// Tolerances and scales: strictly positive.
  double positive(const std::string& key, double fallback) {
    const double v = number(key, fallback);
    if (!(v > 0.0)) throw SchemaError(path(key) + ": must be positive");
    return v;
  }

  long long integer(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number_integer()) throw SchemaError(path(key) + ": expected an integer");
    return v.get<long long>();
  }
  long long integer(const std::string& key, long long fallback) { return has(key) ? integer(key) : fallback; }

  int count(const std::string& key, int fallback, int lo = 1, int hi = 10'000'000) {
    const long long v = integer(key, fallback);
    if (v < lo || v > hi)
      throw SchemaError(path(key) + ": must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return static_cast<int>(v);
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_boolean()) throw SchemaError(path(key) + ": expected true or false");
    return v.get<bool>();
  }

  std::string text(const std::string& key, const std::string& fallback,
                   std::initializer_list<const char*> allowed = {}) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_string()) throw SchemaError(path(key) + ": expected a string");
    std::string s = v.get<std::string>();
    if (allowed.size() == 0) return s;
    std::string list;
    for (const char* a : allowed) {
      if (s == a) return s;
      list += std::string(list.empty() ? "" : ", ") + a;
    }
    throw SchemaError(path(key) + ": expected one of " + list);
  }

  Complex complex(const std::string& key) { return complex_from_json(raw(key), path(key)); }
  Complex complex(const std::string& key, Complex fallback) { return has(key) ? complex(key) : fallback; }

  std::vector<double> numbers(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_array()) throw SchemaError(path(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) throw SchemaError(path(key) + ": expected an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
    return has(key) ? numbers(key) : fallback;
  }

  std::array<double, 2> pair(const std::string& key, std::array<double, 2> fallback) {
    if (!has(key)) return fallback;
    const auto v = numbers(key);
    if (v.size() != 2) throw SchemaError(path(key) + ": expected two numbers");
    return {v[0], v[1]};
  }

  /// [lo, hi] with 0 < lo < hi.
  std::array<double, 2> range(const std::string& key, std::array<double, 2> fallback) {
    const auto r = pair(key, fallback);
    if (!(r[0] > 0.0) || !(r[1] > r[0])) throw SchemaError(path(key) + ": need 0 < lo < hi");
    return r;
  }

  std::vector<Complex> complexes(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_array()) throw SchemaError(path(key) + ": expected an array");
    std::vector<Complex> out;
    for (std::size_t i = 0; i < v.size(); ++i)
      out.push_back(complex_from_json(v[i], path(key) + "[" + std::to_string(i) + "]"));
    return out;
  }

  Section child(const std::string& key) { return Section(raw(key), path(key)); }

  std::optional<Section> optional_child(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return child(key);
  }

  void done() const {
    for (const auto& [k, v] : j_->items())
      if (!used_.count(k)) throw SchemaError(where_ + ": unknown key '" + k + "'");
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }

 private:
  const json* j_;
  std::string where_;
  std::set<std::string> used_;
};

/// Library preconditions raised while interpreting a config are schema errors.
template <class F>
auto guarded(const std::string& where, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const PreconditionError& e) {
    throw SchemaError(where + ": " + e.what());
  }
}

inline std::array<double, 2> xi_pair(Section& s, const std::string& key) {
  const auto v = s.numbers(key);
  if (v.size() != 2) throw SchemaError(s.path(key) + ": expected [xi1, xi2]");
  return {v[0], v[1]};
}

/// Either a list of radii or {"from", "to", "count"[, "log": true]} with
/// geometric spacing; with "log" the end points are ln r.
inline std::vector<double> rings(Section& parent, const std::string& key, std::vector<double> fallback) {
  if (!parent.has(key)) return fallback;
  const json& v = parent.raw(key);
  std::vector<double> out;
  if (v.is_array()) {
    out = parent.numbers(key);
  } else {
    Section s(v, parent.path(key));
    const bool ln = s.boolean("log", false);
    double a = s.number("from"), b = s.number("to");
    const int n = s.count("count", 8, 2, 1000);
    s.done();
    if (ln) {
      a = std::exp(a);
      b = std::exp(b);
    }
    if (!(a > 0.0) || !(b > a)) throw SchemaError(parent.path(key) + ": need 0 < from < to");
    for (int i = 0; i < n; ++i) out.push_back(a * std::pow(b / a, double(i) / (n - 1)));
  }
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!(out[i] > 0.0) || (i > 0 && !(out[i] > out[i - 1])))
      throw SchemaError(parent.path(key) + ": radii must be positive and increasing");
  return out;
}

/// A single model object, a list of them, or {"grid": {"lambda": [...],
/// "mu": [...], "alpha": [...]}} expanded as a product.
inline std::vector<ModelParams> models(Section& parent, const std::string& key) {
  const json& v = parent.raw(key);
  const std::string where = parent.path(key);
  std::vector<ModelParams> out;
  if (v.is_array()) {
    for (const auto& m : v) out.push_back(model_from_json(m));
  } else if (v.is_object() && v.contains("grid")) {
    Section outer(v, where);
    Section s = outer.child("grid");
    outer.done();
    const auto ls = s.complexes("lambda");
    const auto ms = s.complexes("mu");
    const auto as = s.numbers("alpha");
    s.done();
    for (Complex l : ls)
      for (Complex m : ms)
        for (double a : as) {
          ModelParams p;
          p.lambda = l;
          p.mu = m;
          p.alpha = a;
          guarded(where, [&] { p.validate(); return 0; });
          out.push_back(p);
        }
  } else {
    out.push_back(model_from_json(v));
  }
  if (out.empty()) throw SchemaError(where + ": no models");
  return out;
}

}  // namespace ipl::config
