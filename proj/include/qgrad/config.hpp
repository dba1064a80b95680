#pragma once

// Run configuration: a JSON document validated key by key. Unknown keys and
// wrongly typed values are rejected with the dotted key path in the message.

#include "qgrad/coefficients.hpp"
#include "qgrad/common.hpp"
#include "qgrad/io.hpp"
#include "qgrad/solver.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace qgrad {

struct ProblemConfig {
  std::string builtin = "1d-basic";  // empty for an inline problem
  DomainSpec domain;
  CoefficientExpressions expressions;
  Region eigen_ball;
  int default_resolution = 129;
};

struct SolverBlock {
  double lambda = 0.0;
  Variable variable = Variable::ColeHopf;
  double newton_tol = 1e-10;
  int max_iter = 50;
  int multistart = 8;   // seeded random starts tried after the deterministic ones
  /// For lambda > 0, solve the problem with u replaced by (u - u0)^+ + u0 so
  /// that only solutions u >= u0 are found.
  bool above_u0 = true;
};

struct ContinuationBlock {
  double ds0 = 0.05;
  double ds_min = 1e-6;
  double ds_max = 2.0;
  double lambda_min = -2.0;
  double lambda_max = std::numeric_limits<double>::infinity();
  double sup_norm_cap = 1e3;
  int max_points = 5000;
  bool write_fields = true;
};

struct HarnackBlock {
  std::vector<std::string> suites{"boundary"};
  std::size_t samples = 200;       // boundary suite
  std::size_t instances = 1000;    // property suites
  std::vector<int> resolutions;    // boundary suite meshes; empty = {resolution}
  double epsilon = 0.5;
  double R = 0.2;
  double r_bar = 0.5;
  Point x0{0.5, 0.0};
};

struct CertifyBlock {
  std::optional<double> lambda_lo;   // default: lo_fraction * fold lambda
  std::optional<double> lambda_hi;   // default: fold lambda
  double lo_fraction = 0.1;
  double inflation = 1.1;
  bool local_bounds = true;
};

struct RunConfig {
  ProblemConfig problem;
  int resolution = 0;   // nodes per axis; 0 = problem default
  std::string out = "out";
  std::uint64_t seed = 1;
  int threads = 1;
  SolverBlock solver;
  ContinuationBlock continuation;
  HarnackBlock harnack;
  CertifyBlock certify;

  int nodes() const { return resolution > 0 ? resolution : problem.default_resolution; }
};

inline const std::vector<std::string>& harnack_suite_names() {
  static const std::vector<std::string> names{"boundary",   "interior",     "local-max",         "brezis-cabre",
                                              "comparison", "growth-lemma", "distribution-decay", "gisl"};
  return names;
}

namespace detail {

using nlohmann::json;

/// Walks one JSON object, recording which keys were consumed so leftovers can
/// be reported.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "top level" : path_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (auto v = get(key)) {
      if (!v->is_number()) fail(key_path(key), "expected a number");
      out = v->get<double>();
    }
  }
  /// Number or null (null = +infinity).
  void bound(const std::string& key, double& out) {
    if (auto v = get(key)) {
      if (v->is_null()) out = std::numeric_limits<double>::infinity();
      else if (v->is_number()) out = v->get<double>();
      else fail(key_path(key), "expected a number or null");
    }
  }
  void optional_number(const std::string& key, std::optional<double>& out) {
    if (auto v = get(key)) {
      if (v->is_null()) out.reset();
      else if (v->is_number()) out = v->get<double>();
      else fail(key_path(key), "expected a number or null");
    }
  }
  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (auto v = get(key)) {
      if (!v->is_number_integer()) fail(key_path(key), "expected an integer");
      if (v->is_number_unsigned()) out = static_cast<Int>(v->get<std::uint64_t>());
      else {
        const auto s = v->get<std::int64_t>();
        if (s < 0 && !std::is_signed_v<Int>) fail(key_path(key), "must be non-negative");
        out = static_cast<Int>(s);
      }
    }
  }
  void boolean(const std::string& key, bool& out) {
    if (auto v = get(key)) {
      if (!v->is_boolean()) fail(key_path(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void string(const std::string& key, std::string& out) {
    if (auto v = get(key)) {
      if (!v->is_string()) fail(key_path(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  void point(const std::string& key, Point& out) {
    if (auto v = get(key)) {
      if (!v->is_array() || v->empty() || v->size() > 2) fail(key_path(key), "expected [x] or [x, y]");
      for (const auto& e : *v)
        if (!e.is_number()) fail(key_path(key), "expected [x] or [x, y]");
      out.x = (*v)[0].get<double>();
      out.y = v->size() == 2 ? (*v)[1].get<double>() : 0.0;
    }
  }
  void expression(const std::string& key, Expression& out) {
    if (auto v = get(key)) {
      if (v->is_number()) out = Expression::constant(v->get<double>());
      else if (v->is_string()) {
        try {
          out = Expression::parse(v->get<std::string>());
        } catch (const ConfigError& e) {
          fail(key_path(key), e.what());
        }
      } else {
        fail(key_path(key), "expected an expression string or a number");
      }
    }
  }

  /// Throws for any key that no accessor asked for.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail(key_path(it.key()), "unknown key");
  }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw ConfigError("config: key '" + where + "': " + what);
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline ProblemConfig parse_problem(const json& j) {
  ProblemConfig p;
  if (j.is_string()) {
    p.builtin = j.get<std::string>();
    const auto names = benchmark_names();
    if (std::find(names.begin(), names.end(), p.builtin) == names.end())
      ObjectReader::fail("problem", "unknown builtin '" + p.builtin + "'");
    p.default_resolution = p.builtin.starts_with("2d") ? 33 : 129;
    return p;
  }
  ObjectReader r(j, "problem");
  p.builtin.clear();
  int dim = 1;
  r.integer("dimension", dim);
  if (dim != 1 && dim != 2) ObjectReader::fail("problem.dimension", "must be 1 or 2");
  p.domain.dimension = dim;
  p.domain.lower = {0.0, 0.0};
  p.domain.upper = {1.0, dim == 2 ? 1.0 : 0.0};
  r.point("lower", p.domain.lower);
  r.point("upper", p.domain.upper);
  if (!(p.domain.upper.x > p.domain.lower.x) || (dim == 2 && !(p.domain.upper.y > p.domain.lower.y)))
    ObjectReader::fail("problem.upper", "must exceed problem.lower in every coordinate");
  for (const char* k : {"c_plus", "c_minus", "mu", "h"})
    if (!r.has(k)) ObjectReader::fail(r.key_path(k), "required");
  r.expression("c_plus", p.expressions.c_plus);
  r.expression("c_minus", p.expressions.c_minus);
  r.expression("mu", p.expressions.mu);
  r.expression("h", p.expressions.h);
  r.number("mu1", p.expressions.mu1);
  r.number("buffer_epsilon", p.expressions.buffer_epsilon);
  p.default_resolution = dim == 1 ? 129 : 33;
  p.eigen_ball = Region::ball({0.5 * (p.domain.lower.x + p.domain.upper.x), 0.5 * (p.domain.lower.y + p.domain.upper.y)},
                              0.1);
  if (auto e = r.get("eigen_ball")) {
    ObjectReader er(*e, "problem.eigen_ball");
    Point c = p.eigen_ball.center;
    double rad = p.eigen_ball.size;
    er.point("center", c);
    er.number("radius", rad);
    er.finish();
    if (!(rad > 0.0)) ObjectReader::fail("problem.eigen_ball.radius", "must be positive");
    p.eigen_ball = Region::ball(c, rad);
  }
  r.finish();
  return p;
}

}  // namespace detail

/// Parses and validates a configuration document. Absent keys keep defaults.
inline RunConfig parse_config(const std::string& text) {
  using detail::json;
  using detail::ObjectReader;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // The library message carries "line L, column C".
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  RunConfig c;
  ObjectReader r(j, "");
  if (auto p = r.get("problem")) c.problem = detail::parse_problem(*p);
  r.integer("resolution", c.resolution);
  if (c.resolution != 0 && c.resolution < 5) ObjectReader::fail("resolution", "must be 0 or at least 5");
  r.string("out", c.out);
  r.integer("seed", c.seed);
  r.integer("threads", c.threads);
  if (c.threads < 1) ObjectReader::fail("threads", "must be at least 1");

  if (auto s = r.get("solver")) {
    ObjectReader b(*s, "solver");
    b.number("lambda", c.solver.lambda);
    std::string var = to_string(c.solver.variable);
    b.string("variable", var);
    if (var == "cole-hopf") c.solver.variable = Variable::ColeHopf;
    else if (var == "direct-u") c.solver.variable = Variable::DirectU;
    else ObjectReader::fail("solver.variable", "expected \"cole-hopf\" or \"direct-u\"");
    b.number("newton_tol", c.solver.newton_tol);
    b.integer("max_iter", c.solver.max_iter);
    b.integer("multistart", c.solver.multistart);
    b.boolean("above_u0", c.solver.above_u0);
    b.finish();
    if (!(c.solver.newton_tol > 0.0)) ObjectReader::fail("solver.newton_tol", "must be positive");
    if (c.solver.max_iter < 1) ObjectReader::fail("solver.max_iter", "must be at least 1");
    if (c.solver.multistart < 0) ObjectReader::fail("solver.multistart", "must be non-negative");
  }
  if (auto s = r.get("continuation")) {
    ObjectReader b(*s, "continuation");
    auto& k = c.continuation;
    b.number("ds0", k.ds0);
    b.number("ds_min", k.ds_min);
    b.number("ds_max", k.ds_max);
    b.number("lambda_min", k.lambda_min);
    b.bound("lambda_max", k.lambda_max);
    b.number("sup_norm_cap", k.sup_norm_cap);
    b.integer("max_points", k.max_points);
    b.boolean("write_fields", k.write_fields);
    b.finish();
    if (!(k.ds_min > 0.0 && k.ds_min <= k.ds0 && k.ds0 <= k.ds_max))
      ObjectReader::fail("continuation.ds0", "need 0 < ds_min <= ds0 <= ds_max");
    if (!(k.lambda_min < 0.0)) ObjectReader::fail("continuation.lambda_min", "must be negative");
    if (!(k.lambda_max > 0.0)) ObjectReader::fail("continuation.lambda_max", "must be positive");
    if (!(k.sup_norm_cap > 0.0)) ObjectReader::fail("continuation.sup_norm_cap", "must be positive");
    if (k.max_points < 2) ObjectReader::fail("continuation.max_points", "must be at least 2");
  }
  if (auto s = r.get("harnack")) {
    ObjectReader b(*s, "harnack");
    auto& h = c.harnack;
    if (auto v = b.get("suites")) {
      if (!v->is_array()) ObjectReader::fail("harnack.suites", "expected an array of suite names");
      h.suites.clear();
      const auto& names = harnack_suite_names();
      for (const auto& e : *v) {
        if (!e.is_string()) ObjectReader::fail("harnack.suites", "expected an array of suite names");
        const auto name = e.get<std::string>();
        if (std::find(names.begin(), names.end(), name) == names.end())
          ObjectReader::fail("harnack.suites", "unknown suite '" + name + "'");
        h.suites.push_back(name);
      }
    }
    b.integer("samples", h.samples);
    b.integer("instances", h.instances);
    if (auto v = b.get("resolutions")) {
      if (!v->is_array()) ObjectReader::fail("harnack.resolutions", "expected an array of integers");
      h.resolutions.clear();
      for (const auto& e : *v) {
        if (!e.is_number_integer() || e.get<std::int64_t>() < 9)
          ObjectReader::fail("harnack.resolutions", "entries must be integers >= 9");
        h.resolutions.push_back(e.get<int>());
      }
    }
    b.number("epsilon", h.epsilon);
    b.number("R", h.R);
    b.number("r_bar", h.r_bar);
    b.point("x0", h.x0);
    b.finish();
    if (!(h.epsilon > 0.0)) ObjectReader::fail("harnack.epsilon", "must be positive");
    if (!(h.R > 0.0)) ObjectReader::fail("harnack.R", "must be positive");
    if (!(h.r_bar > 0.0)) ObjectReader::fail("harnack.r_bar", "must be positive");
    if (h.samples < 1) ObjectReader::fail("harnack.samples", "must be at least 1");
    if (h.instances < 1) ObjectReader::fail("harnack.instances", "must be at least 1");
  }
  if (auto s = r.get("certify")) {
    ObjectReader b(*s, "certify");
    auto& k = c.certify;
    b.optional_number("lambda_lo", k.lambda_lo);
    b.optional_number("lambda_hi", k.lambda_hi);
    b.number("lo_fraction", k.lo_fraction);
    b.number("inflation", k.inflation);
    b.boolean("local_bounds", k.local_bounds);
    b.finish();
    if (k.lambda_lo && !(*k.lambda_lo > 0.0)) ObjectReader::fail("certify.lambda_lo", "must be positive");
    if (k.lambda_lo && k.lambda_hi && !(*k.lambda_hi > *k.lambda_lo))
      ObjectReader::fail("certify.lambda_hi", "must exceed certify.lambda_lo");
    if (k.lambda_hi && !(*k.lambda_hi > 0.0)) ObjectReader::fail("certify.lambda_hi", "must be positive");
    if (!(k.lo_fraction > 0.0 && k.lo_fraction < 1.0)) ObjectReader::fail("certify.lo_fraction", "must lie in (0, 1)");
    if (!(k.inflation >= 1.0)) ObjectReader::fail("certify.inflation", "must be at least 1");
  }
  r.finish();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("config: cannot read '" + path + "'");
  std::ostringstream s;
  s << f.rdbuf();
  return parse_config(s.str());
}

/// Canonical form of every setting that affects results. `out` and `threads`
/// are excluded, so runs differing only in those hash identically.
inline nlohmann::json canonical_json(const RunConfig& c) {
  using nlohmann::json;
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  auto pt = [](Point p) { return json::array({p.x, p.y}); };
  json j;
  if (!c.problem.builtin.empty()) {
    j["problem"] = c.problem.builtin;
  } else {
    const auto& p = c.problem;
    j["problem"] = {{"dimension", p.domain.dimension},
                    {"lower", pt(p.domain.lower)},
                    {"upper", pt(p.domain.upper)},
                    {"c_plus", p.expressions.c_plus.text()},
                    {"c_minus", p.expressions.c_minus.text()},
                    {"mu", p.expressions.mu.text()},
                    {"h", p.expressions.h.text()},
                    {"mu1", p.expressions.mu1},
                    {"buffer_epsilon", p.expressions.buffer_epsilon},
                    {"eigen_ball", {{"center", pt(p.eigen_ball.center)}, {"radius", p.eigen_ball.size}}}};
  }
  j["resolution"] = c.nodes();
  j["seed"] = c.seed;
  j["solver"] = {{"lambda", c.solver.lambda},
                 {"variable", to_string(c.solver.variable)},
                 {"newton_tol", c.solver.newton_tol},
                 {"max_iter", c.solver.max_iter},
                 {"multistart", c.solver.multistart},
                 {"above_u0", c.solver.above_u0}};
  const auto& k = c.continuation;
  j["continuation"] = {{"ds0", k.ds0},
                       {"ds_min", k.ds_min},
                       {"ds_max", k.ds_max},
                       {"lambda_min", k.lambda_min},
                       {"lambda_max", num(k.lambda_max)},
                       {"sup_norm_cap", k.sup_norm_cap},
                       {"max_points", k.max_points},
                       {"write_fields", k.write_fields}};
  const auto& h = c.harnack;
  j["harnack"] = {{"suites", h.suites},     {"samples", h.samples}, {"instances", h.instances},
                  {"resolutions", h.resolutions}, {"epsilon", h.epsilon}, {"R", h.R},
                  {"r_bar", h.r_bar},       {"x0", pt(h.x0)}};
  const auto& q = c.certify;
  j["certify"] = {{"lambda_lo", q.lambda_lo ? json(*q.lambda_lo) : json(nullptr)},
                  {"lambda_hi", q.lambda_hi ? json(*q.lambda_hi) : json(nullptr)},
                  {"lo_fraction", q.lo_fraction},
                  {"inflation", q.inflation},
                  {"local_bounds", q.local_bounds}};
  return j;
}

inline std::uint64_t config_hash(const RunConfig& c) { return io::fnv1a64(canonical_json(c).dump()); }

/// The problem of `c` sampled at its resolution.
inline Benchmark make_benchmark(const RunConfig& c) {
  if (!c.problem.builtin.empty()) return builtin_benchmark(c.problem.builtin, c.nodes());
  Benchmark b;
  b.name = "inline";
  b.domain = c.problem.domain;
  b.expressions = c.problem.expressions;
  b.eigen_ball = c.problem.eigen_ball;
  return b.at_resolution(c.nodes());
}

}  // namespace qgrad
