#pragma once

#include "qgrad/common.hpp"
#include "qgrad/expression.hpp"
#include "qgrad/mesh.hpp"

#include <algorithm>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace qgrad {

/// Nodal data (c+, c-, mu, h) of the problem together with the structural
/// constants mu1 (lower bound of mu near supp c+), mu2 (max of mu) and the
/// width of the collar around supp c+ on which c- must vanish.
struct CoefficientSet {
  MeshPtr mesh;
  Field c_plus;
  Field c_minus;
  Field mu;
  Field h;
  double mu1 = 1.0;
  double mu2 = 0.0;
  double buffer_epsilon = 0.0;

  static CoefficientSet from_fields(MeshPtr mesh, Field c_plus, Field c_minus, Field mu, Field h, double mu1,
                                    double buffer_epsilon) {
    const auto n = mesh->size();
    if (c_plus.size() != n || c_minus.size() != n || mu.size() != n || h.size() != n)
      throw std::invalid_argument("coefficient fields do not match the mesh size");
    CoefficientSet c{std::move(mesh), std::move(c_plus), std::move(c_minus), std::move(mu), std::move(h),
                     mu1, 0.0, buffer_epsilon};
    c.mu2 = c.mu.maxCoeff();
    return c;
  }

  const Mesh& grid() const { return *mesh; }

  /// Discrete support of c+: nodes where c+ > 0.
  std::vector<int> omega_plus() const {
    std::vector<int> out;
    for (int k = 0; k < c_plus.size(); ++k)
      if (c_plus[k] > 0.0) out.push_back(k);
    return out;
  }
};

struct CoefficientExpressions {
  Expression c_plus;
  Expression c_minus;
  Expression mu;
  Expression h;
  double mu1 = 1.0;
  double buffer_epsilon = 0.1;

  CoefficientSet sample(MeshPtr mesh) const {
    const Mesh& m = *mesh;
    return CoefficientSet::from_fields(mesh, qgrad::sample(m, c_plus), qgrad::sample(m, c_minus),
                                       qgrad::sample(m, mu), qgrad::sample(m, h), mu1, buffer_epsilon);
  }
};

struct ValidationCondition {
  std::string name;
  bool passed = true;
  std::vector<int> offending_nodes;
};

struct ValidationReport {
  std::vector<ValidationCondition> conditions;
  double omega_plus_measure = 0.0;
  std::vector<int> collar_nodes;

  bool all_passed() const {
    return std::all_of(conditions.begin(), conditions.end(), [](const auto& c) { return c.passed; });
  }
  const ValidationCondition& condition(const std::string& name) const {
    for (const auto& c : conditions)
      if (c.name == name) return c;
    throw std::out_of_range("no validation condition named " + name);
  }
};

/// Nodes within distance < eps of the node set `support` (the support itself included).
inline std::vector<int> collar(const Mesh& mesh, const std::vector<int>& support, double eps) {
  std::vector<int> out;
  if (support.empty()) return out;
  for (int k = 0; k < mesh.size(); ++k) {
    const Point p = mesh.node(k);
    double best = std::numeric_limits<double>::infinity();
    for (int s : support) {
      best = std::min(best, distance(p, mesh.node(s)));
      if (best < eps) break;
    }
    if (best < eps) out.push_back(k);
  }
  return out;
}

/// Nodewise check of the structural assumption on (c+, c-, mu, h): signs,
/// disjoint supports, nonempty Omega+, and mu >= mu1, c- = 0 on the
/// epsilon-collar of supp c+. Conditions are evaluated at interior nodes.
inline ValidationReport validate_A1(const CoefficientSet& c, const Mesh& mesh) {
  const int n = mesh.size();
  if (c.c_plus.size() != n || c.c_minus.size() != n || c.mu.size() != n || c.h.size() != n)
    throw std::invalid_argument("validate_A1: coefficient fields do not match the mesh");

  ValidationCondition sign_plus{"c_plus_nonnegative"}, sign_minus{"c_minus_nonnegative"}, disjoint{"disjoint_supports"};
  ValidationCondition nonempty{"omega_plus_positive_measure"}, collar_mu{"collar_mu_lower_bound"},
      collar_cm{"collar_c_minus_zero"}, mu1_positive{"mu1_positive"};

  std::vector<int> support;
  for (int k : mesh.interior()) {
    if (c.c_plus[k] < 0.0) sign_plus.offending_nodes.push_back(k);
    if (c.c_minus[k] < 0.0) sign_minus.offending_nodes.push_back(k);
    if (c.c_plus[k] * c.c_minus[k] != 0.0) disjoint.offending_nodes.push_back(k);
    if (c.c_plus[k] > 0.0) support.push_back(k);
  }
  ValidationReport report;
  report.omega_plus_measure = measure(mesh, support);
  nonempty.passed = report.omega_plus_measure > 0.0;
  mu1_positive.passed = c.mu1 > 0.0;

  report.collar_nodes = collar(mesh, support, c.buffer_epsilon);
  for (int k : report.collar_nodes) {
    if (mesh.is_boundary(k)) continue;
    if (c.mu[k] < c.mu1) collar_mu.offending_nodes.push_back(k);
    if (c.c_minus[k] != 0.0) collar_cm.offending_nodes.push_back(k);
  }
  if (!nonempty.passed) collar_mu.passed = collar_cm.passed = false;

  for (ValidationCondition* cond : {&sign_plus, &sign_minus, &disjoint, &collar_mu, &collar_cm}) {
    if (!cond->offending_nodes.empty()) cond->passed = false;
  }
  report.conditions = {sign_plus, sign_minus, disjoint, nonempty, mu1_positive, collar_mu, collar_cm};
  return report;
}

/// Geometry of a benchmark's domain, kept so the same problem can be resampled
/// at another resolution.
struct DomainSpec {
  int dimension = 1;
  Point lower{0.0, 0.0};
  Point upper{1.0, 1.0};

  MeshPtr mesh(int resolution) const {
    if (dimension == 1) return std::make_shared<const Mesh>(Mesh::interval(lower.x, upper.x, resolution));
    return std::make_shared<const Mesh>(Mesh::rectangle(lower, upper, resolution, resolution));
  }
};

struct Benchmark {
  std::string name;
  DomainSpec domain;
  CoefficientExpressions expressions;
  int resolution = 0;
  /// Ball on which the nonexistence threshold eigenproblem is posed.
  Region eigen_ball;
  MeshPtr mesh;
  CoefficientSet coeffs;

  Benchmark at_resolution(int n) const {
    Benchmark b = *this;
    b.resolution = n;
    b.mesh = domain.mesh(n);
    b.coeffs = expressions.sample(b.mesh);
    return b;
  }
};

inline std::vector<std::string> benchmark_names() {
  return {"1d-basic", "1d-signchanging-h", "1d-mu-variable", "2d-basic"};
}

/// Named reproducible test problems. `resolution` = nodes per axis (0 = default).
inline Benchmark builtin_benchmark(const std::string& name, int resolution = 0) {
  Benchmark b;
  b.name = name;
  auto E = [](const char* s) { return Expression::parse(s); };
  if (name == "1d-basic" || name == "1d-signchanging-h" || name == "1d-mu-variable") {
    b.domain = {1, {0.0, 0.0}, {1.0, 0.0}};
    b.resolution = 129;
    b.expressions.c_plus = E("10*bump((x-0.5)/0.1)");
    b.expressions.c_minus = E("bump((x-0.075)/0.075)");
    b.expressions.mu = E("1");
    b.expressions.h = E("bump((x-0.5)/0.1)");
    b.expressions.mu1 = 1.0;
    b.expressions.buffer_epsilon = 0.1;
    b.eigen_ball = Region::ball({0.5, 0.0}, 0.1);
    if (name == "1d-signchanging-h") b.expressions.h = E("bump((x-0.5)/0.1) - 0.5*bump((x-0.85)/0.1)");
    if (name == "1d-mu-variable") {
      b.expressions.mu = E("0.25 + 0.75*bump((x-0.5)/0.35)");
      b.expressions.mu1 = 0.5;
    }
  } else if (name == "2d-basic") {
    b.domain = {2, {0.0, 0.0}, {1.0, 1.0}};
    b.resolution = 33;
    b.expressions.c_plus = E("40*bump(sqrt((x-0.5)^2+(y-0.5)^2)/0.2)");
    b.expressions.c_minus = E("bump(sqrt((x-0.15)^2+(y-0.15)^2)/0.1)");
    b.expressions.mu = E("1");
    b.expressions.h = E("4*bump(sqrt((x-0.5)^2+(y-0.5)^2)/0.2)");
    b.expressions.mu1 = 1.0;
    b.expressions.buffer_epsilon = 0.1;
    b.eigen_ball = Region::ball({0.5, 0.5}, 0.2);
  } else {
    throw ConfigError("unknown benchmark '" + name + "'");
  }
  return b.at_resolution(resolution > 0 ? resolution : b.resolution);
}

}  // namespace qgrad
