#include "qgrad/certify.hpp"
#include "qgrad/plaplacian.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <map>

using namespace qgrad;
using namespace qgrad::testing;

namespace {

SolverOptions cole_hopf() {
  SolverOptions o;
  o.variable = Variable::ColeHopf;
  return o;
}

struct Traced {
  Benchmark bench;
  Solution u0;
  Branch up;
  double lambda_bar = 0.0;
};

const Traced& traced(const std::string& name, int n) {
  static std::map<std::pair<std::string, int>, Traced> cache;
  auto it = cache.find({name, n});
  if (it != cache.end()) return it->second;
  Traced t;
  t.bench = builtin_benchmark(name, n);
  t.u0 = newton_solve(Field::Zero(t.bench.mesh->size()), 0.0, t.bench.coeffs, cole_hopf());
  ContinuationControls c;
  c.solver = cole_hopf();
  c.lambda_min = -1.0;
  t.up = trace_branch(t.u0, +1, t.bench.coeffs, c, name);
  t.lambda_bar = detect_fold(t.up).lambda_bar;
  return cache.emplace(std::make_pair(name, n), std::move(t)).first->second;
}

}  // namespace

TEST(GlobalBound, BasicBenchmarkFiniteAndRefinementStable) {
  const auto& a = traced("1d-basic", 129);
  const auto& b = traced("1d-basic", 257);
  const auto ca = check_global_bound(a.up, 0.1, a.lambda_bar, a.bench.coeffs);
  const auto cb = check_global_bound(b.up, 0.1, b.lambda_bar, b.bench.coeffs);
  EXPECT_TRUE(ca.verdict);
  EXPECT_TRUE(cb.verdict);
  EXPECT_TRUE(std::isfinite(ca.M));
  EXPECT_GT(ca.witnesses.size(), 10u);
  EXPECT_LT(std::abs(ca.M - cb.M) / cb.M, 0.05);
  // Endpoint solutions are witnessed on both sheets of the fold.
  int at_lo = 0;
  for (const auto& w : ca.witnesses) at_lo += !w.from_branch_point && w.lambda == 0.1;
  EXPECT_EQ(at_lo, 2);
}

TEST(GlobalBound, MonotoneInTheInterval) {
  const auto& t = traced("1d-basic", 129);
  const double m1 = check_global_bound(t.up, 0.5, 2.0, t.bench.coeffs).M;
  const double m2 = check_global_bound(t.up, 0.2, 3.0, t.bench.coeffs).M;
  const double m3 = check_global_bound(t.up, 0.1, t.lambda_bar, t.bench.coeffs).M;
  EXPECT_LE(m1, m2);
  EXPECT_LE(m2, m3);
}

TEST(GlobalBound, RejectsUncoveredOrInvalidIntervals) {
  const auto& t = traced("1d-basic", 129);
  EXPECT_THROW(check_global_bound(t.up, 10.0, 11.0, t.bench.coeffs), DomainError);
  EXPECT_THROW(check_global_bound(t.up, 0.001, 1.0, t.bench.coeffs), DomainError);
  EXPECT_THROW(check_global_bound(t.up, 0.0, 1.0, t.bench.coeffs), std::invalid_argument);
  EXPECT_THROW(check_global_bound(t.up, 2.0, 1.0, t.bench.coeffs), std::invalid_argument);
}

TEST(GlobalBound, NonpositiveLambdaStaysBelowU0) {
  const auto& t = traced("1d-basic", 129);
  ContinuationControls c;
  c.solver = cole_hopf();
  c.lambda_min = -2.0;
  const auto down = trace_branch(t.u0, -1, t.bench.coeffs, c);
  const double cap = t.u0.u.cwiseMax(0.0).maxCoeff();
  for (const auto& p : down.points) {
    ASSERT_LE(p.lambda, 1e-12);
    EXPECT_LE(p.u.maxCoeff(), cap + 1e-10);
  }
}

TEST(OmegaPlusReduction, HoldsOnEverySolutionAndDetectsViolations) {
  for (const char* name : {"1d-basic", "1d-signchanging-h", "1d-mu-variable"}) {
    const auto& t = traced(name, 129);
    const auto self = check_omega_plus_reduction(t.u0.u, t.u0.u, t.bench.coeffs);
    EXPECT_TRUE(self.passed);
    for (const auto& p : t.up.points) {
      const auto r = check_omega_plus_reduction(p.u, t.u0.u, t.bench.coeffs);
      EXPECT_TRUE(r.passed) << name << " lambda " << p.lambda;
    }
  }
  const auto& t = traced("1d-basic", 129);
  Field bad = t.up.points[5].u;
  const double lift = 3.0 * sup_norm(t.u0.u);
  for (int k = 0; k < bad.size(); ++k)
    if (t.bench.coeffs.c_plus[k] == 0.0) bad[k] += lift;
  const auto r = check_omega_plus_reduction(bad, t.u0.u, t.bench.coeffs);
  EXPECT_FALSE(r.passed);
  EXPECT_LT(r.upper_slack, 0.0);
}

TEST(LocalBounds, InteriorPipelineAlongTheBranch) {
  const auto& t = traced("1d-basic", 129);
  const double lo = 0.1, hi = t.lambda_bar;
  const auto cert = check_global_bound(t.up, lo, hi, t.bench.coeffs);
  int checked = 0;
  for (const auto& p : t.up.points) {
    if (p.lambda < lo || p.lambda > hi) continue;
    const auto rep = check_local_bounds(p.u, p.lambda, t.bench.coeffs, lo, hi, cert.M);
    ASSERT_FALSE(rep.points.empty());
    for (const auto& q : rep.points) {
      EXPECT_LE(q.z2_max, 0.0);
      EXPECT_GT(q.v1_min, 0.0);
      EXPECT_LE(q.local_sup, cert.M);
      EXPECT_TRUE(q.interior);
    }
    EXPECT_TRUE(rep.passed) << p.lambda;
    ++checked;
  }
  EXPECT_GT(checked, 10);
}

TEST(LocalBounds, TwoDimensionalSubsample) {
  const auto b = builtin_benchmark("2d-basic", 17);
  const auto u = newton_solve(Field::Zero(b.mesh->size()), 0.5, b.coeffs, cole_hopf());
  const auto rep = check_local_bounds(u.u, 0.5, b.coeffs, 0.25, 1.0, 1.1 * u.u.maxCoeff());
  EXPECT_TRUE(rep.passed);
  EXPECT_LE(rep.points.size(), 100u);
  EXPECT_GT(rep.points.size(), 10u);
}

TEST(LocalBounds, BoundaryCaseWhenSupportTouchesTheBoundary) {
  auto m = interval(129);
  auto c = make_coeffs(
      m, [](Point p) { return p.x < 0.2 ? 5.0 * (0.2 - p.x) : 0.0; }, [](Point p) { return p.x > 0.7 ? 1.0 : 0.0; },
      [](Point) { return 1.0; }, [](Point p) { return p.x < 0.2 ? 0.5 : 0.0; });
  ASSERT_TRUE(validate_A1(c, *m).all_passed());
  const auto u = newton_solve(Field::Zero(m->size()), 0.5, c, cole_hopf());
  const auto rep = check_local_bounds(u.u, 0.5, c, 0.25, 1.0, 1.1 * u.u.maxCoeff());
  EXPECT_TRUE(rep.passed);
  int boundary = 0;
  for (const auto& q : rep.points) boundary += !q.interior;
  EXPECT_GT(boundary, 0);
  EXPECT_EQ(rep.points.front().xbar.x, 0.0);
}

TEST(LocalBounds, RejectsMissingCollarAndLambdaOutsideInterval) {
  auto m = interval(65);
  // c- switches on right next to supp c+: no collar at the support edge.
  auto c = make_coeffs(
      m, [](Point p) { return std::abs(p.x - 0.5) < 0.1 ? 1.0 : 0.0; },
      [](Point p) { return std::abs(p.x - 0.5) >= 0.1 ? 1.0 : 0.0; }, [](Point) { return 1.0; }, zero);
  const Field u = Field::Zero(m->size());
  EXPECT_THROW(check_local_bounds(u, 0.5, c, 0.25, 1.0, 1.0), HypothesisError);
  const auto& t = traced("1d-basic", 129);
  EXPECT_THROW(check_local_bounds(t.u0.u, 0.0, t.bench.coeffs, 0.25, 1.0, 1.0), std::invalid_argument);
}

TEST(LocalBounds, SubdomainSolverMatchesFullDirichletSolve) {
  auto m = square(17);
  std::mt19937_64 rng(5);
  const Field q = random_interior_field(*m, rng, 0.0, 2.0);
  const Field f = random_interior_field(*m, rng, -1.0, 1.0);
  const auto& in = m->interior();
  const Field z = detail::subdomain_dirichlet(*m, std::vector<int>(in.begin(), in.end()), q, f);
  const Field ref = LinearDirichletSolver(*m, q).solve(f);
  EXPECT_LT(sup_norm(z - ref), 1e-12);
}
