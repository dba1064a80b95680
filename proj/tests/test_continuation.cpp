#include "qgrad/continuation.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <random>

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
};

const Traced& basic_1d(int n = 129) {
  static std::map<int, Traced> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  Traced t;
  t.bench = builtin_benchmark("1d-basic", n);
  const auto opts = cole_hopf();
  t.u0 = newton_solve(Field::Zero(t.bench.mesh->size()), 0.0, t.bench.coeffs, opts);
  ContinuationControls c;
  c.solver = opts;
  c.lambda_min = -1.0;
  t.up = trace_branch(t.u0, +1, t.bench.coeffs, c, "1d-basic");
  return cache.emplace(n, std::move(t)).first->second;
}

Branch synthetic(std::vector<double> lambdas, std::vector<double> s) {
  Branch b;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    BranchPoint p;
    p.lambda = lambdas[i];
    p.arclength = s[i];
    p.u = Field::Zero(3);
    b.points.push_back(p);
  }
  return b;
}

Branch reversed(const Branch& b) {
  Branch r = b;
  r.points.assign(b.points.rbegin(), b.points.rend());
  const double total = b.points.back().arclength;
  for (auto& p : r.points) p.arclength = total - p.arclength;
  return r;
}

}  // namespace

TEST(DetectFold, MaxOfSamplesWithinOneStep) {
  const auto rep = detect_fold(synthetic({0.0, 0.8, 0.5}, {0.0, 0.8, 1.1}));
  ASSERT_TRUE(rep.found);
  EXPECT_EQ(rep.index, 1u);
  EXPECT_GE(rep.lambda_bar, 0.8);
  EXPECT_LE(rep.lambda_bar, 0.8 + 0.8);
}

TEST(DetectFold, ParabolaVertexIsExactOnQuadratics) {
  std::vector<double> l, s;
  for (int i = 0; i <= 10; ++i) {
    const double si = 0.13 * i;
    s.push_back(si);
    l.push_back(2.0 - (si - 0.7) * (si - 0.7));
  }
  const auto rep = detect_fold(synthetic(l, s));
  ASSERT_TRUE(rep.found);
  EXPECT_NEAR(rep.lambda_bar, 2.0, 1e-12);
}

TEST(DetectFold, MonotoneBranchHasNoFold) {
  EXPECT_FALSE(detect_fold(synthetic({0.0, -0.5, -1.0, -1.7}, {0, 0.5, 1.0, 1.7})).found);
  EXPECT_FALSE(detect_fold(synthetic({-1.7, -1.0, -0.5, 0.0}, {0, 0.7, 1.2, 1.7})).found);
  EXPECT_THROW(detect_fold(synthetic({0.0, 1.0}, {0, 1})), std::invalid_argument);
}

TEST(DetectFold, InvariantUnderReversal) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.05, 0.3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> l, s;
    double si = 0.0;
    for (int i = 0; i < 15; ++i) {
      s.push_back(si);
      l.push_back(std::sin(1.3 * si) + 0.1 * si);
      si += U(rng);
    }
    const auto a = detect_fold(synthetic(l, s));
    const auto b = detect_fold(reversed(synthetic(l, s)));
    ASSERT_EQ(a.found, b.found);
    EXPECT_NEAR(a.lambda_bar, b.lambda_bar, 1e-12);
  }
  const auto& t = basic_1d();
  EXPECT_NEAR(detect_fold(t.up).lambda_bar, detect_fold(reversed(t.up)).lambda_bar, 1e-12);
}

TEST(TraceBranch, NegativeLambdaIsMonotoneAndBelowU0) {
  for (const char* name : {"1d-basic", "2d-basic"}) {
    const auto b = builtin_benchmark(name, std::string(name) == "2d-basic" ? 17 : 129);
    const auto opts = cole_hopf();
    const auto u0 = newton_solve(Field::Zero(b.mesh->size()), 0.0, b.coeffs, opts);
    ContinuationControls c;
    c.solver = opts;
    c.lambda_min = -2.0;
    const auto br = trace_branch(u0, -1, b.coeffs, c, name);
    EXPECT_EQ(br.stop, StopReason::LambdaBound) << name;
    EXPECT_TRUE(br.fold_indices.empty()) << name;
    EXPECT_FALSE(detect_fold(br).found) << name;
    for (std::size_t i = 1; i < br.size(); ++i) {
      const auto& p = br.points[i];
      EXPECT_LT(p.lambda, br.points[i - 1].lambda);
      EXPECT_LE((p.u - br.points[i - 1].u).maxCoeff(), 1e-8) << name << " point " << i;
      EXPECT_LE((p.u - u0.u).maxCoeff(), 1e-8);
      EXPECT_GE((p.u - (u0.u.array() - sup_norm(u0.u)).matrix()).minCoeff(), -1e-8);
      EXPECT_EQ(p.jacobian_signature, br.points[0].jacobian_signature);
    }
  }
}

TEST(TraceBranch, FoldOnBasicBenchmark) {
  const auto& t = basic_1d();
  const auto fold = detect_fold(t.up);
  ASSERT_TRUE(fold.found);
  EXPECT_GT(fold.lambda_bar, 0.0);
  EXPECT_FALSE(t.up.fold_indices.empty());
  // Upper branch returns toward lambda = 0 with growing norm.
  const auto& last = t.up.points.back();
  EXPECT_GT(last.lambda, 0.0);
  EXPECT_LT(last.lambda, 0.1 * fold.lambda_bar);
  EXPECT_GT(last.sup_norm, 100.0);
  // Jacobian signature flips exactly at the first fold.
  const std::size_t f = t.up.fold_indices.front();
  EXPECT_NE(t.up.points[f - 1].jacobian_signature, t.up.points[f].jacobian_signature);
  for (std::size_t i = 1; i < f; ++i)
    EXPECT_EQ(t.up.points[i].jacobian_signature, t.up.points[0].jacobian_signature);
  // Consecutive points are at most ds_max apart.
  for (std::size_t i = 1; i < t.up.size(); ++i)
    EXPECT_LE(t.up.points[i].arclength - t.up.points[i - 1].arclength, t.up.controls.ds_max + 1e-12);
}

TEST(TraceBranch, FoldStableUnderRefinement) {
  const double a = detect_fold(basic_1d(129).up).lambda_bar;
  const double b = detect_fold(basic_1d(257).up).lambda_bar;
  EXPECT_LT(std::abs(a - b) / b, 0.02);
}

TEST(TraceBranch, LinearProblemApproachesFirstWeightedEigenvalue) {
  auto m = interval(65);
  auto c = make_coeffs(
      m, [](Point p) { return 20.0 * std::exp(-50.0 * (p.x - 0.4) * (p.x - 0.4)); }, zero, zero,
      [](Point p) { return p.x; });
  SolverOptions opts;
  const auto u0 = newton_solve(Field::Zero(m->size()), 0.0, c, opts);
  ContinuationControls ctl;
  ctl.solver = opts;
  ctl.sup_norm_cap = 1e8;
  ctl.ds_max = 1e7;
  const auto br = trace_branch(u0, +1, c, ctl);
  EXPECT_EQ(br.stop, StopReason::SupNormCap);

  // Oracle: K phi = gamma C phi on interior nodes; gamma1 = 1 / largest eigenvalue of (C, K).
  const int n = m->size() - 2;
  const double ih2 = 1.0 / (m->hx() * m->hx());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n), C = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    K(i, i) = 2 * ih2;
    if (i > 0) K(i, i - 1) = -ih2;
    if (i + 1 < n) K(i, i + 1) = -ih2;
    C(i, i) = c.c_plus[i + 1];
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(C, K);
  const double gamma1 = 1.0 / es.eigenvalues().maxCoeff();
  EXPECT_NEAR(br.lambda_max(), gamma1, 1e-5 * gamma1);
  EXPECT_LT(br.lambda_max(), gamma1);
}

TEST(TraceBranch, RejectsBadInput) {
  const auto& t = basic_1d();
  ContinuationControls c;
  c.solver = cole_hopf();
  EXPECT_THROW(trace_branch(t.u0, 0, t.bench.coeffs, c), std::invalid_argument);
  Solution bogus = t.u0;
  bogus.u *= 1.5;
  EXPECT_THROW(trace_branch(bogus, 1, t.bench.coeffs, c), std::invalid_argument);
  c.ds0 = 0.0;
  EXPECT_THROW(trace_branch(t.u0, 1, t.bench.coeffs, c), std::invalid_argument);
}

TEST(TraceBranch, PointsAreIdempotentUnderResolve) {
  const auto& t = basic_1d();
  const auto opts = cole_hopf();
  const DiscreteProblem P(t.bench.coeffs, opts.variable);
  for (std::size_t i = 0; i < t.up.size(); i += 7) {
    const auto& p = t.up.points[i];
    const auto s = newton_solve(p.u, p.lambda, t.bench.coeffs, opts);
    EXPECT_LE(s.newton_iterations, 1) << "point " << i;
    EXPECT_LE(sup_norm(s.u - p.u), 1e-8 * std::max(1.0, p.sup_norm)) << "point " << i;
    // Tolerance is newton_tol unless rounding in the rows forbids it.
    const Field z = P.from_u(p.u);
    const double tol = std::max(opts.newton_tol, P.residual_floor(z, p.lambda));
    EXPECT_LE(p.residual_norm, tol) << "point " << i;
    EXPECT_LE(s.residual_norm, tol) << "point " << i;
  }
}

TEST(SolutionsAt, CountsMatchTheBranchGeometry) {
  const auto& t = basic_1d();
  const auto& c = t.bench.coeffs;
  ContinuationControls ctl;
  ctl.solver = cole_hopf();
  ctl.lambda_min = -1.0;
  const auto down = trace_branch(t.u0, -1, c, ctl);
  const auto full = join_branches(down, t.up);

  EXPECT_EQ(solutions_at(full, -0.5, c).size(), 1u);

  const double lbar = detect_fold(full).lambda_bar;
  const auto two = solutions_at(full, 0.5 * lbar, c);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_GT(sup_norm(two[0].u - two[1].u), 1e-3);
  for (const auto& s : two) EXPECT_GE((s.u - t.u0.u).minCoeff(), -1e-8);

  EXPECT_TRUE(solutions_at(full, 1.01 * lbar, c).empty());
  EXPECT_THROW(solutions_at(full, -5.0, c), std::out_of_range);
}

TEST(SolutionsAt, RandomStartsFailAboveTheFold) {
  const auto& t = basic_1d();
  const double lambda = 1.05 * detect_fold(t.up).lambda_bar;
  const auto opts = cole_hopf();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> amp(0.0, 10.0);
  int found = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const double a = amp(rng);
    Field start = t.u0.u + random_interior_field(*t.bench.mesh, rng, 0.0, a);
    try {
      const auto s = newton_solve(start, lambda, t.bench.coeffs, opts);
      if ((s.u - t.u0.u).minCoeff() >= -1e-8) ++found;
    } catch (const Error&) {
    }
  }
  EXPECT_EQ(found, 0);
}

TEST(ModifiedProblem, SameSolutionsAndAboveU0) {
  const auto& t = basic_1d();
  const auto& c = t.bench.coeffs;
  const auto opts = cole_hopf();
  const double lbar = detect_fold(t.up).lambda_bar;
  const auto plain = solutions_at(t.up, 0.5 * lbar, c);
  ASSERT_EQ(plain.size(), 2u);
  for (const auto& s : plain) {
    const auto m = newton_solve(s.u, s.lambda, c, opts, t.u0.u);
    EXPECT_LE(sup_norm(m.u - s.u), 1e-8 * std::max(1.0, sup_norm(s.u)));
    EXPECT_GE((m.u - t.u0.u).minCoeff(), -1e-8);
  }
  ContinuationControls ctl;
  ctl.solver = opts;
  ctl.modified_base = t.u0.u;
  const auto br = trace_branch(t.u0, +1, c, ctl);
  EXPECT_NEAR(detect_fold(br).lambda_bar, lbar, 1e-6 * lbar);
  for (const auto& p : br.points) EXPECT_GE((p.u - t.u0.u).minCoeff(), -1e-8);
}

TEST(NonexistenceThreshold, DirichletEigenvalueOnAlignedBall) {
  auto m = interval(129);
  auto c = make_coeffs(
      m, [](Point p) { return std::abs(p.x - 0.5) < 0.3 ? 2.0 : 0.0; }, zero, [](Point) { return 1.0; }, zero);
  const double R = 0.125;
  const auto rep = nonexistence_threshold(c, *m, Region::ball({0.5, 0.0}, R), Field::Ones(m->size()));
  const double exact = std::pow(std::numbers::pi / (2 * R), 2);
  EXPECT_LT(std::abs(rep.gamma1 - exact) / exact, 0.01);
  // The discrete Dirichlet eigenvalue is known in closed form.
  const double h = m->hx();
  EXPECT_NEAR(rep.gamma1, 4.0 / (h * h) * std::pow(std::sin(std::numbers::pi * h / (4 * R)), 2), 1e-8 * exact);
  for (int k : rep.ball_nodes) EXPECT_GT(rep.phi[k], 0.0);
  EXPECT_DOUBLE_EQ(rep.phi.maxCoeff(), 1.0);
}

TEST(NonexistenceThreshold, BoundsTheFold) {
  const auto& t = basic_1d();
  const auto rep = nonexistence_threshold(t.bench.coeffs, *t.bench.mesh, t.bench.eigen_ball, t.u0.u);
  EXPECT_GE(rep.lambda_bar, detect_fold(t.up).lambda_bar);
  EXPECT_GT(rep.P, 0.0);
}

TEST(NonexistenceThreshold, RejectsViolatedHypotheses) {
  const auto& t = basic_1d();
  // Ball over the support of c-.
  EXPECT_THROW(nonexistence_threshold(t.bench.coeffs, *t.bench.mesh, Region::ball({0.08, 0.0}, 0.05), t.u0.u),
               HypothesisError);
  // Ball reaching the boundary.
  EXPECT_THROW(nonexistence_threshold(t.bench.coeffs, *t.bench.mesh, Region::ball({0.5, 0.0}, 0.6), t.u0.u),
               HypothesisError);
}
