// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Optional arguments select criteria by number, e.g. `acceptance 1 4`.

#include "qgrad/certify.hpp"
#include "qgrad/commands.hpp"
#include "qgrad/continuation.hpp"
#include "qgrad/harnack_suite.hpp"
#include "qgrad/solver.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace qgrad;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[violated: " << what << "] ";
    }
  }
};

SolverOptions cole_hopf() {
  SolverOptions o;
  o.variable = Variable::ColeHopf;
  return o;
}

bool is_2d(const std::string& name) { return name.rfind("2d", 0) == 0; }

struct Traced {
  Benchmark bench;
  Solution u0;
  Branch up;
  FoldReport fold;
};

/// Upper branch from the lambda = 0 solution, traced in cole-hopf variables.
const Traced& traced(const std::string& name, int n) {
  static std::map<std::pair<std::string, int>, Traced> cache;
  if (auto it = cache.find({name, n}); it != cache.end()) return it->second;
  Traced t;
  t.bench = builtin_benchmark(name, n);
  t.u0 = newton_solve(Field::Zero(t.bench.mesh->size()), 0.0, t.bench.coeffs, cole_hopf());
  ContinuationControls c;
  c.solver = cole_hopf();
  t.up = trace_branch(t.u0, +1, t.bench.coeffs, c, name);
  t.fold = detect_fold(t.up);
  return cache.emplace(std::make_pair(name, n), std::move(t)).first->second;
}

int coarse(const std::string& name) { return is_2d(name) ? 33 : 129; }

// ---------------------------------------------------------------------------

// u* = x(1-x) (1D) and x(1-x)y(1-y) (2D) with mu = 1, c+- = 0, h = -Lap u* - |grad u*|^2.
Outcome criterion1() {
  Outcome o;
  auto solve = [&](const MeshPtr& m, bool two_d, Variable v, double& secs) {
    auto ustar = [two_d](Point p) { return p.x * (1 - p.x) * (two_d ? p.y * (1 - p.y) : 1.0); };
    auto h = [two_d](Point p) {
      if (!two_d) return 2.0 - std::pow(1 - 2 * p.x, 2);
      const double X = p.x * (1 - p.x), Y = p.y * (1 - p.y);
      const double gx = (1 - 2 * p.x) * Y, gy = X * (1 - 2 * p.y);
      return 2 * Y + 2 * X - gx * gx - gy * gy;
    };
    const Field zero = Field::Zero(m->size());
    const auto c = CoefficientSet::from_fields(m, zero, zero, Field::Ones(m->size()), sample(*m, h), 1.0, 0.1);
    SolverOptions opts;
    opts.variable = v;
    const auto t0 = Clock::now();
    const Solution s = newton_solve(zero, 0.0, c, opts);
    secs = seconds_since(t0);
    return sup_norm(s.u - sample(*m, ustar));
  };
  auto study = [&](bool two_d, const std::vector<int>& ns, double limit) {
    std::vector<double> err;
    double worst_time = 0.0, direct_err = 0.0;
    for (int n : ns) {
      auto m = std::make_shared<const Mesh>(two_d ? Mesh::rectangle({0, 0}, {1, 1}, n, n) : Mesh::interval(0, 1, n));
      double t = 0.0, td = 0.0;
      err.push_back(solve(m, two_d, Variable::ColeHopf, t));
      direct_err = std::max(direct_err, solve(m, two_d, Variable::DirectU, td));
      worst_time = std::max({worst_time, t, td});
    }
    o.detail << (two_d ? "2D" : "1D") << " errors";
    for (double e : err) o.detail << ' ' << e;
    o.detail << " orders";
    for (std::size_t i = 1; i < err.size(); ++i) {
      const double p = std::log2(err[i - 1] / err[i]);
      o.detail << ' ' << p;
      o.require(std::abs(p - 2.0) <= 0.2, "order 2.0 +- 0.2");
    }
    o.detail << ", direct-u error " << direct_err << ", slowest solve " << worst_time << " s; ";
    o.require(direct_err <= 1e-11, "direct-u scheme exact on polynomial u*");
    o.require(worst_time < limit, "solve time limit");
  };
  study(false, {65, 129, 257}, 1.0);
  study(true, {33, 65}, 30.0);
  return o;
}

Outcome criterion2() {
  Outcome o;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double worst = 0.0;
  int states = 0;
  for (const auto& name : benchmark_names()) {
    const Benchmark b = builtin_benchmark(name);
    for (Variable v : {Variable::DirectU, Variable::ColeHopf}) {
      const DiscreteProblem P(b.coeffs, v);
      for (int s = 0; s < 20; ++s, ++states) {
        Field u(b.mesh->size()), dir(b.mesh->size());
        for (int k = 0; k < u.size(); ++k) {
          const bool bd = b.mesh->is_boundary(k);
          u[k] = bd ? 0.0 : -0.3 + 1.8 * U(rng);
          dir[k] = bd ? 0.0 : -1.0 + 2.0 * U(rng);
        }
        const double lambda = -2.0 + 5.0 * U(rng);
        const Field z = P.from_u(u);
        const double t = 1e-6;
        const Field fd = (P.residual(z + t * dir, lambda) - P.residual(z - t * dir, lambda)) / (2 * t);
        const Field an = P.jacobian(z, lambda) * dir;
        worst = std::max(worst, sup_norm(fd - an) / sup_norm(an));
      }
    }
  }
  o.detail << states << " states over 4 benchmarks x 2 variables, worst relative error " << worst;
  o.require(worst <= 1e-6, "relative error <= 1e-6");
  return o;
}

Outcome criterion3() {
  Outcome o;
  std::mt19937_64 rng(3);
  for (const char* name : {"1d-basic", "2d-basic"}) {
    const Benchmark b = builtin_benchmark(name);
    const Field u0 = newton_solve(Field::Zero(b.mesh->size()), 0.0, b.coeffs, cole_hopf()).u;
    const double s0 = sup_norm(u0);
    double worst_spread = 0.0, worst_sandwich = -1e300;
    int failures = 0;
    for (double lambda : {-2.0, -1.0, -0.5}) {
      const Solution ref = newton_solve(u0, lambda, b.coeffs, cole_hopf());
      for (int k : b.mesh->interior()) {
        worst_sandwich = std::max(worst_sandwich, ref.u[k] - u0[k]);
        worst_sandwich = std::max(worst_sandwich, (u0[k] - s0) - ref.u[k]);
      }
      for (int s = 0; s < 10; ++s) {
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        Field start(b.mesh->size());
        const double amp = 3.0 * s0;
        for (int k = 0; k < start.size(); ++k) start[k] = b.mesh->is_boundary(k) ? 0.0 : amp * U(rng);
        try {
          const Solution r = newton_solve(start, lambda, b.coeffs, cole_hopf());
          worst_spread = std::max(worst_spread, sup_norm(r.u - ref.u));
        } catch (const Error&) {
          ++failures;
        }
      }
    }
    o.detail << name << ": sandwich excess " << worst_sandwich << ", random-start spread " << worst_spread << ", "
             << failures << " non-converged starts; ";
    o.require(worst_sandwich <= 1e-8, std::string(name) + " sandwich");
    o.require(worst_spread <= 1e-8 && failures == 0, std::string(name) + " uniqueness");
  }
  return o;
}

Outcome criterion4() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto& a = traced("1d-basic", 129);
  const auto& b = traced("1d-basic", 257);
  o.require(a.fold.found && b.fold.found, "fold found");
  const double la = a.fold.lambda_bar, lb = b.fold.lambda_bar;
  const double rel = std::abs(la - lb) / lb;
  o.detail << "lambda_bar " << la << " (129) vs " << lb << " (257), change " << rel;
  o.require(la > 0.0 && rel <= 0.02, "fold stable within 2%");
  const auto sols = solutions_at(a.up, 0.5 * la, a.bench.coeffs);
  o.detail << "; " << sols.size() << " solutions at lambda_bar/2";
  o.require(sols.size() >= 2, "two solutions");
  if (sols.size() >= 2) {
    double gap = 0.0, below = -1e300;
    for (std::size_t i = 0; i < sols.size(); ++i) {
      for (std::size_t j = i + 1; j < sols.size(); ++j) gap = std::max(gap, sup_norm(sols[i].u - sols[j].u));
      for (int k : a.bench.mesh->interior()) below = std::max(below, a.u0.u[k] - sols[i].u[k]);
    }
    o.detail << ", sup-norm gap " << gap << ", max (u0 - u) " << below;
    o.require(gap > 1e-3, "solutions differ by > 1e-3");
    o.require(below <= 1e-8, "both >= u0 - 1e-8");
  }
  const double secs = seconds_since(t0);
  o.detail << ", " << secs << " s";
  o.require(secs < 120.0, "runtime < 2 min");
  return o;
}

Outcome criterion5() {
  Outcome o;
  for (const auto& name : benchmark_names()) {
    const auto& t = traced(name, coarse(name));
    const auto rep = nonexistence_threshold(t.bench.coeffs, *t.bench.mesh, t.bench.eigen_ball, t.u0.u);
    o.detail << name << " Lambda_bar " << rep.lambda_bar << " >= lambda_bar " << t.fold.lambda_bar << "; ";
    o.require(t.fold.found && rep.lambda_bar >= t.fold.lambda_bar, name + " threshold bounds the fold");
  }
  // c+ = 2 around the ball, so cbar = min(c+, 1) = 1 there.
  auto m = std::make_shared<const Mesh>(Mesh::interval(0, 1, 129));
  const Field cp = sample(*m, [](Point p) { return std::abs(p.x - 0.5) < 0.3 ? 2.0 : 0.0; });
  const Field zero = Field::Zero(m->size());
  const auto c = CoefficientSet::from_fields(m, cp, zero, Field::Ones(m->size()), zero, 1.0, 0.1);
  const double R = 0.125;
  const auto rep = nonexistence_threshold(c, *m, Region::ball({0.5, 0.0}, R), Field::Ones(m->size()));
  const double exact = std::pow(std::numbers::pi / (2 * R), 2);
  const double rel = std::abs(rep.gamma1 - exact) / exact;
  o.detail << "gamma1 " << rep.gamma1 << " vs (pi/2R)^2 " << exact << " (rel " << rel << ")";
  o.require(rel <= 0.01, "eigenvalue within 1%");
  return o;
}

Outcome criterion6() {
  Outcome o;
  for (const auto& name : benchmark_names()) {
    // With variable mu the upper branch hits the cell-Peclet resolution limit
    // before 0.1 lambda_bar unless n >= 513.
    const int n = name == "1d-mu-variable" ? 513 : coarse(name);
    const auto& a = traced(name, n);
    const auto& b = traced(name, 2 * n - 1);
    const auto ca = check_global_bound(a.up, 0.1 * a.fold.lambda_bar, a.fold.lambda_bar, a.bench.coeffs);
    const auto cb = check_global_bound(b.up, 0.1 * b.fold.lambda_bar, b.fold.lambda_bar, b.bench.coeffs);
    const double rel = std::abs(ca.M - cb.M) / cb.M;
    std::size_t checks = 0, failed = 0;
    for (const auto* t : {&a, &b})
      for (const auto& p : t->up.points) {
        if (p.lambda < 0.1 * t->fold.lambda_bar || p.lambda > t->fold.lambda_bar) continue;
        ++checks;
        failed += check_omega_plus_reduction(p.u, t->u0.u, t->bench.coeffs).passed ? 0 : 1;
      }
    o.detail << name << " M " << ca.M << " (n=" << n << ") vs " << cb.M << " (n=" << 2 * n - 1 << "), change " << rel
             << ", reductions " << checks - failed << "/" << checks << "; ";
    o.require(ca.verdict && cb.verdict, name + " bound verdict");
    o.require(rel <= 0.05, name + " M within 5%");
    o.require(failed == 0 && checks > 0, name + " reduction checks");
  }
  return o;
}

Outcome criterion7() {
  Outcome o;
  const auto t0 = Clock::now();
  BoundarySuiteOptions bo;
  bo.samples = 200;
  const auto a = boundary_harnack_suite(65, bo);
  const auto b = boundary_harnack_suite(129, bo);
  const double ratio = std::max(a.min_constant, b.min_constant) / std::min(a.min_constant, b.min_constant);
  const double secs = seconds_since(t0);
  o.detail << "200 samples, eps 0.5, R 0.2: min constant " << a.min_constant << " (65^2), " << b.min_constant
           << " (129^2), ratio " << ratio << ", failures " << a.failures + b.failures << ", " << secs << " s";
  o.require(a.min_constant > 0.0 && b.min_constant > 0.0, "positive constants");
  o.require(ratio < 2.0, "factor-2 stability");
  o.require(a.failures + b.failures == 0, "no failing sample");
  o.require(secs < 600.0, "runtime < 10 min");
  return o;
}

Outcome criterion8() {
  Outcome o;
  SuiteOptions so;
  so.instances = 1000;
  const std::vector<std::pair<const char*, std::function<SuiteSummary(const SuiteOptions&)>>> suites{
      {"interior-weak-harnack", interior_harnack_suite}, {"local-max-principle", local_max_principle_suite},
      {"brezis-cabre", brezis_cabre_suite},             {"comparison", comparison_suite},
      {"growth-lemma", growth_lemma_suite},             {"distribution-decay", distribution_decay_suite},
      {"gisl", gisl_suite}};
  for (const auto& [name, run] : suites) {
    const auto t0 = Clock::now();
    const auto s = run(so);
    o.detail << name << " " << s.failures << "/" << s.instances << " failures (" << seconds_since(t0) << " s); ";
    o.require(s.failures == 0 && s.instances >= 1000, std::string(name) + " suite");
  }
  // Oracle agreement on the suite's own instances and on unstructured sets.
  std::size_t disagreements = 0, compared = 0;
  auto compare = [&](const DyadicSet& E, const DyadicSet& F, double alpha) {
    const auto r = gisl_check(E, F, alpha);
    const auto b = oracle::gisl(E, F, alpha);
    ++compared;
    if (r.mass_hypothesis != b.mass || r.cube_hypothesis != b.cube || r.predecessor_hypothesis != b.predecessor ||
        r.c != b.c)
      ++disagreements;
  };
  for (std::size_t i = 0; i < so.instances; ++i) {
    auto rng = detail::instance_rng(so.seed, detail::SuiteTag::Gisl, i);
    const auto [E, F] = gisl_instance(rng, 2, so.gisl_depth, so.alpha);
    compare(E, F, so.alpha);
  }
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int it = 0; it < 1000; ++it) {
    const int dim = 1 + it % 2, depth = 1 + it % 5;
    const double alpha = 0.1 + 0.8 * U(rng);
    DyadicSet E(dim, depth), F(dim, depth);
    for (std::size_t c = 0; c < E.size(); ++c) {
      E.cells[c] = U(rng) < 0.3;
      F.cells[c] = E.cells[c] || U(rng) < 0.5;
    }
    compare(E, F, alpha);
  }
  o.detail << "GISL oracle: " << disagreements << " disagreements in " << compared;
  o.require(disagreements == 0, "GISL oracle agreement");
  return o;
}

// Every solution here was converged in cole-hopf variables. Its transformed
// residual, re-evaluated from u, is compared with the residual the direct-u
// iteration can resolve at the same state: max(newton_tol, 64 eps * largest
// stencil term).
Outcome criterion9() {
  Outcome o;
  double worst_ratio = 0.0, worst_trip = 0.0;
  std::size_t solutions = 0;
  auto check = [&](const Field& u, double lambda, const CoefficientSet& c) {
    const DiscreteProblem Pw(c, Variable::ColeHopf), Pu(c, Variable::DirectU);
    const Field w = Pw.from_u(u);
    const double rw = sup_norm(Pw.residual(w, lambda).cwiseProduct(Pw.row_scale(w)));
    const double scale = std::max(SolverOptions{}.newton_tol, Pu.residual_floor(u, lambda));
    worst_ratio = std::max(worst_ratio, rw / scale);
    worst_trip = std::max(worst_trip, sup_norm(cole_hopf_inverse(w, Pw.transform_mu()) - u));
    ++solutions;
  };
  for (const auto& name : benchmark_names()) {
    const auto& t = traced(name, coarse(name));
    for (const auto& p : t.up.points) check(p.u, p.lambda, t.bench.coeffs);
    for (double lambda : {-2.0, -1.0, 1.0}) {
      const Solution s = newton_solve(t.u0.u, lambda, t.bench.coeffs, cole_hopf());
      check(s.u, lambda, t.bench.coeffs);
    }
  }
  o.detail << solutions << " converged solutions: max transformed residual / untransformed scale " << worst_ratio
           << ", max round-trip error " << worst_trip;
  o.require(worst_ratio <= 10.0, "transformed residual <= 10x scale");
  o.require(worst_trip <= 1e-12, "round trip <= 1e-12");
  return o;
}

std::map<std::string, std::string> csv_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
    std::ifstream f(e.path(), std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    out[fs::relative(e.path(), dir).string()] = s.str();
  }
  return out;
}

Outcome criterion10() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "qgrad_acceptance_determinism";
  fs::remove_all(root);
  const auto cfg = parse_config(R"J({"seed": 11, "solver": {"lambda": 2},
      "harnack": {"suites": ["boundary", "gisl", "interior"], "samples": 50, "instances": 100, "resolutions": [33, 65]}})J");
  std::size_t files = 0, differing = 0;
  for (const char* command : {"solve", "continue", "harnack", "certify"}) {
    std::map<std::string, std::string> runs[2];
    for (int r = 0; r < 2; ++r) {
      cli::Context ctx;
      ctx.cfg = cfg;
      ctx.cfg.out = (root / (std::string(command) + std::to_string(r))).string();
      ctx.cfg.threads = r + 1;
      std::ostringstream err;
      ctx.err = &err;
      const int code = cli::run(command, ctx);
      o.require(code == 0, std::string(command) + " exit code " + std::to_string(code));
      runs[r] = csv_files(ctx.cfg.out);
    }
    o.require(!runs[0].empty() && runs[0].size() == runs[1].size(), std::string(command) + " produced CSVs");
    for (const auto& [name, content] : runs[0]) {
      ++files;
      auto it = runs[1].find(name);
      if (it == runs[1].end() || it->second != content) ++differing;
    }
  }
  fs::remove_all(root);
  o.detail << files << " CSV files compared across two runs (1 and 2 threads), " << differing << " differ";
  o.require(differing == 0 && files > 0, "byte-identical");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                       criterion6, criterion7, criterion8, criterion9, criterion10};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    failed += o.pass ? 0 : 1;
    std::printf("criterion %d: %s (%.1f s) %s\n", id, o.pass ? "PASS" : "FAIL", seconds_since(t0), o.detail.str().c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
