#pragma once

// Batch commands behind the command-line tool. Each returns a process exit
// code: 0 success, 1 configuration error, 2 solver divergence, 3 coefficient
// validation failure. Outputs go to cfg.out; diagnostics to `err`.

#include "qgrad/certify.hpp"
#include "qgrad/coefficients.hpp"
#include "qgrad/config.hpp"
#include "qgrad/continuation.hpp"
#include "qgrad/harnack_suite.hpp"
#include "qgrad/io.hpp"
#include "qgrad/solver.hpp"

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace qgrad::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kDivergence = 2, kValidationFailure = 3 };

struct Context {
  RunConfig cfg;
  std::ostream* err = &std::cerr;
  bool verbose = false;

  std::uint64_t hash() const { return config_hash(cfg); }
  std::filesystem::path out(const std::string& file) const { return std::filesystem::path(cfg.out) / file; }
  void log(const std::string& line) const {
    if (verbose) *err << line << '\n';
  }
};

namespace detail {

inline SolverOptions solver_options(const RunConfig& c) {
  SolverOptions o;
  o.variable = c.solver.variable;
  o.newton_tol = c.solver.newton_tol;
  o.max_iter = c.solver.max_iter;
  return o;
}

inline ContinuationControls controls(const RunConfig& c) {
  ContinuationControls k;
  k.solver = solver_options(c);
  k.ds0 = c.continuation.ds0;
  k.ds_min = c.continuation.ds_min;
  k.ds_max = c.continuation.ds_max;
  k.lambda_min = c.continuation.lambda_min;
  k.lambda_max = c.continuation.lambda_max;
  k.sup_norm_cap = c.continuation.sup_norm_cap;
  k.max_points = c.continuation.max_points;
  return k;
}

/// Returns true when (A1) holds; otherwise reports the failing conditions.
inline bool check_A1(const Context& ctx, const Benchmark& b) {
  const auto rep = validate_A1(b.coeffs, *b.mesh);
  if (rep.all_passed()) return true;
  for (const auto& c : rep.conditions)
    if (!c.passed)
      *ctx.err << "(A1) violated: " << c.name << " (" << c.offending_nodes.size() << " offending nodes)\n";
  return false;
}

/// Smooth field vanishing on the boundary of the bounding box: a few random
/// sine modes.
inline Field random_modes(const Mesh& m, std::mt19937_64& rng, double amplitude) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const Point lo = m.lower(), hi = m.upper();
  std::vector<std::pair<int, double>> modes;
  for (int j = 1; j <= 4; ++j) modes.emplace_back(j, amplitude * U(rng) / j);
  std::vector<double> ymodes;
  for (int j = 1; j <= 4; ++j) ymodes.push_back(U(rng) / j);
  Field f(m.size());
  for (int k = 0; k < m.size(); ++k) {
    const Point p = m.node(k);
    const double sx = (p.x - lo.x) / (hi.x - lo.x);
    double v = 0.0;
    for (auto [j, a] : modes) v += a * std::sin(j * std::numbers::pi * sx);
    if (m.dimension() == 2) {
      const double sy = (p.y - lo.y) / (hi.y - lo.y);
      double w = 0.0;
      for (std::size_t j = 0; j < ymodes.size(); ++j) w += ymodes[j] * std::sin((j + 1.0) * std::numbers::pi * sy);
      v *= w;
    }
    f[k] = m.is_boundary(k) ? 0.0 : v;
  }
  return f;
}

inline std::string params_text(const InequalityReport& r) {
  std::string s;
  for (const auto& [k, v] : r.parameters) s += (s.empty() ? "" : ";") + k + "=" + io::number(v);
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// solve

struct SolveOutcome {
  bool converged = false;
  Solution solution;
  std::vector<std::string> log;
};

/// Deterministic multistart: the lambda = 0 solution u0 (or zero), a
/// natural-parameter homotopy from lambda = 0, then seeded random starts
/// around u0. With solver.above_u0 and lambda > 0 every attempt solves the
/// problem modified around u0.
inline SolveOutcome multistart_solve(const Benchmark& b, const RunConfig& c) {
  SolveOutcome out;
  const double lambda = c.solver.lambda;
  const SolverOptions opts = detail::solver_options(c);
  const Field zero = Field::Zero(b.mesh->size());
  std::optional<Field> modified;
  auto attempt = [&](const std::string& label, const Field& start, double lam) -> std::optional<Solution> {
    try {
      auto s = newton_solve(start, lam, b.coeffs, opts, lam > 0.0 ? modified : std::nullopt);
      out.log.push_back(label + ": converged, residual " + io::number(s.residual_norm) + ", " +
                        std::to_string(s.newton_iterations) + " iterations");
      return s;
    } catch (const Error& e) {
      out.log.push_back(label + ": " + e.what());
      return std::nullopt;
    }
  };
  auto done = [&](Solution s) {
    out.converged = true;
    out.solution = std::move(s);
    return out;
  };

  if (lambda == 0.0) {
    if (auto s = attempt("start zero", zero, 0.0)) return done(*s);
  }
  std::optional<Solution> u0;
  if (lambda != 0.0) u0 = attempt("reference solve at lambda = 0", zero, 0.0);
  if (u0 && c.solver.above_u0) {
    modified = u0->u;
    out.log.push_back("lambda > 0: solving for u >= u0 (modified problem)");
  }
  const Field base = u0 ? u0->u : zero;
  if (lambda != 0.0) {
    if (auto s = attempt("start u0", base, lambda)) return done(*s);
  }
  if (u0) {
    const int steps = 16;
    Field guess = u0->u;
    for (int i = 1; i <= steps; ++i) {
      const double lam = lambda * i / steps;
      auto s = attempt("homotopy step " + std::to_string(i) + "/" + std::to_string(steps) + " at lambda " +
                           io::number(lam),
                       guess, lam);
      if (!s) break;
      if (i == steps) return done(*s);
      guess = s->u;
    }
  }
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> scale(0.0, 4.0);
  const double amp = std::max(1.0, sup_norm(base));
  for (int i = 0; i < c.solver.multistart; ++i) {
    const Field start = scale(rng) * base + detail::random_modes(*b.mesh, rng, amp);
    if (auto s = attempt("random start " + std::to_string(i + 1), start, lambda)) return done(*s);
  }
  return out;
}

inline int cmd_solve(const Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const Benchmark b = make_benchmark(c);
  if (!detail::check_A1(ctx, b)) return kValidationFailure;
  ctx.log("solve: lambda " + io::number(c.solver.lambda) + " on " + b.name + " with " +
          std::to_string(b.mesh->size()) + " nodes");
  const auto res = multistart_solve(b, c);
  const auto h = ctx.hash();

  std::ostringstream log;
  log << "# " << io::header_line(h) << '\n';
  log << "problem " << b.name << ", nodes " << b.mesh->size() << ", lambda " << io::number(c.solver.lambda)
      << ", variable " << to_string(c.solver.variable) << '\n';
  for (const auto& l : res.log) {
    log << l << '\n';
    ctx.log(l);
  }
  if (!res.converged) {
    log << "no convergence after multistart\n";
    io::write_file(ctx.out("solver.log"), log.str());
    *ctx.err << "solve: no convergence after multistart (" << res.log.size() << " attempts)\n";
    return kDivergence;
  }
  const Solution& s = res.solution;
  log << "solution: sup |u| " << io::number(sup_norm(s.u)) << ", jacobian signature " << s.jacobian_signature << '\n';
  io::write_file(ctx.out("solver.log"), log.str());
  io::write_file(ctx.out("solution.csv"), io::field_csv(*b.mesh, s.u, h));

  const double tol = 10.0 * c.solver.newton_tol;
  // Verdicts refer to the unmodified equation.
  const auto lower = check_lower_solution(s.u, s.lambda, b.coeffs, tol, c.solver.variable);
  const auto upper = check_upper_solution(s.u, s.lambda, b.coeffs, tol, c.solver.variable);
  std::ostringstream v;
  v << "# " << io::header_line(h) << '\n';
  v << "lambda " << io::number(s.lambda) << '\n';
  v << "tolerance " << io::number(tol) << '\n';
  v << "lower_solution " << (lower.passed ? "pass" : "fail") << " worst " << io::number(lower.worst) << " violations "
    << lower.violations.size() << '\n';
  v << "upper_solution " << (upper.passed ? "pass" : "fail") << " worst " << io::number(upper.worst) << " violations "
    << upper.violations.size() << '\n';
  io::write_file(ctx.out("verdicts.txt"), v.str());
  return kOk;
}

// ---------------------------------------------------------------------------
// continue

struct ContinueOutcome {
  Solution u0;
  Branch up;
  Branch down;
  Branch joined;
  FoldReport fold;
};

inline ContinueOutcome trace_full_branch(const Benchmark& b, const RunConfig& c, bool both_directions) {
  ContinueOutcome o;
  o.u0 = newton_solve(Field::Zero(b.mesh->size()), 0.0, b.coeffs, detail::solver_options(c));
  const auto k = detail::controls(c);
  o.up = trace_branch(o.u0, +1, b.coeffs, k, b.name);
  if (o.up.size() >= 3) o.fold = detect_fold(o.up);
  if (both_directions) {
    o.down = trace_branch(o.u0, -1, b.coeffs, k, b.name);
    o.joined = join_branches(o.down, o.up);
  } else {
    o.joined = o.up;
  }
  return o;
}

inline int cmd_continue(const Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const Benchmark b = make_benchmark(c);
  if (!detail::check_A1(ctx, b)) return kValidationFailure;
  const auto r = trace_full_branch(b, c, true);
  const auto h = ctx.hash();
  const Branch& br = r.joined;
  ctx.log("continue: " + std::to_string(br.size()) + " points; up stop " + to_string(r.up.stop) + ", down stop " +
          to_string(r.down.stop));

  std::vector<std::string> notes{
      "problem " + b.name + ", nodes " + std::to_string(b.mesh->size()),
      "stop lambda<0 end: " + std::string(to_string(r.down.stop)) + ", lambda>0 end: " + to_string(r.up.stop),
      "terminal point: row " + std::to_string(br.size() - 1) + " (" + to_string(r.up.stop) + ")",
      r.fold.found ? "fold lambda_bar " + io::number(r.fold.lambda_bar) : std::string("no fold detected"),
      "field files: fields/point_NNNNN.csv, NNNNN = row index"};
  io::CsvWriter w(h, {"arclength", "lambda", "sup_norm", "signature", "fold_flag"}, notes);
  for (const auto& p : br.points) w.row() << p.arclength << p.lambda << p.sup_norm << p.jacobian_signature << (p.fold ? 1 : 0);
  io::write_file(ctx.out("branch.csv"), w.str());

  if (c.continuation.write_fields) {
    char name[32];
    for (std::size_t i = 0; i < br.size(); ++i) {
      std::snprintf(name, sizeof name, "point_%05zu.csv", i);
      io::write_file(ctx.out("fields") / name, io::field_csv(*b.mesh, br.points[i].u, h));
    }
  }

  io::PlotSpec plot;
  plot.title = "Bifurcation diagram: " + b.name;
  plot.x_label = "lambda";
  plot.y_label = "sup |u| (log scale)";
  plot.log_y = true;
  io::Series s;
  for (const auto& p : br.points) {
    s.x.push_back(p.lambda);
    s.y.push_back(p.sup_norm);
  }
  plot.series.push_back(std::move(s));
  for (std::size_t i : br.fold_indices)
    plot.markers.push_back({br.points[i].lambda, br.points[i].sup_norm, "fold"});
  if (r.fold.found) plot.markers.back().label = "fold, lambda_bar = " + io::detail::px(r.fold.lambda_bar);
  io::write_file(ctx.out("bifurcation.svg"), io::svg_plot(plot, h));
  return kOk;
}

// ---------------------------------------------------------------------------
// harnack

struct HarnackRun {
  std::vector<SuiteSummary> suites;
};

inline HarnackRun run_harnack(const RunConfig& c) {
  HarnackRun run;
  const auto& hb = c.harnack;
  SuiteOptions so;
  so.instances = hb.instances;
  so.seed = c.seed;
  so.threads = c.threads;
  const std::map<std::string, std::function<SuiteSummary(const SuiteOptions&)>> property{
      {"interior", interior_harnack_suite},     {"local-max", local_max_principle_suite},
      {"brezis-cabre", brezis_cabre_suite},     {"comparison", comparison_suite},
      {"growth-lemma", growth_lemma_suite},     {"distribution-decay", distribution_decay_suite},
      {"gisl", gisl_suite}};
  for (const auto& name : hb.suites) {
    if (name == "boundary") {
      BoundarySuiteOptions bo;
      bo.samples = hb.samples;
      bo.seed = c.seed;
      bo.threads = c.threads;
      bo.x0 = hb.x0;
      bo.R = hb.R;
      bo.epsilon = hb.epsilon;
      bo.r_bar = hb.r_bar;
      const std::vector<int> ns = hb.resolutions.empty() ? std::vector<int>{c.resolution > 0 ? c.resolution : 65}
                                                         : hb.resolutions;
      for (int n : ns) {
        auto s = boundary_harnack_suite(n, bo);
        s.name += "@" + std::to_string(n);
        run.suites.push_back(std::move(s));
      }
    } else {
      run.suites.push_back(property.at(name)(so));
    }
  }
  return run;
}

inline int cmd_harnack(const Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const auto run = run_harnack(c);
  const auto h = ctx.hash();

  io::CsvWriter w(h, {"sample_id", "inequality", "lhs", "rhs", "constant", "params", "verdict"});
  for (const auto& s : run.suites)
    for (const auto& r : s.reports)
      w.row() << static_cast<unsigned long long>(r.sample_id) << r.inequality << r.lhs << r.rhs << r.empirical_constant
              << detail::params_text(r) << to_string(r.verdict);
  io::write_file(ctx.out("harnack.csv"), w.str());

  std::ostringstream sum;
  sum << "# " << io::header_line(h) << '\n';
  std::size_t failures = 0;
  for (const auto& s : run.suites) {
    sum << s.name << ": instances " << s.instances << ", pass " << s.passes << ", fail " << s.failures
        << ", hypothesis-not-met " << s.hypothesis_not_met << ", min constant " << io::number(s.min_constant)
        << ", max constant " << io::number(s.max_constant) << '\n';
    failures += s.failures;
    ctx.log(s.name + ": " + std::to_string(s.failures) + " failures, min constant " + io::number(s.min_constant));
  }
  io::write_file(ctx.out("harnack_summary.txt"), sum.str());

  io::PlotSpec plot;
  plot.title = "Empirical constants vs mesh resolution";
  plot.x_label = "nodes per axis";
  plot.y_label = "empirical constant (log scale)";
  plot.log_y = true;
  const char* colors[] = {"#1f4e99", "#c0392b", "#27ae60", "#8e44ad", "#d35400", "#16a085", "#2c3e50", "#7f8c8d"};
  std::map<std::string, io::Series> by_inequality;
  for (const auto& s : run.suites)
    for (const auto& r : s.reports) {
      double n = 0.0;
      try {
        n = r.parameter("n");
      } catch (const std::out_of_range&) {
        continue;
      }
      auto& series = by_inequality[r.inequality];
      series.x.push_back(n);
      series.y.push_back(r.empirical_constant);
    }
  int ci = 0;
  for (auto& [name, series] : by_inequality) {
    series.line = false;
    series.label = name;
    series.color = colors[ci++ % 8];
    plot.series.push_back(series);
  }
  io::write_file(ctx.out("harnack.svg"), io::svg_plot(plot, h));
  if (failures) *ctx.err << "harnack: " << failures << " failing instances (see harnack_summary.txt)\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// certify

struct CertifyRun {
  double lambda_lo = 0.0;
  double lambda_hi = 0.0;
  double lambda_bar = 0.0;
  BoundCertificate bound;
  std::size_t reductions_checked = 0;
  std::size_t reductions_failed = 0;
  std::size_t local_checked = 0;
  std::size_t local_failed = 0;
  std::string local_note;
};

inline int cmd_certify(const Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const Benchmark b = make_benchmark(c);
  if (!detail::check_A1(ctx, b)) return kValidationFailure;
  const auto tr = trace_full_branch(b, c, false);
  CertifyRun run;
  run.lambda_bar = tr.fold.found ? tr.fold.lambda_bar : 0.0;
  if (!tr.fold.found && !c.certify.lambda_hi) {
    *ctx.err << "certify: no fold on the branch; set certify.lambda_hi\n";
    return kDivergence;
  }
  run.lambda_hi = c.certify.lambda_hi.value_or(run.lambda_bar);
  run.lambda_lo = c.certify.lambda_lo.value_or(c.certify.lo_fraction * run.lambda_hi);
  if (!(run.lambda_lo > 0.0 && run.lambda_hi > run.lambda_lo)) {
    *ctx.err << "certify: invalid interval [" << io::number(run.lambda_lo) << ", " << io::number(run.lambda_hi)
             << "]\n";
    return kConfigError;
  }
  try {
    run.bound = check_global_bound(tr.up, run.lambda_lo, run.lambda_hi, b.coeffs, c.certify.inflation, c.threads);
  } catch (const DomainError& e) {
    *ctx.err << "certify: interval [" << io::number(run.lambda_lo) << ", " << io::number(run.lambda_hi)
             << "] not covered by the branch: " << e.what() << '\n';
    return kConfigError;
  }
  for (const auto& p : tr.up.points) {
    if (p.lambda < run.lambda_lo || p.lambda > run.lambda_hi) continue;
    ++run.reductions_checked;
    if (!check_omega_plus_reduction(p.u, tr.u0.u, b.coeffs).passed) ++run.reductions_failed;
    if (!c.certify.local_bounds || !run.local_note.empty()) continue;
    try {
      LocalBoundsOptions lo;
      lo.threads = c.threads;
      const auto rep = check_local_bounds(p.u, p.lambda, b.coeffs, run.lambda_lo, run.lambda_hi, run.bound.M, lo);
      ++run.local_checked;
      if (!rep.passed) ++run.local_failed;
    } catch (const HypothesisError& e) {
      run.local_note = e.what();
    }
  }
  const auto h = ctx.hash();
  const bool ok = run.bound.verdict && run.reductions_failed == 0 && run.local_failed == 0;
  std::ostringstream t;
  t << "# " << io::header_line(h) << '\n';
  t << "A priori bound certificate\n";
  t << "problem: " << b.name << ", nodes " << b.mesh->size() << '\n';
  t << "fold lambda_bar: " << (tr.fold.found ? io::number(run.lambda_bar) : std::string("none")) << '\n';
  t << "interval: [" << io::number(run.lambda_lo) << ", " << io::number(run.lambda_hi) << "]\n";
  t << "M: " << io::number(run.bound.M) << " (inflation " << io::number(run.bound.inflation) << ")\n";
  t << "witnesses: " << run.bound.witnesses.size() << " (witnesses.csv)\n";
  t << "global bound: " << (run.bound.verdict ? "pass" : "fail") << '\n';
  t << "Omega_+ reduction: " << run.reductions_checked - run.reductions_failed << "/" << run.reductions_checked
    << " pass\n";
  if (!c.certify.local_bounds) t << "local bounds: skipped\n";
  else if (!run.local_note.empty()) t << "local bounds: unavailable (" << run.local_note << ")\n";
  else t << "local bounds: " << run.local_checked - run.local_failed << "/" << run.local_checked << " pass\n";
  t << "verdict: " << (ok ? "CERTIFIED" : "NOT CERTIFIED") << '\n';
  io::write_file(ctx.out("certificate.txt"), t.str());

  io::CsvWriter w(h, {"lambda", "sup_u", "residual_norm", "source"});
  for (const auto& wi : run.bound.witnesses)
    w.row() << wi.lambda << wi.sup_u << wi.residual_norm << (wi.from_branch_point ? "branch" : "endpoint");
  io::write_file(ctx.out("witnesses.csv"), w.str());
  ctx.log("certify: M = " + io::number(run.bound.M) + ", " + (ok ? "certified" : "not certified"));
  if (!ok) *ctx.err << "certify: bound not certified (see certificate.txt)\n";
  return kOk;
}

// ---------------------------------------------------------------------------

/// Runs one command with error-to-exit-code mapping.
inline int run(const std::string& command, const Context& ctx) {
  try {
    if (command == "solve") return cmd_solve(ctx);
    if (command == "continue") return cmd_continue(ctx);
    if (command == "harnack") return cmd_harnack(ctx);
    if (command == "certify") return cmd_certify(ctx);
    *ctx.err << "unknown command '" << command << "'\n";
    return kConfigError;
  } catch (const ConfigError& e) {
    *ctx.err << e.what() << '\n';
    return kConfigError;
  } catch (const DivergenceError& e) {
    *ctx.err << command << ": no convergence: " << e.what() << '\n';
    return kDivergence;
  } catch (const DomainError& e) {
    *ctx.err << command << ": " << e.what() << '\n';
    return kDivergence;
  } catch (const std::invalid_argument& e) {
    *ctx.err << command << ": invalid setting: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace qgrad::cli
