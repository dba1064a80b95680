#pragma once

// Empirical versions of the weak Harnack chain for Laplacian and p-Laplacian
// supersolutions: interior and boundary weak Harnack, local maximum principles,
// the Brezis-Cabre lower bound, comparison, the growth lemma and its barrier,
// the distribution decay iteration, and the dyadic covering lemma.
//
// Every check returns an InequalityReport. "Constants" are empirical: the best
// C that makes the inequality tight on the given discrete data.

#include "qgrad/common.hpp"
#include "qgrad/mesh.hpp"
#include "qgrad/plaplacian.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qgrad {

enum class Verdict { Pass, Fail, HypothesisNotMet };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass:
      return "pass";
    case Verdict::Fail:
      return "fail";
    case Verdict::HypothesisNotMet:
      return "hypothesis-not-met";
  }
  return "?";
}

struct InequalityReport {
  std::string inequality;
  double lhs = 0.0;
  double rhs = 0.0;
  double empirical_constant = 0.0;
  std::vector<std::pair<std::string, double>> parameters;
  Verdict verdict = Verdict::Fail;
  std::string note;
  std::uint64_t sample_id = 0;

  bool passed() const { return verdict == Verdict::Pass; }
  double parameter(const std::string& name) const {
    for (const auto& [k, v] : parameters)
      if (k == name) return v;
    throw std::out_of_range("InequalityReport: no parameter '" + name + "'");
  }
};

// ---------------------------------------------------------------------------
// Norms over node sets

namespace detail {

inline double power_integral(const Mesh& m, const Field& g, const std::vector<int>& nodes, double s) {
  double acc = 0.0;
  for (int k : nodes) acc += std::pow(std::max(g[k], 0.0), s) * m.cell_volume()[k];
  return std::pow(acc, 1.0 / s);
}

/// L^r norm over nodes; r = inf gives the max.
inline double lr_norm(const Mesh& m, const Field& f, const std::vector<int>& nodes, double r) {
  if (std::isinf(r)) {
    double v = 0.0;
    for (int k : nodes) v = std::max(v, std::abs(f[k]));
    return v;
  }
  double acc = 0.0;
  for (int k : nodes) acc += std::pow(std::abs(f[k]), r) * m.cell_volume()[k];
  return std::pow(acc, 1.0 / r);
}

inline Field negative_field(const Field& f) { return (-f).cwiseMax(0.0); }
inline Field positive_field(const Field& f) { return f.cwiseMax(0.0); }

inline std::vector<int> interior_only(const Mesh& m, const std::vector<int>& nodes) {
  std::vector<int> out;
  for (int k : nodes)
    if (!m.is_boundary(k)) out.push_back(k);
  return out;
}

inline bool on_boundary(const Mesh& m, const Point& x) {
  const Point lo = m.lower(), hi = m.upper();
  const double tol = 1e-12 * std::max(1.0, hi.x - lo.x);
  if (x.x < lo.x - tol || x.x > hi.x + tol) return false;
  if (m.dimension() == 1) return std::abs(x.x - lo.x) <= tol || std::abs(x.x - hi.x) <= tol;
  if (x.y < lo.y - tol || x.y > hi.y + tol) return false;
  return std::abs(x.x - lo.x) <= tol || std::abs(x.x - hi.x) <= tol || std::abs(x.y - lo.y) <= tol ||
         std::abs(x.y - hi.y) <= tol;
}

inline void require_ball_inside(const Mesh& m, const Point& y, double radius, const char* what) {
  const Point lo = m.lower(), hi = m.upper();
  bool inside = y.x >= lo.x && y.x <= hi.x;
  if (m.dimension() == 2) inside = inside && y.y >= lo.y && y.y <= hi.y;
  if (!inside || m.distance_to_boundary(y) < radius * (1.0 - 1e-12))
    throw HypothesisError(std::string(what) + ": ball of radius " + std::to_string(radius) +
                          " does not fit in the domain");
}

/// Empirical constant lhs / rhs for a lower bound lhs >= C rhs.
inline void lower_bound_verdict(InequalityReport& r) {
  if (r.rhs > 0.0) {
    r.empirical_constant = r.lhs / r.rhs;
    r.verdict = r.empirical_constant > 0.0 && std::isfinite(r.empirical_constant) ? Verdict::Pass : Verdict::Fail;
  } else {
    // Nonpositive right side: any C > 0 works as long as lhs >= 0.
    r.empirical_constant = std::numeric_limits<double>::infinity();
    r.verdict = r.lhs >= 0.0 ? Verdict::Pass : Verdict::Fail;
    r.note = "right-hand side nonpositive";
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Supersolution samples

enum class Generator { SolveWithSource, Barrier, Radial };

inline const char* to_string(Generator g) {
  switch (g) {
    case Generator::SolveWithSource:
      return "solve-with-source";
    case Generator::Barrier:
      return "barrier";
    case Generator::Radial:
      return "radial";
  }
  return "?";
}

/// Random smooth source: a sum of Gaussian bumps. Defined on the continuum so
/// the same seed gives the same function at every resolution.
struct RandomSource {
  struct Bump {
    Point center;
    double sigma = 0.1;
    double amplitude = 1.0;
  };
  std::vector<Bump> bumps;

  double operator()(const Point& p) const {
    double v = 0.0;
    for (const auto& b : bumps) {
      const double r2 = (p.x - b.center.x) * (p.x - b.center.x) + (p.y - b.center.y) * (p.y - b.center.y);
      v += b.amplitude * std::exp(-0.5 * r2 / (b.sigma * b.sigma));
    }
    return v;
  }
};

struct GeneratorOptions {
  int max_bumps = 4;
  double min_amplitude = 0.5;
  double max_amplitude = 5.0;
  double min_sigma = 0.03;
  double max_sigma = 0.2;  // relative to the domain diameter
  /// Amplitude of one negative bump relative to the positive mass (0 = f >= 0).
  double negative_fraction = 0.0;
  double tol = 1e-8;
  int max_attempts = 16;
};

inline RandomSource random_source(std::mt19937_64& rng, const Mesh& m, const GeneratorOptions& o) {
  const Point lo = m.lower(), hi = m.upper();
  const double diam = std::hypot(hi.x - lo.x, m.dimension() == 2 ? hi.y - lo.y : 0.0);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::uniform_int_distribution<int> count(1, std::max(1, o.max_bumps));
  auto pick = [&]() {
    RandomSource::Bump b;
    b.center = {lo.x + U(rng) * (hi.x - lo.x), m.dimension() == 2 ? lo.y + U(rng) * (hi.y - lo.y) : 0.0};
    b.sigma = diam * (o.min_sigma + U(rng) * (o.max_sigma - o.min_sigma));
    b.amplitude = o.min_amplitude + U(rng) * (o.max_amplitude - o.min_amplitude);
    return b;
  };
  RandomSource src;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) src.bumps.push_back(pick());
  if (o.negative_fraction > 0.0) {
    auto b = pick();
    b.amplitude = -o.negative_fraction * b.amplitude;
    src.bumps.push_back(b);
  }
  return src;
}

/// A nonnegative discrete supersolution of -Lap_p u + a |u|^{p-2} u = source.
/// For the default generators source >= 0, so u is also a supersolution of
/// the homogeneous equation.
struct SupersolutionSample {
  MeshPtr mesh;
  Field u;
  Field a;
  Field source;
  double p = 2.0;
  std::uint64_t seed = 0;
  int attempt = 0;  // reseeds needed before the sample verified
  Generator generator = Generator::SolveWithSource;
};

/// Draws samples on a fixed mesh, reusing the p = 2 factorization.
class SupersolutionGenerator {
 public:
  SupersolutionGenerator(MeshPtr mesh, double p, Field a, GeneratorOptions opts = {})
      : mesh_(std::move(mesh)), p_(p), a_(std::move(a)), opts_(opts) {
    detail::check_p(p_);
    if (a_.size() != mesh_->size()) throw std::invalid_argument("generate_supersolution: a has wrong size");
    if (a_.minCoeff() < 0.0) throw std::invalid_argument("generate_supersolution: a must be nonnegative");
    if (p_ == 2.0) linear_ = std::make_shared<LinearDirichletSolver>(*mesh_, a_);
  }

  const Mesh& mesh() const { return *mesh_; }

  SupersolutionSample generate(std::uint64_t seed, Generator g) const {
    for (int attempt = 0; attempt < opts_.max_attempts; ++attempt) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(attempt), static_cast<std::uint32_t>(g)};
      std::mt19937_64 rng(seq);
      SupersolutionSample s;
      s.mesh = mesh_;
      s.a = a_;
      s.p = p_;
      s.seed = seed;
      s.attempt = attempt;
      s.generator = g;
      draw(rng, g, s);
      if (verify(s)) return s;
    }
    throw Error("generate_supersolution: generator '" + std::string(to_string(g)) +
                "' kept producing residual violations");
  }

  /// Sample solving the equation with the given source (boundary values ignored).
  SupersolutionSample from_source(Field source) const {
    if (source.size() != mesh_->size()) throw std::invalid_argument("generate_supersolution: source has wrong size");
    for (int k : mesh_->boundary()) source[k] = 0.0;
    SupersolutionSample s;
    s.mesh = mesh_;
    s.a = a_;
    s.p = p_;
    s.source = std::move(source);
    s.u = solve(s.source).cwiseMax(0.0);
    if (!verify(s)) throw Error("generate_supersolution: solution fails the residual check");
    return s;
  }

  /// Residual check: u >= 0 and -Lap_p u + a|u|^{p-2}u - source >= -tol.
  bool verify(const SupersolutionSample& s) const {
    if (!s.u.allFinite() || s.u.minCoeff() < 0.0) return false;
    const double scale = 1.0 + sup_norm(s.source);
    const Field r = p_laplacian_residual(*mesh_, s.u, s.p, s.a, s.source);
    for (int k : mesh_->interior())
      if (r[k] < -opts_.tol * scale) return false;
    return true;
  }

 private:
  void draw(std::mt19937_64& rng, Generator g, SupersolutionSample& s) const {
    const Mesh& m = *mesh_;
    std::uniform_real_distribution<double> U(0.0, 1.0);
    switch (g) {
      case Generator::SolveWithSource: {
        const auto src = random_source(rng, m, opts_);
        s.source = sample(m, src);
        for (int k : m.boundary()) s.source[k] = 0.0;
        s.u = solve(s.source);
        // Rounding can leave -1e-17 where u should vanish.
        s.u = s.u.cwiseMax(0.0);
        break;
      }
      case Generator::Barrier: {
        // Concave profile in the last coordinate: A t (1 - kappa t), t in [0, 1].
        const double A = opts_.min_amplitude + U(rng) * (opts_.max_amplitude - opts_.min_amplitude);
        const double kappa = U(rng);
        const Point lo = m.lower(), hi = m.upper();
        s.u = sample(m, [&](Point x) {
          const double t = m.dimension() == 1 ? (x.x - lo.x) / (hi.x - lo.x) : (x.y - lo.y) / (hi.y - lo.y);
          return A * t * (1.0 - kappa * t);
        });
        s.source = Field::Zero(m.size());
        break;
      }
      case Generator::Radial: {
        // A (1 - |x - c|^2 / rho^2) with rho beyond the farthest corner.
        const Point lo = m.lower(), hi = m.upper();
        const double A = opts_.min_amplitude + U(rng) * (opts_.max_amplitude - opts_.min_amplitude);
        const Point c{lo.x + U(rng) * (hi.x - lo.x), m.dimension() == 2 ? lo.y + U(rng) * (hi.y - lo.y) : 0.0};
        double far = 0.0;
        for (Point q : {lo, hi, Point{lo.x, hi.y}, Point{hi.x, lo.y}}) {
          if (m.dimension() == 1) q.y = 0.0;
          far = std::max(far, distance(c, q));
        }
        const double rho = far * (1.0 + U(rng));
        s.u = sample(m, [&](Point x) { return A * (1.0 - std::pow(distance(x, c) / rho, 2)); });
        s.source = Field::Zero(m.size());
        break;
      }
    }
  }

  Field solve(const Field& f) const {
    if (linear_) return linear_->solve(f);
    return solve_p_laplacian(*mesh_, p_, a_, f);
  }

  MeshPtr mesh_;
  double p_;
  Field a_;
  GeneratorOptions opts_;
  std::shared_ptr<const LinearDirichletSolver> linear_;
};

inline SupersolutionSample generate_supersolution(std::uint64_t seed, MeshPtr mesh, double p, const Field& a,
                                                  Generator g, const GeneratorOptions& opts = {}) {
  return SupersolutionGenerator(std::move(mesh), p, a, opts).generate(seed, g);
}

// ---------------------------------------------------------------------------
// Interior and boundary weak Harnack

/// inf_{B_R} u >= C [ (int_{B_2R} u^s)^{1/s} - ||b^-||_{L^r(B_4R)} ].
inline InequalityReport interior_weak_harnack(const Mesh& m, const Field& u, const Point& y, double R, double s,
                                              const Field& b, double r = std::numeric_limits<double>::infinity()) {
  if (!(R > 0.0) || !(s > 0.0)) throw std::invalid_argument("interior_weak_harnack: need R > 0 and s > 0");
  if (s < 1.0) throw std::invalid_argument("interior_weak_harnack: need s >= 1");
  detail::require_ball_inside(m, y, 4.0 * R, "interior_weak_harnack");
  const auto inner = region_indices(m, Region::ball(y, R));
  const auto mid = region_indices(m, Region::ball(y, 2.0 * R));
  const auto outer = region_indices(m, Region::ball(y, 4.0 * R));
  if (inner.empty()) throw HypothesisError("interior_weak_harnack: B_R contains no nodes");
  InequalityReport rep;
  rep.inequality = "interior-weak-harnack";
  rep.lhs = u[inner.front()];
  for (int k : inner) rep.lhs = std::min(rep.lhs, u[k]);
  const double integral = detail::power_integral(m, u, mid, s);
  const double bneg = detail::lr_norm(m, detail::negative_field(b), outer, r);
  rep.rhs = integral - bneg;
  rep.parameters = {{"R", R}, {"s", s}, {"r", r}, {"y1", y.x}, {"y2", y.y}, {"integral", integral}, {"b_minus", bneg}};
  detail::lower_bound_verdict(rep);
  return rep;
}

inline InequalityReport interior_weak_harnack(const SupersolutionSample& smp, const Point& y, double R, double s) {
  return interior_weak_harnack(*smp.mesh, smp.u, y, R, s, smp.source);
}

struct BoundaryHarnackOptions {
  double epsilon = 0.5;
  double r_bar = 0.5;  // frame size: R must not exceed it
  /// Corollary form: subtract C2 ||b^-||_{L^q(domain)}.
  double c2 = 1.0;
  double q = std::numeric_limits<double>::infinity();
};

/// inf_{B_R(x0) cap O} u/d >= C ( int_{B_R(x0) cap O} (u/d)^eps )^{1/eps} [- C2 ||b^-||].
/// u/d is evaluated at interior nodes only (d = 0 on the boundary). With b
/// given, the reported constant is C1 = (lhs + C2 ||b^-||) / integral.
inline InequalityReport boundary_weak_harnack(const Mesh& m, const Field& u, const Point& x0, double R,
                                              const BoundaryHarnackOptions& o = {}, const Field* b = nullptr) {
  if (!detail::on_boundary(m, x0)) throw std::invalid_argument("boundary_weak_harnack: x0 is not a boundary point");
  if (!(R > 0.0) || R > o.r_bar) throw std::invalid_argument("boundary_weak_harnack: need 0 < R <= r_bar");
  if (!(o.epsilon > 0.0)) throw std::invalid_argument("boundary_weak_harnack: need epsilon > 0");
  const auto nodes = detail::interior_only(m, region_indices(m, Region::boundary_ball(x0, R)));
  if (nodes.empty()) throw HypothesisError("boundary_weak_harnack: half-ball contains no interior nodes");
  const Field d = boundary_distance(m);
  Field g = Field::Zero(m.size());
  for (int k : nodes) g[k] = u[k] / d[k];
  InequalityReport rep;
  rep.inequality = b ? "boundary-weak-harnack-source" : "boundary-weak-harnack";
  rep.lhs = g[nodes.front()];
  for (int k : nodes) rep.lhs = std::min(rep.lhs, g[k]);
  const double integral = detail::power_integral(m, g, nodes, o.epsilon);
  rep.parameters = {{"R", R}, {"epsilon", o.epsilon}, {"x0_1", x0.x}, {"x0_2", x0.y}, {"integral", integral}};
  if (!b) {
    rep.rhs = integral;
    detail::lower_bound_verdict(rep);
    return rep;
  }
  auto all = std::vector<int>(m.interior().begin(), m.interior().end());
  const double bneg = detail::lr_norm(m, detail::negative_field(*b), all, o.q);
  rep.parameters.emplace_back("c2", o.c2);
  rep.parameters.emplace_back("b_minus", bneg);
  rep.rhs = integral;
  const double shifted = rep.lhs + o.c2 * bneg;
  if (integral > 0.0) {
    rep.empirical_constant = shifted / integral;
    rep.verdict = rep.empirical_constant > 0.0 ? Verdict::Pass : Verdict::Fail;
  } else {
    rep.empirical_constant = std::numeric_limits<double>::infinity();
    rep.verdict = shifted >= 0.0 ? Verdict::Pass : Verdict::Fail;
  }
  return rep;
}

inline InequalityReport boundary_weak_harnack(const SupersolutionSample& smp, const Point& x0, double R,
                                              const BoundaryHarnackOptions& o = {}) {
  return boundary_weak_harnack(*smp.mesh, smp.u, x0, R, o);
}

struct EpsilonScan {
  struct Row {
    double epsilon = 0.0;
    double min_constant = 0.0;
    std::size_t worst_sample = 0;
  };
  std::vector<Row> rows;
  /// Largest epsilon whose worst-case constant stays above the floor (0 if none).
  double best_epsilon = 0.0;
};

inline EpsilonScan scan_epsilon(const std::vector<SupersolutionSample>& samples, const Point& x0, double R,
                                const std::vector<double>& grid, double floor = 1e-8, double r_bar = 0.5) {
  if (samples.empty()) throw std::invalid_argument("scan_epsilon: no samples");
  if (grid.empty()) throw std::invalid_argument("scan_epsilon: empty epsilon grid");
  EpsilonScan out;
  for (double eps : grid) {
    if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("scan_epsilon: grid must lie in (0, 1]");
    EpsilonScan::Row row;
    row.epsilon = eps;
    row.min_constant = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < samples.size(); ++i) {
      BoundaryHarnackOptions o;
      o.epsilon = eps;
      o.r_bar = r_bar;
      const auto rep = boundary_weak_harnack(samples[i], x0, R, o);
      if (rep.empirical_constant < row.min_constant) {
        row.min_constant = rep.empirical_constant;
        row.worst_sample = i;
      }
    }
    if (row.min_constant > floor) out.best_epsilon = std::max(out.best_epsilon, eps);
    out.rows.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cube frames Q_rho = Q_rho(rho e), e = (0, ..., 1/2): bottom face on x_N = 0.

struct CubeFrame {
  MeshPtr mesh;
  Point origin{0.0, 0.0};  // frame origin: bottom-face centre (2D) or left end (1D)
  double scale = 1.0;

  /// Frame mesh covering exactly the closed cube Q_rho with n nodes per axis.
  static CubeFrame standard(double rho, int n, int dimension) {
    CubeFrame f;
    if (dimension == 1)
      f.mesh = std::make_shared<const Mesh>(Mesh::interval(0.0, rho, n));
    else
      f.mesh = std::make_shared<const Mesh>(Mesh::rectangle({-0.5 * rho, 0.0}, {0.5 * rho, rho}, n, n));
    return f;
  }

  Point local(int k) const {
    const Point p = mesh->node(k);
    return {(p.x - origin.x) / scale, (p.y - origin.y) / scale};
  }
  double xn(int k) const { return mesh->dimension() == 1 ? local(k).x : local(k).y; }

  /// Nodes of the open cube Q_rho(rho e).
  std::vector<int> cube_nodes(double rho) const {
    std::vector<int> out;
    const double slack = 1e-12 * rho;
    for (int k = 0; k < mesh->size(); ++k) {
      const Point q = local(k);
      const double t = xn(k);
      if (t <= slack || t >= rho - slack) continue;
      if (mesh->dimension() == 2 && std::abs(q.x) >= 0.5 * rho - slack) continue;
      out.push_back(k);
    }
    return out;
  }
};

/// Growth lemma: if |{x in Q_1 : u > x_N}| >= nu then u > k x_N on Q_1.
/// Reports k = inf_{Q_1} u / x_N.
inline InequalityReport growth_lemma_check(const CubeFrame& frame, const Field& u, double nu, double p = 2.0,
                                           double a = 0.0, double tol = 1e-8) {
  const Mesh& m = *frame.mesh;
  if (u.size() != m.size()) throw std::invalid_argument("growth_lemma_check: size mismatch");
  if (nu < 0.0) throw std::invalid_argument("growth_lemma_check: need nu >= 0");
  // Supersolution on the interior of Q_{3/2}.
  const Field r = p_laplacian_residual(m, u, p, Field::Constant(m.size(), a), Field::Zero(m.size()));
  for (int k : frame.cube_nodes(1.5))
    if (!m.is_boundary(k) && r[k] < -tol * (1.0 + sup_norm(u)))
      throw HypothesisError("growth_lemma_check: u is not a supersolution at node " + std::to_string(k));
  if (u.minCoeff() < 0.0) throw HypothesisError("growth_lemma_check: u is negative somewhere");
  const auto q1 = frame.cube_nodes(1.0);
  if (q1.empty()) throw HypothesisError("growth_lemma_check: Q_1 contains no nodes");
  double level = 0.0;
  InequalityReport rep;
  rep.inequality = "growth-lemma";
  rep.lhs = std::numeric_limits<double>::infinity();
  for (int k : q1) {
    const double t = frame.xn(k);
    if (u[k] > t) level += m.cell_volume()[k];
    rep.lhs = std::min(rep.lhs, u[k] / t);
  }
  level *= std::pow(frame.scale, -m.dimension());
  rep.rhs = 1.0;
  rep.empirical_constant = rep.lhs;
  rep.parameters = {{"nu", nu}, {"measure", level}, {"p", p}, {"a", a}};
  if (level < nu) {
    rep.verdict = Verdict::HypothesisNotMet;
    rep.note = "measure of {u > x_N} below nu";
  } else {
    rep.verdict = rep.lhs > 0.0 ? Verdict::Pass : Verdict::Fail;
  }
  return rep;
}

/// Smooth cap for the growth-lemma barrier: 0 on |x'| <= 1/2, c1/2 at
/// |x'| = (3 - 2 c1)/4, quintic smoothstep in between.
inline double barrier_eta(double xprime, double c1) {
  const double a = 0.5, b = 0.25 * (3.0 - 2.0 * c1);
  const double t = std::clamp((std::abs(xprime) - a) / (b - a), 0.0, 1.0);
  return 0.5 * c1 * t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
}

struct BarrierReport {
  Field v;
  std::vector<int> slab;  // interior nodes of omega_delta
  double worst_residual = 0.0;
  bool subsolution = false;
};

/// Mesh on which the barrier lives: [-(3-2c1)/4, (3-2c1)/4] x [0, c1/2] (2D)
/// or [0, c1/2] (1D).
inline MeshPtr barrier_mesh(double c1, int n, int dimension) {
  const double half = 0.25 * (3.0 - 2.0 * c1);
  if (dimension == 1) return std::make_shared<const Mesh>(Mesh::interval(0.0, 0.5 * c1, n));
  return std::make_shared<const Mesh>(Mesh::rectangle({-half, 0.0}, {half, 0.5 * c1}, n, n));
}

/// v_delta = (x_N - eta)^2 / delta + (x_N - eta) on the slab
/// omega_delta = {eta <= x_N <= delta/2}, checked as a discrete subsolution of
/// -Lap_p v + a |v|^{p-2} v <= 0 there.
inline BarrierReport barrier(double delta, double c1, const Mesh& m, double p = 2.0, double a = 0.0,
                             double tol = 1e-8) {
  if (!(c1 > 0.0 && c1 < 0.5)) throw std::invalid_argument("barrier: need 0 < c1 < 1/2");
  if (!(delta > 0.0 && delta <= c1)) throw std::invalid_argument("barrier: need 0 < delta <= c1");
  BarrierReport rep;
  auto eta = [&](const Point& x) { return m.dimension() == 1 ? 0.0 : barrier_eta(x.x, c1); };
  auto xn = [&](const Point& x) { return m.dimension() == 1 ? x.x : x.y; };
  rep.v = sample(m, [&](Point x) {
    const double s = xn(x) - eta(x);
    return s * s / delta + s;
  });
  const Field r = p_laplacian_residual(m, rep.v, p, Field::Constant(m.size(), a), Field::Zero(m.size()));
  rep.worst_residual = -std::numeric_limits<double>::infinity();
  for (int k : m.interior()) {
    const Point x = m.node(k);
    if (xn(x) < eta(x) || xn(x) > 0.5 * delta) continue;
    rep.slab.push_back(k);
    rep.worst_residual = std::max(rep.worst_residual, r[k]);
  }
  rep.subsolution = rep.slab.empty() || rep.worst_residual <= tol;
  return rep;
}

struct DecayReport {
  struct Row {
    int j = 0;
    double measure = 0.0;
    double bound = 0.0;
    bool ok = false;
  };
  double M = 4.0;
  double mu = 0.05;
  double normalization = 0.0;  // inf_{Q_1} u / x_N before rescaling
  std::vector<Row> rows;
  bool passed = true;
};

/// Distribution decay |{x in Q_1 : v/x_N > M^j}| < (1 - mu)^j for the
/// normalized v = u / (inf_{Q_1} u/x_N + beta).
inline DecayReport distribution_decay_check(const CubeFrame& frame, const Field& u, double M = 4.0,
                                            double mu = 0.05, int J = 8, double beta = 1e-12) {
  if (!(M > 1.0) || !(mu > 0.0 && mu < 1.0)) throw std::invalid_argument("distribution_decay_check: need M > 1, 0 < mu < 1");
  const Mesh& m = *frame.mesh;
  const auto q1 = frame.cube_nodes(1.0);
  DecayReport rep;
  rep.M = M;
  rep.mu = mu;
  double inf = std::numeric_limits<double>::infinity();
  for (int k : q1) inf = std::min(inf, u[k] / frame.xn(k));
  rep.normalization = inf;
  const double denom = std::max(inf, 0.0) + beta;
  const double vol_scale = std::pow(frame.scale, -m.dimension());
  for (int j = 1; j <= J; ++j) {
    DecayReport::Row row;
    row.j = j;
    const double level = std::pow(M, j);
    for (int k : q1)
      if (u[k] / denom / frame.xn(k) > level) row.measure += m.cell_volume()[k] * vol_scale;
    row.bound = std::pow(1.0 - mu, j);
    row.ok = row.measure < row.bound;
    rep.passed = rep.passed && row.ok;
    rep.rows.push_back(row);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Dyadic covering lemma

/// Union of dyadic cells of Q_1 at a fixed depth: 2^{depth * dim} cells,
/// indexed i + side * j.
struct DyadicSet {
  int dimension = 2;
  int depth = 4;
  std::vector<char> cells;

  DyadicSet() = default;
  DyadicSet(int dim, int d) : dimension(dim), depth(d) {
    if (dim != 1 && dim != 2) throw std::invalid_argument("DyadicSet: dimension must be 1 or 2");
    if (d < 0 || d > 12) throw std::invalid_argument("DyadicSet: depth out of range");
    cells.assign(static_cast<std::size_t>(1) << (d * dim), 0);
  }
  int side() const { return 1 << depth; }
  std::size_t size() const { return cells.size(); }
  std::size_t count() const { return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), 1)); }
  bool operator[](std::size_t i) const { return cells[i] != 0; }
};

namespace detail {

/// counts[l][c]: number of set cells inside dyadic cube c of level l
/// (level 0 = Q_1, level depth = single cells).
inline std::vector<std::vector<std::size_t>> dyadic_pyramid(const DyadicSet& s) {
  const int D = s.depth, dim = s.dimension;
  std::vector<std::vector<std::size_t>> counts(static_cast<std::size_t>(D + 1));
  counts[static_cast<std::size_t>(D)].assign(s.cells.begin(), s.cells.end());
  for (int l = D - 1; l >= 0; --l) {
    const int side = 1 << l;
    auto& up = counts[static_cast<std::size_t>(l)];
    const auto& dn = counts[static_cast<std::size_t>(l + 1)];
    up.assign(static_cast<std::size_t>(1) << (l * dim), 0);
    for (int j = 0; j < (dim == 2 ? side : 1); ++j)
      for (int i = 0; i < side; ++i) {
        std::size_t acc = 0;
        for (int dj = 0; dj < (dim == 2 ? 2 : 1); ++dj)
          for (int di = 0; di < 2; ++di)
            acc += dn[static_cast<std::size_t>((2 * i + di) + 2 * side * (dim == 2 ? 2 * j + dj : 0))];
        up[static_cast<std::size_t>(i + side * j)] = acc;
      }
  }
  return counts;
}

inline std::size_t parent_index(std::size_t c, int level, int dim) {
  const int side = 1 << level;
  const int i = static_cast<int>(c) % side, j = static_cast<int>(c) / side;
  const int ps = side / 2;
  return static_cast<std::size_t>(i / 2 + ps * (dim == 2 ? j / 2 : 0));
}

}  // namespace detail

struct GislReport {
  double alpha = 0.0;
  int depth = 0;
  int dimension = 0;
  std::size_t e_cells = 0;
  std::size_t f_cells = 0;
  std::size_t total_cells = 0;
  bool mass_hypothesis = false;         // |E| <= (1 - alpha) |Q_1|
  bool cube_hypothesis = false;         // dense dyadic Q => Q subset F
  bool predecessor_hypothesis = false;  // dense dyadic Q => parent(Q) subset F
  double c = 0.0;                       // largest c with |E| <= (1 - c alpha) |F|
  Verdict verdict = Verdict::Fail;
  std::string note = "cube family restricted to dyadic cubes";
};

inline GislReport gisl_check(const DyadicSet& E, const DyadicSet& F, double alpha) {
  if (E.dimension != F.dimension || E.depth != F.depth) throw std::invalid_argument("gisl_check: E and F differ in shape");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("gisl_check: need 0 < alpha < 1");
  for (std::size_t i = 0; i < E.size(); ++i)
    if (E[i] && !F[i]) throw HypothesisError("gisl_check: E is not contained in F (cell " + std::to_string(i) + ")");
  GislReport rep;
  rep.alpha = alpha;
  rep.depth = E.depth;
  rep.dimension = E.dimension;
  rep.e_cells = E.count();
  rep.f_cells = F.count();
  rep.total_cells = E.size();
  const double dense = 1.0 - alpha;
  rep.mass_hypothesis = static_cast<double>(rep.e_cells) <= dense * static_cast<double>(rep.total_cells);
  const auto ce = detail::dyadic_pyramid(E), cf = detail::dyadic_pyramid(F);
  rep.cube_hypothesis = rep.predecessor_hypothesis = true;
  for (int l = 0; l <= E.depth; ++l) {
    const std::size_t cube_cells = static_cast<std::size_t>(1) << ((E.depth - l) * E.dimension);
    const int pl = std::max(l - 1, 0);
    const std::size_t parent_cells = static_cast<std::size_t>(1) << ((E.depth - pl) * E.dimension);
    for (std::size_t c = 0; c < ce[static_cast<std::size_t>(l)].size(); ++c) {
      if (static_cast<double>(ce[static_cast<std::size_t>(l)][c]) < dense * static_cast<double>(cube_cells)) continue;
      if (cf[static_cast<std::size_t>(l)][c] != cube_cells) rep.cube_hypothesis = false;
      const std::size_t pc = l == 0 ? 0 : detail::parent_index(c, l, E.dimension);
      if (cf[static_cast<std::size_t>(pl)][pc] != parent_cells) rep.predecessor_hypothesis = false;
    }
  }
  rep.c = rep.f_cells == 0 ? 1.0
                           : (1.0 - static_cast<double>(rep.e_cells) / static_cast<double>(rep.f_cells)) / alpha;
  if (!rep.mass_hypothesis || !rep.cube_hypothesis)
    rep.verdict = Verdict::HypothesisNotMet;
  else
    rep.verdict = rep.c > 0.0 ? Verdict::Pass : Verdict::Fail;
  return rep;
}

/// Smallest F containing E with the predecessor property: the parent of
/// every dense dyadic cube is added. Adding cubes never lowers densities, so a
/// single pass from the finest level up suffices for E-density (F is not
/// consulted by the density test).
inline DyadicSet predecessor_closure(const DyadicSet& E, double alpha) {
  DyadicSet F = E;
  const auto ce = detail::dyadic_pyramid(E);
  const double dense = 1.0 - alpha;
  const int D = E.depth, dim = E.dimension;
  for (int l = 0; l <= D; ++l) {
    const std::size_t cube_cells = static_cast<std::size_t>(1) << ((D - l) * dim);
    for (std::size_t c = 0; c < ce[static_cast<std::size_t>(l)].size(); ++c) {
      if (static_cast<double>(ce[static_cast<std::size_t>(l)][c]) < dense * static_cast<double>(cube_cells)) continue;
      const int pl = std::max(l - 1, 0);
      const std::size_t pc = l == 0 ? 0 : detail::parent_index(c, l, dim);
      // Fill parent cube pc at level pl.
      const int pside = 1 << pl, span = 1 << (D - pl), side = 1 << D;
      const int pi = static_cast<int>(pc) % pside, pj = static_cast<int>(pc) / pside;
      for (int j = 0; j < (dim == 2 ? span : 1); ++j)
        for (int i = 0; i < span; ++i)
          F.cells[static_cast<std::size_t>(pi * span + i + side * (dim == 2 ? pj * span + j : 0))] = 1;
    }
  }
  return F;
}

/// Random union of dyadic cubes with total mass at most `max_mass`.
inline DyadicSet random_dyadic_set(std::mt19937_64& rng, int dim, int depth, double max_mass) {
  DyadicSet s(dim, depth);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::uniform_int_distribution<int> level(std::max(depth - 3, 0), depth);
  const double target = U(rng) * max_mass * static_cast<double>(s.size());
  const int side = s.side();
  for (int tries = 0; tries < 64 && static_cast<double>(s.count()) < target; ++tries) {
    const int l = level(rng);
    const int span = 1 << (depth - l), cubes = 1 << l;
    std::uniform_int_distribution<int> pick(0, cubes - 1);
    const int ci = pick(rng), cj = dim == 2 ? pick(rng) : 0;
    DyadicSet t = s;
    for (int j = 0; j < (dim == 2 ? span : 1); ++j)
      for (int i = 0; i < span; ++i) t.cells[static_cast<std::size_t>(ci * span + i + side * (cj * span + j))] = 1;
    if (static_cast<double>(t.count()) <= max_mass * static_cast<double>(s.size())) s = std::move(t);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Brezis-Cabre, local maximum principles, comparison

/// inf_O u/d >= C int_{B_R(y)} f for u an upper solution of -Lap u + a u = f.
inline InequalityReport brezis_cabre_check(const Mesh& m, const Field& u, const Field& a, const Field& f,
                                           const Point& y, double R, double tol = 1e-8) {
  if (a.minCoeff() < 0.0 || f.minCoeff() < 0.0)
    throw HypothesisError("brezis_cabre_check: a and f must be nonnegative");
  detail::require_ball_inside(m, y, 2.0 * R, "brezis_cabre_check");
  const Field r = p_laplacian_residual(m, u, 2.0, a, f);
  const double scale = 1.0 + sup_norm(f);
  for (int k : m.interior())
    if (r[k] < -tol * scale) throw HypothesisError("brezis_cabre_check: u is not an upper solution at node " + std::to_string(k));
  for (int k : m.boundary())
    if (u[k] < -tol) throw HypothesisError("brezis_cabre_check: u is negative on the boundary");
  const Field d = boundary_distance(m);
  InequalityReport rep;
  rep.inequality = "brezis-cabre";
  rep.lhs = std::numeric_limits<double>::infinity();
  for (int k : m.interior()) rep.lhs = std::min(rep.lhs, u[k] / d[k]);
  rep.rhs = integrate(m, f, Region::ball(y, R));
  rep.parameters = {{"R", R}, {"y1", y.x}, {"y2", y.y}};
  detail::lower_bound_verdict(rep);
  return rep;
}

/// sup_{inner} u^+ <= C [ (int_{outer} (u^+)^s)^{1/s} + ||b^+||_{L^r(outer)} ] for u
/// a lower solution of -Lap u + a u = b. `region` is an interior ball B_R(y)
/// (with B_2R inside the domain) or a boundary ball B_R(x0) (x0 on the boundary,
/// u <= 0 there).
inline InequalityReport local_max_principle_check(const Mesh& m, const Field& u, const Field& a, const Field& b,
                                                  const Region& region, double s,
                                                  double r = std::numeric_limits<double>::infinity(),
                                                  double tol = 1e-8) {
  if (!(s > 0.0)) throw std::invalid_argument("local_max_principle_check: need s > 0");
  const bool boundary = region.kind == Region::Kind::BoundaryBall;
  if (!boundary && region.kind != Region::Kind::Ball)
    throw std::invalid_argument("local_max_principle_check: region must be a ball or boundary ball");
  if (boundary && !detail::on_boundary(m, region.center))
    throw HypothesisError("local_max_principle_check: boundary ball centre is not on the boundary");
  if (!boundary) detail::require_ball_inside(m, region.center, 2.0 * region.size, "local_max_principle_check");
  const auto inner = region_indices(m, region);
  const auto outer = region_indices(m, region.scaled(2.0));
  const Field res = p_laplacian_residual(m, u, 2.0, a, b);
  const double scale = 1.0 + sup_norm(b);
  for (int k : outer) {
    if (m.is_boundary(k)) {
      if (boundary && u[k] > tol) throw HypothesisError("local_max_principle_check: u > 0 on the boundary");
    } else if (res[k] > tol * scale) {
      throw HypothesisError("local_max_principle_check: u is not a lower solution at node " + std::to_string(k));
    }
  }
  InequalityReport rep;
  rep.inequality = boundary ? "boundary-local-max-principle" : "local-max-principle";
  rep.lhs = 0.0;
  for (int k : inner) rep.lhs = std::max(rep.lhs, u[k]);
  const double integral = detail::power_integral(m, detail::positive_field(u), outer, s);
  const double bplus = detail::lr_norm(m, detail::positive_field(b), outer, r);
  rep.rhs = integral + bplus;
  rep.parameters = {{"R", region.size}, {"s", s}, {"r", r}, {"c1", region.center.x}, {"c2", region.center.y},
                    {"integral", integral}, {"b_plus", bplus}};
  if (rep.rhs > 0.0) {
    rep.empirical_constant = rep.lhs / rep.rhs;
    rep.verdict = std::isfinite(rep.empirical_constant) ? Verdict::Pass : Verdict::Fail;
  } else {
    rep.empirical_constant = 0.0;
    rep.verdict = rep.lhs == 0.0 ? Verdict::Pass : Verdict::Fail;
  }
  return rep;
}

/// Discrete comparison: u a subsolution and v a supersolution of
/// -Lap_p w + a |w|^{p-2} w = f with u <= v on the boundary imply u <= v.
/// lhs = min (v - u); the verdict is lhs >= -tol.
inline InequalityReport comparison_check(const Mesh& m, const Field& u, const Field& v, double p, const Field& a,
                                         const Field& f, double tol = 1e-8) {
  const double scale = 1.0 + sup_norm(f);
  const Field ru = p_laplacian_residual(m, u, p, a, f), rv = p_laplacian_residual(m, v, p, a, f);
  for (int k : m.interior()) {
    if (ru[k] > tol * scale) throw HypothesisError("comparison_check: u is not a subsolution");
    if (rv[k] < -tol * scale) throw HypothesisError("comparison_check: v is not a supersolution");
  }
  for (int k : m.boundary())
    if (u[k] > v[k] + tol) throw HypothesisError("comparison_check: u > v on the boundary");
  InequalityReport rep;
  rep.inequality = "comparison";
  rep.lhs = (v - u).minCoeff();
  rep.rhs = 0.0;
  rep.empirical_constant = 1.0;
  rep.parameters = {{"p", p}};
  rep.verdict = rep.lhs >= -tol ? Verdict::Pass : Verdict::Fail;
  return rep;
}

// ---------------------------------------------------------------------------
// Interior Harnack scaling on cubes

struct ScalingReport {
  std::vector<double> rhos;
  std::vector<double> products;  // rho^{N/gamma} inf / (int u^gamma)^{1/gamma}
  double spread = 0.0;           // max / min - 1
  bool passed = false;
};

/// For u_rho(x) = u((x' - e')/rho + e', (x_N - 1/2)/rho + 1/2), the zoom of u
/// onto Q_rho(e), evaluates rho^{N/gamma} inf_{Q_rho(e)} u_rho /
/// (int_{Q_rho(e)} u_rho^gamma)^{1/gamma}. In the continuum this equals the
/// rho = 1 value exactly; the check passes if the spread stays within `rel`.
/// The mesh must cover Q_1(e), e = (0, 1/2) (2D) or 1/2 (1D).
template <typename Fn>
ScalingReport iwhi_scaling_check(const Mesh& m, Fn&& u, double gamma, const std::vector<double>& rhos,
                                 double rel = 0.1) {
  if (!(gamma > 0.0)) throw std::invalid_argument("iwhi_scaling_check: need gamma > 0");
  ScalingReport rep;
  const int N = m.dimension();
  const Point e = N == 1 ? Point{0.5, 0.0} : Point{0.0, 0.5};
  for (double rho : rhos) {
    if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("iwhi_scaling_check: need 0 < rho <= 1");
    const Field f = sample(m, [&](Point x) {
      return N == 1 ? u(Point{(x.x - 0.5) / rho + 0.5, 0.0}) : u(Point{x.x / rho, (x.y - 0.5) / rho + 0.5});
    });
    const auto nodes = region_indices(m, Region::cube(e, rho));
    if (nodes.empty()) throw HypothesisError("iwhi_scaling_check: cube contains no nodes");
    double inf = std::numeric_limits<double>::infinity();
    for (int k : nodes) inf = std::min(inf, f[k]);
    const double integral = detail::power_integral(m, f, nodes, gamma);
    rep.rhos.push_back(rho);
    rep.products.push_back(std::pow(rho, N / gamma) * inf / integral);
  }
  const auto [lo, hi] = std::minmax_element(rep.products.begin(), rep.products.end());
  rep.spread = *hi / *lo - 1.0;
  rep.passed = *lo > 0.0 && rep.spread <= rel;
  return rep;
}

}  // namespace qgrad
