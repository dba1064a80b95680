#pragma once

// Randomized property suites over the harnack checks. Every instance draws
// from its own seed_seq{seed, suite tag, index}, so a suite is reproducible
// regardless of thread count.

#include "qgrad/harnack.hpp"
#include "qgrad/parallel.hpp"

#include <array>
#include <map>
#include <mutex>
#include <tuple>

namespace qgrad {

struct SuiteOptions {
  std::size_t instances = 1000;
  std::uint64_t seed = 1;
  int threads = 1;
  int n1d = 129;  // nodes per axis in 1D
  int n2d = 33;   // nodes per axis in 2D
  double alpha = 0.5;
  int gisl_depth = 4;
  double nu = 0.05;
  double decay_M = 4.0;
  double decay_mu = 0.05;
  int decay_J = 8;
};

struct SuiteSummary {
  std::string name;
  std::size_t instances = 0;
  std::size_t passes = 0;
  std::size_t failures = 0;
  std::size_t hypothesis_not_met = 0;
  double min_constant = std::numeric_limits<double>::infinity();
  double max_constant = 0.0;
  std::vector<InequalityReport> reports;

  void add(InequalityReport r) {
    ++instances;
    switch (r.verdict) {
      case Verdict::Pass:
        ++passes;
        min_constant = std::min(min_constant, r.empirical_constant);
        if (std::isfinite(r.empirical_constant)) max_constant = std::max(max_constant, r.empirical_constant);
        break;
      case Verdict::Fail:
        ++failures;
        break;
      case Verdict::HypothesisNotMet:
        ++hypothesis_not_met;
        break;
    }
    reports.push_back(std::move(r));
  }
};

inline InequalityReport to_report(const DecayReport& d) {
  InequalityReport r;
  r.inequality = "distribution-decay";
  // Worst row: largest measure / bound.
  double worst = -1.0;
  for (const auto& row : d.rows) {
    const double ratio = row.measure / row.bound;
    if (ratio > worst) {
      worst = ratio;
      r.lhs = row.bound;
      r.rhs = row.measure;
      r.parameters = {{"M", d.M}, {"mu", d.mu}, {"j", static_cast<double>(row.j)}};
    }
  }
  r.parameters.emplace_back("normalization", d.normalization);
  r.empirical_constant = r.rhs > 0.0 ? r.lhs / r.rhs : std::numeric_limits<double>::infinity();
  r.verdict = d.passed ? Verdict::Pass : Verdict::Fail;
  return r;
}

/// |E| <= (1 - c alpha)|F| read as |F| - |E| >= c (alpha |F|).
inline InequalityReport to_report(const GislReport& g) {
  InequalityReport r;
  r.inequality = "gisl";
  const double cell = std::pow(2.0, -g.depth * g.dimension);
  r.lhs = (static_cast<double>(g.f_cells) - static_cast<double>(g.e_cells)) * cell;
  r.rhs = g.alpha * static_cast<double>(g.f_cells) * cell;
  r.empirical_constant = g.c;
  r.parameters = {{"alpha", g.alpha},
                  {"depth", static_cast<double>(g.depth)},
                  {"mass_hypothesis", g.mass_hypothesis ? 1.0 : 0.0},
                  {"cube_hypothesis", g.cube_hypothesis ? 1.0 : 0.0},
                  {"predecessor_hypothesis", g.predecessor_hypothesis ? 1.0 : 0.0}};
  r.verdict = g.verdict;
  r.note = g.note;
  return r;
}

namespace detail {

enum class SuiteTag : std::uint32_t { Interior = 1, Lmp, BrezisCabre, Comparison, Growth, Decay, Gisl, Boundary };

inline std::mt19937_64 instance_rng(std::uint64_t seed, SuiteTag tag, std::size_t i) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(i)};
  return std::mt19937_64(seq);
}

inline std::uint64_t instance_seed(std::mt19937_64& rng) { return rng(); }

/// Lazily built generators keyed by (mesh id, p, a). Construction is
/// serialized; generation itself only reads the cached factorization.
class GeneratorCache {
 public:
  GeneratorCache(std::vector<MeshPtr> meshes, GeneratorOptions opts) : meshes_(std::move(meshes)), opts_(opts) {}

  const SupersolutionGenerator& get(std::size_t mesh, double p, double a) {
    std::lock_guard<std::mutex> lock(m_);
    const auto key = std::make_tuple(mesh, p, a);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      const auto& msh = meshes_.at(mesh);
      it = cache_.emplace(key, std::make_unique<SupersolutionGenerator>(msh, p, Field::Constant(msh->size(), a), opts_)).first;
    }
    return *it->second;
  }
  const MeshPtr& mesh(std::size_t i) const { return meshes_.at(i); }

 private:
  std::vector<MeshPtr> meshes_;
  GeneratorOptions opts_;
  std::mutex m_;
  std::map<std::tuple<std::size_t, double, double>, std::unique_ptr<SupersolutionGenerator>> cache_;
};

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& v) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline SuiteSummary collect(std::string name, std::vector<InequalityReport> reports) {
  SuiteSummary s;
  s.name = std::move(name);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    reports[i].sample_id = i;
    s.add(std::move(reports[i]));
  }
  return s;
}

inline const std::vector<double> kExponents1d{1.5, 2.0, 3.0};
inline const std::vector<double> kPotentials{0.0, 0.5, 2.0};

}  // namespace detail

/// Interior weak Harnack on unit-interval and unit-square supersolutions.
/// Even instances are 1D (p in {1.5, 2, 3}), odd ones 2D with p = 2.
inline SuiteSummary interior_harnack_suite(const SuiteOptions& o) {
  detail::GeneratorCache gens({std::make_shared<const Mesh>(Mesh::interval(0.0, 1.0, o.n1d)),
                               std::make_shared<const Mesh>(Mesh::rectangle({0, 0}, {1, 1}, o.n2d, o.n2d))},
                              {});
  std::vector<InequalityReport> out(o.instances);
  parallel_for(o.instances, o.threads, [&](std::size_t i) {
    auto rng = detail::instance_rng(o.seed, detail::SuiteTag::Interior, i);
    const std::size_t dim = i % 2 == 0 ? 1 : 2;
    const double p = dim == 1 ? detail::pick(rng, detail::kExponents1d) : 2.0;
    const double a = detail::pick(rng, detail::kPotentials);
    const double g = detail::uniform(rng, 0.0, 1.0);
    const Generator kind = g < 0.7 ? Generator::SolveWithSource : g < 0.85 ? Generator::Radial : Generator::Barrier;
    const auto smp = gens.get(dim - 1, p, a).generate(detail::instance_seed(rng), kind);
    const double R = detail::uniform(rng, dim == 1 ? 0.03 : 0.06, 0.12);
    const Point y = dim == 1 ? Point{detail::uniform(rng, 4 * R, 1 - 4 * R), 0.0}
                             : Point{detail::uniform(rng, 4 * R, 1 - 4 * R), detail::uniform(rng, 4 * R, 1 - 4 * R)};
    const double s = detail::pick(rng, std::vector<double>{1.0, 2.0, 4.0});
    out[i] = interior_weak_harnack(smp, y, R, s);
    out[i].parameters.emplace_back("p", p);
    out[i].parameters.emplace_back("a", a);
  });
  return detail::collect("interior-weak-harnack", std::move(out));
}

/// Local maximum principle (interior and boundary balls) on exact discrete
/// solutions of -Lap u + a u = b with sign-changing b.
inline SuiteSummary local_max_principle_suite(const SuiteOptions& o) {
  const std::array<MeshPtr, 2> meshes{std::make_shared<const Mesh>(Mesh::interval(0.0, 1.0, o.n1d)),
                                      std::make_shared<const Mesh>(Mesh::rectangle({0, 0}, {1, 1}, o.n2d, o.n2d))};
  std::map<std::pair<std::size_t, double>, std::unique_ptr<LinearDirichletSolver>> solvers;
  for (std::size_t d = 0; d < 2; ++d)
    for (double a : detail::kPotentials)
      solvers.emplace(std::make_pair(d, a), std::make_unique<LinearDirichletSolver>(
                                               *meshes[d], Field::Constant(meshes[d]->size(), a)));
  GeneratorOptions go;
  go.negative_fraction = 1.5;
  std::vector<InequalityReport> out(o.instances);
  parallel_for(o.instances, o.threads, [&](std::size_t i) {
    auto rng = detail::instance_rng(o.seed, detail::SuiteTag::Lmp, i);
    const std::size_t d = i % 2;
    const Mesh& m = *meshes[d];
    const double a = detail::pick(rng, detail::kPotentials);
    Field b = sample(m, random_source(rng, m, go));
    for (int k : m.boundary()) b[k] = 0.0;
    const Field u = solvers.at({d, a})->solve(b);
    const bool at_boundary = detail::uniform(rng, 0, 1) < 0.5;
    Region region = Region::whole();
    if (at_boundary) {
      const double R = detail::uniform(rng, 0.05, 0.25);
      Point c{detail::uniform(rng, 0, 1) < 0.5 ? 0.0 : 1.0, 0.0};
      if (d == 1) {
        const double t = detail::uniform(rng, 0, 1);
        c = detail::uniform(rng, 0, 1) < 0.5 ? Point{c.x, t} : Point{t, c.x};
      }
      region = Region::boundary_ball(c, R);
    } else {
      const double R = detail::uniform(rng, d == 0 ? 0.03 : 0.06, 0.2);
      const Point y = d == 0 ? Point{detail::uniform(rng, 2 * R, 1 - 2 * R), 0.0}
                             : Point{detail::uniform(rng, 2 * R, 1 - 2 * R), detail::uniform(rng, 2 * R, 1 - 2 * R)};
      region = Region::ball(y, R);
    }
    const double s = detail::pick(rng, std::vector<double>{0.5, 1.0, 2.0, 4.0});
    out[i] = local_max_principle_check(m, u, Field::Constant(m.size(), a), b, region, s);
    out[i].parameters.emplace_back("a", a);
  });
  return detail::collect("local-max-principle", std::move(out));
}

/// Brezis-Cabre lower bound on solutions of -Lap u + a u = f, f >= 0.
inline SuiteSummary brezis_cabre_suite(const SuiteOptions& o) {
  detail::GeneratorCache gens({std::make_shared<const Mesh>(Mesh::interval(0.0, 1.0, o.n1d)),
                               std::make_shared<const Mesh>(Mesh::rectangle({0, 0}, {1, 1}, o.n2d, o.n2d))},
                              {});
  std::vector<InequalityReport> out(o.instances);
  parallel_for(o.instances, o.threads, [&](std::size_t i) {
    auto rng = detail::instance_rng(o.seed, detail::SuiteTag::BrezisCabre, i);
    const std::size_t d = i % 2;
    const double a = detail::pick(rng, detail::kPotentials);
    const auto smp = gens.get(d, 2.0, a).generate(detail::instance_seed(rng), Generator::SolveWithSource);
    const double R = detail::uniform(rng, d == 0 ? 0.03 : 0.06, 0.2);
    const Point y = d == 0 ? Point{detail::uniform(rng, 2 * R, 1 - 2 * R), 0.0}
                           : Point{detail::uniform(rng, 2 * R, 1 - 2 * R), detail::uniform(rng, 2 * R, 1 - 2 * R)};
    out[i] = brezis_cabre_check(*smp.mesh, smp.u, smp.a, smp.source, y, R);
    out[i].parameters.emplace_back("a", a);
  });
  return detail::collect("brezis-cabre", std::move(out));
}

/// Comparison on pairs u = S(f1) - c1 <= v = S(f2) + c2 with f2 >= f1 >= 0.
inline SuiteSummary comparison_suite(const SuiteOptions& o) {
  const int n1 = std::max(17, o.n1d / 2 + 1);
  detail::GeneratorCache gens({std::make_shared<const Mesh>(Mesh::interval(0.0, 1.0, n1)),
                               std::make_shared<const Mesh>(Mesh::rectangle({0, 0}, {1, 1}, o.n2d, o.n2d))},
                              {});
  std::vector<InequalityReport> out(o.instances);
  parallel_for(o.instances, o.threads, [&](std::size_t i) {
    auto rng = detail::instance_rng(o.seed, detail::SuiteTag::Comparison, i);
    const std::size_t d = i % 2;
    const double p = d == 0 ? detail::pick(rng, detail::kExponents1d) : 2.0;
    const double a = detail::pick(rng, detail::kPotentials);
    const auto& gen = gens.get(d, p, a);
    const auto s1 = gen.generate(detail::instance_seed(rng), Generator::SolveWithSource);
    const auto s2 = gen.generate(detail::instance_seed(rng), Generator::SolveWithSource);
    const Mesh& m = *s1.mesh;
    // f2 = f1 + (source of s2) >= f1; solve again for v.
    const Field f2 = s1.source + s2.source;
    const Field w = p == 2.0 ? LinearDirichletSolver(m, s1.a).solve(f2) : solve_p_laplacian(m, p, s1.a, f2);
    const double c1 = detail::uniform(rng, 0.0, 1.0), c2 = detail::uniform(rng, 0.0, 1.0);
    const Field u = s1.u.array() - c1;
    const Field v = w.array() + c2;
    out[i] = comparison_check(m, u, v, p, s1.a, s1.source);
    out[i].parameters.emplace_back("a", a);
  });
  return detail::collect("comparison", std::move(out));
}

/// Growth lemma on Q_{3/2} frames. Samples are rescaled by a random factor so
/// that both sides of the measure hypothesis occur.
inline SuiteSummary growth_lemma_suite(const SuiteOptions& o) {
  const CubeFrame f1 = CubeFrame::standard(1.5, 3 * (o.n1d - 1) / 4 + 1, 1);
  const CubeFrame f2 = CubeFrame::standard(1.5, 3 * (o.n2d - 1) / 2 + 1, 2);
  detail::GeneratorCache gens({f1.mesh, f2.mesh}, {});
  std::vector<InequalityReport> out(o.instances);
  parallel_for(o.instances, o.threads, [&](std::size_t i) {
    auto rng = detail::instance_rng(o.seed, detail::SuiteTag::Growth, i);
    const std::size_t d = i % 2;
    const double p = d == 0 ? detail::pick(rng, detail::kExponents1d) : 2.0;
    const double a = detail::pick(rng, detail::kPotentials);
    const Generator kind = detail::uniform(rng, 0, 1) < 0.8 ? Generator::SolveWithSource : Generator::Barrier;
    auto smp = gens.get(d, p, a).generate(detail::instance_seed(rng), kind);
    const double t = std::exp(detail::uniform(rng, std::log(0.5), std::log(50.0)));
    // Scaling by t keeps a supersolution of the homogeneous equation.
    out[i] = growth_lemma_check(d == 0 ? f1 : f2, t * smp.u, o.nu, p, a);
    out[i].parameters.emplace_back("scale", t);
  });
  return detail::collect("growth-lemma", std::move(out));
}

/// Distribution decay tables on Q_4 frames with the suite's (M, mu).
inline std::vector<DecayReport> distribution_decay_tables(const SuiteOptions& o) {
  const CubeFrame f1 = CubeFrame::standard(4.0, o.n1d, 1);
  const CubeFrame f2 = CubeFrame::standard(4.0, 2 * (o.n2d - 1) + 1, 2);
  detail::GeneratorCache gens({f1.mesh, f2.mesh}, {});
  std::vector<DecayReport> out(o.instances);
  parallel_for(o.instances, o.threads, [&](std::size_t i) {
    auto rng = detail::instance_rng(o.seed, detail::SuiteTag::Decay, i);
    const std::size_t d = i % 2;
    const double p = d == 0 ? detail::pick(rng, detail::kExponents1d) : 2.0;
    const double a = detail::pick(rng, detail::kPotentials);
    const Generator kind = detail::uniform(rng, 0, 1) < 0.8 ? Generator::SolveWithSource : Generator::Barrier;
    const auto smp = gens.get(d, p, a).generate(detail::instance_seed(rng), kind);
    out[i] = distribution_decay_check(d == 0 ? f1 : f2, smp.u, o.decay_M, o.decay_mu, o.decay_J);
  });
  return out;
}

inline SuiteSummary distribution_decay_suite(const SuiteOptions& o) {
  const auto tables = distribution_decay_tables(o);
  std::vector<InequalityReport> out;
  out.reserve(tables.size());
  for (const auto& t : tables) out.push_back(to_report(t));
  return detail::collect("distribution-decay", std::move(out));
}

/// Largest mu, times `safety`, for which every sample of the decay suite
/// satisfies |{u/x_N > M^j}| < (1 - mu)^j at the given M.
inline double calibrate_decay_mu(SuiteOptions o, double M, double safety = 0.5) {
  o.decay_M = M;
  double mu = 1.0;
  for (const auto& t : distribution_decay_tables(o))
    for (const auto& row : t.rows) mu = std::min(mu, 1.0 - std::pow(row.measure, 1.0 / row.j));
  return safety * mu;
}

/// Draws one GISL instance: E random with |E| <= (1 - alpha), F the
/// predecessor closure of E plus random extra cubes.
inline std::pair<DyadicSet, DyadicSet> gisl_instance(std::mt19937_64& rng, int dim, int depth, double alpha) {
  DyadicSet E = random_dyadic_set(rng, dim, depth, 1.0 - alpha);
  DyadicSet F = predecessor_closure(E, alpha);
  const DyadicSet extra = random_dyadic_set(rng, dim, depth, 0.25);
  for (std::size_t c = 0; c < F.size(); ++c) F.cells[c] = static_cast<char>(F[c] || extra[c]);
  return {std::move(E), std::move(F)};
}

inline SuiteSummary gisl_suite(const SuiteOptions& o) {
  std::vector<InequalityReport> out(o.instances);
  parallel_for(o.instances, o.threads, [&](std::size_t i) {
    auto rng = detail::instance_rng(o.seed, detail::SuiteTag::Gisl, i);
    const auto [E, F] = gisl_instance(rng, 2, o.gisl_depth, o.alpha);
    out[i] = to_report(gisl_check(E, F, o.alpha));
  });
  return detail::collect("gisl", std::move(out));
}

struct BoundarySuiteOptions {
  std::size_t samples = 200;
  std::uint64_t seed = 1;
  int threads = 1;
  Point x0{0.5, 0.0};
  double R = 0.2;
  double epsilon = 0.5;
  double r_bar = 0.5;
};

/// Boundary weak Harnack over p = 2 solve-with-source samples on the unit
/// square with n x n nodes. Sample i uses the same continuous source at every
/// resolution.
inline SuiteSummary boundary_harnack_suite(int n, const BoundarySuiteOptions& o) {
  auto mesh = std::make_shared<const Mesh>(Mesh::rectangle({0, 0}, {1, 1}, n, n));
  const SupersolutionGenerator gen(mesh, 2.0, Field::Zero(mesh->size()));
  std::vector<InequalityReport> out(o.samples);
  parallel_for(o.samples, o.threads, [&](std::size_t i) {
    auto rng = detail::instance_rng(o.seed, detail::SuiteTag::Boundary, i);
    const auto smp = gen.generate(detail::instance_seed(rng), Generator::SolveWithSource);
    BoundaryHarnackOptions bo;
    bo.epsilon = o.epsilon;
    bo.r_bar = o.r_bar;
    out[i] = boundary_weak_harnack(smp, o.x0, o.R, bo);
    out[i].parameters.emplace_back("n", n);
  });
  return detail::collect("boundary-weak-harnack", std::move(out));
}

}  // namespace qgrad
