#pragma once

#include "qgrad/coefficients.hpp"
#include "qgrad/common.hpp"
#include "qgrad/mesh.hpp"
#include "qgrad/solver.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qgrad {

struct BranchPoint {
  double lambda = 0.0;
  Field u;
  double sup_norm = 0.0;
  double arclength = 0.0;
  int jacobian_signature = 0;
  double residual_norm = 0.0;
  double tangent_lambda = 0.0;  // d lambda / ds at this point
  bool fold = false;            // t_lambda changed sign since the previous point
};

enum class StopReason { LambdaBound, SupNormCap, OverflowGuard, ResolutionLimit, StepCollapse, MaxPoints, BranchPoint };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::LambdaBound:
      return "lambda-bound";
    case StopReason::SupNormCap:
      return "sup-norm-cap";
    case StopReason::OverflowGuard:
      return "overflow-guard";
    case StopReason::ResolutionLimit:
      return "resolution-limit";
    case StopReason::StepCollapse:
      return "step-collapse";
    case StopReason::MaxPoints:
      return "max-points";
    case StopReason::BranchPoint:
      return "suspected-branch-point";
  }
  return "?";
}

struct ContinuationControls {
  double ds0 = 0.05;
  double ds_min = 1e-6;
  double ds_max = 2.0;
  int easy_iterations = 4;  // corrector iterations counted as an easy step
  int easy_steps_to_grow = 4;
  int corrector_max_iter = 12;
  double min_tangent_cosine = 0.8;  // reject steps turning more sharply
  double lambda_min = -std::numeric_limits<double>::infinity();
  double lambda_max = std::numeric_limits<double>::infinity();
  double sup_norm_cap = 1e3;
  /// Stop once mu2 * sup u reaches this value (cole-hopf variables overflow near 700).
  double overflow_guard = 600.0;
  /// Stop once the cell Peclet number of the gradient term exceeds this.
  double peclet_limit = 1.0;
  int max_points = 5000;
  SolverOptions solver{};
  std::optional<Field> modified_base;  // solve the modified problem around this u0

  void validate() const {
    solver.validate();
    if (!(ds0 > 0.0 && ds_min > 0.0 && ds_max >= ds0 && ds0 >= ds_min))
      throw std::invalid_argument("continuation: need 0 < ds_min <= ds0 <= ds_max");
    if (!(lambda_min < lambda_max)) throw std::invalid_argument("continuation: empty lambda range");
    if (max_points < 2) throw std::invalid_argument("continuation: max_points must be at least 2");
  }
};

struct Branch {
  std::vector<BranchPoint> points;
  std::string problem_id;
  ContinuationControls controls;
  StopReason stop = StopReason::MaxPoints;
  std::vector<std::size_t> fold_indices;

  std::size_t size() const { return points.size(); }
  double lambda_min() const {
    double v = std::numeric_limits<double>::infinity();
    for (const auto& p : points) v = std::min(v, p.lambda);
    return v;
  }
  double lambda_max() const {
    double v = -std::numeric_limits<double>::infinity();
    for (const auto& p : points) v = std::max(v, p.lambda);
    return v;
  }
};

namespace detail {

/// Pseudo-arclength machinery. Unknowns are (z, lambda) with z = u or w; the
/// linear algebra runs in scaled variables y = dz / E (so y = du to first
/// order) and scaled rows R / E. Arclength is measured in (u, lambda) with the
/// cell-volume weighted inner product.
class ArclengthSystem {
 public:
  ArclengthSystem(const DiscreteProblem& P) : P_(P), vol_(P.mesh().cell_volume()) {}

  double dot(const Field& a, const Field& b) const { return (vol_.array() * a.array() * b.array()).sum(); }

  struct Tangent {
    Field tu;
    double tl = 0.0;
    int bordered_sign = 0;
  };

  /// Unit tangent at (z, lambda) oriented so that <t, previous> > 0.
  Tangent tangent(const Field& z, double lambda, const Field& prev_u, double prev_l) const {
    auto lu = factor(z, lambda, prev_u, prev_l);
    Field rhs = Field::Zero(z.size() + 1);
    rhs[z.size()] = 1.0;
    const Field sol = lu->solve(rhs);
    Tangent t;
    t.tu = sol.head(z.size());
    t.tl = sol[z.size()];
    const double n = std::sqrt(dot(t.tu, t.tu) + t.tl * t.tl);
    if (!(n > 0.0) || !std::isfinite(n)) throw DivergenceError("continuation: degenerate tangent");
    t.tu /= n;
    t.tl /= n;
    t.bordered_sign = static_cast<int>(lu->signDeterminant());
    return t;
  }

  struct Corrected {
    Field z;
    double lambda = 0.0;
    int iterations = 0;
    double residual = 0.0;
  };

  /// Newton on { R(z, lambda) = 0, <t_u, u(z) - u_k> + t_l (lambda - lambda_k) = ds }.
  std::optional<Corrected> correct(Field z, double lambda, const Field& uk, double lk, const Tangent& t, double ds,
                                   const ContinuationControls& c) const {
    const double tol = c.solver.newton_tol;
    for (int it = 0; it <= c.corrector_max_iter; ++it) {
      if (!P_.in_domain(z)) return std::nullopt;
      Field u;
      try {
        u = P_.to_u(z);
      } catch (const DomainError&) {
        return std::nullopt;
      }
      const Field rs = P_.row_scale(z);
      const Field r = P_.residual(z, lambda).cwiseProduct(rs);
      const double N = dot(t.tu, u - uk) + t.tl * (lambda - lk) - ds;
      const double rn = sup_norm(r);
      if (!std::isfinite(rn)) return std::nullopt;
      if (rn <= std::max(tol, P_.residual_floor(z, lambda)) && std::abs(N) <= tol * std::max(1.0, ds))
        return Corrected{z, lambda, it, rn};
      if (it == c.corrector_max_iter) break;
      auto lu = factor(z, lambda, t.tu, t.tl);
      if (!lu) return std::nullopt;
      Field rhs(z.size() + 1);
      rhs.head(z.size()) = -r;
      rhs[z.size()] = -N;
      const Field d = lu->solve(rhs);
      if (!d.allFinite()) return std::nullopt;
      const Field E = rs.cwiseInverse();
      z += E.cwiseProduct(d.head(z.size()));
      lambda += d[z.size()];
    }
    return std::nullopt;
  }

  /// Sign of det of the scaled Jacobian (same sign as the unscaled one).
  int jacobian_signature(const Field& z, double lambda) const {
    const Field rs = P_.row_scale(z);
    SparseMatrix J = rs.asDiagonal() * P_.jacobian(z, lambda) * rs.cwiseInverse().asDiagonal();
    return jacobian_sign(J);
  }

 private:
  std::unique_ptr<Eigen::SparseLU<SparseMatrix>> factor(const Field& z, double lambda, const Field& tu,
                                                        double tl) const {
    const int n = static_cast<int>(z.size());
    const Field rs = P_.row_scale(z);
    const Field E = rs.cwiseInverse();
    const SparseMatrix J = P_.jacobian(z, lambda);
    const Field rl = P_.d_lambda(z, lambda).cwiseProduct(rs);
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(J.nonZeros() + 2 * n + 1));
    for (int col = 0; col < J.outerSize(); ++col)
      for (SparseMatrix::InnerIterator itr(J, col); itr; ++itr)
        t.emplace_back(itr.row(), col, rs[itr.row()] * itr.value() * E[col]);
    for (int k = 0; k < n; ++k) {
      if (rl[k] != 0.0) t.emplace_back(k, n, rl[k]);
      if (tu[k] != 0.0) t.emplace_back(n, k, vol_[k] * tu[k]);
    }
    t.emplace_back(n, n, tl);
    SparseMatrix A(n + 1, n + 1);
    A.setFromTriplets(t.begin(), t.end());
    auto lu = std::make_unique<Eigen::SparseLU<SparseMatrix>>();
    lu->compute(A);
    if (lu->info() != Eigen::Success) return nullptr;
    return lu;
  }

  const DiscreteProblem& P_;
  Field vol_;
};

}  // namespace detail

/// Pseudo-arclength predictor-corrector from a converged solution. `direction`
/// selects the initial sign of d lambda / ds.
inline Branch trace_branch(const Solution& start, int direction, const CoefficientSet& coeffs,
                           const ContinuationControls& controls, const std::string& problem_id = {}) {
  controls.validate();
  if (direction != 1 && direction != -1) throw std::invalid_argument("trace_branch: direction must be +1 or -1");
  DiscreteProblem P(coeffs, controls.solver.variable, controls.modified_base);
  detail::ArclengthSystem S(P);
  if (P.scaled_norm(P.from_u(start.u), start.lambda) > 10.0 * controls.solver.newton_tol)
    throw std::invalid_argument("trace_branch: start is not a converged solution");

  Branch br;
  br.problem_id = problem_id;
  br.controls = controls;

  Field z = P.from_u(start.u);
  double lambda = start.lambda;
  auto t = S.tangent(z, lambda, Field::Zero(z.size()), static_cast<double>(direction));

  auto make_point = [&](const Field& zz, double l, double s, double res, double tl) {
    BranchPoint bp;
    bp.lambda = l;
    bp.u = P.to_u(zz);
    bp.sup_norm = sup_norm(bp.u);
    bp.arclength = s;
    bp.jacobian_signature = S.jacobian_signature(zz, l);
    bp.residual_norm = res;
    bp.tangent_lambda = tl;
    return bp;
  };
  br.points.push_back(make_point(z, lambda, 0.0, P.scaled_norm(z, lambda), t.tl));

  const double mu_t = P.transform_mu();
  auto stop_reason = [&](const BranchPoint& bp) -> std::optional<StopReason> {
    if (bp.lambda < controls.lambda_min || bp.lambda > controls.lambda_max) return StopReason::LambdaBound;
    if (bp.sup_norm >= controls.sup_norm_cap) return StopReason::SupNormCap;
    if (mu_t > 0.0 && mu_t * bp.u.maxCoeff() >= controls.overflow_guard) return StopReason::OverflowGuard;
    if (P.cell_peclet(P.from_u(bp.u)) > controls.peclet_limit) return StopReason::ResolutionLimit;
    return std::nullopt;
  };

  double ds = controls.ds0;
  int easy = 0;
  double s = 0.0;
  while (true) {
    if (static_cast<int>(br.points.size()) >= controls.max_points) {
      br.stop = StopReason::MaxPoints;
      break;
    }
    const Field uk = br.points.back().u;
    std::optional<detail::ArclengthSystem::Corrected> cor;
    detail::ArclengthSystem::Tangent tn;
    while (true) {
      Field zp;
      try {
        zp = P.from_u(uk + ds * t.tu);
      } catch (const DomainError&) {
        zp = Field();
      }
      if (zp.size() > 0) cor = S.correct(zp, lambda + ds * t.tl, uk, lambda, t, ds, controls);
      if (cor) {
        try {
          tn = S.tangent(cor->z, cor->lambda, t.tu, t.tl);
          const double cosang = S.dot(tn.tu, t.tu) + tn.tl * t.tl;
          if (cosang >= controls.min_tangent_cosine) break;
        } catch (const DivergenceError&) {
        }
        cor.reset();
      }
      ds *= 0.5;
      easy = 0;
      if (ds < controls.ds_min) break;
    }
    if (!cor) {
      if (br.points.size() == 1) throw DivergenceError("trace_branch: corrector failed at the first step");
      br.stop = StopReason::StepCollapse;
      break;
    }
    const bool branch_point = tn.bordered_sign != t.bordered_sign && (tn.tl > 0) == (t.tl > 0);
    s += ds;
    z = cor->z;
    lambda = cor->lambda;
    BranchPoint bp = make_point(z, lambda, s, cor->residual, tn.tl);
    if ((tn.tl > 0.0) != (t.tl > 0.0)) {
      bp.fold = true;
      br.fold_indices.push_back(br.points.size());
    }
    const auto reason = stop_reason(bp);
    br.points.push_back(std::move(bp));
    if (branch_point) {
      br.stop = StopReason::BranchPoint;
      break;
    }
    if (reason) {
      br.stop = *reason;
      break;
    }
    t = tn;
    if (cor->iterations <= controls.easy_iterations) {
      if (++easy >= controls.easy_steps_to_grow) {
        ds = std::min(2.0 * ds, controls.ds_max);
        easy = 0;
      }
    } else {
      easy = 0;
    }
  }
  return br;
}

/// Concatenate a branch traced in the -1 direction (reversed) with one traced
/// in the +1 direction from the same start; arclength runs from the left end.
inline Branch join_branches(const Branch& left, const Branch& right) {
  if (left.points.empty() || right.points.empty()) throw std::invalid_argument("join_branches: empty branch");
  Branch out = right;
  out.points.clear();
  out.fold_indices.clear();
  const double total = left.points.back().arclength;
  for (auto it = left.points.rbegin(); it != left.points.rend(); ++it) {
    BranchPoint p = *it;
    p.arclength = total - p.arclength;
    p.tangent_lambda = -p.tangent_lambda;
    p.fold = false;
    out.points.push_back(std::move(p));
  }
  for (std::size_t i = 1; i < right.points.size(); ++i) {
    BranchPoint p = right.points[i];
    p.arclength += total;
    out.points.push_back(std::move(p));
  }
  for (std::size_t i = 1; i < out.points.size(); ++i) {
    auto& p = out.points[i];
    p.fold = (p.tangent_lambda > 0.0) != (out.points[i - 1].tangent_lambda > 0.0);
    if (p.fold) out.fold_indices.push_back(i);
  }
  return out;
}

struct FoldReport {
  bool found = false;
  double lambda_bar = 0.0;
  double lambda_sample_max = 0.0;
  std::size_t index = 0;  // sample attaining the maximum
  std::size_t left = 0;   // bracketing samples
  std::size_t right = 0;
};

/// Largest lambda on the branch, refined by the vertex of the parabola through
/// the maximal sample and its two neighbours (lambda as a function of
/// arclength). |d lambda/ds| <= 1, so the refinement is clamped to
/// [max sample, max sample + adjacent arclength gap].
inline FoldReport detect_fold(const Branch& branch) {
  const auto& pts = branch.points;
  if (pts.size() < 3) throw std::invalid_argument("detect_fold: need at least 3 points");
  std::size_t im = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (pts[i].lambda > pts[im].lambda) im = i;
  FoldReport rep;
  rep.lambda_sample_max = pts[im].lambda;
  if (im == 0 || im + 1 == pts.size()) return rep;
  rep.found = true;
  rep.index = im;
  rep.left = im - 1;
  rep.right = im + 1;
  const double s0 = pts[im - 1].arclength - pts[im].arclength, s2 = pts[im + 1].arclength - pts[im].arclength;
  const double l0 = pts[im - 1].lambda - pts[im].lambda, l2 = pts[im + 1].lambda - pts[im].lambda;
  // lambda - lambda_m = b s + a s^2 through (s0, l0), (0, 0), (s2, l2).
  const double det = s0 * s2 * (s2 - s0);
  double refined = pts[im].lambda;
  if (det != 0.0) {
    const double a = (l2 * s0 - l0 * s2) / det;
    const double b = (l0 * s2 * s2 - l2 * s0 * s0) / det;
    if (a < 0.0) refined = pts[im].lambda - b * b / (4.0 * a);
  }
  const double gap = std::max(std::abs(s0), std::abs(s2));
  rep.lambda_bar = std::clamp(refined, pts[im].lambda, pts[im].lambda + gap);
  return rep;
}

/// Every crossing of `lambda` along the branch, re-converged by Newton at fixed
/// lambda and de-duplicated.
inline std::vector<Solution> solutions_at(const Branch& branch, double lambda, const CoefficientSet& coeffs) {
  const auto& pts = branch.points;
  if (pts.empty()) throw std::invalid_argument("solutions_at: empty branch");
  const double lo = branch.lambda_min(), hi = branch.lambda_max();
  if (lambda < lo) throw std::out_of_range("solutions_at: lambda below the branch range");
  if (lambda > hi) {
    if (pts.size() >= 3 && detect_fold(branch).found) return {};
    throw std::out_of_range("solutions_at: lambda above the branch range");
  }
  const SolverOptions& opts = branch.controls.solver;
  std::vector<Solution> out;
  auto add = [&](const Field& guess) {
    Solution s;
    try {
      s = newton_solve(guess, lambda, coeffs, opts, branch.controls.modified_base);
    } catch (const Error&) {
      return;
    }
    for (const auto& o : out)
      if (sup_norm(o.u - s.u) <= 1e-7 * std::max(1.0, sup_norm(s.u))) return;
    out.push_back(std::move(s));
  };
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].lambda == lambda) add(pts[i].u);
    if (i + 1 == pts.size()) break;
    const double a = pts[i].lambda - lambda, b = pts[i + 1].lambda - lambda;
    if (a * b < 0.0) {
      const double th = a / (a - b);
      add(pts[i].u + th * (pts[i + 1].u - pts[i].u));
    }
  }
  return out;
}

struct ThresholdReport {
  double gamma1 = 0.0;   // first eigenvalue of -Lap phi = gamma cbar phi on the ball
  Field phi;             // eigenfunction on the full mesh (zero off the ball), max 1
  double boundary_term = 0.0;
  double weight_term = 0.0;
  double source_term = 0.0;
  double D = 0.0;
  double P = 0.0;        // sum c+ phi u0
  double lambda_bar = 0.0;
  std::vector<int> ball_nodes;
};

/// Discrete nonexistence threshold. For nodes S of the ball, A_S the Dirichlet
/// 3/5-point operator on S, and phi > 0 solving A_S phi = gamma cbar phi
/// (cbar = min(c+, 1)), summing the equation against phi over S gives for any
/// discrete solution u >= u0 with lambda > gamma
///
///   (lambda - gamma) sum c+ phi u0 <= D
///   D = gamma sum (cbar - c+) phi u0 + sum_{j not in S} u0_j (L phi)_j - sum h phi
///
/// where (L phi)_j = -sum of phi over S-neighbours of j divided by h_e^2.
/// Hence no such solution exists for lambda > gamma + max(D, 0) / P.
inline ThresholdReport nonexistence_threshold(const CoefficientSet& c, const Mesh& mesh, const Region& ball,
                                              const Field& u0) {
  if (u0.size() != mesh.size()) throw std::invalid_argument("nonexistence_threshold: u0 size mismatch");
  ThresholdReport rep;
  rep.ball_nodes = region_indices(mesh, ball);
  const auto& S = rep.ball_nodes;
  if (S.empty()) throw HypothesisError("nonexistence_threshold: ball contains no nodes");
  std::vector<int> local(static_cast<std::size_t>(mesh.size()), -1);
  for (std::size_t i = 0; i < S.size(); ++i) {
    const int k = S[i];
    if (mesh.is_boundary(k)) throw HypothesisError("nonexistence_threshold: ball touches the domain boundary");
    if (c.c_minus[k] != 0.0) throw HypothesisError("nonexistence_threshold: c- does not vanish on the ball");
    if (c.mu[k] < 0.0) throw HypothesisError("nonexistence_threshold: mu < 0 on the ball");
    local[static_cast<std::size_t>(k)] = static_cast<int>(i);
  }
  const int n = static_cast<int>(S.size());
  const double ihx2 = 1.0 / (mesh.hx() * mesh.hx());
  const double ihy2 = mesh.dimension() == 2 ? 1.0 / (mesh.hy() * mesh.hy()) : 0.0;
  auto neighbours = [&](int k) {
    std::vector<std::pair<int, double>> nb{{k - 1, ihx2}, {k + 1, ihx2}};
    if (mesh.dimension() == 2) {
      nb.emplace_back(k - mesh.nx(), ihy2);
      nb.emplace_back(k + mesh.nx(), ihy2);
    }
    return nb;
  };
  std::vector<Eigen::Triplet<double>> t;
  Field cbar(n);
  for (int i = 0; i < n; ++i) {
    const int k = S[static_cast<std::size_t>(i)];
    cbar[i] = std::min(c.c_plus[k], 1.0);
    t.emplace_back(i, i, 2.0 * (ihx2 + ihy2));
    for (auto [j, w] : neighbours(k))
      if (local[static_cast<std::size_t>(j)] >= 0) t.emplace_back(i, local[static_cast<std::size_t>(j)], -w);
  }
  if (!(cbar.maxCoeff() > 0.0)) throw HypothesisError("nonexistence_threshold: c+ vanishes on the ball");
  SparseMatrix A(n, n);
  A.setFromTriplets(t.begin(), t.end());
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw Error("nonexistence_threshold: factorization failed");

  Field phi = Field::Ones(n);
  double gamma = 0.0;
  for (int it = 0; it < 20000; ++it) {
    Field next = lu.solve(cbar.cwiseProduct(phi));
    next /= next.cwiseAbs().maxCoeff();
    const double g = next.dot(A * next) / next.dot(cbar.cwiseProduct(next));
    const bool done = it > 2 && std::abs(g - gamma) <= 1e-14 * g && sup_norm(next - phi) <= 1e-12;
    phi = next;
    gamma = g;
    if (done) break;
  }
  if (phi.minCoeff() <= 0.0) throw Error("nonexistence_threshold: eigenfunction not positive");

  rep.gamma1 = gamma;
  rep.phi = Field::Zero(mesh.size());
  for (int i = 0; i < n; ++i) rep.phi[S[static_cast<std::size_t>(i)]] = phi[i];
  for (int i = 0; i < n; ++i) {
    const int k = S[static_cast<std::size_t>(i)];
    rep.weight_term += gamma * (cbar[i] - c.c_plus[k]) * phi[i] * u0[k];
    rep.source_term -= c.h[k] * phi[i];
    rep.P += c.c_plus[k] * phi[i] * u0[k];
    for (auto [j, w] : neighbours(k))
      if (local[static_cast<std::size_t>(j)] < 0) rep.boundary_term -= w * phi[i] * u0[j];
  }
  if (!(rep.P > 0.0)) throw HypothesisError("nonexistence_threshold: c+ u0 vanishes on the ball");
  rep.D = rep.weight_term + rep.boundary_term + rep.source_term;
  rep.lambda_bar = gamma + std::max(rep.D, 0.0) / rep.P;
  return rep;
}

}  // namespace qgrad
