#pragma once

#include "qgrad/coefficients.hpp"
#include "qgrad/common.hpp"
#include "qgrad/mesh.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <cmath>
#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qgrad {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class Variable { DirectU, ColeHopf };

inline const char* to_string(Variable v) { return v == Variable::DirectU ? "direct-u" : "cole-hopf"; }

struct SolverOptions {
  double newton_tol = 1e-10;
  int max_iter = 50;
  double damping = 0.5;  // backtracking factor
  Variable variable = Variable::DirectU;
  double armijo = 1e-4;
  int max_backtracks = 40;

  void validate() const {
    if (!(newton_tol > 0.0)) throw std::invalid_argument("newton_tol must be positive");
    if (!(damping > 0.0 && damping < 1.0)) throw std::invalid_argument("damping must lie in (0, 1)");
    if (max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
  }
};

struct Solution {
  Field u;
  double lambda = 0.0;
  double residual_norm = 0.0;
  int newton_iterations = 0;
  int jacobian_signature = 0;
};

inline Field cole_hopf_forward(const Field& u, double mu_i) {
  if (!(mu_i > 0.0)) throw std::invalid_argument("cole_hopf_forward: mu_i must be positive");
  std::vector<int> bad;
  for (int k = 0; k < u.size(); ++k)
    if (!(mu_i * u[k] <= 700.0)) bad.push_back(k);
  if (!bad.empty()) throw DomainError("cole_hopf_forward: mu*u exceeds 700 (overflow)", bad);
  Field w(u.size());
  for (int k = 0; k < u.size(); ++k) w[k] = std::expm1(mu_i * u[k]) / mu_i;
  return w;
}

inline Field cole_hopf_inverse(const Field& w, double mu_i) {
  if (!(mu_i > 0.0)) throw std::invalid_argument("cole_hopf_inverse: mu_i must be positive");
  std::vector<int> bad;
  for (int k = 0; k < w.size(); ++k)
    if (!(1.0 + mu_i * w[k] > 0.0) || !std::isfinite(w[k])) bad.push_back(k);
  if (!bad.empty()) throw DomainError("cole_hopf_inverse: 1 + mu*w <= 0", bad);
  Field u(w.size());
  for (int k = 0; k < w.size(); ++k) u[k] = std::log1p(mu_i * w[k]) / mu_i;
  return u;
}

/// C^1 ramp approximating max(v, 0): exact for v >= 0, quadratic on (-width, 0),
/// constant -width/2 below.
struct Ramp {
  double width = 1e-6;
  double value(double v) const {
    if (v >= 0.0) return v;
    if (v <= -width) return -0.5 * width;
    return (v + width) * (v + width) / (2.0 * width) - 0.5 * width;
  }
  double slope(double v) const {
    if (v >= 0.0) return 1.0;
    if (v <= -width) return 0.0;
    return (v + width) / width;
  }
};

/// Discretization of the boundary-value problem at fixed coefficients.
///
/// The unknown z is u itself (direct-u) or w = (e^{mu2 u} - 1)/mu2 (cole-hopf).
/// With E = 1 + mu2 w and u = g(w) the interior residual is
///
///   R = -Lap_h z - E (F(u) + h) - (mu - mu2) |grad_h z|^2 / E
///
/// which for mu2 = 0 is the direct residual. F(u) = (lambda c+ - c-) u, or in
/// the modified mode (m + 1) ubar - u with ubar = ramp(u - u0) + u0. Boundary
/// rows are R_k = z_k.
class DiscreteProblem {
 public:
  DiscreteProblem(const CoefficientSet& coeffs, Variable variable, std::optional<Field> modified_u0 = std::nullopt,
                  double ramp_width = 1e-6)
      : c_(coeffs), variable_(variable), u0_(std::move(modified_u0)), ramp_{ramp_width} {
    if (!c_.mesh) throw std::invalid_argument("coefficient set has no mesh");
    if (variable_ == Variable::ColeHopf) {
      if (!(c_.mu2 > 0.0)) throw std::invalid_argument("cole-hopf mode needs max mu > 0");
      mu2_ = c_.mu2;
    }
    if (u0_ && u0_->size() != c_.mesh->size()) throw std::invalid_argument("modified-problem u0 has wrong size");
  }

  const Mesh& mesh() const { return *c_.mesh; }
  const CoefficientSet& coeffs() const { return c_; }
  Variable variable() const { return variable_; }
  double transform_mu() const { return mu2_; }
  bool modified() const { return u0_.has_value(); }

  Field to_u(const Field& z) const { return variable_ == Variable::DirectU ? z : cole_hopf_inverse(z, mu2_); }
  Field from_u(const Field& u) const { return variable_ == Variable::DirectU ? u : cole_hopf_forward(u, mu2_); }

  bool in_domain(const Field& z) const {
    for (int k = 0; k < z.size(); ++k) {
      if (!std::isfinite(z[k])) return false;
      if (variable_ == Variable::ColeHopf && !(1.0 + mu2_ * z[k] > 1e-300)) return false;
    }
    return true;
  }

  /// 1/E per node: multiplies formulation residuals back to u-units.
  Field row_scale(const Field& z) const {
    Field s = Field::Ones(z.size());
    if (variable_ == Variable::ColeHopf)
      for (int k = 0; k < z.size(); ++k) s[k] = 1.0 / (1.0 + mu2_ * z[k]);
    return s;
  }

  Field residual(const Field& z, double lambda) const {
    const Mesh& m = mesh();
    Field r(z.size());
    for (int k : m.boundary()) r[k] = z[k];
    for (int k : m.interior()) r[k] = node(z, lambda, k).r;
    return r;
  }

  SparseMatrix jacobian(const Field& z, double lambda) const {
    const Mesh& m = mesh();
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(z.size()) * (m.dimension() == 1 ? 3 : 5));
    for (int k : m.boundary()) t.emplace_back(k, k, 1.0);
    for (int k : m.interior()) {
      const NodeEval e = node(z, lambda, k);
      t.emplace_back(k, k, e.diag);
      t.emplace_back(k, k - 1, e.west);
      t.emplace_back(k, k + 1, e.east);
      if (m.dimension() == 2) {
        t.emplace_back(k, k - m.nx(), e.south);
        t.emplace_back(k, k + m.nx(), e.north);
      }
    }
    SparseMatrix J(z.size(), z.size());
    J.setFromTriplets(t.begin(), t.end());
    return J;
  }

  /// Partial derivative of the residual with respect to lambda.
  Field d_lambda(const Field& z, double lambda) const {
    const Mesh& m = mesh();
    Field d = Field::Zero(z.size());
    for (int k : m.interior()) d[k] = node(z, lambda, k).r_lambda;
    return d;
  }

  /// Rounding floor for the scaled residual: 64 eps times the largest term of
  /// any row, in u-units. Far up a blow-up branch this exceeds newton_tol.
  double residual_floor(const Field& z, double lambda) const {
    double m = 0.0;
    for (int k : mesh().interior()) m = std::max(m, node(z, lambda, k).magnitude);
    return 64.0 * std::numeric_limits<double>::epsilon() * m;
  }

  /// Largest cell Peclet number |mu - mu2| |d_i u| h_i of the first-order
  /// gradient term. Above 1 the centred scheme is no longer monotone.
  double cell_peclet(const Field& z) const {
    const Mesh& m = mesh();
    double pe = 0.0;
    for (int k : m.interior()) {
      const double E = 1.0 + mu2_ * z[k];
      const double cg = std::abs(c_.mu[k] - mu2_);
      pe = std::max(pe, cg * std::abs(z[k + 1] - z[k - 1]) / (2.0 * E));
      if (m.dimension() == 2) pe = std::max(pe, cg * std::abs(z[k + m.nx()] - z[k - m.nx()]) / (2.0 * E));
    }
    return pe;
  }

  /// Sup-norm of the residual in u-units (interior rows divided by E).
  double scaled_norm(const Field& z, double lambda) const {
    const Field r = residual(z, lambda);
    return sup_norm(r.cwiseProduct(row_scale(z)));
  }

 private:
  struct NodeEval {
    double r = 0, diag = 0, west = 0, east = 0, south = 0, north = 0, r_lambda = 0;
    double magnitude = 0;  // sum of absolute terms over E
  };

  NodeEval node(const Field& z, double lambda, int k) const {
    const Mesh& m = mesh();
    const double ihx2 = 1.0 / (m.hx() * m.hx());
    const double zc = z[k], zw = z[k - 1], ze = z[k + 1];
    double lap = (2.0 * zc - zw - ze) * ihx2;
    double diag_lap = 2.0 * ihx2;
    const double gx = (ze - zw) / (2.0 * m.hx());
    double gy = 0.0, zs = 0.0, zn = 0.0, ihy2 = 0.0;
    if (m.dimension() == 2) {
      ihy2 = 1.0 / (m.hy() * m.hy());
      zs = z[k - m.nx()];
      zn = z[k + m.nx()];
      lap += (2.0 * zc - zs - zn) * ihy2;
      diag_lap += 2.0 * ihy2;
      gy = (zn - zs) / (2.0 * m.hy());
    }
    const double E = 1.0 + mu2_ * zc;
    // Gradient in u-units (grad w / E) keeps |grad w|^2 / E finite far up a blow-up branch.
    const double sx = gx / E, sy = gy / E;
    const double sgrad2 = sx * sx + sy * sy;
    const double u = variable_ == Variable::DirectU ? zc : std::log1p(mu2_ * zc) / mu2_;
    const double mk = lambda * c_.c_plus[k] - c_.c_minus[k];
    double F, dF, ubar;
    if (u0_) {
      const double v = u - (*u0_)[k];
      ubar = ramp_.value(v) + (*u0_)[k];
      F = (mk + 1.0) * ubar - u;
      dF = (mk + 1.0) * ramp_.slope(v) - 1.0;
    } else {
      ubar = u;
      F = mk * u;
      dF = mk;
    }
    const double cg = c_.mu[k] - mu2_;
    const double hk = c_.h[k];

    NodeEval e;
    e.r = lap - E * (F + hk) - cg * E * sgrad2;
    e.magnitude = (diag_lap * std::abs(zc) + (std::abs(zc - zw) + std::abs(zc - ze)) * ihx2 +
                   (std::abs(zc - zs) + std::abs(zc - zn)) * ihy2) /
                      E +
                  std::abs(F) + std::abs(hk) + std::abs(cg) * sgrad2;
    e.diag = diag_lap - mu2_ * (F + hk) - dF + cg * sgrad2 * mu2_;
    const double ax = cg * sx / m.hx();
    e.west = -ihx2 + ax;
    e.east = -ihx2 - ax;
    if (m.dimension() == 2) {
      const double ay = cg * sy / m.hy();
      e.south = -ihy2 + ay;
      e.north = -ihy2 - ay;
    }
    e.r_lambda = -E * c_.c_plus[k] * ubar;
    return e;
  }

  CoefficientSet c_;
  Variable variable_;
  std::optional<Field> u0_;
  Ramp ramp_;
  double mu2_ = 0.0;
};

/// Direct-u residual: -Lap_h u - (lambda c+ - c-) u - mu |grad_h u|^2 - h at
/// interior nodes, u_k at boundary nodes.
inline Field residual(const Field& u, double lambda, const CoefficientSet& coeffs) {
  return DiscreteProblem(coeffs, Variable::DirectU).residual(u, lambda);
}

inline SparseMatrix jacobian(const Field& u, double lambda, const CoefficientSet& coeffs) {
  return DiscreteProblem(coeffs, Variable::DirectU).jacobian(u, lambda);
}

/// Sign of det(J) from a sparse LU factorization; 0 if singular.
inline int jacobian_sign(const SparseMatrix& J) {
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(J);
  if (lu.info() != Eigen::Success) return 0;
  return static_cast<int>(lu.signDeterminant());
}

using Projector = std::function<void(Field& z)>;

namespace detail {

struct NewtonResult {
  Field z;
  double residual_norm = 0.0;
  int iterations = 0;
  int signature = 0;
};

inline NewtonResult newton(const DiscreteProblem& P, Field z, double lambda, const SolverOptions& opts,
                           const Projector& project = {}) {
  opts.validate();
  if (project) project(z);
  if (!P.in_domain(z)) throw DomainError("newton: initial state outside transform domain", {});
  auto scaled = [&](const Field& zz) -> Field { return P.residual(zz, lambda).cwiseProduct(P.row_scale(zz)); };
  Field r = scaled(z);
  double norm = sup_norm(r);
  Eigen::SparseLU<SparseMatrix> lu;
  int it = 0;
  while (norm > std::max(opts.newton_tol, P.residual_floor(z, lambda))) {
    if (it >= opts.max_iter)
      throw DivergenceError("newton: no convergence after " + std::to_string(opts.max_iter) +
                            " iterations (residual " + std::to_string(norm) + ")");
    const Field rs = P.row_scale(z);
    SparseMatrix J = rs.asDiagonal() * P.jacobian(z, lambda);
    lu.compute(J);
    if (lu.info() != Eigen::Success) throw DivergenceError("newton: singular Jacobian");
    const Field dz = lu.solve(-r);
    if (!dz.allFinite()) throw DivergenceError("newton: non-finite update");
    double t = 1.0;
    bool accepted = false;
    bool domain_hit = false;
    for (int b = 0; b <= opts.max_backtracks; ++b, t *= opts.damping) {
      Field trial = z + t * dz;
      if (project) project(trial);
      if (!P.in_domain(trial)) {
        domain_hit = true;
        continue;
      }
      const Field rt = scaled(trial);
      const double nt = sup_norm(rt);
      if (std::isfinite(nt) && nt <= (1.0 - opts.armijo * t) * norm) {
        z = std::move(trial);
        r = rt;
        norm = nt;
        accepted = true;
        break;
      }
    }
    ++it;
    if (!accepted) {
      if (domain_hit) throw DomainError("newton: line search left the transform domain (w <= -1/mu)", {});
      throw DivergenceError("newton: line search failure (residual " + std::to_string(norm) + ")");
    }
  }
  NewtonResult out;
  out.residual_norm = norm;
  out.iterations = it;
  out.signature = jacobian_sign(P.jacobian(z, lambda));
  out.z = std::move(z);
  return out;
}

}  // namespace detail

/// Damped Newton solve starting from u0 (given in u-units, whatever the mode).
inline Solution newton_solve(const Field& u0, double lambda, const CoefficientSet& coeffs, const SolverOptions& opts,
                             std::optional<Field> modified_u0 = std::nullopt) {
  DiscreteProblem P(coeffs, opts.variable, std::move(modified_u0));
  auto res = detail::newton(P, P.from_u(u0), lambda, opts);
  Solution s;
  s.u = P.to_u(res.z);
  for (int k : P.mesh().boundary()) s.u[k] = 0.0;
  s.lambda = lambda;
  s.residual_norm = res.residual_norm;
  s.newton_iterations = res.iterations;
  s.jacobian_signature = res.signature;
  return s;
}

struct SolutionCheck {
  bool passed = true;
  std::vector<int> violations;
  double worst = 0.0;  // most adverse residual value seen
};

namespace detail {
inline SolutionCheck check_sign(const Field& v, double lambda, const CoefficientSet& coeffs, double tol,
                                Variable variable, bool lower) {
  DiscreteProblem P(coeffs, variable);
  const Mesh& m = P.mesh();
  Field z;
  try {
    z = P.from_u(v);
  } catch (const DomainError& e) {
    return {false, e.nodes(), std::numeric_limits<double>::infinity()};
  }
  const Field r = P.residual(z, lambda).cwiseProduct(P.row_scale(z));
  SolutionCheck c;
  c.worst = -std::numeric_limits<double>::infinity();
  for (int k : m.interior()) {
    const double adverse = lower ? r[k] : -r[k];
    c.worst = std::max(c.worst, adverse);
    if (adverse > tol) c.violations.push_back(k);
  }
  for (int k : m.boundary()) {
    const double adverse = lower ? v[k] : -v[k];
    if (adverse > tol) c.violations.push_back(k);
  }
  c.passed = c.violations.empty();
  return c;
}
}  // namespace detail

/// Lower solution: residual <= tol at interior nodes and alpha <= 0 on the boundary.
/// In cole-hopf mode the residual is the transformed one, in u-units.
inline SolutionCheck check_lower_solution(const Field& alpha, double lambda, const CoefficientSet& coeffs,
                                          double tol = 1e-8, Variable variable = Variable::DirectU) {
  return detail::check_sign(alpha, lambda, coeffs, tol, variable, true);
}

inline SolutionCheck check_upper_solution(const Field& beta, double lambda, const CoefficientSet& coeffs,
                                          double tol = 1e-8, Variable variable = Variable::DirectU) {
  return detail::check_sign(beta, lambda, coeffs, tol, variable, false);
}

/// Solve between an ordered lower/upper pair for lambda <= 0. Newton is started
/// from both alpha and beta with every iterate projected onto [alpha, beta].
inline Solution monotone_iterate(const Field& alpha, const Field& beta, double lambda, const CoefficientSet& coeffs,
                                 const SolverOptions& opts, double tol = 1e-8) {
  if (lambda > 0.0) throw std::invalid_argument("monotone_iterate: requires lambda <= 0");
  if (alpha.size() != beta.size() || alpha.size() != coeffs.mesh->size())
    throw std::invalid_argument("monotone_iterate: size mismatch");
  for (int k = 0; k < alpha.size(); ++k)
    if (alpha[k] > beta[k] + tol) throw HypothesisError("monotone_iterate: alpha > beta at node " + std::to_string(k));
  if (!check_lower_solution(alpha, lambda, coeffs, tol, opts.variable).passed)
    throw HypothesisError("monotone_iterate: alpha is not a lower solution");
  if (!check_upper_solution(beta, lambda, coeffs, tol, opts.variable).passed)
    throw HypothesisError("monotone_iterate: beta is not an upper solution");

  DiscreteProblem P(coeffs, opts.variable);
  const Field za = P.from_u(alpha), zb = P.from_u(beta);
  Projector clamp = [&](Field& z) { z = z.cwiseMax(za).cwiseMin(zb); };
  // Boundary rows force z = 0 there; keep the box consistent with that.
  auto run = [&](const Field& start) { return detail::newton(P, start, lambda, opts, clamp); };

  auto from_beta = run(zb);
  auto from_alpha = run(za);
  Field ub = P.to_u(from_beta.z), ua = P.to_u(from_alpha.z);
  for (int k = 0; k < ub.size(); ++k) {
    if (ub[k] < alpha[k] - tol || ub[k] > beta[k] + tol)
      throw Error("monotone_iterate: ordering lost at node " + std::to_string(k));
  }
  if (sup_norm(ub - ua) > std::max(tol, 1e3 * opts.newton_tol))
    throw Error("monotone_iterate: iterations from alpha and beta reached different solutions");
  Solution s;
  s.u = ub;
  s.lambda = lambda;
  s.residual_norm = from_beta.residual_norm;
  s.newton_iterations = from_beta.iterations;
  s.jacobian_signature = from_beta.signature;
  return s;
}

}  // namespace qgrad
