#pragma once

// Certificates for the a priori bounds: a global bound over a lambda interval
// built from a traced branch, the reduction of the bound to Omega_+, and the
// local interior/boundary bounds obtained through the exponential transform.

#include "qgrad/continuation.hpp"
#include "qgrad/parallel.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace qgrad {

struct Witness {
  double lambda = 0.0;
  double sup_u = 0.0;           // sup of the re-solved solution
  double residual_norm = 0.0;   // of the re-solve
  bool from_branch_point = true;  // false: interpolated at an interval endpoint
};

struct BoundCertificate {
  double lambda_lo = 0.0;
  double lambda_hi = 0.0;
  double M = 0.0;
  double inflation = 1.1;
  std::vector<Witness> witnesses;
  bool verdict = false;
};

/// Empirical bound M = inflation * max sup u over every branch solution with
/// lambda in [lo, hi] (plus solutions interpolated at the endpoints). Every
/// witness is re-solved before it is checked against M.
inline BoundCertificate check_global_bound(const Branch& branch, double lo, double hi, const CoefficientSet& coeffs,
                                           double inflation = 1.1, int threads = 1) {
  if (!(lo > 0.0) || !(hi > lo)) throw std::invalid_argument("check_global_bound: need 0 < lambda_lo < lambda_hi");
  if (branch.points.empty()) throw std::invalid_argument("check_global_bound: empty branch");
  const auto fold = detect_fold(branch);
  const double reach = fold.found ? std::max(branch.lambda_max(), fold.lambda_bar) : branch.lambda_max();
  // Past a fold the returning sheet must itself come back below lo.
  double floor = branch.lambda_min();
  if (fold.found) {
    floor = std::numeric_limits<double>::infinity();
    for (std::size_t i = fold.index; i < branch.points.size(); ++i) floor = std::min(floor, branch.points[i].lambda);
  }
  if (floor > lo || reach < hi)
    throw DomainError("check_global_bound: branch covers [" + std::to_string(floor) + ", " +
                          std::to_string(reach) + "], not the requested interval",
                      {});
  struct Seed {
    double lambda;
    Field u;
    bool branch_point;
  };
  std::vector<Seed> seeds;
  for (const auto& p : branch.points)
    if (p.lambda >= lo && p.lambda <= hi) seeds.push_back({p.lambda, p.u, true});
  for (double lam : {lo, hi})
    if (lam <= branch.lambda_max())
      for (const auto& s : solutions_at(branch, lam, coeffs)) seeds.push_back({lam, s.u, false});

  BoundCertificate cert;
  cert.lambda_lo = lo;
  cert.lambda_hi = hi;
  cert.inflation = inflation;
  cert.witnesses.resize(seeds.size());
  parallel_for(seeds.size(), threads, [&](std::size_t i) {
    const auto sol = newton_solve(seeds[i].u, seeds[i].lambda, coeffs, branch.controls.solver);
    cert.witnesses[i] = {seeds[i].lambda, sup_norm(sol.u.cwiseMax(0.0)), sol.residual_norm, seeds[i].branch_point};
  });
  double top = 0.0;
  for (const auto& p : branch.points)
    if (p.lambda >= lo && p.lambda <= hi) top = std::max(top, p.u.maxCoeff());
  for (const auto& w : cert.witnesses)
    if (!w.from_branch_point) top = std::max(top, w.sup_u);
  cert.M = inflation * top;
  cert.verdict = !cert.witnesses.empty();
  for (const auto& w : cert.witnesses) cert.verdict = cert.verdict && w.sup_u <= cert.M;
  return cert;
}

struct ReductionReport {
  double M = 0.0;              // 2 sup |reference|
  double sup_plus = 0.0;       // sup over Omega_+ of u^+
  double sup_minus = 0.0;      // sup over Omega_+ of u^-
  double upper_slack = 0.0;    // min over nodes of (sup_plus + M - u)
  double lower_slack = 0.0;    // min over nodes of (u + sup_minus + M)
  std::vector<int> violations;
  bool passed = false;
};

/// -sup_{O+} u^- - M <= u <= sup_{O+} u^+ + M nodewise with M = 2 sup|reference|.
inline ReductionReport check_omega_plus_reduction(const Field& u, const Field& reference, const CoefficientSet& coeffs,
                                                  double tol = 1e-10) {
  if (u.size() != reference.size() || u.size() != coeffs.c_plus.size())
    throw std::invalid_argument("check_omega_plus_reduction: size mismatch");
  const auto plus = coeffs.omega_plus();
  if (plus.empty()) throw HypothesisError("check_omega_plus_reduction: Omega_+ is empty");
  ReductionReport r;
  r.M = 2.0 * sup_norm(reference);
  for (int k : plus) {
    r.sup_plus = std::max(r.sup_plus, positive_part(u[k]));
    r.sup_minus = std::max(r.sup_minus, negative_part(u[k]));
  }
  r.upper_slack = r.lower_slack = std::numeric_limits<double>::infinity();
  const double scale = tol * (1.0 + sup_norm(u));
  for (int k = 0; k < u.size(); ++k) {
    const double up = r.sup_plus + r.M - u[k], down = u[k] + r.sup_minus + r.M;
    r.upper_slack = std::min(r.upper_slack, up);
    r.lower_slack = std::min(r.lower_slack, down);
    if (up < -scale || down < -scale) r.violations.push_back(k);
  }
  r.passed = r.violations.empty();
  return r;
}

// ---------------------------------------------------------------------------
// Local bounds

struct LocalPoint {
  int node = -1;
  Point xbar;
  double R = 0.0;
  bool interior = true;   // B_4R(xbar) inside the domain; otherwise the boundary case
  int subdomain_nodes = 0;
  double z2_min = 0.0;
  double z2_max = 0.0;
  double v1_min = 0.0;
  double residual_min = 0.0;  // of the v1 inequality, relative to its local scale
  double local_sup = 0.0;     // sup u over B_R(xbar) cap domain
  bool passed = false;
};

struct LocalBoundsReport {
  double lambda = 0.0;
  double lambda_lo = 0.0;
  double lambda_hi = 0.0;
  double M = 0.0;
  std::vector<LocalPoint> points;
  bool passed = false;
};

struct LocalBoundsOptions {
  /// Tolerance for the v1 inequality residual relative to the magnitude of
  /// its terms.
  double residual_tol = 1e-10;
  int subsample_2d = 10;
  int threads = 1;
};

namespace detail {

/// Centres at which the local bounds are evaluated: the nodes with c+ > 0 and
/// the domain-boundary nodes touching them; all of them in 1D, a lattice
/// subsample in 2D.
inline std::vector<int> local_bound_centres(const Mesh& m, const CoefficientSet& c, int sub) {
  std::vector<char> in(static_cast<std::size_t>(m.size()), 0);
  for (int k : c.omega_plus()) {
    in[static_cast<std::size_t>(k)] = 1;
    const int i = m.col(k), j = m.row(k);
    for (int dj = -1; dj <= 1; ++dj)
      for (int di = -1; di <= 1; ++di) {
        const int ii = i + di, jj = j + dj;
        if (ii < 0 || ii >= m.nx() || jj < 0 || jj >= m.ny()) continue;
        if (m.dimension() == 1 && dj != 0) continue;
        // Closure points are only added on the boundary of the domain.
        if (m.is_boundary(m.index(ii, jj))) in[static_cast<std::size_t>(m.index(ii, jj))] = 1;
      }
  }
  std::vector<int> all;
  for (int k = 0; k < m.size(); ++k)
    if (in[static_cast<std::size_t>(k)]) all.push_back(k);
  if (m.dimension() == 1 || all.empty()) return all;
  int i0 = m.nx(), i1 = 0, j0 = m.ny(), j1 = 0;
  for (int k : all) {
    i0 = std::min(i0, m.col(k)), i1 = std::max(i1, m.col(k));
    j0 = std::min(j0, m.row(k)), j1 = std::max(j1, m.row(k));
  }
  std::vector<int> out;
  for (int b = 0; b < sub; ++b)
    for (int a = 0; a < sub; ++a) {
      const int i = sub == 1 ? (i0 + i1) / 2 : i0 + (i1 - i0) * a / (sub - 1);
      const int j = sub == 1 ? (j0 + j1) / 2 : j0 + (j1 - j0) * b / (sub - 1);
      const int k = m.index(i, j);
      if (in[static_cast<std::size_t>(k)] && (out.empty() || out.back() != k)) out.push_back(k);
    }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Interior mesh nodes of the open ball B_r(c).
inline std::vector<int> ball_interior_nodes(const Mesh& m, const Point& c, double r) {
  std::vector<int> out;
  for (int k : region_indices(m, Region::ball(c, r)))
    if (!m.is_boundary(k)) out.push_back(k);
  return out;
}

inline std::vector<Eigen::Index> neighbours(const Mesh& m, int k) {
  std::vector<Eigen::Index> nb{k - 1, k + 1};
  if (m.dimension() == 2) {
    nb.push_back(k - m.nx());
    nb.push_back(k + m.nx());
  }
  return nb;
}

inline double neg_laplacian(const Mesh& m, const Field& v, int k) {
  double r = (2.0 * v[k] - v[k - 1] - v[k + 1]) / (m.hx() * m.hx());
  if (m.dimension() == 2) r += (2.0 * v[k] - v[k - m.nx()] - v[k + m.nx()]) / (m.hy() * m.hy());
  return r;
}

/// Sum of the absolute stencil contributions of -Lap v at k.
inline double stencil_magnitude(const Mesh& m, const Field& v, int k) {
  double r = (2.0 * std::abs(v[k]) + std::abs(v[k - 1]) + std::abs(v[k + 1])) / (m.hx() * m.hx());
  if (m.dimension() == 2) r += (2.0 * std::abs(v[k]) + std::abs(v[k - m.nx()]) + std::abs(v[k + m.nx()])) / (m.hy() * m.hy());
  return r;
}

/// Solves -Lap z + q z = f on the node set S with z = 0 off S.
inline Field subdomain_dirichlet(const Mesh& m, const std::vector<int>& S, const Field& q, const Field& f) {
  std::vector<int> local(static_cast<std::size_t>(m.size()), -1);
  for (std::size_t i = 0; i < S.size(); ++i) local[static_cast<std::size_t>(S[i])] = static_cast<int>(i);
  const double ix = 1.0 / (m.hx() * m.hx()), iy = m.dimension() == 2 ? 1.0 / (m.hy() * m.hy()) : 0.0;
  std::vector<Eigen::Triplet<double>> t;
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(S.size()));
  for (std::size_t i = 0; i < S.size(); ++i) {
    const int k = S[i];
    t.emplace_back(static_cast<int>(i), static_cast<int>(i), 2.0 * ix + 2.0 * iy + q[k]);
    const auto nb = neighbours(m, k);
    for (std::size_t n = 0; n < nb.size(); ++n) {
      const int j = local[static_cast<std::size_t>(nb[n])];
      if (j >= 0) t.emplace_back(static_cast<int>(i), j, n < 2 ? -ix : -iy);
    }
    rhs[static_cast<Eigen::Index>(i)] = f[k];
  }
  Eigen::SparseMatrix<double> A(static_cast<Eigen::Index>(S.size()), static_cast<Eigen::Index>(S.size()));
  A.setFromTriplets(t.begin(), t.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw Error("subdomain_dirichlet: factorization failed");
  const Eigen::VectorXd zs = ldlt.solve(rhs);
  Field z = Field::Zero(m.size());
  for (std::size_t i = 0; i < S.size(); ++i) z[S[i]] = zs[static_cast<Eigen::Index>(i)];
  return z;
}

struct LocalGeometry {
  double R = 0.0;
  bool interior = true;
  std::vector<int> sub;  // Omega_1 = interior nodes of B_4R(xbar)
};

/// Largest radius on a geometric ladder (ratio 0.9, down to half a mesh
/// spacing) for which mu >= mu1 and c- = 0 on
/// B_4R(xbar) and c+ is nontrivial on B_R(xbar). The interior case
/// (B_4R inside the domain) is preferred.
inline LocalGeometry local_geometry(const Mesh& m, const CoefficientSet& c, const Point& xbar) {
  const Point lo = m.lower(), hi = m.upper();
  const double side = m.dimension() == 1 ? hi.x - lo.x : std::min(hi.x - lo.x, hi.y - lo.y);
  const double hmax = m.dimension() == 1 ? m.hx() : std::max(m.hx(), m.hy());
  auto admissible = [&](double R, std::vector<int>& sub) {
    sub = ball_interior_nodes(m, xbar, 4.0 * R);
    if (sub.empty()) return false;
    for (int k : sub)
      if (c.mu[k] < c.mu1 || c.c_minus[k] != 0.0) return false;
    for (int k : region_indices(m, Region::ball(xbar, R)))
      if (c.c_plus[k] > 0.0) return true;
    return false;
  };
  for (bool interior : {true, false})
    for (double R = side / 8.0; R >= 0.5 * hmax; R *= 0.9) {
      if (interior && m.distance_to_boundary(xbar) < 4.0 * R) continue;
      LocalGeometry g{R, interior, {}};
      if (admissible(R, g.sub)) return g;
    }
  throw HypothesisError("check_local_bounds: collar conditions unavailable at (" + std::to_string(xbar.x) + ", " +
                        std::to_string(xbar.y) + ")");
}

}  // namespace detail

/// Runs the local-bound argument at every sampled centre xbar of the closure
/// of Omega_+: w1 = (e^{mu1 u} - 1)/mu1, z2 solving
/// -Lap z2 + mu1 h^- z2 = -L2 c+ e^{-1}/mu1 on Omega_1 = B_4R(xbar) cap domain,
/// v1 = w1 - z2 + 1/mu1. Checks z2 <= 0, v1 > 0, the inequality
/// -Lap v1 + mu1 h^- v1 >= L1 c+ (1 + mu1 w1) g1(w1)^+ on Omega_1, and
/// sup_{B_R(xbar)} u <= M.
inline LocalBoundsReport check_local_bounds(const Field& u, double lambda, const CoefficientSet& coeffs, double lo,
                                            double hi, double M, const LocalBoundsOptions& o = {}) {
  if (!(lo > 0.0) || !(hi > lo)) throw std::invalid_argument("check_local_bounds: need 0 < lambda_lo < lambda_hi");
  if (lambda < lo || lambda > hi) throw std::invalid_argument("check_local_bounds: lambda outside [lambda_lo, lambda_hi]");
  if (!(coeffs.mu1 > 0.0)) throw HypothesisError("check_local_bounds: mu1 must be positive");
  const Mesh& m = coeffs.grid();
  if (u.size() != m.size()) throw std::invalid_argument("check_local_bounds: size mismatch");
  const double mu1 = coeffs.mu1;
  const Field w1 = ((mu1 * u.array()).exp() - 1.0) / mu1;
  const Field hminus = (-coeffs.h).cwiseMax(0.0);
  const Field q = mu1 * hminus;
  const Field f = -hi * std::exp(-1.0) / mu1 * coeffs.c_plus;

  LocalBoundsReport rep;
  rep.lambda = lambda;
  rep.lambda_lo = lo;
  rep.lambda_hi = hi;
  rep.M = M;
  const auto centres = detail::local_bound_centres(m, coeffs, o.subsample_2d);
  if (centres.empty()) throw HypothesisError("check_local_bounds: Omega_+ is empty");
  rep.points.resize(centres.size());
  parallel_for(centres.size(), o.threads, [&](std::size_t idx) {
    LocalPoint pt;
    pt.node = centres[idx];
    pt.xbar = m.node(pt.node);
    const auto geo = detail::local_geometry(m, coeffs, pt.xbar);
    pt.R = geo.R;
    pt.interior = geo.interior;
    pt.subdomain_nodes = static_cast<int>(geo.sub.size());
    const Field z2 = detail::subdomain_dirichlet(m, geo.sub, q, f);
    const Field v1 = w1 - z2 + Field::Constant(m.size(), 1.0 / mu1);
    pt.z2_min = pt.z2_max = z2[geo.sub.front()];
    pt.v1_min = v1[geo.sub.front()];
    pt.residual_min = std::numeric_limits<double>::infinity();
    for (int k : geo.sub) {
      pt.z2_min = std::min(pt.z2_min, z2[k]);
      pt.z2_max = std::max(pt.z2_max, z2[k]);
      pt.v1_min = std::min(pt.v1_min, v1[k]);
      const double e = 1.0 + mu1 * w1[k];
      const double g1 = std::log(e) / mu1;
      const double lhs = detail::neg_laplacian(m, v1, k) + q[k] * v1[k];
      const double rhs = lo * coeffs.c_plus[k] * e * std::max(g1, 0.0);
      // Scale: magnitude of the evaluated terms, so that cancellation in
      // -Lap v1 with v1 ~ e^{mu1 u} is not mistaken for a sign violation.
      const double scale = detail::stencil_magnitude(m, v1, k) + std::abs(q[k] * v1[k]) + std::abs(rhs) + std::abs(f[k]);
      pt.residual_min = std::min(pt.residual_min, (lhs - rhs) / (1.0 + scale));
    }
    pt.local_sup = -std::numeric_limits<double>::infinity();
    for (int k : region_indices(m, Region::ball(pt.xbar, pt.R))) pt.local_sup = std::max(pt.local_sup, u[k]);
    pt.passed = pt.z2_max <= 0.0 && pt.v1_min > 0.0 && pt.residual_min >= -o.residual_tol && pt.local_sup <= M;
    rep.points[idx] = pt;
  });
  rep.passed = std::all_of(rep.points.begin(), rep.points.end(), [](const LocalPoint& p) { return p.passed; });
  return rep;
}

}  // namespace qgrad
