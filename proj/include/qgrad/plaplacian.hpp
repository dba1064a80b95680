#pragma once

// Conservative finite-difference p-Laplacian.
//
// Fluxes live on the faces between neighbouring nodes: q = |G|^{p-2} D with D
// the normal difference quotient across the face and G the face gradient, whose
// tangential component (2D) is the average of the two adjacent centred
// differences. At an interior node i
//
//   (-Lap_p u)_i = sum over faces of the node of (q_in - q_out) / h.
//
// For p = 2 this is exactly the 3-point / 5-point Laplacian.

#include "qgrad/common.hpp"
#include "qgrad/mesh.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace qgrad {

namespace detail {

struct Face {
  int minus = 0;  // node on the low side
  int plus = 0;   // node on the high side
  double h = 1.0;
  // Tangential difference stencil (2D only): T = sum tw[i] * u[tn[i]].
  int n_tan = 0;
  std::array<int, 4> tn{};
  std::array<double, 4> tw{};
};

inline std::vector<Face> faces(const Mesh& m) {
  std::vector<Face> out;
  if (m.dimension() == 1) {
    for (int i = 0; i + 1 < m.nx(); ++i) out.push_back({i, i + 1, m.hx()});
    return out;
  }
  const int nx = m.nx(), ny = m.ny();
  const double qy = 1.0 / (4.0 * m.hy()), qx = 1.0 / (4.0 * m.hx());
  for (int j = 1; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      Face f{m.index(i, j), m.index(i + 1, j), m.hx(), 4, {}, {}};
      f.tn = {m.index(i, j + 1), m.index(i, j - 1), m.index(i + 1, j + 1), m.index(i + 1, j - 1)};
      f.tw = {qy, -qy, qy, -qy};
      out.push_back(f);
    }
  }
  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 1; i + 1 < nx; ++i) {
      Face f{m.index(i, j), m.index(i, j + 1), m.hy(), 4, {}, {}};
      f.tn = {m.index(i + 1, j), m.index(i - 1, j), m.index(i + 1, j + 1), m.index(i - 1, j + 1)};
      f.tw = {qx, -qx, qx, -qx};
      out.push_back(f);
    }
  }
  return out;
}

inline void check_p(double p) {
  if (!(p > 1.0)) throw std::invalid_argument("p-Laplacian: need p > 1, got " + std::to_string(p));
}

/// |s|^{p-2} s with the convention 0 at s = 0.
inline double signed_power(double s, double p) { return s == 0.0 ? 0.0 : std::pow(std::abs(s), p - 2.0) * s; }

}  // namespace detail

/// Interior residual of -Lap_p u + a |u|^{p-2} u - f; zero at boundary nodes.
inline Field p_laplacian_residual(const Mesh& mesh, const Field& u, double p, const Field& a, const Field& f) {
  detail::check_p(p);
  if (u.size() != mesh.size() || a.size() != mesh.size() || f.size() != mesh.size())
    throw std::invalid_argument("p_laplacian_residual: field size mismatch");
  Field r = Field::Zero(mesh.size());
  for (const auto& fc : detail::faces(mesh)) {
    const double D = (u[fc.plus] - u[fc.minus]) / fc.h;
    double T = 0.0;
    for (int t = 0; t < fc.n_tan; ++t) T += fc.tw[t] * u[fc.tn[t]];
    const double G = std::sqrt(D * D + T * T);
    const double q = G == 0.0 ? 0.0 : std::pow(G, p - 2.0) * D;
    r[fc.minus] -= q / fc.h;
    r[fc.plus] += q / fc.h;
  }
  for (int k : mesh.interior()) r[k] += a[k] * detail::signed_power(u[k], p) - f[k];
  for (int k : mesh.boundary()) r[k] = 0.0;
  return r;
}

/// Factorized -Lap_h + diag(a) with homogeneous Dirichlet rows, reusable
/// across right-hand sides (p = 2 sample generation).
class LinearDirichletSolver {
 public:
  LinearDirichletSolver(const Mesh& mesh, const Field& a) : n_(mesh.size()), boundary_(mesh.boundary().begin(), mesh.boundary().end()) {
    std::vector<Eigen::Triplet<double>> t;
    for (int k : mesh.boundary()) t.emplace_back(k, k, 1.0);
    for (int k : mesh.interior()) t.emplace_back(k, k, a[k]);
    for (const auto& fc : detail::faces(mesh)) {
      const double c = 1.0 / (fc.h * fc.h);
      for (auto [row, other] : {std::pair{fc.minus, fc.plus}, std::pair{fc.plus, fc.minus}}) {
        if (mesh.is_boundary(row)) continue;
        t.emplace_back(row, row, c);
        t.emplace_back(row, other, -c);
      }
    }
    SparseMatrix A(n_, n_);
    A.setFromTriplets(t.begin(), t.end());
    lu_.compute(A);
    if (lu_.info() != Eigen::Success) throw Error("LinearDirichletSolver: factorization failed");
  }

  Field solve(Field f) const {
    for (int k : boundary_) f[k] = 0.0;
    return lu_.solve(f);
  }

 private:
  using SparseMatrix = Eigen::SparseMatrix<double>;
  int n_;
  std::vector<int> boundary_;
  Eigen::SparseLU<SparseMatrix> lu_;
};

struct PLaplaceOptions {
  double regularization = 1e-10;  // eps in (|G|^2 + eps^2)^{(p-2)/2}
  double tol = 1e-10;
  int max_iter = 100;
};

/// Solve -Lap_p u + a |u|^{p-2} u = f with zero boundary values by damped
/// Newton on the eps-regularized flux, started from the p = 2 solution.
inline Field solve_p_laplacian(const Mesh& mesh, double p, const Field& a, const Field& f,
                               const PLaplaceOptions& opts = {}) {
  detail::check_p(p);
  using SparseMatrix = Eigen::SparseMatrix<double>;
  Field u = LinearDirichletSolver(mesh, a).solve(f);
  if (p == 2.0) return u;

  const auto fcs = detail::faces(mesh);
  const double e2 = opts.regularization * opts.regularization;
  const double s = 0.5 * (p - 2.0);

  auto assemble = [&](const Field& v, Field& r, SparseMatrix* J) {
    r = Field::Zero(v.size());
    std::vector<Eigen::Triplet<double>> t;
    auto add = [&](int row, int col, double val) {
      if (J && !mesh.is_boundary(row)) t.emplace_back(row, col, val);
    };
    for (const auto& fc : fcs) {
      const double D = (v[fc.plus] - v[fc.minus]) / fc.h;
      double T = 0.0;
      for (int i = 0; i < fc.n_tan; ++i) T += fc.tw[i] * v[fc.tn[i]];
      const double g2 = D * D + T * T + e2;
      const double K = std::pow(g2, s);
      const double dK = s * std::pow(g2, s - 1.0);  // dK/d(g2)
      const double q = K * D;
      r[fc.minus] -= q / fc.h;
      r[fc.plus] += q / fc.h;
      if (!J) continue;
      // dq/du_j = K dD/du_j + dK * 2 (D dD/du_j + T dT/du_j) D
      const double dq_dD = K + 2.0 * dK * D * D;
      const double dq_dT = 2.0 * dK * T * D;
      auto push = [&](int col, double dq) {
        add(fc.minus, col, -dq / fc.h);
        add(fc.plus, col, dq / fc.h);
      };
      push(fc.plus, dq_dD / fc.h);
      push(fc.minus, -dq_dD / fc.h);
      for (int i = 0; i < fc.n_tan; ++i) push(fc.tn[i], dq_dT * fc.tw[i]);
    }
    for (int k : mesh.interior()) {
      const double w2 = v[k] * v[k] + e2;
      r[k] += a[k] * std::pow(w2, s) * v[k] - f[k];
      if (J) add(k, k, a[k] * (std::pow(w2, s) + 2.0 * s * std::pow(w2, s - 1.0) * v[k] * v[k]));
    }
    for (int k : mesh.boundary()) {
      r[k] = v[k];
      if (J) t.emplace_back(k, k, 1.0);
    }
    if (J) {
      J->resize(v.size(), v.size());
      J->setFromTriplets(t.begin(), t.end());
    }
  };

  Field r;
  SparseMatrix J;
  Eigen::SparseLU<SparseMatrix> lu;
  assemble(u, r, nullptr);
  double norm = sup_norm(r);
  for (int it = 0; it < opts.max_iter && norm > opts.tol; ++it) {
    assemble(u, r, &J);
    lu.compute(J);
    if (lu.info() != Eigen::Success) throw DivergenceError("p-Laplacian Newton: singular Jacobian");
    const Field du = lu.solve(-r);
    double t = 1.0;
    bool ok = false;
    for (int b = 0; b < 40; ++b, t *= 0.5) {
      Field trial = u + t * du;
      Field rt;
      assemble(trial, rt, nullptr);
      const double nt = sup_norm(rt);
      if (std::isfinite(nt) && nt <= (1.0 - 1e-4 * t) * norm) {
        u = std::move(trial);
        norm = nt;
        ok = true;
        break;
      }
    }
    if (!ok) break;
  }
  if (!(norm <= std::max(opts.tol, 1e-8))) throw DivergenceError("p-Laplacian Newton: no convergence");
  return u;
}

}  // namespace qgrad
