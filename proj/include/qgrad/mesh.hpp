#pragma once

#include "qgrad/common.hpp"

#include <algorithm>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

namespace qgrad {

/// Uniform tensor grid on an interval (dimension 1) or a rectangle (dimension 2).
///
/// Nodes are numbered x-fastest: k = i + nx * j. Boundary nodes are the two
/// interval endpoints, or every node on an edge of the rectangle. Quadrature
/// weights are cell volumes with half cells along the boundary (trapezoid rule).
class Mesh {
 public:
  static Mesh interval(double a, double b, int n) {
    if (!(b > a)) throw std::invalid_argument("interval mesh: need b > a");
    if (n < 3) throw std::invalid_argument("interval mesh: need at least 3 nodes");
    return Mesh(1, Point{a, 0.0}, Point{b, 0.0}, n, 1);
  }

  static Mesh rectangle(Point lo, Point hi, int nx, int ny) {
    if (!(hi.x > lo.x) || !(hi.y > lo.y)) throw std::invalid_argument("rectangle mesh: degenerate rectangle");
    if (nx < 3 || ny < 3) throw std::invalid_argument("rectangle mesh: need at least 3 nodes per axis");
    return Mesh(2, lo, hi, nx, ny);
  }

  int dimension() const { return dim_; }
  int size() const { return nx_ * ny_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  Point lower() const { return lo_; }
  Point upper() const { return hi_; }

  int index(int i, int j = 0) const { return i + nx_ * j; }
  int col(int k) const { return k % nx_; }
  int row(int k) const { return k / nx_; }

  Point node(int k) const {
    const int i = col(k);
    const int j = row(k);
    // Last node pinned to the upper corner so boundary coordinates are exact.
    const double x = (i == nx_ - 1) ? hi_.x : lo_.x + i * hx_;
    const double y = dim_ == 1 ? 0.0 : ((j == ny_ - 1) ? hi_.y : lo_.y + j * hy_);
    return {x, y};
  }

  bool is_boundary(int k) const { return boundary_mask_[static_cast<std::size_t>(k)] != 0; }
  std::span<const int> interior() const { return interior_; }
  std::span<const int> boundary() const { return boundary_; }
  const Field& cell_volume() const { return volume_; }

  /// Same domain with the spacing halved on every axis.
  Mesh refined() const {
    if (dim_ == 1) return interval(lo_.x, hi_.x, 2 * (nx_ - 1) + 1);
    return rectangle(lo_, hi_, 2 * (nx_ - 1) + 1, 2 * (ny_ - 1) + 1);
  }

  /// Distance from a point to the continuous boundary (negative outside).
  double distance_to_boundary(const Point& p) const {
    double d = std::min(p.x - lo_.x, hi_.x - p.x);
    if (dim_ == 2) d = std::min({d, p.y - lo_.y, hi_.y - p.y});
    return d;
  }

  double measure() const { return (hi_.x - lo_.x) * (dim_ == 2 ? (hi_.y - lo_.y) : 1.0); }

 private:
  Mesh(int dim, Point lo, Point hi, int nx, int ny) : dim_(dim), nx_(nx), ny_(ny), lo_(lo), hi_(hi) {
    hx_ = (hi.x - lo.x) / (nx - 1);
    hy_ = dim == 2 ? (hi.y - lo.y) / (ny - 1) : 1.0;
    const int n = nx * ny;
    boundary_mask_.assign(static_cast<std::size_t>(n), 0);
    volume_.resize(n);
    for (int k = 0; k < n; ++k) {
      const int i = k % nx;
      const int j = k / nx;
      const bool bx = (i == 0 || i == nx - 1);
      const bool by = dim == 2 && (j == 0 || j == ny - 1);
      boundary_mask_[static_cast<std::size_t>(k)] = (bx || by) ? 1 : 0;
      double w = bx ? 0.5 * hx_ : hx_;
      if (dim == 2) w *= (j == 0 || j == ny - 1) ? 0.5 * hy_ : hy_;
      volume_[k] = w;
      (bx || by ? boundary_ : interior_).push_back(k);
    }
  }

  int dim_;
  int nx_;
  int ny_;
  Point lo_;
  Point hi_;
  double hx_ = 0.0;
  double hy_ = 0.0;
  std::vector<char> boundary_mask_;
  std::vector<int> interior_;
  std::vector<int> boundary_;
  Field volume_;
};

using MeshPtr = std::shared_ptr<const Mesh>;

inline Mesh build_interval_mesh(double a, double b, int n) { return Mesh::interval(a, b, n); }

inline Mesh build_rectangle_mesh(Point lo, Point hi, int nx, int ny) { return Mesh::rectangle(lo, hi, nx, ny); }

/// Exact Euclidean distance from each node to the domain boundary.
inline Field boundary_distance(const Mesh& mesh) {
  Field d(mesh.size());
  for (int k = 0; k < mesh.size(); ++k) d[k] = mesh.is_boundary(k) ? 0.0 : mesh.distance_to_boundary(mesh.node(k));
  return d;
}

/// Open geometric region used to select nodes.
///
/// A cube of side s centred at c is {|x_i - c_i| < s/2}. A boundary ball is a ball
/// centred on the boundary, intersected with the closed domain.
struct Region {
  enum class Kind { Ball, Cube, WholeDomain, BoundaryBall };

  Kind kind = Kind::WholeDomain;
  Point center{};
  double size = 0.0;  // radius for balls, side length for cubes

  static Region ball(Point c, double radius) { return checked({Kind::Ball, c, radius}); }
  static Region cube(Point c, double side) { return checked({Kind::Cube, c, side}); }
  static Region whole() { return {Kind::WholeDomain, {}, 0.0}; }
  static Region boundary_ball(Point c, double radius) { return checked({Kind::BoundaryBall, c, radius}); }

  /// Same kind and centre, size multiplied by `factor`.
  Region scaled(double factor) const {
    Region r = *this;
    r.size *= factor;
    return r;
  }

  bool contains(const Point& p, int dimension) const {
    // Strict membership with a relative slack of 1e-12 so that nodes lying on the
    // sphere up to rounding are treated as outside.
    const double slack = 1e-12 * std::max(1.0, size);
    switch (kind) {
      case Kind::WholeDomain:
        return true;
      case Kind::Ball:
      case Kind::BoundaryBall: {
        const double dx = p.x - center.x;
        const double dy = dimension == 2 ? p.y - center.y : 0.0;
        return std::hypot(dx, dy) < size - slack;
      }
      case Kind::Cube: {
        const double half = 0.5 * size - slack;
        if (std::abs(p.x - center.x) >= half) return false;
        return dimension == 1 || std::abs(p.y - center.y) < half;
      }
    }
    return false;
  }

 private:
  static Region checked(Region r) {
    if (!(r.size > 0.0)) throw std::invalid_argument("region: radius or side must be positive");
    return r;
  }
};

inline std::vector<int> region_indices(const Mesh& mesh, const Region& region) {
  std::vector<int> out;
  for (int k = 0; k < mesh.size(); ++k)
    if (region.contains(mesh.node(k), mesh.dimension())) out.push_back(k);
  return out;
}

inline double integrate(const Mesh& mesh, const Field& field, std::span<const int> nodes) {
  double s = 0.0;
  for (int k : nodes) s += field[k] * mesh.cell_volume()[k];
  return s;
}

inline double integrate(const Mesh& mesh, const Field& field, const Region& region) {
  const auto nodes = region_indices(mesh, region);
  return integrate(mesh, field, nodes);
}

/// Discrete measure of a node set: sum of cell volumes.
inline double measure(const Mesh& mesh, std::span<const int> nodes) {
  double s = 0.0;
  for (int k : nodes) s += mesh.cell_volume()[k];
  return s;
}

/// Sample a closed-form function at every node.
template <typename Fn>
Field sample(const Mesh& mesh, Fn&& fn) {
  Field f(mesh.size());
  for (int k = 0; k < mesh.size(); ++k) f[k] = fn(mesh.node(k));
  return f;
}

}  // namespace qgrad
