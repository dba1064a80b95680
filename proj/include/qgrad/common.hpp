#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qgrad {

inline constexpr const char* kVersion = "0.1.0";

/// Nodal values on a mesh, one entry per node in mesh index order.
using Field = Eigen::VectorXd;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Newton/corrector failed to reach the requested tolerance.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// A nonlinear change of variables left its domain (e.g. 1 + mu*w <= 0).
class DomainError : public Error {
 public:
  DomainError(const std::string& what, std::vector<int> nodes) : Error(what), nodes_(std::move(nodes)) {}
  const std::vector<int>& nodes() const { return nodes_; }

 private:
  std::vector<int> nodes_;
};

/// Malformed configuration or expression input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A precondition of a check (geometry, hypotheses) does not hold.
class HypothesisError : public Error {
 public:
  using Error::Error;
};

inline double sup_norm(const Field& f) { return f.size() == 0 ? 0.0 : f.cwiseAbs().maxCoeff(); }

inline double positive_part(double v) { return v > 0.0 ? v : 0.0; }
inline double negative_part(double v) { return v < 0.0 ? -v : 0.0; }

}  // namespace qgrad
