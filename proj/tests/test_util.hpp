#pragma once

#include "qgrad/coefficients.hpp"

#include <cmath>
#include <memory>
#include <random>

namespace qgrad::testing {

template <typename CP, typename CM, typename MU, typename H>
CoefficientSet make_coeffs(MeshPtr m, CP cp, CM cm, MU mu, H h, double mu1 = 1.0, double eps = 0.1) {
  return CoefficientSet::from_fields(m, sample(*m, cp), sample(*m, cm), sample(*m, mu), sample(*m, h), mu1, eps);
}

inline MeshPtr interval(int n, double a = 0.0, double b = 1.0) {
  return std::make_shared<const Mesh>(Mesh::interval(a, b, n));
}
inline MeshPtr square(int n) { return std::make_shared<const Mesh>(Mesh::rectangle({0, 0}, {1, 1}, n, n)); }

/// Random field vanishing on the boundary.
inline Field random_interior_field(const Mesh& m, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> U(lo, hi);
  Field f = Field::Zero(m.size());
  for (int k : m.interior()) f[k] = U(rng);
  return f;
}

inline double zero(Point) { return 0.0; }

}  // namespace qgrad::testing
