#include "qgrad/mesh.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace qgrad;

TEST(IntervalMesh, SmallestLegalMesh) {
  const Mesh m = build_interval_mesh(0.0, 1.0, 3);
  ASSERT_EQ(m.size(), 3);
  EXPECT_DOUBLE_EQ(m.node(0).x, 0.0);
  EXPECT_DOUBLE_EQ(m.node(1).x, 0.5);
  EXPECT_DOUBLE_EQ(m.node(2).x, 1.0);
  ASSERT_EQ(m.interior().size(), 1u);
  EXPECT_EQ(m.interior()[0], 1);
}

TEST(IntervalMesh, SpacingAndSymmetricNodes) {
  EXPECT_NEAR(build_interval_mesh(0.0, 1.0, 101).hx(), 0.01, 1e-15);
  const Mesh m = build_interval_mesh(-1.0, 1.0, 5);
  const double expected[] = {-1.0, -0.5, 0.0, 0.5, 1.0};
  for (int k = 0; k < 5; ++k) EXPECT_DOUBLE_EQ(m.node(k).x, expected[k]);
  EXPECT_TRUE(m.is_boundary(0));
  EXPECT_TRUE(m.is_boundary(4));
}

TEST(IntervalMesh, RejectsBadInput) {
  EXPECT_THROW(build_interval_mesh(0.0, 1.0, 2), std::invalid_argument);
  EXPECT_THROW(build_interval_mesh(1.0, 1.0, 5), std::invalid_argument);
  EXPECT_THROW(build_interval_mesh(1.0, 0.0, 5), std::invalid_argument);
}

TEST(RectangleMesh, CountsAndSpacing) {
  const Mesh a = build_rectangle_mesh({0, 0}, {1, 1}, 3, 3);
  EXPECT_EQ(a.size(), 9);
  EXPECT_EQ(a.interior().size(), 1u);
  const Mesh b = build_rectangle_mesh({0, 0}, {1, 1}, 5, 5);
  EXPECT_EQ(b.size(), 25);
  EXPECT_EQ(b.interior().size(), 9u);
  const Mesh c = build_rectangle_mesh({0, 0}, {2, 1}, 5, 3);
  EXPECT_DOUBLE_EQ(c.hx(), 0.5);
  EXPECT_DOUBLE_EQ(c.hy(), 0.5);
  EXPECT_THROW(build_rectangle_mesh({0, 0}, {0, 1}, 5, 5), std::invalid_argument);
  EXPECT_THROW(build_rectangle_mesh({0, 0}, {1, 1}, 2, 5), std::invalid_argument);
}

TEST(RectangleMesh, PartitionAndFullStencil) {
  const Mesh m = build_rectangle_mesh({0, 0}, {1, 2}, 7, 9);
  std::vector<int> seen(static_cast<std::size_t>(m.size()), 0);
  for (int k : m.interior()) ++seen[static_cast<std::size_t>(k)];
  for (int k : m.boundary()) ++seen[static_cast<std::size_t>(k)];
  for (int s : seen) EXPECT_EQ(s, 1);
  for (int k : m.interior()) {
    EXPECT_GT(m.col(k), 0);
    EXPECT_LT(m.col(k), m.nx() - 1);
    EXPECT_GT(m.row(k), 0);
    EXPECT_LT(m.row(k), m.ny() - 1);
  }
}

TEST(BoundaryDistance, ExactValues) {
  const Mesh i = build_interval_mesh(0.0, 1.0, 11);
  const Field d1 = boundary_distance(i);
  EXPECT_NEAR(d1[5], 0.5, 1e-15);
  const Mesh s = build_rectangle_mesh({0, 0}, {1, 1}, 5, 5);
  const Field d2 = boundary_distance(s);
  EXPECT_NEAR(d2[s.index(1, 2)], 0.25, 1e-15);
  for (int k : s.boundary()) EXPECT_EQ(d2[k], 0.0);
}

TEST(BoundaryDistance, OneLipschitz) {
  const Mesh s = build_rectangle_mesh({0, 0}, {2, 1}, 9, 7);
  const Field d = boundary_distance(s);
  for (int a = 0; a < s.size(); ++a)
    for (int b = 0; b < s.size(); ++b) EXPECT_LE(std::abs(d[a] - d[b]), distance(s.node(a), s.node(b)) + 1e-14);
}

TEST(Regions, OpenBallOnInterval) {
  const Mesh m = build_interval_mesh(0.0, 1.0, 11);
  const auto idx = region_indices(m, Region::ball({0.5, 0.0}, 0.3));
  // |x - 0.5| < 0.3 at spacing 0.1: nodes 0.3 .. 0.7 (0.2 and 0.8 are on the sphere).
  EXPECT_EQ(idx, (std::vector<int>{3, 4, 5, 6, 7}));
  EXPECT_EQ(region_indices(m, Region::whole()).size(), 11u);
  EXPECT_TRUE(region_indices(m, Region::ball({0.55, 0.0}, 0.01)).empty());
  EXPECT_THROW(Region::ball({0, 0}, 0.0), std::invalid_argument);
}

TEST(Regions, CubeIsOpen) {
  const Mesh m = build_rectangle_mesh({0, 0}, {1, 1}, 5, 5);
  // Side 0.5 around the centre: only |x-0.5| < 0.25 survives, i.e. the centre node.
  EXPECT_EQ(region_indices(m, Region::cube({0.5, 0.5}, 0.5)).size(), 1u);
  EXPECT_EQ(region_indices(m, Region::cube({0.5, 0.5}, 0.6)).size(), 9u);
}

TEST(Integrate, ConstantAndLinear) {
  const Mesh m = build_interval_mesh(0.0, 1.0, 11);
  EXPECT_NEAR(integrate(m, Field::Ones(m.size()), Region::whole()), 1.0, 1e-14);
  const Mesh fine = build_interval_mesh(0.0, 1.0, 1001);
  const Field x = sample(fine, [](Point p) { return p.x; });
  EXPECT_NEAR(integrate(fine, x, Region::whole()), 0.5, 1e-12);
  const Field x2 = sample(fine, [](Point p) { return p.x * p.x; });
  EXPECT_NEAR(integrate(fine, x2, Region::whole()), 1.0 / 3.0, 2.0 * fine.hx() * fine.hx());
  EXPECT_EQ(integrate(m, x.head(m.size()), Region::ball({0.55, 0.0}, 0.01)), 0.0);
}

TEST(Integrate, LinearAndMonotone) {
  const Mesh m = build_rectangle_mesh({0, 0}, {1, 1}, 17, 17);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Field f(m.size()), g(m.size());
  for (int k = 0; k < m.size(); ++k) {
    f[k] = U(rng);
    g[k] = U(rng);
  }
  const Region r = Region::ball({0.5, 0.5}, 0.3);
  EXPECT_NEAR(integrate(m, 2.0 * f + 3.0 * g, r), 2.0 * integrate(m, f, r) + 3.0 * integrate(m, g, r), 1e-13);
  EXPECT_LE(integrate(m, f, r), integrate(m, f, r.scaled(1.5)));
}

TEST(Refinement, HalvesSpacing) {
  const Mesh m = build_rectangle_mesh({0, 0}, {1, 2}, 9, 5);
  const Mesh r = m.refined();
  EXPECT_DOUBLE_EQ(r.hx(), 0.5 * m.hx());
  EXPECT_DOUBLE_EQ(r.hy(), 0.5 * m.hy());
  EXPECT_EQ(r.interior().size(), static_cast<std::size_t>((2 * 8 - 1) * (2 * 4 - 1)));
}
