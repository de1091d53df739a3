#include <gtest/gtest.h>

#include "ahharm/grid.hpp"

#include <cmath>

using namespace ahharm;

TEST(Grid, GeometricLadderEndpoints) {
  const SlabGrid g = SlabGrid::geometric({2 * std::numbers::pi}, {16}, 0.8, 0.025, 11);
  EXPECT_EQ(g.levels(), 11);
  EXPECT_DOUBLE_EQ(g.r_max(), 0.8);
  EXPECT_DOUBLE_EQ(g.r_min(), 0.025);
  EXPECT_NEAR(g.ratio(), std::pow(0.025 / 0.8, 0.1), 1e-14);
  EXPECT_EQ(g.size(), 16u * 11u);
}

TEST(Grid, StencilsExactOnQuadratics) {
  const SlabGrid g = SlabGrid::geometric({1.0, 1.0}, {4, 4}, 1.0, 0.1, 9);
  auto f = [](double r) { return 3.0 - 2.0 * r + 5.0 * r * r; };
  for (int k = 0; k < g.levels(); ++k) {
    const auto& s = g.stencil(k);
    double d1 = 0, d2 = 0;
    for (int i = 0; i < 3; ++i) {
      d1 += s.d1[i] * f(g.radius(s.level[i]));
      d2 += s.d2[i] * f(g.radius(s.level[i]));
    }
    EXPECT_NEAR(d1, -2.0 + 10.0 * g.radius(k), 1e-9) << k;
    EXPECT_NEAR(d2, 10.0, 1e-7) << k;
  }
}

TEST(Grid, PeriodicNeighbours) {
  const SlabGrid g = SlabGrid::geometric({1.0, 2.0}, {4, 5}, 1.0, 0.5, 3);
  const std::size_t j = g.flat_index({3, 0, 0});
  const auto up = g.neighbor(j, 0, 1);
  EXPECT_EQ(up.wrap, 1);
  EXPECT_EQ(g.multi_index(up.j)[0], 0);
  const auto down = g.neighbor(j, 1, -1);
  EXPECT_EQ(down.wrap, -1);
  EXPECT_EQ(g.multi_index(down.j)[1], 4);
  EXPECT_EQ(g.neighbor(j, 1, 1).wrap, 0);
  EXPECT_NEAR(g.boundary_point(j)[0], 0.75, 1e-15);
}

TEST(Grid, TruncationAndLookup) {
  const SlabGrid g = SlabGrid::geometric({1.0}, {8}, 0.8, 0.05, 9);
  EXPECT_EQ(g.level_of(0.1), 6);
  EXPECT_EQ(g.level_of(0.11), -1);
  EXPECT_EQ(g.nearest_level(0.11), 6);
  const SlabGrid t = g.truncated(6);
  EXPECT_EQ(t.levels(), 7);
  EXPECT_DOUBLE_EQ(t.r_min(), 0.1);
}

TEST(Grid, RejectsInvalidLadders) {
  EXPECT_THROW(SlabGrid::geometric({1.0}, {8}, 1.0, 0.01, 3), ConfigError);  // q = 0.1
  EXPECT_THROW(SlabGrid::geometric({1.0}, {3}, 1.0, 0.5, 3), ConfigError);
  EXPECT_THROW(SlabGrid({1.0}, {8}, {1.0, 0.9, 0.7}), ConfigError);
  EXPECT_THROW(SlabGrid::geometric({1.0}, {8}, 1.0, 0.5, 2), ConfigError);
}
