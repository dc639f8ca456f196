/* Copyright 2026 The uqdet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "uqdet/geometry.h"

#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "oracles.h"
#include "uqdet/error.h"

namespace uqdet {
namespace {

using testing::RandomBox;
using testing::RandomNearbyBox;

Box7 MakeBox(double x, double y, double z, double l, double w, double h, double yaw) {
  return Box7{x, y, z, l, w, h, yaw};
}

TEST(WrapAngleTest, MapsIntoHalfOpenRange) {
  EXPECT_DOUBLE_EQ(WrapAngle(0.0), 0.0);
  EXPECT_DOUBLE_EQ(WrapAngle(kPi), -kPi);
  EXPECT_DOUBLE_EQ(WrapAngle(-kPi), -kPi);
  EXPECT_NEAR(WrapAngle(3 * kPi + 0.25), -kPi + 0.25, 1e-12);
  EXPECT_NEAR(WrapAngle(-2 * kPi - 0.5), -0.5, 1e-12);
  for (double t = -20.0; t < 20.0; t += 0.37) {
    const double w = WrapAngle(t);
    EXPECT_GE(w, -kPi);
    EXPECT_LT(w, kPi);
    EXPECT_NEAR(std::remainder(w - t, 2 * kPi), 0.0, 1e-9);
  }
}

TEST(WrapAngleTest, LeavesInRangeValuesUntouched) {
  for (double t : {0.1, -0.1, 3.14, -3.1415926, 1e-300}) EXPECT_EQ(WrapAngle(t), t);
}

TEST(WrapAngleTest, RejectsNonFinite) {
  EXPECT_THROW(WrapAngle(NAN), Error);
  EXPECT_THROW(WrapAngle(INFINITY), Error);
}

TEST(WrapDeltaTest, MapsIntoHalfOpenRangeFromAbove) {
  EXPECT_DOUBLE_EQ(WrapDelta(kPi), kPi);
  EXPECT_DOUBLE_EQ(WrapDelta(-kPi), kPi);
  EXPECT_NEAR(WrapDelta(2 * kPi - 0.1), -0.1, 1e-12);
}

TEST(ValidatedBoxTest, RejectsBadInput) {
  EXPECT_THROW(ValidatedBox({0, 0, 0, 0, 1, 1, 0}), Error);
  EXPECT_THROW(ValidatedBox({0, 0, 0, 1, -1, 1, 0}), Error);
  EXPECT_THROW(ValidatedBox({NAN, 0, 0, 1, 1, 1, 0}), Error);
  EXPECT_THROW(ValidatedBox({0, 0, 0, 1, 1, INFINITY, 0}), Error);
  const Box7 b = ValidatedBox({1, 2, 3, 4, 5, 6, 3 * kPi});
  EXPECT_NEAR(b.yaw, -kPi, 1e-12);
}

TEST(ConvexPolygonTest, OrientsCounterClockwise) {
  ConvexPolygon cw({{0, 0}, {0, 1}, {1, 1}, {1, 0}});
  EXPECT_GT(SignedArea(cw.vertices()), 0.0);
  EXPECT_DOUBLE_EQ(cw.Area(), 1.0);
  EXPECT_TRUE(ConvexPolygon({{0, 0}, {1, 1}}).empty());
}

TEST(ConvexIntersectionTest, OverlappingSquares) {
  ConvexPolygon a({{0, 0}, {2, 0}, {2, 2}, {0, 2}});
  ConvexPolygon b({{1, 1}, {3, 1}, {3, 3}, {1, 3}});
  EXPECT_NEAR(ConvexIntersectionArea(a, b), 1.0, 1e-12);
  ConvexPolygon far({{5, 5}, {6, 5}, {6, 6}, {5, 6}});
  EXPECT_EQ(ConvexIntersectionArea(a, far), 0.0);
}

TEST(BevIouTest, Examples) {
  const Box7 unit = MakeBox(0, 0, 0, 2, 2, 1, 0);
  EXPECT_EQ(BevIou(unit, unit), 1.0);
  // Half overlap along x: 2 / (4 + 4 - 2).
  EXPECT_NEAR(BevIou(unit, MakeBox(1, 0, 0, 2, 2, 1, 0)), 1.0 / 3.0, 1e-12);
  EXPECT_EQ(BevIou(unit, MakeBox(10, 0, 0, 2, 2, 1, 0)), 0.0);
  // Square rotated by 90 degrees is the same footprint.
  EXPECT_NEAR(BevIou(unit, MakeBox(0, 0, 0, 2, 2, 1, kPi / 2)), 1.0, 1e-12);
  // Square and its 45 degree rotation: intersection is a regular octagon.
  const double octagon = 8.0 * (std::sqrt(2.0) - 1.0);
  EXPECT_NEAR(BevIou(unit, MakeBox(0, 0, 0, 2, 2, 1, kPi / 4)),
              octagon / (8.0 - octagon), 1e-12);
}

TEST(BevIouTest, TouchingBoxesHaveZeroIou) {
  const Box7 a = MakeBox(0, 0, 0, 2, 2, 1, 0);
  EXPECT_NEAR(BevIou(a, MakeBox(2, 0, 0, 2, 2, 1, 0)), 0.0, 1e-12);
}

TEST(BevIouTest, YawPeriodicity) {
  const Box7 a = MakeBox(0.3, -0.2, 0, 4, 2, 1, 0.4);
  const Box7 b = MakeBox(0, 0, 0, 3, 1.5, 1, 1.1);
  Box7 flipped = b;
  flipped.yaw = WrapAngle(b.yaw + kPi);
  EXPECT_NEAR(BevIou(a, b), BevIou(a, flipped), 1e-12);
}

TEST(Iou3dTest, Examples) {
  const Box7 a = MakeBox(0, 0, 0, 2, 2, 2, 0);
  EXPECT_EQ(Iou3d(a, a), 1.0);
  // Half overlap in z only: 4 / (8 + 8 - 4).
  EXPECT_NEAR(Iou3d(a, MakeBox(0, 0, 1, 2, 2, 2, 0)), 1.0 / 3.0, 1e-12);
  EXPECT_EQ(Iou3d(a, MakeBox(0, 0, 5, 2, 2, 2, 0)), 0.0);
  // Contained box: ratio of volumes.
  EXPECT_NEAR(Iou3d(a, MakeBox(0, 0, 0, 1, 1, 1, 0)), 1.0 / 8.0, 1e-12);
}

TEST(IouPropertyTest, SymmetricBoundedAndRigidInvariant) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> shift(-100.0, 100.0);
  std::uniform_real_distribution<double> turn(-kPi, kPi);
  for (int i = 0; i < 500; ++i) {
    const Box7 a = RandomBox(rng);
    const Box7 b = RandomNearbyBox(rng, a);
    const double bev = BevIou(a, b);
    const double iou3 = Iou3d(a, b);
    EXPECT_GE(bev, 0.0);
    EXPECT_LE(bev, 1.0);
    EXPECT_GE(iou3, 0.0);
    EXPECT_LE(iou3, 1.0);
    EXPECT_NEAR(bev, BevIou(b, a), 1e-12);
    EXPECT_NEAR(iou3, Iou3d(b, a), 1e-12);
    // Rotate both about the origin and translate.
    const double r = turn(rng), tx = shift(rng), ty = shift(rng), tz = shift(rng);
    auto move = [&](Box7 box) {
      const double x = std::cos(r) * box.x - std::sin(r) * box.y;
      const double y = std::sin(r) * box.x + std::cos(r) * box.y;
      box.x = x + tx;
      box.y = y + ty;
      box.z += tz;
      box.yaw = WrapAngle(box.yaw + r);
      return box;
    };
    EXPECT_NEAR(BevIou(move(a), move(b)), bev, 1e-9);
    EXPECT_NEAR(Iou3d(move(a), move(b)), iou3, 1e-9);
  }
}

TEST(RasterOracleTest, ScanlineMatchesPerPixelCounting) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 10; ++i) {
    const Box7 a = RandomBox(rng);
    const Box7 b = RandomNearbyBox(rng, a);
    EXPECT_NEAR(testing::RasterBevIou(a, b, 300), testing::BruteForceBevIou(a, b, 300),
                1e-12);
  }
}

TEST(RasterOracleTest, AgreesWithClippingKernel) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const Box7 a = RandomBox(rng);
    const Box7 b = RandomNearbyBox(rng, a);
    EXPECT_NEAR(BevIou(a, b), testing::RasterBevIou(a, b), 1e-3);
    EXPECT_NEAR(Iou3d(a, b), testing::VoxelIou3d(a, b), 2e-3);
  }
}

}  // namespace
}  // namespace uqdet
