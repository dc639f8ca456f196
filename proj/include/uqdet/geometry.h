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

#ifndef UQDET_GEOMETRY_H_
#define UQDET_GEOMETRY_H_

#include <array>
#include <span>
#include <vector>

namespace uqdet {

inline constexpr double kPi = 3.14159265358979323846;

// Smallest accepted box extent in meters. Anything thinner is rejected when a
// box is ingested; the IoU kernels assume positive extents.
inline constexpr double kMinBoxExtent = 1e-6;

// Number of regression variables in a box: x, y, z, l, w, h, yaw.
inline constexpr int kBoxDims = 7;
inline constexpr int kYawIndex = 6;

using BoxVector = std::array<double, kBoxDims>;

// Oriented 3D box. Center (x, y, z) and extents (l, w, h) in meters, yaw in
// radians about the vertical axis. l runs along the heading direction.
struct Box7 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double l = 1.0;
  double w = 1.0;
  double h = 1.0;
  double yaw = 0.0;

  BoxVector ToVector() const { return {x, y, z, l, w, h, yaw}; }
  static Box7 FromVector(const BoxVector& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
  }

  double BevArea() const { return l * w; }
  double Volume() const { return l * w * h; }

  friend bool operator==(const Box7&, const Box7&) = default;
};

// Checks finiteness and the minimum extent, and normalizes yaw to [-pi, pi).
// Throws Error(kValidation) on violation.
Box7 ValidatedBox(const BoxVector& v);

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

// Convex polygon with counter-clockwise vertices. An empty polygon has zero
// area; the clipping kernel produces one when two shapes do not overlap.
class ConvexPolygon {
 public:
  ConvexPolygon() = default;
  // Reorders clockwise input to counter-clockwise. Convexity is assumed.
  explicit ConvexPolygon(std::vector<Point2> vertices);

  const std::vector<Point2>& vertices() const { return vertices_; }
  bool empty() const { return vertices_.size() < 3; }
  double Area() const;

 private:
  std::vector<Point2> vertices_;
};

// Signed shoelace area; positive for counter-clockwise order.
double SignedArea(std::span<const Point2> vertices);

// Maps theta to [-pi, pi). Throws on non-finite input.
double WrapAngle(double theta);

// Maps an angular difference to (-pi, pi]; used for residuals and deviations.
double WrapDelta(double delta);

ConvexPolygon BevFootprint(const Box7& box);

// Area of the intersection via sequential half-plane clipping of `a` against
// every edge of `b`. Degenerate inputs yield 0.
double ConvexIntersectionArea(const ConvexPolygon& a, const ConvexPolygon& b);

// Intersection over union of the bird's-eye-view footprints.
double BevIou(const Box7& a, const Box7& b);

// Intersection over union of the boxes as vertical prisms.
double Iou3d(const Box7& a, const Box7& b);

enum class IouKind { kBev, k3d };

double ComputeIou(IouKind kind, const Box7& a, const Box7& b);

}  // namespace uqdet

#endif  // UQDET_GEOMETRY_H_
