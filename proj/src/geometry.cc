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

#include <algorithm>
#include <cmath>
#include <string>

#include "uqdet/error.h"

namespace uqdet {
namespace {

constexpr double kTwoPi = 2.0 * kPi;
constexpr double kAreaEpsilon = 1e-12;

// Cross product of (b - a) and (p - a); positive when p lies left of a->b.
double Cross(const Point2& a, const Point2& b, const Point2& p) {
  return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
}

Point2 EdgeCrossing(const Point2& p, const Point2& q, double dp, double dq) {
  const double t = dp / (dp - dq);
  return {p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
}

// Keeps the part of `subject` on the left of the directed line a->b.
std::vector<Point2> ClipByHalfPlane(const std::vector<Point2>& subject,
                                    const Point2& a, const Point2& b) {
  std::vector<Point2> out;
  out.reserve(subject.size() + 2);
  const size_t n = subject.size();
  for (size_t i = 0; i < n; ++i) {
    const Point2& cur = subject[i];
    const Point2& next = subject[(i + 1) % n];
    const double dc = Cross(a, b, cur);
    const double dn = Cross(a, b, next);
    if (dc >= 0.0) {
      out.push_back(cur);
      if (dn < 0.0) out.push_back(EdgeCrossing(cur, next, dc, dn));
    } else if (dn >= 0.0) {
      out.push_back(EdgeCrossing(cur, next, dc, dn));
    }
  }
  return out;
}

}  // namespace

Box7 ValidatedBox(const BoxVector& v) {
  for (double c : v) {
    if (!std::isfinite(c)) ThrowValidation("box component is not finite");
  }
  if (v[3] < kMinBoxExtent || v[4] < kMinBoxExtent || v[5] < kMinBoxExtent) {
    ThrowValidation("degenerate box: extent below " +
                    std::to_string(kMinBoxExtent) + " m");
  }
  Box7 box = Box7::FromVector(v);
  box.yaw = WrapAngle(box.yaw);
  return box;
}

ConvexPolygon::ConvexPolygon(std::vector<Point2> vertices)
    : vertices_(std::move(vertices)) {
  if (SignedArea(vertices_) < 0.0) {
    std::reverse(vertices_.begin(), vertices_.end());
  }
}

double ConvexPolygon::Area() const {
  if (empty()) return 0.0;
  return std::max(0.0, SignedArea(vertices_));
}

double SignedArea(std::span<const Point2> vertices) {
  const size_t n = vertices.size();
  if (n < 3) return 0.0;
  double twice = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const Point2& p = vertices[i];
    const Point2& q = vertices[(i + 1) % n];
    twice += p.x * q.y - q.x * p.y;
  }
  return 0.5 * twice;
}

double WrapAngle(double theta) {
  if (!std::isfinite(theta)) ThrowNumerical("angle is not finite");
  if (theta >= -kPi && theta < kPi) return theta;
  double r = std::fmod(theta + kPi, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  double wrapped = r - kPi;
  // fmod + shift can round up to exactly +pi.
  if (wrapped >= kPi) wrapped = -kPi;
  return wrapped;
}

double WrapDelta(double delta) { return -WrapAngle(-delta); }

ConvexPolygon BevFootprint(const Box7& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double hl = 0.5 * box.l;
  const double hw = 0.5 * box.w;
  // Corners in the box frame, counter-clockwise.
  const std::array<Point2, 4> local = {
      Point2{hl, hw}, Point2{-hl, hw}, Point2{-hl, -hw}, Point2{hl, -hw}};
  std::vector<Point2> corners;
  corners.reserve(4);
  for (const Point2& p : local) {
    corners.push_back({box.x + c * p.x - s * p.y, box.y + s * p.x + c * p.y});
  }
  return ConvexPolygon(std::move(corners));
}

double ConvexIntersectionArea(const ConvexPolygon& a, const ConvexPolygon& b) {
  if (a.Area() <= kAreaEpsilon || b.Area() <= kAreaEpsilon) return 0.0;
  std::vector<Point2> clipped = a.vertices();
  const auto& clip = b.vertices();
  const size_t m = clip.size();
  for (size_t i = 0; i < m && clipped.size() >= 3; ++i) {
    clipped = ClipByHalfPlane(clipped, clip[i], clip[(i + 1) % m]);
  }
  if (clipped.size() < 3) return 0.0;
  const double area = SignedArea(clipped);
  return std::clamp(area, 0.0, std::min(a.Area(), b.Area()));
}

namespace {

// False only when the circumscribed circles of the footprints are disjoint.
bool FootprintsMayOverlap(const Box7& a, const Box7& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double reach = 0.5 * (std::hypot(a.l, a.w) + std::hypot(b.l, b.w));
  return dx * dx + dy * dy < reach * reach;
}

}  // namespace

double BevIou(const Box7& a, const Box7& b) {
  if (a == b) return 1.0;
  if (!FootprintsMayOverlap(a, b)) return 0.0;
  const double inter = ConvexIntersectionArea(BevFootprint(a), BevFootprint(b));
  const double uni = a.BevArea() + b.BevArea() - inter;
  if (uni <= kAreaEpsilon) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double Iou3d(const Box7& a, const Box7& b) {
  if (a == b) return 1.0;
  const double lo = std::max(a.z - 0.5 * a.h, b.z - 0.5 * b.h);
  const double hi = std::min(a.z + 0.5 * a.h, b.z + 0.5 * b.h);
  if (hi <= lo || !FootprintsMayOverlap(a, b)) return 0.0;
  const double inter_area =
      ConvexIntersectionArea(BevFootprint(a), BevFootprint(b));
  const double inter = inter_area * (hi - lo);
  const double uni = a.Volume() + b.Volume() - inter;
  if (uni <= kAreaEpsilon) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double ComputeIou(IouKind kind, const Box7& a, const Box7& b) {
  return kind == IouKind::kBev ? BevIou(a, b) : Iou3d(a, b);
}

}  // namespace uqdet
