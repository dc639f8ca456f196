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

// Slow reference implementations used as test oracles. Each one is written
// independently of the library kernel it checks.

#ifndef UQDET_TESTS_ORACLES_H_
#define UQDET_TESTS_ORACLES_H_

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "uqdet/detmodel.h"
#include "uqdet/fusion.h"
#include "uqdet/geometry.h"
#include "uqdet/metrics.h"
#include "uqdet/partition.h"

namespace uqdet::testing {

// BEV IoU by counting pixel centers on a `resolution`^2 grid spanning the
// intersection of the two bounding rectangles. Rows are filled by
// intersecting each footprint with the scanline.
double RasterBevIou(const Box7& a, const Box7& b, int resolution = 2000);

// Same, but by testing every pixel center against every edge. Slow; used to
// validate the scanline counter itself.
double BruteForceBevIou(const Box7& a, const Box7& b, int resolution);

// 3D IoU by counting voxel centers on a `resolution`^3 grid spanning the
// intersection of the two bounding boxes.
double VoxelIou3d(const Box7& a, const Box7& b, int resolution = 200);

// ln I0(x) from the power series in long double with `terms` terms (0 runs
// until the terms stop changing the sum).
double SeriesLogBesselI0(double x, int terms = 0);

// Threshold maximizing F1 by re-running the matcher at every candidate.
ThresholdSearch BruteForceF1(std::span<const FrameView> frames,
                             const MatchOptions& options);

// AP40 by enumerating every cut of the ranked list.
std::optional<double> BruteForceAp40(std::vector<RankedDetection> dets,
                                     int64_t num_gt);

// Per-(class, bin) tally with explicit bin edges.
double BruteForceMce(std::span<const LabeledDistribution> dets, int bins);

// A random box near the origin.
Box7 RandomBox(std::mt19937_64& rng);
// A random box that overlaps `anchor` in most draws.
Box7 RandomNearbyBox(std::mt19937_64& rng, const Box7& anchor);

// Fused detection with a one-hot class distribution over `classes` classes.
FusedDetection MakeFused(const Box7& box, double score, int cls, int classes = 1);

}  // namespace uqdet::testing

#endif  // UQDET_TESTS_ORACLES_H_
