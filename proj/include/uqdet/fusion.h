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

#ifndef UQDET_FUSION_H_
#define UQDET_FUSION_H_

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "uqdet/detmodel.h"
#include "uqdet/geometry.h"

namespace uqdet {

// Detections from the different heads that are believed to be one object.
// Holds at most one detection per head.
struct Cluster {
  std::vector<Detection> members;

  int size() const { return static_cast<int>(members.size()); }
};

struct ClusterResult {
  std::vector<Cluster> valid;
  std::vector<Cluster> discarded;  // below the minimum cluster size
};

struct MemberRef {
  int head_id = 0;
  double score = 0.0;

  friend bool operator==(const MemberRef&, const MemberRef&) = default;
};

struct FusedDetection {
  Box7 box;
  BoxVector total_var{};  // mixture variance per regression variable
  ClassDistribution cls;
  double score = 0.0;
  double se = 0.0;   // nats
  double mi = 0.0;   // nats
  double etv = 0.0;  // trace of the member-spread covariance
  double atv = 0.0;  // trace of the mean predicted covariance
  int cluster_size = 0;
  std::vector<MemberRef> members;  // in-memory provenance, not serialized

  // Class used for thresholds and temperature lookup.
  int PredictedClass(int background = kNoBackground) const {
    return cls.Argmax(background);
  }
};

struct FusedFrame {
  std::string frame_id;
  std::vector<FusedDetection> fused;
  int discarded_clusters = 0;
};

struct FusionConfig {
  double nms_iou = 0.5;
  double cluster_iou = 0.5;
  IouKind cluster_iou_kind = IouKind::kBev;
  // 0 selects floor(N/2) + 1.
  int min_cluster_size = 0;
  int background_class = kNoBackground;
};

// Consensus minimum: more than half of the heads.
int DefaultMinClusterSize(int num_heads);

// Greedy suppression in descending score order; a detection is dropped when
// its BEV IoU with an already kept one exceeds `iou_threshold`. The result is
// sorted by descending score (stable on ties).
std::vector<Detection> Nms(std::vector<Detection> dets, double iou_threshold);

// Pools all heads, seeds clusters from the highest-scoring unassigned
// detection and absorbs from every other head the unassigned detection with
// the highest IoU to the seed, provided it exceeds `iou_threshold`.
ClusterResult ClusterConsensus(std::span<const std::vector<Detection>> heads,
                               double iou_threshold, int min_cluster_size,
                               IouKind iou_kind = IouKind::kBev);

struct MixtureMoments {
  double mean = 0.0;
  double variance = 0.0;
};

// Moments of an equally weighted Gaussian mixture.
MixtureMoments ComputeMixtureMoments(std::span<const double> means,
                                     std::span<const double> variances);

using Covariance7 = std::array<std::array<double, kBoxDims>, kBoxDims>;

// Population covariance of the member box vectors. Yaw enters as wrapped
// deviations from the highest-confidence member.
Covariance7 EpistemicCovariance(const Cluster& cluster);
double EpistemicTotalVariance(const Cluster& cluster);
double AleatoricTotalVariance(const Cluster& cluster);

FusedDetection MergeCluster(const Cluster& cluster,
                            int background = kNoBackground);

// Per-head NMS, consensus clustering and merging for one frame.
FusedFrame FuseFrame(const Frame& frame, const FusionConfig& config);

// Fused output format, one frame per line.
void WriteFusedFrames(std::ostream& out, std::span<const FusedFrame> frames);
std::vector<FusedFrame> ParseFusedFrames(std::istream& in);

}  // namespace uqdet

#endif  // UQDET_FUSION_H_
