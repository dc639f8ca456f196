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

#ifndef UQDET_PARTITION_H_
#define UQDET_PARTITION_H_

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "uqdet/detmodel.h"
#include "uqdet/fusion.h"
#include "uqdet/geometry.h"

namespace uqdet {

// Below this IoU with every ground-truth box a detection is background.
inline constexpr double kBackgroundIou = 0.1;

struct Match {
  int det = 0;  // index into the detection span
  int gt = 0;   // index into the ground-truth span
  double iou = 0.0;

  friend bool operator==(const Match&, const Match&) = default;
};

struct PartitionedFrame {
  std::vector<Match> tp;
  std::vector<Match> fp_ml;
  std::vector<int> fp_bg;
  int64_t fn_count = 0;
  int64_t considered = 0;  // detections at or above their score threshold
};

struct MatchOptions {
  double tp_iou = 0.7;
  // Applied to every detection unless `class_thresholds` is non-empty, in
  // which case the entry for the predicted class is used.
  double score_threshold = -std::numeric_limits<double>::infinity();
  std::vector<double> class_thresholds;
  // Match only ground truth of the detection's predicted class.
  bool class_aware = true;
  int background_class = kNoBackground;
  // Restricts detections to this predicted class; false negatives are then
  // counted over ground truth of this class only.
  std::optional<int> only_class;
  IouKind iou_kind = IouKind::k3d;
};

// Greedy assignment in descending score order. Each detection looks at the
// eligible ground truth: IoU >= tp_iou with a not yet matched box makes a TP
// (consuming it); IoU >= 0.1 with any eligible box makes a mislocalized FP
// (consuming nothing); otherwise it is a background FP.
PartitionedFrame MatchPartitions(std::span<const FusedDetection> dets,
                                 std::span<const GroundTruthObject> gts,
                                 const MatchOptions& options);

inline PartitionedFrame MatchPartitions(std::span<const FusedDetection> dets,
                                        std::span<const GroundTruthObject> gts,
                                        double tp_iou, double score_threshold) {
  MatchOptions options;
  options.tp_iou = tp_iou;
  options.score_threshold = score_threshold;
  return MatchPartitions(dets, gts, options);
}

struct FrameView {
  std::span<const FusedDetection> dets;
  std::span<const GroundTruthObject> gts;
};

struct ThresholdSearch {
  double threshold = std::numeric_limits<double>::infinity();
  double f1 = 0.0;
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t fn = 0;
  bool no_detections = false;
};

// Score threshold maximizing F1 = 2TP / (2TP + FP + FN) over a dataset, with
// FP = FP_ML + FP_BG. Candidates are the distinct detection scores; ties go
// to the higher threshold. The thresholds in `options` are ignored. With no
// detections the threshold is +inf and `no_detections` is set. Requires at
// least one ground-truth object in scope.
ThresholdSearch F1ScoreThreshold(std::span<const FrameView> frames,
                                 const MatchOptions& options);

}  // namespace uqdet

#endif  // UQDET_PARTITION_H_
