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

#include "uqdet/partition.h"

#include <algorithm>
#include <numeric>
#include <string>

#include "uqdet/error.h"

namespace uqdet {
namespace {

void CheckTpIou(double tp_iou) {
  if (!(tp_iou > kBackgroundIou) || tp_iou > 1.0) {
    ThrowContract("tp_iou must lie in (0.1, 1], got " + std::to_string(tp_iou));
  }
}

bool InFnScope(const GroundTruthObject& gt, const MatchOptions& options) {
  return !options.only_class.has_value() || gt.class_id == *options.only_class;
}

double ThresholdFor(const FusedDetection& det, const MatchOptions& options) {
  if (options.class_thresholds.empty()) return options.score_threshold;
  const int k = det.PredictedClass(options.background_class);
  if (k < 0 || k >= static_cast<int>(options.class_thresholds.size())) {
    ThrowContract("no score threshold for class " + std::to_string(k));
  }
  return options.class_thresholds[k];
}

// Detection indices of the given class (if any), by descending score.
std::vector<int> RankedCandidates(std::span<const FusedDetection> dets,
                                  const MatchOptions& options) {
  std::vector<int> order;
  order.reserve(dets.size());
  for (int i = 0; i < static_cast<int>(dets.size()); ++i) {
    if (options.only_class.has_value() &&
        dets[i].PredictedClass(options.background_class) != *options.only_class) {
      continue;
    }
    order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return dets[a].score > dets[b].score;
  });
  return order;
}

enum class Category { kTp, kFpMl, kFpBg };

struct Assignment {
  Category category = Category::kFpBg;
  int gt = -1;
  double iou = 0.0;
};

// Shared matching kernel; `consumed` marks ground truth taken by a TP.
Assignment AssignOne(const FusedDetection& det,
                     std::span<const GroundTruthObject> gts,
                     const MatchOptions& options, std::vector<bool>& consumed) {
  const int det_class = det.PredictedClass(options.background_class);
  int best_free = -1;
  double best_free_iou = -1.0;
  int best_any = -1;
  double best_any_iou = -1.0;
  for (int j = 0; j < static_cast<int>(gts.size()); ++j) {
    if (options.class_aware && gts[j].class_id != det_class) continue;
    const double iou = ComputeIou(options.iou_kind, det.box, gts[j].box);
    if (iou > best_any_iou) {
      best_any_iou = iou;
      best_any = j;
    }
    if (!consumed[j] && iou > best_free_iou) {
      best_free_iou = iou;
      best_free = j;
    }
  }
  if (best_free >= 0 && best_free_iou >= options.tp_iou) {
    consumed[best_free] = true;
    return {Category::kTp, best_free, best_free_iou};
  }
  if (best_free >= 0 && best_free_iou >= kBackgroundIou) {
    return {Category::kFpMl, best_free, best_free_iou};
  }
  if (best_any >= 0 && best_any_iou >= kBackgroundIou) {
    return {Category::kFpMl, best_any, best_any_iou};
  }
  return {Category::kFpBg, -1, std::max(best_any_iou, 0.0)};
}

}  // namespace

PartitionedFrame MatchPartitions(std::span<const FusedDetection> dets,
                                 std::span<const GroundTruthObject> gts,
                                 const MatchOptions& options) {
  CheckTpIou(options.tp_iou);
  PartitionedFrame out;
  std::vector<bool> consumed(gts.size(), false);
  for (int i : RankedCandidates(dets, options)) {
    if (dets[i].score < ThresholdFor(dets[i], options)) continue;
    ++out.considered;
    const Assignment a = AssignOne(dets[i], gts, options, consumed);
    switch (a.category) {
      case Category::kTp:
        out.tp.push_back({i, a.gt, a.iou});
        break;
      case Category::kFpMl:
        out.fp_ml.push_back({i, a.gt, a.iou});
        break;
      case Category::kFpBg:
        out.fp_bg.push_back(i);
        break;
    }
  }
  for (size_t j = 0; j < gts.size(); ++j) {
    if (!consumed[j] && InFnScope(gts[j], options)) ++out.fn_count;
  }
  return out;
}

ThresholdSearch F1ScoreThreshold(std::span<const FrameView> frames,
                                 const MatchOptions& options) {
  CheckTpIou(options.tp_iou);
  struct Outcome {
    double score;
    bool tp;
    bool tp_in_scope;  // matched ground truth counts toward the FN scope
  };
  std::vector<Outcome> outcomes;
  int64_t gt_in_scope = 0;
  for (const FrameView& frame : frames) {
    for (const GroundTruthObject& gt : frame.gts) {
      if (InFnScope(gt, options)) ++gt_in_scope;
    }
    // Greedy matching in score order means a detection's category does not
    // depend on anything ranked below it, so thresholding is a prefix cut.
    std::vector<bool> consumed(frame.gts.size(), false);
    for (int i : RankedCandidates(frame.dets, options)) {
      const Assignment a = AssignOne(frame.dets[i], frame.gts, options, consumed);
      const bool tp = a.category == Category::kTp;
      outcomes.push_back(
          {frame.dets[i].score, tp, tp && InFnScope(frame.gts[a.gt], options)});
    }
  }
  if (gt_in_scope == 0) {
    ThrowContract("F1 threshold search needs ground truth in scope");
  }
  ThresholdSearch best;
  if (outcomes.empty()) {
    best.no_detections = true;
    best.fn = gt_in_scope;
    return best;
  }
  std::stable_sort(outcomes.begin(), outcomes.end(),
                   [](const Outcome& a, const Outcome& b) { return a.score > b.score; });
  int64_t tp = 0, fp = 0, tp_scope = 0;
  bool have_best = false;
  for (size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].tp) {
      ++tp;
      if (outcomes[i].tp_in_scope) ++tp_scope;
    } else {
      ++fp;
    }
    const bool group_end =
        i + 1 == outcomes.size() || outcomes[i + 1].score != outcomes[i].score;
    if (!group_end) continue;
    const int64_t fn = gt_in_scope - tp_scope;
    const double f1 = 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
    // Strict improvement only: on ties the higher threshold, seen first, stays.
    if (!have_best || f1 > best.f1) {
      have_best = true;
      best.threshold = outcomes[i].score;
      best.f1 = f1;
      best.tp = tp;
      best.fp = fp;
      best.fn = fn;
    }
  }
  return best;
}

}  // namespace uqdet
