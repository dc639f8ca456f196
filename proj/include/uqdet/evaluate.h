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

#ifndef UQDET_EVALUATE_H_
#define UQDET_EVALUATE_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uqdet/calibrate.h"
#include "uqdet/detmodel.h"
#include "uqdet/fusion.h"
#include "uqdet/geometry.h"
#include "uqdet/report.h"

namespace uqdet {

struct EvalConfig {
  double iou_min = 0.5;
  double iou_max = 0.95;
  double iou_step = 0.05;
  int mce_bins = 10;
  int ce_levels = 10;
  int energy_samples = 1000;
  uint64_t seed = 0;
  // Class-aware matching for partitions and F1 thresholds. AP40 is always
  // class-aware.
  bool class_aware = false;
  int background_class = kNoBackground;
  TemperatureConditioning conditioning = TemperatureConditioning::kPredictedClass;
  IouKind iou_kind = IouKind::k3d;
  // 0 infers the class count from the data.
  int num_classes = 0;
  // 0 uses every hardware thread.
  int threads = 1;
};

// Fused detections of one frame together with its ground truth.
struct LabeledFrame {
  std::string frame_id;
  std::vector<FusedDetection> dets;
  std::vector<GroundTruthObject> gts;
};

// Thresholds min, min + step, ... up to max (inclusive within 1e-9), each
// rounded to 1e-9. Bounds must lie in (0.1, 1] and step must be positive.
std::vector<double> IouSweep(double iou_min, double iou_max, double iou_step);

// Per IoU threshold: fits per-class F1 score thresholds and temperatures on
// `recal`, scores the calibrated `eval` frames, and computes AP40 and the
// partition counts on both splits together. Frame ids must be unique across
// both splits.
EvalReport EvaluateSweep(std::span<const LabeledFrame> recal,
                         std::span<const LabeledFrame> eval,
                         const EvalConfig& config);

}  // namespace uqdet

#endif  // UQDET_EVALUATE_H_
