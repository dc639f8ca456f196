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

#ifndef UQDET_REPORT_H_
#define UQDET_REPORT_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "uqdet/calibrate.h"

namespace uqdet {

// Partition names as they appear in the report.
inline constexpr const char* kTpKey = "tp";
inline constexpr const char* kFpMlKey = "fp_ml";
inline constexpr const char* kFpBgKey = "fp_bg";

// Mean scores over the detections of one partition; nullopt where a score is
// undefined (no detections, or no label for background false positives).
// Headline entries average each field over the thresholds where it is defined.
struct PartitionScores {
  double count = 0.0;
  std::optional<double> nll_cls;
  std::optional<double> brier;
  std::optional<double> nll_reg;
  std::optional<double> energy;
  std::optional<double> se;
  std::optional<double> mi;

  friend bool operator==(const PartitionScores&, const PartitionScores&) = default;
};

struct PartitionCounts {
  double tp = 0.0;
  double fp_ml = 0.0;
  double fp_bg = 0.0;
  double fn = 0.0;
  double considered = 0.0;  // detections at or above their score threshold

  friend bool operator==(const PartitionCounts&, const PartitionCounts&) = default;
};

struct ThresholdReport {
  double iou_threshold = 0.0;
  std::optional<double> map;          // full split
  std::map<int, double> ap_per_class;  // full split, classes with ground truth
  PartitionCounts partitions;          // full split
  PartitionCounts eval_partitions;     // eval split
  std::map<std::string, PartitionScores> scores;  // eval split
  std::optional<double> mce_cls;
  std::optional<double> ce_reg;
  std::vector<CalibrationRecord> calibration;  // fitted on the recal split

  friend bool operator==(const ThresholdReport&, const ThresholdReport&) = default;
};

// Headline numbers are averages over the IoU sweep. mAP and partition counts
// use every frame; scores and calibration errors use the eval split only.
struct EvalReport {
  std::optional<double> map;
  PartitionCounts partitions;
  std::map<std::string, PartitionScores> scores;
  std::optional<double> mce_cls;
  std::optional<double> ce_reg;
  int64_t full_frames = 0;
  int64_t recal_frames = 0;
  int64_t eval_frames = 0;
  std::vector<ThresholdReport> per_threshold;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// Significant digits kept for every real number in the written report.
inline constexpr int kReportDigits = 6;

// Rounds to kReportDigits significant digits.
double RoundSignificant(double value);

// Sorted keys, one JSON document. Throws Error(kNumerical) if any number is
// NaN or infinite (infinite score thresholds are written as null).
std::string ReportToJson(const EvalReport& report);
void WriteReport(const EvalReport& report, std::ostream& out);
EvalReport ParseReport(const std::string& json);

}  // namespace uqdet

#endif  // UQDET_REPORT_H_
