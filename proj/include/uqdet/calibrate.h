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

#ifndef UQDET_CALIBRATE_H_
#define UQDET_CALIBRATE_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "uqdet/detmodel.h"

namespace uqdet {

inline constexpr double kMinTemperature = 0.05;
inline constexpr double kMaxTemperature = 20.0;
inline constexpr double kTemperatureTolerance = 1e-4;
inline constexpr int kMinCalibrationSamples = 10;

struct LogitSample {
  std::vector<double> logits;
  int label = 0;
};

struct TemperatureFit {
  double temperature = 1.0;
  double nll_before = 0.0;  // mean NLL at T = 1
  double nll_after = 0.0;   // mean NLL at the fitted T
  bool insufficient_samples = false;
};

// Mean negative log-likelihood of softmax(logits / T) at the labels.
double MeanTemperatureNll(std::span<const LogitSample> samples, double temperature);

// Golden-section search for the NLL-minimizing temperature on [lo, hi].
// Fewer than kMinCalibrationSamples samples yield T = 1 with the flag set.
TemperatureFit FitTemperature(std::span<const LogitSample> samples,
                              double lo = kMinTemperature,
                              double hi = kMaxTemperature);

// Divides the logits by T and recomputes the probabilities.
ClassDistribution ApplyTemperature(const ClassDistribution& cls, double temperature);

enum class TemperatureConditioning { kPredictedClass, kLabel };

// One temperature per class, fitted at one (IoU threshold, score threshold).
struct CalibrationRecord {
  double iou_threshold = 0.0;
  int class_id = 0;
  double score_threshold = 0.0;
  double temperature = 1.0;
  int64_t samples = 0;
  bool insufficient_samples = false;
  bool no_ground_truth = false;

  friend bool operator==(const CalibrationRecord&,
                         const CalibrationRecord&) = default;
};

// JSON lines, one record per (IoU threshold, class).
void WriteCalibrationRecords(std::ostream& out,
                             std::span<const CalibrationRecord> records);
std::vector<CalibrationRecord> ParseCalibrationRecords(std::istream& in);

}  // namespace uqdet

#endif  // UQDET_CALIBRATE_H_
