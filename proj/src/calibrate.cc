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

#include "uqdet/calibrate.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "json_util.h"
#include "uqdet/error.h"

namespace uqdet {
namespace {

using internal::Field;
using internal::Json;

// -log softmax(logits / T)[label], via log-sum-exp.
double SampleNll(const LogitSample& s, double temperature) {
  double max = -std::numeric_limits<double>::infinity();
  for (double z : s.logits) max = std::max(max, z / temperature);
  double sum = 0.0;
  for (double z : s.logits) sum += std::exp(z / temperature - max);
  return max + std::log(sum) - s.logits[s.label] / temperature;
}

}  // namespace

double MeanTemperatureNll(std::span<const LogitSample> samples, double temperature) {
  if (!(temperature > 0.0)) ThrowContract("temperature must be positive");
  if (samples.empty()) ThrowContract("NLL of an empty sample set");
  double total = 0.0;
  for (const LogitSample& s : samples) {
    if (s.label < 0 || s.label >= static_cast<int>(s.logits.size())) {
      ThrowContract("label out of range");
    }
    total += SampleNll(s, temperature);
  }
  const double mean = total / static_cast<double>(samples.size());
  if (!std::isfinite(mean)) ThrowNumerical("temperature NLL is not finite");
  return mean;
}

TemperatureFit FitTemperature(std::span<const LogitSample> samples, double lo,
                              double hi) {
  if (!(lo > 0.0) || !(hi > lo)) ThrowContract("invalid temperature bounds");
  TemperatureFit fit;
  if (static_cast<int>(samples.size()) < kMinCalibrationSamples) {
    fit.insufficient_samples = true;
    if (!samples.empty()) {
      fit.nll_before = MeanTemperatureNll(samples, 1.0);
      fit.nll_after = fit.nll_before;
    }
    return fit;
  }
  for (const LogitSample& s : samples) {
    for (double z : s.logits) {
      if (!std::isfinite(z)) ThrowNumerical("logit is not finite");
    }
  }
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = MeanTemperatureNll(samples, c);
  double fd = MeanTemperatureNll(samples, d);
  while (b - a > kTemperatureTolerance) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = MeanTemperatureNll(samples, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = MeanTemperatureNll(samples, d);
    }
  }
  double best_t = fc <= fd ? c : d;
  double best_nll = std::min(fc, fd);
  const double mid = 0.5 * (a + b);
  if (const double f = MeanTemperatureNll(samples, mid); f < best_nll) {
    best_t = mid;
    best_nll = f;
  }
  fit.nll_before = MeanTemperatureNll(samples, 1.0);
  // T = 1 is always a candidate, so fitting never makes the set worse.
  if (lo <= 1.0 && 1.0 <= hi && fit.nll_before <= best_nll) {
    best_t = 1.0;
    best_nll = fit.nll_before;
  }
  fit.temperature = best_t;
  fit.nll_after = best_nll;
  return fit;
}

ClassDistribution ApplyTemperature(const ClassDistribution& cls, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    ThrowContract("temperature must be positive and finite");
  }
  std::vector<double> scaled = cls.logits();
  for (double& z : scaled) z /= temperature;
  return ClassDistribution::FromLogits(std::move(scaled));
}

void WriteCalibrationRecords(std::ostream& out,
                             std::span<const CalibrationRecord> records) {
  for (const CalibrationRecord& r : records) {
    Json j;
    j["iou_threshold"] = r.iou_threshold;
    j["class_id"] = r.class_id;
    // +inf thresholds (class never kept) serialize as null.
    if (std::isfinite(r.score_threshold)) {
      j["score_threshold"] = r.score_threshold;
    } else {
      j["score_threshold"] = nullptr;
    }
    j["temperature"] = r.temperature;
    j["samples"] = r.samples;
    j["insufficient_samples"] = r.insufficient_samples;
    j["no_ground_truth"] = r.no_ground_truth;
    out << j.dump() << '\n';
  }
  if (!out) ThrowValidation("write failure on calibration output");
}

std::vector<CalibrationRecord> ParseCalibrationRecords(std::istream& in) {
  std::vector<CalibrationRecord> records;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const Json j = Json::parse(line);
      CalibrationRecord r;
      r.iou_threshold = internal::ToFiniteDouble(Field(j, "iou_threshold"), "iou_threshold");
      r.class_id = internal::ToInt(Field(j, "class_id"), "class_id");
      const Json& st = Field(j, "score_threshold");
      r.score_threshold = st.is_null() ? std::numeric_limits<double>::infinity()
                                       : internal::ToFiniteDouble(st, "score_threshold");
      r.temperature = internal::ToFiniteDouble(Field(j, "temperature"), "temperature");
      if (!(r.temperature > 0.0)) ThrowValidation("temperature must be positive");
      r.samples = j.value("samples", int64_t{0});
      r.insufficient_samples = j.value("insufficient_samples", false);
      r.no_ground_truth = j.value("no_ground_truth", false);
      records.push_back(r);
    } catch (const Json::exception& e) {
      ThrowValidation("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.kind(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace uqdet
