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

#include "uqdet/report.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <ostream>

#include "json_util.h"
#include "uqdet/error.h"

namespace uqdet {
namespace {

using internal::Field;
using internal::Json;

Json Real(double value, const char* what) {
  if (!std::isfinite(value)) {
    ThrowNumerical(std::string("report field ") + what + " is not finite");
  }
  return RoundSignificant(value);
}

Json OptionalReal(const std::optional<double>& value, const char* what) {
  if (!value.has_value()) return nullptr;
  return Real(*value, what);
}

std::optional<double> ReadOptional(const Json& obj, const char* key) {
  const Json& v = Field(obj, key);
  if (v.is_null()) return std::nullopt;
  return internal::ToFiniteDouble(v, key);
}

Json CountsToJson(const PartitionCounts& c) {
  Json j;
  j["tp"] = Real(c.tp, "tp");
  j["fp_ml"] = Real(c.fp_ml, "fp_ml");
  j["fp_bg"] = Real(c.fp_bg, "fp_bg");
  j["fn"] = Real(c.fn, "fn");
  j["considered"] = Real(c.considered, "considered");
  return j;
}

PartitionCounts CountsFromJson(const Json& j) {
  PartitionCounts c;
  c.tp = internal::ToFiniteDouble(Field(j, "tp"), "tp");
  c.fp_ml = internal::ToFiniteDouble(Field(j, "fp_ml"), "fp_ml");
  c.fp_bg = internal::ToFiniteDouble(Field(j, "fp_bg"), "fp_bg");
  c.fn = internal::ToFiniteDouble(Field(j, "fn"), "fn");
  c.considered = internal::ToFiniteDouble(Field(j, "considered"), "considered");
  return c;
}

Json ScoresToJson(const std::map<std::string, PartitionScores>& scores) {
  Json j = Json::object();
  for (const auto& [name, s] : scores) {
    Json p;
    p["count"] = Real(s.count, "count");
    p["nll_cls"] = OptionalReal(s.nll_cls, "nll_cls");
    p["brier"] = OptionalReal(s.brier, "brier");
    p["nll_reg"] = OptionalReal(s.nll_reg, "nll_reg");
    p["energy"] = OptionalReal(s.energy, "energy");
    p["se"] = OptionalReal(s.se, "se");
    p["mi"] = OptionalReal(s.mi, "mi");
    j[name] = std::move(p);
  }
  return j;
}

std::map<std::string, PartitionScores> ScoresFromJson(const Json& j) {
  std::map<std::string, PartitionScores> scores;
  if (!j.is_object()) ThrowValidation("scores: expected an object");
  for (const auto& [name, p] : j.items()) {
    PartitionScores s;
    s.count = internal::ToFiniteDouble(Field(p, "count"), "count");
    s.nll_cls = ReadOptional(p, "nll_cls");
    s.brier = ReadOptional(p, "brier");
    s.nll_reg = ReadOptional(p, "nll_reg");
    s.energy = ReadOptional(p, "energy");
    s.se = ReadOptional(p, "se");
    s.mi = ReadOptional(p, "mi");
    scores[name] = s;
  }
  return scores;
}

Json CalibrationToJson(const CalibrationRecord& r) {
  Json j;
  j["iou_threshold"] = Real(r.iou_threshold, "iou_threshold");
  j["class_id"] = r.class_id;
  j["score_threshold"] = std::isfinite(r.score_threshold)
                             ? Json(RoundSignificant(r.score_threshold))
                             : Json(nullptr);
  j["temperature"] = Real(r.temperature, "temperature");
  j["samples"] = r.samples;
  j["insufficient_samples"] = r.insufficient_samples;
  j["no_ground_truth"] = r.no_ground_truth;
  return j;
}

CalibrationRecord CalibrationFromJson(const Json& j) {
  CalibrationRecord r;
  r.iou_threshold = internal::ToFiniteDouble(Field(j, "iou_threshold"), "iou_threshold");
  r.class_id = internal::ToInt(Field(j, "class_id"), "class_id");
  const Json& st = Field(j, "score_threshold");
  r.score_threshold = st.is_null() ? std::numeric_limits<double>::infinity()
                                   : internal::ToFiniteDouble(st, "score_threshold");
  r.temperature = internal::ToFiniteDouble(Field(j, "temperature"), "temperature");
  r.samples = Field(j, "samples").get<int64_t>();
  r.insufficient_samples = Field(j, "insufficient_samples").get<bool>();
  r.no_ground_truth = Field(j, "no_ground_truth").get<bool>();
  return r;
}

}  // namespace

double RoundSignificant(double value) {
  if (!std::isfinite(value) || value == 0.0) return value;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", kReportDigits, value);
  return std::strtod(buf, nullptr);
}

std::string ReportToJson(const EvalReport& r) {
  Json j;
  j["map"] = OptionalReal(r.map, "map");
  j["partitions"] = CountsToJson(r.partitions);
  j["scores"] = ScoresToJson(r.scores);
  j["mce_cls"] = OptionalReal(r.mce_cls, "mce_cls");
  j["ce_reg"] = OptionalReal(r.ce_reg, "ce_reg");
  j["splits"] = {{"map", "full"},
                 {"partitions", "full"},
                 {"scores", "eval"},
                 {"calibration", "recal"},
                 {"frames", {{"full", r.full_frames},
                             {"recal", r.recal_frames},
                             {"eval", r.eval_frames}}}};
  Json sweep = Json::array();
  for (const ThresholdReport& t : r.per_threshold) {
    Json e;
    e["iou_threshold"] = Real(t.iou_threshold, "iou_threshold");
    e["map"] = OptionalReal(t.map, "map");
    Json ap = Json::object();
    for (const auto& [k, v] : t.ap_per_class) ap[std::to_string(k)] = Real(v, "ap");
    e["ap_per_class"] = std::move(ap);
    e["partitions"] = CountsToJson(t.partitions);
    e["eval_partitions"] = CountsToJson(t.eval_partitions);
    e["scores"] = ScoresToJson(t.scores);
    e["mce_cls"] = OptionalReal(t.mce_cls, "mce_cls");
    e["ce_reg"] = OptionalReal(t.ce_reg, "ce_reg");
    Json cal = Json::array();
    for (const CalibrationRecord& c : t.calibration) cal.push_back(CalibrationToJson(c));
    e["calibration"] = std::move(cal);
    sweep.push_back(std::move(e));
  }
  j["per_threshold"] = std::move(sweep);
  return j.dump(2) + "\n";
}

void WriteReport(const EvalReport& report, std::ostream& out) {
  // Serialize fully first so a validation failure writes nothing.
  const std::string text = ReportToJson(report);
  out << text;
  out.flush();
  if (!out) ThrowValidation("write failure on report output");
}

EvalReport ParseReport(const std::string& text) {
  EvalReport r;
  try {
    const Json j = Json::parse(text);
    r.map = ReadOptional(j, "map");
    r.partitions = CountsFromJson(Field(j, "partitions"));
    r.scores = ScoresFromJson(Field(j, "scores"));
    r.mce_cls = ReadOptional(j, "mce_cls");
    r.ce_reg = ReadOptional(j, "ce_reg");
    const Json& frames = Field(Field(j, "splits"), "frames");
    r.full_frames = Field(frames, "full").get<int64_t>();
    r.recal_frames = Field(frames, "recal").get<int64_t>();
    r.eval_frames = Field(frames, "eval").get<int64_t>();
    for (const Json& e : Field(j, "per_threshold")) {
      ThresholdReport t;
      t.iou_threshold = internal::ToFiniteDouble(Field(e, "iou_threshold"), "iou_threshold");
      t.map = ReadOptional(e, "map");
      for (const auto& [k, v] : Field(e, "ap_per_class").items()) {
        t.ap_per_class[std::stoi(k)] = internal::ToFiniteDouble(v, "ap");
      }
      t.partitions = CountsFromJson(Field(e, "partitions"));
      t.eval_partitions = CountsFromJson(Field(e, "eval_partitions"));
      t.scores = ScoresFromJson(Field(e, "scores"));
      t.mce_cls = ReadOptional(e, "mce_cls");
      t.ce_reg = ReadOptional(e, "ce_reg");
      for (const Json& c : Field(e, "calibration")) {
        t.calibration.push_back(CalibrationFromJson(c));
      }
      r.per_threshold.push_back(std::move(t));
    }
  } catch (const Json::exception& e) {
    ThrowValidation(std::string("malformed report: ") + e.what());
  }
  return r;
}

}  // namespace uqdet
