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

#ifndef UQDET_DETMODEL_H_
#define UQDET_DETMODEL_H_

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uqdet/geometry.h"

namespace uqdet {

// Ingestion clamp for predicted log-variances.
inline constexpr double kMinLogVar = -20.0;
inline constexpr double kMaxLogVar = 10.0;

// Tolerance on the sum of an ingested probability vector.
inline constexpr double kProbSumTolerance = 1e-6;

// Floor used when a log-probability stands in for a logit.
inline constexpr double kMinLogProb = -690.0;

// Sentinel for "no background class" wherever a background id is accepted.
inline constexpr int kNoBackground = -1;

std::vector<double> Softmax(std::span<const double> logits);

// A categorical distribution that keeps its pre-softmax logits, so that
// temperature scaling can be applied after the fact.
class ClassDistribution {
 public:
  ClassDistribution() = default;

  static ClassDistribution FromLogits(std::vector<double> logits);

  // Builds from probabilities that sum to one within kProbSumTolerance. The
  // probabilities are renormalized unless `renormalize` is false (used when
  // reading back values this library wrote) and the logits are their
  // (floored) logs.
  static ClassDistribution FromProbs(std::vector<double> probs,
                                     bool renormalize = true);

  const std::vector<double>& logits() const { return logits_; }
  const std::vector<double>& probs() const { return probs_; }
  int num_classes() const { return static_cast<int>(probs_.size()); }

  // Most probable class, skipping `background` when it names a class. Ties go
  // to the lowest index.
  int Argmax(int background = kNoBackground) const;
  double MaxProb(int background = kNoBackground) const;

  friend bool operator==(const ClassDistribution&,
                         const ClassDistribution&) = default;

 private:
  std::vector<double> logits_;
  std::vector<double> probs_;
};

struct Detection {
  Box7 box;
  BoxVector log_var{};
  ClassDistribution cls;
  double score = 0.0;
  int head_id = 0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct GroundTruthObject {
  Box7 box;
  int class_id = 0;

  friend bool operator==(const GroundTruthObject&,
                         const GroundTruthObject&) = default;
};

struct Frame {
  std::string frame_id;
  std::vector<std::vector<Detection>> heads;
  std::optional<std::vector<GroundTruthObject>> ground_truth;

  int num_heads() const { return static_cast<int>(heads.size()); }

  friend bool operator==(const Frame&, const Frame&) = default;
};

struct GroundTruthFrame {
  std::string frame_id;
  std::vector<GroundTruthObject> objects;

  friend bool operator==(const GroundTruthFrame&,
                         const GroundTruthFrame&) = default;
};

struct ParseOptions {
  // 0 means "take it from the first record and require it afterwards".
  int expected_heads = 0;
  int expected_classes = 0;
};

// Parses the line-delimited detections format. Blank lines are skipped.
// Errors carry the 1-based line number.
std::vector<Frame> ParseFrames(std::istream& in, const ParseOptions& options = {});
void WriteFrames(std::ostream& out, std::span<const Frame> frames);

// `num_classes` > 0 enables the class id range check.
std::vector<GroundTruthFrame> ParseGroundTruth(std::istream& in,
                                               int num_classes = 0);
void WriteGroundTruth(std::ostream& out,
                      std::span<const GroundTruthFrame> frames);

// Plain text, one "id name" pair per line; '#' starts a comment.
std::map<int, std::string> ParseClassMap(std::istream& in);
void WriteClassMap(std::ostream& out, const std::map<int, std::string>& names);

// Fills Frame::ground_truth by frame id. Throws listing every frame id that
// has no ground truth record.
void AttachGroundTruth(std::vector<Frame>& frames,
                       std::span<const GroundTruthFrame> ground_truth);

}  // namespace uqdet

#endif  // UQDET_DETMODEL_H_
