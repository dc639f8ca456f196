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

#include "uqdet/detmodel.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json_util.h"
#include "uqdet/error.h"

namespace uqdet {
namespace {

using internal::Field;
using internal::Json;

std::string LineContext(size_t line_no) {
  return "line " + std::to_string(line_no) + ": ";
}

Detection ParseDetection(const Json& j, int head_id, int& num_classes) {
  Detection det;
  det.box = ValidatedBox(internal::ToBoxVector(Field(j, "box"), "box"));
  const BoxVector log_var =
      internal::ToBoxVector(Field(j, "log_var"), "log_var");
  for (int d = 0; d < kBoxDims; ++d) {
    det.log_var[d] = std::clamp(log_var[d], kMinLogVar, kMaxLogVar);
  }
  std::vector<double> logits = internal::ToDoubles(Field(j, "logits"), "logits");
  if (logits.empty()) ThrowValidation("logits: empty");
  if (num_classes == 0) num_classes = static_cast<int>(logits.size());
  if (static_cast<int>(logits.size()) != num_classes) {
    ThrowValidation("logits: expected " + std::to_string(num_classes) +
                    " classes, got " + std::to_string(logits.size()));
  }
  det.cls = ClassDistribution::FromLogits(std::move(logits));
  if (auto it = j.find("probs"); it != j.end()) {
    // Optional redundant probabilities: must be normalized and agree with
    // the logits.
    const ClassDistribution given = ClassDistribution::FromProbs(
        internal::ToDoubles(*it, "probs", det.cls.probs().size()));
    for (size_t k = 0; k < given.probs().size(); ++k) {
      if (std::abs(given.probs()[k] - det.cls.probs()[k]) > kProbSumTolerance) {
        ThrowValidation("probs disagree with softmax(logits)");
      }
    }
  }
  if (auto it = j.find("score"); it != j.end()) {
    det.score = internal::ToFiniteDouble(*it, "score");
    if (det.score < 0.0 || det.score > 1.0) {
      ThrowValidation("score outside [0, 1]");
    }
  } else {
    det.score = det.cls.MaxProb();
  }
  det.head_id = head_id;
  return det;
}

Json DetectionToJson(const Detection& det) {
  Json j;
  j["box"] = internal::ToJsonArray(det.box.ToVector());
  j["log_var"] = internal::ToJsonArray(det.log_var);
  j["logits"] = internal::ToJsonArray(det.cls.logits());
  j["score"] = det.score;
  return j;
}

template <typename LineFn>
void ForEachLine(std::istream& in, LineFn fn) {
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(),
                    [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    try {
      fn(Json::parse(line), line_no);
    } catch (const Json::exception& e) {
      ThrowValidation(LineContext(line_no) + "malformed JSON: " + e.what());
    } catch (const Error& e) {
      throw Error(e.kind(), LineContext(line_no) + e.what());
    }
  }
  if (in.bad()) ThrowValidation("read failure on input stream");
}

}  // namespace

std::vector<double> Softmax(std::span<const double> logits) {
  std::vector<double> probs(logits.size());
  if (logits.empty()) return probs;
  const double max = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (size_t k = 0; k < logits.size(); ++k) {
    probs[k] = std::exp(logits[k] - max);
    sum += probs[k];
  }
  for (double& p : probs) p /= sum;
  return probs;
}

ClassDistribution ClassDistribution::FromLogits(std::vector<double> logits) {
  for (double v : logits) {
    if (!std::isfinite(v)) ThrowValidation("logit is not finite");
  }
  ClassDistribution out;
  out.probs_ = Softmax(logits);
  out.logits_ = std::move(logits);
  return out;
}

ClassDistribution ClassDistribution::FromProbs(std::vector<double> probs,
                                               bool renormalize) {
  if (probs.empty()) ThrowValidation("empty probability vector");
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) {
      ThrowValidation("probability is negative or not finite");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbSumTolerance) {
    ThrowValidation("distribution not normalized (sum " + std::to_string(sum) +
                    ")");
  }
  ClassDistribution out;
  out.logits_.reserve(probs.size());
  for (double& p : probs) {
    if (renormalize) p /= sum;
    out.logits_.push_back(p > 0.0 ? std::max(std::log(p), kMinLogProb)
                                  : kMinLogProb);
  }
  out.probs_ = std::move(probs);
  return out;
}

int ClassDistribution::Argmax(int background) const {
  int best = -1;
  for (int k = 0; k < num_classes(); ++k) {
    if (k == background) continue;
    if (best < 0 || probs_[k] > probs_[best]) best = k;
  }
  return best;
}

double ClassDistribution::MaxProb(int background) const {
  const int k = Argmax(background);
  return k < 0 ? 0.0 : probs_[k];
}

std::vector<Frame> ParseFrames(std::istream& in, const ParseOptions& options) {
  std::vector<Frame> frames;
  int num_heads = options.expected_heads;
  int num_classes = options.expected_classes;
  ForEachLine(in, [&](const Json& j, size_t) {
    Frame frame;
    frame.frame_id = internal::ToString(Field(j, "frame_id"), "frame_id");
    const Json& heads = Field(j, "heads");
    if (!heads.is_array()) ThrowValidation("heads: expected an array");
    if (num_heads == 0) num_heads = static_cast<int>(heads.size());
    if (static_cast<int>(heads.size()) != num_heads) {
      ThrowValidation("inconsistent head count: expected " +
                      std::to_string(num_heads) + ", got " +
                      std::to_string(heads.size()));
    }
    for (int h = 0; h < num_heads; ++h) {
      const Json& list = heads[h];
      if (!list.is_array()) ThrowValidation("head entry: expected an array");
      std::vector<Detection> dets;
      dets.reserve(list.size());
      for (const Json& d : list) dets.push_back(ParseDetection(d, h, num_classes));
      frame.heads.push_back(std::move(dets));
    }
    frames.push_back(std::move(frame));
  });
  return frames;
}

void WriteFrames(std::ostream& out, std::span<const Frame> frames) {
  for (const Frame& frame : frames) {
    Json j;
    j["frame_id"] = frame.frame_id;
    Json heads = Json::array();
    for (const auto& head : frame.heads) {
      Json list = Json::array();
      for (const Detection& det : head) list.push_back(DetectionToJson(det));
      heads.push_back(std::move(list));
    }
    j["heads"] = std::move(heads);
    out << j.dump() << '\n';
  }
  if (!out) ThrowValidation("write failure on detections output");
}

std::vector<GroundTruthFrame> ParseGroundTruth(std::istream& in,
                                               int num_classes) {
  std::vector<GroundTruthFrame> frames;
  ForEachLine(in, [&](const Json& j, size_t) {
    GroundTruthFrame frame;
    frame.frame_id = internal::ToString(Field(j, "frame_id"), "frame_id");
    const Json& objects = Field(j, "objects");
    if (!objects.is_array()) ThrowValidation("objects: expected an array");
    for (const Json& o : objects) {
      GroundTruthObject gt;
      gt.box = ValidatedBox(internal::ToBoxVector(Field(o, "box"), "box"));
      gt.class_id = internal::ToInt(Field(o, "class_id"), "class_id");
      if (gt.class_id < 0 || (num_classes > 0 && gt.class_id >= num_classes)) {
        ThrowValidation("class_id " + std::to_string(gt.class_id) +
                        " out of range");
      }
      frame.objects.push_back(gt);
    }
    frames.push_back(std::move(frame));
  });
  return frames;
}

void WriteGroundTruth(std::ostream& out,
                      std::span<const GroundTruthFrame> frames) {
  for (const GroundTruthFrame& frame : frames) {
    Json j;
    j["frame_id"] = frame.frame_id;
    Json objects = Json::array();
    for (const GroundTruthObject& gt : frame.objects) {
      Json o;
      o["box"] = internal::ToJsonArray(gt.box.ToVector());
      o["class_id"] = gt.class_id;
      objects.push_back(std::move(o));
    }
    j["objects"] = std::move(objects);
    out << j.dump() << '\n';
  }
  if (!out) ThrowValidation("write failure on ground-truth output");
}

std::map<int, std::string> ParseClassMap(std::istream& in) {
  std::map<int, std::string> names;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    int id = 0;
    std::string name;
    if (!(fields >> id)) {
      ThrowValidation(LineContext(line_no) + "expected \"id name\"");
    }
    if (!(fields >> name)) ThrowValidation(LineContext(line_no) + "missing name");
    if (id < 0) ThrowValidation(LineContext(line_no) + "negative class id");
    if (!names.emplace(id, name).second) {
      ThrowValidation(LineContext(line_no) + "duplicate class id " +
                      std::to_string(id));
    }
  }
  return names;
}

void WriteClassMap(std::ostream& out, const std::map<int, std::string>& names) {
  for (const auto& [id, name] : names) out << id << ' ' << name << '\n';
}

void AttachGroundTruth(std::vector<Frame>& frames,
                       std::span<const GroundTruthFrame> ground_truth) {
  std::unordered_map<std::string, const GroundTruthFrame*> by_id;
  for (const GroundTruthFrame& gt : ground_truth) by_id[gt.frame_id] = &gt;
  std::string missing;
  for (Frame& frame : frames) {
    auto it = by_id.find(frame.frame_id);
    if (it == by_id.end()) {
      missing += (missing.empty() ? "" : ", ") + frame.frame_id;
      continue;
    }
    frame.ground_truth = it->second->objects;
  }
  if (!missing.empty()) ThrowValidation("missing ground truth for frames: " + missing);
}

}  // namespace uqdet
