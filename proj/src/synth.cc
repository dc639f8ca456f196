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

#include "uqdet/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>

#include "json_util.h"
#include "uqdet/error.h"
#include "uqdet/seeding.h"

namespace uqdet {
namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;
constexpr double kMinSynthExtent = 0.01;

double MaxObjectExtent() {
  return std::max({kSynthMaxLength, kSynthMaxWidth, kSynthMaxHeight});
}

std::string FrameId(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06d", index);
  return buf;
}

// Logit scale c with softmax(c * e_k)_k == confidence.
double LogitScale(double confidence, int classes) {
  if (classes == 1) return 0.0;
  if (confidence >= 1.0) return kOneHotLogit;
  return std::log(confidence * (classes - 1) / (1.0 - confidence));
}

std::vector<double> OneHotLogits(int k, int classes, double scale) {
  std::vector<double> logits(classes, 0.0);
  logits[k] = scale;
  return logits;
}

bool FarFromAll(double x, double y, const std::vector<GroundTruthObject>& objects,
                double min_distance) {
  for (const GroundTruthObject& o : objects) {
    const double dx = o.box.x - x;
    const double dy = o.box.y - y;
    if (dx * dx + dy * dy < min_distance * min_distance) return false;
  }
  return true;
}

struct FrameSample {
  Frame frame;
  GroundTruthFrame gt;
  std::vector<OracleEntry> oracle;
};

class FrameGenerator {
 public:
  FrameGenerator(const SynthConfig& config, int index)
      : config_(config),
        rng_(MixSeed({config.seed, static_cast<uint64_t>(index)})),
        scale_(LogitScale(config.class_confidence, config.classes)) {
    out_.frame.frame_id = FrameId(index);
    out_.gt.frame_id = out_.frame.frame_id;
    out_.frame.heads.resize(config.heads);
  }

  FrameSample Run() {
    SampleGroundTruth();
    for (size_t j = 0; j < out_.gt.objects.size(); ++j) EmitObject(static_cast<int>(j));
    for (int h = 0; h < config_.heads; ++h) EmitBackground(h);
    return std::move(out_);
  }

 private:
  double Uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }

  double Normal(double sigma) {
    if (sigma == 0.0) return 0.0;
    return std::normal_distribution<double>(0.0, sigma)(rng_);
  }

  int Poisson(double mean) {
    if (mean <= 0.0) return 0;
    return std::poisson_distribution<int>(mean)(rng_);
  }

  void CenterAwayFromGroundTruth(double& x, double& y) {
    const double min_distance = 2.0 * MaxObjectExtent();
    const double e = config_.scene_extent;
    for (int tries = 0; tries < kSynthMaxTries; ++tries) {
      x = Uniform(-e, e);
      y = Uniform(-e, e);
      if (FarFromAll(x, y, out_.gt.objects, min_distance)) return;
    }
    ThrowValidation("frame " + out_.frame.frame_id + ": could not place a box after " +
                    std::to_string(kSynthMaxTries) +
                    " tries; lower gt_per_frame or fp_bg_rate, or raise scene_extent");
  }

  Box7 RandomBox(double x, double y) {
    Box7 b;
    b.x = x;
    b.y = y;
    b.l = Uniform(kSynthMinLength, kSynthMaxLength);
    b.w = Uniform(kSynthMinWidth, kSynthMaxWidth);
    b.h = Uniform(kSynthMinHeight, kSynthMaxHeight);
    b.z = Uniform(-0.5, 0.5) + 0.5 * b.h;
    b.yaw = WrapAngle(Uniform(-kPi, kPi));
    return b;
  }

  void SampleGroundTruth() {
    const int n = Poisson(config_.gt_per_frame);
    for (int i = 0; i < n; ++i) {
      double x = 0.0, y = 0.0;
      CenterAwayFromGroundTruth(x, y);
      const Box7 box = RandomBox(x, y);
      // The emitted class is drawn first; the label then follows the
      // tempered softmax of the emitted logits.
      const int emitted =
          std::uniform_int_distribution<int>(0, config_.classes - 1)(rng_);
      const std::vector<double> tempered = Softmax(
          OneHotLogits(emitted, config_.classes, scale_ / config_.logit_temperature));
      const int label =
          std::discrete_distribution<int>(tempered.begin(), tempered.end())(rng_);
      out_.gt.objects.push_back({box, label});
      emitted_.push_back(emitted);
      label_prob_.push_back(tempered[emitted]);
    }
  }

  BoxVector LogVar(const BoxVector& sigma) const {
    BoxVector lv{};
    for (int d = 0; d < kBoxDims; ++d) {
      const double var = config_.variance_honesty * sigma[d] * sigma[d];
      lv[d] = var > 0.0 ? std::clamp(std::log(var), kMinLogVar, kMaxLogVar) : kMinLogVar;
    }
    return lv;
  }

  Detection MakeDetection(const BoxVector& v, int head, int emitted,
                          const BoxVector& sigma) {
    BoxVector b = v;
    for (int d = 3; d < 6; ++d) b[d] = std::max(b[d], kMinSynthExtent);
    b[kYawIndex] = WrapAngle(b[kYawIndex]);
    Detection det;
    det.box = Box7::FromVector(b);
    det.log_var = LogVar(sigma);
    det.cls = ClassDistribution::FromLogits(OneHotLogits(emitted, config_.classes, scale_));
    det.score = det.cls.MaxProb();
    det.head_id = head;
    return det;
  }

  void Record(int head, int gt_index, int emitted, double label_prob,
              const BoxVector& sigma) {
    OracleEntry e;
    e.frame_id = out_.frame.frame_id;
    e.head_id = head;
    e.index = static_cast<int>(out_.frame.heads[head].size()) - 1;
    e.gt_index = gt_index;
    e.emitted_class = emitted;
    e.label_prob = label_prob;
    e.true_sigma = sigma;
    out_.oracle.push_back(e);
  }

  void EmitObject(int j) {
    const BoxVector truth = out_.gt.objects[j].box.ToVector();
    BoxVector shared = truth;
    for (int d = 0; d < kBoxDims; ++d) shared[d] += Normal(config_.box_noise_sigma[d]);
    BoxVector sigma{};
    for (int d = 0; d < kBoxDims; ++d) {
      sigma[d] = std::hypot(config_.box_noise_sigma[d], config_.head_noise_sigma);
    }
    for (int h = 0; h < config_.heads; ++h) {
      if (Uniform(0.0, 1.0) < config_.miss_rate) continue;
      BoxVector v = shared;
      for (int d = 0; d < kBoxDims; ++d) v[d] += Normal(config_.head_noise_sigma);
      out_.frame.heads[h].push_back(MakeDetection(v, h, emitted_[j], sigma));
      Record(h, j, emitted_[j], label_prob_[j], sigma);
    }
  }

  void EmitBackground(int head) {
    const int n = Poisson(config_.fp_bg_rate);
    BoxVector sigma{};
    for (int d = 0; d < kBoxDims; ++d) {
      sigma[d] = std::hypot(config_.box_noise_sigma[d], config_.head_noise_sigma);
    }
    for (int i = 0; i < n; ++i) {
      double x = 0.0, y = 0.0;
      CenterAwayFromGroundTruth(x, y);
      const Box7 box = RandomBox(x, y);
      const int emitted =
          std::uniform_int_distribution<int>(0, config_.classes - 1)(rng_);
      out_.frame.heads[head].push_back(
          MakeDetection(box.ToVector(), head, emitted, sigma));
      Record(head, -1, emitted, 0.0, sigma);
    }
  }

  const SynthConfig& config_;
  std::mt19937_64 rng_;
  double scale_;
  FrameSample out_;
  std::vector<int> emitted_;
  std::vector<double> label_prob_;
};

void CheckStream(const std::ofstream& out, const std::filesystem::path& path) {
  if (!out) ThrowValidation("cannot write " + path.string());
}

}  // namespace

void ValidateSynthConfig(const SynthConfig& c) {
  if (c.frames < 0) ThrowValidation("frames must be non-negative");
  if (c.heads < 1) ThrowValidation("heads must be at least 1");
  if (c.classes < 1) ThrowValidation("classes must be at least 1");
  if (!(c.gt_per_frame >= 0.0) || !std::isfinite(c.gt_per_frame)) {
    ThrowValidation("gt_per_frame must be a non-negative number");
  }
  if (!(c.miss_rate >= 0.0 && c.miss_rate <= 1.0)) {
    ThrowValidation("miss_rate must lie in [0, 1]");
  }
  if (!(c.fp_bg_rate >= 0.0) || !std::isfinite(c.fp_bg_rate)) {
    ThrowValidation("fp_bg_rate must be a non-negative number");
  }
  for (double s : c.box_noise_sigma) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      ThrowValidation("box_noise_sigma entries must be non-negative");
    }
  }
  if (!(c.head_noise_sigma >= 0.0) || !std::isfinite(c.head_noise_sigma)) {
    ThrowValidation("head_noise_sigma must be non-negative");
  }
  if (!(c.logit_temperature > 0.0) || !std::isfinite(c.logit_temperature)) {
    ThrowValidation("logit_temperature must be positive");
  }
  if (!(c.variance_honesty > 0.0) || !std::isfinite(c.variance_honesty)) {
    ThrowValidation("variance_honesty must be positive");
  }
  if (c.classes > 1 && !(c.class_confidence > 1.0 / c.classes && c.class_confidence <= 1.0)) {
    ThrowValidation("class_confidence must lie in (1/classes, 1]");
  }
  if (!(c.scene_extent > 0.0) || !std::isfinite(c.scene_extent)) {
    ThrowValidation("scene_extent must be positive");
  }
}

SynthDataset GenerateSynthetic(const SynthConfig& config) {
  ValidateSynthConfig(config);
  SynthDataset data;
  data.frames.reserve(config.frames);
  data.ground_truth.reserve(config.frames);
  for (int i = 0; i < config.frames; ++i) {
    FrameSample s = FrameGenerator(config, i).Run();
    data.frames.push_back(std::move(s.frame));
    data.ground_truth.push_back(std::move(s.gt));
    data.oracle.insert(data.oracle.end(), s.oracle.begin(), s.oracle.end());
  }
  return data;
}

void WriteSynthetic(const SynthDataset& data, const SynthConfig& config,
                    const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) ThrowValidation("cannot create " + dir.string() + ": " + ec.message());
  {
    const auto path = dir / "detections.jsonl";
    std::ofstream out(path, std::ios::binary);
    CheckStream(out, path);
    WriteFrames(out, data.frames);
  }
  {
    const auto path = dir / "ground_truth.jsonl";
    std::ofstream out(path, std::ios::binary);
    CheckStream(out, path);
    WriteGroundTruth(out, data.ground_truth);
  }
  {
    const auto path = dir / "classes.txt";
    std::ofstream out(path, std::ios::binary);
    CheckStream(out, path);
    std::map<int, std::string> names;
    for (int k = 0; k < config.classes; ++k) names[k] = "class_" + std::to_string(k);
    WriteClassMap(out, names);
  }
  internal::Json oracle;
  oracle["seed"] = config.seed;
  oracle["frames"] = config.frames;
  oracle["heads"] = config.heads;
  oracle["classes"] = config.classes;
  oracle["gt_per_frame"] = config.gt_per_frame;
  oracle["miss_rate"] = config.miss_rate;
  oracle["fp_bg_rate"] = config.fp_bg_rate;
  oracle["box_noise_sigma"] = config.box_noise_sigma;
  oracle["head_noise_sigma"] = config.head_noise_sigma;
  oracle["logit_temperature"] = config.logit_temperature;
  oracle["variance_honesty"] = config.variance_honesty;
  oracle["class_confidence"] = config.class_confidence;
  oracle["scene_extent"] = config.scene_extent;
  if (config.variance_honesty == 1.0 && config.head_noise_sigma == 0.0 &&
      std::all_of(config.box_noise_sigma.begin(), config.box_noise_sigma.end(),
                  [](double s) { return s > 0.0; })) {
    oracle["expected_nll_reg"] = OracleExpectedNllReg(config);
  } else {
    oracle["expected_nll_reg"] = nullptr;
  }
  internal::Json entries = internal::Json::array();
  for (const OracleEntry& e : data.oracle) {
    entries.push_back({{"frame_id", e.frame_id},
                       {"head_id", e.head_id},
                       {"index", e.index},
                       {"gt_index", e.gt_index},
                       {"emitted_class", e.emitted_class},
                       {"label_prob", e.label_prob},
                       {"true_sigma", e.true_sigma}});
  }
  oracle["detections"] = std::move(entries);
  const auto path = dir / "synth.oracle.json";
  std::ofstream out(path, std::ios::binary);
  CheckStream(out, path);
  out << oracle.dump() << '\n';
  if (!out) ThrowValidation("write failure on " + path.string());
}

double ExpectedGaussianNll(std::span<const double> sigma) {
  double total = 0.0;
  for (double s : sigma) {
    if (!(s > 0.0) || !std::isfinite(s)) ThrowContract("sigma must be positive");
    total += 0.5 * (kLogTwoPi + std::log(s * s)) + 0.5;
  }
  return total;
}

double OracleExpectedNllReg(const SynthConfig& config) {
  if (config.variance_honesty != 1.0) {
    ThrowContract("closed-form regression NLL requires variance_honesty = 1");
  }
  if (config.head_noise_sigma != 0.0) {
    ThrowContract("closed-form regression NLL requires head_noise_sigma = 0");
  }
  return ExpectedGaussianNll(config.box_noise_sigma);
}

}  // namespace uqdet
