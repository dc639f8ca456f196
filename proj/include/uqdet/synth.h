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

#ifndef UQDET_SYNTH_H_
#define UQDET_SYNTH_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "uqdet/detmodel.h"
#include "uqdet/geometry.h"

namespace uqdet {

struct SynthConfig {
  uint64_t seed = 0;
  int frames = 100;
  int heads = 2;
  int classes = 3;
  double gt_per_frame = 5.0;  // Poisson mean
  double miss_rate = 0.0;     // per head and object
  double fp_bg_rate = 0.0;    // Poisson mean per head and frame
  // True per-dimension noise, drawn once per object and shared by the heads.
  BoxVector box_noise_sigma{0.1, 0.1, 0.05, 0.1, 0.05, 0.05, 0.05};
  // Extra independent noise per head and dimension.
  double head_noise_sigma = 0.0;
  // Labels follow softmax(logits / logit_temperature).
  double logit_temperature = 1.0;
  // Predicted variance = honesty * true variance.
  double variance_honesty = 1.0;
  // Softmax confidence of the emitted logits; 1 gives exact one-hot vectors.
  double class_confidence = 0.9;
  // Object centers lie in [-scene_extent, scene_extent]^2.
  double scene_extent = 50.0;
};

// Object size ranges; the minimum center distance is twice the largest extent.
inline constexpr double kSynthMinLength = 3.5;
inline constexpr double kSynthMaxLength = 4.5;
inline constexpr double kSynthMinWidth = 1.5;
inline constexpr double kSynthMaxWidth = 2.0;
inline constexpr double kSynthMinHeight = 1.4;
inline constexpr double kSynthMaxHeight = 1.8;
inline constexpr int kSynthMaxTries = 10000;

// Logit magnitude standing in for an exact one-hot vector.
inline constexpr double kOneHotLogit = 800.0;

void ValidateSynthConfig(const SynthConfig& config);

// True parameters behind one emitted detection.
struct OracleEntry {
  std::string frame_id;
  int head_id = 0;
  int index = 0;        // position within the head's list
  int gt_index = -1;    // -1 for background detections
  int emitted_class = 0;
  double label_prob = 0.0;  // P(label = emitted_class) under the true model
  BoxVector true_sigma{};
};

struct SynthDataset {
  std::vector<Frame> frames;
  std::vector<GroundTruthFrame> ground_truth;
  std::vector<OracleEntry> oracle;
};

// Deterministic for a fixed config: each frame draws from its own stream
// seeded by (seed, frame index).
SynthDataset GenerateSynthetic(const SynthConfig& config);

// Writes detections.jsonl, ground_truth.jsonl, classes.txt and
// synth.oracle.json into `dir`, creating it if needed.
void WriteSynthetic(const SynthDataset& data, const SynthConfig& config,
                    const std::filesystem::path& dir);

// Expected Gaussian NLL of one detection under truthful variances. Requires
// variance_honesty == 1 and head_noise_sigma == 0.
double OracleExpectedNllReg(const SynthConfig& config);

// Same closed form for explicit standard deviations (all positive).
double ExpectedGaussianNll(std::span<const double> sigma);

}  // namespace uqdet

#endif  // UQDET_SYNTH_H_
