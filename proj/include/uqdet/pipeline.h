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

#ifndef UQDET_PIPELINE_H_
#define UQDET_PIPELINE_H_

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uqdet/detmodel.h"
#include "uqdet/evaluate.h"
#include "uqdet/fusion.h"
#include "uqdet/report.h"
#include "uqdet/synth.h"

namespace uqdet {

enum class SplitRule {
  kHashParity,  // even FNV-1a hash of the frame id goes to recal
  kAlternate,   // sorted frame ids alternate recal, eval, recal, ...
};

struct PipelineConfig {
  // 0 accepts the head count of the input.
  int heads = 0;
  FusionConfig fusion;
  EvalConfig eval;
  SplitRule split = SplitRule::kHashParity;
  bool swap_split = false;
};

// Plain-text config grammar: one `key = value` per line, '#' starts a
// comment, blank lines are ignored. Keys may appear at most once.
using KeyValues = std::vector<std::pair<std::string, std::string>>;
KeyValues ParseKeyValues(std::istream& in);
KeyValues ReadKeyValueFile(const std::filesystem::path& path);

struct ConfigKey {
  std::string name;
  std::string help;
};

const std::vector<ConfigKey>& PipelineConfigKeys();
const std::vector<ConfigKey>& SynthConfigKeys();

// Throw Error(kValidation) on unknown keys or unparsable values.
void SetPipelineOption(PipelineConfig& config, const std::string& key,
                       const std::string& value);
void SetSynthOption(SynthConfig& config, const std::string& key,
                    const std::string& value);

void ValidatePipelineConfig(const PipelineConfig& config);

// Per-head NMS, consensus clustering and merging, frame-parallel. Output order
// follows the input.
std::vector<FusedFrame> FuseFrames(std::span<const Frame> frames,
                                   const PipelineConfig& config);

// true marks a recal frame.
std::vector<bool> AssignRecalSplit(std::span<const std::string> frame_ids,
                                   SplitRule rule, bool swap);

// Joins fused frames with ground truth and runs the IoU sweep. Both inputs
// must cover the same frame ids.
EvalReport EvaluateFused(std::span<const FusedFrame> fused,
                         std::span<const GroundTruthFrame> ground_truth,
                         const PipelineConfig& config);

// File-level commands behind the CLI.
void CmdFuse(const std::filesystem::path& dets, const PipelineConfig& config,
             const std::filesystem::path& out);
EvalReport CmdEvaluate(const std::filesystem::path& fused,
                       const std::filesystem::path& ground_truth,
                       const PipelineConfig& config,
                       const std::filesystem::path& out);
void CmdSynth(const SynthConfig& config, const std::filesystem::path& out_dir);
// Prints one line per loss; returns false if any check fails.
bool CmdLossesCheck(int inputs, uint64_t seed, std::ostream& out);

}  // namespace uqdet

#endif  // UQDET_PIPELINE_H_
