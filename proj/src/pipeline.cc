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

#include "uqdet/pipeline.h"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "uqdet/error.h"
#include "uqdet/losses.h"
#include "uqdet/parallel.h"
#include "uqdet/seeding.h"

namespace uqdet {
namespace {

std::string Trim(const std::string& s) {
  const size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void BadValue(const std::string& key, const std::string& value,
                           const char* expected) {
  ThrowValidation("config key " + key + ": expected " + expected + ", got \"" +
                  value + "\"");
}

double ParseDouble(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  errno = 0;
  const double d = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || errno == ERANGE || !std::isfinite(d)) {
    BadValue(key, value, "a finite number");
  }
  return d;
}

int64_t ParseInt64(const std::string& key, const std::string& value) {
  int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    BadValue(key, value, "an integer");
  }
  return v;
}

int ParseInt(const std::string& key, const std::string& value) {
  const int64_t v = ParseInt64(key, value);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    BadValue(key, value, "an integer in range");
  }
  return static_cast<int>(v);
}

uint64_t ParseSeed(const std::string& key, const std::string& value) {
  uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    BadValue(key, value, "a non-negative integer");
  }
  return v;
}

bool ParseBool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  BadValue(key, value, "true or false");
}

IouKind ParseIouKind(const std::string& key, const std::string& value) {
  if (value == "bev") return IouKind::kBev;
  if (value == "3d") return IouKind::k3d;
  BadValue(key, value, "bev or 3d");
}

// One value, or kBoxDims comma-separated values.
BoxVector ParseBoxVector(const std::string& key, const std::string& value) {
  std::vector<double> parts;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(ParseDouble(key, Trim(item)));
  BoxVector out{};
  if (parts.size() == 1) {
    out.fill(parts[0]);
  } else if (parts.size() == static_cast<size_t>(kBoxDims)) {
    std::copy(parts.begin(), parts.end(), out.begin());
  } else {
    BadValue(key, value, "1 or 7 comma-separated numbers");
  }
  return out;
}

template <typename Config>
using Setter = std::function<void(Config&, const std::string&, const std::string&)>;

template <typename Config>
struct KeySpec {
  const char* name;
  const char* help;
  Setter<Config> set;
};

const std::vector<KeySpec<PipelineConfig>>& PipelineSpecs() {
  using C = PipelineConfig;
  using S = std::string;
  static const auto* specs = new std::vector<KeySpec<C>>{
      {"heads", "expected number of heads (0: take from input)",
       [](C& c, const S& k, const S& v) { c.heads = ParseInt(k, v); }},
      {"nms_iou", "per-head NMS BEV IoU threshold",
       [](C& c, const S& k, const S& v) { c.fusion.nms_iou = ParseDouble(k, v); }},
      {"cluster_iou", "IoU a member must exceed to join a cluster",
       [](C& c, const S& k, const S& v) { c.fusion.cluster_iou = ParseDouble(k, v); }},
      {"cluster_iou_kind", "bev or 3d",
       [](C& c, const S& k, const S& v) { c.fusion.cluster_iou_kind = ParseIouKind(k, v); }},
      {"min_cluster_size", "minimum cluster size (0: floor(N/2)+1)",
       [](C& c, const S& k, const S& v) { c.fusion.min_cluster_size = ParseInt(k, v); }},
      {"background_class", "background class id (-1: none)",
       [](C& c, const S& k, const S& v) {
         c.fusion.background_class = ParseInt(k, v);
         c.eval.background_class = c.fusion.background_class;
       }},
      {"iou_min", "first TP IoU threshold of the sweep",
       [](C& c, const S& k, const S& v) { c.eval.iou_min = ParseDouble(k, v); }},
      {"iou_max", "last TP IoU threshold of the sweep",
       [](C& c, const S& k, const S& v) { c.eval.iou_max = ParseDouble(k, v); }},
      {"iou_step", "sweep increment",
       [](C& c, const S& k, const S& v) { c.eval.iou_step = ParseDouble(k, v); }},
      {"iou_kind", "IoU used for matching: bev or 3d",
       [](C& c, const S& k, const S& v) { c.eval.iou_kind = ParseIouKind(k, v); }},
      {"mce_bins", "probability bins for the classification calibration error",
       [](C& c, const S& k, const S& v) { c.eval.mce_bins = ParseInt(k, v); }},
      {"ce_levels", "quantile levels for the regression calibration error",
       [](C& c, const S& k, const S& v) { c.eval.ce_levels = ParseInt(k, v); }},
      {"energy_samples", "Monte Carlo samples per energy score",
       [](C& c, const S& k, const S& v) { c.eval.energy_samples = ParseInt(k, v); }},
      {"seed", "seed for Monte Carlo scores",
       [](C& c, const S& k, const S& v) { c.eval.seed = ParseSeed(k, v); }},
      {"class_aware", "match only same-class ground truth in partitions",
       [](C& c, const S& k, const S& v) { c.eval.class_aware = ParseBool(k, v); }},
      {"conditioning", "temperature grouping: predicted or label",
       [](C& c, const S& k, const S& v) {
         if (v == "predicted") {
           c.eval.conditioning = TemperatureConditioning::kPredictedClass;
         } else if (v == "label") {
           c.eval.conditioning = TemperatureConditioning::kLabel;
         } else {
           BadValue(k, v, "predicted or label");
         }
       }},
      {"num_classes", "class count (0: infer)",
       [](C& c, const S& k, const S& v) { c.eval.num_classes = ParseInt(k, v); }},
      {"split", "recal/eval rule: hash or alternate",
       [](C& c, const S& k, const S& v) {
         if (v == "hash") {
           c.split = SplitRule::kHashParity;
         } else if (v == "alternate") {
           c.split = SplitRule::kAlternate;
         } else {
           BadValue(k, v, "hash or alternate");
         }
       }},
      {"swap_split", "exchange the recal and eval halves",
       [](C& c, const S& k, const S& v) { c.swap_split = ParseBool(k, v); }},
      {"threads", "worker threads (0: all cores)",
       [](C& c, const S& k, const S& v) { c.eval.threads = ParseInt(k, v); }},
  };
  return *specs;
}

const std::vector<KeySpec<SynthConfig>>& SynthSpecs() {
  using C = SynthConfig;
  using S = std::string;
  static const auto* specs = new std::vector<KeySpec<C>>{
      {"seed", "generator seed",
       [](C& c, const S& k, const S& v) { c.seed = ParseSeed(k, v); }},
      {"frames", "number of frames",
       [](C& c, const S& k, const S& v) { c.frames = ParseInt(k, v); }},
      {"heads", "number of heads",
       [](C& c, const S& k, const S& v) { c.heads = ParseInt(k, v); }},
      {"classes", "number of classes",
       [](C& c, const S& k, const S& v) { c.classes = ParseInt(k, v); }},
      {"gt_per_frame", "mean objects per frame (Poisson)",
       [](C& c, const S& k, const S& v) { c.gt_per_frame = ParseDouble(k, v); }},
      {"miss_rate", "probability that a head misses an object",
       [](C& c, const S& k, const S& v) { c.miss_rate = ParseDouble(k, v); }},
      {"fp_bg_rate", "mean background detections per head and frame",
       [](C& c, const S& k, const S& v) { c.fp_bg_rate = ParseDouble(k, v); }},
      {"box_noise_sigma", "true noise std per box dimension (1 or 7 values)",
       [](C& c, const S& k, const S& v) { c.box_noise_sigma = ParseBoxVector(k, v); }},
      {"head_noise_sigma", "extra independent noise std per head",
       [](C& c, const S& k, const S& v) { c.head_noise_sigma = ParseDouble(k, v); }},
      {"logit_temperature", "temperature of the true label distribution",
       [](C& c, const S& k, const S& v) { c.logit_temperature = ParseDouble(k, v); }},
      {"variance_honesty", "predicted / true variance ratio",
       [](C& c, const S& k, const S& v) { c.variance_honesty = ParseDouble(k, v); }},
      {"class_confidence", "softmax confidence of emitted logits",
       [](C& c, const S& k, const S& v) { c.class_confidence = ParseDouble(k, v); }},
      {"scene_extent", "half-width of the square scene in meters",
       [](C& c, const S& k, const S& v) { c.scene_extent = ParseDouble(k, v); }},
  };
  return *specs;
}

template <typename Config>
std::vector<ConfigKey> KeysOf(const std::vector<KeySpec<Config>>& specs) {
  std::vector<ConfigKey> keys;
  for (const auto& s : specs) keys.push_back({s.name, s.help});
  return keys;
}

template <typename Config>
void SetOption(const std::vector<KeySpec<Config>>& specs, Config& config,
               const std::string& key, const std::string& value) {
  for (const auto& s : specs) {
    if (key == s.name) {
      s.set(config, key, value);
      return;
    }
  }
  ThrowValidation("unknown config key: " + key);
}

std::ifstream OpenInput(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) ThrowValidation("cannot open " + path.string());
  return in;
}

// Writes to a sibling temporary and renames, so a failed run leaves no
// partial output behind.
void WriteFileAtomically(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) ThrowValidation("cannot write " + path.string());
    out << text;
    out.flush();
    if (!out) ThrowValidation("write failure on " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) ThrowValidation("cannot write " + path.string() + ": " + ec.message());
}

}  // namespace

KeyValues ParseKeyValues(std::istream& in) {
  KeyValues out;
  std::set<std::string> seen;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const size_t hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    line = Trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) ThrowValidation(where + "expected key = value");
    std::string key = Trim(line.substr(0, eq));
    std::string value = Trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) ThrowValidation(where + "expected key = value");
    if (!seen.insert(key).second) ThrowValidation(where + "duplicate key " + key);
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

KeyValues ReadKeyValueFile(const std::filesystem::path& path) {
  std::ifstream in = OpenInput(path);
  try {
    return ParseKeyValues(in);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

const std::vector<ConfigKey>& PipelineConfigKeys() {
  static const auto* keys = new std::vector<ConfigKey>(KeysOf(PipelineSpecs()));
  return *keys;
}

const std::vector<ConfigKey>& SynthConfigKeys() {
  static const auto* keys = new std::vector<ConfigKey>(KeysOf(SynthSpecs()));
  return *keys;
}

void SetPipelineOption(PipelineConfig& config, const std::string& key,
                       const std::string& value) {
  SetOption(PipelineSpecs(), config, key, value);
}

void SetSynthOption(SynthConfig& config, const std::string& key,
                    const std::string& value) {
  SetOption(SynthSpecs(), config, key, value);
}

void ValidatePipelineConfig(const PipelineConfig& c) {
  if (c.heads < 0) ThrowValidation("heads must be non-negative");
  auto ratio = [](double v, const char* what) {
    if (!(v > 0.0 && v <= 1.0)) ThrowValidation(std::string(what) + " must lie in (0, 1]");
  };
  ratio(c.fusion.nms_iou, "nms_iou");
  // Strict ">" joining makes 1 unreachable, so [0, 1) is the useful range.
  if (!(c.fusion.cluster_iou >= 0.0 && c.fusion.cluster_iou < 1.0)) {
    ThrowValidation("cluster_iou must lie in [0, 1)");
  }
  if (c.fusion.min_cluster_size < 0) ThrowValidation("min_cluster_size must be non-negative");
  if (c.heads > 0 && c.fusion.min_cluster_size > c.heads) {
    ThrowValidation("min_cluster_size exceeds the number of heads");
  }
  if (c.fusion.background_class < kNoBackground) {
    ThrowValidation("background_class must be -1 or a class id");
  }
  IouSweep(c.eval.iou_min, c.eval.iou_max, c.eval.iou_step);
  if (c.eval.mce_bins < 2) ThrowValidation("mce_bins must be at least 2");
  if (c.eval.ce_levels < 2) ThrowValidation("ce_levels must be at least 2");
  if (c.eval.energy_samples < 2) ThrowValidation("energy_samples must be at least 2");
  if (c.eval.num_classes < 0) ThrowValidation("num_classes must be non-negative");
  if (c.eval.threads < 0) ThrowValidation("threads must be non-negative");
}

std::vector<FusedFrame> FuseFrames(std::span<const Frame> frames,
                                   const PipelineConfig& config) {
  ValidatePipelineConfig(config);
  for (const Frame& f : frames) {
    if (config.heads > 0 && f.num_heads() != config.heads) {
      ThrowValidation("frame " + f.frame_id + ": " + std::to_string(f.num_heads()) +
                      " heads, config expects " + std::to_string(config.heads));
    }
  }
  std::vector<FusedFrame> out(frames.size());
  ParallelFor(frames.size(), config.eval.threads,
              [&](size_t i) { out[i] = FuseFrame(frames[i], config.fusion); });
  return out;
}

std::vector<bool> AssignRecalSplit(std::span<const std::string> frame_ids,
                                   SplitRule rule, bool swap) {
  std::vector<bool> recal(frame_ids.size(), false);
  if (rule == SplitRule::kHashParity) {
    for (size_t i = 0; i < frame_ids.size(); ++i) {
      recal[i] = (Fnv1a64(frame_ids[i]) & 1) == 0;
    }
  } else {
    std::vector<size_t> order(frame_ids.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return frame_ids[a] < frame_ids[b]; });
    for (size_t r = 0; r < order.size(); ++r) recal[order[r]] = r % 2 == 0;
  }
  if (swap) recal.flip();
  return recal;
}

EvalReport EvaluateFused(std::span<const FusedFrame> fused,
                         std::span<const GroundTruthFrame> ground_truth,
                         const PipelineConfig& config) {
  ValidatePipelineConfig(config);
  std::map<std::string, const GroundTruthFrame*> gt_by_id;
  for (const GroundTruthFrame& g : ground_truth) {
    if (!gt_by_id.emplace(g.frame_id, &g).second) {
      ThrowValidation("duplicate ground truth frame id: " + g.frame_id);
    }
  }
  std::set<std::string> fused_ids;
  std::vector<std::string> missing;
  for (const FusedFrame& f : fused) {
    if (!fused_ids.insert(f.frame_id).second) {
      ThrowValidation("duplicate fused frame id: " + f.frame_id);
    }
    if (gt_by_id.count(f.frame_id) == 0) missing.push_back(f.frame_id);
  }
  auto list = [](const std::vector<std::string>& ids) {
    std::string s;
    for (const std::string& id : ids) s += (s.empty() ? "" : ", ") + id;
    return s;
  };
  if (!missing.empty()) ThrowValidation("no ground truth for frames: " + list(missing));
  std::vector<std::string> extra;
  for (const auto& [id, g] : gt_by_id) {
    if (fused_ids.count(id) == 0) extra.push_back(id);
  }
  if (!extra.empty()) ThrowValidation("no detections for frames: " + list(extra));

  std::vector<std::string> ids;
  for (const FusedFrame& f : fused) ids.push_back(f.frame_id);
  const std::vector<bool> is_recal = AssignRecalSplit(ids, config.split, config.swap_split);
  std::vector<LabeledFrame> recal, eval;
  for (size_t i = 0; i < fused.size(); ++i) {
    LabeledFrame lf{fused[i].frame_id, fused[i].fused,
                    gt_by_id.at(fused[i].frame_id)->objects};
    (is_recal[i] ? recal : eval).push_back(std::move(lf));
  }
  return EvaluateSweep(recal, eval, config.eval);
}

void CmdFuse(const std::filesystem::path& dets, const PipelineConfig& config,
             const std::filesystem::path& out) {
  std::ifstream in = OpenInput(dets);
  ParseOptions options;
  options.expected_heads = config.heads;
  options.expected_classes = config.eval.num_classes;
  const std::vector<Frame> frames = ParseFrames(in, options);
  const std::vector<FusedFrame> fused = FuseFrames(frames, config);
  std::ostringstream text;
  WriteFusedFrames(text, fused);
  WriteFileAtomically(out, text.str());
}

EvalReport CmdEvaluate(const std::filesystem::path& fused,
                       const std::filesystem::path& ground_truth,
                       const PipelineConfig& config,
                       const std::filesystem::path& out) {
  std::ifstream fused_in = OpenInput(fused);
  const std::vector<FusedFrame> frames = ParseFusedFrames(fused_in);
  std::ifstream gt_in = OpenInput(ground_truth);
  const std::vector<GroundTruthFrame> gts = ParseGroundTruth(gt_in, config.eval.num_classes);
  EvalReport report = EvaluateFused(frames, gts, config);
  WriteFileAtomically(out, ReportToJson(report));
  return report;
}

void CmdSynth(const SynthConfig& config, const std::filesystem::path& out_dir) {
  WriteSynthetic(GenerateSynthetic(config), config, out_dir);
}

bool CmdLossesCheck(int inputs, uint64_t seed, std::ostream& out) {
  bool ok = true;
  for (const GradientCheckResult& r : RunGradientChecks(inputs, seed)) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-12s inputs=%d max_rel_err=%.3e %s\n",
                  r.loss_name.c_str(), r.inputs, r.max_relative_error,
                  r.passed ? "PASS" : "FAIL");
    out << line;
    ok = ok && r.passed;
  }
  return ok;
}

}  // namespace uqdet
