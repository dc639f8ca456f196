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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "gtest/gtest.h"
#include "uqdet/error.h"

namespace uqdet {
namespace {

namespace fs = std::filesystem;

fs::path FreshDir(const std::string& name) {
  const fs::path dir = fs::path(::testing::TempDir()) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

SynthConfig SmallSynth() {
  SynthConfig s;
  s.seed = 9;
  s.frames = 80;
  s.gt_per_frame = 6;
  s.fp_bg_rate = 1.0;
  s.logit_temperature = 1.5;
  return s;
}

TEST(KeyValuesTest, ParsesCommentsAndBlankLines) {
  std::istringstream in("# header\n\nnms_iou = 0.4  # trailing\n  seed=3\n");
  const KeyValues kv = ParseKeyValues(in);
  ASSERT_EQ(kv.size(), 2u);
  EXPECT_EQ(kv[0], (std::pair<std::string, std::string>{"nms_iou", "0.4"}));
  EXPECT_EQ(kv[1].second, "3");
}

TEST(KeyValuesTest, RejectsMalformedAndDuplicateLines) {
  std::istringstream missing("seed = 1\njust words\n");
  try {
    ParseKeyValues(missing);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kValidation);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  std::istringstream dup("seed = 1\nseed = 2\n");
  EXPECT_THROW(ParseKeyValues(dup), Error);
}

TEST(PipelineOptionsTest, AppliesKnownKeys) {
  PipelineConfig c;
  SetPipelineOption(c, "nms_iou", "0.3");
  SetPipelineOption(c, "min_cluster_size", "3");
  SetPipelineOption(c, "background_class", "0");
  SetPipelineOption(c, "iou_kind", "bev");
  SetPipelineOption(c, "conditioning", "label");
  SetPipelineOption(c, "split", "alternate");
  SetPipelineOption(c, "swap_split", "true");
  EXPECT_EQ(c.fusion.nms_iou, 0.3);
  EXPECT_EQ(c.fusion.min_cluster_size, 3);
  EXPECT_EQ(c.fusion.background_class, 0);
  EXPECT_EQ(c.eval.background_class, 0);
  EXPECT_EQ(c.eval.iou_kind, IouKind::kBev);
  EXPECT_EQ(c.eval.conditioning, TemperatureConditioning::kLabel);
  EXPECT_EQ(c.split, SplitRule::kAlternate);
  EXPECT_TRUE(c.swap_split);
}

TEST(PipelineOptionsTest, RejectsUnknownKeysAndBadValues) {
  PipelineConfig c;
  EXPECT_THROW(SetPipelineOption(c, "nms", "0.3"), Error);
  EXPECT_THROW(SetPipelineOption(c, "nms_iou", "abc"), Error);
  EXPECT_THROW(SetPipelineOption(c, "heads", "2.5"), Error);
  EXPECT_THROW(SetPipelineOption(c, "split", "random"), Error);
  c.eval.iou_min = 0.05;
  EXPECT_THROW(ValidatePipelineConfig(c), Error);
}

TEST(PipelineOptionsTest, EveryKeyHasAFlagName) {
  std::set<std::string> names;
  for (const ConfigKey& k : PipelineConfigKeys()) {
    EXPECT_TRUE(names.insert(k.name).second) << k.name;
    EXPECT_FALSE(k.help.empty()) << k.name;
  }
  for (const char* required : {"heads", "nms_iou", "cluster_iou", "min_cluster_size",
                               "iou_min", "iou_max", "iou_step", "mce_bins", "ce_levels",
                               "energy_samples", "seed", "split"}) {
    EXPECT_EQ(names.count(required), 1u) << required;
  }
}

TEST(SynthOptionsTest, BoxNoiseAcceptsOneOrSevenValues) {
  SynthConfig c;
  SetSynthOption(c, "box_noise_sigma", "0.2");
  for (double s : c.box_noise_sigma) EXPECT_EQ(s, 0.2);
  SetSynthOption(c, "box_noise_sigma", "1,2,3,4,5,6,7");
  EXPECT_EQ(c.box_noise_sigma[6], 7.0);
  EXPECT_THROW(SetSynthOption(c, "box_noise_sigma", "1,2"), Error);
  EXPECT_THROW(SetSynthOption(c, "nope", "1"), Error);
}

TEST(SplitTest, AlternateAndSwap) {
  const std::vector<std::string> ids = {"c", "a", "d", "b"};
  const std::vector<bool> alt = AssignRecalSplit(ids, SplitRule::kAlternate, false);
  EXPECT_EQ(alt, (std::vector<bool>{true, true, false, false}));
  const std::vector<bool> swapped = AssignRecalSplit(ids, SplitRule::kAlternate, true);
  for (size_t i = 0; i < ids.size(); ++i) EXPECT_NE(alt[i], swapped[i]);
}

TEST(SplitTest, HashParityIsOrderIndependentAndRoughlyHalf) {
  std::vector<std::string> ids;
  for (int i = 0; i < 2000; ++i) ids.push_back("frame_" + std::to_string(i));
  const std::vector<bool> a = AssignRecalSplit(ids, SplitRule::kHashParity, false);
  std::vector<std::string> rev(ids.rbegin(), ids.rend());
  const std::vector<bool> b = AssignRecalSplit(rev, SplitRule::kHashParity, false);
  int recal = 0;
  for (size_t i = 0; i < ids.size(); ++i) {
    EXPECT_EQ(a[i], b[ids.size() - 1 - i]);
    recal += a[i] ? 1 : 0;
  }
  EXPECT_NEAR(recal, 1000, 100);
}

TEST(FuseFramesTest, IdenticalNoiselessHeadsReproduceSingleHead) {
  SynthConfig s;
  s.frames = 10;
  s.heads = 3;
  s.box_noise_sigma = {};
  s.class_confidence = 1.0;
  const SynthDataset d = GenerateSynthetic(s);
  const std::vector<FusedFrame> fused = FuseFrames(d.frames, PipelineConfig{});
  for (size_t f = 0; f < fused.size(); ++f) {
    const std::vector<Detection> single = Nms(d.frames[f].heads[0], 0.5);
    ASSERT_EQ(fused[f].fused.size(), single.size());
    for (size_t i = 0; i < single.size(); ++i) {
      EXPECT_EQ(fused[f].fused[i].box, single[i].box);
      EXPECT_EQ(fused[f].fused[i].cls.probs(), single[i].cls.probs());
      EXPECT_EQ(fused[f].fused[i].score, single[i].score);
    }
  }
}

TEST(FuseFramesTest, TwoHeadsOneEmptyFusesNothing) {
  SynthConfig s;
  s.frames = 5;
  SynthDataset d = GenerateSynthetic(s);
  for (Frame& f : d.frames) f.heads[1].clear();
  for (const FusedFrame& f : FuseFrames(d.frames, PipelineConfig{})) {
    EXPECT_TRUE(f.fused.empty());
  }
}

TEST(FuseFramesTest, HeadCountMismatch) {
  SynthConfig s;
  s.frames = 2;
  const SynthDataset d = GenerateSynthetic(s);
  PipelineConfig c;
  c.heads = 4;
  EXPECT_THROW(FuseFrames(d.frames, c), Error);
}

TEST(FuseFramesTest, ParallelEqualsSequential) {
  const SynthDataset d = GenerateSynthetic(SmallSynth());
  PipelineConfig seq;
  PipelineConfig par;
  par.eval.threads = 4;
  std::ostringstream a, b;
  WriteFusedFrames(a, FuseFrames(d.frames, seq));
  WriteFusedFrames(b, FuseFrames(d.frames, par));
  EXPECT_EQ(a.str(), b.str());
}

TEST(EvaluateFusedTest, MissingGroundTruthListsIds) {
  const SynthDataset d = GenerateSynthetic(SmallSynth());
  const auto fused = FuseFrames(d.frames, PipelineConfig{});
  std::vector<GroundTruthFrame> gts(d.ground_truth.begin() + 2, d.ground_truth.end());
  try {
    EvaluateFused(fused, gts, PipelineConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("frame_000000, frame_000001"), std::string::npos);
  }
}

TEST(EvaluateFusedTest, SwappedSplitKeepsCountsChangesTemperatures) {
  const SynthDataset d = GenerateSynthetic(SmallSynth());
  PipelineConfig c;
  const auto fused = FuseFrames(d.frames, c);
  const EvalReport a = EvaluateFused(fused, d.ground_truth, c);
  c.swap_split = true;
  const EvalReport b = EvaluateFused(fused, d.ground_truth, c);
  EXPECT_EQ(a.recal_frames, b.eval_frames);
  EXPECT_EQ(a.map, b.map);
  bool any_temperature_differs = false;
  for (size_t i = 0; i < a.per_threshold.size(); ++i) {
    const auto& ta = a.per_threshold[i];
    const auto& tb = b.per_threshold[i];
    EXPECT_EQ(ta.ap_per_class, tb.ap_per_class);
    // Counts on the union agree whenever both splits pick the same score
    // thresholds; the raw matching itself never depends on the split.
    bool same_thresholds = true;
    for (size_t k = 0; k < ta.calibration.size(); ++k) {
      same_thresholds = same_thresholds &&
                        ta.calibration[k].score_threshold == tb.calibration[k].score_threshold;
      any_temperature_differs = any_temperature_differs ||
                                ta.calibration[k].temperature != tb.calibration[k].temperature;
    }
    if (same_thresholds) {
      EXPECT_EQ(ta.partitions, tb.partitions);
    }
  }
  EXPECT_TRUE(any_temperature_differs);
}

TEST(StagedPipelineTest, FilesEqualInMemory) {
  const fs::path dir = FreshDir("uqdet_staged");
  const SynthConfig s = SmallSynth();
  CmdSynth(s, dir / "data");
  PipelineConfig c;
  CmdFuse(dir / "data" / "detections.jsonl", c, dir / "fused.jsonl");
  const EvalReport staged = CmdEvaluate(dir / "fused.jsonl", dir / "data" / "ground_truth.jsonl",
                                        c, dir / "report.json");
  const SynthDataset d = GenerateSynthetic(s);
  const EvalReport direct = EvaluateFused(FuseFrames(d.frames, c), d.ground_truth, c);
  EXPECT_EQ(staged, direct);
  EXPECT_EQ(ReadFile(dir / "report.json"), ReportToJson(direct));
  EXPECT_FALSE(fs::exists(dir / "report.json.tmp"));
  fs::remove_all(dir);
}

TEST(StagedPipelineTest, ThreadsDoNotChangeReport) {
  const SynthDataset d = GenerateSynthetic(SmallSynth());
  PipelineConfig seq, par;
  par.eval.threads = 0;
  const std::string a = ReportToJson(EvaluateFused(FuseFrames(d.frames, seq), d.ground_truth, seq));
  const std::string b = ReportToJson(EvaluateFused(FuseFrames(d.frames, par), d.ground_truth, par));
  EXPECT_EQ(a, b);
}

int RunCli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(UQDET_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(CliTest, SynthIsReproducible) {
  const fs::path dir = FreshDir("uqdet_cli_synth");
  ASSERT_EQ(RunCli("synth --seed 7 --frames 20 --out-dir " + (dir / "a").string(), dir / "log"), 0);
  ASSERT_EQ(RunCli("synth --seed 7 --frames 20 --out-dir " + (dir / "b").string(), dir / "log"), 0);
  for (const char* f : {"detections.jsonl", "ground_truth.jsonl", "classes.txt", "synth.oracle.json"}) {
    EXPECT_EQ(ReadFile(dir / "a" / f), ReadFile(dir / "b" / f)) << f;
    EXPECT_FALSE(ReadFile(dir / "a" / f).empty()) << f;
  }
  fs::remove_all(dir);
}

TEST(CliTest, EndToEndWithConfigFileAndOverrides) {
  const fs::path dir = FreshDir("uqdet_cli_e2e");
  {
    std::ofstream cfg(dir / "synth.cfg");
    cfg << "# small run\nframes = 30\nseed = 5\nfp_bg_rate = 1\n";
    std::ofstream pipe(dir / "pipeline.cfg");
    pipe << "iou_min = 0.5\niou_max = 0.7\nthreads = 2\n";
  }
  const std::string data = (dir / "data").string();
  ASSERT_EQ(RunCli("synth --config " + (dir / "synth.cfg").string() + " --out-dir " + data,
                   dir / "log"), 0);
  ASSERT_EQ(RunCli("fuse --dets " + data + "/detections.jsonl --config " +
                       (dir / "pipeline.cfg").string() + " --out " + (dir / "fused.jsonl").string(),
                   dir / "log"), 0);
  ASSERT_EQ(RunCli("evaluate --fused " + (dir / "fused.jsonl").string() + " --gt " + data +
                       "/ground_truth.jsonl --config " + (dir / "pipeline.cfg").string() +
                       " --iou-max 0.6 --out " + (dir / "report.json").string(),
                   dir / "log"), 0);
  const EvalReport r = ParseReport(ReadFile(dir / "report.json"));
  EXPECT_EQ(r.per_threshold.size(), 3u);
  EXPECT_EQ(r.full_frames, 30);
  fs::remove_all(dir);
}

TEST(CliTest, ExitCodes) {
  const fs::path dir = FreshDir("uqdet_cli_codes");
  EXPECT_EQ(RunCli("", dir / "log"), 2);
  EXPECT_EQ(RunCli("fuse --dets " + (dir / "missing.jsonl").string() + " --out " +
                       (dir / "o.jsonl").string(), dir / "log"), 2);
  EXPECT_NE(ReadFile(dir / "log").find("missing.jsonl"), std::string::npos);
  {
    std::ofstream bad(dir / "bad.jsonl");
    bad << "{\"frame_id\":\"a\",\"heads\":[[{\"box\":[0,0,0,1,1,1,0],"
           "\"log_var\":[0,0,0,0,0,0,0],\"logits\":[0.5],\"probs\":[0.7]}]]}\n";
  }
  EXPECT_EQ(RunCli("fuse --dets " + (dir / "bad.jsonl").string() + " --out " +
                       (dir / "o.jsonl").string(), dir / "log"), 2);
  EXPECT_FALSE(fs::exists(dir / "o.jsonl"));
  EXPECT_EQ(RunCli("fuse --dets " + (dir / "bad.jsonl").string() + " --nms-iou 2 --out " +
                       (dir / "o.jsonl").string(), dir / "log"), 2);
  EXPECT_EQ(RunCli("synth --frames -1 --out-dir " + (dir / "s").string(), dir / "log"), 2);
  fs::remove_all(dir);
}

TEST(CliTest, LossesCheckPasses) {
  const fs::path dir = FreshDir("uqdet_cli_losses");
  ASSERT_EQ(RunCli("losses-check --inputs 200", dir / "log"), 0);
  const std::string out = ReadFile(dir / "log");
  for (const char* name : {"aleatoric_regression", "von_mises", "focal_softmax", "smooth_l1"}) {
    EXPECT_NE(out.find(name), std::string::npos) << name;
  }
  EXPECT_EQ(out.find("FAIL"), std::string::npos);
  std::ostringstream direct;
  EXPECT_TRUE(CmdLossesCheck(50, 1, direct));
  fs::remove_all(dir);
}

}  // namespace
}  // namespace uqdet
