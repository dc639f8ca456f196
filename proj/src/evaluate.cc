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

#include "uqdet/evaluate.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <utility>

#include "uqdet/error.h"
#include "uqdet/metrics.h"
#include "uqdet/parallel.h"
#include "uqdet/partition.h"
#include "uqdet/seeding.h"

namespace uqdet {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::array<const char*, 3> kPartitionKeys = {kTpKey, kFpMlKey, kFpBgKey};
enum PartitionIndex { kTp = 0, kFpMl = 1, kFpBg = 2 };

using FramePtrs = std::vector<const LabeledFrame*>;

int InferNumClasses(const FramePtrs& frames, const EvalConfig& config) {
  int from_dets = 0;
  int max_gt = -1;
  for (const LabeledFrame* f : frames) {
    for (const FusedDetection& d : f->dets) {
      const int k = d.cls.num_classes();
      if (k < 1) ThrowValidation("frame " + f->frame_id + ": empty class distribution");
      if (from_dets != 0 && k != from_dets) {
        ThrowValidation("frame " + f->frame_id + ": inconsistent class count");
      }
      from_dets = k;
    }
    for (const GroundTruthObject& g : f->gts) max_gt = std::max(max_gt, g.class_id);
  }
  int k = config.num_classes > 0 ? config.num_classes : from_dets;
  if (k == 0) k = max_gt + 1;
  if (from_dets != 0 && from_dets != k) {
    ThrowValidation("detections have " + std::to_string(from_dets) +
                    " classes, expected " + std::to_string(k));
  }
  if (max_gt >= k) {
    ThrowValidation("ground truth class " + std::to_string(max_gt) +
                    " out of range for " + std::to_string(k) + " classes");
  }
  if (config.background_class < kNoBackground || config.background_class >= k) {
    ThrowValidation("background class out of range");
  }
  return k;
}

MatchOptions BaseOptions(double tp_iou, const EvalConfig& config) {
  MatchOptions o;
  o.tp_iou = tp_iou;
  o.class_aware = config.class_aware;
  o.background_class = config.background_class;
  o.iou_kind = config.iou_kind;
  return o;
}

std::optional<double> Mean(double sum, int64_t n) {
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

// Running sums for one partition on one frame or split.
struct Sums {
  int64_t count = 0;
  int64_t labeled = 0;
  double nll_cls = 0.0;
  double brier = 0.0;
  int64_t regressed = 0;
  double nll_reg = 0.0;
  double energy = 0.0;
  double se = 0.0;
  double mi = 0.0;

  void Add(const Sums& o) {
    count += o.count;
    labeled += o.labeled;
    nll_cls += o.nll_cls;
    brier += o.brier;
    regressed += o.regressed;
    nll_reg += o.nll_reg;
    energy += o.energy;
    se += o.se;
    mi += o.mi;
  }

  PartitionScores Finish() const {
    PartitionScores s;
    s.count = static_cast<double>(count);
    s.nll_cls = Mean(nll_cls, labeled);
    s.brier = Mean(brier, labeled);
    s.nll_reg = Mean(nll_reg, regressed);
    s.energy = Mean(energy, regressed);
    s.se = Mean(se, count);
    s.mi = Mean(mi, count);
    return s;
  }
};

struct EvalFrameResult {
  std::array<Sums, 3> sums;
  std::vector<LabeledDistribution> labeled;
  std::vector<RegressionSample> matched;
  PartitionCounts counts;
};

void AddCounts(PartitionCounts& total, const PartitionedFrame& p) {
  total.tp += static_cast<double>(p.tp.size());
  total.fp_ml += static_cast<double>(p.fp_ml.size());
  total.fp_bg += static_cast<double>(p.fp_bg.size());
  total.fn += static_cast<double>(p.fn_count);
  total.considered += static_cast<double>(p.considered);
}

// Energy scores depend only on (frame, detection, ground truth), so they are
// computed once per pair and reused across the sweep.
class EnergyCache {
 public:
  double Get(const LabeledFrame& frame, int det, int gt, const EvalConfig& config) {
    auto [it, inserted] = cache_.try_emplace({det, gt}, 0.0);
    if (inserted) {
      const uint64_t seed =
          MixSeed({config.seed, Fnv1a64(frame.frame_id), static_cast<uint64_t>(det),
                   static_cast<uint64_t>(gt)});
      const FusedDetection& d = frame.dets[det];
      it->second = EnergyScoreBox(d.box.ToVector(), d.total_var,
                                  frame.gts[gt].box.ToVector(),
                                  config.energy_samples, seed);
    }
    return it->second;
  }

 private:
  std::map<std::pair<int, int>, double> cache_;
};

EvalFrameResult ScoreEvalFrame(const LabeledFrame& frame, const MatchOptions& options,
                               std::span<const double> temperatures,
                               const EvalConfig& config, EnergyCache& energy) {
  EvalFrameResult r;
  const PartitionedFrame p = MatchPartitions(frame.dets, frame.gts, options);
  AddCounts(r.counts, p);
  auto score = [&](int det, int label, Sums& sums) {
    const FusedDetection& d = frame.dets[det];
    ++sums.count;
    sums.se += d.se;
    sums.mi += d.mi;
    if (label < 0) return;
    const int k = d.PredictedClass(config.background_class);
    const ClassDistribution cal = ApplyTemperature(d.cls, temperatures[k]);
    ++sums.labeled;
    sums.nll_cls += NllClassification(cal, label);
    sums.brier += Brier(cal, label);
    r.labeled.push_back({cal, label});
  };
  auto regress = [&](const Match& m, Sums& sums) {
    const FusedDetection& d = frame.dets[m.det];
    const BoxVector y = frame.gts[m.gt].box.ToVector();
    ++sums.regressed;
    sums.nll_reg += NllRegressionGaussian(d.box.ToVector(), d.total_var, y);
    sums.energy += energy.Get(frame, m.det, m.gt, config);
    r.matched.push_back({d.box.ToVector(), d.total_var, y});
  };
  for (const Match& m : p.tp) {
    score(m.det, frame.gts[m.gt].class_id, r.sums[kTp]);
    regress(m, r.sums[kTp]);
  }
  for (const Match& m : p.fp_ml) {
    score(m.det, frame.gts[m.gt].class_id, r.sums[kFpMl]);
    regress(m, r.sums[kFpMl]);
  }
  for (int det : p.fp_bg) score(det, config.background_class, r.sums[kFpBg]);
  return r;
}

// Averages the fields that are defined over the sweep.
class Averager {
 public:
  void Add(const std::optional<double>& v) {
    if (v.has_value()) {
      sum_ += *v;
      ++n_;
    }
  }
  std::optional<double> Get() const { return Mean(sum_, n_); }

 private:
  double sum_ = 0.0;
  int64_t n_ = 0;
};

void Summarize(EvalReport& report) {
  const double n = static_cast<double>(report.per_threshold.size());
  Averager map, mce, ce;
  PartitionCounts counts;
  std::map<std::string, std::array<Averager, 7>> scores;
  for (const ThresholdReport& t : report.per_threshold) {
    map.Add(t.map);
    mce.Add(t.mce_cls);
    ce.Add(t.ce_reg);
    counts.tp += t.partitions.tp / n;
    counts.fp_ml += t.partitions.fp_ml / n;
    counts.fp_bg += t.partitions.fp_bg / n;
    counts.fn += t.partitions.fn / n;
    counts.considered += t.partitions.considered / n;
    for (const auto& [key, s] : t.scores) {
      auto& a = scores[key];
      a[0].Add(s.count);
      a[1].Add(s.nll_cls);
      a[2].Add(s.brier);
      a[3].Add(s.nll_reg);
      a[4].Add(s.energy);
      a[5].Add(s.se);
      a[6].Add(s.mi);
    }
  }
  report.map = map.Get();
  report.mce_cls = mce.Get();
  report.ce_reg = ce.Get();
  report.partitions = counts;
  for (const auto& [key, a] : scores) {
    PartitionScores s;
    s.count = a[0].Get().value_or(0.0);
    s.nll_cls = a[1].Get();
    s.brier = a[2].Get();
    s.nll_reg = a[3].Get();
    s.energy = a[4].Get();
    s.se = a[5].Get();
    s.mi = a[6].Get();
    report.scores[key] = s;
  }
}

}  // namespace

std::vector<double> IouSweep(double iou_min, double iou_max, double iou_step) {
  auto in_range = [](double v) { return v > kBackgroundIou && v <= 1.0; };
  if (!in_range(iou_min) || !in_range(iou_max) || iou_min > iou_max) {
    ThrowValidation("IoU sweep bounds must satisfy 0.1 < min <= max <= 1");
  }
  if (!(iou_step > 0.0) || !std::isfinite(iou_step)) {
    ThrowValidation("IoU sweep step must be positive");
  }
  std::vector<double> out;
  for (int i = 0;; ++i) {
    const double t = std::round((iou_min + i * iou_step) * 1e9) / 1e9;
    if (t > iou_max + 1e-9) break;
    out.push_back(std::min(t, 1.0));
  }
  return out;
}

EvalReport EvaluateSweep(std::span<const LabeledFrame> recal,
                         std::span<const LabeledFrame> eval,
                         const EvalConfig& config) {
  if (config.mce_bins < 2) ThrowValidation("mce_bins must be at least 2");
  if (config.ce_levels < 2) ThrowValidation("ce_levels must be at least 2");
  if (config.energy_samples < 2) ThrowValidation("energy_samples must be at least 2");
  const std::vector<double> sweep =
      IouSweep(config.iou_min, config.iou_max, config.iou_step);

  FramePtrs recal_frames, eval_frames, all_frames;
  std::set<std::string> recal_ids;
  for (const LabeledFrame& f : recal) {
    if (!recal_ids.insert(f.frame_id).second) {
      ThrowValidation("duplicate frame id in recal split: " + f.frame_id);
    }
    recal_frames.push_back(&f);
  }
  std::set<std::string> eval_ids;
  for (const LabeledFrame& f : eval) {
    if (recal_ids.count(f.frame_id) != 0) {
      ThrowValidation("frame id in both recal and eval splits: " + f.frame_id);
    }
    if (!eval_ids.insert(f.frame_id).second) {
      ThrowValidation("duplicate frame id in eval split: " + f.frame_id);
    }
    eval_frames.push_back(&f);
  }
  all_frames = recal_frames;
  all_frames.insert(all_frames.end(), eval_frames.begin(), eval_frames.end());
  const int num_classes = InferNumClasses(all_frames, config);
  const int bg = config.background_class;

  std::vector<FrameView> recal_views;
  for (const LabeledFrame* f : recal_frames) recal_views.push_back({f->dets, f->gts});
  std::vector<int64_t> recal_gt(num_classes, 0), all_gt(num_classes, 0);
  for (const LabeledFrame* f : recal_frames) {
    for (const GroundTruthObject& g : f->gts) ++recal_gt[g.class_id];
  }
  for (const LabeledFrame* f : all_frames) {
    for (const GroundTruthObject& g : f->gts) ++all_gt[g.class_id];
  }

  EvalReport report;
  report.full_frames = static_cast<int64_t>(all_frames.size());
  report.recal_frames = static_cast<int64_t>(recal_frames.size());
  report.eval_frames = static_cast<int64_t>(eval_frames.size());
  std::vector<EnergyCache> energy(eval_frames.size());

  for (double tp_iou : sweep) {
    ThresholdReport t;
    t.iou_threshold = tp_iou;
    const MatchOptions base = BaseOptions(tp_iou, config);

    // Score thresholds on the recal split.
    std::vector<double> thresholds(num_classes, kInf);
    std::vector<CalibrationRecord> records(num_classes);
    for (int k = 0; k < num_classes; ++k) {
      CalibrationRecord& rec = records[k];
      rec.iou_threshold = tp_iou;
      rec.class_id = k;
      rec.score_threshold = kInf;
      if (k == bg) continue;
      if (recal_gt[k] == 0) {
        rec.no_ground_truth = true;
        continue;
      }
      MatchOptions o = base;
      o.only_class = k;
      const ThresholdSearch search = F1ScoreThreshold(recal_views, o);
      thresholds[k] = search.threshold;
      rec.score_threshold = search.threshold;
    }

    // Temperatures on the recal split.
    MatchOptions thresholded = base;
    thresholded.class_thresholds = thresholds;
    std::vector<std::vector<std::pair<int, LogitSample>>> per_frame(recal_frames.size());
    ParallelFor(recal_frames.size(), config.threads, [&](size_t i) {
      const LabeledFrame& f = *recal_frames[i];
      const PartitionedFrame p = MatchPartitions(f.dets, f.gts, thresholded);
      auto add = [&](int det, int label) {
        const FusedDetection& d = f.dets[det];
        const int key = config.conditioning == TemperatureConditioning::kLabel
                            ? label
                            : d.PredictedClass(bg);
        per_frame[i].push_back({key, LogitSample{d.cls.logits(), label}});
      };
      for (const Match& m : p.tp) add(m.det, f.gts[m.gt].class_id);
      for (const Match& m : p.fp_ml) add(m.det, f.gts[m.gt].class_id);
      if (bg != kNoBackground) {
        for (int det : p.fp_bg) add(det, bg);
      }
    });
    std::vector<std::vector<LogitSample>> samples(num_classes);
    for (auto& frame_samples : per_frame) {
      for (auto& [key, s] : frame_samples) samples[key].push_back(std::move(s));
    }
    std::vector<double> temperatures(num_classes, 1.0);
    for (int k = 0; k < num_classes; ++k) {
      const TemperatureFit fit = FitTemperature(samples[k]);
      temperatures[k] = fit.temperature;
      records[k].temperature = fit.temperature;
      records[k].samples = static_cast<int64_t>(samples[k].size());
      records[k].insufficient_samples = fit.insufficient_samples;
    }
    for (int k = 0; k < num_classes; ++k) {
      if (k != bg) t.calibration.push_back(records[k]);
    }

    // AP40 and partition counts on the full set.
    std::vector<PartitionCounts> frame_counts(all_frames.size());
    std::vector<std::vector<std::vector<RankedDetection>>> ranked(
        all_frames.size(), std::vector<std::vector<RankedDetection>>(num_classes));
    ParallelFor(all_frames.size(), config.threads, [&](size_t i) {
      const LabeledFrame& f = *all_frames[i];
      AddCounts(frame_counts[i], MatchPartitions(f.dets, f.gts, thresholded));
      for (int k = 0; k < num_classes; ++k) {
        if (k == bg) continue;
        MatchOptions o = base;
        o.class_aware = true;
        o.only_class = k;
        const PartitionedFrame p = MatchPartitions(f.dets, f.gts, o);
        std::vector<bool> is_tp(f.dets.size(), false);
        for (const Match& m : p.tp) is_tp[m.det] = true;
        for (size_t d = 0; d < f.dets.size(); ++d) {
          if (f.dets[d].PredictedClass(bg) == k) {
            ranked[i][k].push_back({f.dets[d].score, static_cast<bool>(is_tp[d])});
          }
        }
      }
    });
    for (const PartitionCounts& c : frame_counts) {
      t.partitions.tp += c.tp;
      t.partitions.fp_ml += c.fp_ml;
      t.partitions.fp_bg += c.fp_bg;
      t.partitions.fn += c.fn;
      t.partitions.considered += c.considered;
    }
    double ap_sum = 0.0;
    for (int k = 0; k < num_classes; ++k) {
      if (k == bg) continue;
      std::vector<RankedDetection> dets;
      for (auto& frame_ranked : ranked) {
        dets.insert(dets.end(), frame_ranked[k].begin(), frame_ranked[k].end());
      }
      if (const auto ap = Ap40(std::move(dets), all_gt[k])) {
        t.ap_per_class[k] = *ap;
        ap_sum += *ap;
      }
    }
    if (!t.ap_per_class.empty()) {
      t.map = ap_sum / static_cast<double>(t.ap_per_class.size());
    }

    // Calibrated scores on the eval split.
    std::vector<EvalFrameResult> results(eval_frames.size());
    ParallelFor(eval_frames.size(), config.threads, [&](size_t i) {
      results[i] = ScoreEvalFrame(*eval_frames[i], thresholded, temperatures,
                                  config, energy[i]);
    });
    std::array<Sums, 3> sums;
    std::vector<LabeledDistribution> labeled;
    std::vector<RegressionSample> matched;
    for (EvalFrameResult& r : results) {
      for (int p = 0; p < 3; ++p) sums[p].Add(r.sums[p]);
      t.eval_partitions.tp += r.counts.tp;
      t.eval_partitions.fp_ml += r.counts.fp_ml;
      t.eval_partitions.fp_bg += r.counts.fp_bg;
      t.eval_partitions.fn += r.counts.fn;
      t.eval_partitions.considered += r.counts.considered;
      labeled.insert(labeled.end(), r.labeled.begin(), r.labeled.end());
      matched.insert(matched.end(), r.matched.begin(), r.matched.end());
    }
    for (int p = 0; p < 3; ++p) t.scores[kPartitionKeys[p]] = sums[p].Finish();
    if (!labeled.empty()) {
      t.mce_cls = MarginalCalibrationError(labeled, config.mce_bins).mce;
    }
    if (!matched.empty()) {
      t.ce_reg = RegressionCalibrationError(matched, config.ce_levels);
    }
    report.per_threshold.push_back(std::move(t));
  }
  Summarize(report);
  return report;
}

}  // namespace uqdet
