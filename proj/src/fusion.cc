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

#include "uqdet/fusion.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "json_util.h"
#include "uqdet/error.h"
#include "uqdet/metrics.h"

namespace uqdet {
namespace {

using internal::Field;
using internal::Json;

// Highest score wins; ties go to the lowest head id.
const Detection& MostConfident(const Cluster& cluster) {
  const Detection* best = &cluster.members.front();
  for (const Detection& d : cluster.members) {
    if (d.score > best->score ||
        (d.score == best->score && d.head_id < best->head_id)) {
      best = &d;
    }
  }
  return *best;
}

// Member box vectors with yaw replaced by the wrapped deviation from
// `reference_yaw`.
std::vector<BoxVector> CenteredYawVectors(const Cluster& cluster,
                                          double reference_yaw) {
  std::vector<BoxVector> out;
  out.reserve(cluster.members.size());
  for (const Detection& d : cluster.members) {
    BoxVector v = d.box.ToVector();
    v[kYawIndex] = WrapDelta(v[kYawIndex] - reference_yaw);
    out.push_back(v);
  }
  return out;
}

Cluster SortedByHead(const Cluster& cluster) {
  Cluster sorted = cluster;
  std::stable_sort(sorted.members.begin(), sorted.members.end(),
                   [](const Detection& a, const Detection& b) {
                     return a.head_id < b.head_id;
                   });
  return sorted;
}

}  // namespace

int DefaultMinClusterSize(int num_heads) { return num_heads / 2 + 1; }

std::vector<Detection> Nms(std::vector<Detection> dets, double iou_threshold) {
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Detection& a, const Detection& b) {
                     return a.score > b.score;
                   });
  std::vector<Detection> kept;
  kept.reserve(dets.size());
  for (Detection& d : dets) {
    const bool suppressed =
        std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
          return BevIou(k.box, d.box) > iou_threshold;
        });
    if (!suppressed) kept.push_back(std::move(d));
  }
  return kept;
}

ClusterResult ClusterConsensus(std::span<const std::vector<Detection>> heads,
                               double iou_threshold, int min_cluster_size,
                               IouKind iou_kind) {
  const int num_heads = static_cast<int>(heads.size());
  if (min_cluster_size < 1 || min_cluster_size > num_heads) {
    ThrowContract("min_cluster_size " + std::to_string(min_cluster_size) +
                  " outside [1, " + std::to_string(num_heads) + "]");
  }
  struct Entry {
    int head;
    int index;
  };
  std::vector<Entry> pool;
  for (int h = 0; h < num_heads; ++h) {
    for (int i = 0; i < static_cast<int>(heads[h].size()); ++i) {
      pool.push_back({h, i});
    }
  }
  auto det = [&](const Entry& e) -> const Detection& {
    return heads[e.head][e.index];
  };
  std::stable_sort(pool.begin(), pool.end(), [&](const Entry& a, const Entry& b) {
    if (det(a).score != det(b).score) return det(a).score > det(b).score;
    return a.head < b.head;
  });

  std::vector<std::vector<bool>> assigned(num_heads);
  for (int h = 0; h < num_heads; ++h) assigned[h].assign(heads[h].size(), false);

  ClusterResult result;
  for (const Entry& seed : pool) {
    if (assigned[seed.head][seed.index]) continue;
    assigned[seed.head][seed.index] = true;
    const Detection& seed_det = det(seed);
    Cluster cluster;
    cluster.members.push_back(seed_det);
    for (int h = 0; h < num_heads; ++h) {
      if (h == seed.head) continue;
      int best = -1;
      double best_iou = iou_threshold;
      for (int i = 0; i < static_cast<int>(heads[h].size()); ++i) {
        if (assigned[h][i]) continue;
        const double iou = ComputeIou(iou_kind, seed_det.box, heads[h][i].box);
        // Strictly greater keeps the earliest (highest score after NMS) on ties.
        if (iou > best_iou) {
          best_iou = iou;
          best = i;
        }
      }
      if (best >= 0) {
        assigned[h][best] = true;
        cluster.members.push_back(heads[h][best]);
      }
    }
    // Members in head order, so downstream sums do not depend on the seed.
    std::sort(cluster.members.begin(), cluster.members.end(),
              [](const Detection& a, const Detection& b) {
                return a.head_id < b.head_id;
              });
    if (cluster.size() >= min_cluster_size) {
      result.valid.push_back(std::move(cluster));
    } else {
      result.discarded.push_back(std::move(cluster));
    }
  }
  return result;
}

MixtureMoments ComputeMixtureMoments(std::span<const double> means,
                                     std::span<const double> variances) {
  if (means.empty()) ThrowContract("mixture of zero components");
  if (means.size() != variances.size()) ThrowContract("mixture size mismatch");
  for (double v : variances) {
    if (v < 0.0) ThrowContract("negative component variance");
  }
  // Sums of deviations from the first component: equal components reproduce
  // their common mean and variance exactly.
  const double n = static_cast<double>(means.size());
  double shift = 0.0;
  double var_shift = 0.0;
  for (size_t i = 0; i < means.size(); ++i) {
    shift += means[i] - means[0];
    var_shift += variances[i] - variances[0];
  }
  const double mean = means[0] + shift / n;
  const double mean_var = variances[0] + var_shift / n;
  double spread = 0.0;
  for (double m : means) spread += (m - mean) * (m - mean);
  return {mean, mean_var + spread / n};
}

Covariance7 EpistemicCovariance(const Cluster& unordered) {
  if (unordered.members.empty()) ThrowContract("empty cluster");
  const Cluster cluster = SortedByHead(unordered);
  const std::vector<BoxVector> v =
      CenteredYawVectors(cluster, MostConfident(cluster).box.yaw);
  const double n = static_cast<double>(v.size());
  BoxVector mean{};
  for (const BoxVector& x : v) {
    for (int d = 0; d < kBoxDims; ++d) mean[d] += x[d] / n;
  }
  Covariance7 cov{};
  for (const BoxVector& x : v) {
    for (int a = 0; a < kBoxDims; ++a) {
      for (int b = 0; b < kBoxDims; ++b) {
        cov[a][b] += (x[a] - mean[a]) * (x[b] - mean[b]) / n;
      }
    }
  }
  return cov;
}

double EpistemicTotalVariance(const Cluster& cluster) {
  const Covariance7 cov = EpistemicCovariance(cluster);
  double trace = 0.0;
  for (int d = 0; d < kBoxDims; ++d) trace += cov[d][d];
  return trace;
}

double AleatoricTotalVariance(const Cluster& unordered) {
  if (unordered.members.empty()) ThrowContract("empty cluster");
  const Cluster cluster = SortedByHead(unordered);
  const double n = static_cast<double>(cluster.members.size());
  double trace = 0.0;
  for (int d = 0; d < kBoxDims; ++d) {
    double mean = 0.0;
    for (const Detection& m : cluster.members) mean += std::exp(m.log_var[d]);
    trace += mean / n;
  }
  return trace;
}

FusedDetection MergeCluster(const Cluster& unordered, int background) {
  if (unordered.members.empty()) ThrowContract("cannot merge an empty cluster");
  const Cluster cluster = SortedByHead(unordered);
  const Detection& lead = MostConfident(cluster);
  const size_t n = cluster.members.size();

  FusedDetection out;
  BoxVector merged{};
  std::vector<double> means(n), vars(n);
  for (int d = 0; d < kBoxDims; ++d) {
    for (size_t i = 0; i < n; ++i) {
      const Detection& m = cluster.members[i];
      means[i] = m.box.ToVector()[d];
      vars[i] = std::exp(m.log_var[d]);
    }
    if (d == kYawIndex) {
      for (double& mu : means) mu = WrapDelta(mu - lead.box.yaw);
      merged[d] = lead.box.yaw;
      out.total_var[d] = ComputeMixtureMoments(means, vars).variance;
    } else {
      const MixtureMoments mm = ComputeMixtureMoments(means, vars);
      merged[d] = mm.mean;
      out.total_var[d] = mm.variance;
    }
  }
  out.box = Box7::FromVector(merged);

  std::vector<ClassDistribution> dists;
  dists.reserve(n);
  for (const Detection& m : cluster.members) dists.push_back(m.cls);
  out.cls = ClassDistribution::FromProbs(MeanProbs(dists));
  out.score = out.cls.MaxProb(background);
  out.se = ShannonEntropy(out.cls);
  out.mi = std::min(MutualInformation(dists), out.se);
  out.etv = EpistemicTotalVariance(cluster);
  out.atv = AleatoricTotalVariance(cluster);
  out.cluster_size = static_cast<int>(n);
  for (const Detection& m : cluster.members) {
    out.members.push_back({m.head_id, m.score});
  }
  return out;
}

FusedFrame FuseFrame(const Frame& frame, const FusionConfig& config) {
  const int num_heads = frame.num_heads();
  if (num_heads == 0) ThrowValidation("frame " + frame.frame_id + " has no heads");
  std::vector<std::vector<Detection>> kept;
  kept.reserve(num_heads);
  for (const auto& head : frame.heads) kept.push_back(Nms(head, config.nms_iou));
  const int min_size = config.min_cluster_size > 0
                           ? config.min_cluster_size
                           : DefaultMinClusterSize(num_heads);
  ClusterResult clusters = ClusterConsensus(kept, config.cluster_iou, min_size,
                                            config.cluster_iou_kind);
  FusedFrame out;
  out.frame_id = frame.frame_id;
  out.discarded_clusters = static_cast<int>(clusters.discarded.size());
  out.fused.reserve(clusters.valid.size());
  for (const Cluster& c : clusters.valid) {
    out.fused.push_back(MergeCluster(c, config.background_class));
  }
  return out;
}

void WriteFusedFrames(std::ostream& out, std::span<const FusedFrame> frames) {
  for (const FusedFrame& frame : frames) {
    Json j;
    j["frame_id"] = frame.frame_id;
    Json list = Json::array();
    for (const FusedDetection& f : frame.fused) {
      Json o;
      o["box"] = internal::ToJsonArray(f.box.ToVector());
      o["total_var"] = internal::ToJsonArray(f.total_var);
      o["probs"] = internal::ToJsonArray(f.cls.probs());
      o["score"] = f.score;
      o["se"] = f.se;
      o["mi"] = f.mi;
      o["etv"] = f.etv;
      o["atv"] = f.atv;
      o["cluster_size"] = f.cluster_size;
      list.push_back(std::move(o));
    }
    j["fused"] = std::move(list);
    out << j.dump() << '\n';
  }
  if (!out) ThrowValidation("write failure on fused output");
}

std::vector<FusedFrame> ParseFusedFrames(std::istream& in) {
  std::vector<FusedFrame> frames;
  std::string line;
  size_t line_no = 0;
  int num_classes = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const Json j = Json::parse(line);
      FusedFrame frame;
      frame.frame_id = internal::ToString(Field(j, "frame_id"), "frame_id");
      const Json& list = Field(j, "fused");
      if (!list.is_array()) ThrowValidation("fused: expected an array");
      for (const Json& o : list) {
        FusedDetection f;
        f.box = ValidatedBox(internal::ToBoxVector(Field(o, "box"), "box"));
        f.total_var = internal::ToBoxVector(Field(o, "total_var"), "total_var");
        for (double v : f.total_var) {
          if (v < 0.0) ThrowValidation("total_var: negative component");
        }
        f.cls = ClassDistribution::FromProbs(
            internal::ToDoubles(Field(o, "probs"), "probs"), false);
        if (num_classes == 0) num_classes = f.cls.num_classes();
        if (f.cls.num_classes() != num_classes) {
          ThrowValidation("probs: inconsistent class count");
        }
        f.score = internal::ToFiniteDouble(Field(o, "score"), "score");
        f.se = internal::ToFiniteDouble(Field(o, "se"), "se");
        f.mi = internal::ToFiniteDouble(Field(o, "mi"), "mi");
        f.etv = internal::ToFiniteDouble(Field(o, "etv"), "etv");
        f.atv = internal::ToFiniteDouble(Field(o, "atv"), "atv");
        f.cluster_size = internal::ToInt(Field(o, "cluster_size"), "cluster_size");
        if (f.cluster_size < 1) ThrowValidation("cluster_size must be positive");
        frame.fused.push_back(std::move(f));
      }
      frames.push_back(std::move(frame));
    } catch (const Json::exception& e) {
      ThrowValidation("line " + std::to_string(line_no) +
                      ": malformed JSON: " + e.what());
    } catch (const Error& e) {
      throw Error(e.kind(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return frames;
}

}  // namespace uqdet
