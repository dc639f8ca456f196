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

#include "uqdet/metrics.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>
#include <string>

#include "uqdet/error.h"

namespace uqdet {
namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;

void CheckLabel(const ClassDistribution& cls, int label) {
  if (label < 0 || label >= cls.num_classes()) {
    ThrowContract("label " + std::to_string(label) + " out of range for " +
                  std::to_string(cls.num_classes()) + " classes");
  }
}

void CheckFinite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) ThrowNumerical(std::string(what) + " is not finite");
  }
}

BoxVector BoxResidual(const BoxVector& mean, const BoxVector& y) {
  BoxVector r{};
  for (int d = 0; d < kBoxDims; ++d) r[d] = y[d] - mean[d];
  r[kYawIndex] = WrapDelta(r[kYawIndex]);
  return r;
}

double StandardNormalCdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

double NllClassification(const ClassDistribution& cls, int label, bool* clamped) {
  CheckLabel(cls, label);
  const double p = cls.probs()[label];
  if (std::isnan(p)) ThrowNumerical("probability is NaN");
  if (clamped != nullptr) *clamped = p < kNllProbFloor;
  return -std::log(std::max(p, kNllProbFloor));
}

double Brier(const ClassDistribution& cls, int label) {
  CheckLabel(cls, label);
  CheckFinite(cls.probs(), "probability");
  double sum = 0.0;
  for (int k = 0; k < cls.num_classes(); ++k) {
    const double diff = cls.probs()[k] - (k == label ? 1.0 : 0.0);
    sum += diff * diff;
  }
  return sum;
}

double GaussianNll(std::span<const double> residual, std::span<const double> var) {
  if (residual.size() != var.size()) ThrowContract("dimension mismatch");
  CheckFinite(residual, "residual");
  CheckFinite(var, "variance");
  double nll = 0.0;
  for (size_t d = 0; d < var.size(); ++d) {
    if (var[d] <= 0.0) ThrowContract("variance must be positive");
    nll += 0.5 * (kLogTwoPi + std::log(var[d])) +
           residual[d] * residual[d] / (2.0 * var[d]);
  }
  return nll;
}

double NllRegressionGaussian(const BoxVector& mean, const BoxVector& var,
                             const BoxVector& y) {
  CheckFinite(mean, "mean");
  CheckFinite(y, "target");
  const BoxVector r = BoxResidual(mean, y);
  return GaussianNll(r, var);
}

double EnergyScore(std::span<const double> residual, std::span<const double> var,
                   int samples, uint64_t seed) {
  if (samples < 2) ThrowContract("energy score needs at least 2 samples");
  if (residual.size() != var.size()) ThrowContract("dimension mismatch");
  CheckFinite(residual, "residual");
  CheckFinite(var, "variance");
  const size_t dims = var.size();
  std::vector<double> sigma(dims);
  for (size_t d = 0; d < dims; ++d) {
    if (var[d] < 0.0) ThrowContract("variance must be non-negative");
    sigma[d] = std::sqrt(var[d]);
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> prev(dims), cur(dims);
  double to_truth = 0.0;
  double pairs = 0.0;
  for (int i = 0; i < samples; ++i) {
    double dist_sq = 0.0;
    double pair_sq = 0.0;
    for (size_t d = 0; d < dims; ++d) {
      cur[d] = sigma[d] * normal(rng);  // X - mean
      const double to_y = cur[d] - residual[d];
      dist_sq += to_y * to_y;
      if (i > 0) {
        const double diff = cur[d] - prev[d];
        pair_sq += diff * diff;
      }
    }
    to_truth += std::sqrt(dist_sq);
    if (i > 0) pairs += std::sqrt(pair_sq);
    std::swap(prev, cur);
  }
  return to_truth / samples - pairs / (2.0 * (samples - 1));
}

double EnergyScoreBox(const BoxVector& mean, const BoxVector& var,
                      const BoxVector& y, int samples, uint64_t seed) {
  CheckFinite(mean, "mean");
  CheckFinite(y, "target");
  const BoxVector r = BoxResidual(mean, y);
  return EnergyScore(r, var, samples, seed);
}

double ShannonEntropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (std::isnan(p)) ThrowNumerical("probability is NaN");
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::max(h, 0.0);
}

std::vector<double> MeanProbs(std::span<const ClassDistribution> members) {
  if (members.empty()) ThrowContract("mean of an empty member list");
  const size_t k = members.front().probs().size();
  std::vector<double> mean(k, 0.0);
  for (const ClassDistribution& m : members) {
    if (m.probs().size() != k) ThrowContract("members disagree on class count");
    for (size_t i = 0; i < k; ++i) mean[i] += m.probs()[i];
  }
  for (double& p : mean) p /= static_cast<double>(members.size());
  return mean;
}

double MutualInformation(std::span<const ClassDistribution> members) {
  const std::vector<double> mean = MeanProbs(members);
  double member_entropy = 0.0;
  for (const ClassDistribution& m : members) member_entropy += ShannonEntropy(m);
  member_entropy /= static_cast<double>(members.size());
  return std::max(0.0, ShannonEntropy(mean) - member_entropy);
}

MarginalCalibration MarginalCalibrationError(
    std::span<const LabeledDistribution> dets, int bins) {
  if (bins < 2) ThrowContract("calibration needs at least 2 bins");
  if (dets.empty()) ThrowContract("calibration error of an empty set");
  const int num_classes = dets.front().cls.num_classes();
  struct Cell {
    std::vector<double> probs;
    int64_t hits = 0;
  };
  // Cells are visited in key order and their probabilities summed in sorted
  // order, so the result does not depend on input order.
  std::map<std::pair<int, int>, Cell> cells;
  for (const LabeledDistribution& d : dets) {
    if (d.cls.num_classes() != num_classes) {
      ThrowContract("mixed class counts in calibration input");
    }
    CheckLabel(d.cls, d.label);
    CheckFinite(d.cls.probs(), "probability");
    for (int k = 0; k < num_classes; ++k) {
      const double p = d.cls.probs()[k];
      const int b = std::clamp(static_cast<int>(p * bins), 0, bins - 1);
      Cell& cell = cells[{k, b}];
      cell.probs.push_back(p);
      if (d.label == k) ++cell.hits;
    }
  }
  MarginalCalibration out;
  double total = 0.0;
  for (auto& [key, cell] : cells) {
    std::sort(cell.probs.begin(), cell.probs.end());
    double prob_sum = 0.0;
    for (double p : cell.probs) prob_sum += p;
    CalibrationBin bin;
    bin.class_id = key.first;
    bin.bin = key.second;
    bin.count = static_cast<int64_t>(cell.probs.size());
    bin.mean_prob = prob_sum / static_cast<double>(bin.count);
    bin.frequency = static_cast<double>(cell.hits) / static_cast<double>(bin.count);
    total += std::abs(bin.frequency - bin.mean_prob);
    out.bins.push_back(bin);
  }
  out.mce = total / static_cast<double>(out.bins.size());
  return out;
}

BoxVector PitValues(const RegressionSample& s) {
  CheckFinite(s.mean, "mean");
  CheckFinite(s.y, "target");
  CheckFinite(s.var, "variance");
  const BoxVector r = BoxResidual(s.mean, s.y);
  BoxVector u{};
  for (int d = 0; d < kBoxDims; ++d) {
    if (s.var[d] <= 0.0) ThrowContract("variance must be positive");
    u[d] = StandardNormalCdf(r[d] / std::sqrt(s.var[d]));
  }
  return u;
}

double RegressionCalibrationError(std::span<const RegressionSample> samples,
                                  int levels) {
  if (levels < 2) ThrowContract("calibration needs at least 2 levels");
  if (samples.empty()) ThrowContract("calibration error of an empty set");
  std::array<std::vector<double>, kBoxDims> pit;
  for (auto& v : pit) v.reserve(samples.size());
  for (const RegressionSample& s : samples) {
    const BoxVector u = PitValues(s);
    for (int d = 0; d < kBoxDims; ++d) pit[d].push_back(u[d]);
  }
  const double n = static_cast<double>(samples.size());
  double total = 0.0;
  for (auto& u : pit) {
    std::sort(u.begin(), u.end());
    double ce = 0.0;
    for (int j = 1; j <= levels; ++j) {
      const double level = static_cast<double>(j) / levels;
      const auto below = std::upper_bound(u.begin(), u.end(), level) - u.begin();
      const double gap = level - static_cast<double>(below) / n;
      ce += gap * gap;
    }
    total += ce / levels;
  }
  return total / kBoxDims;
}

std::optional<double> Ap40(std::vector<RankedDetection> dets, int64_t num_gt) {
  if (num_gt <= 0) return std::nullopt;
  std::stable_sort(dets.begin(), dets.end(),
                   [](const RankedDetection& a, const RankedDetection& b) {
                     return a.score > b.score;
                   });
  // Best precision among operating points reaching at least j/40 recall.
  // Operating points sit at distinct scores, so tied detections enter
  // together and their input order does not matter.
  std::vector<double> best(kApRecallPoints + 1, 0.0);
  int64_t tp = 0;
  for (size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].true_positive) ++tp;
    if (i + 1 < dets.size() && dets[i + 1].score == dets[i].score) continue;
    const double precision = static_cast<double>(tp) / static_cast<double>(i + 1);
    // Largest j with j/40 <= tp/num_gt.
    const int64_t reached =
        std::min<int64_t>(kApRecallPoints, tp * kApRecallPoints / num_gt);
    best[reached] = std::max(best[reached], precision);
  }
  // Suffix maximum turns "at exactly j" into "at recall >= j/40".
  double ap = 0.0;
  double running = 0.0;
  for (int j = kApRecallPoints; j >= 1; --j) {
    running = std::max(running, best[j]);
    ap += running;
  }
  return ap / kApRecallPoints;
}

}  // namespace uqdet
