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

#ifndef UQDET_METRICS_H_
#define UQDET_METRICS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "uqdet/detmodel.h"
#include "uqdet/geometry.h"

namespace uqdet {

// Probability floor inside the classification NLL.
inline constexpr double kNllProbFloor = 1e-12;

// -ln(max(p_label, 1e-12)). Sets *clamped when the floor was hit.
double NllClassification(const ClassDistribution& cls, int label,
                         bool* clamped = nullptr);

// Sum over classes of (p_k - [k == label])^2; lies in [0, 2].
double Brier(const ClassDistribution& cls, int label);

// Diagonal Gaussian negative log-likelihood, summed over dimensions, of the
// residual y - mean under `var`. All three spans must have equal length.
double GaussianNll(std::span<const double> residual, std::span<const double> var);

// Box version: the yaw residual is wrapped to (-pi, pi] first.
double NllRegressionGaussian(const BoxVector& mean, const BoxVector& var,
                             const BoxVector& y);

// Monte-Carlo energy score of a diagonal Gaussian N(mean, var) at y, with
// `residual` = y - mean. Uses the adjacent-pair estimator
//   (1/m) sum ||X_i - y|| - 1/(2(m-1)) sum ||X_i - X_{i+1}||,
// deterministic for a given seed.
double EnergyScore(std::span<const double> residual, std::span<const double> var,
                   int samples, uint64_t seed);

double EnergyScoreBox(const BoxVector& mean, const BoxVector& var,
                      const BoxVector& y, int samples, uint64_t seed);

// -sum p ln p, with 0 ln 0 = 0.
double ShannonEntropy(std::span<const double> probs);
inline double ShannonEntropy(const ClassDistribution& cls) {
  return ShannonEntropy(cls.probs());
}

// Entropy of the mean distribution minus the mean member entropy, clamped at
// zero. Members must share a class count.
double MutualInformation(std::span<const ClassDistribution> members);

// Element-wise mean of member probabilities.
std::vector<double> MeanProbs(std::span<const ClassDistribution> members);

struct LabeledDistribution {
  ClassDistribution cls;
  int label = 0;
};

struct CalibrationBin {
  int class_id = 0;
  int bin = 0;
  int64_t count = 0;
  double mean_prob = 0.0;
  double frequency = 0.0;
};

struct MarginalCalibration {
  double mce = 0.0;
  std::vector<CalibrationBin> bins;  // non-empty (class, bin) cells only
};

// For every class and every equal-width probability bin, the absolute gap
// between the empirical label frequency and the mean predicted probability;
// averaged with equal weight over the non-empty cells.
MarginalCalibration MarginalCalibrationError(
    std::span<const LabeledDistribution> dets, int bins);

struct RegressionSample {
  BoxVector mean{};
  BoxVector var{};
  BoxVector y{};
};

// Quantile calibration error: per dimension, the squared gap between nominal
// levels j/levels and the empirical fraction of PIT values below them,
// averaged over levels and then over the seven dimensions.
double RegressionCalibrationError(std::span<const RegressionSample> samples,
                                  int levels);

// Probability integral transform Phi((y - mean) / sigma) for each dimension,
// yaw residual wrapped.
BoxVector PitValues(const RegressionSample& sample);

struct RankedDetection {
  double score = 0.0;
  bool true_positive = false;
};

// Interpolated average precision over the 40 recall points 1/40 ... 1.
// nullopt when num_gt == 0.
std::optional<double> Ap40(std::vector<RankedDetection> dets, int64_t num_gt);

inline constexpr int kApRecallPoints = 40;

}  // namespace uqdet

#endif  // UQDET_METRICS_H_
