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
#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "oracles.h"
#include "uqdet/error.h"
#include "uqdet/losses.h"

namespace uqdet {
namespace {

constexpr double kHalfLogTwoPi = 0.91893853320467274178;

ClassDistribution Probs(std::vector<double> p) {
  return ClassDistribution::FromProbs(std::move(p));
}

TEST(NllClassificationTest, Examples) {
  EXPECT_EQ(NllClassification(Probs({1.0, 0.0}), 0), 0.0);
  EXPECT_NEAR(NllClassification(Probs({0.5, 0.5}), 1), std::log(2.0), 1e-15);
  bool clamped = false;
  EXPECT_NEAR(NllClassification(Probs({1.0, 0.0}), 1, &clamped), -std::log(1e-12), 1e-9);
  EXPECT_TRUE(clamped);
  EXPECT_THROW(NllClassification(Probs({1.0, 0.0}), 2), Error);
}

TEST(BrierTest, Examples) {
  EXPECT_EQ(Brier(Probs({1.0, 0.0, 0.0}), 0), 0.0);
  EXPECT_EQ(Brier(Probs({1.0, 0.0, 0.0}), 1), 2.0);
  EXPECT_NEAR(Brier(Probs({1.0 / 3, 1.0 / 3, 1.0 / 3}), 2), 2.0 / 3.0, 1e-15);
  EXPECT_THROW(Brier(Probs({1.0}), -1), Error);
}

TEST(BrierTest, ProperOnRepeatedInputs) {
  // Labels drawn 50/30/20; the mean Brier over a grid of candidate
  // distributions is minimized at the empirical frequencies.
  std::vector<int> labels;
  for (int i = 0; i < 50; ++i) labels.push_back(0);
  for (int i = 0; i < 30; ++i) labels.push_back(1);
  for (int i = 0; i < 20; ++i) labels.push_back(2);
  auto mean_brier = [&](double a, double b) {
    const ClassDistribution c = Probs({a, b, std::max(0.0, 1.0 - a - b)});
    double s = 0.0;
    for (int l : labels) s += Brier(c, l);
    return s / labels.size();
  };
  const double best = mean_brier(0.5, 0.3);
  for (int i = 0; i <= 50; ++i) {
    for (int j = 0; i + j <= 50; ++j) {
      if (i == 25 && j == 15) continue;
      EXPECT_GT(mean_brier(i / 50.0, j / 50.0), best);
    }
  }
}

TEST(GaussianNllTest, Examples) {
  const std::vector<double> r = {0.0}, v = {1.0};
  EXPECT_NEAR(GaussianNll(r, v), kHalfLogTwoPi, 1e-15);
  BoxVector mean{1, 2, 3, 4, 5, 6, 0.5}, var;
  var.fill(std::exp(-2.0));
  EXPECT_NEAR(NllRegressionGaussian(mean, var, mean), -0.5674302675672913, 1e-12);
  BoxVector y = mean, shift = {5, -3, 2, 1, 1, 1, 0};
  y[0] += 0.3;
  const double base = NllRegressionGaussian(mean, var, y);
  BoxVector m2 = mean, y2 = y;
  for (int d = 0; d < 6; ++d) {
    m2[d] += shift[d];
    y2[d] += shift[d];
  }
  EXPECT_NEAR(NllRegressionGaussian(m2, var, y2), base, 1e-9);
  const std::vector<double> zero = {0.0};
  EXPECT_THROW(GaussianNll(r, zero), Error);
}

TEST(GaussianNllTest, YawResidualIsWrapped) {
  BoxVector mean{0, 0, 0, 1, 1, 1, kPi - 0.05}, y{0, 0, 0, 1, 1, 1, -kPi + 0.05}, var;
  var.fill(1.0);
  BoxVector y_near = mean;
  y_near[kYawIndex] = mean[kYawIndex] + 0.1;
  EXPECT_NEAR(NllRegressionGaussian(mean, var, y), NllRegressionGaussian(mean, var, y_near),
              1e-12);
}

TEST(GaussianNllTest, EqualsRegressionLossPlusConstant) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    BoxVector mean, y, lv, var;
    for (int d = 0; d < kBoxDims; ++d) {
      mean[d] = n(rng);
      y[d] = mean[d] + n(rng);
      lv[d] = n(rng);
      var[d] = std::exp(lv[d]);
    }
    mean[kYawIndex] = WrapAngle(mean[kYawIndex]);
    y[kYawIndex] = WrapAngle(y[kYawIndex]);
    const double loss = AleatoricRegressionLoss(y, mean, lv).loss;
    EXPECT_NEAR(NllRegressionGaussian(mean, var, y), loss + 7 * kHalfLogTwoPi, 1e-9);
  }
}

TEST(EnergyScoreTest, Examples) {
  const std::vector<double> zero = {0.0, 0.0};
  EXPECT_EQ(EnergyScore(zero, zero, 10, 1), 0.0);
  const std::vector<double> r = {0.0}, v = {1.0};
  EXPECT_NEAR(EnergyScore(r, v, 1000000, 42), 0.23369497725510915, 0.002);
  EXPECT_EQ(EnergyScore(r, v, 1000, 5), EnergyScore(r, v, 1000, 5));
  EXPECT_NE(EnergyScore(r, v, 1000, 5), EnergyScore(r, v, 1000, 6));
  EXPECT_THROW(EnergyScore(r, v, 1, 5), Error);
}

TEST(EnergyScoreTest, VarianceShrinksLikeOneOverM) {
  const std::vector<double> r = {0.3, -0.2}, v = {1.0, 0.5};
  auto spread = [&](int m) {
    std::vector<double> xs;
    for (uint64_t s = 0; s < 200; ++s) xs.push_back(EnergyScore(r, v, m, s));
    double mean = 0.0;
    for (double x : xs) mean += x / xs.size();
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean) / (xs.size() - 1);
    return var;
  };
  const double ratio = spread(100) / spread(10000);
  // 1/m scaling predicts 100; allow sampling noise in the variance estimates.
  EXPECT_GT(ratio, 50.0);
  EXPECT_LT(ratio, 200.0);
}

TEST(EntropyTest, Examples) {
  EXPECT_EQ(ShannonEntropy(Probs({1.0, 0.0, 0.0})), 0.0);
  EXPECT_NEAR(ShannonEntropy(Probs({1.0 / 3, 1.0 / 3, 1.0 / 3})), std::log(3.0), 1e-15);
  EXPECT_NEAR(ShannonEntropy(Probs({0.2, 0.5, 0.3})), ShannonEntropy(Probs({0.5, 0.3, 0.2})),
              1e-15);
}

TEST(MutualInformationTest, Examples) {
  const std::vector<ClassDistribution> same = {Probs({0.7, 0.3}), Probs({0.7, 0.3})};
  EXPECT_NEAR(MutualInformation(same), 0.0, 1e-15);
  const std::vector<ClassDistribution> opposite = {Probs({1.0, 0.0}), Probs({0.0, 1.0})};
  EXPECT_NEAR(MutualInformation(opposite), std::log(2.0), 1e-15);
  const std::vector<ClassDistribution> single = {Probs({0.4, 0.6})};
  EXPECT_EQ(MutualInformation(single), 0.0);
  EXPECT_THROW(MutualInformation(std::vector<ClassDistribution>{}), Error);
}

TEST(MarginalCalibrationTest, Examples) {
  std::vector<LabeledDistribution> perfect = {{Probs({1.0, 0.0}), 0}, {Probs({0.0, 1.0}), 1}};
  EXPECT_EQ(MarginalCalibrationError(perfect, 10).mce, 0.0);
  std::vector<LabeledDistribution> half = {{Probs({0.5, 0.5}), 0}, {Probs({0.5, 0.5}), 1}};
  EXPECT_EQ(MarginalCalibrationError(half, 10).mce, 0.0);
  EXPECT_THROW(MarginalCalibrationError({}, 10), Error);
  EXPECT_THROW(MarginalCalibrationError(perfect, 1), Error);
}

std::vector<LabeledDistribution> SharpenedSet(uint64_t seed, int n) {
  // Labels follow p; predictions are p^3 renormalized (overconfident).
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> g(1.0, 1.0);
  std::vector<LabeledDistribution> out;
  for (int i = 0; i < n; ++i) {
    std::vector<double> p(3);
    double s = 0.0;
    for (double& x : p) s += (x = g(rng));
    for (double& x : p) x /= s;
    const int label = std::discrete_distribution<int>(p.begin(), p.end())(rng);
    double t = 0.0;
    for (double& x : p) t += (x = x * x * x);
    for (double& x : p) x /= t;
    out.push_back({Probs(p), label});
  }
  return out;
}

TEST(MarginalCalibrationTest, MatchesPerBinTally) {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    const auto dets = SharpenedSet(seed, 2000);
    const MarginalCalibration mc = MarginalCalibrationError(dets, 10);
    EXPECT_NEAR(mc.mce, testing::BruteForceMce(dets, 10), 1e-12);
    EXPECT_GT(mc.mce, 0.03);
    int64_t total = 0;
    for (const CalibrationBin& b : mc.bins) total += b.count;
    EXPECT_EQ(total, 2000 * 3);
  }
}

TEST(MarginalCalibrationTest, PermutationInvariant) {
  auto dets = SharpenedSet(9, 500);
  const double a = MarginalCalibrationError(dets, 10).mce;
  std::mt19937_64 rng(1);
  std::shuffle(dets.begin(), dets.end(), rng);
  EXPECT_EQ(MarginalCalibrationError(dets, 10).mce, a);
}

RegressionSample PitSample(double u) {
  // Residual placed at the u-quantile of N(0, 1) in every dimension.
  RegressionSample s;
  s.var.fill(1.0);
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < u ? lo : hi) = mid;
  }
  s.y.fill(0.5 * (lo + hi));
  return s;
}

TEST(RegressionCalibrationTest, UniformPitIsZero) {
  // u on the midpoints of 20 equal cells: every level j/10 sees exactly j/10.
  std::vector<RegressionSample> samples;
  for (int i = 0; i < 20; ++i) samples.push_back(PitSample((i + 0.5) / 20));
  EXPECT_NEAR(RegressionCalibrationError(samples, 10), 0.0, 1e-20);
  EXPECT_NEAR(RegressionCalibrationError(samples, 20), 0.0, 1e-20);
  EXPECT_THROW(RegressionCalibrationError({}, 10), Error);
  EXPECT_THROW(RegressionCalibrationError(samples, 1), Error);
}

TEST(RegressionCalibrationTest, OverstatedVarianceIsDetected) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<RegressionSample> honest, inflated;
  for (int i = 0; i < 5000; ++i) {
    RegressionSample s;
    s.var.fill(1.0);
    for (double& y : s.y) y = n(rng);
    s.y[kYawIndex] = 0.1 * s.y[kYawIndex];
    s.var[kYawIndex] = 0.01;
    honest.push_back(s);
    for (double& v : s.var) v *= 100.0;
    inflated.push_back(s);
  }
  EXPECT_LT(RegressionCalibrationError(honest, 10), 1e-3);
  EXPECT_GT(RegressionCalibrationError(inflated, 10), 0.05);
  auto shuffled = inflated;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  EXPECT_EQ(RegressionCalibrationError(shuffled, 10), RegressionCalibrationError(inflated, 10));
}

TEST(Ap40Test, Examples) {
  EXPECT_EQ(Ap40({{0.9, true}, {0.8, true}}, 2), 1.0);
  EXPECT_EQ(Ap40({}, 3), 0.0);
  EXPECT_FALSE(Ap40({{0.9, false}}, 0).has_value());
}

TEST(Ap40Test, TiedScoresIgnoreInputOrder) {
  const std::vector<RankedDetection> a = {{0.5, true}, {0.5, false}, {0.5, true}, {0.5, false}};
  const std::vector<RankedDetection> b = {{0.5, false}, {0.5, false}, {0.5, true}, {0.5, true}};
  EXPECT_EQ(Ap40(a, 2), Ap40(b, 2));
  EXPECT_DOUBLE_EQ(*Ap40(a, 2), 0.5);
}

TEST(Ap40Test, MatchesBruteForceStaircase) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<RankedDetection> dets;
    const int n = 1 + trial % 37;
    int tps = 0;
    for (int i = 0; i < n; ++i) {
      const bool tp = u(rng) < 0.6;
      tps += tp;
      dets.push_back({std::round(u(rng) * 10) / 10, tp});
    }
    const int64_t num_gt = tps + trial % 5;
    if (num_gt == 0) continue;
    EXPECT_NEAR(*Ap40(dets, num_gt), *testing::BruteForceAp40(dets, num_gt), 1e-12);
  }
}

}  // namespace
}  // namespace uqdet
