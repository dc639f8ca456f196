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

#ifndef UQDET_LOSSES_H_
#define UQDET_LOSSES_H_

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uqdet/geometry.h"

namespace uqdet {

inline constexpr double kBesselSeriesLimit = 15.0;

struct LossConfig {
  // Weight and onset of the ELU penalty on the angular log-variance. The
  // default onset is ln(pi^2 / 3), the log-variance of a uniform angle.
  double lambda_v = 1.0;
  double lambda_0 = std::log(kPi * kPi / 3.0);
  double focal_gamma = 2.0;
  // Per-class weights; empty means 0.25 for every class.
  std::vector<double> focal_alpha;
  double smooth_l1_beta = 1.0 / 9.0;
};

struct RegressionLoss {
  double loss = 0.0;
  BoxVector grad_mean{};     // d loss / d u
  BoxVector grad_log_var{};  // d loss / d lambda
};

// Heteroscedastic regression loss
//   sum_d 0.5 exp(-lambda_d) (y_d - u_d)^2 + 0.5 lambda_d.
// The yaw residual is wrapped to (-pi, pi].
RegressionLoss AleatoricRegressionLoss(const BoxVector& target,
                                       const BoxVector& mean,
                                       const BoxVector& log_var);

struct AngularLoss {
  double loss = 0.0;
  double grad_theta = 0.0;
  double grad_log_var = 0.0;
};

// Von Mises negative log-likelihood with concentration exp(-lambda) plus an
// ELU penalty lambda_v * ELU(lambda - lambda_0). The constant ln(2 pi) of
// the density is dropped.
AngularLoss VonMisesLoss(double theta, double theta_target, double log_var,
                         const LossConfig& config);

// ln I0(x) for x >= 0: power series up to 15, asymptotic expansion above.
double LogBesselI0(double x);

// d/dx of LogBesselI0 (equal to I1(x) / I0(x)), consistent with the
// implemented expression on both sides of the switch point.
double LogBesselI0Derivative(double x);

struct ClassificationLoss {
  double loss = 0.0;
  std::vector<double> grad_logits;
};

// -alpha_label (1 - p_t)^gamma ln p_t with p = softmax(logits).
ClassificationLoss FocalLossSoftmax(std::span<const double> logits, int label,
                                    const LossConfig& config);

struct ElementwiseLoss {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d prediction
};

// Huber-style smooth L1 summed over elements, with transition at beta.
ElementwiseLoss SmoothL1Loss(std::span<const double> prediction,
                             std::span<const double> target, double beta);

struct GradientCheckResult {
  std::string loss_name;
  int inputs = 0;
  double max_relative_error = 0.0;
  bool passed = false;
};

inline constexpr double kGradientCheckStep = 1e-5;
inline constexpr double kGradientCheckTolerance = 1e-4;
// Gradient magnitudes below this are compared in absolute terms.
inline constexpr double kGradientCheckFloor = 1e-3;

// |analytic - numeric| / max(|analytic|, |numeric|, kGradientCheckFloor)
double GradientRelativeError(double analytic, double numeric);

// Central finite differences against the analytic gradients of every loss
// on `inputs` random points each.
std::vector<GradientCheckResult> RunGradientChecks(int inputs, uint64_t seed);

}  // namespace uqdet

#endif  // UQDET_LOSSES_H_
