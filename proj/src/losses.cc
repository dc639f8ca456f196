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

#include "uqdet/losses.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "uqdet/error.h"

namespace uqdet {
namespace {

constexpr double kSeriesEpsilon = 1e-17;

double Elu(double x) { return x >= 0.0 ? x : std::expm1(x); }
double EluDerivative(double x) { return x >= 0.0 ? 1.0 : std::exp(x); }

void CheckFinite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) ThrowNumerical(std::string(what) + " is not finite");
  }
}

// Terms a_k / x^k of the large-argument expansion
//   I0(x) ~ e^x / sqrt(2 pi x) * sum_k a_k x^-k,  a_k = a_{k-1} (2k-1)^2 / (8k),
// summed up to the smallest term. Returns (S, dS/dx).
std::pair<double, double> AsymptoticSeries(double x) {
  double sum = 1.0;
  double deriv = 0.0;
  double term = 1.0;
  for (int k = 1; k < 200; ++k) {
    const double next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * k * x);
    if (next >= term) break;  // the series starts diverging here
    term = next;
    sum += term;
    deriv -= k * term / x;
    if (term < kSeriesEpsilon * sum) break;
  }
  return {sum, deriv};
}

// I0 and I1 power series, for x <= kBesselSeriesLimit.
std::pair<double, double> BesselSeries(double x) {
  const double q = 0.25 * x * x;
  double i0 = 1.0;
  double t0 = 1.0;
  double t1 = 0.5 * x;
  double i1 = t1;
  for (int k = 1; k < 500; ++k) {
    t0 *= q / (static_cast<double>(k) * k);
    t1 *= q / (static_cast<double>(k) * (k + 1));
    i0 += t0;
    i1 += t1;
    if (t0 < kSeriesEpsilon * i0 && t1 <= kSeriesEpsilon * i1) break;
  }
  return {i0, i1};
}

}  // namespace

double LogBesselI0(double x) {
  if (std::isnan(x)) ThrowNumerical("log_bessel_i0 of NaN");
  if (x < 0.0) ThrowContract("log_bessel_i0 needs x >= 0");
  if (x <= kBesselSeriesLimit) return std::log(BesselSeries(x).first);
  return x - 0.5 * std::log(2.0 * kPi * x) + std::log(AsymptoticSeries(x).first);
}

double LogBesselI0Derivative(double x) {
  if (std::isnan(x)) ThrowNumerical("log_bessel_i0 of NaN");
  if (x < 0.0) ThrowContract("log_bessel_i0 needs x >= 0");
  if (x <= kBesselSeriesLimit) {
    const auto [i0, i1] = BesselSeries(x);
    return i1 / i0;
  }
  const auto [s, ds] = AsymptoticSeries(x);
  return 1.0 - 0.5 / x + ds / s;
}

RegressionLoss AleatoricRegressionLoss(const BoxVector& target,
                                       const BoxVector& mean,
                                       const BoxVector& log_var) {
  CheckFinite(target, "target");
  CheckFinite(mean, "mean");
  CheckFinite(log_var, "log variance");
  RegressionLoss out;
  for (int d = 0; d < kBoxDims; ++d) {
    double r = target[d] - mean[d];
    if (d == kYawIndex) r = WrapDelta(r);
    const double precision = std::exp(-log_var[d]);
    out.loss += 0.5 * precision * r * r + 0.5 * log_var[d];
    out.grad_mean[d] = -precision * r;
    out.grad_log_var[d] = -0.5 * precision * r * r + 0.5;
  }
  return out;
}

AngularLoss VonMisesLoss(double theta, double theta_target, double log_var,
                         const LossConfig& config) {
  const double in[] = {theta, theta_target, log_var};
  CheckFinite(in, "von Mises input");
  const double kappa = std::exp(-log_var);
  const double delta = theta - theta_target;
  const double c = std::cos(delta);
  AngularLoss out;
  out.loss = LogBesselI0(kappa) - kappa * c +
             config.lambda_v * Elu(log_var - config.lambda_0);
  out.grad_theta = kappa * std::sin(delta);
  // d kappa / d lambda = -kappa.
  out.grad_log_var = -kappa * (LogBesselI0Derivative(kappa) - c) +
                     config.lambda_v * EluDerivative(log_var - config.lambda_0);
  return out;
}

ClassificationLoss FocalLossSoftmax(std::span<const double> logits, int label,
                                    const LossConfig& config) {
  const int num_classes = static_cast<int>(logits.size());
  if (label < 0 || label >= num_classes) ThrowContract("label out of range");
  CheckFinite(logits, "logit");
  const double alpha =
      config.focal_alpha.empty() ? 0.25 : config.focal_alpha.at(label);
  const double gamma = config.focal_gamma;

  const double max = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - max);
  const double log_sum = max + std::log(sum);
  std::vector<double> p(num_classes);
  for (int k = 0; k < num_classes; ++k) p[k] = std::exp(logits[k] - log_sum);

  const double log_pt = logits[label] - log_sum;
  const double pt = p[label];
  const double one_minus = std::max(0.0, 1.0 - pt);
  ClassificationLoss out;
  out.loss = -alpha * std::pow(one_minus, gamma) * log_pt;
  // pt * dL/dpt; the gamma term vanishes when gamma == 0 or pt == 1.
  double scale = -alpha * std::pow(one_minus, gamma);
  if (gamma != 0.0 && one_minus > 0.0) {
    scale += alpha * gamma * std::pow(one_minus, gamma - 1.0) * pt * log_pt;
  }
  out.grad_logits.resize(num_classes);
  for (int k = 0; k < num_classes; ++k) {
    out.grad_logits[k] = scale * ((k == label ? 1.0 : 0.0) - p[k]);
  }
  return out;
}

ElementwiseLoss SmoothL1Loss(std::span<const double> prediction,
                             std::span<const double> target, double beta) {
  if (prediction.size() != target.size()) ThrowContract("size mismatch");
  if (!(beta > 0.0)) ThrowContract("smooth L1 beta must be positive");
  CheckFinite(prediction, "prediction");
  CheckFinite(target, "target");
  ElementwiseLoss out;
  out.grad.resize(prediction.size());
  for (size_t i = 0; i < prediction.size(); ++i) {
    const double d = prediction[i] - target[i];
    if (std::abs(d) < beta) {
      out.loss += 0.5 * d * d / beta;
      out.grad[i] = d / beta;
    } else {
      out.loss += std::abs(d) - 0.5 * beta;
      out.grad[i] = d > 0.0 ? 1.0 : -1.0;
    }
  }
  return out;
}

double GradientRelativeError(double analytic, double numeric) {
  const double scale =
      std::max({std::abs(analytic), std::abs(numeric), kGradientCheckFloor});
  return std::abs(analytic - numeric) / scale;
}

std::vector<GradientCheckResult> RunGradientChecks(int inputs, uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  const double h = kGradientCheckStep;
  auto central = [h](const std::function<double(double)>& f, double x) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
  };

  GradientCheckResult aleatoric{"aleatoric_regression", inputs};
  GradientCheckResult von_mises{"von_mises", inputs};
  GradientCheckResult focal{"focal_softmax", inputs};
  GradientCheckResult smooth_l1{"smooth_l1", inputs};
  auto record = [](GradientCheckResult& r, double analytic, double numeric) {
    r.max_relative_error =
        std::max(r.max_relative_error, GradientRelativeError(analytic, numeric));
  };

  for (int n = 0; n < inputs; ++n) {
    {
      BoxVector y{}, u{}, lam{};
      for (int d = 0; d < kBoxDims; ++d) {
        // Yaw kept within (-1.5, 1.5) so the residual never crosses the wrap.
        const double span = d == kYawIndex ? 1.5 : 3.0;
        y[d] = uniform(-span, span);
        u[d] = uniform(-span, span);
        lam[d] = uniform(-3.0, 3.0);
      }
      const RegressionLoss g = AleatoricRegressionLoss(y, u, lam);
      for (int d = 0; d < kBoxDims; ++d) {
        record(aleatoric, g.grad_mean[d], central([&](double v) {
                 BoxVector uu = u;
                 uu[d] = v;
                 return AleatoricRegressionLoss(y, uu, lam).loss;
               }, u[d]));
        record(aleatoric, g.grad_log_var[d], central([&](double v) {
                 BoxVector ll = lam;
                 ll[d] = v;
                 return AleatoricRegressionLoss(y, u, ll).loss;
               }, lam[d]));
      }
    }
    {
      LossConfig cfg;
      cfg.lambda_v = uniform(0.0, 2.0);
      const double theta = uniform(-kPi, kPi);
      const double target = uniform(-kPi, kPi);
      const double lam = uniform(-4.0, 4.0);
      const AngularLoss g = VonMisesLoss(theta, target, lam, cfg);
      record(von_mises, g.grad_theta, central([&](double v) {
               return VonMisesLoss(v, target, lam, cfg).loss;
             }, theta));
      record(von_mises, g.grad_log_var, central([&](double v) {
               return VonMisesLoss(theta, target, v, cfg).loss;
             }, lam));
    }
    {
      LossConfig cfg;
      const int k = static_cast<int>(uniform(2.0, 7.0));
      cfg.focal_gamma = uniform(0.0, 3.0);
      std::vector<double> z(k);
      for (double& v : z) v = uniform(-4.0, 4.0);
      cfg.focal_alpha.resize(k);
      for (double& a : cfg.focal_alpha) a = uniform(0.1, 1.0);
      const int label = std::min(k - 1, static_cast<int>(uniform(0.0, k)));
      const ClassificationLoss g = FocalLossSoftmax(z, label, cfg);
      for (int j = 0; j < k; ++j) {
        record(focal, g.grad_logits[j], central([&](double v) {
                 std::vector<double> zz = z;
                 zz[j] = v;
                 return FocalLossSoftmax(zz, label, cfg).loss;
               }, z[j]));
      }
    }
    {
      const double beta = LossConfig{}.smooth_l1_beta;
      std::vector<double> pred(kBoxDims), target(kBoxDims);
      for (int d = 0; d < kBoxDims; ++d) {
        pred[d] = uniform(-1.0, 1.0);
        target[d] = uniform(-1.0, 1.0);
      }
      const ElementwiseLoss g = SmoothL1Loss(pred, target, beta);
      for (int d = 0; d < kBoxDims; ++d) {
        record(smooth_l1, g.grad[d], central([&](double v) {
                 std::vector<double> pp = pred;
                 pp[d] = v;
                 return SmoothL1Loss(pp, target, beta).loss;
               }, pred[d]));
      }
    }
  }
  std::vector<GradientCheckResult> results = {aleatoric, von_mises, focal, smooth_l1};
  for (GradientCheckResult& r : results) {
    r.passed = r.max_relative_error < kGradientCheckTolerance;
  }
  return results;
}

}  // namespace uqdet
