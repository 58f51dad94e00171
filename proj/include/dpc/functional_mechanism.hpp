// Copyright 2026 The DPC Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Objective perturbation for the sigmoid autoencoder.
//
// The reconstruction objective is expanded over the bases
//   g(x, w) = sigmoid(sigmoid(w.x) * w)          (elementwise in w)
// into three coefficient groups:
//   degree 0:  c0      = sum_i sum_j x_ij^2
//   degree 1:  c1[p]   = -2 * sum_i x_i           (attached to g(., w_p))
//   degree 2:  c2[p,q] = N                        (attached to g_p . g_q, p <= q)
// Each scalar coefficient receives one Laplace(sensitivity / epsilon) draw,
// with sensitivity 4 (K + 1). The draws are fixed once per training run and
// enter the loss through the data-free coupling term
//   eta(W) = eta0 + sum_p eta1_p . g(0, w_p)
//                 + sum_{p<=q} eta2_pq * g(0, w_p) . g(0, w_q).

#ifndef DPC_FUNCTIONAL_MECHANISM_HPP_
#define DPC_FUNCTIONAL_MECHANISM_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "dpc/autoencoder.hpp"
#include "dpc/numerics.hpp"

namespace dpc {

// 4 * (K + 1).
double SensitivityBound(std::size_t width_k);

struct PrivacyBudget {
  double epsilon = 1.0;
  double sensitivity = 8.0;
  double noise_scale = 8.0;  // sensitivity / epsilon
  std::size_t width_k = 1;

  // epsilon = +infinity is accepted and yields noise_scale 0, the
  // non-private reference objective.
  static PrivacyBudget ForWidth(double epsilon, std::size_t width_k);
  bool is_private() const { return noise_scale > 0.0; }

  friend bool operator==(const PrivacyBudget&, const PrivacyBudget&) = default;
};

Vector BasisG(std::span<const double> x, std::span<const double> w);

std::size_t PairCount(std::size_t width_k);
// Index of the unordered pair (p, q), p <= q, in row-major upper-triangle
// order.
std::size_t PairIndex(std::size_t p, std::size_t q, std::size_t width_k);

struct CoefficientGroups {
  double c0 = 0.0;
  Matrix c1;  // K x d
  Vector c2;  // K (K + 1) / 2
  std::size_t sample_count = 0;

  std::size_t width_k() const { return c1.rows(); }
  std::size_t input_dim() const { return c1.cols(); }
};

CoefficientGroups AggregateCoefficients(const Matrix& features, std::size_t width_k);

// Sum of absolute coefficient differences over all three groups.
double CoefficientL1Distance(const CoefficientGroups& a, const CoefficientGroups& b);
// L1 norm of one record's coefficients; 2 * max over records bounds the
// neighbour distance.
double RecordCoefficientL1(std::span<const double> x, std::size_t width_k);

// The Laplace draws of one training run. Immutable once built.
class NoisyCoefficients {
 public:
  static NoisyCoefficients FromDraws(double eta0, Matrix eta1, Vector eta2,
                                     PrivacyBudget budget, std::uint64_t seed,
                                     std::uint64_t stream_position);
  static NoisyCoefficients Zero(std::size_t width_k, std::size_t input_dim);

  double eta0() const { return eta0_; }
  const Matrix& eta1() const { return eta1_; }
  const Vector& eta2() const { return eta2_; }
  const PrivacyBudget& budget() const { return budget_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_position() const { return stream_position_; }
  std::size_t width_k() const { return eta1_.rows(); }
  std::size_t input_dim() const { return eta1_.cols(); }
  std::size_t draw_count() const { return 1 + eta1_.data().size() + eta2_.size(); }
  bool all_zero() const;

  std::string ToJsonText() const;
  static NoisyCoefficients FromJsonText(const std::string& text);

  friend bool operator==(const NoisyCoefficients&, const NoisyCoefficients&) = default;

 private:
  NoisyCoefficients() = default;

  double eta0_ = 0.0;
  Matrix eta1_;
  Vector eta2_;
  PrivacyBudget budget_;
  std::uint64_t seed_ = 0;
  std::uint64_t stream_position_ = 0;
};

// One draw per scalar coefficient in the order eta0, eta1 (row-major), eta2.
NoisyCoefficients Perturb(const CoefficientGroups& groups,
                          const PrivacyBudget& budget, Rng& rng);

struct NoiseTermValue {
  double value = 0.0;
  Matrix gradient;  // with respect to the first encoder layer weights
};

// eta(W) for first-layer weights W (units x d, units <= K).
NoiseTermValue EvaluateNoiseTerm(const Matrix& first_layer_weights,
                                 const NoisyCoefficients& noisy);

struct LossAndGradient {
  double loss = 0.0;
  double data_loss = 0.0;
  double noise_term = 0.0;
  GradientSet encoder;
  GradientSet decoder;
};

// Sum of squared reconstruction errors over the batch.
LossAndGradient PlainLoss(const Autoencoder& ae, const Matrix& batch);

// PlainLoss plus batch_fraction * eta(W). With batch_fraction = |batch| / N
// an epoch accumulates exactly one copy of eta(W).
LossAndGradient PerturbedLoss(const Autoencoder& ae, const Matrix& batch,
                              const NoisyCoefficients& noisy,
                              double batch_fraction = 1.0);

struct PrivacyRatioResult {
  double max_ratio = 1.0;
  std::size_t bins_compared = 0;
};

// Monte-Carlo check of the epsilon-DP ratio on the degree-0 coefficient:
// perturbs c0 of each dataset `trials` times, histograms both over shared
// bins spanning +-3 noise scales around the two true values, and returns the
// largest binwise probability ratio among bins holding >= 50 counts in both.
// The datasets must be neighbours (same shape, at most one differing row).
PrivacyRatioResult EmpiricalPrivacyRatio(const Matrix& dataset_a,
                                         const Matrix& dataset_b,
                                         const PrivacyBudget& budget,
                                         std::size_t trials, std::size_t bins,
                                         Rng& rng);

}  // namespace dpc

#endif  // DPC_FUNCTIONAL_MECHANISM_HPP_
