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

// The private counterfactual pipeline:
//
//   1. TrainAutoencoder   - fit the autoencoder on the perturbed objective.
//   2. BuildPrototypes    - per-class mean latent codes. This is the last
//                           step that reads the dataset.
//   3. SearchCounterfactual - gradient search around a prototype. Takes
//                           prototypes, never a Dataset, so its output is a
//                           post-processing of the private prototypes.

#ifndef DPC_CORE_HPP_
#define DPC_CORE_HPP_

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpc/autoencoder.hpp"
#include "dpc/data.hpp"
#include "dpc/functional_mechanism.hpp"
#include "dpc/numerics.hpp"

namespace dpc {

struct AutoencoderTrainOptions {
  std::size_t epochs = 300;
  std::size_t batch_size = 128;
  AdamOptions adam{.learning_rate = 1e-2};
};

struct TrainedAutoencoder {
  Autoencoder model;
  NoisyCoefficients noise;
  // Perturbed objective summed over each epoch.
  std::vector<double> epoch_loss;
  // Reconstruction MSE on the holdout set, NaN when none was given.
  double holdout_mse = std::numeric_limits<double>::quiet_NaN();
};

// Sets the sensitivity from K, draws the noise once, then minimises the
// perturbed objective with Adam. Randomness is taken from the "init",
// "noise" and "shuffle" substreams of `rng`. epsilon = +infinity trains on
// the plain objective.
TrainedAutoencoder TrainAutoencoder(const AutoencoderSpec& spec, const Dataset& train,
                                    double epsilon,
                                    const AutoencoderTrainOptions& options,
                                    const Rng& rng,
                                    const Dataset* holdout = nullptr);

// The optimisation loop behind TrainAutoencoder. `noise == nullptr` selects
// the plain objective. Throws kTraining with the epoch index on divergence.
std::vector<double> FitAutoencoder(Autoencoder& ae, const Matrix& data,
                                   const NoisyCoefficients* noise,
                                   const AutoencoderTrainOptions& options,
                                   Rng& shuffle_rng);

struct Prototype {
  int class_id = 0;
  Vector vector;
  std::size_t member_count = 0;

  friend bool operator==(const Prototype&, const Prototype&) = default;
};

struct PrototypeSet {
  std::vector<Prototype> prototypes;
  // Classes in [0, class_count) without members; they get no prototype.
  std::vector<int> missing_classes;

  const Prototype* Find(int class_id) const;
  std::string ToJsonText() const;
  static PrototypeSet FromJsonText(const std::string& text);

  friend bool operator==(const PrototypeSet&, const PrototypeSet&) = default;
};

PrototypeSet BuildPrototypes(const Autoencoder& ae, const Dataset& dataset);

struct SearchConfig {
  double alpha = 1.0;
  double beta = 0.5;
  double gamma = 0.1;
  std::size_t iterations = 500;
  double step_size = 0.05;
  int target_class = 0;
  // Standard deviation of a Gaussian start for delta; 0 starts at delta = 0.
  double init_jitter = 0.0;

  void Validate() const;
  // "mixed" (1, 0.5, 0.1), "image" (1, 0.2, 20), "binary" (1, 0.5, 10).
  static SearchConfig Preset(std::string_view name);
};

struct SearchLoss {
  double total = 0.0;
  double prediction = 0.0;
  double distance = 0.0;
  double prototype = 0.0;
  Vector gradient;  // d total / d delta
};

// alpha * CE(f(dec(rho + delta)), target) + beta * ||dec(rho + delta) - q||
// + gamma * ||delta||, with its gradient in delta. The norms use the zero
// subgradient at 0.
SearchLoss EvaluateSearchLoss(std::span<const double> prototype,
                              std::span<const double> delta,
                              std::span<const double> query,
                              const DenseNet& target_model, const Autoencoder& ae,
                              const SearchConfig& config);

struct CounterfactualResult {
  Vector delta;
  Vector sample;
  int target_class = 0;
  int predicted_class = 0;
  bool flipped = false;
  // Loss of every iterate, starting with the initial delta.
  std::vector<double> loss_trace;
  double best_loss = 0.0;
  std::size_t best_iteration = 0;
  // Loss at delta = 0; best_loss exceeds it only for jittered starts, in which
  // case `non_convergence` is set.
  double origin_loss = 0.0;
  bool non_convergence = false;
};

// Plain gradient descent on delta with best-iterate tracking.
CounterfactualResult SearchCounterfactual(const PrototypeSet& prototypes,
                                          std::span<const double> query,
                                          const DenseNet& target_model,
                                          const Autoencoder& ae,
                                          const SearchConfig& config, Rng& rng);

// Non-private reference generator: normalised gradient ascent on the target
// class log-probability directly in data space, projected onto [-1, 1]^d,
// stopping at the first iterate the model assigns to the target class.
CounterfactualResult BaselineCounterfactual(std::span<const double> query,
                                            const DenseNet& target_model,
                                            int target_class, std::size_t steps,
                                            double step_size);

int ArgMax(std::span<const double> v);

struct UnbiasednessResult {
  Vector mean_deviation;
  Vector standard_error;
  double deviation = 0.0;  // infinity norm of mean_deviation
  double max_z = 0.0;      // max_j |mean_j| / se_j (0 when se_j = 0)
};

// Monte-Carlo estimate of E[cs(rho + eta)] - cs(rho) for a search that is
// affine in the prototype (identity decoder, quadratic losses, fixed-step
// gradient descent) under symmetric Laplace prototype noise.
UnbiasednessResult UnbiasednessProbe(std::size_t toy_dim, double noise_scale,
                                     std::size_t trials, Rng& rng);

}  // namespace dpc

#endif  // DPC_CORE_HPP_
