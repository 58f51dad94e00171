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

// Softmax classifiers: target models, surrogates and shadow models.

#ifndef DPC_CLASSIFIER_HPP_
#define DPC_CLASSIFIER_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "dpc/data.hpp"
#include "dpc/numerics.hpp"

namespace dpc {

struct ClassifierSpec {
  std::vector<std::size_t> hidden_widths;
  Activation activation = Activation::kTanh;  // kTanh or kRelu

  void Validate() const;
  friend bool operator==(const ClassifierSpec&, const ClassifierSpec&) = default;
};

// Appends one hidden layer as wide as the last one (the unknown-architecture
// surrogate). An empty spec gains nothing to copy and stays unchanged.
ClassifierSpec WidenSpec(const ClassifierSpec& spec);

// Biased dense layers with the spec's activation and a softmax output of
// width class_count.
DenseNet MakeClassifier(const ClassifierSpec& spec, std::size_t input_dim,
                        std::size_t class_count, Rng& rng);

enum class OptimizerKind { kAdam, kAdagrad };

struct ClassifierTrainOptions {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  AdamOptions adam{};
  AdagradOptions adagrad{};
};

// Minimises the summed softmax cross-entropy, averaged per batch. Randomness
// comes from the "init" and "shuffle" substreams of `rng`. Throws kTraining
// on divergence.
DenseNet TrainClassifier(const ClassifierSpec& spec, const Dataset& train,
                         const ClassifierTrainOptions& options, const Rng& rng);

// Continues training an existing softmax net in place.
void FitClassifier(DenseNet& net, const Matrix& features, std::span<const int> labels,
                   const ClassifierTrainOptions& options, Rng& shuffle_rng);

// Mean cross-entropy of `net` on (features, labels) and its parameter
// gradient.
double CrossEntropy(const DenseNet& net, const Matrix& features,
                    std::span<const int> labels, GradientSet* gradient = nullptr);

Vector PredictProba(const DenseNet& net, std::span<const double> x);
Matrix PredictProbaBatch(const DenseNet& net, const Matrix& x);
int PredictLabel(const DenseNet& net, std::span<const double> x);
std::vector<int> PredictLabels(const DenseNet& net, const Matrix& x);
double Accuracy(const DenseNet& net, const Matrix& features, std::span<const int> labels);

}  // namespace dpc

#endif  // DPC_CLASSIFIER_HPP_
