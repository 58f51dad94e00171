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

#include "dpc/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dpc/core.hpp"
#include "dpc/error.hpp"

namespace dpc {

void ClassifierSpec::Validate() const {
  Require(activation == Activation::kTanh || activation == Activation::kRelu,
          ErrorKind::kParameter, "classifier activation must be tanh or relu");
  for (std::size_t w : hidden_widths) {
    Require(w > 0, ErrorKind::kParameter, "hidden widths must be positive");
  }
}

ClassifierSpec WidenSpec(const ClassifierSpec& spec) {
  ClassifierSpec out = spec;
  if (!out.hidden_widths.empty()) out.hidden_widths.push_back(out.hidden_widths.back());
  return out;
}

DenseNet MakeClassifier(const ClassifierSpec& spec, std::size_t input_dim,
                        std::size_t class_count, Rng& rng) {
  spec.Validate();
  Require(input_dim > 0, ErrorKind::kParameter, "input_dim must be positive");
  Require(class_count >= 2, ErrorKind::kParameter, "need at least two classes");
  DenseNet net;
  net.input_dim = input_dim;
  std::size_t prev = input_dim;
  for (std::size_t w : spec.hidden_widths) {
    net.layers.push_back(DenseLayer::Create(prev, w, spec.activation, true, rng));
    prev = w;
  }
  net.layers.push_back(
      DenseLayer::Create(prev, class_count, Activation::kSoftmax, true, rng));
  return net;
}

namespace {

void CheckLabels(const DenseNet& net, const Matrix& features, std::span<const int> labels) {
  Require(features.rows() == labels.size(), ErrorKind::kStructural,
          "feature and label counts differ");
  Require(features.cols() == net.input_dim, ErrorKind::kStructural,
          "feature width does not match the model input");
  const auto classes = static_cast<int>(net.output_dim());
  for (int y : labels) {
    Require(y >= 0 && y < classes, ErrorKind::kParameter,
            "label " + std::to_string(y) + " out of range");
  }
}

// Returns the summed cross-entropy and fills `upstream` with (p - y) * scale.
double SoftmaxResidual(const Matrix& probs, std::span<const int> labels, double scale,
                       Matrix& upstream) {
  upstream = Matrix(probs.rows(), probs.cols());
  double loss = 0.0;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    loss -= std::log(std::max(probs(i, y), 1e-300));
    for (std::size_t c = 0; c < probs.cols(); ++c) {
      upstream(i, c) = scale * (probs(i, c) - (c == y ? 1.0 : 0.0));
    }
  }
  return loss;
}

}  // namespace

double CrossEntropy(const DenseNet& net, const Matrix& features,
                    std::span<const int> labels, GradientSet* gradient) {
  CheckLabels(net, features, labels);
  Require(features.rows() > 0, ErrorKind::kParameter, "cross-entropy of an empty set");
  const double inv_n = 1.0 / static_cast<double>(features.rows());
  const BatchActivations acts = ForwardBatch(net, features);
  Matrix upstream;
  const double loss = SoftmaxResidual(acts.output(), labels, inv_n, upstream) * inv_n;
  if (gradient != nullptr) *gradient = BackwardBatchFromPreActivation(net, acts, upstream);
  return loss;
}

void FitClassifier(DenseNet& net, const Matrix& features, std::span<const int> labels,
                   const ClassifierTrainOptions& options, Rng& shuffle_rng) {
  CheckLabels(net, features, labels);
  Require(options.batch_size > 0, ErrorKind::kParameter, "batch_size must be positive");
  const std::size_t n = features.rows();
  if (n == 0 || options.epochs == 0) return;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  AdamState adam;
  AdagradState adagrad;
  std::vector<int> batch_labels;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    shuffle_rng.Shuffle(order);
    for (std::size_t start = 0; start < n; start += options.batch_size) {
      const std::size_t end = std::min(n, start + options.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const Matrix batch = features.SelectRows(idx);
      batch_labels.clear();
      for (std::size_t i : idx) batch_labels.push_back(labels[i]);
      try {
        GradientSet grad;
        const double loss = CrossEntropy(net, batch, batch_labels, &grad);
        Require(std::isfinite(loss), ErrorKind::kNumeric, "non-finite cross-entropy");
        if (options.optimizer == OptimizerKind::kAdam) {
          AdamStep(net, grad, adam, options.adam);
        } else {
          AdagradStep(net, grad, adagrad, options.adagrad);
        }
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kNumeric) throw;
        Fail(ErrorKind::kTraining, "classifier training diverged at epoch " +
                                       std::to_string(epoch) + ": " + e.what());
      }
    }
  }
}

DenseNet TrainClassifier(const ClassifierSpec& spec, const Dataset& train,
                         const ClassifierTrainOptions& options, const Rng& rng) {
  Require(train.size() > 0, ErrorKind::kParameter, "training set is empty");
  Rng init_rng = rng.Substream("init");
  Rng shuffle_rng = rng.Substream("shuffle");
  DenseNet net = MakeClassifier(spec, train.dim(),
                                static_cast<std::size_t>(std::max(train.class_count, 2)),
                                init_rng);
  FitClassifier(net, train.features, train.labels, options, shuffle_rng);
  return net;
}

Vector PredictProba(const DenseNet& net, std::span<const double> x) {
  Require(x.size() == net.input_dim, ErrorKind::kStructural,
          "input width " + std::to_string(x.size()) + " does not match the model (" +
              std::to_string(net.input_dim) + ")");
  return Predict(net, x);
}

Matrix PredictProbaBatch(const DenseNet& net, const Matrix& x) {
  Require(x.cols() == net.input_dim, ErrorKind::kStructural,
          "input width does not match the model");
  return ForwardBatch(net, x).output();
}

int PredictLabel(const DenseNet& net, std::span<const double> x) {
  return ArgMax(PredictProba(net, x));
}

std::vector<int> PredictLabels(const DenseNet& net, const Matrix& x) {
  const Matrix p = PredictProbaBatch(net, x);
  std::vector<int> out(p.rows());
  for (std::size_t i = 0; i < p.rows(); ++i) out[i] = ArgMax(p.row(i));
  return out;
}

double Accuracy(const DenseNet& net, const Matrix& features, std::span<const int> labels) {
  Require(features.rows() == labels.size(), ErrorKind::kStructural,
          "feature and label counts differ");
  if (labels.empty()) return 0.0;
  const std::vector<int> pred = PredictLabels(net, features);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace dpc
