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

// Dense-network numerics shared by every other module: a seedable generator,
// row-major matrices, fully connected layers with analytic backward passes,
// the Adam / Adagrad optimizers and the Laplace sampler.
//
// All reductions run in a fixed left-to-right order, so equal inputs give
// bit-identical outputs.

#ifndef DPC_NUMERICS_HPP_
#define DPC_NUMERICS_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dpc {

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  // Copies the given rows, in order, into a new matrix.
  Matrix SelectRows(std::span<const std::size_t> indices) const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Seedable generator. The raw engine is std::mt19937_64, whose output
// sequence is fixed by the standard; every derived distribution is computed
// here rather than through <random> distributions, whose algorithms are
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t position() const { return position_; }

  std::uint64_t NextU64() {
    ++position_;
    return engine_();
  }
  // Uniform on [0, 1) with 53 random bits.
  double Uniform();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  // Standard normal via Box-Muller (no cached second variate).
  double Normal();
  // Uniform integer in [0, n).
  std::size_t Index(std::size_t n);
  void Shuffle(std::span<std::size_t> values);

  // Independent generator for a named pipeline stage ("data", "init", ...).
  // Depends only on this generator's seed, never on its position.
  Rng Substream(std::string_view name) const;

 private:
  std::uint64_t seed_;
  std::uint64_t position_ = 0;
  std::mt19937_64 engine_;
};

std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t salt);

enum class Activation { kSigmoid, kTanh, kRelu, kSoftmax, kIdentity, kAffineNorm };

const char* ActivationName(Activation activation);
Activation ParseActivation(std::string_view name);

double Sigmoid(double z);

// A fully connected layer, or (for kAffineNorm) the parameter-free map
// h -> 2h - 1. Parameter-free layers keep an empty `weights` of shape
// (width x 0) so that their width is still recorded.
struct DenseLayer {
  Matrix weights;  // out_dim x in_dim
  std::optional<Vector> bias;
  Activation activation = Activation::kIdentity;

  static DenseLayer Create(std::size_t in_dim, std::size_t out_dim,
                           Activation activation, bool with_bias, Rng& rng);
  static DenseLayer AffineNorm(std::size_t width);

  bool has_parameters() const { return activation != Activation::kAffineNorm; }
  std::size_t in_dim() const {
    return has_parameters() ? weights.cols() : weights.rows();
  }
  std::size_t out_dim() const { return weights.rows(); }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct DenseNet {
  std::size_t input_dim = 0;
  std::vector<DenseLayer> layers;

  std::size_t output_dim() const {
    return layers.empty() ? input_dim : layers.back().out_dim();
  }
  std::size_t parameter_count() const;
  // Throws kStructural unless adjacent layer dimensions compose and every
  // parameter is finite.
  void Validate() const;

  friend bool operator==(const DenseNet&, const DenseNet&) = default;
};

struct LayerGradient {
  Matrix weights;
  std::optional<Vector> bias;
};

// Gradients mirroring a DenseNet, plus the gradient with respect to the
// network input (filled by the backward passes, used by the counterfactual
// searches).
struct GradientSet {
  std::vector<LayerGradient> layers;
  Vector input;

  static GradientSet ZerosLike(const DenseNet& net);
  void Add(const GradientSet& other);
  void Scale(double factor);
  double MaxAbs() const;
  bool AllFinite() const;
};

// values[0] is the input; values[i + 1] is the output of layer i.
struct Activations {
  std::vector<Vector> values;
  const Vector& output() const { return values.back(); }
};

struct BatchActivations {
  std::vector<Matrix> values;
  const Matrix& output() const { return values.back(); }
};

Activations Forward(const DenseNet& net, std::span<const double> x);
BatchActivations ForwardBatch(const DenseNet& net, const Matrix& x);
Vector Predict(const DenseNet& net, std::span<const double> x);

// Gradient of a scalar loss whose derivative with respect to the network
// output is `upstream`.
GradientSet Backward(const DenseNet& net, const Activations& acts,
                     std::span<const double> upstream);
// As Backward, but `upstream` is taken with respect to the last layer's
// pre-activation. Used for softmax + cross-entropy and sigmoid + binary
// cross-entropy, where that gradient is simply (output - target).
GradientSet BackwardFromPreActivation(const DenseNet& net,
                                      const Activations& acts,
                                      std::span<const double> upstream);

// Batch versions; parameter gradients are summed over rows in row order.
// The input gradient is only computed when `want_input` is set.
GradientSet BackwardBatch(const DenseNet& net, const BatchActivations& acts,
                          const Matrix& upstream, bool want_input = false);
GradientSet BackwardBatchFromPreActivation(const DenseNet& net,
                                           const BatchActivations& acts,
                                           const Matrix& upstream,
                                           bool want_input = false);

// Flat views of the trainable parameters, one block per weight matrix and
// per bias vector, in layer order.
std::vector<std::span<double>> ParameterBlocks(DenseNet& net);
std::vector<std::span<const double>> GradientBlocks(const GradientSet& grads);

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Vector> first_moment;
  std::vector<Vector> second_moment;
  std::int64_t step = 0;
};

// Standard bias-corrected Adam. The state is sized on first use. A
// non-finite gradient rejects the whole step (kNumeric) and leaves params and
// state untouched.
void AdamStep(std::span<const std::span<double>> params,
              std::span<const std::span<const double>> grads, AdamState& state,
              const AdamOptions& options);
void AdamStep(DenseNet& net, const GradientSet& grads, AdamState& state,
              const AdamOptions& options);

struct AdagradOptions {
  double learning_rate = 1e-2;
  // Time-based decay: lr_t = lr / (1 + decay * t), t = completed steps.
  double decay = 0.0;
  double epsilon = 1e-10;
};

struct AdagradState {
  std::vector<Vector> accumulator;
  std::int64_t step = 0;
};

void AdagradStep(std::span<const std::span<double>> params,
                 std::span<const std::span<const double>> grads,
                 AdagradState& state, const AdagradOptions& options);
void AdagradStep(DenseNet& net, const GradientSet& grads, AdagradState& state,
                 const AdagradOptions& options);

// Inverse-CDF Laplace transform of u in (-0.5, 0.5).
double LaplaceFromUniform(double u, double scale);
Vector SampleLaplace(Rng& rng, double scale, std::size_t count);
double LaplaceCdf(double x, double scale);

double Dot(std::span<const double> a, std::span<const double> b);
double Norm2(std::span<const double> a);

}  // namespace dpc

#endif  // DPC_NUMERICS_HPP_
