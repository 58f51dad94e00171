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

#include "dpc/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

#include "dpc/error.hpp"

namespace dpc {

const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParameter: return "parameter error";
    case ErrorKind::kStructural: return "structural error";
    case ErrorKind::kIngestion: return "ingestion error";
    case ErrorKind::kIo: return "io error";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kTraining: return "training error";
  }
  return "error";
}

Matrix Matrix::SelectRows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    Require(indices[i] < rows_, ErrorKind::kStructural, "row index out of range");
    std::copy_n(row(indices[i]).begin(), cols_, out.row(i).begin());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rng

std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finaliser over the combined value.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::Uniform() {
  return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
}

double Rng::Normal() {
  double u1 = Uniform();
  while (u1 <= 0.0) u1 = Uniform();
  const double u2 = Uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::Index(std::size_t n) {
  Require(n > 0, ErrorKind::kParameter, "Rng::Index requires n > 0");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = NextU64();
  while (x >= limit) x = NextU64();
  return static_cast<std::size_t>(x % n);
}

void Rng::Shuffle(std::span<std::size_t> values) {
  for (std::size_t i = values.size(); i > 1; --i) {
    std::swap(values[i - 1], values[Index(i)]);
  }
}

Rng Rng::Substream(std::string_view name) const {
  std::uint64_t hash = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : name) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return Rng(MixSeed(seed_, hash));
}

// ---------------------------------------------------------------------------
// Layers

const char* ActivationName(Activation activation) {
  switch (activation) {
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kSoftmax: return "softmax";
    case Activation::kIdentity: return "identity";
    case Activation::kAffineNorm: return "affine_norm";
  }
  return "identity";
}

Activation ParseActivation(std::string_view name) {
  for (Activation a : {Activation::kSigmoid, Activation::kTanh, Activation::kRelu,
                       Activation::kSoftmax, Activation::kIdentity,
                       Activation::kAffineNorm}) {
    if (name == ActivationName(a)) return a;
  }
  Fail(ErrorKind::kParameter, "unknown activation '" + std::string(name) + "'");
}

double Sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

DenseLayer DenseLayer::Create(std::size_t in_dim, std::size_t out_dim,
                              Activation activation, bool with_bias, Rng& rng) {
  Require(in_dim > 0 && out_dim > 0, ErrorKind::kParameter,
          "layer dimensions must be positive");
  Require(activation != Activation::kAffineNorm, ErrorKind::kParameter,
          "use DenseLayer::AffineNorm for normalisation layers");
  DenseLayer layer;
  layer.activation = activation;
  layer.weights = Matrix(out_dim, in_dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  for (double& w : layer.weights.data()) w = rng.Uniform(-bound, bound);
  if (with_bias) layer.bias = Vector(out_dim, 0.0);
  return layer;
}

DenseLayer DenseLayer::AffineNorm(std::size_t width) {
  DenseLayer layer;
  layer.activation = Activation::kAffineNorm;
  layer.weights = Matrix(width, 0);
  return layer;
}

std::size_t DenseNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) {
    n += layer.weights.data().size();
    if (layer.bias) n += layer.bias->size();
  }
  return n;
}

void DenseNet::Validate() const {
  Require(input_dim > 0, ErrorKind::kStructural, "network input_dim must be positive");
  std::size_t width = input_dim;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const DenseLayer& layer = layers[l];
    Require(layer.in_dim() == width, ErrorKind::kStructural,
            "layer " + std::to_string(l) + " expects input width " +
                std::to_string(layer.in_dim()) + " but receives " +
                std::to_string(width));
    if (layer.bias) {
      Require(layer.bias->size() == layer.out_dim(), ErrorKind::kStructural,
              "layer " + std::to_string(l) + " bias has wrong length");
    }
    for (double w : layer.weights.data()) {
      Require(std::isfinite(w), ErrorKind::kStructural,
              "layer " + std::to_string(l) + " has a non-finite weight");
    }
    width = layer.out_dim();
  }
}

GradientSet GradientSet::ZerosLike(const DenseNet& net) {
  GradientSet g;
  g.layers.reserve(net.layers.size());
  for (const auto& layer : net.layers) {
    LayerGradient lg;
    if (layer.has_parameters()) {
      lg.weights = Matrix(layer.weights.rows(), layer.weights.cols());
      if (layer.bias) lg.bias = Vector(layer.bias->size(), 0.0);
    }
    g.layers.push_back(std::move(lg));
  }
  return g;
}

void GradientSet::Add(const GradientSet& other) {
  Require(layers.size() == other.layers.size(), ErrorKind::kStructural,
          "gradient sets differ in layer count");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& a = layers[l].weights.data();
    const auto& b = other.layers[l].weights.data();
    Require(a.size() == b.size(), ErrorKind::kStructural, "gradient shape mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    if (layers[l].bias && other.layers[l].bias) {
      for (std::size_t i = 0; i < layers[l].bias->size(); ++i) {
        (*layers[l].bias)[i] += (*other.layers[l].bias)[i];
      }
    }
  }
  if (input.size() == other.input.size()) {
    for (std::size_t i = 0; i < input.size(); ++i) input[i] += other.input[i];
  }
}

void GradientSet::Scale(double factor) {
  for (auto& lg : layers) {
    for (double& v : lg.weights.data()) v *= factor;
    if (lg.bias) {
      for (double& v : *lg.bias) v *= factor;
    }
  }
  for (double& v : input) v *= factor;
}

double GradientSet::MaxAbs() const {
  double m = 0.0;
  for (const auto& lg : layers) {
    for (double v : lg.weights.data()) m = std::max(m, std::abs(v));
    if (lg.bias) {
      for (double v : *lg.bias) m = std::max(m, std::abs(v));
    }
  }
  return m;
}

bool GradientSet::AllFinite() const {
  for (const auto& lg : layers) {
    for (double v : lg.weights.data()) {
      if (!std::isfinite(v)) return false;
    }
    if (lg.bias) {
      for (double v : *lg.bias) {
        if (!std::isfinite(v)) return false;
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

void ApplyActivation(Activation activation, Matrix& z) {
  auto& d = z.data();
  switch (activation) {
    case Activation::kSigmoid:
      for (double& v : d) v = Sigmoid(v);
      break;
    case Activation::kTanh:
      for (double& v : d) v = std::tanh(v);
      break;
    case Activation::kRelu:
      for (double& v : d) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::kIdentity:
      break;
    case Activation::kAffineNorm:
      for (double& v : d) v = 2.0 * v - 1.0;
      break;
    case Activation::kSoftmax:
      for (std::size_t i = 0; i < z.rows(); ++i) {
        auto r = z.row(i);
        double mx = r[0];
        for (double v : r) mx = std::max(mx, v);
        double sum = 0.0;
        for (double& v : r) {
          v = std::exp(v - mx);
          sum += v;
        }
        for (double& v : r) v /= sum;
      }
      break;
  }
}

// Converts d(loss)/d(output) into d(loss)/d(pre-activation) in place.
void ActivationBackward(Activation activation, const Matrix& out, Matrix& g) {
  auto& gd = g.data();
  const auto& od = out.data();
  switch (activation) {
    case Activation::kSigmoid:
      for (std::size_t i = 0; i < gd.size(); ++i) gd[i] *= od[i] * (1.0 - od[i]);
      break;
    case Activation::kTanh:
      for (std::size_t i = 0; i < gd.size(); ++i) gd[i] *= 1.0 - od[i] * od[i];
      break;
    case Activation::kRelu:
      for (std::size_t i = 0; i < gd.size(); ++i) {
        if (!(od[i] > 0.0)) gd[i] = 0.0;
      }
      break;
    case Activation::kIdentity:
      break;
    case Activation::kAffineNorm:
      for (double& v : gd) v *= 2.0;
      break;
    case Activation::kSoftmax:
      for (std::size_t i = 0; i < g.rows(); ++i) {
        auto gr = g.row(i);
        auto sr = out.row(i);
        double inner = 0.0;
        for (std::size_t j = 0; j < gr.size(); ++j) inner += sr[j] * gr[j];
        for (std::size_t j = 0; j < gr.size(); ++j) gr[j] = sr[j] * (gr[j] - inner);
      }
      break;
  }
}

using V2 = double __attribute__((vector_size(16)));

void GemmAccumulate(std::size_t m, std::size_t n, std::size_t depth, const double* a,
                    std::size_t a_row_stride, std::size_t a_col_stride, const double* b,
                    std::size_t b_row_stride, std::size_t b_col_stride, double* c,
                    std::size_t ldc) {
  constexpr std::size_t kTm = 4;
  constexpr std::size_t kTn = 4;
  // Depth blocks run in ascending order, so each entry still sums in order.
  constexpr std::size_t kKc = 128;
  if (depth > kKc) {
    for (std::size_t p0 = 0; p0 < depth; p0 += kKc) {
      GemmAccumulate(m, n, std::min(kKc, depth - p0), a + p0 * a_col_stride, a_row_stride,
                     a_col_stride, b + p0 * b_row_stride, b_row_stride, b_col_stride, c, ldc);
    }
    return;
  }
  std::vector<double> panel(depth * kTn);
  std::size_t j = 0;
  for (; j + kTn <= n; j += kTn) {
    // Pack the column panel so the inner loop reads it sequentially.
    for (std::size_t p = 0; p < depth; ++p) {
      for (std::size_t q = 0; q < kTn; ++q) {
        panel[p * kTn + q] = b[p * b_row_stride + (j + q) * b_col_stride];
      }
    }
    std::size_t i = 0;
    for (; i + kTm <= m; i += kTm) {
      // Two-lane accumulators; lane arithmetic is the same mul-then-add as
      // the scalar tail, so results do not depend on the path taken.
      V2 acc[kTm][2];
      for (std::size_t r = 0; r < kTm; ++r) {
        std::memcpy(&acc[r][0], c + (i + r) * ldc + j, sizeof(V2));
        std::memcpy(&acc[r][1], c + (i + r) * ldc + j + 2, sizeof(V2));
      }
      const double* a0 = a + i * a_row_stride;
      for (std::size_t p = 0; p < depth; ++p) {
        V2 b0;
        V2 b1;
        std::memcpy(&b0, panel.data() + p * kTn, sizeof(V2));
        std::memcpy(&b1, panel.data() + p * kTn + 2, sizeof(V2));
        const double* ap = a0 + p * a_col_stride;
        for (std::size_t r = 0; r < kTm; ++r) {
          const double av = ap[r * a_row_stride];
          const V2 x = {av, av};
          acc[r][0] += x * b0;
          acc[r][1] += x * b1;
        }
      }
      for (std::size_t r = 0; r < kTm; ++r) {
        std::memcpy(c + (i + r) * ldc + j, &acc[r][0], sizeof(V2));
        std::memcpy(c + (i + r) * ldc + j + 2, &acc[r][1], sizeof(V2));
      }
    }
    for (; i < m; ++i) {
      double acc[kTn];
      for (std::size_t q = 0; q < kTn; ++q) acc[q] = c[i * ldc + j + q];
      for (std::size_t p = 0; p < depth; ++p) {
        const double av = a[i * a_row_stride + p * a_col_stride];
        for (std::size_t q = 0; q < kTn; ++q) acc[q] += av * panel[p * kTn + q];
      }
      for (std::size_t q = 0; q < kTn; ++q) c[i * ldc + j + q] = acc[q];
    }
  }
  for (; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) {
      double acc = c[i * ldc + j];
      for (std::size_t p = 0; p < depth; ++p) {
        acc += a[i * a_row_stride + p * a_col_stride] * b[p * b_row_stride + j * b_col_stride];
      }
      c[i * ldc + j] = acc;
    }
  }
}

// Z = A * W^T + b, each entry accumulated as b[o] + sum_k in ascending k.
Matrix Affine(const DenseLayer& layer, const Matrix& a) {
  const std::size_t out_dim = layer.out_dim();
  const std::size_t in_dim = layer.in_dim();
  Matrix z(a.rows(), out_dim);
  if (layer.bias) {
    for (std::size_t i = 0; i < a.rows(); ++i) {
      std::copy(layer.bias->begin(), layer.bias->end(), z.row(i).begin());
    }
  }
  GemmAccumulate(a.rows(), out_dim, in_dim, a.data().data(), in_dim, 1,
                 layer.weights.data().data(), 1, in_dim, z.data().data(), out_dim);
  return z;
}

// `delta` enters as d(loss)/d(pre-activation of the last layer).
GradientSet BackwardImpl(const DenseNet& net, const BatchActivations& acts,
                         Matrix delta, bool want_input) {
  Require(acts.values.size() == net.layers.size() + 1, ErrorKind::kStructural,
          "activations do not belong to this network");
  GradientSet grads = GradientSet::ZerosLike(net);
  const std::size_t batch = delta.rows();
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const DenseLayer& layer = net.layers[l];
    const Matrix& a = acts.values[l];
    if (!layer.has_parameters()) {
      // delta is already d/d(pre-activation) = 2 * upstream; the map from
      // input to pre-activation is the identity.
      if (l > 0) ActivationBackward(net.layers[l - 1].activation, a, delta);
      continue;
    }
    LayerGradient& lg = grads.layers[l];
    const std::size_t out_dim = layer.out_dim();
    const std::size_t in_dim = layer.in_dim();
    // dW(o, k) = sum_i delta(i, o) * a(i, k), ascending i.
    GemmAccumulate(out_dim, in_dim, batch, delta.data().data(), 1, out_dim, a.data().data(),
                   in_dim, 1, lg.weights.data().data(), in_dim);
    if (lg.bias) {
      for (std::size_t o = 0; o < out_dim; ++o) {
        double gb = 0.0;
        for (std::size_t i = 0; i < batch; ++i) gb += delta(i, o);
        (*lg.bias)[o] = gb;
      }
    }
    if (l == 0 && !want_input) break;
    Matrix prev(batch, in_dim);
    GemmAccumulate(batch, in_dim, out_dim, delta.data().data(), out_dim, 1,
                   layer.weights.data().data(), in_dim, 1, prev.data().data(), in_dim);
    if (l > 0) ActivationBackward(net.layers[l - 1].activation, a, prev);
    delta = std::move(prev);
  }
  if (want_input) grads.input = std::move(delta.data());
  return grads;
}

Matrix RowMatrix(std::span<const double> v) {
  Matrix m(1, v.size());
  std::copy(v.begin(), v.end(), m.row(0).begin());
  return m;
}

void CheckUpstream(const DenseNet& net, const Matrix& upstream,
                   const BatchActivations& acts) {
  Require(upstream.cols() == net.output_dim() &&
              upstream.rows() == acts.output().rows(),
          ErrorKind::kStructural,
          "upstream gradient has shape " + std::to_string(upstream.rows()) + "x" +
              std::to_string(upstream.cols()) + ", expected " +
              std::to_string(acts.output().rows()) + "x" +
              std::to_string(net.output_dim()));
}

BatchActivations ToBatch(const Activations& acts) {
  BatchActivations b;
  b.values.reserve(acts.values.size());
  for (const auto& v : acts.values) b.values.push_back(RowMatrix(v));
  return b;
}

}  // namespace

BatchActivations ForwardBatch(const DenseNet& net, const Matrix& x) {
  Require(x.cols() == net.input_dim, ErrorKind::kStructural,
          "input has dimension " + std::to_string(x.cols()) +
              " but the network expects " + std::to_string(net.input_dim));
  BatchActivations acts;
  acts.values.reserve(net.layers.size() + 1);
  acts.values.push_back(x);
  for (const auto& layer : net.layers) {
    const Matrix& a = acts.values.back();
    Require(layer.in_dim() == a.cols(), ErrorKind::kStructural,
            "layer input width mismatch");
    Matrix z = layer.has_parameters() ? Affine(layer, a) : a;
    ApplyActivation(layer.activation, z);
    acts.values.push_back(std::move(z));
  }
  return acts;
}

Activations Forward(const DenseNet& net, std::span<const double> x) {
  BatchActivations b = ForwardBatch(net, RowMatrix(x));
  Activations acts;
  acts.values.reserve(b.values.size());
  for (auto& m : b.values) acts.values.push_back(std::move(m.data()));
  return acts;
}

Vector Predict(const DenseNet& net, std::span<const double> x) {
  return Forward(net, x).output();
}

GradientSet BackwardBatch(const DenseNet& net, const BatchActivations& acts,
                          const Matrix& upstream, bool want_input) {
  CheckUpstream(net, upstream, acts);
  Matrix delta = upstream;
  if (!net.layers.empty()) {
    ActivationBackward(net.layers.back().activation, acts.output(), delta);
  }
  return BackwardImpl(net, acts, std::move(delta), want_input);
}

GradientSet BackwardBatchFromPreActivation(const DenseNet& net,
                                           const BatchActivations& acts,
                                           const Matrix& upstream,
                                           bool want_input) {
  CheckUpstream(net, upstream, acts);
  return BackwardImpl(net, acts, upstream, want_input);
}

GradientSet Backward(const DenseNet& net, const Activations& acts,
                     std::span<const double> upstream) {
  return BackwardBatch(net, ToBatch(acts), RowMatrix(upstream), true);
}

GradientSet BackwardFromPreActivation(const DenseNet& net,
                                      const Activations& acts,
                                      std::span<const double> upstream) {
  return BackwardBatchFromPreActivation(net, ToBatch(acts), RowMatrix(upstream),
                                        true);
}

// ---------------------------------------------------------------------------
// Optimizers

std::vector<std::span<double>> ParameterBlocks(DenseNet& net) {
  std::vector<std::span<double>> blocks;
  for (auto& layer : net.layers) {
    if (!layer.has_parameters()) continue;
    blocks.emplace_back(layer.weights.data());
    if (layer.bias) blocks.emplace_back(*layer.bias);
  }
  return blocks;
}

std::vector<std::span<const double>> GradientBlocks(const GradientSet& grads) {
  std::vector<std::span<const double>> blocks;
  for (const auto& lg : grads.layers) {
    if (lg.weights.empty() && !lg.bias) continue;
    blocks.emplace_back(lg.weights.data());
    if (lg.bias) blocks.emplace_back(*lg.bias);
  }
  return blocks;
}

namespace {

void CheckBlocks(std::span<const std::span<double>> params,
                 std::span<const std::span<const double>> grads) {
  Require(params.size() == grads.size(), ErrorKind::kStructural,
          "optimizer: parameter and gradient block counts differ");
  for (std::size_t b = 0; b < params.size(); ++b) {
    Require(params[b].size() == grads[b].size(), ErrorKind::kStructural,
            "optimizer: block " + std::to_string(b) + " size mismatch");
    for (double g : grads[b]) {
      if (!std::isfinite(g)) {
        throw Error(ErrorKind::kNumeric,
                    "optimizer: non-finite gradient in block " + std::to_string(b));
      }
    }
  }
}

void SizeState(std::vector<Vector>& state,
               std::span<const std::span<double>> params) {
  if (state.empty()) {
    for (const auto& p : params) state.emplace_back(p.size(), 0.0);
    return;
  }
  Require(state.size() == params.size(), ErrorKind::kStructural,
          "optimizer state does not match parameters");
  for (std::size_t b = 0; b < params.size(); ++b) {
    Require(state[b].size() == params[b].size(), ErrorKind::kStructural,
            "optimizer state does not match parameters");
  }
}

}  // namespace

void AdamStep(std::span<const std::span<double>> params,
              std::span<const std::span<const double>> grads, AdamState& state,
              const AdamOptions& options) {
  Require(options.learning_rate > 0.0, ErrorKind::kParameter,
          "Adam learning rate must be positive");
  CheckBlocks(params, grads);
  SizeState(state.first_moment, params);
  SizeState(state.second_moment, params);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(options.beta1, t);
  const double c2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b];
    auto g = grads[b];
    auto& m = state.first_moment[b];
    auto& v = state.second_moment[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = options.beta1 * m[i] + (1.0 - options.beta1) * g[i];
      v[i] = options.beta2 * v[i] + (1.0 - options.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= options.learning_rate * m_hat / (std::sqrt(v_hat) + options.epsilon);
    }
  }
}

void AdamStep(DenseNet& net, const GradientSet& grads, AdamState& state,
              const AdamOptions& options) {
  auto p = ParameterBlocks(net);
  auto g = GradientBlocks(grads);
  AdamStep(p, g, state, options);
}

void AdagradStep(std::span<const std::span<double>> params,
                 std::span<const std::span<const double>> grads,
                 AdagradState& state, const AdagradOptions& options) {
  Require(options.learning_rate > 0.0, ErrorKind::kParameter,
          "Adagrad learning rate must be positive");
  Require(options.decay >= 0.0, ErrorKind::kParameter,
          "Adagrad decay must be non-negative");
  CheckBlocks(params, grads);
  SizeState(state.accumulator, params);
  const double lr = options.learning_rate /
                    (1.0 + options.decay * static_cast<double>(state.step));
  ++state.step;
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b];
    auto g = grads[b];
    auto& acc = state.accumulator[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      acc[i] += g[i] * g[i];
      p[i] -= lr * g[i] / (std::sqrt(acc[i]) + options.epsilon);
    }
  }
}

void AdagradStep(DenseNet& net, const GradientSet& grads, AdagradState& state,
                 const AdagradOptions& options) {
  auto p = ParameterBlocks(net);
  auto g = GradientBlocks(grads);
  AdagradStep(p, g, state, options);
}

// ---------------------------------------------------------------------------
// Laplace

double LaplaceFromUniform(double u, double scale) {
  if (u == 0.0) return 0.0;
  const double magnitude = -scale * std::log1p(-2.0 * std::abs(u));
  return u < 0.0 ? -magnitude : magnitude;
}

Vector SampleLaplace(Rng& rng, double scale, std::size_t count) {
  Require(scale > 0.0 && std::isfinite(scale), ErrorKind::kParameter,
          "Laplace scale must be positive and finite");
  Vector out(count);
  for (double& x : out) {
    double u = rng.Uniform() - 0.5;
    while (u <= -0.5) u = rng.Uniform() - 0.5;
    x = LaplaceFromUniform(u, scale);
  }
  return out;
}

double LaplaceCdf(double x, double scale) {
  return x < 0.0 ? 0.5 * std::exp(x / scale) : 1.0 - 0.5 * std::exp(-x / scale);
}

double Dot(std::span<const double> a, std::span<const double> b) {
  Require(a.size() == b.size(), ErrorKind::kStructural, "dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double Norm2(std::span<const double> a) { return std::sqrt(Dot(a, a)); }

}  // namespace dpc
