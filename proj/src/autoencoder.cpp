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

#include "dpc/autoencoder.hpp"

#include <algorithm>

#include "dpc/error.hpp"

namespace dpc {

std::size_t AutoencoderSpec::width_k() const {
  std::size_t k = 0;
  for (std::size_t w : encoder_widths) k = std::max(k, w);
  return k;
}

void AutoencoderSpec::Validate() const {
  Require(!encoder_widths.empty(), ErrorKind::kParameter,
          "autoencoder needs at least one encoder layer");
  for (std::size_t w : encoder_widths) {
    Require(w > 0, ErrorKind::kParameter, "encoder widths must be positive");
  }
}

std::size_t Autoencoder::width_k() const {
  // Decoder hidden widths repeat the encoder's, and its output layer is not
  // hidden, so the encoder alone determines K.
  std::size_t k = 0;
  for (const auto& layer : encoder.layers) {
    if (layer.has_parameters()) k = std::max(k, layer.out_dim());
  }
  return k;
}

Autoencoder MakeAutoencoder(const AutoencoderSpec& spec, std::size_t input_dim,
                            Rng& rng) {
  spec.Validate();
  Require(input_dim > 0, ErrorKind::kParameter, "input_dim must be positive");
  Autoencoder ae;
  ae.tied_weights = spec.tied_weights;
  ae.encoder.input_dim = input_dim;
  std::size_t prev = input_dim;
  for (std::size_t i = 0; i < spec.encoder_widths.size(); ++i) {
    if (i > 0) ae.encoder.layers.push_back(DenseLayer::AffineNorm(prev));
    const std::size_t w = spec.encoder_widths[i];
    ae.encoder.layers.push_back(
        DenseLayer::Create(prev, w, Activation::kSigmoid, false, rng));
    prev = w;
  }
  ae.decoder.input_dim = prev;
  for (std::size_t i = spec.encoder_widths.size(); i-- > 0;) {
    const std::size_t out = i == 0 ? input_dim : spec.encoder_widths[i - 1];
    ae.decoder.layers.push_back(DenseLayer::AffineNorm(prev));
    ae.decoder.layers.push_back(
        DenseLayer::Create(prev, out, Activation::kSigmoid, false, rng));
    prev = out;
  }
  ae.decoder.layers.push_back(DenseLayer::AffineNorm(input_dim));
  if (ae.tied_weights) SyncTiedDecoder(ae);
  return ae;
}

std::vector<std::size_t> ParametricLayers(const DenseNet& net) {
  std::vector<std::size_t> idx;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    if (net.layers[l].has_parameters()) idx.push_back(l);
  }
  return idx;
}

void SyncTiedDecoder(Autoencoder& ae) {
  const auto enc = ParametricLayers(ae.encoder);
  const auto dec = ParametricLayers(ae.decoder);
  Require(enc.size() == dec.size(), ErrorKind::kStructural,
          "tied autoencoder needs mirrored layers");
  for (std::size_t j = 0; j < dec.size(); ++j) {
    const Matrix& src = ae.encoder.layers[enc[enc.size() - 1 - j]].weights;
    Matrix& dst = ae.decoder.layers[dec[j]].weights;
    Require(dst.rows() == src.cols() && dst.cols() == src.rows(),
            ErrorKind::kStructural, "tied autoencoder layer shapes do not mirror");
    for (std::size_t r = 0; r < src.rows(); ++r) {
      for (std::size_t c = 0; c < src.cols(); ++c) dst(c, r) = src(r, c);
    }
  }
}

Vector Encode(const Autoencoder& ae, std::span<const double> x) {
  return Predict(ae.encoder, x);
}

Vector Decode(const Autoencoder& ae, std::span<const double> z) {
  return Predict(ae.decoder, z);
}

Matrix EncodeBatch(const Autoencoder& ae, const Matrix& x) {
  return ForwardBatch(ae.encoder, x).output();
}

Matrix ReconstructBatch(const Autoencoder& ae, const Matrix& x) {
  return ForwardBatch(ae.decoder, EncodeBatch(ae, x)).output();
}

double ReconstructionMse(const Autoencoder& ae, const Matrix& x) {
  Require(x.rows() > 0, ErrorKind::kParameter, "MSE of an empty set");
  const Matrix r = ReconstructBatch(ae, x);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.data().size(); ++i) {
    const double e = r.data()[i] - x.data()[i];
    sum += e * e;
  }
  return sum / static_cast<double>(x.data().size());
}

}  // namespace dpc
