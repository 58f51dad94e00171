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

#ifndef DPC_AUTOENCODER_HPP_
#define DPC_AUTOENCODER_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "dpc/numerics.hpp"

namespace dpc {

// Sigmoid autoencoder without biases. An affine_norm layer (h -> 2h - 1)
// precedes every hidden layer after the first, so each hidden layer sees
// inputs in (-1, 1). The decoder mirrors the encoder widths and ends with an
// affine_norm so reconstructions share the data range (-1, 1).
//
//   encoder: d -> w0 -> norm -> w1 -> ... -> w_{L-1}   (latent, in (0, 1))
//   decoder: norm -> w_{L-2} -> norm -> ... -> w0 -> norm -> d -> norm
struct AutoencoderSpec {
  std::vector<std::size_t> encoder_widths;
  // Decoder weights are the transposes of the mirrored encoder weights.
  bool tied_weights = false;

  // K: the widest hidden layer, which drives the sensitivity bound.
  std::size_t width_k() const;
  void Validate() const;

  friend bool operator==(const AutoencoderSpec&, const AutoencoderSpec&) = default;
};

struct Autoencoder {
  DenseNet encoder;
  DenseNet decoder;
  bool tied_weights = false;

  std::size_t input_dim() const { return encoder.input_dim; }
  std::size_t latent_dim() const { return encoder.output_dim(); }
  // Maximal hidden width over encoder and decoder.
  std::size_t width_k() const;
  const Matrix& first_layer_weights() const { return encoder.layers.front().weights; }

  friend bool operator==(const Autoencoder&, const Autoencoder&) = default;
};

Autoencoder MakeAutoencoder(const AutoencoderSpec& spec, std::size_t input_dim,
                            Rng& rng);

// For tied autoencoders: rewrite decoder weights from the encoder.
void SyncTiedDecoder(Autoencoder& ae);

// Indices (into encoder.layers / decoder.layers) of parametrised layers,
// decoder listed so that entry j mirrors encoder entry L-1-j.
std::vector<std::size_t> ParametricLayers(const DenseNet& net);

Vector Encode(const Autoencoder& ae, std::span<const double> x);
Vector Decode(const Autoencoder& ae, std::span<const double> z);
Matrix EncodeBatch(const Autoencoder& ae, const Matrix& x);
Matrix ReconstructBatch(const Autoencoder& ae, const Matrix& x);

// Mean over rows and coordinates of the squared reconstruction error.
double ReconstructionMse(const Autoencoder& ae, const Matrix& x);

}  // namespace dpc

#endif  // DPC_AUTOENCODER_HPP_
