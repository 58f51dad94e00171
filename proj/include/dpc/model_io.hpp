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

// JSON model files. Reals are written in shortest round-trip form, so every
// file reads back bit-exactly.

#ifndef DPC_MODEL_IO_HPP_
#define DPC_MODEL_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <string>

#include "dpc/autoencoder.hpp"
#include "dpc/classifier.hpp"
#include "dpc/functional_mechanism.hpp"
#include "dpc/numerics.hpp"

namespace dpc {

// Identifies the noise draws an autoencoder was trained with.
struct NoiseReference {
  std::string file;  // relative to the model file
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t stream_position = 0;

  friend bool operator==(const NoiseReference&, const NoiseReference&) = default;
};

NoiseReference MakeNoiseReference(const NoisyCoefficients& noise, std::string file);

struct AutoencoderFile {
  Autoencoder model;
  NoiseReference noise;
};

std::string AutoencoderToJsonText(const AutoencoderFile& file);
AutoencoderFile AutoencoderFromJsonText(const std::string& text);

struct ClassifierFile {
  DenseNet net;
  ClassifierSpec spec;
};

std::string ClassifierToJsonText(const ClassifierFile& file);
ClassifierFile ClassifierFromJsonText(const std::string& text);

// Whole-file text I/O; failures throw kIo naming the path.
std::string ReadTextFile(const std::filesystem::path& path);
void WriteTextFile(const std::filesystem::path& path, const std::string& text);

}  // namespace dpc

#endif  // DPC_MODEL_IO_HPP_
