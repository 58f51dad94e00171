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

#include "dpc/model_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "dpc/error.hpp"

namespace dpc {

namespace {

using nlohmann::json;

json NetToJson(const DenseNet& net) {
  json doc;
  doc["input_dim"] = net.input_dim;
  doc["layers"] = json::array();
  for (const auto& layer : net.layers) {
    json l;
    l["activation"] = ActivationName(layer.activation);
    if (!layer.has_parameters()) {
      l["width"] = layer.out_dim();
    } else {
      l["rows"] = layer.weights.rows();
      l["cols"] = layer.weights.cols();
      l["weights"] = layer.weights.data();
      l["bias"] = layer.bias ? json(*layer.bias) : json();
    }
    doc["layers"].push_back(std::move(l));
  }
  return doc;
}

DenseNet NetFromJson(const json& doc) {
  DenseNet net;
  net.input_dim = doc.at("input_dim").get<std::size_t>();
  for (const json& l : doc.at("layers")) {
    const Activation act = ParseActivation(l.at("activation").get<std::string>());
    if (act == Activation::kAffineNorm) {
      net.layers.push_back(DenseLayer::AffineNorm(l.at("width").get<std::size_t>()));
      continue;
    }
    DenseLayer layer;
    layer.activation = act;
    const auto rows = l.at("rows").get<std::size_t>();
    const auto cols = l.at("cols").get<std::size_t>();
    layer.weights = Matrix(rows, cols);
    layer.weights.data() = l.at("weights").get<Vector>();
    Require(layer.weights.data().size() == rows * cols, ErrorKind::kStructural,
            "layer weight array has the wrong length");
    if (!l.at("bias").is_null()) {
      layer.bias = l.at("bias").get<Vector>();
      Require(layer.bias->size() == rows, ErrorKind::kStructural,
              "layer bias has the wrong length");
    }
    net.layers.push_back(std::move(layer));
  }
  net.Validate();
  return net;
}

json EpsilonToJson(double epsilon) {
  return std::isinf(epsilon) ? json() : json(epsilon);
}

double EpsilonFromJson(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

template <typename F>
auto ParseOrFail(const std::string& what, F&& body) {
  try {
    return body();
  } catch (const json::exception& e) {
    Fail(ErrorKind::kIngestion, "malformed " + what + ": " + e.what());
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kStructural) throw;
    Fail(ErrorKind::kIngestion, "malformed " + what + ": " + e.what());
  }
}

}  // namespace

NoiseReference MakeNoiseReference(const NoisyCoefficients& noise, std::string file) {
  return {std::move(file), noise.budget().epsilon, noise.seed(), noise.stream_position()};
}

std::string AutoencoderToJsonText(const AutoencoderFile& file) {
  json doc;
  doc["format"] = "dpc-autoencoder";
  doc["version"] = 1;
  doc["tied_weights"] = file.model.tied_weights;
  doc["encoder"] = NetToJson(file.model.encoder);
  doc["decoder"] = NetToJson(file.model.decoder);
  doc["noise"] = {{"file", file.noise.file},
                  {"epsilon", EpsilonToJson(file.noise.epsilon)},
                  {"seed", file.noise.seed},
                  {"stream_position", file.noise.stream_position}};
  return doc.dump(1) + "\n";
}

AutoencoderFile AutoencoderFromJsonText(const std::string& text) {
  return ParseOrFail("autoencoder file", [&] {
    const json doc = json::parse(text);
    Require(doc.at("format") == "dpc-autoencoder", ErrorKind::kIngestion,
            "not an autoencoder model file");
    AutoencoderFile f;
    f.model.tied_weights = doc.at("tied_weights").get<bool>();
    f.model.encoder = NetFromJson(doc.at("encoder"));
    f.model.decoder = NetFromJson(doc.at("decoder"));
    Require(f.model.decoder.input_dim == f.model.encoder.output_dim() &&
                f.model.decoder.output_dim() == f.model.encoder.input_dim,
            ErrorKind::kStructural, "encoder and decoder do not compose");
    const json& n = doc.at("noise");
    f.noise.file = n.at("file").get<std::string>();
    f.noise.epsilon = EpsilonFromJson(n.at("epsilon"));
    f.noise.seed = n.at("seed").get<std::uint64_t>();
    f.noise.stream_position = n.at("stream_position").get<std::uint64_t>();
    return f;
  });
}

std::string ClassifierToJsonText(const ClassifierFile& file) {
  json doc;
  doc["format"] = "dpc-classifier";
  doc["version"] = 1;
  doc["spec"] = {{"hidden_widths", file.spec.hidden_widths},
                 {"activation", ActivationName(file.spec.activation)}};
  doc["net"] = NetToJson(file.net);
  return doc.dump(1) + "\n";
}

ClassifierFile ClassifierFromJsonText(const std::string& text) {
  return ParseOrFail("classifier file", [&] {
    const json doc = json::parse(text);
    Require(doc.at("format") == "dpc-classifier", ErrorKind::kIngestion,
            "not a classifier model file");
    ClassifierFile f;
    f.spec.hidden_widths = doc.at("spec").at("hidden_widths").get<std::vector<std::size_t>>();
    f.spec.activation =
        ParseActivation(doc.at("spec").at("activation").get<std::string>());
    f.net = NetFromJson(doc.at("net"));
    Require(!f.net.layers.empty() && f.net.layers.back().activation == Activation::kSoftmax,
            ErrorKind::kStructural, "classifier must end in a softmax layer");
    return f;
  });
}

std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(static_cast<bool>(in), ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteTextFile(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  out.flush();
  Require(static_cast<bool>(out), ErrorKind::kIo, "write failed for " + path.string());
}

}  // namespace dpc
