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

#include "dpc/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "dpc/error.hpp"

namespace dpc {

// ---------------------------------------------------------------------------
// Training

namespace {

// Folds decoder gradients of a tied autoencoder into the mirrored encoder
// layers; the decoder is re-derived from the encoder after each step.
void FoldTiedGradients(const Autoencoder& ae, LossAndGradient& lg) {
  const auto enc = ParametricLayers(ae.encoder);
  const auto dec = ParametricLayers(ae.decoder);
  for (std::size_t j = 0; j < dec.size(); ++j) {
    Matrix& ge = lg.encoder.layers[enc[enc.size() - 1 - j]].weights;
    Matrix& gd = lg.decoder.layers[dec[j]].weights;
    for (std::size_t r = 0; r < ge.rows(); ++r) {
      for (std::size_t c = 0; c < ge.cols(); ++c) ge(r, c) += gd(c, r);
    }
    std::fill(gd.data().begin(), gd.data().end(), 0.0);
  }
}

}  // namespace

std::vector<double> FitAutoencoder(Autoencoder& ae, const Matrix& data,
                                   const NoisyCoefficients* noise,
                                   const AutoencoderTrainOptions& options,
                                   Rng& shuffle_rng) {
  Require(options.batch_size > 0, ErrorKind::kParameter, "batch_size must be positive");
  Require(data.rows() > 0, ErrorKind::kParameter, "cannot train on an empty dataset");
  const std::size_t n = data.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  AdamState enc_state;
  AdamState dec_state;
  std::vector<double> epoch_loss;
  epoch_loss.reserve(options.epochs);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    shuffle_rng.Shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += options.batch_size) {
      const std::size_t end = std::min(n, start + options.batch_size);
      const Matrix batch = data.SelectRows(
          std::span<const std::size_t>(order.data() + start, end - start));
      LossAndGradient lg;
      try {
        lg = noise ? PerturbedLoss(ae, batch, *noise,
                                   static_cast<double>(end - start) /
                                       static_cast<double>(n))
                   : PlainLoss(ae, batch);
        if (ae.tied_weights) FoldTiedGradients(ae, lg);
        AdamStep(ae.encoder, lg.encoder, enc_state, options.adam);
        if (!ae.tied_weights) AdamStep(ae.decoder, lg.decoder, dec_state, options.adam);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kNumeric) throw;
        Fail(ErrorKind::kTraining, "autoencoder training diverged at epoch " +
                                       std::to_string(epoch) + ": " + e.what());
      }
      if (ae.tied_weights) SyncTiedDecoder(ae);
      total += lg.loss;
    }
    epoch_loss.push_back(total);
  }
  return epoch_loss;
}

TrainedAutoencoder TrainAutoencoder(const AutoencoderSpec& spec, const Dataset& train,
                                    double epsilon,
                                    const AutoencoderTrainOptions& options,
                                    const Rng& rng, const Dataset* holdout) {
  Require(train.size() > 0, ErrorKind::kParameter, "training set is empty");
  Rng init_rng = rng.Substream("init");
  Rng noise_rng = rng.Substream("noise");
  Rng shuffle_rng = rng.Substream("shuffle");

  Autoencoder ae = MakeAutoencoder(spec, train.dim(), init_rng);
  const std::size_t k = ae.width_k();
  const PrivacyBudget budget = PrivacyBudget::ForWidth(epsilon, k);
  const CoefficientGroups groups = AggregateCoefficients(train.features, k);
  NoisyCoefficients noise = Perturb(groups, budget, noise_rng);

  TrainedAutoencoder out{std::move(ae), std::move(noise), {}, {}};
  out.epoch_loss = FitAutoencoder(out.model, train.features,
                                  budget.is_private() ? &out.noise : nullptr, options,
                                  shuffle_rng);
  if (holdout != nullptr && holdout->size() > 0) {
    out.holdout_mse = ReconstructionMse(out.model, holdout->features);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prototypes

const Prototype* PrototypeSet::Find(int class_id) const {
  for (const auto& p : prototypes) {
    if (p.class_id == class_id) return &p;
  }
  return nullptr;
}

std::string PrototypeSet::ToJsonText() const {
  nlohmann::json doc;
  doc["format"] = "dpc-prototypes";
  doc["version"] = 1;
  doc["prototypes"] = nlohmann::json::array();
  for (const auto& p : prototypes) {
    doc["prototypes"].push_back(
        {{"class_id", p.class_id}, {"member_count", p.member_count}, {"vector", p.vector}});
  }
  doc["missing_classes"] = missing_classes;
  return doc.dump(1);
}

PrototypeSet PrototypeSet::FromJsonText(const std::string& text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    Require(doc.at("format") == "dpc-prototypes", ErrorKind::kIngestion,
            "not a prototype file");
    PrototypeSet set;
    for (const auto& p : doc.at("prototypes")) {
      set.prototypes.push_back({p.at("class_id").get<int>(), p.at("vector").get<Vector>(),
                                p.at("member_count").get<std::size_t>()});
    }
    set.missing_classes = doc.at("missing_classes").get<std::vector<int>>();
    return set;
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kIngestion, std::string("malformed prototype file: ") + e.what());
  }
}

PrototypeSet BuildPrototypes(const Autoencoder& ae, const Dataset& dataset) {
  Require(dataset.dim() == ae.input_dim(), ErrorKind::kStructural,
          "dataset width does not match the autoencoder input");
  const Matrix codes = EncodeBatch(ae, dataset.features);
  const std::size_t latent = ae.latent_dim();
  PrototypeSet set;
  for (int c = 0; c < dataset.class_count; ++c) {
    Prototype p{c, Vector(latent, 0.0), 0};
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (dataset.labels[i] != c) continue;
      auto r = codes.row(i);
      for (std::size_t j = 0; j < latent; ++j) p.vector[j] += r[j];
      ++p.member_count;
    }
    if (p.member_count == 0) {
      set.missing_classes.push_back(c);
      continue;
    }
    for (double& v : p.vector) v /= static_cast<double>(p.member_count);
    set.prototypes.push_back(std::move(p));
  }
  return set;
}

// ---------------------------------------------------------------------------
// Counterfactual search

void SearchConfig::Validate() const {
  Require(alpha >= 0.0 && beta >= 0.0 && gamma >= 0.0, ErrorKind::kParameter,
          "alpha, beta and gamma must be non-negative");
  Require(alpha > 0.0 || beta > 0.0 || gamma > 0.0, ErrorKind::kParameter,
          "at least one of alpha, beta, gamma must be positive");
  Require(iterations > 0, ErrorKind::kParameter, "iterations must be positive");
  Require(step_size > 0.0, ErrorKind::kParameter, "step size must be positive");
  Require(init_jitter >= 0.0, ErrorKind::kParameter, "init_jitter must be non-negative");
}

SearchConfig SearchConfig::Preset(std::string_view name) {
  SearchConfig c;
  if (name == "mixed") {
    c.alpha = 1.0, c.beta = 0.5, c.gamma = 0.1;
  } else if (name == "image") {
    c.alpha = 1.0, c.beta = 0.2, c.gamma = 20.0;
  } else if (name == "binary") {
    c.alpha = 1.0, c.beta = 0.5, c.gamma = 10.0;
  } else {
    Fail(ErrorKind::kParameter, "unknown search preset '" + std::string(name) + "'");
  }
  return c;
}

int ArgMax(std::span<const double> v) {
  Require(!v.empty(), ErrorKind::kParameter, "argmax of an empty vector");
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

SearchLoss EvaluateSearchLoss(std::span<const double> prototype,
                              std::span<const double> delta,
                              std::span<const double> query,
                              const DenseNet& target_model, const Autoencoder& ae,
                              const SearchConfig& config) {
  const std::size_t latent = prototype.size();
  Require(delta.size() == latent && latent == ae.latent_dim(), ErrorKind::kStructural,
          "prototype / delta width does not match the latent space");
  Require(query.size() == ae.input_dim(), ErrorKind::kStructural,
          "query width does not match the autoencoder input");
  Require(config.target_class >= 0 &&
              static_cast<std::size_t>(config.target_class) < target_model.output_dim(),
          ErrorKind::kParameter, "target class out of range for the model");

  Vector z(latent);
  for (std::size_t j = 0; j < latent; ++j) z[j] = prototype[j] + delta[j];
  const Activations dec = Forward(ae.decoder, z);
  const Vector& x = dec.output();
  const Activations cls = Forward(target_model, x);
  const Vector& p = cls.output();

  SearchLoss out;
  const auto t = static_cast<std::size_t>(config.target_class);
  out.prediction = -std::log(std::max(p[t], 1e-300));
  Vector diff(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) diff[j] = x[j] - query[j];
  out.distance = Norm2(diff);
  out.prototype = Norm2(delta);
  out.total = config.alpha * out.prediction + config.beta * out.distance +
              config.gamma * out.prototype;
  if (!std::isfinite(out.total)) {
    Fail(ErrorKind::kNumeric, "counterfactual search loss is not finite");
  }

  Vector dx(x.size(), 0.0);
  if (config.alpha > 0.0) {
    Vector dlogits(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) {
      dlogits[j] = config.alpha * (p[j] - (j == t ? 1.0 : 0.0));
    }
    dx = BackwardFromPreActivation(target_model, cls, dlogits).input;
  }
  if (config.beta > 0.0 && out.distance > 0.0) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      dx[j] += config.beta * diff[j] / out.distance;
    }
  }
  out.gradient = Backward(ae.decoder, dec, dx).input;
  if (config.gamma > 0.0 && out.prototype > 0.0) {
    for (std::size_t j = 0; j < latent; ++j) {
      out.gradient[j] += config.gamma * delta[j] / out.prototype;
    }
  }
  return out;
}

CounterfactualResult SearchCounterfactual(const PrototypeSet& prototypes,
                                          std::span<const double> query,
                                          const DenseNet& target_model,
                                          const Autoencoder& ae,
                                          const SearchConfig& config, Rng& rng) {
  config.Validate();
  const Prototype* proto = prototypes.Find(config.target_class);
  Require(proto != nullptr, ErrorKind::kParameter,
          "no prototype for target class " + std::to_string(config.target_class));
  const std::size_t latent = proto->vector.size();

  Vector delta(latent, 0.0);
  if (config.init_jitter > 0.0) {
    for (double& v : delta) v = config.init_jitter * rng.Normal();
  }

  CounterfactualResult result;
  result.target_class = config.target_class;
  result.origin_loss =
      EvaluateSearchLoss(proto->vector, Vector(latent, 0.0), query, target_model, ae, config)
          .total;
  result.loss_trace.reserve(config.iterations + 1);
  result.best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it <= config.iterations; ++it) {
    const SearchLoss loss =
        EvaluateSearchLoss(proto->vector, delta, query, target_model, ae, config);
    result.loss_trace.push_back(loss.total);
    if (loss.total < result.best_loss) {
      result.best_loss = loss.total;
      result.best_iteration = it;
      result.delta = delta;
    }
    if (it == config.iterations) break;
    for (std::size_t j = 0; j < latent; ++j) delta[j] -= config.step_size * loss.gradient[j];
  }
  result.non_convergence = result.best_loss > result.origin_loss;

  Vector z(latent);
  for (std::size_t j = 0; j < latent; ++j) z[j] = proto->vector[j] + result.delta[j];
  result.sample = Decode(ae, z);
  result.predicted_class = ArgMax(Predict(target_model, result.sample));
  result.flipped = result.predicted_class == result.target_class;
  return result;
}

CounterfactualResult BaselineCounterfactual(std::span<const double> query,
                                            const DenseNet& target_model,
                                            int target_class, std::size_t steps,
                                            double step_size) {
  Require(query.size() == target_model.input_dim, ErrorKind::kStructural,
          "query width does not match the model input");
  Require(target_class >= 0 &&
              static_cast<std::size_t>(target_class) < target_model.output_dim(),
          ErrorKind::kParameter, "target class out of range for the model");
  Require(step_size > 0.0, ErrorKind::kParameter, "step size must be positive");
  const auto t = static_cast<std::size_t>(target_class);

  CounterfactualResult result;
  result.target_class = target_class;
  Vector x(query.begin(), query.end());
  for (std::size_t it = 0;; ++it) {
    const Activations acts = Forward(target_model, x);
    const Vector& p = acts.output();
    const double loss = -std::log(std::max(p[t], 1e-300));
    if (!std::isfinite(loss)) Fail(ErrorKind::kNumeric, "baseline loss is not finite");
    result.loss_trace.push_back(loss);
    if (ArgMax(p) == target_class || it == steps) break;
    Vector dlogits(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) dlogits[j] = p[j] - (j == t ? 1.0 : 0.0);
    const Vector g = BackwardFromPreActivation(target_model, acts, dlogits).input;
    const double norm = Norm2(g);
    if (!(norm > 0.0)) break;
    for (std::size_t j = 0; j < x.size(); ++j) {
      x[j] = std::clamp(x[j] - step_size * g[j] / norm, -1.0, 1.0);
    }
  }
  result.best_iteration = result.loss_trace.size() - 1;
  result.best_loss = result.loss_trace.back();
  result.origin_loss = result.loss_trace.front();
  result.delta.resize(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) result.delta[j] = x[j] - query[j];
  result.sample = std::move(x);
  result.predicted_class = ArgMax(Predict(target_model, result.sample));
  result.flipped = result.predicted_class == target_class;
  return result;
}

// ---------------------------------------------------------------------------
// Unbiasedness probe

namespace {

// 60 fixed steps of gradient descent on
//   0.5 * ||rho + delta - t||^2 + 0.25 * ||delta||^2
// from delta = 0; returns rho + delta. Affine in rho.
Vector ToySearch(std::span<const double> rho, std::span<const double> target) {
  constexpr double kStep = 0.1;
  constexpr double kRegulariser = 0.5;
  Vector delta(rho.size(), 0.0);
  for (int it = 0; it < 60; ++it) {
    for (std::size_t j = 0; j < rho.size(); ++j) {
      const double g = (rho[j] + delta[j] - target[j]) + kRegulariser * delta[j];
      delta[j] -= kStep * g;
    }
  }
  Vector out(rho.size());
  for (std::size_t j = 0; j < rho.size(); ++j) out[j] = rho[j] + delta[j];
  return out;
}

}  // namespace

UnbiasednessResult UnbiasednessProbe(std::size_t toy_dim, double noise_scale,
                                     std::size_t trials, Rng& rng) {
  Require(toy_dim > 0, ErrorKind::kParameter, "toy_dim must be positive");
  Require(noise_scale >= 0.0, ErrorKind::kParameter, "noise_scale must be non-negative");
  Require(trials >= 10000, ErrorKind::kParameter, "need at least 10^4 trials");
  Vector rho(toy_dim);
  Vector target(toy_dim);
  for (std::size_t j = 0; j < toy_dim; ++j) {
    rho[j] = 0.1 * static_cast<double>(j + 1);
    target[j] = -0.3 + 0.05 * static_cast<double>(j);
  }
  const Vector clean = ToySearch(rho, target);

  Vector sum(toy_dim, 0.0);
  Vector sum_sq(toy_dim, 0.0);
  Vector noisy(toy_dim);
  for (std::size_t t = 0; t < trials; ++t) {
    if (noise_scale > 0.0) {
      const Vector eta = SampleLaplace(rng, noise_scale, toy_dim);
      for (std::size_t j = 0; j < toy_dim; ++j) noisy[j] = rho[j] + eta[j];
    } else {
      noisy = rho;
    }
    const Vector out = ToySearch(noisy, target);
    for (std::size_t j = 0; j < toy_dim; ++j) {
      const double diff = out[j] - clean[j];
      sum[j] += diff;
      sum_sq[j] += diff * diff;
    }
  }
  UnbiasednessResult r;
  const double n = static_cast<double>(trials);
  r.mean_deviation.resize(toy_dim);
  r.standard_error.resize(toy_dim);
  for (std::size_t j = 0; j < toy_dim; ++j) {
    const double mean = sum[j] / n;
    const double var = std::max(0.0, (sum_sq[j] - n * mean * mean) / (n - 1.0));
    r.mean_deviation[j] = mean;
    r.standard_error[j] = std::sqrt(var / n);
    r.deviation = std::max(r.deviation, std::abs(mean));
    if (r.standard_error[j] > 0.0) {
      r.max_z = std::max(r.max_z, std::abs(mean) / r.standard_error[j]);
    }
  }
  return r;
}

}  // namespace dpc
