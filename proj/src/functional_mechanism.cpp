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

#include "dpc/functional_mechanism.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "dpc/error.hpp"

namespace dpc {

double SensitivityBound(std::size_t width_k) {
  Require(width_k >= 1, ErrorKind::kParameter, "K must be at least 1");
  return 4.0 * (static_cast<double>(width_k) + 1.0);
}

PrivacyBudget PrivacyBudget::ForWidth(double epsilon, std::size_t width_k) {
  Require(epsilon > 0.0 && !std::isnan(epsilon), ErrorKind::kParameter,
          "epsilon must be positive");
  PrivacyBudget b;
  b.epsilon = epsilon;
  b.width_k = width_k;
  b.sensitivity = SensitivityBound(width_k);
  b.noise_scale = std::isinf(epsilon) ? 0.0 : b.sensitivity / epsilon;
  return b;
}

Vector BasisG(std::span<const double> x, std::span<const double> w) {
  const double s = Sigmoid(Dot(w, x));
  Vector g(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) g[j] = Sigmoid(s * w[j]);
  return g;
}

std::size_t PairCount(std::size_t width_k) { return width_k * (width_k + 1) / 2; }

std::size_t PairIndex(std::size_t p, std::size_t q, std::size_t width_k) {
  if (p > q) std::swap(p, q);
  Require(q < width_k, ErrorKind::kParameter, "pair index out of range");
  // Rows 0..p-1 of the upper triangle hold K, K-1, ..., K-p+1 entries.
  return p * width_k - p * (p - 1) / 2 + (q - p);
}

CoefficientGroups AggregateCoefficients(const Matrix& features, std::size_t width_k) {
  Require(features.rows() > 0, ErrorKind::kParameter,
          "cannot aggregate coefficients of an empty dataset");
  Require(width_k >= 1, ErrorKind::kParameter, "K must be at least 1");
  const std::size_t d = features.cols();
  CoefficientGroups g;
  g.sample_count = features.rows();
  Vector column_sum(d, 0.0);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    auto r = features.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      g.c0 += r[j] * r[j];
      column_sum[j] += r[j];
    }
  }
  g.c1 = Matrix(width_k, d);
  for (std::size_t p = 0; p < width_k; ++p) {
    for (std::size_t j = 0; j < d; ++j) g.c1(p, j) = -2.0 * column_sum[j];
  }
  g.c2.assign(PairCount(width_k), static_cast<double>(features.rows()));
  return g;
}

double CoefficientL1Distance(const CoefficientGroups& a, const CoefficientGroups& b) {
  Require(a.c1.rows() == b.c1.rows() && a.c1.cols() == b.c1.cols() &&
              a.c2.size() == b.c2.size(),
          ErrorKind::kStructural, "coefficient groups differ in shape");
  double s = std::abs(a.c0 - b.c0);
  for (std::size_t i = 0; i < a.c1.data().size(); ++i) {
    s += std::abs(a.c1.data()[i] - b.c1.data()[i]);
  }
  for (std::size_t i = 0; i < a.c2.size(); ++i) s += std::abs(a.c2[i] - b.c2[i]);
  return s;
}

double RecordCoefficientL1(std::span<const double> x, std::size_t width_k) {
  double sq = 0.0;
  double l1 = 0.0;
  for (double v : x) {
    sq += v * v;
    l1 += std::abs(v);
  }
  return sq + static_cast<double>(width_k) * 2.0 * l1 +
         static_cast<double>(PairCount(width_k));
}

// ---------------------------------------------------------------------------
// NoisyCoefficients

NoisyCoefficients NoisyCoefficients::FromDraws(double eta0, Matrix eta1, Vector eta2,
                                               PrivacyBudget budget,
                                               std::uint64_t seed,
                                               std::uint64_t stream_position) {
  Require(eta2.size() == PairCount(eta1.rows()), ErrorKind::kStructural,
          "eta2 must hold K (K + 1) / 2 draws");
  NoisyCoefficients n;
  n.eta0_ = eta0;
  n.eta1_ = std::move(eta1);
  n.eta2_ = std::move(eta2);
  n.budget_ = budget;
  n.seed_ = seed;
  n.stream_position_ = stream_position;
  return n;
}

NoisyCoefficients NoisyCoefficients::Zero(std::size_t width_k, std::size_t input_dim) {
  PrivacyBudget b = PrivacyBudget::ForWidth(std::numeric_limits<double>::infinity(),
                                            width_k);
  return FromDraws(0.0, Matrix(width_k, input_dim), Vector(PairCount(width_k), 0.0),
                   b, 0, 0);
}

bool NoisyCoefficients::all_zero() const {
  if (eta0_ != 0.0) return false;
  for (double v : eta1_.data()) {
    if (v != 0.0) return false;
  }
  for (double v : eta2_) {
    if (v != 0.0) return false;
  }
  return true;
}

std::string NoisyCoefficients::ToJsonText() const {
  nlohmann::json doc;
  doc["epsilon"] = std::isinf(budget_.epsilon) ? nlohmann::json() : nlohmann::json(budget_.epsilon);
  doc["sensitivity"] = budget_.sensitivity;
  doc["noise_scale"] = budget_.noise_scale;
  doc["width_k"] = width_k();
  doc["input_dim"] = input_dim();
  doc["seed"] = seed_;
  doc["stream_position"] = stream_position_;
  doc["eta0"] = eta0_;
  doc["eta1"] = eta1_.data();
  doc["eta2"] = eta2_;
  return doc.dump(1);
}

NoisyCoefficients NoisyCoefficients::FromJsonText(const std::string& text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    const auto k = doc.at("width_k").get<std::size_t>();
    const auto d = doc.at("input_dim").get<std::size_t>();
    PrivacyBudget b;
    b.epsilon = doc.at("epsilon").is_null() ? std::numeric_limits<double>::infinity()
                                            : doc.at("epsilon").get<double>();
    b.width_k = k;
    b.sensitivity = doc.at("sensitivity").get<double>();
    b.noise_scale = doc.at("noise_scale").get<double>();
    Matrix eta1(k, d);
    eta1.data() = doc.at("eta1").get<std::vector<double>>();
    Require(eta1.data().size() == k * d, ErrorKind::kIngestion,
            "noise record: eta1 has the wrong length");
    return FromDraws(doc.at("eta0").get<double>(), std::move(eta1),
                     doc.at("eta2").get<std::vector<double>>(), b,
                     doc.at("seed").get<std::uint64_t>(),
                     doc.at("stream_position").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kIngestion, std::string("malformed noise record: ") + e.what());
  }
}

NoisyCoefficients Perturb(const CoefficientGroups& groups,
                          const PrivacyBudget& budget, Rng& rng) {
  const std::size_t k = groups.width_k();
  const std::size_t d = groups.input_dim();
  Require(budget.width_k == k, ErrorKind::kParameter,
          "budget K does not match the coefficient groups");
  const std::uint64_t position = rng.position();
  if (!budget.is_private()) {
    return NoisyCoefficients::FromDraws(0.0, Matrix(k, d), Vector(PairCount(k), 0.0),
                                        budget, rng.seed(), position);
  }
  const Vector draws = SampleLaplace(rng, budget.noise_scale, 1 + k * d + PairCount(k));
  Matrix eta1(k, d);
  std::copy_n(draws.begin() + 1, k * d, eta1.data().begin());
  Vector eta2(draws.begin() + 1 + static_cast<std::ptrdiff_t>(k * d), draws.end());
  return NoisyCoefficients::FromDraws(draws[0], std::move(eta1), std::move(eta2),
                                      budget, rng.seed(), position);
}

// ---------------------------------------------------------------------------
// Losses

NoiseTermValue EvaluateNoiseTerm(const Matrix& w, const NoisyCoefficients& noisy) {
  const std::size_t units = w.rows();
  const std::size_t d = w.cols();
  const std::size_t k = noisy.width_k();
  Require(units <= k, ErrorKind::kStructural,
          "first encoder layer has " + std::to_string(units) +
              " units but the noise record covers K = " + std::to_string(k));
  Require(d == noisy.input_dim(), ErrorKind::kStructural,
          "noise record input dimension does not match the encoder");

  // g(0, w_p) = sigmoid(0.5 * w_p).
  Matrix g(units, d);
  for (std::size_t i = 0; i < g.data().size(); ++i) g.data()[i] = Sigmoid(0.5 * w.data()[i]);

  NoiseTermValue out;
  out.value = noisy.eta0();
  Matrix dg(units, d);  // d eta / d g
  for (std::size_t p = 0; p < units; ++p) {
    for (std::size_t j = 0; j < d; ++j) {
      out.value += noisy.eta1()(p, j) * g(p, j);
      dg(p, j) = noisy.eta1()(p, j);
    }
  }
  for (std::size_t p = 0; p < units; ++p) {
    for (std::size_t q = p; q < units; ++q) {
      const double eta = noisy.eta2()[PairIndex(p, q, k)];
      const double inner = Dot(g.row(p), g.row(q));
      out.value += eta * inner;
      for (std::size_t j = 0; j < d; ++j) {
        dg(p, j) += eta * g(q, j);
        dg(q, j) += eta * g(p, j);
      }
    }
  }
  out.gradient = Matrix(units, d);
  for (std::size_t i = 0; i < g.data().size(); ++i) {
    const double gi = g.data()[i];
    out.gradient.data()[i] = dg.data()[i] * 0.5 * gi * (1.0 - gi);
  }
  if (!std::isfinite(out.value)) {
    Fail(ErrorKind::kNumeric, "noise coupling term is not finite");
  }
  return out;
}

LossAndGradient PlainLoss(const Autoencoder& ae, const Matrix& batch) {
  const BatchActivations enc = ForwardBatch(ae.encoder, batch);
  const BatchActivations dec = ForwardBatch(ae.decoder, enc.output());
  const Matrix& recon = dec.output();
  Matrix upstream(batch.rows(), batch.cols());
  LossAndGradient out;
  for (std::size_t i = 0; i < batch.data().size(); ++i) {
    const double r = recon.data()[i] - batch.data()[i];
    out.data_loss += r * r;
    upstream.data()[i] = 2.0 * r;
  }
  if (!std::isfinite(out.data_loss)) {
    Fail(ErrorKind::kNumeric, "reconstruction loss is not finite");
  }
  out.loss = out.data_loss;
  out.decoder = BackwardBatch(ae.decoder, dec, upstream, /*want_input=*/true);
  Matrix latent_grad(batch.rows(), ae.latent_dim());
  latent_grad.data() = std::move(out.decoder.input);
  out.decoder.input.clear();
  out.encoder = BackwardBatch(ae.encoder, enc, latent_grad);
  return out;
}

LossAndGradient PerturbedLoss(const Autoencoder& ae, const Matrix& batch,
                              const NoisyCoefficients& noisy, double batch_fraction) {
  LossAndGradient out = PlainLoss(ae, batch);
  const NoiseTermValue eta = EvaluateNoiseTerm(ae.first_layer_weights(), noisy);
  out.noise_term = batch_fraction * eta.value;
  out.loss = out.data_loss + out.noise_term;
  if (!std::isfinite(out.loss)) {
    Fail(ErrorKind::kNumeric, "perturbed loss is not finite");
  }
  auto& gw = out.encoder.layers.front().weights.data();
  for (std::size_t i = 0; i < gw.size(); ++i) {
    gw[i] += batch_fraction * eta.gradient.data()[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Empirical privacy ratio

PrivacyRatioResult EmpiricalPrivacyRatio(const Matrix& a, const Matrix& b,
                                         const PrivacyBudget& budget,
                                         std::size_t trials, std::size_t bins,
                                         Rng& rng) {
  Require(a.rows() == b.rows() && a.cols() == b.cols() && a.rows() > 0,
          ErrorKind::kParameter, "neighbour datasets must have the same shape");
  std::size_t differing = 0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    if (!std::equal(a.row(i).begin(), a.row(i).end(), b.row(i).begin())) ++differing;
  }
  Require(differing <= 1, ErrorKind::kParameter,
          "datasets differ in " + std::to_string(differing) +
              " rows; neighbours differ in at most one");
  Require(trials >= 10000, ErrorKind::kParameter, "need at least 10^4 trials");
  Require(bins >= 2, ErrorKind::kParameter, "need at least two bins");
  Require(budget.is_private(), ErrorKind::kParameter, "budget must be private");

  const double c0a = AggregateCoefficients(a, 1).c0;
  const double c0b = AggregateCoefficients(b, 1).c0;
  const double scale = budget.noise_scale;
  const double lo = std::min(c0a, c0b) - 3.0 * scale;
  const double hi = std::max(c0a, c0b) + 3.0 * scale;
  const double width = (hi - lo) / static_cast<double>(bins);

  auto histogram = [&](double centre) {
    std::vector<std::size_t> counts(bins, 0);
    const Vector noise = SampleLaplace(rng, scale, trials);
    for (double n : noise) {
      const double v = centre + n;
      if (v < lo || v >= hi) continue;
      const auto bin = std::min(bins - 1, static_cast<std::size_t>((v - lo) / width));
      ++counts[bin];
    }
    return counts;
  };
  const auto ha = histogram(c0a);
  const auto hb = histogram(c0b);

  PrivacyRatioResult result;
  for (std::size_t i = 0; i < bins; ++i) {
    if (ha[i] < 50 || hb[i] < 50) continue;
    const double pa = static_cast<double>(ha[i]);
    const double pb = static_cast<double>(hb[i]);
    result.max_ratio = std::max(result.max_ratio, std::max(pa / pb, pb / pa));
    ++result.bins_compared;
  }
  Require(result.bins_compared > 0, ErrorKind::kParameter,
          "no histogram bin reached 50 counts; increase trials");
  return result;
}

}  // namespace dpc
