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

#include <cmath>
#include <limits>
#include <type_traits>
#include <vector>

#include <gtest/gtest.h>

#include "dpc/autoencoder.hpp"
#include "dpc/classifier.hpp"
#include "dpc/core.hpp"
#include "dpc/error.hpp"
#include "test_util.hpp"

namespace dpc {
namespace {

using testing::CentralDifference;
using testing::Gen;
using testing::RelativeError;

constexpr double kInf = std::numeric_limits<double>::infinity();

// The search entry point must be callable from released artifacts alone.
static_assert(
    std::is_same_v<decltype(&SearchCounterfactual),
                   CounterfactualResult (*)(const PrototypeSet&, std::span<const double>,
                                            const DenseNet&, const Autoencoder&,
                                            const SearchConfig&, Rng&)>);
static_assert(!std::is_invocable_v<decltype(&SearchCounterfactual), const Dataset&,
                                   std::span<const double>, const DenseNet&,
                                   const Autoencoder&, const SearchConfig&, Rng&>);

struct Pipeline {
  Dataset train;
  Dataset holdout;
  Autoencoder ae;
  DenseNet target;
  PrototypeSet prototypes;
};

// Two well separated blobs in d = 4 with a trained autoencoder and target.
const Pipeline& SharedPipeline() {
  static const Pipeline p = [] {
    Pipeline out;
    Rng rng(2026);
    Rng data_rng = rng.Substream("data");
    out.train = SynthBlobs(data_rng, {.n_per_class = 200, .dim = 4, .separation = 1.5});
    out.holdout = SynthBlobs(data_rng, {.n_per_class = 50, .dim = 4, .separation = 1.5});
    out.ae = TrainAutoencoder({.encoder_widths = {4, 2}}, out.train, kInf,
                              {.epochs = 200, .batch_size = 32}, rng.Substream("ae"))
                 .model;
    out.target = TrainClassifier({.hidden_widths = {16}}, out.train,
                                 {.epochs = 60, .batch_size = 32}, rng.Substream("target"));
    out.prototypes = BuildPrototypes(out.ae, out.train);
    return out;
  }();
  return p;
}

TEST(AutoencoderTest, MirroredArchitecture) {
  Rng rng(1);
  const Autoencoder ae = MakeAutoencoder({.encoder_widths = {6, 3, 2}}, 8, rng);
  const auto enc = ParametricLayers(ae.encoder);
  const auto dec = ParametricLayers(ae.decoder);
  ASSERT_EQ(enc.size(), 3u);
  ASSERT_EQ(dec.size(), 3u);
  std::vector<std::size_t> enc_widths;
  for (std::size_t i : enc) enc_widths.push_back(ae.encoder.layers[i].out_dim());
  EXPECT_EQ(enc_widths, (std::vector<std::size_t>{6, 3, 2}));
  std::vector<std::size_t> dec_widths;
  for (std::size_t i : dec) dec_widths.push_back(ae.decoder.layers[i].out_dim());
  EXPECT_EQ(dec_widths, (std::vector<std::size_t>{3, 6, 8}));
  for (const auto* net : {&ae.encoder, &ae.decoder}) {
    for (const auto& layer : net->layers) EXPECT_FALSE(layer.bias.has_value());
  }
  EXPECT_EQ(ae.width_k(), 6u);
  EXPECT_NO_THROW(ae.encoder.Validate());
  EXPECT_NO_THROW(ae.decoder.Validate());
}

TEST(AutoencoderTest, HiddenInputsStayInUnitRange) {
  Rng rng(2);
  Gen gen(2);
  const Autoencoder ae = MakeAutoencoder({.encoder_widths = {5, 3}}, 4, rng);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector x = gen.Vec(4);
    const Activations acts = Forward(ae.encoder, x);
    for (std::size_t l = 0; l < ae.encoder.layers.size(); ++l) {
      if (!ae.encoder.layers[l].has_parameters()) continue;
      for (double v : acts.values[l]) {
        EXPECT_GE(v, -1.0);
        EXPECT_LE(v, 1.0);
      }
    }
    for (double v : Decode(ae, Encode(ae, x))) {
      EXPECT_GT(v, -1.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(AutoencoderTest, TiedDecoderIsTransposedEncoder) {
  Rng rng(3);
  Autoencoder ae = MakeAutoencoder({.encoder_widths = {3}, .tied_weights = true}, 5, rng);
  const Matrix& w = ae.encoder.layers[ParametricLayers(ae.encoder)[0]].weights;
  const Matrix& v = ae.decoder.layers[ParametricLayers(ae.decoder)[0]].weights;
  ASSERT_EQ(v.rows(), w.cols());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    for (std::size_t c = 0; c < w.cols(); ++c) EXPECT_EQ(v(c, r), w(r, c));
  }
}

TEST(TrainAutoencoderTest, ZeroEpochsReturnsInitialisation) {
  Rng data_rng(4);
  const Dataset ds = SynthBlobs(data_rng, {.n_per_class = 20, .dim = 4});
  const Rng rng(5);
  const AutoencoderSpec spec{.encoder_widths = {3}};
  const TrainedAutoencoder t = TrainAutoencoder(spec, ds, 1.0, {.epochs = 0}, rng);
  Rng init = rng.Substream("init");
  EXPECT_EQ(t.model, MakeAutoencoder(spec, 4, init));
  EXPECT_TRUE(t.epoch_loss.empty());
}

TEST(TrainAutoencoderTest, NonPrivateTrainingReconstructsWell) {
  const Pipeline& p = SharedPipeline();
  EXPECT_LE(ReconstructionMse(p.ae, p.holdout.features), 0.05);
}

TEST(TrainAutoencoderTest, NoiseIsDrawnOncePerRun) {
  Rng data_rng(6);
  const Dataset ds = SynthBlobs(data_rng, {.n_per_class = 30, .dim = 4});
  const Rng rng(7);
  const TrainedAutoencoder a = TrainAutoencoder({.encoder_widths = {3}}, ds, 0.5,
                                                {.epochs = 3, .batch_size = 8}, rng);
  EXPECT_EQ(a.noise.draw_count(), 1u + 3 * 4 + 6);
  EXPECT_EQ(a.noise.budget().sensitivity, 16.0);
  Rng noise_rng = rng.Substream("noise");
  const NoisyCoefficients again =
      Perturb(AggregateCoefficients(ds.features, 3), PrivacyBudget::ForWidth(0.5, 3), noise_rng);
  EXPECT_EQ(a.noise, again);
}

TEST(TrainAutoencoderTest, SmallerBudgetDegradesReconstruction) {
  int worse = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    Rng data_rng = rng.Substream("data");
    const Dataset train = SynthBlobs(data_rng, {.n_per_class = 150, .dim = 4});
    const Dataset hold = SynthBlobs(data_rng, {.n_per_class = 50, .dim = 4});
    const AutoencoderTrainOptions options{.epochs = 60, .batch_size = 32};
    const double strict = TrainAutoencoder({.encoder_widths = {4, 2}}, train, 0.01, options,
                                           rng.Substream("ae"), &hold)
                              .holdout_mse;
    const double loose = TrainAutoencoder({.encoder_widths = {4, 2}}, train, 1.0, options,
                                          rng.Substream("ae"), &hold)
                             .holdout_mse;
    worse += strict >= loose;
  }
  EXPECT_GE(worse, 8);
}

TEST(TrainAutoencoderTest, DivergenceReportsEpoch) {
  Rng data_rng(8);
  const Dataset ds = SynthBlobs(data_rng, {.n_per_class = 10, .dim = 3});
  Rng init(9);
  Autoencoder ae = MakeAutoencoder({.encoder_widths = {2}}, 3, init);
  // Enormous draws make the perturbed loss overflow.
  Matrix eta1(2, 3, 1e308);
  const NoisyCoefficients noisy = NoisyCoefficients::FromDraws(
      1e308, eta1, Vector(3, 1e308), PrivacyBudget::ForWidth(1.0, 2), 0, 0);
  Rng shuffle(1);
  try {
    FitAutoencoder(ae, ds.features, &noisy, {.epochs = 2, .batch_size = 4}, shuffle);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kTraining);
    EXPECT_NE(std::string(e.what()).find("epoch 0"), std::string::npos) << e.what();
  }
}

// Independent mean of the encoder outputs per class.
Vector MeanCode(const Autoencoder& ae, const Dataset& ds, int c) {
  Vector sum(ae.latent_dim(), 0.0);
  std::size_t n = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.labels[i] != c) continue;
    const Vector z = Predict(ae.encoder, ds.features.row(i));
    for (std::size_t j = 0; j < z.size(); ++j) sum[j] += z[j];
    ++n;
  }
  for (double& v : sum) v /= static_cast<double>(n);
  return sum;
}

TEST(PrototypeTest, EqualsIndependentMeanOnEverySeed) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const Dataset ds = SynthBlobs(rng, {.n_per_class = 5 + seed, .dim = 3, .class_count = 3,
                                        .separation = 1.0});
    const Autoencoder ae = MakeAutoencoder({.encoder_widths = {3, 2}}, 3, rng);
    const PrototypeSet set = BuildPrototypes(ae, ds);
    ASSERT_EQ(set.prototypes.size(), 3u);
    for (int c = 0; c < 3; ++c) {
      const Prototype* p = set.Find(c);
      ASSERT_NE(p, nullptr);
      EXPECT_EQ(p->member_count, 5 + seed);
      const Vector want = MeanCode(ae, ds, c);
      for (std::size_t j = 0; j < want.size(); ++j) EXPECT_NEAR(p->vector[j], want[j], 1e-9);
    }
  }
}

TEST(PrototypeTest, SingleMemberAndDuplication) {
  Rng rng(3);
  Dataset ds = SynthBlobs(rng, {.n_per_class = 4, .dim = 3});
  const Autoencoder ae = MakeAutoencoder({.encoder_widths = {2}}, 3, rng);
  std::vector<std::size_t> idx = {0, 1, 3, 5, 7};  // class 0 once, class 1 four times
  const Dataset one = ds.Subset(idx);
  const PrototypeSet set = BuildPrototypes(ae, one);
  EXPECT_EQ(set.Find(0)->vector, Encode(ae, one.features.row(0)));

  std::vector<std::size_t> twice;
  for (std::size_t i = 0; i < ds.size(); ++i) twice.insert(twice.end(), {i, i});
  const PrototypeSet a = BuildPrototypes(ae, ds);
  const PrototypeSet b = BuildPrototypes(ae, ds.Subset(twice));
  for (int c = 0; c < 2; ++c) {
    for (std::size_t j = 0; j < 2; ++j) {
      EXPECT_NEAR(a.Find(c)->vector[j], b.Find(c)->vector[j], 1e-15);
    }
  }
}

TEST(PrototypeTest, EmptyClassIsRecordedNotBuilt) {
  Rng rng(4);
  Dataset ds = SynthBlobs(rng, {.n_per_class = 3, .dim = 2, .class_count = 2});
  ds.class_count = 3;
  const Autoencoder ae = MakeAutoencoder({.encoder_widths = {2}}, 2, rng);
  const PrototypeSet set = BuildPrototypes(ae, ds);
  EXPECT_EQ(set.prototypes.size(), 2u);
  EXPECT_EQ(set.missing_classes, (std::vector<int>{2}));
  EXPECT_EQ(set.Find(2), nullptr);
}

TEST(PrototypeTest, JsonRoundTripIsExact) {
  const PrototypeSet& set = SharedPipeline().prototypes;
  EXPECT_EQ(PrototypeSet::FromJsonText(set.ToJsonText()), set);
  EXPECT_THROW(PrototypeSet::FromJsonText("{\"format\":\"x\"}"), Error);
}

TEST(SearchConfigTest, PresetsAndValidation) {
  const SearchConfig mixed = SearchConfig::Preset("mixed");
  EXPECT_EQ(mixed.alpha, 1.0);
  EXPECT_EQ(mixed.beta, 0.5);
  EXPECT_EQ(mixed.gamma, 0.1);
  const SearchConfig image = SearchConfig::Preset("image");
  EXPECT_EQ(image.beta, 0.2);
  EXPECT_EQ(image.gamma, 20.0);
  const SearchConfig binary = SearchConfig::Preset("binary");
  EXPECT_EQ(binary.beta, 0.5);
  EXPECT_EQ(binary.gamma, 10.0);
  EXPECT_EQ(mixed.iterations, 500u);
  EXPECT_EQ(mixed.step_size, 0.05);
  EXPECT_THROW(SearchConfig::Preset("tabular"), Error);
  SearchConfig none{.alpha = 0, .beta = 0, .gamma = 0};
  EXPECT_THROW(none.Validate(), Error);
  SearchConfig negative{.beta = -1};
  EXPECT_THROW(negative.Validate(), Error);
}

TEST(SearchLossTest, GradientMatchesFiniteDifferences) {
  const Pipeline& p = SharedPipeline();
  Gen gen(31);
  for (int probe = 0; probe < 100; ++probe) {
    SearchConfig config{.alpha = gen.Uniform(0.1, 2), .beta = gen.Uniform(0.1, 1),
                        .gamma = gen.Uniform(0.1, 1), .target_class = probe % 2};
    const Vector& rho = p.prototypes.Find(config.target_class)->vector;
    const Vector delta = gen.Vec(2, -0.5, 0.5);
    const Vector query = gen.Vec(4);
    const SearchLoss loss = EvaluateSearchLoss(rho, delta, query, p.target, p.ae, config);
    for (std::size_t j = 0; j < delta.size(); ++j) {
      const auto f = [&](const Vector& d) {
        return EvaluateSearchLoss(rho, d, query, p.target, p.ae, config).total;
      };
      EXPECT_LT(RelativeError(loss.gradient[j], CentralDifference(f, delta, j, 1e-5), 1e-3),
                1e-4)
          << "probe " << probe;
    }
  }
}

TEST(SearchLossTest, ComponentsCombineWithWeights) {
  const Pipeline& p = SharedPipeline();
  const SearchConfig config{.alpha = 2.0, .beta = 0.5, .gamma = 3.0, .target_class = 1};
  const Vector delta = {0.1, -0.2};
  const Vector query = {0.2, 0.3, -0.1, 0.0};
  const SearchLoss l =
      EvaluateSearchLoss(p.prototypes.Find(1)->vector, delta, query, p.target, p.ae, config);
  EXPECT_NEAR(l.prototype, std::sqrt(0.05), 1e-15);
  EXPECT_NEAR(l.total, 2.0 * l.prediction + 0.5 * l.distance + 3.0 * l.prototype, 1e-12);
  Vector z = p.prototypes.Find(1)->vector;
  z[0] += 0.1;
  z[1] -= 0.2;
  const Vector x = Decode(p.ae, z);
  double dist = 0;
  for (std::size_t j = 0; j < 4; ++j) dist += (x[j] - query[j]) * (x[j] - query[j]);
  EXPECT_NEAR(l.distance, std::sqrt(dist), 1e-12);
  EXPECT_NEAR(l.prediction, -std::log(Predict(p.target, x)[1]), 1e-12);
}

TEST(SearchTest, PureRegulariserStaysAtPrototype) {
  const Pipeline& p = SharedPipeline();
  Rng rng(1);
  const SearchConfig config{.alpha = 0, .beta = 0, .gamma = 1.0, .target_class = 1};
  const CounterfactualResult r =
      SearchCounterfactual(p.prototypes, p.holdout.features.row(0), p.target, p.ae, config, rng);
  for (double v : r.delta) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(r.sample, Decode(p.ae, p.prototypes.Find(1)->vector));
}

TEST(SearchTest, DominantRegulariserKeepsDeltaSmall) {
  const Pipeline& p = SharedPipeline();
  Rng rng(1);
  SearchConfig config = SearchConfig::Preset("mixed");
  config.gamma = 1e6;
  config.target_class = 0;
  const CounterfactualResult r =
      SearchCounterfactual(p.prototypes, p.holdout.features.row(1), p.target, p.ae, config, rng);
  EXPECT_LT(Norm2(r.delta), 1e-2);
}

TEST(SearchTest, ResultFieldsAreConsistent) {
  const Pipeline& p = SharedPipeline();
  Rng rng(2);
  for (std::size_t q = 0; q < 20; ++q) {
    SearchConfig config = SearchConfig::Preset("mixed");
    config.iterations = 100;
    config.target_class = 1 - p.holdout.labels[q];
    config.init_jitter = q % 2 ? 0.3 : 0.0;
    const CounterfactualResult r =
        SearchCounterfactual(p.prototypes, p.holdout.features.row(q), p.target, p.ae, config,
                             rng);
    Vector z = p.prototypes.Find(config.target_class)->vector;
    for (std::size_t j = 0; j < z.size(); ++j) z[j] += r.delta[j];
    EXPECT_EQ(r.sample, Decode(p.ae, z));
    EXPECT_EQ(r.flipped, r.predicted_class == r.target_class);
    EXPECT_EQ(r.predicted_class, ArgMax(Predict(p.target, r.sample)));
    ASSERT_EQ(r.loss_trace.size(), 101u);
    EXPECT_EQ(r.best_loss, *std::min_element(r.loss_trace.begin(), r.loss_trace.end()));
    EXPECT_EQ(r.best_loss, r.loss_trace[r.best_iteration]);
    if (config.init_jitter == 0.0) {
      EXPECT_EQ(r.loss_trace[0], r.origin_loss);
      EXPECT_FALSE(r.non_convergence);
    }
    EXPECT_TRUE(r.best_loss <= r.origin_loss || r.non_convergence);
  }
}

TEST(SearchTest, FlipsMostQueriesOfTheOtherClass) {
  const Pipeline& p = SharedPipeline();
  Rng rng(3);
  int flipped = 0;
  int total = 0;
  for (std::size_t q = 0; q < p.holdout.size() && total < 100; ++q) {
    if (p.holdout.labels[q] != 0) continue;
    SearchConfig config = SearchConfig::Preset("mixed");
    config.target_class = 1;
    flipped += SearchCounterfactual(p.prototypes, p.holdout.features.row(q), p.target, p.ae,
                                    config, rng)
                   .flipped;
    ++total;
  }
  ASSERT_GT(total, 0);
  EXPECT_GE(flipped, 0.9 * total) << flipped << "/" << total;
}

TEST(SearchTest, MissingPrototypeIsParameterError) {
  const Pipeline& p = SharedPipeline();
  PrototypeSet only_zero;
  only_zero.prototypes.push_back(*p.prototypes.Find(0));
  Rng rng(1);
  SearchConfig config = SearchConfig::Preset("mixed");
  config.target_class = 1;
  try {
    SearchCounterfactual(only_zero, p.holdout.features.row(0), p.target, p.ae, config, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParameter);
  }
}

TEST(SearchTest, RunsAfterTheDatasetIsGone) {
  PrototypeSet prototypes;
  Autoencoder ae;
  DenseNet target;
  {
    Rng rng(12);
    const Dataset ds = SynthBlobs(rng, {.n_per_class = 50, .dim = 3});
    ae = TrainAutoencoder({.encoder_widths = {3, 2}}, ds, 1.0, {.epochs = 5}, rng).model;
    target = TrainClassifier({.hidden_widths = {8}}, ds, {.epochs = 5}, rng);
    prototypes = BuildPrototypes(ae, ds);
  }
  Rng rng(1);
  SearchConfig config = SearchConfig::Preset("mixed");
  config.iterations = 20;
  const Vector query = {0.1, 0.2, 0.3};
  const CounterfactualResult r = SearchCounterfactual(prototypes, query, target, ae, config, rng);
  EXPECT_EQ(r.sample.size(), 3u);
  EXPECT_EQ(r.loss_trace.size(), 21u);
}

TEST(BaselineTest, ZeroStepsReturnsQuery) {
  const Pipeline& p = SharedPipeline();
  const auto q = p.holdout.features.row(0);
  const CounterfactualResult r =
      BaselineCounterfactual(q, p.target, 1 - p.holdout.labels[0], 0, 0.05);
  EXPECT_EQ(r.sample, Vector(q.begin(), q.end()));
}

TEST(BaselineTest, LinearModelMovesAlongWeightDifference) {
  Matrix w(2, 3);
  w(0, 0) = 0.5; w(0, 1) = -1.0; w(0, 2) = 0.2;
  w(1, 0) = -0.3; w(1, 1) = 0.4; w(1, 2) = 0.9;
  DenseNet net;
  net.input_dim = 3;
  DenseLayer layer;
  layer.weights = w;
  layer.bias = Vector{2.0, 0.0};  // class 0 wins at the origin
  layer.activation = Activation::kSoftmax;
  net.layers.push_back(layer);
  const CounterfactualResult r = BaselineCounterfactual(Vector(3, 0.0), net, 1, 1, 0.01);
  Vector dir = {w(1, 0) - w(0, 0), w(1, 1) - w(0, 1), w(1, 2) - w(0, 2)};
  const double n = Norm2(dir);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(r.delta[j], 0.01 * dir[j] / n, 1e-15);
}

TEST(BaselineTest, FlipsTwoDimensionalTask) {
  Rng rng(13);
  const Dataset ds = SynthBlobs(rng, {.n_per_class = 100, .dim = 2});
  const DenseNet target = TrainClassifier({.hidden_widths = {8}}, ds, {.epochs = 40}, rng);
  int flipped = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int want = 1 - PredictLabel(target, ds.features.row(i));
    flipped += BaselineCounterfactual(ds.features.row(i), target, want, 200, 0.05).flipped;
  }
  EXPECT_GE(flipped, 0.9 * ds.size());
}

TEST(UnbiasednessTest, ZeroNoiseGivesExactlyZero) {
  Rng rng(1);
  const UnbiasednessResult r = UnbiasednessProbe(3, 0.0, 10000, rng);
  EXPECT_EQ(r.deviation, 0.0);
}

TEST(UnbiasednessTest, DeviationWithinThreeStandardErrors) {
  Rng rng(2);
  const UnbiasednessResult r = UnbiasednessProbe(3, 0.5, 100000, rng);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_LE(std::abs(r.mean_deviation[j]), 3.0 * r.standard_error[j]);
  }
  EXPECT_LE(r.max_z, 3.0);
}

TEST(UnbiasednessTest, DoublingTrialsShrinksErrorBySqrtTwo) {
  Rng a(3);
  Rng b(4);
  const UnbiasednessResult small = UnbiasednessProbe(2, 0.5, 50000, a);
  const UnbiasednessResult large = UnbiasednessProbe(2, 0.5, 100000, b);
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_NEAR(small.standard_error[j] / large.standard_error[j], std::sqrt(2.0), 0.05);
  }
}

TEST(UnbiasednessTest, RejectsTooFewTrials) {
  Rng rng(1);
  EXPECT_THROW(UnbiasednessProbe(3, 0.5, 100, rng), Error);
}

}  // namespace
}  // namespace dpc
