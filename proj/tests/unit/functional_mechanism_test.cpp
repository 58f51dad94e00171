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
#include <vector>

#include <gtest/gtest.h>

#include "dpc/autoencoder.hpp"
#include "dpc/core.hpp"
#include "dpc/error.hpp"
#include "dpc/functional_mechanism.hpp"
#include "test_util.hpp"

namespace dpc {
namespace {

using testing::CentralDifference;
using testing::Gen;
using testing::RelativeError;

double Sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

TEST(BasisTest, ZeroInput) {
  const Vector w = {0.4, -2.0, 1.0};
  const Vector g = BasisG(Vector{0, 0, 0}, w);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(g[j], Sig(0.5 * w[j]));
}

TEST(BasisTest, ZeroWeights) {
  for (double v : BasisG(Vector{0.3, 0.9}, Vector{0, 0})) EXPECT_EQ(v, 0.5);
}

TEST(BasisTest, ScalarOracle) {
  Rng rng(7);
  Vector x(6);
  Vector w(6);
  for (double& v : x) v = rng.Uniform(-1, 1);
  for (double& v : w) v = rng.Uniform(-2, 2);
  double dot = 0;
  for (std::size_t j = 0; j < 6; ++j) dot += w[j] * x[j];
  const Vector g = BasisG(x, w);
  for (std::size_t j = 0; j < 6; ++j) {
    EXPECT_NEAR(g[j], 1.0 / (1.0 + std::exp(-Sig(dot) * w[j])), 1e-15);
  }
}

TEST(SensitivityTest, ClosedForm) {
  EXPECT_EQ(SensitivityBound(16), 68.0);
  EXPECT_EQ(SensitivityBound(1), 8.0);
  EXPECT_THROW(SensitivityBound(0), Error);
}

TEST(BudgetTest, ScaleIsSensitivityOverEpsilon) {
  const PrivacyBudget b = PrivacyBudget::ForWidth(0.5, 3);
  EXPECT_EQ(b.sensitivity, 16.0);
  EXPECT_EQ(b.noise_scale, 16.0 / 0.5);
  EXPECT_TRUE(b.is_private());
  const PrivacyBudget inf =
      PrivacyBudget::ForWidth(std::numeric_limits<double>::infinity(), 3);
  EXPECT_EQ(inf.noise_scale, 0.0);
  EXPECT_FALSE(inf.is_private());
  EXPECT_THROW(PrivacyBudget::ForWidth(0.0, 3), Error);
  EXPECT_THROW(PrivacyBudget::ForWidth(-1.0, 3), Error);
}

TEST(PairIndexTest, EnumeratesUpperTriangle) {
  for (std::size_t k = 1; k <= 6; ++k) {
    std::size_t next = 0;
    for (std::size_t p = 0; p < k; ++p) {
      for (std::size_t q = p; q < k; ++q) {
        EXPECT_EQ(PairIndex(p, q, k), next);
        EXPECT_EQ(PairIndex(q, p, k), next);
        ++next;
      }
    }
    EXPECT_EQ(next, PairCount(k));
  }
}

TEST(AggregateTest, SingleZeroSample) {
  const CoefficientGroups g = AggregateCoefficients(Matrix(1, 3), 2);
  EXPECT_EQ(g.c0, 0.0);
  for (double v : g.c1.data()) EXPECT_EQ(v, 0.0);
  ASSERT_EQ(g.c2.size(), 3u);
  for (double v : g.c2) EXPECT_EQ(v, 1.0);
}

TEST(AggregateTest, OppositeSamplesCancel) {
  Matrix x(2, 3);
  const Vector v = {0.3, -0.8, 0.5};
  for (std::size_t j = 0; j < 3; ++j) {
    x(0, j) = v[j];
    x(1, j) = -v[j];
  }
  const CoefficientGroups g = AggregateCoefficients(x, 4);
  for (double c : g.c1.data()) EXPECT_EQ(c, 0.0);
  EXPECT_DOUBLE_EQ(g.c0, 2.0 * (0.09 + 0.64 + 0.25));
}

TEST(AggregateTest, ThreeSampleHandSum) {
  Matrix x(3, 2);
  x(0, 0) = 0.5;  x(0, 1) = -1.0;
  x(1, 0) = 0.25; x(1, 1) = 0.5;
  x(2, 0) = -1.0; x(2, 1) = 0.0;
  const CoefficientGroups g = AggregateCoefficients(x, 2);
  // 0.25 + 1 + 0.0625 + 0.25 + 1 + 0.
  EXPECT_DOUBLE_EQ(g.c0, 2.5625);
  for (std::size_t p = 0; p < 2; ++p) {
    EXPECT_DOUBLE_EQ(g.c1(p, 0), -2.0 * -0.25);
    EXPECT_DOUBLE_EQ(g.c1(p, 1), -2.0 * -0.5);
  }
  for (double v : g.c2) EXPECT_EQ(v, 3.0);
}

TEST(AggregateTest, EmptyDatasetIsParameterError) {
  try {
    AggregateCoefficients(Matrix(0, 3), 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParameter);
  }
}

TEST(AggregateTest, GroupBoundsHold) {
  Gen gen(12);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = gen.Size(1, 10);
    const std::size_t d = gen.Size(1, 5);
    const CoefficientGroups g = AggregateCoefficients(gen.Mat(n, d), gen.Size(1, 4));
    EXPECT_GE(g.c0, 0.0);
    EXPECT_LE(g.c0, static_cast<double>(n * d));
    for (double v : g.c1.data()) EXPECT_LE(std::abs(v), 2.0 * n);
  }
}

// Replacing one record moves c0 by at most d and every c1 entry by at most
// 4, while c2 depends on N only. The exact neighbour bound is therefore
// d (1 + 4K), which the record-norm bound 2 max ||lambda_x||_1 dominates.
TEST(NeighbourTest, L1DistanceWithinRecordBound) {
  Gen gen(21);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = gen.Size(1, 8);
    const std::size_t d = gen.Size(1, 4);
    const std::size_t k = gen.Size(1, 4);
    Matrix a = gen.Mat(n, d);
    Matrix b = a;
    const std::size_t row = gen.Size(0, n - 1);
    for (std::size_t j = 0; j < d; ++j) b(row, j) = gen.Uniform(-1, 1);
    const double dist =
        CoefficientL1Distance(AggregateCoefficients(a, k), AggregateCoefficients(b, k));
    const double record_bound =
        RecordCoefficientL1(a.row(row), k) + RecordCoefficientL1(b.row(row), k);
    EXPECT_LE(dist, record_bound + 1e-9);
    EXPECT_LE(dist, d * (1.0 + 4.0 * k) + 1e-9);
  }
}

TEST(NeighbourTest, ScalarInputsStayWithinFourKPlusOne) {
  Gen gen(22);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = gen.Size(1, 8);
    const std::size_t k = gen.Size(1, 4);
    Matrix a = gen.Mat(n, 1);
    Matrix b = a;
    b(gen.Size(0, n - 1), 0) = gen.Uniform(-1, 1);
    EXPECT_LE(CoefficientL1Distance(AggregateCoefficients(a, k), AggregateCoefficients(b, k)),
              SensitivityBound(k));
  }
}

TEST(NeighbourTest, ExtremeRecordsAttainExactBound) {
  const std::size_t k = 2;
  Matrix a(2, 3, 1.0);
  Matrix b = a;
  for (std::size_t j = 0; j < 3; ++j) b(1, j) = -1.0;
  // c0 is unchanged (squares), c1 moves by 4 in each of K x d entries.
  EXPECT_DOUBLE_EQ(
      CoefficientL1Distance(AggregateCoefficients(a, k), AggregateCoefficients(b, k)),
      4.0 * k * 3);
}

TEST(PerturbTest, DrawCount) {
  const CoefficientGroups g = AggregateCoefficients(Matrix(5, 3), 4);
  Rng rng(1);
  const NoisyCoefficients n = Perturb(g, PrivacyBudget::ForWidth(1.0, 4), rng);
  EXPECT_EQ(n.draw_count(), 23u);
  EXPECT_EQ(rng.position(), 23u);
  EXPECT_FALSE(n.all_zero());
}

TEST(PerturbTest, InfiniteEpsilonGivesZeroDraws) {
  const CoefficientGroups g = AggregateCoefficients(Matrix(5, 3), 4);
  Rng rng(1);
  const NoisyCoefficients n =
      Perturb(g, PrivacyBudget::ForWidth(std::numeric_limits<double>::infinity(), 4), rng);
  EXPECT_TRUE(n.all_zero());
}

TEST(PerturbTest, DrawsShrinkWithScale) {
  const CoefficientGroups g = AggregateCoefficients(Matrix(5, 3), 4);
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {1.0, 100.0, 1e4, 1e6}) {
    Rng rng(3);
    const NoisyCoefficients n = Perturb(g, PrivacyBudget::ForWidth(eps, 4), rng);
    double m = std::abs(n.eta0());
    for (double v : n.eta1().data()) m = std::max(m, std::abs(v));
    for (double v : n.eta2()) m = std::max(m, std::abs(v));
    EXPECT_LT(m, prev);
    prev = m;
  }
  EXPECT_LT(prev, 1e-3);
}

TEST(PerturbTest, PooledDrawsHaveRequestedScale) {
  // K = 4, d = 6: 35 draws per call; the budget is picked for scale 10.
  const CoefficientGroups g = AggregateCoefficients(Matrix(2, 6), 4);
  const PrivacyBudget budget = PrivacyBudget::ForWidth(2.0, 4);
  ASSERT_EQ(budget.noise_scale, 10.0);
  Rng rng(5);
  double abs_sum = 0.0;
  std::size_t count = 0;
  while (count < 100000) {
    const NoisyCoefficients n = Perturb(g, budget, rng);
    abs_sum += std::abs(n.eta0());
    for (double v : n.eta1().data()) abs_sum += std::abs(v);
    for (double v : n.eta2()) abs_sum += std::abs(v);
    count += n.draw_count();
  }
  EXPECT_NEAR(abs_sum / count, 10.0, 0.2);
}

TEST(PerturbTest, JsonRoundTripIsExact) {
  const CoefficientGroups g = AggregateCoefficients(Matrix(4, 3, 0.25), 3);
  Rng rng(8);
  const NoisyCoefficients n = Perturb(g, PrivacyBudget::ForWidth(0.3, 3), rng);
  EXPECT_EQ(NoisyCoefficients::FromJsonText(n.ToJsonText()), n);
  EXPECT_THROW(NoisyCoefficients::FromJsonText("{}"), Error);
}

// Independent evaluation of eta(W) straight from the definition.
double NoiseTermOracle(const Matrix& w, const NoisyCoefficients& n) {
  const std::size_t units = w.rows();
  std::vector<Vector> g(units);
  for (std::size_t p = 0; p < units; ++p) {
    g[p] = BasisG(Vector(w.cols(), 0.0), w.row(p));
  }
  double v = n.eta0();
  for (std::size_t p = 0; p < units; ++p) {
    for (std::size_t j = 0; j < w.cols(); ++j) v += n.eta1()(p, j) * g[p][j];
  }
  std::size_t idx = 0;
  for (std::size_t p = 0; p < n.width_k(); ++p) {
    for (std::size_t q = p; q < n.width_k(); ++q, ++idx) {
      if (q >= units) continue;
      double inner = 0;
      for (std::size_t j = 0; j < w.cols(); ++j) inner += g[p][j] * g[q][j];
      v += n.eta2()[idx] * inner;
    }
  }
  return v;
}

struct Fixture {
  Autoencoder ae;
  NoisyCoefficients noisy = NoisyCoefficients::Zero(1, 1);
};

Fixture MakeFixture(unsigned seed, std::size_t d, std::vector<std::size_t> widths,
                    double epsilon = 1.0) {
  Rng rng(seed);
  Fixture f;
  AutoencoderSpec spec{.encoder_widths = std::move(widths)};
  f.ae = MakeAutoencoder(spec, d, rng);
  const std::size_t k = f.ae.width_k();
  f.noisy = Perturb(AggregateCoefficients(Matrix(1, d), k),
                    PrivacyBudget::ForWidth(epsilon, k), rng);
  return f;
}

TEST(NoiseTermTest, MatchesDefinition) {
  for (unsigned seed = 0; seed < 10; ++seed) {
    const Fixture f = MakeFixture(seed, 4, {3, 2});
    const NoiseTermValue v = EvaluateNoiseTerm(f.ae.first_layer_weights(), f.noisy);
    EXPECT_LT(RelativeError(v.value, NoiseTermOracle(f.ae.first_layer_weights(), f.noisy)),
              1e-12);
  }
}

TEST(NoiseTermTest, GradientMatchesFiniteDifferences) {
  for (unsigned seed = 0; seed < 10; ++seed) {
    const Fixture f = MakeFixture(seed, 3, {4, 2}, 0.2);
    const Matrix w = f.ae.first_layer_weights();
    const NoiseTermValue v = EvaluateNoiseTerm(w, f.noisy);
    for (std::size_t i = 0; i < w.data().size(); ++i) {
      const auto fn = [&](const Vector& flat) {
        Matrix m = w;
        m.data() = flat;
        return EvaluateNoiseTerm(m, f.noisy).value;
      };
      const double fd = CentralDifference(fn, w.data(), i, 1e-5);
      EXPECT_LT(RelativeError(v.gradient.data()[i], fd, 1e-3), 1e-4) << "seed " << seed;
    }
  }
}

TEST(NoiseTermTest, TooManyUnitsIsStructural) {
  const Fixture f = MakeFixture(1, 3, {2});
  EXPECT_THROW(EvaluateNoiseTerm(Matrix(5, 3), f.noisy), Error);
}

TEST(PerturbedLossTest, ZeroNoiseEqualsPlainLoss) {
  Gen gen(4);
  const Fixture f = MakeFixture(2, 5, {4, 3});
  const Matrix batch = gen.Mat(7, 5);
  const LossAndGradient plain = PlainLoss(f.ae, batch);
  const LossAndGradient pert =
      PerturbedLoss(f.ae, batch, NoisyCoefficients::Zero(f.ae.width_k(), 5), 0.3);
  EXPECT_EQ(plain.loss, pert.loss);
  for (std::size_t l = 0; l < plain.encoder.layers.size(); ++l) {
    EXPECT_EQ(plain.encoder.layers[l].weights, pert.encoder.layers[l].weights);
  }
  for (std::size_t l = 0; l < plain.decoder.layers.size(); ++l) {
    EXPECT_EQ(plain.decoder.layers[l].weights, pert.decoder.layers[l].weights);
  }
}

TEST(PerturbedLossTest, DifferenceIsBatchIndependentNoiseTerm) {
  Gen gen(5);
  const Fixture f = MakeFixture(3, 4, {3});
  const double oracle = NoiseTermOracle(f.ae.first_layer_weights(), f.noisy);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix batch = gen.Mat(gen.Size(1, 9), 4);
    const double diff =
        PerturbedLoss(f.ae, batch, f.noisy).loss - PlainLoss(f.ae, batch).loss;
    EXPECT_NEAR(diff, oracle, 1e-9 * std::max(1.0, std::abs(oracle)));
  }
}

TEST(PerturbedLossTest, BatchFractionScalesNoiseTerm) {
  Gen gen(6);
  const Fixture f = MakeFixture(4, 4, {3});
  const Matrix batch = gen.Mat(5, 4);
  const double full = PerturbedLoss(f.ae, batch, f.noisy, 1.0).noise_term;
  EXPECT_NEAR(PerturbedLoss(f.ae, batch, f.noisy, 0.25).noise_term, 0.25 * full, 1e-12);
}

// Flattens every parameter of both halves for finite differences.
Vector Flatten(const Autoencoder& ae) {
  Vector out;
  for (const auto* net : {&ae.encoder, &ae.decoder}) {
    for (const auto& layer : net->layers) {
      out.insert(out.end(), layer.weights.data().begin(), layer.weights.data().end());
    }
  }
  return out;
}

Autoencoder Unflatten(Autoencoder ae, const Vector& flat) {
  std::size_t pos = 0;
  for (auto* net : {&ae.encoder, &ae.decoder}) {
    for (auto& layer : net->layers) {
      for (double& w : layer.weights.data()) w = flat[pos++];
    }
  }
  return ae;
}

Vector FlattenGrad(const LossAndGradient& g) {
  Vector out;
  for (const auto* set : {&g.encoder, &g.decoder}) {
    for (const auto& lg : set->layers) {
      out.insert(out.end(), lg.weights.data().begin(), lg.weights.data().end());
    }
  }
  return out;
}

TEST(PerturbedLossTest, FullGradientMatchesFiniteDifferences) {
  Gen gen(7);
  for (unsigned seed = 0; seed < 4; ++seed) {
    const Fixture f = MakeFixture(seed, 4, {3, 2}, 0.5);
    const Matrix batch = gen.Mat(6, 4);
    const Vector analytic = FlattenGrad(PerturbedLoss(f.ae, batch, f.noisy, 0.5));
    const Vector flat = Flatten(f.ae);
    ASSERT_EQ(analytic.size(), flat.size());
    for (std::size_t i = 0; i < flat.size(); ++i) {
      const auto fn = [&](const Vector& p) {
        return PerturbedLoss(Unflatten(f.ae, p), batch, f.noisy, 0.5).loss;
      };
      EXPECT_LT(RelativeError(analytic[i], CentralDifference(fn, flat, i, 1e-5), 1e-3), 1e-4);
    }
  }
}

TEST(TrainingTest, ZeroNoiseTrajectoryMatchesPlain) {
  Rng data_rng(9);
  const Dataset ds = SynthBlobs(data_rng, {.n_per_class = 40, .dim = 5});
  Rng init(10);
  const Autoencoder start = MakeAutoencoder({.encoder_widths = {4, 2}}, 5, init);
  const AutoencoderTrainOptions options{.epochs = 10, .batch_size = 16};
  Autoencoder plain = start;
  Autoencoder zero = start;
  Rng s1(11);
  Rng s2(11);
  const NoisyCoefficients none = NoisyCoefficients::Zero(start.width_k(), 5);
  const auto l1 = FitAutoencoder(plain, ds.features, nullptr, options, s1);
  const auto l2 = FitAutoencoder(zero, ds.features, &none, options, s2);
  EXPECT_EQ(l1, l2);
  EXPECT_EQ(plain, zero);
}

TEST(PrivacyRatioTest, IdenticalDatasetsNearOne) {
  Gen gen(1);
  const Matrix a = gen.Mat(6, 3);
  Rng rng(2);
  const auto r = EmpiricalPrivacyRatio(a, a, PrivacyBudget::ForWidth(0.5, 1), 100000, 20, rng);
  EXPECT_LT(r.max_ratio, 1.15);
  EXPECT_GT(r.bins_compared, 5u);
}

Matrix Neighbour(const Matrix& a) {
  Matrix b = a;
  for (std::size_t j = 0; j < b.cols(); ++j) b(0, j) = -0.05;
  return b;
}

TEST(PrivacyRatioTest, NeighboursWithinBound) {
  Matrix a(6, 3, 0.2);
  for (std::size_t j = 0; j < 3; ++j) a(0, j) = 1.0;
  Rng rng(3);
  const auto r = EmpiricalPrivacyRatio(a, Neighbour(a), PrivacyBudget::ForWidth(0.5, 1),
                                       100000, 20, rng);
  EXPECT_LE(r.max_ratio, std::exp(0.5) * 1.15);
}

TEST(PrivacyRatioTest, SmallerEpsilonIsCloserToOne) {
  Matrix a(6, 4, 0.2);
  for (std::size_t j = 0; j < 4; ++j) a(0, j) = 1.0;
  Rng r1(4);
  Rng r2(4);
  const double loose =
      EmpiricalPrivacyRatio(a, Neighbour(a), PrivacyBudget::ForWidth(0.5, 1), 100000, 20, r1)
          .max_ratio;
  const double tight =
      EmpiricalPrivacyRatio(a, Neighbour(a), PrivacyBudget::ForWidth(0.05, 1), 100000, 20, r2)
          .max_ratio;
  EXPECT_LT(tight, loose);
}

TEST(PrivacyRatioTest, RejectsNonNeighbours) {
  Gen gen(1);
  const Matrix a = gen.Mat(4, 2);
  const Matrix b = gen.Mat(4, 2);
  Rng rng(0);
  try {
    EmpiricalPrivacyRatio(a, b, PrivacyBudget::ForWidth(1.0, 1), 10000, 20, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParameter);
  }
}

}  // namespace
}  // namespace dpc
