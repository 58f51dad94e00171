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

// The adversary. Every entry point takes only what an attacker holds: its
// own queries, the target's answers, counterfactuals, and shadow data drawn
// from the adversary's SplitPlan subsets. The owner's records appear only as
// labelled membership candidates and evaluation sets.

#ifndef DPC_ATTACKS_HPP_
#define DPC_ATTACKS_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dpc/autoencoder.hpp"
#include "dpc/classifier.hpp"
#include "dpc/core.hpp"
#include "dpc/data.hpp"
#include "dpc/numerics.hpp"

namespace dpc {

// ---------------------------------------------------------------------------
// Transfer sets and extraction

enum class Provenance { kQuery, kCounterfactual };

struct TransferSet {
  Matrix inputs;
  std::vector<int> labels;  // the target model's predictions
  std::vector<Provenance> provenance;
  std::size_t skipped = 0;  // queries whose generator threw
  std::size_t flipped = 0;  // counterfactuals that reached their target class

  std::size_t size() const { return labels.size(); }
};

// Produces one counterfactual for `query` towards `target_class`.
using CounterfactualGenerator = std::function<CounterfactualResult(
    std::span<const double> query, const DenseNet& target_model, int target_class,
    Rng& rng)>;

// The private pipeline: search around the released prototypes.
CounterfactualGenerator MakeDpcGenerator(const Autoencoder& ae,
                                         const PrototypeSet& prototypes,
                                         const SearchConfig& config);
// The non-private reference: BaselineCounterfactual.
CounterfactualGenerator MakeBaselineGenerator(std::size_t steps = 200,
                                              double step_size = 0.05);

// {X_q, f(X_q)} followed by `per_query` counterfactuals per query, each
// labelled with f's prediction on it. The target class of each search is
// drawn uniformly from the classes other than f(query). A null generator or
// per_query = 0 gives the base extraction set.
TransferSet BuildTransferSet(const Matrix& queries, const DenseNet& target_model,
                             const CounterfactualGenerator& generator,
                             std::size_t per_query, Rng& rng);

struct AttackReport {
  std::string kind;    // extract, membership_threshold, membership_learned, attribute
  std::string metric;  // surrogate_accuracy, membership_accuracy, attribute_accuracy
  double value = 0.0;
  std::string dataset;
  std::size_t query_count = 0;
  double epsilon = 0.0;      // +infinity for the non-private generator
  std::string generator;     // base, non_dp, dpc
  std::string scenario;      // known, unknown
  std::uint64_t seed = 0;
  // Per-class or per-value accuracies and auxiliary numbers (threshold, ...).
  std::map<std::string, double> breakdown;

  std::string ToJsonText() const;
  static AttackReport FromJsonText(const std::string& text);
};

struct SurrogateResult {
  DenseNet net;
  ClassifierSpec spec;
  AttackReport report;  // value = accuracy on the evaluation set
};

// Trains f' on the transfer set. With known_architecture = false the
// attacker guesses WidenSpec(spec). The report also carries the agreement
// with the target ("fidelity") when `target_model` is given.
SurrogateResult ExtractSurrogate(const TransferSet& transfer, const ClassifierSpec& spec,
                                 bool known_architecture, std::size_t class_count,
                                 const ClassifierTrainOptions& options, const Rng& rng,
                                 const Dataset& evaluation,
                                 const DenseNet* target_model = nullptr);

// ---------------------------------------------------------------------------
// Membership inference

struct ShadowModel {
  DenseNet net;
  Matrix members;
  Matrix non_members;
};

// Trains one shadow per adversary subset (train half = members, test half =
// non-members) with the given spec.
std::vector<ShadowModel> TrainShadowModels(const Dataset& data, const SplitPlan& plan,
                                           const ClassifierSpec& spec,
                                           const ClassifierTrainOptions& options,
                                           const Rng& rng);

struct MembershipCandidates {
  Matrix features;
  std::vector<int> is_member;  // 1 = member
};

// Equal numbers of members and non-members (the smaller of the two pools),
// drawn without replacement and shuffled together.
MembershipCandidates BuildMembershipCandidates(const Dataset& data,
                                               std::span<const std::size_t> members,
                                               std::span<const std::size_t> non_members,
                                               Rng& rng);

// Threshold on the max class probability: the midpoint between the mean
// member and mean non-member confidence pooled over the shadows. At least
// three shadows are required.
AttackReport ThresholdMembershipInference(const DenseNet& surrogate,
                                          std::span<const ShadowModel> shadows,
                                          const MembershipCandidates& candidates);

struct AttackNetSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_widths = {1024, 512, 256, 64};
  // 1 = single sigmoid unit; otherwise a softmax over output_dim values.
  std::size_t output_dim = 1;

  // [u, 1024, 512, 256, 64, 1].
  static AttackNetSpec ForInput(std::size_t input_dim, std::size_t output_dim = 1);
  std::vector<std::size_t> widths() const;
};

struct AttackTrainOptions {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  AdagradOptions adagrad{.learning_rate = 1e-2, .decay = 1e-7};
  // Replaces the membership labels with random ones (destroyed signal).
  bool shuffle_labels = false;
};

// Relu hidden layers with biases; sigmoid or softmax output.
DenseNet MakeAttackNet(const AttackNetSpec& spec, Rng& rng);
// Binary cross-entropy (single output) or softmax cross-entropy, Adagrad.
void FitAttackNet(DenseNet& net, const Matrix& inputs, std::span<const int> targets,
                  const AttackTrainOptions& options, Rng& shuffle_rng);
std::vector<int> PredictAttack(const DenseNet& net, const Matrix& inputs);

// Attack net trained on the shadows' prediction vectors (members = 1).
DenseNet TrainMembershipAttackNet(std::span<const ShadowModel> shadows,
                                  const AttackNetSpec& spec,
                                  const AttackTrainOptions& options, const Rng& rng);
// Applies the attack net to the surrogate's prediction vectors.
AttackReport EvaluateMembershipAttack(const DenseNet& attack_net, const DenseNet& surrogate,
                                      const MembershipCandidates& candidates);
AttackReport LearnedMembershipInference(const DenseNet& surrogate,
                                        std::span<const ShadowModel> shadows,
                                        const MembershipCandidates& candidates,
                                        const AttackTrainOptions& options, const Rng& rng);

// ---------------------------------------------------------------------------
// Attribute inference

// Input of the attribute attack: every feature outside the attribute's
// one-hot block, followed by the surrogate's prediction vector.
Matrix AttributeAttackInputs(const DenseNet& surrogate, const Dataset& data,
                             std::size_t attribute_column);
// The attribute value index of every row (argmax of its one-hot block).
std::vector<int> AttributeValues(const Dataset& data, std::size_t attribute_column);

// Trains on `adversary` (whose attribute values are known) and reports the
// accuracy on `victims`, with a per-value breakdown.
AttackReport AttributeInference(const DenseNet& surrogate, const std::string& attribute,
                                const Dataset& adversary, const Dataset& victims,
                                const AttackTrainOptions& options, const Rng& rng);

}  // namespace dpc

#endif  // DPC_ATTACKS_HPP_
