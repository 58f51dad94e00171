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

#include "dpc/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "dpc/error.hpp"

namespace dpc {

namespace {

using nlohmann::json;

Matrix StackRows(const std::vector<Vector>& rows, std::size_t cols) {
  Matrix m(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  }
  return m;
}

Matrix ConcatRows(const Matrix& a, const Matrix& b) {
  Require(a.rows() == 0 || b.rows() == 0 || a.cols() == b.cols(), ErrorKind::kStructural,
          "cannot stack matrices of different widths");
  Matrix m(a.rows() + b.rows(), a.rows() > 0 ? a.cols() : b.cols());
  std::copy(a.data().begin(), a.data().end(), m.data().begin());
  std::copy(b.data().begin(), b.data().end(), m.data().begin() + a.data().size());
  return m;
}

double MaxProbability(std::span<const double> p) {
  return *std::max_element(p.begin(), p.end());
}

double MeanConfidence(const DenseNet& net, const Matrix& x) {
  Require(x.rows() > 0, ErrorKind::kParameter, "empty membership pool");
  const Matrix p = PredictProbaBatch(net, x);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i) sum += MaxProbability(p.row(i));
  return sum / static_cast<double>(p.rows());
}

}  // namespace

// ---------------------------------------------------------------------------
// Transfer sets and extraction

CounterfactualGenerator MakeDpcGenerator(const Autoencoder& ae,
                                         const PrototypeSet& prototypes,
                                         const SearchConfig& config) {
  return [&ae, &prototypes, config](std::span<const double> query,
                                    const DenseNet& target_model, int target_class,
                                    Rng& rng) {
    SearchConfig c = config;
    c.target_class = target_class;
    return SearchCounterfactual(prototypes, query, target_model, ae, c, rng);
  };
}

CounterfactualGenerator MakeBaselineGenerator(std::size_t steps, double step_size) {
  return [steps, step_size](std::span<const double> query, const DenseNet& target_model,
                            int target_class, Rng&) {
    return BaselineCounterfactual(query, target_model, target_class, steps, step_size);
  };
}

TransferSet BuildTransferSet(const Matrix& queries, const DenseNet& target_model,
                             const CounterfactualGenerator& generator,
                             std::size_t per_query, Rng& rng) {
  Require(queries.rows() > 0, ErrorKind::kParameter, "no queries");
  const std::size_t classes = target_model.output_dim();
  Require(classes >= 2, ErrorKind::kStructural, "target model needs two classes");
  TransferSet ts;
  const std::vector<int> answers = PredictLabels(target_model, queries);
  std::vector<Vector> rows;
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    rows.emplace_back(queries.row(i).begin(), queries.row(i).end());
    ts.labels.push_back(answers[i]);
    ts.provenance.push_back(Provenance::kQuery);
  }
  if (generator && per_query > 0) {
    for (std::size_t i = 0; i < queries.rows(); ++i) {
      for (std::size_t r = 0; r < per_query; ++r) {
        const auto offset = 1 + rng.Index(classes - 1);
        const int target = static_cast<int>((answers[i] + offset) % classes);
        try {
          CounterfactualResult cf = generator(queries.row(i), target_model, target, rng);
          const int label = PredictLabel(target_model, cf.sample);
          ts.flipped += label == target ? 1 : 0;
          rows.push_back(std::move(cf.sample));
          ts.labels.push_back(label);
          ts.provenance.push_back(Provenance::kCounterfactual);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::kNumeric) throw;
          ++ts.skipped;
        }
      }
    }
  }
  ts.inputs = StackRows(rows, queries.cols());
  return ts;
}

std::string AttackReport::ToJsonText() const {
  json doc;
  doc["kind"] = kind;
  doc["metric"] = metric;
  doc["value"] = value;
  doc["dataset"] = dataset;
  doc["query_count"] = query_count;
  doc["epsilon"] = std::isinf(epsilon) ? json() : json(epsilon);
  doc["generator"] = generator;
  doc["scenario"] = scenario;
  doc["seed"] = seed;
  doc["breakdown"] = breakdown;
  return doc.dump(1) + "\n";
}

AttackReport AttackReport::FromJsonText(const std::string& text) {
  try {
    const json doc = json::parse(text);
    AttackReport r;
    r.kind = doc.at("kind").get<std::string>();
    r.metric = doc.at("metric").get<std::string>();
    r.value = doc.at("value").get<double>();
    r.dataset = doc.at("dataset").get<std::string>();
    r.query_count = doc.at("query_count").get<std::size_t>();
    r.epsilon = doc.at("epsilon").is_null() ? std::numeric_limits<double>::infinity()
                                            : doc.at("epsilon").get<double>();
    r.generator = doc.at("generator").get<std::string>();
    r.scenario = doc.at("scenario").get<std::string>();
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.breakdown = doc.at("breakdown").get<std::map<std::string, double>>();
    return r;
  } catch (const json::exception& e) {
    Fail(ErrorKind::kIngestion, std::string("malformed attack report: ") + e.what());
  }
}

SurrogateResult ExtractSurrogate(const TransferSet& transfer, const ClassifierSpec& spec,
                                 bool known_architecture, std::size_t class_count,
                                 const ClassifierTrainOptions& options, const Rng& rng,
                                 const Dataset& evaluation, const DenseNet* target_model) {
  Require(transfer.size() > 0, ErrorKind::kParameter, "transfer set is empty");
  Dataset train;
  train.features = transfer.inputs;
  train.labels = transfer.labels;
  train.class_count = static_cast<int>(class_count);

  SurrogateResult out;
  out.spec = known_architecture ? spec : WidenSpec(spec);
  out.net = TrainClassifier(out.spec, train, options, rng);

  AttackReport& r = out.report;
  r.kind = "extract";
  r.metric = "surrogate_accuracy";
  r.scenario = known_architecture ? "known" : "unknown";
  r.query_count = static_cast<std::size_t>(
      std::count(transfer.provenance.begin(), transfer.provenance.end(), Provenance::kQuery));
  r.value = Accuracy(out.net, evaluation.features, evaluation.labels);
  r.breakdown["transfer_rows"] = static_cast<double>(transfer.size());
  r.breakdown["skipped"] = static_cast<double>(transfer.skipped);
  r.breakdown["flipped"] = static_cast<double>(transfer.flipped);
  const std::vector<int> pred = PredictLabels(out.net, evaluation.features);
  for (std::size_t c = 0; c < class_count; ++c) {
    std::size_t n = 0;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (evaluation.labels[i] != static_cast<int>(c)) continue;
      ++n;
      hit += pred[i] == evaluation.labels[i] ? 1 : 0;
    }
    if (n > 0) {
      r.breakdown["class_" + std::to_string(c)] =
          static_cast<double>(hit) / static_cast<double>(n);
    }
  }
  if (target_model != nullptr && evaluation.size() > 0) {
    const std::vector<int> ref = PredictLabels(*target_model, evaluation.features);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) agree += ref[i] == pred[i] ? 1 : 0;
    r.breakdown["fidelity"] = static_cast<double>(agree) / static_cast<double>(ref.size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Membership inference

std::vector<ShadowModel> TrainShadowModels(const Dataset& data, const SplitPlan& plan,
                                           const ClassifierSpec& spec,
                                           const ClassifierTrainOptions& options,
                                           const Rng& rng) {
  std::vector<ShadowModel> shadows;
  for (std::size_t k = 1; k < plan.sets.size(); ++k) {
    const Dataset members = data.Subset(plan.sets[k].train);
    const Dataset outsiders = data.Subset(plan.sets[k].test);
    ShadowModel s;
    s.net = TrainClassifier(spec, members, options,
                            rng.Substream("shadow" + std::to_string(k)));
    s.members = members.features;
    s.non_members = outsiders.features;
    shadows.push_back(std::move(s));
  }
  return shadows;
}

MembershipCandidates BuildMembershipCandidates(const Dataset& data,
                                               std::span<const std::size_t> members,
                                               std::span<const std::size_t> non_members,
                                               Rng& rng) {
  const std::size_t n = std::min(members.size(), non_members.size());
  Require(n > 0, ErrorKind::kParameter, "membership candidates need both pools");
  std::vector<std::size_t> in(members.begin(), members.end());
  std::vector<std::size_t> out(non_members.begin(), non_members.end());
  rng.Shuffle(in);
  rng.Shuffle(out);
  std::vector<std::pair<std::size_t, int>> rows;
  for (std::size_t i = 0; i < n; ++i) {
    rows.emplace_back(in[i], 1);
    rows.emplace_back(out[i], 0);
  }
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.Shuffle(order);
  MembershipCandidates c;
  c.features = Matrix(rows.size(), data.dim());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& [idx, member] = rows[order[i]];
    std::copy(data.features.row(idx).begin(), data.features.row(idx).end(),
              c.features.row(i).begin());
    c.is_member.push_back(member);
  }
  return c;
}

namespace {

void ScoreMembership(const std::vector<int>& guess, const MembershipCandidates& c,
                     AttackReport& r) {
  std::size_t hit = 0, members = 0, member_hit = 0;
  for (std::size_t i = 0; i < guess.size(); ++i) {
    hit += guess[i] == c.is_member[i] ? 1 : 0;
    if (c.is_member[i] == 1) {
      ++members;
      member_hit += guess[i] == 1 ? 1 : 0;
    }
  }
  const std::size_t outsiders = guess.size() - members;
  r.value = static_cast<double>(hit) / static_cast<double>(guess.size());
  if (members > 0) {
    r.breakdown["member_recall"] =
        static_cast<double>(member_hit) / static_cast<double>(members);
  }
  if (outsiders > 0) {
    r.breakdown["non_member_recall"] =
        static_cast<double>(hit - member_hit) / static_cast<double>(outsiders);
  }
  r.breakdown["candidates"] = static_cast<double>(guess.size());
}

}  // namespace

AttackReport ThresholdMembershipInference(const DenseNet& surrogate,
                                          std::span<const ShadowModel> shadows,
                                          const MembershipCandidates& candidates) {
  Require(shadows.size() >= 3, ErrorKind::kParameter,
          "threshold membership inference needs at least 3 shadow models");
  Require(candidates.features.rows() > 0, ErrorKind::kParameter, "no candidates");
  double member_mean = 0.0;
  double outsider_mean = 0.0;
  for (const auto& s : shadows) {
    member_mean += MeanConfidence(s.net, s.members);
    outsider_mean += MeanConfidence(s.net, s.non_members);
  }
  member_mean /= static_cast<double>(shadows.size());
  outsider_mean /= static_cast<double>(shadows.size());
  const double threshold = 0.5 * (member_mean + outsider_mean);
  const bool members_above = member_mean >= outsider_mean;

  const Matrix p = PredictProbaBatch(surrogate, candidates.features);
  std::vector<int> guess(p.rows());
  for (std::size_t i = 0; i < p.rows(); ++i) {
    const bool above = MaxProbability(p.row(i)) >= threshold;
    guess[i] = above == members_above ? 1 : 0;
  }
  AttackReport r;
  r.kind = "membership_threshold";
  r.metric = "membership_accuracy";
  r.breakdown["threshold"] = threshold;
  r.breakdown["shadow_member_confidence"] = member_mean;
  r.breakdown["shadow_non_member_confidence"] = outsider_mean;
  ScoreMembership(guess, candidates, r);
  return r;
}

AttackNetSpec AttackNetSpec::ForInput(std::size_t input_dim, std::size_t output_dim) {
  AttackNetSpec s;
  s.input_dim = input_dim;
  s.output_dim = output_dim;
  return s;
}

std::vector<std::size_t> AttackNetSpec::widths() const {
  std::vector<std::size_t> w{input_dim};
  w.insert(w.end(), hidden_widths.begin(), hidden_widths.end());
  w.push_back(output_dim);
  return w;
}

DenseNet MakeAttackNet(const AttackNetSpec& spec, Rng& rng) {
  Require(spec.input_dim > 0, ErrorKind::kParameter, "attack net input must be non-empty");
  Require(spec.output_dim == 1 || spec.output_dim >= 3, ErrorKind::kParameter,
          "attack net output is one sigmoid unit or a softmax over 3+ values");
  DenseNet net;
  net.input_dim = spec.input_dim;
  std::size_t prev = spec.input_dim;
  for (std::size_t w : spec.hidden_widths) {
    net.layers.push_back(DenseLayer::Create(prev, w, Activation::kRelu, true, rng));
    prev = w;
  }
  net.layers.push_back(DenseLayer::Create(
      prev, spec.output_dim,
      spec.output_dim == 1 ? Activation::kSigmoid : Activation::kSoftmax, true, rng));
  return net;
}

void FitAttackNet(DenseNet& net, const Matrix& inputs, std::span<const int> targets,
                  const AttackTrainOptions& options, Rng& shuffle_rng) {
  Require(inputs.rows() == targets.size(), ErrorKind::kStructural,
          "attack inputs and targets differ in length");
  Require(inputs.cols() == net.input_dim, ErrorKind::kStructural,
          "attack input width does not match the net");
  Require(options.batch_size > 0, ErrorKind::kParameter, "batch_size must be positive");
  const std::size_t n = inputs.rows();
  const std::size_t outputs = net.output_dim();
  if (n == 0) return;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  AdagradState state;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    shuffle_rng.Shuffle(order);
    for (std::size_t start = 0; start < n; start += options.batch_size) {
      const std::size_t end = std::min(n, start + options.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const BatchActivations acts = ForwardBatch(net, inputs.SelectRows(idx));
      const Matrix& p = acts.output();
      Matrix upstream(p.rows(), p.cols());
      const double scale = 1.0 / static_cast<double>(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const int y = targets[idx[i]];
        for (std::size_t c = 0; c < outputs; ++c) {
          const double t = outputs == 1 ? static_cast<double>(y)
                                        : (static_cast<int>(c) == y ? 1.0 : 0.0);
          upstream(i, c) = scale * (p(i, c) - t);
        }
      }
      try {
        AdagradStep(net, BackwardBatchFromPreActivation(net, acts, upstream), state,
                    options.adagrad);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kNumeric) throw;
        Fail(ErrorKind::kTraining, "attack net training diverged at epoch " +
                                       std::to_string(epoch) + ": " + e.what());
      }
    }
  }
}

std::vector<int> PredictAttack(const DenseNet& net, const Matrix& inputs) {
  const Matrix p = ForwardBatch(net, inputs).output();
  std::vector<int> out(p.rows());
  for (std::size_t i = 0; i < p.rows(); ++i) {
    out[i] = p.cols() == 1 ? (p(i, 0) >= 0.5 ? 1 : 0) : ArgMax(p.row(i));
  }
  return out;
}

DenseNet TrainMembershipAttackNet(std::span<const ShadowModel> shadows,
                                  const AttackNetSpec& spec,
                                  const AttackTrainOptions& options, const Rng& rng) {
  Require(!shadows.empty(), ErrorKind::kParameter, "no shadow models");
  Matrix inputs;
  std::vector<int> targets;
  for (const auto& s : shadows) {
    inputs = ConcatRows(inputs, PredictProbaBatch(s.net, s.members));
    targets.insert(targets.end(), s.members.rows(), 1);
    inputs = ConcatRows(inputs, PredictProbaBatch(s.net, s.non_members));
    targets.insert(targets.end(), s.non_members.rows(), 0);
  }
  Rng label_rng = rng.Substream("labels");
  if (options.shuffle_labels) {
    for (int& t : targets) t = label_rng.Uniform() < 0.5 ? 1 : 0;
  }
  AttackNetSpec s = spec;
  s.input_dim = inputs.cols();
  Rng init_rng = rng.Substream("init");
  Rng shuffle_rng = rng.Substream("shuffle");
  DenseNet net = MakeAttackNet(s, init_rng);
  FitAttackNet(net, inputs, targets, options, shuffle_rng);
  return net;
}

AttackReport EvaluateMembershipAttack(const DenseNet& attack_net, const DenseNet& surrogate,
                                      const MembershipCandidates& candidates) {
  Require(candidates.features.rows() > 0, ErrorKind::kParameter, "no candidates");
  const std::vector<int> guess =
      PredictAttack(attack_net, PredictProbaBatch(surrogate, candidates.features));
  AttackReport r;
  r.kind = "membership_learned";
  r.metric = "membership_accuracy";
  ScoreMembership(guess, candidates, r);
  return r;
}

AttackReport LearnedMembershipInference(const DenseNet& surrogate,
                                        std::span<const ShadowModel> shadows,
                                        const MembershipCandidates& candidates,
                                        const AttackTrainOptions& options,
                                        const Rng& rng) {
  const DenseNet attack = TrainMembershipAttackNet(
      shadows, AttackNetSpec::ForInput(surrogate.output_dim()), options, rng);
  return EvaluateMembershipAttack(attack, surrogate, candidates);
}

// ---------------------------------------------------------------------------
// Attribute inference

namespace {

std::size_t CategoricalColumn(const FeatureSchema& schema, const std::string& name) {
  const std::size_t col = schema.column_index(name);
  Require(schema.columns[col].kind == ColumnKind::kCategorical, ErrorKind::kParameter,
          "attribute '" + name + "' is not categorical");
  return col;
}

}  // namespace

Matrix AttributeAttackInputs(const DenseNet& surrogate, const Dataset& data,
                             std::size_t attribute_column) {
  const std::size_t begin = data.schema.offset_of(attribute_column);
  const std::size_t end = begin + data.schema.columns.at(attribute_column).width();
  const std::size_t known = data.dim() - (end - begin);
  const Matrix p = PredictProbaBatch(surrogate, data.features);
  Matrix out(data.size(), known + p.cols());
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto src = data.features.row(i);
    auto dst = out.row(i);
    std::size_t k = 0;
    for (std::size_t j = 0; j < data.dim(); ++j) {
      if (j < begin || j >= end) dst[k++] = src[j];
    }
    for (std::size_t c = 0; c < p.cols(); ++c) dst[k++] = p(i, c);
  }
  return out;
}

std::vector<int> AttributeValues(const Dataset& data, std::size_t attribute_column) {
  const std::size_t begin = data.schema.offset_of(attribute_column);
  const std::size_t width = data.schema.columns.at(attribute_column).width();
  std::vector<int> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out[i] = ArgMax(data.features.row(i).subspan(begin, width));
  }
  return out;
}

AttackReport AttributeInference(const DenseNet& surrogate, const std::string& attribute,
                                const Dataset& adversary, const Dataset& victims,
                                const AttackTrainOptions& options, const Rng& rng) {
  const std::size_t col = CategoricalColumn(adversary.schema, attribute);
  Require(victims.schema == adversary.schema, ErrorKind::kStructural,
          "adversary and victim data use different schemas");
  Require(adversary.size() > 0 && victims.size() > 0, ErrorKind::kParameter,
          "attribute inference needs adversary and victim rows");
  const std::size_t values = adversary.schema.columns[col].width();
  Require(values >= 2, ErrorKind::kParameter, "attribute needs at least two values");

  const Matrix train_x = AttributeAttackInputs(surrogate, adversary, col);
  const std::vector<int> train_y = AttributeValues(adversary, col);
  AttackNetSpec spec = AttackNetSpec::ForInput(train_x.cols(), values == 2 ? 1 : values);
  Rng init_rng = rng.Substream("init");
  Rng shuffle_rng = rng.Substream("shuffle");
  DenseNet net = MakeAttackNet(spec, init_rng);
  FitAttackNet(net, train_x, train_y, options, shuffle_rng);

  const std::vector<int> truth = AttributeValues(victims, col);
  const std::vector<int> guess =
      PredictAttack(net, AttributeAttackInputs(surrogate, victims, col));
  AttackReport r;
  r.kind = "attribute";
  r.metric = "attribute_accuracy";
  std::size_t hit = 0;
  std::vector<std::size_t> count(values, 0), value_hit(values, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto v = static_cast<std::size_t>(truth[i]);
    ++count[v];
    if (guess[i] == truth[i]) {
      ++hit;
      ++value_hit[v];
    }
  }
  r.value = static_cast<double>(hit) / static_cast<double>(truth.size());
  const auto& names = adversary.schema.columns[col].values;
  std::size_t majority = 0;
  for (std::size_t v = 0; v < values; ++v) {
    if (count[v] > count[majority]) majority = v;
    if (count[v] == 0) continue;
    r.breakdown["value_" + names[v]] =
        static_cast<double>(value_hit[v]) / static_cast<double>(count[v]);
    r.breakdown["share_" + names[v]] =
        static_cast<double>(count[v]) / static_cast<double>(truth.size());
  }
  std::size_t minority_n = 0, minority_hit = 0;
  for (std::size_t v = 0; v < values; ++v) {
    if (v == majority) continue;
    minority_n += count[v];
    minority_hit += value_hit[v];
  }
  r.breakdown["majority_accuracy"] =
      count[majority] ? static_cast<double>(value_hit[majority]) /
                            static_cast<double>(count[majority])
                      : 0.0;
  if (minority_n > 0) {
    r.breakdown["minority_accuracy"] =
        static_cast<double>(minority_hit) / static_cast<double>(minority_n);
  }
  return r;
}

}  // namespace dpc
