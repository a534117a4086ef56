// Copyright 2026 The sparseseq Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sparseseq/models.h"

#include <cmath>
#include <numeric>
#include <sstream>

#include "sparseseq/errors.h"

namespace sparseseq {
namespace {

std::vector<int> Identity(std::size_t n) {
  std::vector<int> out(n);
  std::iota(out.begin(), out.end(), 0);
  return out;
}

SparseEmbedding MakeEmbedding(const ExperimentConfig& config,
                              std::size_t vocab_size, Rng& rng) {
  const EmbeddingAllocation alloc = EmbeddingAllocationFor(config, vocab_size);
  const std::vector<int> ranks = Identity(vocab_size);
  return SparseEmbedding("embedding.table", alloc, ranks,
                         config.embedding_init, rng);
}

Parameter UniformParam(std::string name, std::vector<std::size_t> shape,
                       double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.Uniform(-bound, bound);
  return Parameter(std::move(name), std::move(t));
}

std::string EmbeddingDetail(const SparseEmbedding& e) {
  std::ostringstream out;
  out << e.vocab_size() << "x" << e.dim();
  const double full = static_cast<double>(e.vocab_size() * e.dim());
  if (static_cast<double>(e.NumTrainable()) < full) {
    out << " density "
        << static_cast<double>(e.NumTrainable()) / full;
  }
  return out.str();
}

ParamGroup LayerGroup(const SparseLstmLayer& layer) {
  std::ostringstream out;
  const auto& plan = layer.plan();
  out << plan.input_size << "->" << plan.hidden_size;
  if (!plan.IsDense()) {
    out << " N=" << plan.num_components()
        << " window=" << plan.components[0].input_width;
  }
  std::int64_t count = 0;
  for (const auto& c : layer.components()) {
    count += static_cast<std::int64_t>(c.w_hi.size() + c.w_hh.size() +
                                       c.b_ih.size() + c.b_hh.size());
  }
  return {layer.name(), out.str(), count};
}

ParamGroup TensorGroup(const Parameter& p) {
  return {p.name, p.value.ShapeString(),
          static_cast<std::int64_t>(p.value.size())};
}

Var EmbedWithNoise(Var table, std::span<const int> ids,
                   const TrainNoise* noise) {
  Var x = SparseEmbedding::Lookup(table, ids);
  if (noise && noise->spec.word_embedding_p > 0.0) {
    x = ScaleRows(x, WordDropoutScales(ids, noise->spec.word_embedding_p,
                                       *noise->rng));
  }
  return x;
}

}  // namespace

std::int64_t TotalCount(const std::vector<ParamGroup>& groups) {
  std::int64_t total = 0;
  for (const auto& g : groups) total += g.count;
  return total;
}

EmbeddingAllocation EmbeddingAllocationFor(const ExperimentConfig& config,
                                           std::size_t vocab_size) {
  const std::size_t k = config.embedding_size;
  const std::vector<std::size_t> bins =
      config.embedding_bins == 0 ? PerDimensionBins(k)
                                 : UniformBins(k, config.embedding_bins);
  return AllocateForDensity(vocab_size, k, config.embedding_density, bins);
}

std::vector<std::size_t> LmLayerWidths(const ExperimentConfig& config) {
  std::vector<std::size_t> widths = {config.embedding_size};
  for (std::size_t n = 0; n + 1 < config.layers; ++n) {
    widths.push_back(config.hidden_size);
  }
  widths.push_back(config.tie_weights ? config.embedding_size
                                      : config.hidden_size);
  return widths;
}

std::vector<RecurrentSparsityPlan> LmLayerPlans(const ExperimentConfig& config) {
  const std::vector<std::size_t> widths = LmLayerWidths(config);
  std::vector<std::size_t> dense_widths;
  if (config.match_dense_hidden > 0) {
    ExperimentConfig dense = config;
    dense.embedding_size = config.match_dense_embedding;
    dense.hidden_size = config.match_dense_hidden;
    dense_widths = LmLayerWidths(dense);
  }
  std::vector<RecurrentSparsityPlan> plans;
  for (std::size_t n = 0; n < config.layers; ++n) {
    const std::size_t segments =
        config.segments[config.segments.size() == 1 ? 0 : n];
    if (!dense_widths.empty()) {
      plans.push_back(PlanMatchingDense(widths[n], widths[n + 1], segments,
                                        dense_widths[n],
                                        dense_widths[n + 1]));
    } else {
      const double gamma = config.gamma[config.gamma.size() == 1 ? 0 : n];
      plans.push_back(
          PlanRecurrentLayer(widths[n], widths[n + 1], segments, gamma));
    }
  }
  return plans;
}

void Accumulate(CrossEntropyStats& acc, const CrossEntropyStats& add) {
  acc.total_nll += add.total_nll;
  acc.count += add.count;
  acc.correct += add.correct;
}

// ---------------------------------------------------------------------------

LmModel::LmModel(const ExperimentConfig& config, std::size_t vocab_size,
                 Rng& rng)
    : tied_(config.tie_weights),
      embedding_(MakeEmbedding(config, vocab_size, rng)) {
  std::vector<SparseLstmLayer> layers;
  const auto plans = LmLayerPlans(config);
  for (std::size_t n = 0; n < plans.size(); ++n) {
    layers.emplace_back("lstm" + std::to_string(n), plans[n], rng);
  }
  stack_ = LstmStack(std::move(layers));
  const std::size_t out = stack_.layer(stack_.size() - 1).hidden_size();
  const double bound = 1.0 / std::sqrt(static_cast<double>(out));
  if (!tied_) {
    decoder_weight_ =
        UniformParam("decoder.weight", {vocab_size, out}, bound, rng);
  }
  decoder_bias_ = Parameter("decoder.bias", Tensor({vocab_size}));
}

std::vector<Parameter*> LmModel::Parameters() {
  std::vector<Parameter*> out = {&embedding_.table()};
  for (Parameter* p : stack_.Parameters()) out.push_back(p);
  if (!tied_) out.push_back(&decoder_weight_);
  out.push_back(&decoder_bias_);
  return out;
}

std::vector<std::pair<std::string, RecurrentSparsityPlan>> LmModel::Plans()
    const {
  std::vector<std::pair<std::string, RecurrentSparsityPlan>> out;
  for (std::size_t n = 0; n < stack_.size(); ++n) {
    out.emplace_back(stack_.layer(n).name(), stack_.layer(n).plan());
  }
  return out;
}

std::vector<ParamGroup> LmModel::ParamTable() const {
  std::vector<ParamGroup> out;
  out.push_back({"embedding" + std::string(tied_ ? " (tied decoder)" : ""),
                 EmbeddingDetail(embedding_), embedding_.NumTrainable()});
  for (std::size_t n = 0; n < stack_.size(); ++n) {
    out.push_back(LayerGroup(stack_.layer(n)));
  }
  if (!tied_) out.push_back(TensorGroup(decoder_weight_));
  out.push_back(TensorGroup(decoder_bias_));
  return out;
}

std::vector<LstmState> LmModel::InitialState(std::size_t batch) const {
  std::vector<LstmState> out;
  for (std::size_t n = 0; n < stack_.size(); ++n) {
    out.push_back(LstmState::Zeros(batch, stack_.layer(n).hidden_size()));
  }
  return out;
}

Var LmModel::Forward(Tape& tape, const LmBatch& batch,
                     std::vector<LstmState>& state, const TrainNoise* noise,
                     CrossEntropyStats* stats) {
  Var table = embedding_.MaskedTable(tape);
  Sequence x{EmbedWithNoise(table, batch.inputs, noise),
             batch.steps, batch.batch};
  std::vector<std::vector<Tensor>> masks;
  if (noise) {
    x = VariationalDropout(x, noise->spec.variational_p, *noise->rng);
    masks = SampleWeightDrop(stack_, noise->spec.weight_drop_p, *noise->rng);
  }
  Sequence h = stack_.Forward(tape, x, state, {}, masks);
  Var weight = tied_ ? table : tape.Param(decoder_weight_);
  Var logits =
      AddRowVector(MatMulTransposed(h.data, weight), tape.Param(decoder_bias_));
  if (stats) Accumulate(*stats, EvaluateLogits(logits.value(), batch.targets));
  return SoftmaxCrossEntropy(logits, batch.targets);
}

// ---------------------------------------------------------------------------

PosTagger::PosTagger(const ExperimentConfig& config, std::size_t vocab_size,
                     std::size_t num_tags, Rng& rng)
    : embedding_(MakeEmbedding(config, vocab_size, rng)),
      forward_("bilstm.fwd", DensePlan(config.embedding_size, config.pos_hidden),
               rng),
      backward_("bilstm.bwd",
                DensePlan(config.embedding_size, config.pos_hidden), rng) {
  if (num_tags == 0) throw std::invalid_argument("POS tagger needs tags");
  const std::size_t h2 = 2 * config.pos_hidden;
  const std::size_t d = config.pos_dense;
  dense_weight_ = UniformParam("dense.weight", {d, h2},
                               1.0 / std::sqrt(static_cast<double>(h2)), rng);
  dense_bias_ = Parameter("dense.bias", Tensor({d}));
  output_weight_ = UniformParam("output.weight", {num_tags, d},
                                1.0 / std::sqrt(static_cast<double>(d)), rng);
  output_bias_ = Parameter("output.bias", Tensor({num_tags}));
}

std::vector<Parameter*> PosTagger::Parameters() {
  std::vector<Parameter*> out = {&embedding_.table()};
  for (Parameter* p : forward_.Parameters()) out.push_back(p);
  for (Parameter* p : backward_.Parameters()) out.push_back(p);
  for (Parameter* p :
       {&dense_weight_, &dense_bias_, &output_weight_, &output_bias_}) {
    out.push_back(p);
  }
  return out;
}

std::vector<std::pair<std::string, RecurrentSparsityPlan>> PosTagger::Plans()
    const {
  return {{forward_.name(), forward_.plan()},
          {backward_.name(), backward_.plan()}};
}

std::vector<ParamGroup> PosTagger::ParamTable() const {
  return {{"embedding", EmbeddingDetail(embedding_),
           embedding_.NumTrainable()},
          LayerGroup(forward_),
          LayerGroup(backward_),
          TensorGroup(dense_weight_),
          TensorGroup(dense_bias_),
          TensorGroup(output_weight_),
          TensorGroup(output_bias_)};
}

Var PosTagger::Forward(Tape& tape, const TagBatch& batch,
                       const TrainNoise* noise, CrossEntropyStats* stats) {
  Var table = embedding_.MaskedTable(tape);
  Sequence x{EmbedWithNoise(table, batch.tokens, noise),
             batch.steps, batch.batch};
  std::vector<Tensor> fwd_masks, bwd_masks;
  if (noise) {
    x = VariationalDropout(x, noise->spec.variational_p, *noise->rng);
    fwd_masks =
        SampleWeightDrop(forward_, noise->spec.weight_drop_p, *noise->rng);
    bwd_masks =
        SampleWeightDrop(backward_, noise->spec.weight_drop_p, *noise->rng);
  }
  Sequence h = BiLstmForward(tape, forward_, backward_, x, batch.lengths,
                             fwd_masks, bwd_masks);
  Var d = Tanh(AddRowVector(MatMulTransposed(h.data, tape.Param(dense_weight_)),
                            tape.Param(dense_bias_)));
  Var logits = AddRowVector(MatMulTransposed(d, tape.Param(output_weight_)),
                            tape.Param(output_bias_));
  const int unknown = static_cast<int>(num_tags());
  std::vector<int> targets = batch.targets;
  std::size_t unknown_count = 0;
  for (int& t : targets) {
    if (t == unknown) {
      t = kIgnoreTarget;
      ++unknown_count;
    }
  }
  if (stats) {
    CrossEntropyStats s = EvaluateLogits(logits.value(), targets);
    s.count += unknown_count;
    Accumulate(*stats, s);
  }
  return SoftmaxCrossEntropy(logits, targets);
}

}  // namespace sparseseq
