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

// Task models: the word-level language model used for lm and recite, and the
// bidirectional POS tagger.

#ifndef SPARSESEQ_MODELS_H_
#define SPARSESEQ_MODELS_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sparseseq/autodiff.h"
#include "sparseseq/config.h"
#include "sparseseq/corpus_io.h"
#include "sparseseq/regularization.h"
#include "sparseseq/rng.h"
#include "sparseseq/sparse_embedding.h"
#include "sparseseq/sparse_recurrent.h"
#include "sparseseq/sparsity_plan.h"

namespace sparseseq {

// One line of a parameter table. `count` is the number of trainable entries
// read off the live tensors (masked embedding entries excluded).
struct ParamGroup {
  std::string name;
  std::string detail;
  std::int64_t count = 0;
};

std::int64_t TotalCount(const std::vector<ParamGroup>& groups);

// Embedding allocation for a config: per-dimension bins when
// embedding_bins == 0, else that many near-equal bins.
EmbeddingAllocation EmbeddingAllocationFor(const ExperimentConfig& config,
                                           std::size_t vocab_size);

// Layer widths {k, h, ..., h, k} (tied) or {k, h, ..., h} (untied).
std::vector<std::size_t> LmLayerWidths(const ExperimentConfig& config);
// Per-layer plans; budget-matched against the dense reference when
// match_dense_* are set. Throws InfeasibleError.
std::vector<RecurrentSparsityPlan> LmLayerPlans(const ExperimentConfig& config);

// Dropout noise for a training pass. Evaluation passes use none.
struct TrainNoise {
  DropoutSpec spec;
  Rng* rng = nullptr;
};

// Adds one pass's per-position statistics to `acc`.
void Accumulate(CrossEntropyStats& acc, const CrossEntropyStats& add);

class LmModel {
 public:
  // Vocabulary ids must already be in allocation order (rank == id).
  LmModel(const ExperimentConfig& config, std::size_t vocab_size, Rng& rng);

  std::size_t vocab_size() const { return embedding_.vocab_size(); }
  SparseEmbedding& embedding() { return embedding_; }
  LstmStack& stack() { return stack_; }
  bool tied() const { return tied_; }

  std::vector<Parameter*> Parameters();
  std::vector<std::pair<std::string, RecurrentSparsityPlan>> Plans() const;
  std::vector<ParamGroup> ParamTable() const;
  std::int64_t NumParams() const { return TotalCount(ParamTable()); }

  std::vector<LstmState> InitialState(std::size_t batch) const;

  // Mean next-token NLL over the batch. `state` is read and replaced by the
  // final states (values only). When `stats` is given, the pass's totals
  // are added to it.
  Var Forward(Tape& tape, const LmBatch& batch, std::vector<LstmState>& state,
              const TrainNoise* noise = nullptr,
              CrossEntropyStats* stats = nullptr);

  // Masks the embedding again, e.g. after loading parameters.
  void Renormalize() { embedding_.ApplyMask(); }

 private:
  bool tied_ = true;
  SparseEmbedding embedding_;
  LstmStack stack_;
  Parameter decoder_weight_;  // untied only, [V x h_last]
  Parameter decoder_bias_;    // [V]
};

class PosTagger {
 public:
  PosTagger(const ExperimentConfig& config, std::size_t vocab_size,
            std::size_t num_tags, Rng& rng);

  std::size_t num_tags() const { return output_bias_.value.size(); }
  SparseEmbedding& embedding() { return embedding_; }

  std::vector<Parameter*> Parameters();
  std::vector<std::pair<std::string, RecurrentSparsityPlan>> Plans() const;
  std::vector<ParamGroup> ParamTable() const;
  std::int64_t NumParams() const { return TotalCount(ParamTable()); }

  // Mean tag NLL over the batch's real (non-padding) tokens. Targets equal
  // to num_tags() (tags unseen in training) are left out of the loss and
  // counted as errors in `stats`.
  Var Forward(Tape& tape, const TagBatch& batch,
              const TrainNoise* noise = nullptr,
              CrossEntropyStats* stats = nullptr);

  void Renormalize() { embedding_.ApplyMask(); }

 private:
  SparseEmbedding embedding_;
  SparseLstmLayer forward_;
  SparseLstmLayer backward_;
  Parameter dense_weight_;   // [d x 2h]
  Parameter dense_bias_;     // [d]
  Parameter output_weight_;  // [C x d]
  Parameter output_bias_;    // [C]
};

}  // namespace sparseseq

#endif  // SPARSESEQ_MODELS_H_
