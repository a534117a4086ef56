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

// Dropout-family regularizers. All masks use inverted scaling (kept entries
// are multiplied by 1/(1-p)), so evaluation runs without masks.

#ifndef SPARSESEQ_REGULARIZATION_H_
#define SPARSESEQ_REGULARIZATION_H_

#include <cstddef>
#include <span>
#include <vector>

#include "sparseseq/autodiff.h"
#include "sparseseq/rng.h"
#include "sparseseq/sparse_recurrent.h"
#include "sparseseq/tensor.h"

namespace sparseseq {

struct DropoutSpec {
  double word_embedding_p = 0.0;
  double variational_p = 0.0;
  double weight_drop_p = 0.0;

  // Throws std::invalid_argument unless every probability is in [0, 1).
  void Validate() const;
};

// One factor per position in `ids`: every occurrence of a word gets the same
// factor, 0 with probability p and 1/(1-p) otherwise. Draws happen in order
// of first appearance.
std::vector<double> WordDropoutScales(std::span<const int> ids, double p,
                                      Rng& rng);

// x[r, :] * scales[r].
Var ScaleRows(Var x, std::span<const double> scales);

// [batch x width] keep mask with entries in {0, 1/(1-p)}.
Tensor DropoutMask(std::size_t rows, std::size_t cols, double p, Rng& rng);

// Applies one [batch x width] mask at every time step of `seq`.
Sequence ApplyVariationalDropout(const Sequence& seq, const Tensor& mask);
// Samples a fresh per-sequence mask and applies it; identity when p == 0.
Sequence VariationalDropout(const Sequence& seq, double p, Rng& rng);

// Weight-drop mask for one recurrent matrix. When `structural` is given the
// result is drop o structural, so structural zeros stay zero.
Tensor WeightDropMask(std::size_t rows, std::size_t cols, double p, Rng& rng,
                      const Tensor* structural = nullptr);

// Per-component masks for one layer; empty when p == 0.
std::vector<Tensor> SampleWeightDrop(const SparseLstmLayer& layer, double p,
                                     Rng& rng);
// One [4o x o] mask per component for every layer of `stack`. Empty when
// p == 0 (no masking at all).
std::vector<std::vector<Tensor>> SampleWeightDrop(const LstmStack& stack,
                                                  double p, Rng& rng);

}  // namespace sparseseq

#endif  // SPARSESEQ_REGULARIZATION_H_
