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

// LSTM layers built from parallel dense components.
//
// Sequences are time-major matrices: a batch of B sequences of length T with
// width w is a [T*B x w] node whose row t*B + b holds step t of sequence b.
// Stacked gate weights use the order (i, f, g, o).

#ifndef SPARSESEQ_SPARSE_RECURRENT_H_
#define SPARSESEQ_SPARSE_RECURRENT_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sparseseq/autodiff.h"
#include "sparseseq/rng.h"
#include "sparseseq/sparsity_plan.h"
#include "sparseseq/tensor.h"

namespace sparseseq {

struct Sequence {
  Var data;  // [steps * batch x width]
  std::size_t steps = 0;
  std::size_t batch = 0;

  std::size_t width() const { return data.value().cols(); }
};

// Builds a Sequence from per-step [batch x width] nodes.
Sequence StackSteps(std::span<const Var> steps);
// Rows of one time step.
Var StepRows(const Sequence& seq, std::size_t t);

// Reverses each sequence in time within its own length; rows past a
// sequence's length stay in place. lengths.size() must equal seq.batch.
Sequence ReverseWithinLengths(const Sequence& seq,
                              std::span<const std::size_t> lengths);

struct LstmComponentParams {
  LstmComponentParams() = default;
  // Shapes from `spec`; values drawn from U(-1/sqrt(out), 1/sqrt(out)).
  LstmComponentParams(const std::string& prefix, const ComponentSpec& spec,
                      Rng& rng);

  std::size_t input_width() const { return w_hi.value.cols(); }
  std::size_t output_width() const { return w_hh.value.cols(); }
  std::int64_t size() const;

  Parameter w_hi;  // [4*out x in]
  Parameter w_hh;  // [4*out x out]
  Parameter b_ih;  // [4*out]
  Parameter b_hh;  // [4*out]
};

// One fused LSTM step. `gates_in` is x*W_hi^T + biases [B x 4o]; `hc_prev`
// packs [h_prev | c_prev] as [B x 2o]; w_hh is [4o x o]. Returns [h | c].
Var LstmCell(Var gates_in, Var hc_prev, Var w_hh);

// Convenience single step with the component's parameters: x is [B x in].
Var LstmStep(Tape& tape, Var x, Var hc_prev, LstmComponentParams& params);

// Layer-wide recurrent state, [B x h] each.
struct LstmState {
  Tensor h;
  Tensor c;

  static LstmState Zeros(std::size_t batch, std::size_t hidden) {
    return {Tensor({batch, hidden}), Tensor({batch, hidden})};
  }
};

struct LayerOutput {
  Sequence output;      // [T*B x h]
  LstmState final_state;  // values only; carry across segments by copy
};

class SparseLstmLayer {
 public:
  SparseLstmLayer() = default;
  SparseLstmLayer(std::string name, RecurrentSparsityPlan plan, Rng& rng);

  const RecurrentSparsityPlan& plan() const { return plan_; }
  const std::string& name() const { return name_; }
  std::size_t input_size() const { return plan_.input_size; }
  std::size_t hidden_size() const { return plan_.hidden_size; }
  std::vector<LstmComponentParams>& components() { return components_; }
  const std::vector<LstmComponentParams>& components() const {
    return components_;
  }
  std::vector<Parameter*> Parameters();
  std::int64_t NumParams() const;

  // Runs every component over its input window and concatenates hidden
  // states in plan order. `hh_masks`, when non-empty, holds one [4o x o]
  // multiplicative mask per component applied to W_hh for the whole pass
  // (weight drop).
  LayerOutput Forward(Tape& tape, const Sequence& input,
                      const LstmState& init,
                      std::span<const Tensor> hh_masks = {});

 private:
  std::string name_;
  RecurrentSparsityPlan plan_;
  std::vector<LstmComponentParams> components_;
};

// Reference representation: one dense cell whose W_hi / W_hh carry the plan's
// masks in each of the four gate blocks.
struct MaskedDenseLstm {
  RecurrentSparsityPlan plan;
  Tensor mask_hi;  // [4h x i]
  Tensor mask_hh;  // [4h x h]
  Parameter w_hi;
  Parameter w_hh;
  Parameter b_ih;
  Parameter b_hh;
};

// Gate-replicated masks [4h x i] and [4h x h] for `plan`.
PlanMasks GateMasks(const RecurrentSparsityPlan& plan);

// Embeds component parameters into dense masked matrices.
MaskedDenseLstm PackMaskedDense(const SparseLstmLayer& layer);
// Copies masked-dense values back into the layer's components. Throws
// std::invalid_argument when the plans differ or a masked entry is nonzero.
void UnpackMaskedDense(const MaskedDenseLstm& dense, SparseLstmLayer& layer);

// Dense LSTM with W o mask built from primitive tape ops. Throws
// std::invalid_argument when the masks differ from the plan's.
LayerOutput MaskedDenseForward(Tape& tape, MaskedDenseLstm& params,
                               const Sequence& input, const LstmState& init);

// Stacked layers; layer n+1 reads layer n's full output.
class LstmStack {
 public:
  // Applied to each layer's output before it is passed on (dropout etc.).
  using Hook = std::function<Sequence(std::size_t layer, const Sequence&)>;

  LstmStack() = default;
  // Throws ShapeError when adjacent widths disagree.
  explicit LstmStack(std::vector<SparseLstmLayer> layers);

  std::size_t size() const { return layers_.size(); }
  SparseLstmLayer& layer(std::size_t n) { return layers_.at(n); }
  const SparseLstmLayer& layer(std::size_t n) const { return layers_.at(n); }
  std::vector<Parameter*> Parameters();
  std::int64_t NumParams() const;

  // `states` holds one entry per layer and is updated in place.
  // `hh_masks[n]` is forwarded to layer n (may be empty).
  Sequence Forward(Tape& tape, const Sequence& input,
                   std::vector<LstmState>& states, const Hook& hook = {},
                   std::span<const std::vector<Tensor>> hh_masks = {});

 private:
  std::vector<SparseLstmLayer> layers_;
};

// Forward layer over the input and backward layer over each sequence
// reversed within its length; outputs concatenated as [fwd | bwd]. The mask
// spans are forwarded to the respective layers (weight drop).
Sequence BiLstmForward(Tape& tape, SparseLstmLayer& forward,
                       SparseLstmLayer& backward, const Sequence& input,
                       std::span<const std::size_t> lengths,
                       std::span<const Tensor> forward_hh_masks = {},
                       std::span<const Tensor> backward_hh_masks = {});

}  // namespace sparseseq

#endif  // SPARSESEQ_SPARSE_RECURRENT_H_
