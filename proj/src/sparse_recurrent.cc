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

#include "sparseseq/sparse_recurrent.h"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "sparseseq/errors.h"

namespace sparseseq {
namespace {

Tensor UniformTensor(std::vector<std::size_t> shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.Uniform(-bound, bound);
  return t;
}

// [h | c] columns of one component, cut from layer-wide state.
Tensor PackComponentState(const LstmState& s, std::size_t offset,
                          std::size_t width) {
  const std::size_t b = s.h.rows();
  Tensor hc({b, 2 * width});
  auto m = hc.matrix();
  m.leftCols(width) = s.h.matrix().middleCols(offset, width);
  m.rightCols(width) = s.c.matrix().middleCols(offset, width);
  return hc;
}

void CheckState(const LstmState& s, std::size_t batch, std::size_t hidden) {
  if (s.h.rank() != 2 || s.c.rank() != 2 || s.h.rows() != batch ||
      s.h.cols() != hidden || !s.h.SameShape(s.c)) {
    throw ShapeError("lstm: initial state must be [" + std::to_string(batch) +
                     " x " + std::to_string(hidden) + "], got h " +
                     s.h.ShapeString() + ", c " + s.c.ShapeString());
  }
}

void CheckInput(const Sequence& input, std::size_t width) {
  if (input.data.value().rows() != input.steps * input.batch) {
    throw ShapeError("sequence rows do not match steps * batch");
  }
  if (input.width() != width) {
    throw ShapeError("lstm: input width " + std::to_string(input.width()) +
                     " != " + std::to_string(width));
  }
}

}  // namespace

Sequence StackSteps(std::span<const Var> steps) {
  if (steps.empty()) throw ShapeError("empty sequence");
  return {ConcatRows(steps), steps.size(), steps.front().value().rows()};
}

Var StepRows(const Sequence& seq, std::size_t t) {
  return SliceRows(seq.data, t * seq.batch, seq.batch);
}

Sequence ReverseWithinLengths(const Sequence& seq,
                              std::span<const std::size_t> lengths) {
  if (lengths.size() != seq.batch) {
    throw ShapeError("reverse: need one length per sequence");
  }
  std::vector<int> rows(seq.steps * seq.batch);
  for (std::size_t t = 0; t < seq.steps; ++t) {
    for (std::size_t b = 0; b < seq.batch; ++b) {
      const std::size_t len = lengths[b];
      if (len > seq.steps) throw ShapeError("reverse: length exceeds steps");
      const std::size_t src = t < len ? len - 1 - t : t;
      rows[t * seq.batch + b] = static_cast<int>(src * seq.batch + b);
    }
  }
  return {GatherRows(seq.data, rows), seq.steps, seq.batch};
}

LstmComponentParams::LstmComponentParams(const std::string& prefix,
                                         const ComponentSpec& spec, Rng& rng) {
  const std::size_t out = spec.output_width;
  const double bound = 1.0 / std::sqrt(static_cast<double>(out));
  w_hi = Parameter(prefix + ".w_hi",
                   UniformTensor({4 * out, spec.input_width}, bound, rng));
  w_hh = Parameter(prefix + ".w_hh", UniformTensor({4 * out, out}, bound, rng));
  b_ih = Parameter(prefix + ".b_ih", UniformTensor({4 * out}, bound, rng));
  b_hh = Parameter(prefix + ".b_hh", UniformTensor({4 * out}, bound, rng));
}

std::int64_t LstmComponentParams::size() const {
  return static_cast<std::int64_t>(w_hi.size() + w_hh.size() + b_ih.size() +
                                   b_hh.size());
}

Var LstmCell(Var gates_in, Var hc_prev, Var w_hh) {
  Tape& tape = *gates_in.tape();
  const Tensor& zin = gates_in.value();
  const Tensor& hc = hc_prev.value();
  const Tensor& w = w_hh.value();
  const std::size_t o = w.cols();
  const std::size_t b = zin.rows();
  if (w.rows() != 4 * o || zin.cols() != 4 * o || hc.rows() != b ||
      hc.cols() != 2 * o) {
    throw ShapeError("lstm_cell: gates " + zin.ShapeString() + ", state " +
                     hc.ShapeString() + ", w_hh " + w.ShapeString());
  }
  const auto eo = static_cast<Eigen::Index>(o);

  // acts = [i f g o] activations, saved for the backward pass.
  Tensor acts({b, 4 * o});
  auto a = acts.matrix();
  a.noalias() = hc.matrix().leftCols(eo) * w.matrix().transpose();
  a += zin.matrix();
  a.leftCols(2 * eo) =
      (1.0 + (-a.leftCols(2 * eo).array()).exp()).inverse().matrix();
  a.middleCols(2 * eo, eo) = a.middleCols(2 * eo, eo).array().tanh().matrix();
  a.rightCols(eo) = (1.0 + (-a.rightCols(eo).array()).exp()).inverse().matrix();

  Tensor out({b, 2 * o});
  auto y = out.matrix();
  y.rightCols(eo) =
      (a.middleCols(eo, eo).array() * hc.matrix().rightCols(eo).array() +
       a.leftCols(eo).array() * a.middleCols(2 * eo, eo).array())
          .matrix();
  Tensor tanh_c({b, o});
  tanh_c.matrix() = y.rightCols(eo).array().tanh().matrix();
  y.leftCols(eo) =
      (a.rightCols(eo).array() * tanh_c.matrix().array()).matrix();

  return tape.Record(
      std::move(out), {gates_in, hc_prev, w_hh},
      [gates_in, hc_prev, w_hh, acts = std::move(acts),
       tanh_c = std::move(tanh_c), eo, b, o](Tape& t, const Tensor& g) {
        const auto act = acts.matrix();
        const auto ig = act.leftCols(eo).array();
        const auto fg = act.middleCols(eo, eo).array();
        const auto gg = act.middleCols(2 * eo, eo).array();
        const auto og = act.rightCols(eo).array();
        const auto tc = tanh_c.matrix().array();
        const auto gm = g.matrix();
        const auto dh = gm.leftCols(eo).array();
        const auto hcv = hc_prev.value().matrix();
        const auto c_prev = hcv.rightCols(eo).array();

        Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> dc =
            gm.rightCols(eo).array() + dh * og * (1.0 - tc * tc);
        Tensor dz({b, 4 * o});
        auto z = dz.matrix();
        z.leftCols(eo) = (dc * gg * ig * (1.0 - ig)).matrix();
        z.middleCols(eo, eo) = (dc * c_prev * fg * (1.0 - fg)).matrix();
        z.middleCols(2 * eo, eo) = (dc * ig * (1.0 - gg * gg)).matrix();
        z.rightCols(eo) = (dh * tc * og * (1.0 - og)).matrix();

        if (t.RequiresGrad(gates_in)) t.GradRef(gates_in).Accumulate(dz);
        if (t.RequiresGrad(hc_prev)) {
          auto ghc = t.GradRef(hc_prev).matrix();
          ghc.leftCols(eo).noalias() += z * w_hh.value().matrix();
          ghc.rightCols(eo) += (dc * fg).matrix();
        }
        if (t.RequiresGrad(w_hh)) {
          t.GradRef(w_hh).matrix().noalias() +=
              z.transpose() * hcv.leftCols(eo);
        }
      });
}

Var LstmStep(Tape& tape, Var x, Var hc_prev, LstmComponentParams& params) {
  Var z = MatMulTransposed(x, tape.Param(params.w_hi));
  z = AddRowVector(AddRowVector(z, tape.Param(params.b_ih)),
                   tape.Param(params.b_hh));
  return LstmCell(z, hc_prev, tape.Param(params.w_hh));
}

SparseLstmLayer::SparseLstmLayer(std::string name, RecurrentSparsityPlan plan,
                                 Rng& rng)
    : name_(std::move(name)), plan_(std::move(plan)) {
  plan_.Validate();
  for (std::size_t n = 0; n < plan_.components.size(); ++n) {
    components_.emplace_back(name_ + ".c" + std::to_string(n),
                             plan_.components[n], rng);
  }
}

std::vector<Parameter*> SparseLstmLayer::Parameters() {
  std::vector<Parameter*> out;
  for (auto& c : components_) {
    out.insert(out.end(), {&c.w_hi, &c.w_hh, &c.b_ih, &c.b_hh});
  }
  return out;
}

std::int64_t SparseLstmLayer::NumParams() const {
  std::int64_t total = 0;
  for (const auto& c : components_) total += c.size();
  return total;
}

LayerOutput SparseLstmLayer::Forward(Tape& tape, const Sequence& input,
                                     const LstmState& init,
                                     std::span<const Tensor> hh_masks) {
  CheckInput(input, plan_.input_size);
  CheckState(init, input.batch, plan_.hidden_size);
  if (!hh_masks.empty() && hh_masks.size() != components_.size()) {
    throw ShapeError("need one weight-drop mask per component");
  }
  const std::size_t b = input.batch;
  LayerOutput result;
  result.final_state = LstmState::Zeros(b, plan_.hidden_size);
  std::vector<Var> outputs;
  std::size_t offset = 0;
  for (std::size_t n = 0; n < components_.size(); ++n) {
    const ComponentSpec& spec = plan_.components[n];
    LstmComponentParams& p = components_[n];
    const std::size_t o = spec.output_width;
    Var x = spec.input_offset == 0 && spec.input_width == plan_.input_size
                ? input.data
                : SliceColumns(input.data, spec.input_offset,
                               spec.input_width);
    Var proj = MatMulTransposed(x, tape.Param(p.w_hi));
    proj = AddRowVector(AddRowVector(proj, tape.Param(p.b_ih)),
                        tape.Param(p.b_hh));
    Var w_hh = tape.Param(p.w_hh);
    if (!hh_masks.empty()) w_hh = MulConstant(w_hh, hh_masks[n]);

    Var hc = tape.Constant(PackComponentState(init, offset, o));
    std::vector<Var> hs;
    hs.reserve(input.steps);
    for (std::size_t t = 0; t < input.steps; ++t) {
      hc = LstmCell(SliceRows(proj, t * b, b), hc, w_hh);
      hs.push_back(SliceColumns(hc, 0, o));
    }
    outputs.push_back(hs.size() == 1 ? hs[0] : ConcatRows(hs));

    const auto last = hc.value().matrix();
    const auto eo = static_cast<Eigen::Index>(o);
    result.final_state.h.matrix().middleCols(static_cast<Eigen::Index>(offset),
                                             eo) = last.leftCols(eo);
    result.final_state.c.matrix().middleCols(static_cast<Eigen::Index>(offset),
                                             eo) = last.rightCols(eo);
    offset += o;
  }
  Var data = outputs.size() == 1 ? outputs[0] : ConcatColumns(outputs);
  result.output = {data, input.steps, b};
  return result;
}

PlanMasks GateMasks(const RecurrentSparsityPlan& plan) {
  PlanMasks base = ExpandPlanToMasks(plan);
  const std::size_t h = plan.hidden_size;
  PlanMasks out{Tensor({4 * h, h}), Tensor({4 * h, plan.input_size})};
  const auto eh = static_cast<Eigen::Index>(h);
  for (Eigen::Index q = 0; q < 4; ++q) {
    out.hi.matrix().middleRows(q * eh, eh) = base.hi.matrix();
    out.hh.matrix().middleRows(q * eh, eh) = base.hh.matrix();
  }
  return out;
}

MaskedDenseLstm PackMaskedDense(const SparseLstmLayer& layer) {
  const RecurrentSparsityPlan& plan = layer.plan();
  const std::size_t h = plan.hidden_size;
  const std::size_t i = plan.input_size;
  PlanMasks masks = GateMasks(plan);
  MaskedDenseLstm d{plan,
                    std::move(masks.hi),
                    std::move(masks.hh),
                    Parameter(layer.name() + ".dense.w_hi", Tensor({4 * h, i})),
                    Parameter(layer.name() + ".dense.w_hh", Tensor({4 * h, h})),
                    Parameter(layer.name() + ".dense.b_ih", Tensor({4 * h})),
                    Parameter(layer.name() + ".dense.b_hh", Tensor({4 * h}))};
  std::size_t offset = 0;
  for (std::size_t n = 0; n < plan.components.size(); ++n) {
    const ComponentSpec& s = plan.components[n];
    const LstmComponentParams& p = layer.components()[n];
    const std::size_t o = s.output_width;
    for (std::size_t q = 0; q < 4; ++q) {
      for (std::size_t r = 0; r < o; ++r) {
        const std::size_t src = q * o + r;
        const std::size_t dst = q * h + offset + r;
        for (std::size_t j = 0; j < s.input_width; ++j) {
          d.w_hi.value.at(dst, s.input_offset + j) = p.w_hi.value.at(src, j);
        }
        for (std::size_t j = 0; j < o; ++j) {
          d.w_hh.value.at(dst, offset + j) = p.w_hh.value.at(src, j);
        }
        d.b_ih.value[dst] = p.b_ih.value[src];
        d.b_hh.value[dst] = p.b_hh.value[src];
      }
    }
    offset += o;
  }
  return d;
}

void UnpackMaskedDense(const MaskedDenseLstm& d, SparseLstmLayer& layer) {
  const RecurrentSparsityPlan& plan = layer.plan();
  if (!(d.plan == plan)) {
    throw std::invalid_argument("masked-dense plan differs from the layer's");
  }
  auto off_mask = [](const Tensor& v, const Tensor& m) {
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (m[k] == 0.0 && v[k] != 0.0) return true;
    }
    return false;
  };
  if (off_mask(d.w_hi.value, d.mask_hi) || off_mask(d.w_hh.value, d.mask_hh)) {
    throw std::invalid_argument("masked-dense weights are nonzero off-mask");
  }
  const std::size_t h = plan.hidden_size;
  std::size_t offset = 0;
  for (std::size_t n = 0; n < plan.components.size(); ++n) {
    const ComponentSpec& s = plan.components[n];
    LstmComponentParams& p = layer.components()[n];
    const std::size_t o = s.output_width;
    for (std::size_t q = 0; q < 4; ++q) {
      for (std::size_t r = 0; r < o; ++r) {
        const std::size_t dst = q * o + r;
        const std::size_t src = q * h + offset + r;
        for (std::size_t j = 0; j < s.input_width; ++j) {
          p.w_hi.value.at(dst, j) = d.w_hi.value.at(src, s.input_offset + j);
        }
        for (std::size_t j = 0; j < o; ++j) {
          p.w_hh.value.at(dst, j) = d.w_hh.value.at(src, offset + j);
        }
        p.b_ih.value[dst] = d.b_ih.value[src];
        p.b_hh.value[dst] = d.b_hh.value[src];
      }
    }
    offset += o;
  }
}

LayerOutput MaskedDenseForward(Tape& tape, MaskedDenseLstm& d,
                               const Sequence& input, const LstmState& init) {
  const std::size_t h = d.plan.hidden_size;
  CheckInput(input, d.plan.input_size);
  CheckState(init, input.batch, h);
  PlanMasks expected = GateMasks(d.plan);
  if (!d.mask_hi.SameShape(expected.hi) || !d.mask_hh.SameShape(expected.hh) ||
      d.mask_hi.matrix() != expected.hi.matrix() ||
      d.mask_hh.matrix() != expected.hh.matrix()) {
    throw std::invalid_argument("masks are inconsistent with the plan");
  }
  Var w_hi = MulConstant(tape.Param(d.w_hi), d.mask_hi);
  Var w_hh = MulConstant(tape.Param(d.w_hh), d.mask_hh);
  Var proj = MatMulTransposed(input.data, w_hi);
  proj = AddRowVector(AddRowVector(proj, tape.Param(d.b_ih)),
                      tape.Param(d.b_hh));
  Var hv = tape.Constant(init.h);
  Var cv = tape.Constant(init.c);
  std::vector<Var> hs;
  for (std::size_t t = 0; t < input.steps; ++t) {
    Var z = Add(SliceRows(proj, t * input.batch, input.batch),
                MatMulTransposed(hv, w_hh));
    Var ig = Sigmoid(SliceColumns(z, 0, h));
    Var fg = Sigmoid(SliceColumns(z, h, h));
    Var gg = Tanh(SliceColumns(z, 2 * h, h));
    Var og = Sigmoid(SliceColumns(z, 3 * h, h));
    cv = Add(Mul(fg, cv), Mul(ig, gg));
    hv = Mul(og, Tanh(cv));
    hs.push_back(hv);
  }
  LayerOutput out;
  out.output = {ConcatRows(hs), input.steps, input.batch};
  out.final_state = {hv.value(), cv.value()};
  return out;
}

LstmStack::LstmStack(std::vector<SparseLstmLayer> layers)
    : layers_(std::move(layers)) {
  for (std::size_t n = 1; n < layers_.size(); ++n) {
    if (layers_[n].input_size() != layers_[n - 1].hidden_size()) {
      throw ShapeError("stack: layer " + std::to_string(n) + " reads " +
                       std::to_string(layers_[n].input_size()) +
                       " inputs but layer " + std::to_string(n - 1) +
                       " emits " + std::to_string(layers_[n - 1].hidden_size()));
    }
  }
}

std::vector<Parameter*> LstmStack::Parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers_) {
    auto p = l.Parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::int64_t LstmStack::NumParams() const {
  std::int64_t total = 0;
  for (const auto& l : layers_) total += l.NumParams();
  return total;
}

Sequence LstmStack::Forward(Tape& tape, const Sequence& input,
                            std::vector<LstmState>& states, const Hook& hook,
                            std::span<const std::vector<Tensor>> hh_masks) {
  if (states.size() != layers_.size()) {
    throw ShapeError("stack: need one state per layer");
  }
  Sequence x = input;
  for (std::size_t n = 0; n < layers_.size(); ++n) {
    std::span<const Tensor> masks;
    if (!hh_masks.empty()) masks = hh_masks[n];
    LayerOutput out = layers_[n].Forward(tape, x, states[n], masks);
    states[n] = std::move(out.final_state);
    x = hook ? hook(n, out.output) : out.output;
  }
  return x;
}

Sequence BiLstmForward(Tape& tape, SparseLstmLayer& forward,
                       SparseLstmLayer& backward, const Sequence& input,
                       std::span<const std::size_t> lengths,
                       std::span<const Tensor> forward_hh_masks,
                       std::span<const Tensor> backward_hh_masks) {
  const std::size_t b = input.batch;
  LayerOutput fwd =
      forward.Forward(tape, input, LstmState::Zeros(b, forward.hidden_size()),
                      forward_hh_masks);
  Sequence reversed = ReverseWithinLengths(input, lengths);
  LayerOutput bwd = backward.Forward(
      tape, reversed, LstmState::Zeros(b, backward.hidden_size()),
      backward_hh_masks);
  Sequence restored = ReverseWithinLengths(bwd.output, lengths);
  const Var parts[] = {fwd.output.data, restored.data};
  return {ConcatColumns(parts), input.steps, b};
}

}  // namespace sparseseq
