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

// Tape-based reverse-mode differentiation over dense double tensors.
//
// A Tape records every operation in execution order, so the node list is
// already topologically sorted and Backward() is a single reverse sweep.
// Trainable arrays live outside the tape as Parameters; putting one on a tape
// with Tape::Param() makes gradients accumulate straight into
// Parameter::grad. A tape is meant to live for one forward/backward pass.

#ifndef SPARSESEQ_AUTODIFF_H_
#define SPARSESEQ_AUTODIFF_H_

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sparseseq/tensor.h"

namespace sparseseq {

struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value);

  void ZeroGrad() { grad.Fill(0.0); }
  std::size_t size() const { return value.size(); }

  std::string name;
  Tensor value;
  Tensor grad;
};

class Tape;

// Handle to a node on a tape. Cheap to copy; only valid while its tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Untracked input; receives no gradient.
  Var Constant(Tensor value);
  // Tracked input whose gradient is read back with Grad().
  Var Leaf(Tensor value);
  // Tracked input backed by a Parameter; gradients accumulate into p.grad.
  Var Param(Parameter& p);

  // Records an operation result. The node requires a gradient iff any input
  // does; `backward` is only invoked in that case.
  Var Record(Tensor value, std::initializer_list<Var> inputs,
             BackwardFn backward);
  Var Record(Tensor value, std::span<const Var> inputs, BackwardFn backward);
  // Attaches a backward function after recording, for ops whose adjoint
  // reads their own output. No-op on untracked nodes.
  void SetBackward(Var v, BackwardFn backward);

  const Tensor& Value(Var v) const;
  bool RequiresGrad(Var v) const;
  // Gradient of the last Backward() loss with respect to v. Zero-filled when
  // no gradient reached v.
  const Tensor& Grad(Var v);
  // Mutable accumulator used by backward functions.
  Tensor& GradRef(Var v);

  // Reverse sweep from a scalar loss. Accumulates (+=) into every tracked
  // node, so fan-out contributions add up.
  void Backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Parameter* param = nullptr;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var Push(Node node);
  void Check(Var v) const;

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Differentiable operations. All operands must live on the same tape.

// a[m x k] * b[k x n].
Var MatMul(Var a, Var b);
// a[m x k] * b[n x k]^T. Weights stored as out x in use this form.
Var MatMulTransposed(Var a, Var b);

Var Add(Var a, Var b);
Var Sub(Var a, Var b);
Var Mul(Var a, Var b);
// x[m x n] + bias[n] broadcast over rows.
Var AddRowVector(Var x, Var bias);
Var Sigmoid(Var x);
Var Tanh(Var x);
Var Scale(Var x, double factor);
// Elementwise product with an untracked tensor of the same shape (masks).
Var MulConstant(Var x, const Tensor& c);
// Sum of all entries, as a [1] tensor.
Var Sum(Var x);

Var SliceColumns(Var x, std::size_t begin, std::size_t width);
Var SliceRows(Var x, std::size_t begin, std::size_t count);
Var ConcatColumns(std::span<const Var> parts);
Var ConcatRows(std::span<const Var> parts);
// Rows of table[V x k] selected by ids -> [ids.size() x k].
Var GatherRows(Var table, std::span<const int> ids);

// Target value excluded from SoftmaxCrossEntropy (padding positions).
inline constexpr int kIgnoreTarget = -1;

// Mean negative log-likelihood over rows whose target is not kIgnoreTarget.
// Returns a [1] tensor. Throws std::out_of_range for targets outside
// [0, classes).
Var SoftmaxCrossEntropy(Var logits, std::span<const int> targets);

// Copies the value onto `dst` as a constant, cutting the gradient path.
Var Detach(Var x, Tape& dst);

// ---------------------------------------------------------------------------
// Tape-free helpers for evaluation.

struct CrossEntropyStats {
  double total_nll = 0.0;
  std::size_t count = 0;
  std::size_t correct = 0;  // argmax hits
};

CrossEntropyStats EvaluateLogits(const Tensor& logits,
                                 std::span<const int> targets);
std::vector<int> ArgmaxRows(const Tensor& x);

}  // namespace sparseseq

#endif  // SPARSESEQ_AUTODIFF_H_
