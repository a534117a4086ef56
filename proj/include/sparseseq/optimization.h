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

#ifndef SPARSESEQ_OPTIMIZATION_H_
#define SPARSESEQ_OPTIMIZATION_H_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sparseseq/autodiff.h"
#include "sparseseq/tensor.h"

namespace sparseseq {

// Updates parameters from their .grad fields. Slots are bound to parameter
// positions on the first step; later steps must pass the same list.
class Optimizer {
 public:
  virtual ~Optimizer() = default;

  // Throws DivergenceError before touching anything if a gradient is not
  // finite.
  void Step(std::span<Parameter* const> params, double lr);
  std::int64_t steps() const { return steps_; }
  // Flat copy of every slot, for checkpoints and replay tests.
  virtual std::vector<const Tensor*> Slots() const = 0;

 protected:
  virtual void Init(std::span<Parameter* const> params) = 0;
  virtual void Update(std::span<Parameter* const> params, double lr) = 0;

  std::int64_t steps_ = 0;

 private:
  bool initialized_ = false;
  std::size_t num_params_ = 0;
};

// v <- mu * v + g;  p <- p - lr * v.
class SgdMomentum : public Optimizer {
 public:
  explicit SgdMomentum(double momentum = 0.9) : momentum_(momentum) {}
  std::vector<const Tensor*> Slots() const override;

 protected:
  void Init(std::span<Parameter* const> params) override;
  void Update(std::span<Parameter* const> params, double lr) override;

 private:
  double momentum_;
  std::vector<Tensor> velocity_;
};

// Bias-corrected first/second moment update.
class Adam : public Optimizer {
 public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}
  std::vector<const Tensor*> Slots() const override;

 protected:
  void Init(std::span<Parameter* const> params) override;
  void Update(std::span<Parameter* const> params, double lr) override;

 private:
  double beta1_, beta2_, eps_;
  std::vector<Tensor> m_, v_;
};

// "sgd" (momentum 0.9 unless given) or "adam".
std::unique_ptr<Optimizer> MakeOptimizer(const std::string& name,
                                         double momentum = 0.9);

// lr0 * factor^epoch. Throws std::invalid_argument unless 0 < factor <= 1.
double ExpDecay(double lr0, double factor, int epoch);

double GlobalGradNorm(std::span<Parameter* const> params);

// Rescales all gradients so their global norm is at most max_norm. Returns
// the norm before clipping. max_norm <= 0 disables clipping.
double ClipGradients(std::span<Parameter* const> params, double max_norm);

}  // namespace sparseseq

#endif  // SPARSESEQ_OPTIMIZATION_H_
