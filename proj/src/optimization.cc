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

#include "sparseseq/optimization.h"

#include <cmath>
#include <stdexcept>

#include "sparseseq/errors.h"

namespace sparseseq {

void Optimizer::Step(std::span<Parameter* const> params, double lr) {
  for (const Parameter* p : params) {
    if (!p->grad.AllFinite()) {
      throw DivergenceError("non-finite gradient in '" + p->name + "'");
    }
  }
  if (!initialized_) {
    Init(params);
    num_params_ = params.size();
    initialized_ = true;
  } else if (params.size() != num_params_) {
    throw std::invalid_argument("optimizer called with a different parameter "
                                "list");
  }
  ++steps_;
  Update(params, lr);
}

std::vector<const Tensor*> SgdMomentum::Slots() const {
  std::vector<const Tensor*> out;
  for (const Tensor& v : velocity_) out.push_back(&v);
  return out;
}

void SgdMomentum::Init(std::span<Parameter* const> params) {
  for (const Parameter* p : params) velocity_.emplace_back(p->value.shape());
}

void SgdMomentum::Update(std::span<Parameter* const> params, double lr) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto v = velocity_[i].matrix();
    v = momentum_ * v + params[i]->grad.matrix();
    params[i]->value.matrix() -= lr * v;
  }
}

std::vector<const Tensor*> Adam::Slots() const {
  std::vector<const Tensor*> out;
  for (const Tensor& t : m_) out.push_back(&t);
  for (const Tensor& t : v_) out.push_back(&t);
  return out;
}

void Adam::Init(std::span<Parameter* const> params) {
  for (const Parameter* p : params) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void Adam::Update(std::span<Parameter* const> params, double lr) {
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(beta1_, t);
  const double c2 = 1.0 - std::pow(beta2_, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto g = params[i]->grad.matrix().array();
    auto m = m_[i].matrix().array();
    auto v = v_[i].matrix().array();
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g * g;
    params[i]->value.matrix().array() -=
        lr * (m / c1) / ((v / c2).sqrt() + eps_);
  }
}

std::unique_ptr<Optimizer> MakeOptimizer(const std::string& name,
                                         double momentum) {
  if (name == "sgd") return std::make_unique<SgdMomentum>(momentum);
  if (name == "adam") return std::make_unique<Adam>();
  throw std::invalid_argument("unknown optimizer '" + name +
                              "' (expected sgd or adam)");
}

double ExpDecay(double lr0, double factor, int epoch) {
  if (!(factor > 0.0 && factor <= 1.0)) {
    throw std::invalid_argument("decay factor must lie in (0, 1]");
  }
  return lr0 * std::pow(factor, epoch);
}

double GlobalGradNorm(std::span<Parameter* const> params) {
  double sq = 0.0;
  for (const Parameter* p : params) sq += p->grad.SquaredNorm();
  return std::sqrt(sq);
}

double ClipGradients(std::span<Parameter* const> params, double max_norm) {
  const double norm = GlobalGradNorm(params);
  if (!std::isfinite(norm)) {
    throw DivergenceError("non-finite gradient norm");
  }
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (Parameter* p : params) p->grad.matrix() *= scale;
  }
  return norm;
}

}  // namespace sparseseq
