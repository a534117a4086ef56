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

#include "sparseseq/regularization.h"

#include <stdexcept>
#include <string>
#include <unordered_map>

#include "sparseseq/errors.h"

namespace sparseseq {
namespace {

void CheckP(double p, const char* what) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw std::invalid_argument(std::string(what) + " must lie in [0, 1), got " +
                                std::to_string(p));
  }
}

}  // namespace

void DropoutSpec::Validate() const {
  CheckP(word_embedding_p, "word_embedding_dropout");
  CheckP(variational_p, "variational_dropout");
  CheckP(weight_drop_p, "weight_drop");
}

std::vector<double> WordDropoutScales(std::span<const int> ids, double p,
                                      Rng& rng) {
  CheckP(p, "word_embedding_dropout");
  std::vector<double> out(ids.size(), 1.0);
  if (p == 0.0) return out;
  const double keep = 1.0 / (1.0 - p);
  std::unordered_map<int, double> scale;
  for (std::size_t r = 0; r < ids.size(); ++r) {
    auto [it, fresh] = scale.try_emplace(ids[r], 0.0);
    if (fresh) it->second = rng.Bernoulli(p) ? 0.0 : keep;
    out[r] = it->second;
  }
  return out;
}

Var ScaleRows(Var x, std::span<const double> scales) {
  const Tensor& v = x.value();
  if (v.rows() != scales.size()) {
    throw ShapeError("scale_rows: " + std::to_string(scales.size()) +
                     " factors for " + std::to_string(v.rows()) + " rows");
  }
  Tensor factors(v.shape());
  for (std::size_t r = 0; r < v.rows(); ++r) {
    for (std::size_t c = 0; c < v.cols(); ++c) factors.at(r, c) = scales[r];
  }
  return MulConstant(x, factors);
}

Tensor DropoutMask(std::size_t rows, std::size_t cols, double p, Rng& rng) {
  CheckP(p, "dropout");
  Tensor mask({rows, cols}, 1.0);
  if (p == 0.0) return mask;
  const double keep = 1.0 / (1.0 - p);
  for (double& m : mask.values()) m = rng.Bernoulli(p) ? 0.0 : keep;
  return mask;
}

Sequence ApplyVariationalDropout(const Sequence& seq, const Tensor& mask) {
  if (mask.rows() != seq.batch || mask.cols() != seq.width()) {
    throw ShapeError("variational mask " + mask.ShapeString() +
                     " does not match batch x width");
  }
  Tensor full({seq.steps * seq.batch, seq.width()});
  const std::size_t block = mask.size();
  for (std::size_t t = 0; t < seq.steps; ++t) {
    std::copy_n(mask.data(), block, full.data() + t * block);
  }
  return {MulConstant(seq.data, full), seq.steps, seq.batch};
}

Sequence VariationalDropout(const Sequence& seq, double p, Rng& rng) {
  CheckP(p, "variational_dropout");
  if (p == 0.0) return seq;
  return ApplyVariationalDropout(seq,
                                 DropoutMask(seq.batch, seq.width(), p, rng));
}

Tensor WeightDropMask(std::size_t rows, std::size_t cols, double p, Rng& rng,
                      const Tensor* structural) {
  Tensor mask = DropoutMask(rows, cols, p, rng);
  if (structural != nullptr) {
    if (structural->rows() != rows || structural->cols() != cols) {
      throw ShapeError("structural mask shape mismatch");
    }
    for (std::size_t k = 0; k < mask.size(); ++k) {
      mask[k] *= (*structural)[k];
    }
  }
  return mask;
}

std::vector<Tensor> SampleWeightDrop(const SparseLstmLayer& layer, double p,
                                     Rng& rng) {
  CheckP(p, "weight_drop");
  std::vector<Tensor> out;
  if (p == 0.0) return out;
  for (const auto& c : layer.components()) {
    out.push_back(
        WeightDropMask(c.w_hh.value.rows(), c.w_hh.value.cols(), p, rng));
  }
  return out;
}

std::vector<std::vector<Tensor>> SampleWeightDrop(const LstmStack& stack,
                                                  double p, Rng& rng) {
  CheckP(p, "weight_drop");
  std::vector<std::vector<Tensor>> out;
  if (p == 0.0) return out;
  for (std::size_t n = 0; n < stack.size(); ++n) {
    out.push_back(SampleWeightDrop(stack.layer(n), p, rng));
  }
  return out;
}

}  // namespace sparseseq
