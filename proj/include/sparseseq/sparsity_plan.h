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

// Layout arithmetic for recurrent layers with predefined sparseness.
//
// A sparse layer splits its h hidden units into N disjoint segments. Segment
// n owns a diagonal block of the recurrent matrix and reads a contiguous
// window of the input, so the layer is exactly N small dense LSTMs running
// side by side with their outputs concatenated. Everything here is pure
// integer/closed-form arithmetic on those shapes.

#ifndef SPARSESEQ_SPARSITY_PLAN_H_
#define SPARSESEQ_SPARSITY_PLAN_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sparseseq/tensor.h"

namespace sparseseq {

// One dense LSTM component: reads inputs [input_offset, input_offset +
// input_width) and produces output_width hidden units.
struct ComponentSpec {
  std::size_t input_offset = 0;
  std::size_t input_width = 0;
  std::size_t output_width = 0;

  bool operator==(const ComponentSpec&) const = default;
};

struct RecurrentSparsityPlan {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  std::vector<ComponentSpec> components;

  // Throws std::invalid_argument when outputs do not tile [0, hidden_size) or
  // a window leaves [0, input_size).
  void Validate() const;
  std::size_t num_components() const { return components.size(); }
  // First hidden unit owned by component n.
  std::size_t OutputOffset(std::size_t n) const;
  bool IsDense() const;

  bool operator==(const RecurrentSparsityPlan&) const = default;
};

// h split into n segments; the first h % n segments get one extra unit.
std::vector<std::size_t> UniformSegments(std::size_t hidden_size,
                                         std::size_t num_segments);

// Window width round(gamma * input_size); component n's window starts at
// round(n * (input_size - width) / (N - 1)), so the first window starts at 0
// and the last one ends at input_size.
RecurrentSparsityPlan PlanRecurrentLayer(
    std::size_t input_size, std::size_t hidden_size, std::size_t num_segments,
    double gamma,
    std::optional<std::span<const std::size_t>> segment_lengths = {});

// The dense cell: one component covering everything.
RecurrentSparsityPlan DensePlan(std::size_t input_size,
                                std::size_t hidden_size);

// sum_n 4 * (out_n * in_n + out_n^2 + 2 * out_n): four gates, each with an
// input matrix, a recurrent block and two bias vectors.
std::int64_t CountLstmParams(const RecurrentSparsityPlan& plan);
std::int64_t CountDenseLstmParams(std::size_t input_size,
                                  std::size_t hidden_size);

// Window fraction that gives an N-segment (i_s, h_s) layer the parameter
// count of a dense (i_d, h_d) layer:
//   gamma = (h_d*i_d + h_d^2 + 2*h_d - h_s^2/N - 2*h_s) / (h_s*i_s).
// Throws InfeasibleError when gamma <= 0 or gamma > 1.
double SolveGammaForEqualParams(std::size_t dense_input, std::size_t dense_hidden,
                                std::size_t sparse_input,
                                std::size_t sparse_hidden,
                                std::size_t num_segments);

// Solve + plan in one step: a uniform N-segment layer whose count matches the
// dense (dense_input, dense_hidden) layer up to integer rounding.
RecurrentSparsityPlan PlanMatchingDense(std::size_t input_size,
                                        std::size_t hidden_size,
                                        std::size_t num_segments,
                                        std::size_t dense_input,
                                        std::size_t dense_hidden);

// 0/1 masks of the trainable entries of one gate's W_hh [h x h] and
// W_hi [h x i].
struct PlanMasks {
  Tensor hh;
  Tensor hi;
};
PlanMasks ExpandPlanToMasks(const RecurrentSparsityPlan& plan);

// Human-readable document:
//   recurrent_plan
//   input_size 1150
//   hidden_size 1150
//   component 0 input_offset 0 input_width 344 output_width 230
//   ...
//   end
std::string SerializePlan(const RecurrentSparsityPlan& plan);
// Throws DataError on malformed text.
RecurrentSparsityPlan ParsePlan(std::string_view text);

}  // namespace sparseseq

#endif  // SPARSESEQ_SPARSITY_PLAN_H_
