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

// Checkpoint directory layout:
//   manifest.txt  version tag, gate order, task, every layer's serialized
//                 sparsity plan, and one line per parameter with its shape
//                 and element offset into params.bin
//   params.bin    all parameter values as little-endian float64, in
//                 manifest order

#ifndef SPARSESEQ_CHECKPOINT_H_
#define SPARSESEQ_CHECKPOINT_H_

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sparseseq/autodiff.h"
#include "sparseseq/sparsity_plan.h"

namespace sparseseq {

inline constexpr const char* kCheckpointVersion = "sparseseq-checkpoint-v1";

using NamedPlans = std::vector<std::pair<std::string, RecurrentSparsityPlan>>;

// Creates `dir` if needed. Throws DataError on I/O failure.
void WriteCheckpoint(const std::string& dir, const std::string& task,
                     const NamedPlans& plans,
                     std::span<Parameter* const> params);

// Fills `params` (matched by name) from `dir`. Throws DataError when the
// version, task, plans, parameter names or shapes disagree with the model.
void ReadCheckpoint(const std::string& dir, const std::string& task,
                    const NamedPlans& plans,
                    std::span<Parameter* const> params);

}  // namespace sparseseq

#endif  // SPARSESEQ_CHECKPOINT_H_
