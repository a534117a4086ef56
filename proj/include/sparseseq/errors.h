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

#ifndef SPARSESEQ_ERRORS_H_
#define SPARSESEQ_ERRORS_H_

#include <stdexcept>
#include <string>

namespace sparseseq {

// Operand shapes do not agree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A solver or planner was asked for something that has no valid solution
// (gamma outside (0, 1], unreachable embedding density, ...).
class InfeasibleError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed or missing input data (corpus files, configs, checkpoints).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss or gradient.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sparseseq

#endif  // SPARSESEQ_ERRORS_H_
