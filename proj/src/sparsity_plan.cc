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

#include "sparseseq/sparsity_plan.h"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "sparseseq/errors.h"

namespace sparseseq {

void RecurrentSparsityPlan::Validate() const {
  if (input_size == 0 || hidden_size == 0) {
    throw std::invalid_argument("plan sizes must be positive");
  }
  if (components.empty()) throw std::invalid_argument("plan has no components");
  std::size_t total = 0;
  for (const ComponentSpec& c : components) {
    if (c.output_width == 0 || c.input_width == 0) {
      throw std::invalid_argument("component widths must be positive");
    }
    if (c.input_offset + c.input_width > input_size) {
      throw std::invalid_argument(
          "component window [" + std::to_string(c.input_offset) + ", " +
          std::to_string(c.input_offset + c.input_width) +
          ") exceeds input size " + std::to_string(input_size));
    }
    total += c.output_width;
  }
  if (total != hidden_size) {
    throw std::invalid_argument("component outputs sum to " +
                                std::to_string(total) + ", expected " +
                                std::to_string(hidden_size));
  }
}

std::size_t RecurrentSparsityPlan::OutputOffset(std::size_t n) const {
  std::size_t offset = 0;
  for (std::size_t j = 0; j < n; ++j) offset += components.at(j).output_width;
  return offset;
}

bool RecurrentSparsityPlan::IsDense() const {
  return components.size() == 1 && components[0].input_offset == 0 &&
         components[0].input_width == input_size;
}

std::vector<std::size_t> UniformSegments(std::size_t hidden_size,
                                         std::size_t num_segments) {
  if (num_segments == 0 || num_segments > hidden_size) {
    throw std::invalid_argument("need 1 <= N <= h, got N=" +
                                std::to_string(num_segments) +
                                ", h=" + std::to_string(hidden_size));
  }
  std::vector<std::size_t> out(num_segments, hidden_size / num_segments);
  for (std::size_t n = 0; n < hidden_size % num_segments; ++n) ++out[n];
  return out;
}

RecurrentSparsityPlan PlanRecurrentLayer(
    std::size_t input_size, std::size_t hidden_size, std::size_t num_segments,
    double gamma, std::optional<std::span<const std::size_t>> segment_lengths) {
  if (input_size == 0 || hidden_size == 0) {
    throw std::invalid_argument("input and hidden sizes must be positive");
  }
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("gamma must lie in (0, 1], got " +
                                std::to_string(gamma));
  }
  std::vector<std::size_t> lengths;
  if (segment_lengths) {
    lengths.assign(segment_lengths->begin(), segment_lengths->end());
    if (lengths.size() != num_segments) {
      throw std::invalid_argument("expected " + std::to_string(num_segments) +
                                  " segment lengths");
    }
    if (std::accumulate(lengths.begin(), lengths.end(), std::size_t{0}) !=
        hidden_size) {
      throw std::invalid_argument("segment lengths do not sum to h");
    }
  } else {
    lengths = UniformSegments(hidden_size, num_segments);
  }
  const long long width = std::llround(gamma * static_cast<double>(input_size));
  if (width < 1) {
    throw InfeasibleError("gamma * i rounds to an empty input window");
  }
  const auto w = static_cast<std::size_t>(width);

  RecurrentSparsityPlan plan;
  plan.input_size = input_size;
  plan.hidden_size = hidden_size;
  const double slack = static_cast<double>(input_size - w);
  for (std::size_t n = 0; n < num_segments; ++n) {
    ComponentSpec c;
    c.input_width = w;
    c.output_width = lengths[n];
    c.input_offset =
        num_segments == 1
            ? 0
            : static_cast<std::size_t>(std::llround(
                  static_cast<double>(n) * slack /
                  static_cast<double>(num_segments - 1)));
    plan.components.push_back(c);
  }
  plan.Validate();
  return plan;
}

RecurrentSparsityPlan DensePlan(std::size_t input_size,
                                std::size_t hidden_size) {
  return PlanRecurrentLayer(input_size, hidden_size, 1, 1.0);
}

std::int64_t CountLstmParams(const RecurrentSparsityPlan& plan) {
  std::int64_t total = 0;
  for (const ComponentSpec& c : plan.components) {
    const auto out = static_cast<std::int64_t>(c.output_width);
    const auto in = static_cast<std::int64_t>(c.input_width);
    total += 4 * (out * in + out * out + 2 * out);
  }
  return total;
}

std::int64_t CountDenseLstmParams(std::size_t input_size,
                                  std::size_t hidden_size) {
  return CountLstmParams(DensePlan(input_size, hidden_size));
}

double SolveGammaForEqualParams(std::size_t dense_input,
                                std::size_t dense_hidden,
                                std::size_t sparse_input,
                                std::size_t sparse_hidden,
                                std::size_t num_segments) {
  if (num_segments == 0 || sparse_input == 0 || sparse_hidden == 0) {
    throw std::invalid_argument("sizes and segment count must be positive");
  }
  const double id = static_cast<double>(dense_input);
  const double hd = static_cast<double>(dense_hidden);
  const double is = static_cast<double>(sparse_input);
  const double hs = static_cast<double>(sparse_hidden);
  const double n = static_cast<double>(num_segments);
  const double gamma =
      (hd * id + hd * hd + 2.0 * hd - hs * hs / n - 2.0 * hs) / (hs * is);
  if (gamma <= 0.0) {
    throw InfeasibleError(
        "sparse layer exceeds the dense budget even with empty input windows "
        "(gamma=" + std::to_string(gamma) + ")");
  }
  if (gamma > 1.0) {
    throw InfeasibleError(
        "sparse layer cannot reach the dense budget with full input windows "
        "(gamma=" + std::to_string(gamma) + ")");
  }
  return gamma;
}

RecurrentSparsityPlan PlanMatchingDense(std::size_t input_size,
                                        std::size_t hidden_size,
                                        std::size_t num_segments,
                                        std::size_t dense_input,
                                        std::size_t dense_hidden) {
  const double gamma = SolveGammaForEqualParams(
      dense_input, dense_hidden, input_size, hidden_size, num_segments);
  return PlanRecurrentLayer(input_size, hidden_size, num_segments, gamma);
}

PlanMasks ExpandPlanToMasks(const RecurrentSparsityPlan& plan) {
  plan.Validate();
  PlanMasks masks{Tensor({plan.hidden_size, plan.hidden_size}),
                  Tensor({plan.hidden_size, plan.input_size})};
  std::size_t row = 0;
  for (const ComponentSpec& c : plan.components) {
    for (std::size_t r = row; r < row + c.output_width; ++r) {
      for (std::size_t j = row; j < row + c.output_width; ++j) {
        masks.hh.at(r, j) = 1.0;
      }
      for (std::size_t j = c.input_offset; j < c.input_offset + c.input_width;
           ++j) {
        masks.hi.at(r, j) = 1.0;
      }
    }
    row += c.output_width;
  }
  return masks;
}

std::string SerializePlan(const RecurrentSparsityPlan& plan) {
  std::ostringstream out;
  out << "recurrent_plan\n"
      << "input_size " << plan.input_size << "\n"
      << "hidden_size " << plan.hidden_size << "\n";
  for (std::size_t n = 0; n < plan.components.size(); ++n) {
    const ComponentSpec& c = plan.components[n];
    out << "component " << n << " input_offset " << c.input_offset
        << " input_width " << c.input_width << " output_width "
        << c.output_width << "\n";
  }
  out << "end\n";
  return out.str();
}

RecurrentSparsityPlan ParsePlan(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  auto fail = [](const std::string& why) -> RecurrentSparsityPlan {
    throw DataError("malformed recurrent plan: " + why);
  };
  if (!std::getline(in, line) || line != "recurrent_plan") {
    return fail("missing header");
  }
  RecurrentSparsityPlan plan;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string key;
    fields >> key;
    if (key == "end") {
      ended = true;
      break;
    }
    if (key == "input_size") {
      if (!(fields >> plan.input_size)) return fail(line);
    } else if (key == "hidden_size") {
      if (!(fields >> plan.hidden_size)) return fail(line);
    } else if (key == "component") {
      std::size_t index = 0;
      std::string k1, k2, k3;
      ComponentSpec c;
      if (!(fields >> index >> k1 >> c.input_offset >> k2 >> c.input_width >>
            k3 >> c.output_width) ||
          k1 != "input_offset" || k2 != "input_width" ||
          k3 != "output_width" || index != plan.components.size()) {
        return fail(line);
      }
      plan.components.push_back(c);
    } else {
      return fail("unknown key '" + key + "'");
    }
  }
  if (!ended) return fail("missing end marker");
  try {
    plan.Validate();
  } catch (const std::invalid_argument& e) {
    return fail(e.what());
  }
  return plan;
}

}  // namespace sparseseq
