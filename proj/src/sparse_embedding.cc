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

#include "sparseseq/sparse_embedding.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "sparseseq/errors.h"

namespace sparseseq {
namespace {

std::size_t SumWidths(std::span<const std::size_t> widths) {
  return std::accumulate(widths.begin(), widths.end(), std::size_t{0});
}

void CheckBins(std::size_t k, std::span<const std::size_t> widths) {
  if (k == 0) throw std::invalid_argument("embedding size must be positive");
  if (widths.empty()) throw std::invalid_argument("no embedding bins");
  for (std::size_t w : widths) {
    if (w == 0) throw std::invalid_argument("bin widths must be positive");
  }
  if (SumWidths(widths) != k) {
    throw std::invalid_argument("bin widths sum to " +
                                std::to_string(SumWidths(widths)) +
                                ", expected " + std::to_string(k));
  }
}

std::int64_t ParamTotal(std::span<const std::size_t> widths,
                        std::span<const std::size_t> counts) {
  std::int64_t total = 0;
  for (std::size_t m = 0; m < widths.size(); ++m) {
    total += static_cast<std::int64_t>(widths[m] * counts[m]);
  }
  return total;
}

}  // namespace

std::vector<std::size_t> PerDimensionBins(std::size_t k) {
  return std::vector<std::size_t>(k, 1);
}

std::vector<std::size_t> UniformBins(std::size_t k, std::size_t num_bins) {
  if (num_bins == 0 || num_bins > k) {
    throw std::invalid_argument("need 1 <= bins <= k");
  }
  std::vector<std::size_t> out(num_bins, k / num_bins);
  for (std::size_t m = 0; m < k % num_bins; ++m) ++out[m];
  return out;
}

double BinnedDensity(double alpha, std::span<const std::size_t> bin_widths) {
  double sum = 0.0;
  double power = 1.0;
  for (std::size_t w : bin_widths) {
    sum += static_cast<double>(w) * power;
    power *= alpha;
  }
  return sum / static_cast<double>(SumWidths(bin_widths));
}

double SolveAlpha(std::size_t k, double delta,
                  std::span<const std::size_t> bin_widths) {
  CheckBins(k, bin_widths);
  const double min_density =
      static_cast<double>(bin_widths[0]) / static_cast<double>(k);
  if (!(delta <= 1.0)) {
    throw InfeasibleError("embedding density must be at most 1");
  }
  if (!(delta >= min_density)) {
    throw InfeasibleError("embedding density " + std::to_string(delta) +
                          " is below the minimum " +
                          std::to_string(min_density) +
                          " set by the first bin");
  }
  if (delta == 1.0) return 1.0;
  double lo = 1e-9, hi = 1.0;
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (BinnedDensity(mid, bin_widths) < delta) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::int64_t EmbeddingAllocation::TotalParams() const {
  return ParamTotal(bin_widths, bin_word_counts);
}

double EmbeddingAllocation::RealizedDensity() const {
  return static_cast<double>(TotalParams()) /
         (static_cast<double>(vocab_size) * static_cast<double>(k));
}

EmbeddingAllocation AllocateLengths(std::size_t vocab_size, std::size_t k,
                                    double alpha, double delta,
                                    std::span<const std::size_t> bin_widths) {
  CheckBins(k, bin_widths);
  if (vocab_size == 0) throw std::invalid_argument("empty vocabulary");
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("alpha must lie in (0, 1]");
  }
  const std::size_t num_bins = bin_widths.size();
  EmbeddingAllocation a;
  a.vocab_size = vocab_size;
  a.k = k;
  a.delta = delta;
  a.alpha = alpha;
  a.bin_widths.assign(bin_widths.begin(), bin_widths.end());
  a.bin_word_counts.resize(num_bins);
  const double v = static_cast<double>(vocab_size);
  for (std::size_t m = 0; m < num_bins; ++m) {
    a.bin_word_counts[m] = static_cast<std::size_t>(
        std::llround(v * std::pow(alpha, static_cast<double>(m))));
  }
  a.bin_word_counts[0] = vocab_size;

  // Rounding compensation. Visit bins 1.. widest first (earlier bin on ties),
  // shifting each one's word count by the remaining deficit over its width
  // while keeping counts non-increasing across bins.
  const auto target = static_cast<std::int64_t>(
      std::llround(delta * v * static_cast<double>(k)));
  std::vector<std::size_t> order(num_bins > 0 ? num_bins - 1 : 0);
  std::iota(order.begin(), order.end(), std::size_t{1});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) {
                     return bin_widths[x] > bin_widths[y];
                   });
  for (std::size_t m : order) {
    const std::int64_t deficit = target - a.TotalParams();
    const auto width = static_cast<std::int64_t>(bin_widths[m]);
    // Round half away from zero.
    std::int64_t shift = (std::abs(deficit) * 2 + width) / (2 * width);
    if (deficit < 0) shift = -shift;
    if (shift == 0) break;
    const auto upper = static_cast<std::int64_t>(a.bin_word_counts[m - 1]);
    const auto lower = m + 1 < num_bins
                           ? static_cast<std::int64_t>(a.bin_word_counts[m + 1])
                           : std::int64_t{0};
    const std::int64_t updated = std::clamp(
        static_cast<std::int64_t>(a.bin_word_counts[m]) + shift, lower, upper);
    a.bin_word_counts[m] = static_cast<std::size_t>(updated);
  }

  a.lengths.assign(vocab_size, 0);
  for (std::size_t m = 0; m < num_bins; ++m) {
    for (std::size_t r = 0; r < a.bin_word_counts[m]; ++r) {
      a.lengths[r] += bin_widths[m];
    }
  }
  return a;
}

EmbeddingAllocation AllocateForDensity(
    std::size_t vocab_size, std::size_t k, double delta,
    std::span<const std::size_t> bin_widths) {
  const double alpha = SolveAlpha(k, delta, bin_widths);
  return AllocateLengths(vocab_size, k, alpha, delta, bin_widths);
}

OrderStrategy ParseOrderStrategy(const std::string& name) {
  if (name == "up") return OrderStrategy::kUp;
  if (name == "down") return OrderStrategy::kDown;
  if (name == "none") return OrderStrategy::kNone;
  throw std::invalid_argument("unknown order strategy '" + name +
                              "' (expected up, down or none)");
}

std::string OrderStrategyName(OrderStrategy s) {
  switch (s) {
    case OrderStrategy::kUp:
      return "up";
    case OrderStrategy::kDown:
      return "down";
    case OrderStrategy::kNone:
      return "none";
  }
  return "?";
}

std::vector<int> ApplyOrderStrategy(std::span<const std::int64_t> frequencies,
                                    OrderStrategy strategy,
                                    std::uint64_t seed) {
  std::vector<int> order(frequencies.size());
  std::iota(order.begin(), order.end(), 0);
  if (strategy == OrderStrategy::kNone) {
    Rng rng(seed);
    rng.Shuffle(order);
    return order;
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return frequencies[a] > frequencies[b];
  });
  if (strategy == OrderStrategy::kDown) std::reverse(order.begin(), order.end());
  return order;
}

void WriteAllocationCsv(std::ostream& out, const EmbeddingAllocation& alloc,
                        std::span<const int> rank_to_word,
                        std::span<const std::int64_t> frequencies) {
  if (rank_to_word.size() != alloc.vocab_size) {
    throw std::invalid_argument("rank_to_word does not match the vocabulary");
  }
  out << "word_rank,frequency,length\n";
  for (std::size_t r = 0; r < alloc.vocab_size; ++r) {
    out << r << ',' << frequencies[static_cast<std::size_t>(rank_to_word[r])]
        << ',' << alloc.lengths[r] << '\n';
  }
}

SparseEmbedding::SparseEmbedding(std::string name,
                                 const EmbeddingAllocation& alloc,
                                 std::span<const int> rank_to_word,
                                 double init_scale, Rng& rng)
    : mask_({alloc.vocab_size, alloc.k}),
      word_lengths_(alloc.vocab_size, 0) {
  if (rank_to_word.size() != alloc.vocab_size) {
    throw std::invalid_argument("rank_to_word does not match the vocabulary");
  }
  std::vector<bool> seen(alloc.vocab_size, false);
  for (std::size_t r = 0; r < alloc.vocab_size; ++r) {
    const int w = rank_to_word[r];
    if (w < 0 || static_cast<std::size_t>(w) >= alloc.vocab_size || seen[w]) {
      throw std::invalid_argument("rank_to_word is not a permutation");
    }
    seen[w] = true;
    word_lengths_[w] = alloc.lengths[r];
  }
  Tensor init({alloc.vocab_size, alloc.k});
  for (std::size_t w = 0; w < alloc.vocab_size; ++w) {
    for (std::size_t j = 0; j < word_lengths_[w]; ++j) {
      mask_.at(w, j) = 1.0;
      init.at(w, j) = rng.Uniform(-init_scale, init_scale);
    }
  }
  table_ = Parameter(std::move(name), std::move(init));
}

std::int64_t SparseEmbedding::NumTrainable() const {
  return static_cast<std::int64_t>(
      std::accumulate(word_lengths_.begin(), word_lengths_.end(),
                      std::size_t{0}));
}

Var SparseEmbedding::MaskedTable(Tape& tape) {
  return MulConstant(tape.Param(table_), mask_);
}

Var SparseEmbedding::Lookup(Var masked_table, std::span<const int> ids) {
  return GatherRows(masked_table, ids);
}

Var SparseEmbedding::Lookup(Tape& tape, std::span<const int> ids) {
  return Lookup(MaskedTable(tape), ids);
}

std::vector<double> SparseEmbedding::LookupValue(int word) const {
  if (word < 0 || static_cast<std::size_t>(word) >= vocab_size()) {
    throw std::out_of_range("word id " + std::to_string(word) +
                            " outside vocabulary of " +
                            std::to_string(vocab_size()));
  }
  std::vector<double> out(dim());
  for (std::size_t j = 0; j < dim(); ++j) {
    out[j] = table_.value.at(word, j) * mask_.at(word, j);
  }
  return out;
}

void SparseEmbedding::ApplyMask() {
  auto v = table_.value.matrix();
  v = v.cwiseProduct(mask_.matrix());
}

}  // namespace sparseseq
