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

// Frequency-ordered sparse word embeddings.
//
// Embedding dimensions are grouped into bins of widths kappa_m. Bin m is
// trainable for the round(V * alpha^m) most frequent words, so frequent words
// get long trainable prefixes and rare words short ones. Alpha is chosen so
// the overall density (1/k) * sum_m kappa_m * alpha^m hits a target.

#ifndef SPARSESEQ_SPARSE_EMBEDDING_H_
#define SPARSESEQ_SPARSE_EMBEDDING_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sparseseq/autodiff.h"
#include "sparseseq/rng.h"
#include "sparseseq/tensor.h"

namespace sparseseq {

// k bins of width one.
std::vector<std::size_t> PerDimensionBins(std::size_t k);
// `num_bins` bins covering k; the first k % num_bins get one extra column.
std::vector<std::size_t> UniformBins(std::size_t k, std::size_t num_bins);

// Density (1/k) * sum_m kappa_m * alpha^m.
double BinnedDensity(double alpha, std::span<const std::size_t> bin_widths);

// Bisection for alpha in (1e-9, 1] to absolute tolerance 1e-10. Throws
// InfeasibleError when delta > 1 or delta < kappa_0 / k, and
// std::invalid_argument when the widths do not sum to k.
double SolveAlpha(std::size_t k, double delta,
                  std::span<const std::size_t> bin_widths);

struct EmbeddingAllocation {
  std::size_t vocab_size = 0;
  std::size_t k = 0;
  double delta = 1.0;
  double alpha = 1.0;
  std::vector<std::size_t> bin_widths;
  // Number of (most frequent) words that own each bin. Non-increasing,
  // bin 0 always covers the whole vocabulary.
  std::vector<std::size_t> bin_word_counts;
  // Trainable prefix length of the word at each frequency rank.
  std::vector<std::size_t> lengths;

  std::int64_t TotalParams() const;
  double RealizedDensity() const;
};

// Per-bin counts round(V * alpha^m), then compensated so the parameter total
// lands as close to round(delta * k * V) as the bin widths allow.
EmbeddingAllocation AllocateLengths(std::size_t vocab_size, std::size_t k,
                                    double alpha, double delta,
                                    std::span<const std::size_t> bin_widths);
// SolveAlpha followed by AllocateLengths.
EmbeddingAllocation AllocateForDensity(std::size_t vocab_size, std::size_t k,
                                       double delta,
                                       std::span<const std::size_t> bin_widths);

enum class OrderStrategy { kUp, kDown, kNone };
OrderStrategy ParseOrderStrategy(const std::string& name);
std::string OrderStrategyName(OrderStrategy s);

// Maps frequency rank -> word id. kUp sorts by descending frequency with ties
// kept in id order, kDown is its reverse, kNone is a seeded shuffle.
std::vector<int> ApplyOrderStrategy(std::span<const std::int64_t> frequencies,
                                    OrderStrategy strategy,
                                    std::uint64_t seed = 0);

// word_rank,frequency,length rows in rank order. `rank_to_word` and
// `frequencies` (indexed by word id) supply the frequency column.
void WriteAllocationCsv(std::ostream& out, const EmbeddingAllocation& alloc,
                        std::span<const int> rank_to_word,
                        std::span<const std::int64_t> frequencies);

// Embedding table whose entries past each word's trainable prefix are
// structural zeros. The table enters the tape through a constant 0/1 mask, so
// masked entries never receive gradient and stay exactly zero under any
// optimizer step that maps zero gradient history to a zero update.
class SparseEmbedding {
 public:
  // `rank_to_word` is the output of ApplyOrderStrategy. Trainable entries are
  // drawn from U(-init_scale, init_scale).
  SparseEmbedding(std::string name, const EmbeddingAllocation& alloc,
                  std::span<const int> rank_to_word, double init_scale,
                  Rng& rng);

  std::size_t vocab_size() const { return word_lengths_.size(); }
  std::size_t dim() const { return mask_.cols(); }
  // Trainable prefix length per word id.
  const std::vector<std::size_t>& word_lengths() const {
    return word_lengths_;
  }
  const Tensor& mask() const { return mask_; }
  Parameter& table() { return table_; }
  const Parameter& table() const { return table_; }
  std::int64_t NumTrainable() const;

  // Masked table as a tape node; reuse it within a pass (lookup and a tied
  // decoder share one node).
  Var MaskedTable(Tape& tape);
  // Rows for `ids` from a MaskedTable node. Throws std::out_of_range on a
  // bad id.
  static Var Lookup(Var masked_table, std::span<const int> ids);
  // Convenience: MaskedTable + Lookup.
  Var Lookup(Tape& tape, std::span<const int> ids);
  // Untracked k-vector for one word.
  std::vector<double> LookupValue(int word) const;

  // Re-zeroes masked entries, e.g. after loading values from elsewhere.
  void ApplyMask();

 private:
  Parameter table_;
  Tensor mask_;
  std::vector<std::size_t> word_lengths_;
};

}  // namespace sparseseq

#endif  // SPARSESEQ_SPARSE_EMBEDDING_H_
