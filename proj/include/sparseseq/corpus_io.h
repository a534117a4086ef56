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

// Corpus reading, vocabularies and batching.

#ifndef SPARSESEQ_CORPUS_IO_H_
#define SPARSESEQ_CORPUS_IO_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sparseseq/sparse_embedding.h"

namespace sparseseq {

inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kEosToken = "<eos>";

// Whitespace tokens of a plain-text file; with `add_eos` each line ends with
// kEosToken. Throws DataError when the file cannot be read.
std::vector<std::string> ReadTokens(const std::string& path,
                                    bool add_eos = true);
std::vector<std::string> TokenizeText(std::istream& in, bool add_eos = true);

struct VocabOptions {
  std::size_t min_count = 1;
  OrderStrategy strategy = OrderStrategy::kUp;
  std::uint64_t seed = 0;  // used by kNone
  bool add_eos = true;
};

// Dense ids with the specials pinned first: <unk> = 0, then <eos> when
// enabled. The remaining tokens are ordered by the strategy over their
// training frequencies, ties in order of first appearance. Embedding lengths
// are assigned by id, so id order is the frequency rank used for allocation.
class Vocabulary {
 public:
  static constexpr int kUnk = 0;

  // Throws DataError on an empty stream.
  static Vocabulary Build(std::span<const std::string> tokens,
                          const VocabOptions& options = {});

  std::size_t size() const { return tokens_.size(); }
  std::size_t num_specials() const { return num_specials_; }
  OrderStrategy strategy() const { return strategy_; }
  // kUnk for unknown tokens.
  int Id(std::string_view token) const;
  bool Contains(std::string_view token) const;
  const std::string& Token(int id) const { return tokens_.at(id); }
  std::int64_t Frequency(int id) const { return freqs_.at(id); }
  const std::vector<std::int64_t>& frequencies() const { return freqs_; }

  std::vector<int> Numericalize(std::span<const std::string> tokens) const;
  std::vector<std::string> Denumericalize(std::span<const int> ids) const;

  // "strategy <name>", "specials <n>", then one "token<TAB>frequency" line
  // per id.
  void Write(std::ostream& out) const;
  static Vocabulary Read(std::istream& in);

 private:
  void Index();

  std::vector<std::string> tokens_;
  std::vector<std::int64_t> freqs_;
  std::unordered_map<std::string, int> ids_;
  std::size_t num_specials_ = 0;
  OrderStrategy strategy_ = OrderStrategy::kUp;
};

// Time-major [steps x batch] id blocks: entry t*batch + b.
struct LmBatch {
  std::vector<int> inputs;
  std::vector<int> targets;
  std::size_t steps = 0;
  std::size_t batch = 0;
};

// Splits `ids` into `batch` equal contiguous streams (tail dropped) and
// walks them in segments of up to `bptt` steps; targets are the next token in
// the same stream. Throws DataError if ids.size() < 2 * batch.
std::vector<LmBatch> MakeLmBatches(std::span<const int> ids,
                                   std::size_t batch, std::size_t bptt);

struct TaggedSentence {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
};

// token<TAB>tag per line, blank line between sentences. Throws DataError on
// a line without exactly one tab or an unreadable file.
std::vector<TaggedSentence> LoadTaggedCorpus(const std::string& path);
std::vector<TaggedSentence> ParseTaggedCorpus(std::istream& in,
                                              const std::string& source = "");
void WriteTaggedCorpus(std::ostream& out,
                       std::span<const TaggedSentence> sentences);

// Tags in order of first appearance in the training split. Tags never seen
// in training map to unknown_id(), one past the last class, so they can be
// scored as errors without adding an output class.
class TagSet {
 public:
  // Throws DataError when `train` is empty.
  static TagSet Build(std::span<const TaggedSentence> train);

  // Number of classes (known tags).
  std::size_t size() const { return tags_.size(); }
  int unknown_id() const { return static_cast<int>(tags_.size()); }
  int Id(std::string_view tag) const;
  const std::string& Tag(int id) const;
  const std::vector<std::string>& tags() const { return tags_; }

 private:
  std::vector<std::string> tags_;
  std::unordered_map<std::string, int> ids_;
};

struct EncodedSentence {
  std::vector<int> tokens;
  std::vector<int> tags;
};

struct EncodeStats {
  std::size_t sentences = 0;
  std::size_t tokens = 0;
  std::size_t unknown_tokens = 0;
  std::size_t unknown_tags = 0;
};

std::vector<EncodedSentence> EncodeTagged(
    std::span<const TaggedSentence> sentences, const Vocabulary& vocab,
    const TagSet& tags, EncodeStats* stats = nullptr);

// Padded time-major batch of sentences. Padding positions carry token 0 and
// target kIgnoreTarget.
struct TagBatch {
  std::vector<int> tokens;
  std::vector<int> targets;
  std::vector<std::size_t> lengths;
  std::size_t steps = 0;
  std::size_t batch = 0;
};

// Consecutive groups of `batch_size` sentences taken in `order` (identity
// when empty); the last batch may be smaller.
std::vector<TagBatch> MakeTagBatches(std::span<const EncodedSentence> sentences,
                                     std::size_t batch_size,
                                     std::span<const std::size_t> order = {});

}  // namespace sparseseq

#endif  // SPARSESEQ_CORPUS_IO_H_
