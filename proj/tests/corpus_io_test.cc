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

#include "sparseseq/corpus_io.h"

#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "sparseseq/autodiff.h"
#include "sparseseq/errors.h"

namespace sparseseq {
namespace {

std::vector<std::string> Words(const std::string& text, bool eos = false) {
  std::istringstream in(text);
  return TokenizeText(in, eos);
}

TEST(Tokenize, LinesGetEos) {
  EXPECT_EQ(Words("a b\n\nc\n", true),
            (std::vector<std::string>{"a", "b", "<eos>", "c", "<eos>"}));
  EXPECT_EQ(Words("  a\tb  "), (std::vector<std::string>{"a", "b"}));
  EXPECT_THROW(ReadTokens("/nonexistent/corpus.txt"), DataError);
}

TEST(Vocabulary, FrequencyOrderUp) {
  const auto toks = Words("a a b");
  Vocabulary v = Vocabulary::Build(toks, {.add_eos = false});
  EXPECT_EQ(v.size(), 3u);  // <unk>, a, b
  EXPECT_EQ(v.Id("<unk>"), 0);
  EXPECT_LT(v.Id("a"), v.Id("b"));
  EXPECT_EQ(v.Frequency(v.Id("a")), 2);
  EXPECT_EQ(v.Frequency(v.Id("b")), 1);
}

TEST(Vocabulary, DownReversesNonSpecials) {
  const auto toks = Words("x y y z z z w\n", true);
  Vocabulary up = Vocabulary::Build(toks, {.strategy = OrderStrategy::kUp});
  Vocabulary down = Vocabulary::Build(toks, {.strategy = OrderStrategy::kDown});
  ASSERT_EQ(up.size(), down.size());
  EXPECT_EQ(up.Token(0), "<unk>");
  EXPECT_EQ(down.Token(1), "<eos>");
  const std::size_t s = up.num_specials();
  for (std::size_t i = s; i < up.size(); ++i) {
    EXPECT_EQ(up.Token(i), down.Token(up.size() - 1 - i + s));
  }
  // Ties (x, w both once) keep first-appearance order under up.
  EXPECT_LT(up.Id("x"), up.Id("w"));
  for (std::size_t i = s + 1; i < up.size(); ++i) {
    EXPECT_GE(up.Frequency(i - 1), up.Frequency(i));
  }
}

TEST(Vocabulary, NoneIsSeededPermutation) {
  std::vector<std::string> toks;
  for (int i = 0; i < 200; ++i) toks.push_back("w" + std::to_string(i % 37));
  VocabOptions o{.strategy = OrderStrategy::kNone, .seed = 5};
  Vocabulary a = Vocabulary::Build(toks, o);
  Vocabulary b = Vocabulary::Build(toks, o);
  o.seed = 6;
  Vocabulary c = Vocabulary::Build(toks, o);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.Token(i), b.Token(i));
    differs = differs || a.Token(i) != c.Token(i);
  }
  EXPECT_TRUE(differs);
}

TEST(Vocabulary, OovAndMinCount) {
  const auto train = Words("the cat the dog the rare");
  Vocabulary v = Vocabulary::Build(train, {.min_count = 2, .add_eos = false});
  EXPECT_EQ(v.size(), 2u);
  EXPECT_EQ(v.Id("cat"), Vocabulary::kUnk);
  EXPECT_EQ(v.Frequency(0), 3);
  EXPECT_EQ(v.Id("validation_only"), Vocabulary::kUnk);
  EXPECT_THROW(Vocabulary::Build(std::vector<std::string>{}), DataError);
}

TEST(Vocabulary, RoundTrips) {
  const auto toks = Words("one two two three three three\nfour\n", true);
  Vocabulary v = Vocabulary::Build(toks);
  const auto ids = v.Numericalize(toks);
  EXPECT_EQ(v.Denumericalize(ids), toks);
  std::stringstream buf;
  v.Write(buf);
  Vocabulary r = Vocabulary::Read(buf);
  ASSERT_EQ(r.size(), v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_EQ(r.Token(i), v.Token(i));
    EXPECT_EQ(r.Frequency(i), v.Frequency(i));
  }
  EXPECT_EQ(r.num_specials(), 2u);
}

TEST(LmBatches, ConstructedExample) {
  std::vector<int> ids(10);
  for (int i = 0; i < 10; ++i) ids[i] = i;
  const auto batches = MakeLmBatches(ids, 2, 2);
  ASSERT_EQ(batches.size(), 2u);
  // Time-major: [t0 s0, t0 s1, t1 s0, t1 s1].
  EXPECT_EQ(batches[0].inputs, (std::vector<int>{0, 5, 1, 6}));
  EXPECT_EQ(batches[0].targets, (std::vector<int>{1, 6, 2, 7}));
  EXPECT_EQ(batches[1].inputs, (std::vector<int>{2, 7, 3, 8}));
  EXPECT_EQ(batches[1].targets, (std::vector<int>{3, 8, 4, 9}));
}

TEST(LmBatches, CountsAndReconstruction) {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t batch = 1 + gen() % 6;
    const std::size_t n = 2 * batch + gen() % 300;
    const std::size_t bptt = 1 + gen() % 12;
    std::vector<int> ids(n);
    for (auto& x : ids) x = static_cast<int>(gen() % 1000);
    const auto batches = MakeLmBatches(ids, batch, bptt);
    const std::size_t len = n / batch;
    std::size_t targets = 0;
    std::vector<std::vector<int>> streams(batch);
    for (const auto& b : batches) {
      ASSERT_LE(b.steps, bptt);
      targets += b.targets.size();
      for (std::size_t t = 0; t < b.steps; ++t) {
        for (std::size_t s = 0; s < batch; ++s) {
          streams[s].push_back(b.inputs[t * batch + s]);
        }
      }
    }
    EXPECT_EQ(targets, batch * (len - 1));
    EXPECT_LE(n - batch * len, batch * bptt);
    const auto& last = batches.back();
    for (std::size_t s = 0; s < batch; ++s) {
      streams[s].push_back(last.targets[(last.steps - 1) * batch + s]);
      EXPECT_EQ(streams[s], std::vector<int>(ids.begin() + s * len,
                                             ids.begin() + (s + 1) * len));
    }
  }
}

TEST(LmBatches, TooShort) {
  std::vector<int> ids(5);
  EXPECT_THROW(MakeLmBatches(ids, 3, 2), DataError);
}

TEST(TaggedCorpus, ParseSimple) {
  std::istringstream in("the\tDT\ncat\tNN\n\n");
  const auto s = ParseTaggedCorpus(in);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].tokens, (std::vector<std::string>{"the", "cat"}));
  EXPECT_EQ(s[0].tags, (std::vector<std::string>{"DT", "NN"}));
}

TEST(TaggedCorpus, EmptyAndRagged) {
  std::istringstream empty("");
  const auto none = ParseTaggedCorpus(empty);
  EXPECT_TRUE(none.empty());
  EXPECT_THROW(TagSet::Build(none), DataError);
  std::istringstream ragged("the\tDT\ncat NN\n");
  EXPECT_THROW(ParseTaggedCorpus(ragged), DataError);
  std::istringstream three("a\tB\tC\n");
  EXPECT_THROW(ParseTaggedCorpus(three), DataError);
  EXPECT_THROW(LoadTaggedCorpus("/nonexistent.tsv"), DataError);
}

TEST(TaggedCorpus, WriteReadRoundTrip) {
  std::mt19937_64 gen(2);
  std::vector<TaggedSentence> sents(100);
  for (auto& s : sents) {
    const std::size_t n = 1 + gen() % 15;
    for (std::size_t i = 0; i < n; ++i) {
      s.tokens.push_back("w" + std::to_string(gen() % 500));
      s.tags.push_back("T" + std::to_string(gen() % 12));
    }
  }
  std::stringstream buf;
  WriteTaggedCorpus(buf, sents);
  const auto back = ParseTaggedCorpus(buf);
  ASSERT_EQ(back.size(), sents.size());
  for (std::size_t i = 0; i < sents.size(); ++i) {
    EXPECT_EQ(back[i].tokens, sents[i].tokens);
    EXPECT_EQ(back[i].tags, sents[i].tags);
  }
}

TEST(TaggedCorpus, UnknownTagBucketAndStats) {
  std::istringstream train_in("a\tX\nb\tY\n\nb\tY\n");
  const auto train = ParseTaggedCorpus(train_in);
  TagSet tags = TagSet::Build(train);
  EXPECT_EQ(tags.size(), 2u);
  EXPECT_EQ(tags.unknown_id(), 2);
  EXPECT_EQ(tags.Id("X"), 0);
  EXPECT_EQ(tags.Id("Z"), tags.unknown_id());
  std::vector<std::string> words = {"a", "b", "b"};
  Vocabulary v = Vocabulary::Build(words, {.add_eos = false});
  std::istringstream dev_in("a\tZ\nc\tY\n");
  EncodeStats stats;
  const auto enc = EncodeTagged(ParseTaggedCorpus(dev_in), v, tags, &stats);
  EXPECT_EQ(stats.unknown_tags, 1u);
  EXPECT_EQ(stats.unknown_tokens, 1u);
  EXPECT_EQ(enc[0].tags[0], tags.unknown_id());
}

TEST(TagBatches, PaddingAndOrder) {
  std::vector<EncodedSentence> s = {{{1, 2, 3}, {0, 1, 0}},
                                    {{4}, {1}},
                                    {{5, 6}, {0, 0}}};
  const std::vector<std::size_t> order = {1, 0, 2};
  const auto b = MakeTagBatches(s, 2, order);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b[0].steps, 3u);
  EXPECT_EQ(b[0].lengths, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(b[0].tokens, (std::vector<int>{4, 1, 0, 2, 0, 3}));
  EXPECT_EQ(b[0].targets,
            (std::vector<int>{1, 0, kIgnoreTarget, 1, kIgnoreTarget, 0}));
  EXPECT_EQ(b[1].batch, 1u);
}

}  // namespace
}  // namespace sparseseq
