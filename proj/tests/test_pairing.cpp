// tests/test_pairing.cpp

// Copyright 2026  awelab authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "awe/pairing.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <set>

namespace awe {
namespace {

using awe::testing::TempDir;

Corpus labelled(int vocab, int tokens, std::uint64_t seed = 3) {
  SynthSpec s;
  s.seed = seed;
  s.languages = {{"xx", vocab, 0, 0.0}};
  s.speakers_per_language = 2;
  s.tokens_per_type = tokens;
  return generate_synthetic_corpus(s);
}

// One utterance of `n` words with positions 0..n-1.
Corpus one_utterance(int n) {
  std::vector<Segment> segs;
  for (int i = 0; i < n; ++i)
    segs.push_back({"u_" + std::to_string(i), "xx", "s", "w" + std::to_string(i), "u", i,
                    {2 * i, 2 * i + 2}, FrameMatrix::Ones(2, 2)});
  return Corpus(std::move(segs), Split::train);
}

TEST(PositivePairs, SingleTypeThreeTokens) {
  const Corpus c = labelled(1, 3);
  const PairSet p = build_positive_pairs(c, std::nullopt, 1);
  EXPECT_EQ(p.pairs.size(), 6u);
  EXPECT_EQ(p.unordered().size(), 3u);
  EXPECT_EQ(p.source, PairSource::ground_truth);
}

TEST(PositivePairs, CountAndLabelAgreement) {
  const Corpus c = labelled(5, 3);
  const PairSet p = build_positive_pairs(c, std::nullopt, 1);
  EXPECT_EQ(p.unordered().size(), 15u);
  std::set<IdPair> all(p.pairs.begin(), p.pairs.end());
  for (const IdPair& q : p.pairs) {
    EXPECT_NE(q.first, q.second);
    EXPECT_EQ(c[c.index_of(q.first)].word_label, c[c.index_of(q.second)].word_label);
    EXPECT_TRUE(all.count({q.second, q.first}));
  }
  EXPECT_EQ(pair_precision(p, c), 1.0);
}

TEST(PositivePairs, CapIsSeeded) {
  const Corpus c = labelled(5, 3);
  const PairSet a = build_positive_pairs(c, 4, 9), b = build_positive_pairs(c, 4, 9);
  EXPECT_EQ(a.unordered().size(), 4u);
  EXPECT_EQ(a.pairs.size(), 8u);
  EXPECT_EQ(a.pairs, b.pairs);
  EXPECT_NE(build_positive_pairs(c, 4, 10).pairs, a.pairs);
}

TEST(PositivePairs, NoPairsIsAnError) {
  EXPECT_THROW(build_positive_pairs(labelled(4, 1), std::nullopt, 1), DataError);
  EXPECT_THROW(build_positive_pairs(labelled(4, 2).without_labels(), std::nullopt, 1), DataError);
}

TEST(DiscoveredPairs, LoadsAndIgnoresComments) {
  TempDir d("pairs");
  const Corpus c = labelled(3, 2);
  {
    std::ofstream f(d / "p.tsv");
    f << "# discovered\n" << c[0].id << '\t' << c[1].id << '\n' << c[2].id << '\t' << c[3].id << '\n';
  }
  const PairSet p = load_discovered_pairs(d / "p.tsv", c.without_labels());
  EXPECT_EQ(p.pairs.size(), 2u);
  EXPECT_EQ(p.source, PairSource::discovered);
  EXPECT_EQ(p.pairs[1], IdPair(c[2].id, c[3].id));
}

TEST(DiscoveredPairs, UnknownIdNamesTheLine) {
  TempDir d("pairs");
  const Corpus c = labelled(3, 2);
  {
    std::ofstream f(d / "p.tsv");
    f << c[0].id << '\t' << c[1].id << "\n# x\n" << c[0].id << "\tghost\n";
  }
  try {
    load_discovered_pairs(d / "p.tsv", c);
    FAIL();
  } catch (const DataError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find(":3"), std::string::npos) << what;
    EXPECT_NE(what.find("ghost"), std::string::npos) << what;
  }
}

TEST(DiscoveredPairs, SimulatedPrecision) {
  const Corpus c = labelled(30, 8, 5);
  TempDir d("noisy");
  const PairSet sim = simulate_discovered_pairs(c, 400, 0.7, 2);
  EXPECT_EQ(sim.pairs.size(), 400u);
  write_pairs_file(sim, d / "p.tsv");
  const PairSet back = load_discovered_pairs(d / "p.tsv", c.without_labels());
  EXPECT_EQ(back.pairs, sim.pairs);
  // Binomial standard error at n = 400 is about 0.023.
  EXPECT_NEAR(pair_precision(back, c), 0.7, 3 * 0.023);
  EXPECT_EQ(simulate_discovered_pairs(c, 400, 0.7, 2).pairs, sim.pairs);
}

TEST(ContextPairs, HandCounts) {
  const ContextPairSet p = build_context_pairs(one_utterance(3), 2);
  EXPECT_EQ(p.pairs.size(), 6u);
  EXPECT_TRUE(build_context_pairs(one_utterance(1), 3).pairs.empty());
  EXPECT_THROW(build_context_pairs(one_utterance(3), 0), UsageError);
}

TEST(ContextPairs, WindowScanOracle) {
  const Corpus c = one_utterance(12);
  const ContextPairSet p = build_context_pairs(c, 3);
  std::size_t expected = 0;
  for (int t = 0; t < 12; ++t)
    for (int u = 0; u < 12; ++u)
      if (u != t && std::abs(u - t) <= 3) ++expected;
  EXPECT_EQ(p.pairs.size(), expected);
  std::multiset<IdPair> ms(p.pairs.begin(), p.pairs.end());
  for (const IdPair& q : p.pairs) {
    EXPECT_EQ(ms.count({q.second, q.first}), ms.count(q));
    const Segment& a = c[c.index_of(q.first)];
    const Segment& b = c[c.index_of(q.second)];
    EXPECT_EQ(a.utterance_id, b.utterance_id);
    EXPECT_GE(std::abs(a.position - b.position), 1);
    EXPECT_LE(std::abs(a.position - b.position), 3);
  }
}

std::vector<IdPair> disjoint_pairs(int n) {
  std::vector<IdPair> v;
  for (int i = 0; i < n; ++i) v.emplace_back("a" + std::to_string(i), "b" + std::to_string(i));
  return v;
}

TEST(Batches, CountAndDeterminism) {
  const auto b = build_contrastive_batches(disjoint_pairs(10), 5, 1);
  EXPECT_EQ(b.size(), 2u);
  const auto again = build_contrastive_batches(disjoint_pairs(10), 5, 1);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_EQ(b[i].positive_pairs, again[i].positive_pairs);
  EXPECT_EQ(build_contrastive_batches(disjoint_pairs(11), 5, 1).size(), 2u);
  EXPECT_THROW(build_contrastive_batches(disjoint_pairs(3), 5, 1), DataError);
  EXPECT_THROW(build_contrastive_batches(disjoint_pairs(3), 1, 1), UsageError);
}

TEST(Batches, DistinctIdsAndNoRepeatedPair) {
  const Corpus c = labelled(6, 5, 8);
  const PairSet p = build_positive_pairs(c, std::nullopt, 1);
  std::size_t checked = 0;
  for (std::uint64_t seed = 0; checked < 1000; ++seed) {
    const auto batches = build_contrastive_batches(p.pairs, 4, seed);
    std::set<IdPair> seen;
    for (const auto& b : batches) {
      ASSERT_EQ(b.positive_pairs.size(), 4u);
      std::set<std::string> ids;
      for (const IdPair& q : b.positive_pairs) {
        ids.insert(q.first);
        ids.insert(q.second);
        EXPECT_TRUE(seen.insert(q).second);
      }
      EXPECT_EQ(ids.size(), 8u);
      ++checked;
    }
  }
}

}  // namespace
}  // namespace awe
