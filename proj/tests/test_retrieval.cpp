// tests/test_retrieval.cpp

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

#include "awe/evaluation.hpp"
#include "awe/nn/losses.hpp"
#include "awe/retrieval.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>

namespace awe {
namespace {

using awe::testing::random_vector;
using awe::testing::TempDir;

Embedding mean_frames(const FrameMatrix& x) { return x.colwise().mean().transpose(); }

// One word token: constant frames equal to `v`.
struct Token {
  std::string label;
  Eigen::VectorXd v;
  int frames = 4;
};

Corpus make_corpus(const std::vector<std::vector<Token>>& utts, double noise = 0.0,
                   std::uint64_t seed = 1) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, noise);
  std::vector<Segment> segs;
  for (std::size_t u = 0; u < utts.size(); ++u) {
    int offset = 0;
    for (std::size_t p = 0; p < utts[u].size(); ++p) {
      const Token& t = utts[u][p];
      Segment s;
      s.id = "u" + std::to_string(u) + "_" + std::to_string(p);
      s.language = "xx";
      s.speaker = "s" + std::to_string(u % 3);
      s.word_label = t.label;
      s.utterance_id = "u" + std::to_string(u);
      s.position = static_cast<int>(p);
      s.span = {offset, offset + t.frames};
      s.features = FrameMatrix(t.frames, t.v.size());
      for (int i = 0; i < t.frames; ++i)
        for (Eigen::Index j = 0; j < t.v.size(); ++j)
          s.features(i, j) = t.v[j] + (noise > 0 ? n(rng) : 0.0);
      offset += t.frames;
      segs.push_back(std::move(s));
    }
  }
  return Corpus(std::move(segs), Split::test);
}

Eigen::VectorXd vec2(double x, double y) { return Eigen::Vector2d(x, y); }

// ---------------------------------------------------------------------------
// Segmentation

TEST(Segmentation, SingleWindow) {
  EXPECT_EQ(segment_sliding(20, {20, 20, 1, 1}).size(), 1u);
}

TEST(Segmentation, CountMatchesEnumeration) {
  const SegmentationParams p{20, 60, 3, 5};
  std::size_t oracle = 0;
  for (int s = 0; s < 60; ++s)
    for (int l = 20; l <= 60; ++l)
      if (s % 3 == 0 && (l - 20) % 5 == 0 && s + l <= 60) ++oracle;
  const auto spans = segment_sliding(60, p);
  EXPECT_EQ(spans.size(), oracle);
  std::set<std::pair<int, int>> unique;
  for (const auto& s : spans) {
    EXPECT_GE(s.start, 0);
    EXPECT_LE(s.end, 60);
    EXPECT_GE(s.length(), 20);
    EXPECT_LE(s.length(), 60);
    unique.insert({s.start, s.end});
  }
  EXPECT_EQ(unique.size(), spans.size());
}

TEST(Segmentation, ShortUtteranceGetsOneSpan) {
  const auto spans = segment_sliding(10, {});
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_EQ(spans[0], (Span{0, 10}));
}

TEST(Segmentation, Errors) {
  EXPECT_THROW(segment_sliding(0, {}), DataError);
  EXPECT_THROW(segment_sliding(30, {0, 10, 1, 1}), UsageError);
  EXPECT_THROW(segment_sliding(30, {20, 10, 1, 1}), UsageError);
  EXPECT_THROW(segment_sliding(30, {5, 10, 0, 1}), UsageError);
  EXPECT_THROW(segment_sliding(30, {5, 10, 1, 0}), UsageError);
}

// ---------------------------------------------------------------------------
// Index and QbE

TEST(Index, EmptyCollection) {
  const Corpus empty;
  const auto idx = build_index(mean_frames, CorpusView(empty), IndexUnits::sliding, {});
  EXPECT_EQ(idx.segment_count(), 0u);
  EXPECT_THROW(qbe_rank(idx, vec2(1, 0)), DataError);
}

TEST(Index, SizeIsSumOfSpanCounts) {
  Rng rng(5);
  const Corpus c = make_corpus({{{"a", random_vector(3, rng), 30}, {"b", random_vector(3, rng), 17}},
                                {{"c", random_vector(3, rng), 12}}});
  const SegmentationParams p{10, 20, 2, 3};
  const auto idx = build_index(mean_frames, CorpusView(c), IndexUnits::sliding, p, "mean");
  EXPECT_EQ(idx.embedder_tag, "mean");
  EXPECT_EQ(idx.segment_count(), segment_sliding(47, p).size() + segment_sliding(12, p).size());
  for (const auto& u : idx.utterances)
    for (Eigen::Index j = 0; j < u.unit.cols(); ++j) EXPECT_NEAR(u.unit.col(j).norm(), 1.0, 1e-12);

  const auto again = build_index(mean_frames, CorpusView(c), IndexUnits::sliding, p, "mean");
  ASSERT_EQ(again.utterances.size(), idx.utterances.size());
  for (std::size_t u = 0; u < idx.utterances.size(); ++u) {
    EXPECT_EQ(again.utterances[u].spans, idx.utterances[u].spans);
    EXPECT_TRUE(again.utterances[u].unit == idx.utterances[u].unit);
  }

  const auto words = build_index(mean_frames, CorpusView(c), IndexUnits::word_segments, p);
  EXPECT_EQ(words.segment_count(), 3u);
}

TEST(Qbe, ExactSegmentRanksFirst) {
  const Corpus c = make_corpus({{{"a", vec2(1, 0)}, {"b", vec2(0, 1)}},
                                {{"c", vec2(1, 1)}},
                                {{"d", vec2(-1, 0.2)}}});
  const auto idx = build_index(mean_frames, CorpusView(c), IndexUnits::word_segments, {});
  const auto r = qbe_rank(idx, vec2(1, 1));
  EXPECT_EQ(r.ranking[0].utterance_id, "u1");
  EXPECT_NEAR(r.ranking[0].score, 0.0, 1e-15);
}

TEST(Qbe, HandRanking) {
  // Query along x. Utterance minima: u0 at 60 deg, u1 at 30 deg, u2 at 90 deg.
  auto ang = [](double deg) { return vec2(std::cos(deg * M_PI / 180), std::sin(deg * M_PI / 180)); };
  const Corpus c = make_corpus({{{"a", ang(60)}, {"b", ang(120)}},
                                {{"c", ang(150)}, {"d", ang(30)}, {"e", ang(-170)}},
                                {{"f", ang(90)}}});
  const auto idx = build_index(mean_frames, CorpusView(c), IndexUnits::word_segments, {});
  const auto r = qbe_rank(idx, vec2(1, 0));
  ASSERT_EQ(r.ranking.size(), 3u);
  EXPECT_EQ(r.ids(), (std::vector<std::string>{"u1", "u0", "u2"}));
  EXPECT_NEAR(r.ranking[0].score, 1.0 - std::sqrt(3.0) / 2.0, 1e-12);
  EXPECT_NEAR(r.ranking[1].score, 0.5, 1e-12);
  EXPECT_NEAR(r.ranking[2].score, 1.0, 1e-12);
  EXPECT_EQ(r.ranking[0].best, (Span{4, 8}));
  EXPECT_EQ(r.ranking[1].best, (Span{0, 4}));
}

TEST(Qbe, TiesBreakById) {
  const Corpus c = make_corpus({{{"a", vec2(0, 1)}}, {{"b", vec2(0, 2)}}, {{"c", vec2(0, 3)}}});
  const auto idx = build_index(mean_frames, CorpusView(c), IndexUnits::word_segments, {});
  EXPECT_EQ(qbe_rank(idx, vec2(1, 0)).ids(), (std::vector<std::string>{"u0", "u1", "u2"}));
}

TEST(Qbe, ScaleInvariance) {
  Rng rng(11);
  std::vector<std::vector<Token>> utts;
  for (int u = 0; u < 12; ++u) {
    std::vector<Token> t;
    for (int w = 0; w < 3; ++w) t.push_back({"w", random_vector(4, rng), 6});
    utts.push_back(t);
  }
  const Corpus c = make_corpus(utts, 0.2);
  const auto idx = build_index(mean_frames, CorpusView(c), IndexUnits::sliding, {5, 9, 2, 2});
  auto scaled_embed = [](const FrameMatrix& x) -> Embedding { return 3.5 * mean_frames(x); };
  const auto idx3 = build_index(scaled_embed, CorpusView(c), IndexUnits::sliding, {5, 9, 2, 2});
  for (int q = 0; q < 5; ++q) {
    const Embedding z = random_vector(4, rng);
    const auto base = qbe_rank(idx, z);
    EXPECT_EQ(qbe_rank(idx, 7.0 * z).ids(), base.ids());
    EXPECT_EQ(qbe_rank(idx3, z).ids(), base.ids());
    for (std::size_t i = 1; i < base.ranking.size(); ++i)
      EXPECT_LE(base.ranking[i - 1].score, base.ranking[i].score);
  }
}

TEST(Qbe, MinReductionNeverIncreasesWithExtraSegment) {
  Rng rng(13);
  std::vector<std::vector<Token>> utts;
  for (int u = 0; u < 6; ++u) utts.push_back({{"a", random_vector(3, rng)}, {"b", random_vector(3, rng)}});
  const Corpus c = make_corpus(utts);
  auto grown = utts;
  for (auto& u : grown) u.push_back({"c", random_vector(3, rng)});
  const Corpus g = make_corpus(grown);
  const auto a = build_index(mean_frames, CorpusView(c), IndexUnits::word_segments, {});
  const auto b = build_index(mean_frames, CorpusView(g), IndexUnits::word_segments, {});
  for (int q = 0; q < 10; ++q) {
    const Embedding z = random_vector(3, rng);
    std::map<std::string, double> before;
    for (const auto& r : qbe_rank(a, z).ranking) before[r.utterance_id] = r.score;
    for (const auto& r : qbe_rank(b, z).ranking) EXPECT_LE(r.score, before.at(r.utterance_id));
  }
}

TEST(Qbe, DimensionMismatch) {
  const Corpus c = make_corpus({{{"a", vec2(1, 0)}}});
  const auto idx = build_index(mean_frames, CorpusView(c), IndexUnits::word_segments, {});
  EXPECT_THROW(qbe_rank(idx, Eigen::Vector3d(1, 0, 0)), DataError);
  EXPECT_THROW(qbe_rank(idx, vec2(0, 0)), NumericError);
}

TEST(Qbe, DtwBaselineFindsExactMatch) {
  Rng rng(17);
  std::vector<std::vector<Token>> utts;
  for (int u = 0; u < 5; ++u) utts.push_back({{"a", random_vector(3, rng), 5}, {"b", random_vector(3, rng), 6}});
  const Corpus c = make_corpus(utts, 0.3);
  const FrameMatrix q = c[c.index_of("u3_1")].features;
  const auto r = qbe_rank_dtw(q, CorpusView(c), IndexUnits::word_segments, {});
  EXPECT_EQ(r.ranking[0].utterance_id, "u3");
  EXPECT_NEAR(r.ranking[0].score, 0.0, 1e-12);
  EXPECT_EQ(r.ranking[0].best, (Span{5, 11}));
  const auto s = qbe_rank_dtw(q, CorpusView(c), IndexUnits::sliding, {4, 8, 1, 1});
  EXPECT_EQ(s.ranking[0].utterance_id, "u3");
}

// ---------------------------------------------------------------------------
// Masking

TEST(Mask, AbsentKeywordIsIdentity) {
  const Corpus c = make_corpus({{{"a", vec2(1, 0)}, {"b", vec2(0, 1)}}});
  const auto v = mask_query_occurrences(c, "zzz");
  EXPECT_EQ(v.masked_count(), 0u);
  const auto a = build_index(mean_frames, v, IndexUnits::sliding, {2, 4, 1, 1});
  const auto b = build_index(mean_frames, CorpusView(c), IndexUnits::sliding, {2, 4, 1, 1});
  EXPECT_EQ(a.utterances[0].spans, b.utterances[0].spans);
}

TEST(Mask, UnknownLabelAndUnlabelled) {
  const Corpus c = make_corpus({{{"a", vec2(1, 0)}}});
  EXPECT_THROW(mask_query_occurrences(c, "q", {"a", "b"}), UsageError);
  EXPECT_NO_THROW(mask_query_occurrences(c, "b", {"a", "b"}));
  EXPECT_THROW(mask_query_occurrences(c.without_labels(), "a"), DataError);
}

TEST(Mask, MaskedTokensLeaveIndex) {
  Rng rng(19);
  std::vector<std::vector<Token>> utts;
  for (int u = 0; u < 6; ++u) {
    std::vector<Token> t{{"x", random_vector(2, rng), 5}, {"y", random_vector(2, rng), 7}};
    if (u == 1 || u == 3 || u == 4) t.insert(t.begin() + 1, Token{"kw", random_vector(2, rng), 6});
    utts.push_back(t);
  }
  const Corpus c = make_corpus(utts);
  const auto view = mask_query_occurrences(c, "kw");
  EXPECT_EQ(view.masked_count(), 3u);

  const auto full = build_index(mean_frames, CorpusView(c), IndexUnits::word_segments, {});
  const auto masked = build_index(mean_frames, view, IndexUnits::word_segments, {});
  EXPECT_EQ(full.segment_count() - masked.segment_count(), 3u);
  for (const auto& u : masked.utterances)
    for (const auto& s : u.spans)
      for (const auto& seg : c.segments())
        if (seg.utterance_id == u.utterance_id && seg.span == s) EXPECT_NE(*seg.word_label, "kw");

  // Sliding: the removed windows are exactly those touching a masked token.
  const SegmentationParams p{3, 6, 1, 1};
  const auto fs = build_index(mean_frames, CorpusView(c), IndexUnits::sliding, p);
  const auto ms = build_index(mean_frames, view, IndexUnits::sliding, p);
  ASSERT_EQ(fs.utterances.size(), ms.utterances.size());
  for (std::size_t u = 0; u < fs.utterances.size(); ++u) {
    const bool has_kw = fs.utterances[u].utterance_id == "u1" || fs.utterances[u].utterance_id == "u3" ||
                        fs.utterances[u].utterance_id == "u4";
    std::vector<Span> expect;
    for (const auto& s : fs.utterances[u].spans)
      if (!has_kw || s.end <= 5 || s.start >= 11) expect.push_back(s);
    EXPECT_EQ(ms.utterances[u].spans, expect);
  }
}

TEST(Mask, ExactMatchCollapsesTowardChance) {
  // Ten word types with distinct prototypes; after masking, the query's own
  // tokens can no longer be matched.
  Rng rng(23);
  std::vector<Eigen::VectorXd> proto;
  for (int w = 0; w < 10; ++w) proto.push_back(random_vector(8, rng));
  std::vector<std::vector<Token>> utts;
  for (int u = 0; u < 60; ++u) {
    std::vector<Token> t;
    for (int k = 0; k < 3; ++k) {
      const int w = static_cast<int>(uniform_index(rng, 10));
      t.push_back({"w" + std::to_string(w), proto[w], 4});
    }
    utts.push_back(t);
  }
  const Corpus c = make_corpus(utts, 0.3);
  double unmasked = 0, masked = 0, chance = 0;
  for (int w = 0; w < 10; ++w) {
    const std::string label = "w" + std::to_string(w);
    const auto rel = utterances_with_label(c, label);
    const auto full = build_index(mean_frames, CorpusView(c), IndexUnits::word_segments, {});
    const auto idx = build_index(mean_frames, mask_query_occurrences(c, label), IndexUnits::word_segments, {});
    unmasked += precision_at_k(qbe_rank(full, proto[w]).ids(), rel, 10);
    masked += precision_at_k(qbe_rank(idx, proto[w]).ids(), rel, 10);
    chance += precision_at_k(random_ranking(c, static_cast<std::uint64_t>(w)), rel, 10);
  }
  unmasked /= 10, masked /= 10, chance /= 10;
  EXPECT_GE(unmasked, 0.95);
  EXPECT_LT(masked, 0.5 * unmasked);
  EXPECT_LT(std::abs(masked - chance), 0.2);
}

// ---------------------------------------------------------------------------
// Keyword spotting

struct KwsFixture {
  Corpus corpus;
  std::vector<KeywordSpec> keywords;
  SearchIndex index;
};

// 50 utterances; "kw" appears in 5 of them, "kv" in 10.
KwsFixture kws_fixture(double noise) {
  Rng rng(29);
  std::vector<Eigen::VectorXd> proto;
  for (int w = 0; w < 8; ++w) proto.push_back(random_vector(6, rng));
  std::vector<std::vector<Token>> utts;
  for (int u = 0; u < 50; ++u) {
    std::vector<Token> t;
    for (int k = 0; k < 3; ++k) {
      const int w = static_cast<int>(uniform_index(rng, 6));
      t.push_back({"f" + std::to_string(w), proto[w], 4});
    }
    if (u % 10 == 3) t.insert(t.begin() + 1, Token{"kw", proto[6], 4});
    if (u % 5 == 1) t.push_back({"kv", proto[7], 4});
    utts.push_back(t);
  }
  KwsFixture f{make_corpus(utts, noise, 31), {}, {}};
  const Corpus templates = make_corpus({{{"kw", proto[6]}, {"kv", proto[7]}}, {{"kw", proto[6]}}}, noise, 37);
  f.keywords.push_back(make_keyword("kw", {"u0_0", "u1_0"}, templates, mean_frames));
  f.keywords.push_back(make_keyword("kv", {"u0_1"}, templates, mean_frames));
  f.index = build_index(mean_frames, CorpusView(f.corpus), IndexUnits::word_segments, {});
  return f;
}

TEST(Kws, TemplateMean) {
  const Corpus t = make_corpus({{{"k", vec2(1, 0)}, {"k", vec2(0, 3)}}});
  const auto k = make_keyword("k", {"u0_0", "u0_1"}, t, mean_frames);
  EXPECT_TRUE(k.query.isApprox(vec2(0.5, 1.5)));
  EXPECT_THROW(make_keyword("k", {}, t, mean_frames), UsageError);
}

TEST(Kws, ExtremeThresholds) {
  const auto f = kws_fixture(0.2);
  const auto none = kws_detect(f.index, f.keywords, {0.0, {}});
  EXPECT_EQ(none.size(), 100u);
  for (const auto& d : none) EXPECT_FALSE(d.flag);
  for (const auto& d : kws_detect(f.index, f.keywords, {2.0, {}})) EXPECT_TRUE(d.flag);
  EXPECT_THROW(kws_detect(f.index, {}, {1.0, {}}), UsageError);
}

TEST(Kws, FlagsMonotoneInThreshold) {
  const auto f = kws_fixture(0.5);
  const auto base = kws_detect(f.index, f.keywords, {0.0, {}});
  for (double t1 = 0.0; t1 <= 2.0; t1 += 0.1) {
    const auto a = apply_thresholds(base, {t1, {}});
    const auto b = apply_thresholds(base, {t1 + 0.05, {}});
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i].flag) EXPECT_TRUE(b[i].flag);
  }
}

TEST(Kws, TunedFlagsMatchRecount) {
  const auto f = kws_fixture(0.3);
  const auto dev = kws_detect(f.index, f.keywords, {0.0, {}});
  const auto truth = kws_truth(dev, f.corpus);
  std::size_t kw_present = 0;
  for (std::size_t i = 0; i < dev.size(); ++i)
    if (dev[i].keyword == "kw" && truth[i]) ++kw_present;
  EXPECT_EQ(kw_present, 5u);

  const auto th = tune_kws_thresholds(dev, truth, ThresholdMode::global);
  const auto out = kws_detect(f.index, f.keywords, th);
  // Recount from labels alone.
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& d : out) {
    bool present = false;
    for (const auto& s : f.corpus.segments())
      if (s.utterance_id == d.utterance_id && *s.word_label == d.keyword) present = true;
    if (d.flag && present) ++tp;
    if (d.flag && !present) ++fp;
    if (!d.flag && present) ++fn;
  }
  const double f1 = 2.0 * tp / (2.0 * tp + fp + fn);
  std::vector<bool> flags;
  for (const auto& d : out) flags.push_back(d.flag);
  EXPECT_DOUBLE_EQ(detection_metrics(flags, kws_truth(out, f.corpus)).f1, f1);
  EXPECT_EQ(f1, 1.0);  // distinct prototypes separate cleanly
}

ThresholdChoice brute_tune(const std::vector<double>& s, const std::vector<bool>& y) {
  std::vector<double> u(s.begin(), s.end());
  std::sort(u.begin(), u.end());
  u.erase(std::unique(u.begin(), u.end()), u.end());
  std::vector<double> cands;
  for (std::size_t i = 0; i + 1 < u.size(); ++i) cands.push_back((u[i] + u[i + 1]) / 2);
  cands.push_back(u.back());
  ThresholdChoice best{0, -1};
  for (double t : cands) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const bool flag = s[i] <= t;
      tp += flag && y[i];
      fp += flag && !y[i];
      fn += !flag && y[i];
    }
    const double f1 = 2 * tp / (2 * tp + fp + fn);
    if (f1 > best.f1) best = {t, f1};
  }
  return best;
}

TEST(Threshold, PerfectSeparation) {
  const auto t = tune_threshold({0.1, 0.2, 0.15, 0.8, 0.9}, {true, true, true, false, false});
  EXPECT_EQ(t.f1, 1.0);
  EXPECT_GT(t.threshold, 0.2);
  EXPECT_LT(t.threshold, 0.8);
}

TEST(Threshold, SixPointsMatchBruteForce) {
  const std::vector<double> s{0.30, 0.10, 0.30, 0.55, 0.20, 0.70};
  const std::vector<bool> y{true, true, false, true, false, false};
  const auto t = tune_threshold(s, y);
  const auto b = brute_tune(s, y);
  EXPECT_EQ(t.threshold, b.threshold);
  EXPECT_EQ(t.f1, b.f1);
  // Ranked 0.10+, 0.20-, {0.30+,0.30-}, 0.55+, 0.70-: best is flagging through 0.55.
  EXPECT_DOUBLE_EQ(t.f1, 0.75);
  EXPECT_DOUBLE_EQ(t.threshold, 0.625);
}

TEST(Threshold, RandomSetsMatchBruteForce) {
  Rng rng(41);
  std::uniform_int_distribution<int> q(0, 9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 20);
    std::vector<double> s(n);
    std::vector<bool> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = q(rng) / 10.0;
      y[i] = q(rng) < 4;
    }
    y[0] = true, y[1] = false;
    const auto t = tune_threshold(s, y);
    const auto b = brute_tune(s, y);
    EXPECT_EQ(t.threshold, b.threshold);
    EXPECT_EQ(t.f1, b.f1);
  }
}

TEST(Threshold, SingleClassRejected) {
  EXPECT_THROW(tune_threshold({0.1, 0.2}, {true, true}), DataError);
  EXPECT_THROW(tune_threshold({0.1, 0.2}, {false, false}), DataError);
  EXPECT_THROW(tune_threshold({0.1}, {true, false}), UsageError);
}

TEST(Threshold, PerKeywordAtLeastGlobal) {
  for (double noise : {0.8, 1.2, 1.6}) {
    const auto f = kws_fixture(noise);
    const auto dev = kws_detect(f.index, f.keywords, {0.0, {}});
    const auto truth = kws_truth(dev, f.corpus);
    const auto g = tune_kws_thresholds(dev, truth, ThresholdMode::global);
    const auto pk = tune_kws_thresholds(dev, truth, ThresholdMode::per_keyword);
    EXPECT_EQ(pk.per_keyword.size(), 2u);
    const auto fg = per_keyword_f1(apply_thresholds(dev, g), truth);
    const auto fp = per_keyword_f1(apply_thresholds(dev, pk), truth);
    for (const auto& [kw, v] : fg) EXPECT_GE(fp.at(kw), v);
    EXPECT_GE(mean_keyword_f1(apply_thresholds(dev, pk), truth),
              mean_keyword_f1(apply_thresholds(dev, g), truth));
  }
}

TEST(KwsTsv, RoundTripAndTopK) {
  const auto f = kws_fixture(0.4);
  const auto d = kws_detect(f.index, f.keywords, {0.3, {}});
  TempDir tmp("kws");
  write_kws_tsv(d, tmp / "all.tsv");
  const auto back = read_kws_tsv(tmp / "all.tsv");
  ASSERT_EQ(back.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(back[i].keyword, d[i].keyword);
    EXPECT_EQ(back[i].utterance_id, d[i].utterance_id);
    EXPECT_EQ(back[i].score, d[i].score);
    EXPECT_EQ(back[i].flag, d[i].flag);
    EXPECT_EQ(back[i].best, d[i].best);
  }
  write_kws_tsv(d, tmp / "top.tsv", 7);
  const auto top = read_kws_tsv(tmp / "top.tsv");
  ASSERT_EQ(top.size(), 14u);
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(top[i].utterance_id, d[i].utterance_id);
    EXPECT_EQ(top[7 + i].utterance_id, d[50 + i].utterance_id);
  }
  {
    std::ofstream bad(tmp / "bad.tsv");
    bad << "kw\tu0\tnotanumber\t1\t0\t4\n";
  }
  EXPECT_THROW(read_kws_tsv(tmp / "bad.tsv"), DataError);
}

}  // namespace
}  // namespace awe
