// tests/test_corpus.cpp

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

#include "awe/alignment.hpp"
#include "awe/corpus.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <iterator>
#include <map>

namespace awe {
namespace {

using awe::testing::TempDir;

SynthSpec small_spec(int vocab, int speakers, int tokens, std::uint64_t seed = 7) {
  SynthSpec s;
  s.seed = seed;
  s.languages = {{"xx", vocab, 0, 0.0}};
  s.speakers_per_language = speakers;
  s.tokens_per_type = tokens;
  return s;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

ArchiveErrc read_error(const std::filesystem::path& dir) {
  try {
    read_archive(dir);
  } catch (const ArchiveError& e) {
    return e.code();
  }
  ADD_FAILURE() << "archive read did not fail";
  return ArchiveErrc::io;
}

TEST(Synthetic, MinimalCorpus) {
  const Corpus c = generate_synthetic_corpus(small_spec(1, 1, 1));
  ASSERT_EQ(c.size(), 1u);
  EXPECT_TRUE(c[0].word_label.has_value());
  EXPECT_EQ(c.utterances().size(), 1u);
}

TEST(Synthetic, TokenCountsPerType) {
  const Corpus c = generate_synthetic_corpus(small_spec(5, 1, 3));
  ASSERT_EQ(c.size(), 15u);
  std::map<std::string, int> count;
  for (const auto& s : c.segments()) ++count[*s.word_label];
  ASSERT_EQ(count.size(), 5u);
  for (const auto& [label, n] : count) EXPECT_EQ(n, 3) << label;
}

TEST(Synthetic, RecordInvariants) {
  SynthSpec spec = small_spec(12, 4, 6);
  spec.split = Split::dev;
  const Corpus c = generate_synthetic_corpus(spec);
  EXPECT_EQ(c.split(), Split::dev);
  std::set<std::string> speakers;
  for (const auto& s : c.segments()) {
    EXPECT_EQ(s.span.length(), s.frames());
    EXPECT_EQ(s.dim(), 13);
    EXPECT_GE(s.position, 0);
    EXPECT_TRUE(s.features.allFinite());
    const int phones_lo = spec.phones_per_word.lo * spec.frames_per_phone.lo;
    EXPECT_GE(s.frames(), phones_lo);
    speakers.insert(s.speaker);
  }
  EXPECT_EQ(speakers.size(), 4u);
  for (const auto& [utt, idx] : c.utterances()) {
    for (std::size_t k = 0; k < idx.size(); ++k) {
      EXPECT_EQ(c[idx[k]].utterance_id, utt);
      EXPECT_EQ(c[idx[k]].position, static_cast<int>(k));
      if (k > 0) EXPECT_EQ(c[idx[k]].span.start, c[idx[k - 1]].span.end);
    }
    EXPECT_EQ(c.utterance_frames(utt).rows(), c[idx.back()].span.end);
  }
}

TEST(Synthetic, SplitsUseDisjointSpeakers) {
  SynthSpec spec = small_spec(6, 3, 3);
  const Corpus train = generate_synthetic_corpus(spec);
  spec.split = Split::test;
  const Corpus test = generate_synthetic_corpus(spec);
  std::set<std::string> a, b;
  for (const auto& s : train.segments()) a.insert(s.speaker);
  for (const auto& s : test.segments()) b.insert(s.speaker);
  for (const auto& s : a) EXPECT_FALSE(b.count(s)) << s;
  // Also when the splits differ in speaker count.
  spec.split = Split::dev;
  spec.speakers_per_language = 2;
  for (const auto& s : generate_synthetic_corpus(spec).segments()) EXPECT_FALSE(a.count(s.speaker)) << s.speaker;
  // Same word inventory in both splits.
  std::set<std::string> la, lb;
  for (const auto& s : train.segments()) la.insert(*s.word_label);
  for (const auto& s : test.segments()) lb.insert(*s.word_label);
  EXPECT_EQ(la, lb);
}

TEST(Synthetic, DeterministicAndSeedSensitive) {
  const SynthSpec spec = small_spec(8, 2, 4);
  EXPECT_TRUE(generate_synthetic_corpus(spec) == generate_synthetic_corpus(spec));
  EXPECT_FALSE(generate_synthetic_corpus(spec) == generate_synthetic_corpus(small_spec(8, 2, 4, 8)));
  TempDir d("det");
  write_archive(generate_synthetic_corpus(spec), d / "a");
  write_archive(generate_synthetic_corpus(spec), d / "b");
  EXPECT_EQ(slurp(d / "a" / "manifest.tsv"), slurp(d / "b" / "manifest.tsv"));
  for (const auto& e : std::filesystem::directory_iterator(d / "a" / "segments"))
    EXPECT_EQ(slurp(e.path()), slurp(d / "b" / "segments" / e.path().filename()));
}

TEST(Synthetic, WordsDoNotDependOnOtherLanguages) {
  SynthSpec one = small_spec(6, 1, 1);
  one.languages = {{"aa", 6, 0, 0.5}};
  SynthSpec two = one;
  two.languages.push_back({"bb", 9, 0, 0.3});
  const LanguageTruth t1 = language_truth(one, "aa"), t2 = language_truth(two, "aa");
  EXPECT_EQ(t1.labels, t2.labels);
  EXPECT_EQ(t1.phone_sequences, t2.phone_sequences);
}

TEST(Synthetic, RejectsInvalidSpecs) {
  SynthSpec s = small_spec(5, 1, 1);
  s.noise_sigma = -0.1;
  EXPECT_THROW(generate_synthetic_corpus(s), UsageError);
  s = small_spec(5, 1, 1);
  s.phone_count = 2;
  s.phones_per_word = {1, 1};
  EXPECT_THROW(generate_synthetic_corpus(s), UsageError);  // only 2 sequences exist
  s = small_spec(5, 1, 1);
  s.frames_per_phone = {4, 2};
  EXPECT_THROW(generate_synthetic_corpus(s), UsageError);
  s = small_spec(5, 1, 1);
  s.languages.clear();
  EXPECT_THROW(generate_synthetic_corpus(s), UsageError);
}

TEST(Synthetic, RelatedLanguagesAreAcousticallyCloser) {
  SynthSpec spec = small_spec(10, 2, 3, 17);
  spec.languages = {{"aa", 10, 0, 1.0}, {"bb", 10, 0, 1.0}, {"cc", 10, 1, 0.0}};
  const Corpus c = generate_synthetic_corpus(spec);
  std::vector<const Segment*> a, b, cc;
  for (const auto& s : c.segments())
    (s.language == "aa" ? a : s.language == "bb" ? b : cc).push_back(&s);
  std::vector<double> related, unrelated;
  for (const Segment* x : a) {
    for (const Segment* y : b)
      if (*x->word_label == *y->word_label) related.push_back(dtw_distance(x->features, y->features));
    for (std::size_t k = 0; k < 2; ++k)
      unrelated.push_back(dtw_distance(x->features, cc[(related.size() + k) % cc.size()]->features));
  }
  ASSERT_GE(related.size(), 50u);
  ASSERT_GE(unrelated.size(), 50u);
  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };
  EXPECT_LT(median(related), median(unrelated));
}

TEST(Synthetic, TopicUtterances) {
  SynthSpec spec = small_spec(20, 2, 5, 3);
  spec.topic_count = 4;
  const LanguageTruth truth = language_truth(spec, "xx");
  ASSERT_EQ(truth.topics.size(), 20u);
  for (const auto& t : truth.topics) {
    EXPECT_GE(t.size(), 1u);
    EXPECT_LE(t.size(), 2u);
  }
  const Corpus c = generate_synthetic_corpus(spec);
  std::map<std::string, std::size_t> index;
  for (std::size_t w = 0; w < truth.labels.size(); ++w) index[truth.labels[w]] = w;
  // Every utterance draws all its words from one topic.
  for (const auto& [utt, idx] : c.utterances()) {
    std::vector<int> common(4, 0);
    for (std::size_t i : idx)
      for (int t : truth.topics[index.at(*c[i].word_label)]) ++common[static_cast<std::size_t>(t)];
    EXPECT_EQ(*std::max_element(common.begin(), common.end()), static_cast<int>(idx.size())) << utt;
  }
}

TEST(Synthetic, TopicPmiProperties) {
  SynthSpec spec = small_spec(12, 2, 5, 5);
  spec.topic_count = 3;
  spec.topic_overlap = 0.0;
  const LanguageTruth truth = language_truth(spec, "xx");
  for (std::size_t a = 0; a < 12; ++a)
    for (std::size_t b = 0; b < 12; ++b) {
      if (a == b) continue;
      EXPECT_DOUBLE_EQ(topic_pmi(truth, a, b), topic_pmi(truth, b, a));
      if (truth.topics[a] != truth.topics[b]) EXPECT_EQ(topic_pmi(truth, a, b), -10.0);
      else EXPECT_GT(topic_pmi(truth, a, b), 0.0);
    }
}

TEST(Normalize, ConstantUtteranceBecomesZero) {
  Segment s{"u_00", "xx", "s0", "w", "u", 0, {0, 3}, FrameMatrix::Constant(3, 2, 4.5)};
  const Corpus n = speaker_normalize(Corpus({s}, Split::train));
  EXPECT_EQ(n[0].features, FrameMatrix::Zero(3, 2));
}

TEST(Normalize, TwoFrameHandCase) {
  FrameMatrix f(2, 1);
  f << 0.0, 2.0;
  Segment s{"u_00", "xx", "s0", "w", "u", 0, {0, 2}, f};
  const Corpus n = speaker_normalize(Corpus({s}, Split::train));
  EXPECT_EQ(n[0].features(0, 0), -1.0);
  EXPECT_EQ(n[0].features(1, 0), 1.0);
}

TEST(Normalize, MomentsAndIdempotence) {
  const Corpus c = generate_synthetic_corpus(small_spec(6, 2, 4));
  const Corpus n = speaker_normalize(c);
  for (const auto& [utt, idx] : n.utterances()) {
    const FrameMatrix f = n.utterance_frames(utt);
    const Eigen::RowVectorXd mean = f.colwise().mean();
    const Eigen::RowVectorXd var = (f.rowwise() - mean).array().square().colwise().mean();
    EXPECT_LT(mean.cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((var.array() - 1.0).abs().maxCoeff(), 1e-8);
  }
  const Corpus again = speaker_normalize(n);
  for (std::size_t i = 0; i < n.size(); ++i)
    EXPECT_LT((again[i].features - n[i].features).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Corpus, RejectsBrokenInvariants) {
  Segment a{"a", "xx", "s0", "w", "u", 0, {0, 2}, FrameMatrix::Ones(2, 3)};
  Segment dup = a;
  dup.position = 1;
  dup.span = {2, 4};
  EXPECT_THROW(Corpus({a, dup}, Split::train), DataError);
  Segment bad_span = a;
  bad_span.span = {0, 3};
  EXPECT_THROW(Corpus({bad_span}, Split::train), DataError);
  Segment other_dim{"b", "xx", "s0", "w", "u", 1, {2, 4}, FrameMatrix::Ones(2, 4)};
  EXPECT_THROW(Corpus({a, other_dim}, Split::train), DataError);
  Segment same_pos{"b", "xx", "s0", "w", "u", 0, {2, 4}, FrameMatrix::Ones(2, 3)};
  EXPECT_THROW(Corpus({a, same_pos}, Split::train), DataError);
}

TEST(Corpus, ViewsAndMerge) {
  SynthSpec spec = small_spec(4, 1, 2);
  spec.languages = {{"aa", 4, 0, 0.0}, {"bb", 4, 1, 0.0}};
  const Corpus c = generate_synthetic_corpus(spec);
  const Corpus a = c.filter_languages({"aa"}), b = c.filter_languages({"bb"});
  EXPECT_EQ(a.size() + b.size(), c.size());
  const Corpus m = Corpus::merge({&a, &b}, Split::train);
  EXPECT_EQ(m.size(), c.size());
  EXPECT_THROW(Corpus::merge({&a, &a}, Split::train), DataError);
  const Corpus stripped = c.without_labels();
  for (const auto& s : stripped.segments()) EXPECT_FALSE(s.word_label.has_value());
  EXPECT_EQ(c.index_of(c[3].id), 3u);
  EXPECT_FALSE(c.find("nope").has_value());
  EXPECT_THROW(c.index_of("nope"), DataError);
}

TEST(Archive, EmptyRoundTrip) {
  TempDir d("empty");
  write_archive(Corpus({}, Split::test), d / "a");
  const Corpus back = read_archive(d / "a");
  EXPECT_TRUE(back.empty());
  EXPECT_EQ(back.split(), Split::test);
}

TEST(Archive, ExactRoundTrip) {
  TempDir d("rt");
  SynthSpec spec = small_spec(5, 1, 3);
  const Corpus c = generate_synthetic_corpus(spec);
  ASSERT_EQ(c.size(), 15u);
  write_archive(c, d / "a");
  const Corpus back = read_archive(d / "a");
  ASSERT_EQ(back.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(back[i].id, c[i].id);
    EXPECT_EQ(back[i].language, c[i].language);
    EXPECT_EQ(back[i].speaker, c[i].speaker);
    EXPECT_EQ(back[i].word_label, c[i].word_label);
    EXPECT_EQ(back[i].utterance_id, c[i].utterance_id);
    EXPECT_EQ(back[i].position, c[i].position);
    EXPECT_EQ(back[i].span, c[i].span);
    EXPECT_EQ(0, std::memcmp(back[i].features.data(), c[i].features.data(),
                             sizeof(double) * static_cast<std::size_t>(c[i].features.size())));
  }
  EXPECT_TRUE(back == c);
  // Unlabelled segments survive too.
  write_archive(c.without_labels(), d / "b");
  EXPECT_TRUE(read_archive(d / "b") == c.without_labels());
}

TEST(Archive, DistinctErrors) {
  TempDir d("err");
  const Corpus c = generate_synthetic_corpus(small_spec(3, 1, 2));
  const std::string seg = "segments/" + c[0].id + ".awe";

  write_archive(c, d / "trunc");
  std::filesystem::resize_file(d / "trunc" / seg, std::filesystem::file_size(d / "trunc" / seg) - 4);
  EXPECT_EQ(read_error(d / "trunc"), ArchiveErrc::payload_length_mismatch);

  write_archive(c, d / "dangle");
  std::filesystem::remove(d / "dangle" / seg);
  EXPECT_EQ(read_error(d / "dangle"), ArchiveErrc::dangling_reference);

  write_archive(c, d / "dim");
  write_segment_file(FrameMatrix::Zero(c[0].frames(), 5), d / "dim" / seg);
  EXPECT_EQ(read_error(d / "dim"), ArchiveErrc::dimension_mismatch);

  write_archive(c, d / "header");
  {
    std::fstream f(d / "header" / seg, std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
  }
  EXPECT_EQ(read_error(d / "header"), ArchiveErrc::malformed_header);

  write_archive(c, d / "manifest");
  {
    std::ofstream f(d / "manifest" / "manifest.tsv", std::ios::app);
    f << "broken\trow\n";
  }
  EXPECT_EQ(read_error(d / "manifest"), ArchiveErrc::malformed_manifest);

  EXPECT_EQ(read_error(d / "missing"), ArchiveErrc::io);
}

}  // namespace
}  // namespace awe
