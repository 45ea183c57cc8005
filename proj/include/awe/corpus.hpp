// awe/corpus.hpp

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

#pragma once

#include "awe/common.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace awe {

enum class Split { train, dev, test };

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

/// Frame range inside the owning utterance, [start, end).
struct Span {
  int start = 0;
  int end = 0;
  int length() const { return end - start; }
  bool operator==(const Span&) const = default;
};

/// One spoken-word token.
struct Segment {
  std::string id;
  std::string language;
  std::string speaker;
  std::optional<std::string> word_label;  // absent in zero-resource mode
  std::string utterance_id;
  int position = 0;
  Span span;
  FrameMatrix features;  // T x D

  int frames() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
};

bool operator==(const Segment& a, const Segment& b);

/// An ordered collection of segments grouped into utterances. Immutable once
/// built through a CorpusBuilder or read from an archive.
class Corpus {
 public:
  Corpus() = default;
  /// Validates invariants (unique ids, consistent spans and dims, position
  /// order) and derives the utterance table. Throws DataError.
  Corpus(std::vector<Segment> segments, Split split);

  const std::vector<Segment>& segments() const { return segments_; }
  std::size_t size() const { return segments_.size(); }
  bool empty() const { return segments_.empty(); }
  const Segment& operator[](std::size_t i) const { return segments_[i]; }
  Split split() const { return split_; }
  int dim() const;

  /// Segment indices of one utterance, position-sorted.
  const std::map<std::string, std::vector<std::size_t>>& utterances() const {
    return utterances_;
  }
  /// Utterance ids as segment id lists (the documented view).
  std::vector<std::string> utterance_members(const std::string& utt) const;

  std::optional<std::size_t> find(const std::string& id) const;
  std::size_t index_of(const std::string& id) const;  // throws DataError

  /// Concatenation of the utterance's segment frames in position order.
  FrameMatrix utterance_frames(const std::string& utt) const;

  /// Copy with every word_label removed.
  Corpus without_labels() const;
  /// Segments whose language is in `languages`.
  Corpus filter_languages(const std::vector<std::string>& languages) const;
  /// Concatenates corpora; ids must stay unique.
  static Corpus merge(const std::vector<const Corpus*>& parts, Split split);

  bool operator==(const Corpus& other) const;

 private:
  std::vector<Segment> segments_;
  std::map<std::string, std::vector<std::size_t>> utterances_;
  std::unordered_map<std::string, std::size_t> by_id_;
  Split split_ = Split::train;
};

// ---------------------------------------------------------------------------
// Synthetic corpora

struct IntRange {
  int lo = 1;
  int hi = 1;
};

struct LanguageSpec {
  std::string name;
  int vocab_size = 10;
  int inventory = 0;  // languages sharing an inventory are "related"
  double shared_vocab_fraction = 0.0;
};

struct SynthSpec {
  std::uint64_t seed = 1;
  int phone_count = 20;  // phones per inventory
  int phone_dim = 13;
  std::vector<LanguageSpec> languages;
  int speakers_per_language = 4;
  int tokens_per_type = 5;
  IntRange frames_per_phone{2, 4};
  IntRange phones_per_word{3, 5};
  IntRange words_per_utterance{4, 8};
  double noise_sigma = 0.3;
  double speaker_offset_sigma = 0.3;
  /// Per-language perturbation of the family phone prototypes.
  double phone_shift_sigma = 0.25;
  /// 0 disables topic structure; otherwise utterances draw words from one topic.
  int topic_count = 0;
  /// Probability that a word belongs to a second topic.
  double topic_overlap = 0.3;
  Split split = Split::train;

  /// Throws UsageError on violated invariants.
  void validate() const;
};

/// Ground truth of one synthetic language, recomputable from the spec alone.
struct LanguageTruth {
  std::string name;
  int inventory = 0;
  std::vector<std::string> labels;                 // word types
  std::vector<std::vector<int>> phone_sequences;   // per type
  std::vector<std::vector<int>> topics;            // per type; empty if no topics
  IntRange utterance_length;
};

LanguageTruth language_truth(const SynthSpec& spec, const std::string& language);

/// Deterministic function of the spec (including seed and split).
Corpus generate_synthetic_corpus(const SynthSpec& spec);

/// Topic-PMI similarity between two word types of a topic-structured
/// language: log P(a, b in one utterance) / (P(a) P(b)) under the generator's
/// utterance model. Pairs that never co-occur get `floor`.
double topic_pmi(const LanguageTruth& truth, std::size_t a, std::size_t b,
                 double floor = -10.0);

/// Per-utterance mean/variance normalization (population variance).
/// Zero-variance coordinates are only mean-centred.
Corpus speaker_normalize(const Corpus& corpus);

// ---------------------------------------------------------------------------
// Archive

enum class ArchiveErrc {
  io,
  malformed_header,
  malformed_manifest,
  dimension_mismatch,
  dangling_reference,
  payload_length_mismatch,
};

class ArchiveError : public DataError {
 public:
  ArchiveError(ArchiveErrc code, const std::string& what)
      : DataError(what), code_(code) {}
  ArchiveErrc code() const { return code_; }

 private:
  ArchiveErrc code_;
};

/// Features are narrowed to float32 on write.
void write_archive(const Corpus& corpus, const std::filesystem::path& dir);
Corpus read_archive(const std::filesystem::path& dir);

/// Single segment file: "AWE0" + u32 T + u32 D + u32 0 + T*D float32 (LE).
void write_segment_file(const FrameMatrix& frames, const std::filesystem::path& path);
FrameMatrix read_segment_file(const std::filesystem::path& path);

}  // namespace awe
