// awe/retrieval.hpp

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

#include "awe/corpus.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace awe {

/// Variable-length windows: starts every `start_stride` frames, lengths
/// min_len, min_len + len_stride, ... up to max_len.
struct SegmentationParams {
  int min_len = 20;
  int max_len = 60;
  int start_stride = 3;
  int len_stride = 5;
};

/// Spans (s, s + l) inside [0, frames); one full span when frames < min_len.
std::vector<Span> segment_sliding(int frames, const SegmentationParams& params);

using Embedder = std::function<Embedding(const FrameMatrix&)>;

/// A corpus with some segments hidden from indexing.
class CorpusView {
 public:
  explicit CorpusView(const Corpus& corpus);

  const Corpus& corpus() const { return *corpus_; }
  bool masked(std::size_t segment) const { return masked_[segment]; }
  std::size_t masked_count() const;

  /// Hides every segment labelled `label`. Throws DataError on an unlabelled
  /// corpus; an absent label leaves the view unchanged.
  void mask_label(const std::string& label);

 private:
  const Corpus* corpus_;
  std::vector<bool> masked_;
};

/// View of `corpus` with the query's word type excluded. When `vocabulary`
/// is non-empty, a label outside it is a UsageError.
CorpusView mask_query_occurrences(const Corpus& corpus, const std::string& label,
                                  const std::vector<std::string>& vocabulary = {});

enum class IndexUnits {
  sliding,        // variable-length windows over utterance frames
  word_segments,  // the known word boundaries
};

struct IndexedUtterance {
  std::string utterance_id;
  std::vector<Span> spans;   // utterance-relative frames
  Eigen::MatrixXd unit;      // E x spans, unit-norm embeddings
};

/// Every indexed sub-segment of every utterance. Immutable after build.
struct SearchIndex {
  std::string embedder_tag;
  IndexUnits units = IndexUnits::sliding;
  SegmentationParams params;
  std::vector<IndexedUtterance> utterances;

  std::size_t segment_count() const;
};

/// Sliding mode drops windows that overlap a masked segment; word mode drops
/// masked segments.
SearchIndex build_index(const Embedder& embed, const CorpusView& view, IndexUnits units,
                        const SegmentationParams& params, const std::string& tag = "");

struct RankedUtterance {
  std::string utterance_id;
  double score = 0.0;  // minimum cosine distance
  Span best;
};

struct QueryResult {
  std::vector<RankedUtterance> ranking;  // ascending score, ties by id

  std::vector<std::string> ids() const;
};

QueryResult qbe_rank(const SearchIndex& index, const Embedding& query);

/// DTW baseline over the same spans: per span, the path-normalised DTW cost.
QueryResult qbe_rank_dtw(const FrameMatrix& query, const CorpusView& view, IndexUnits units,
                         const SegmentationParams& params);

/// Utterances containing `label` (the relevance set of a query).
std::vector<std::string> utterances_with_label(const Corpus& corpus, const std::string& label);

/// A seeded random permutation of the utterance ids, as a chance baseline.
std::vector<std::string> random_ranking(const Corpus& corpus, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Keyword spotting

struct KeywordSpec {
  std::string keyword;
  std::vector<std::string> template_ids;
  Embedding query;  // mean of the template embeddings
};

KeywordSpec make_keyword(const std::string& keyword, const std::vector<std::string>& template_ids,
                         const Corpus& templates, const Embedder& embed);

struct KwsThresholds {
  double global = 0.0;
  std::map<std::string, double> per_keyword;

  double for_keyword(const std::string& keyword) const;
};

struct KwsDecision {
  std::string keyword;
  std::string utterance_id;
  double score = 0.0;
  bool flag = false;
  Span best;
};

/// One decision per (keyword, utterance), keyword-major, utterances in
/// ranking order. flag = score <= threshold.
std::vector<KwsDecision> kws_detect(const SearchIndex& index, const std::vector<KeywordSpec>& keywords,
                                    const KwsThresholds& thresholds);

/// Re-flags decisions under new thresholds (scores untouched).
std::vector<KwsDecision> apply_thresholds(std::vector<KwsDecision> decisions,
                                          const KwsThresholds& thresholds);

/// Whether the decision's utterance contains the keyword.
std::vector<bool> kws_truth(const std::vector<KwsDecision>& decisions, const Corpus& corpus);

struct ThresholdChoice {
  double threshold = 0.0;
  double f1 = 0.0;
};

/// Sweeps midpoints of adjacent unique scores and the largest score; returns
/// the first threshold reaching the highest F1. Throws DataError when the
/// labels hold a single class.
ThresholdChoice tune_threshold(const std::vector<double>& scores, const std::vector<bool>& labels);

enum class ThresholdMode { global, per_keyword };

/// Tunes on dev decisions; per_keyword mode also fills `global` with the
/// pooled optimum.
KwsThresholds tune_kws_thresholds(const std::vector<KwsDecision>& dev, const std::vector<bool>& truth,
                                  ThresholdMode mode);

/// F1 for each keyword separately, in keyword order of first appearance.
std::map<std::string, double> per_keyword_f1(const std::vector<KwsDecision>& decisions,
                                             const std::vector<bool>& truth);
double mean_keyword_f1(const std::vector<KwsDecision>& decisions, const std::vector<bool>& truth);

/// keyword, utterance_id, score, flag, best_start, best_end. With `top_k`,
/// only the k lowest-score rows of each keyword.
void write_kws_tsv(const std::vector<KwsDecision>& decisions, const std::filesystem::path& path,
                   std::optional<std::size_t> top_k = std::nullopt);
std::vector<KwsDecision> read_kws_tsv(const std::filesystem::path& path);

}  // namespace awe
