// awe/evaluation.hpp

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
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace awe {

class Corpus;

/// Precision/recall at every distinct distance threshold, ascending.
struct PRCurve {
  std::vector<double> thresholds;
  std::vector<double> precision;
  std::vector<double> recall;
  double ap = 0.0;
};

/// Ranked-retrieval AP over scored pairs, ascending distance. Relevant pairs
/// contribute recall; every pair counts as retrieved. Tied distances form
/// one threshold step. Throws DataError when no pair is relevant.
PRCurve average_precision(const std::vector<double>& distances,
                          const std::vector<bool>& relevant);

enum class PairScorer { cosine, dtw };

/// Same-different AP: all unordered pairs; relevant = same label and
/// different speaker. Same-speaker same-word pairs stay in the ranking as
/// non-relevant.
PRCurve same_different_ap(const std::vector<Embedding>& embeddings,
                          const std::vector<std::string>& labels,
                          const std::vector<std::string>& speakers);
PRCurve same_different_ap_dtw(const std::vector<FrameMatrix>& sequences,
                              const std::vector<std::string>& labels,
                              const std::vector<std::string>& speakers);
/// Convenience over a labelled corpus with a segment embedder.
double same_different_ap(const Corpus& corpus,
                         const std::function<Embedding(const FrameMatrix&)>& embed);

struct SpeakerProbeOptions {
  double train_fraction = 0.8;
  double l2 = 1e-4;
  double learning_rate = 0.01;
  int max_iterations = 3000;
  double tolerance = 1e-9;
};

/// Seeded stratified split, multinomial logistic regression with full-batch
/// Adam; returns held-out accuracy.
double speaker_probe(const std::vector<Embedding>& embeddings,
                     const std::vector<std::string>& speakers, std::uint64_t seed,
                     SpeakerProbeOptions options = {});

/// Precision over the top-k of a ranking (k = 10 gives P@10).
double precision_at_k(const std::vector<std::string>& ranking,
                      const std::vector<std::string>& relevant, std::size_t k);
/// P@N with N = |relevant|.
double precision_at_n(const std::vector<std::string>& ranking,
                      const std::vector<std::string>& relevant);

/// Averages per-query values within each query type, then across types.
double macro_average(const std::vector<double>& values, const std::vector<std::string>& types);

/// Equal error rate for distance scores (accept when score <= threshold).
/// Linear interpolation between adjacent sweep points.
double equal_error_rate(const std::vector<double>& scores, const std::vector<bool>& positive);

struct DetectionMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t hits = 0, detected = 0, total = 0;
};

/// precision = hits/detected (0 when nothing detected), recall = hits/total
/// (error when no true item exists), F1 = harmonic mean (0 when both are 0).
DetectionMetrics detection_metrics(const std::vector<bool>& flags, const std::vector<bool>& truth);
DetectionMetrics detection_metrics(std::size_t hits, std::size_t detected, std::size_t total);

/// Average ranks for ties.
std::vector<double> average_ranks(const std::vector<double>& x);
/// Pearson correlation of average ranks. Throws DataError when either rank
/// vector has zero variance or lengths differ or n < 3.
double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

/// A pair of word types with a reference similarity.
struct SimilarityPair {
  std::string a, b;
  double reference = 0.0;
};

struct WordSimilarity {
  double rho_avg = 0.0;
  double rho_single = 0.0;
};

/// rho_avg compares class-mean embeddings; rho_single averages `draws`
/// seeded runs that each pick one token per word type.
WordSimilarity word_similarity(const std::vector<Embedding>& embeddings,
                               const std::vector<std::string>& labels,
                               const std::vector<SimilarityPair>& reference,
                               std::uint64_t seed, int draws = 10);

/// Named metric values, in insertion order, as exported to metrics.tsv.
class EvalReport {
 public:
  void set(const std::string& name, double value);
  std::optional<double> get(const std::string& name) const;
  double at(const std::string& name) const;
  const std::vector<std::pair<std::string, double>>& entries() const { return entries_; }
  void merge(const EvalReport& other, const std::string& prefix = "");

  /// "name<TAB>value" lines; values printed with round-trip precision.
  std::string to_tsv() const;
  void write_tsv(const std::filesystem::path& path) const;
  static EvalReport read_tsv(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, double>> entries_;
};

void write_pr_curve(const PRCurve& curve, const std::filesystem::path& path);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

}  // namespace awe
