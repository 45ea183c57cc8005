// awe/experiment.hpp

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
#include "awe/evaluation.hpp"
#include "awe/retrieval.hpp"
#include "awe/strategies.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace awe {

/// Flat key = value settings. Every key has a registered default; unknown
/// keys and malformed values are UsageErrors.
class ExperimentConfig {
 public:
  ExperimentConfig();

  /// Lines of "key = value"; '#' starts a comment. A key may appear once.
  static ExperimentConfig parse(const std::string& text, const std::string& origin = "<config>");
  static ExperimentConfig load(const std::filesystem::path& path);

  /// Accepts "key=value" as well.
  void set(const std::string& key, const std::string& value);
  void set_assignment(const std::string& assignment);

  const std::string& get(const std::string& key) const;
  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::uint64_t get_seed(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  /// Comma-separated; empty value gives an empty list.
  std::vector<std::string> get_list(const std::string& key) const;
  IntRange get_range(const std::string& key) const;

  /// Every key, sorted, as parseable text.
  std::string resolved() const;
  void write_resolved(const std::filesystem::path& path) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  static std::vector<std::string> known_keys();

 private:
  std::map<std::string, std::string> values_;
};

// ---------------------------------------------------------------------------
// Config readers

/// `languages` entries, name:vocab:inventory[:shared_fraction].
std::vector<LanguageSpec> parse_languages(const std::string& text);

/// Phonetic-track spec: all configured languages. Train uses the training
/// speaker/token counts, dev and test the evaluation counts.
SynthSpec synth_spec(const ExperimentConfig& cfg, Split split);
/// Topic-structured spec of the semantic language.
SynthSpec semantic_synth_spec(const ExperimentConfig& cfg, Split split);
/// Generates and, with synth.speaker_normalize, normalizes.
Corpus generate_corpus(const SynthSpec& spec, bool normalize);

TrainConfig train_config(const ExperimentConfig& cfg, ModelKind kind,
                         Regime regime = Regime::multilingual);
SegmentationParams segmentation_params(const ExperimentConfig& cfg);
/// adapt.freeze: default | all | none.
FreezePolicy freeze_policy(const ExperimentConfig& cfg, ModelKind kind);

// ---------------------------------------------------------------------------
// Saved embedders

/// "AWEP" checkpoint; dims in, hidden, out, 0.
void save_projection(const nn::ProjectionNet& net, const std::filesystem::path& path);
nn::ProjectionNet load_projection(const std::filesystem::path& path);

/// Everything needed to embed a segment: an encoder, optionally followed by
/// a projection or by soft cluster labels and a skip-gram.
struct EmbedderBundle {
  AweModel model;
  std::optional<nn::ProjectionNet> projection;
  std::optional<ClusterModel> clusters;
  std::optional<SkipGramModel> skipgram;
  SoftLabelReading reading = SoftLabelReading::distance;

  Embedding embed(const FrameMatrix& x) const;
  Embedder embedder() const;

  /// A directory holding model.awem, bundle.txt and the optional parts.
  void save(const std::filesystem::path& dir) const;
  /// Accepts such a directory or a bare model checkpoint.
  static EmbedderBundle load(const std::filesystem::path& path);
};

// ---------------------------------------------------------------------------
// Flows

enum class Flow { contrastive_chapter, adaptation_chapter, language_choice, kws, semantic };

std::string_view to_string(Flow f);
Flow parse_flow(std::string_view s);

struct RunLog {
  std::string run;
  TrainLog log;
};

struct FlowOutput {
  EvalReport metrics;
  std::vector<RunLog> logs;
  /// Wall-clock seconds per timed step; kept out of metrics.tsv.
  std::vector<std::pair<std::string, double>> timings;
};

/// Runs the flow named by the `flow` key. With a non-empty `out_dir`, writes
/// config.resolved, metrics.tsv, log.tsv, timing.tsv, checkpoints/ and the
/// flow's tables there.
FlowOutput run_flow(const ExperimentConfig& cfg, const std::filesystem::path& out_dir = {});

/// Writes log.tsv rows: run, epoch, loss, dev_metric.
void write_run_logs(const std::vector<RunLog>& logs, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Semantic retrieval helpers

/// Utterance ids whose possible topics meet `topics`. An utterance's
/// possible topics are those shared by all of its words.
std::vector<std::string> topic_relevant_utterances(const Corpus& corpus, const LanguageTruth& truth,
                                                   const std::vector<int>& topics);

/// Reference similarities for every pair of word types.
std::vector<SimilarityPair> topic_reference_pairs(const LanguageTruth& truth);

struct SemanticQbeMetrics {
  double p_at_10 = 0.0;
  double p_at_n = 0.0;
  double eer = 0.0;
};

/// Each query is masked out of the word-segment index; relevance is topic
/// overlap. EER pools (query, utterance) scores over all queries.
SemanticQbeMetrics semantic_qbe(const Embedder& embed, const Corpus& queries, const Corpus& search,
                                const LanguageTruth& truth);

}  // namespace awe
