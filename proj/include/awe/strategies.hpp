// awe/strategies.hpp

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
#include "awe/nn/recurrent.hpp"
#include "awe/pairing.hpp"
#include "awe/semantics.hpp"

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace awe {

enum class ModelKind { cae, siamese, contrastive };
enum class Regime { mono_unsupervised, multilingual, adapt };

std::string_view to_string(ModelKind k);
std::string_view to_string(Regime r);
/// Accepts "cae", "siamese", "contrastive". Throws UsageError.
ModelKind parse_model_kind(std::string_view s);
/// Accepts "mono"/"mono_unsupervised", "multi"/"multilingual", "adapt".
Regime parse_regime(std::string_view s);

/// Which parts of a model stay fixed during (re)training.
struct FreezePolicy {
  std::set<int> frozen_encoder_layers;
  bool freeze_projection = false;
  bool reinit_decoder = false;

  /// Tensor names covered by the policy. Throws UsageError on a layer the
  /// encoder does not have.
  nn::FrozenSet encoder_tensors(const nn::Encoder& encoder) const;

  /// Adaptation defaults: CAE keeps every recurrent layer and reinitialises
  /// the decoder; the other models update everything.
  static FreezePolicy adapt_default(ModelKind kind, int layers);
  static FreezePolicy freeze_all(int layers);
};

struct TrainConfig {
  nn::RnnDims dims{13, 64, 32, 2};
  double learning_rate = 1e-3;
  /// Pairs per minibatch (distinct-id pairs for siamese and contrastive).
  std::size_t batch_size = 300;
  double margin = 0.25;
  double temperature = 0.1;
  int epochs = 30;
  /// CAE only: leading epochs trained as a plain autoencoder.
  int ae_pretrain_epochs = 10;
  /// Early stop after this many epochs without a better dev AP.
  int patience = 5;
  std::uint64_t seed = 1;
  int negatives_per_positive = 20;
  /// When nonzero, each epoch sees a seeded subsample of this many pairs.
  std::size_t max_pairs_per_epoch = 0;
  FreezePolicy freeze;

  void validate() const;
};

/// Batch size per model kind: 300 pairs (CAE, siamese) or 600 (contrastive).
/// The adapt regime also takes the adaptation learning rate and freeze policy.
TrainConfig default_train_config(ModelKind kind, Regime regime = Regime::multilingual);

/// Learning rate used when adapting a trained model of this kind.
double adapt_learning_rate(ModelKind kind);

/// An encoder, plus the decoder for CAE-style models.
struct AweModel {
  ModelKind kind = ModelKind::contrastive;
  nn::Encoder encoder;
  std::optional<nn::Decoder> decoder;

  Embedding embed(const FrameMatrix& x) const { return encoder.encode(x); }
  bool operator==(const AweModel& other) const;
};

/// Fresh model with seeded initialisation; cae gets a decoder.
AweModel init_model(ModelKind kind, const nn::RnnDims& dims, std::uint64_t seed);

/// "AWEM" checkpoint; dims L, N, E, D.
void save_model(const AweModel& model, const std::filesystem::path& path);
AweModel load_model(const std::filesystem::path& path);

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;        // mean minibatch loss; NaN for epoch 0
  double dev_metric = 0.0;  // dev same-different AP; NaN without dev data
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  int selected_epoch = 0;

  /// epoch, loss, dev_metric with a header row.
  void write_tsv(const std::filesystem::path& path) const;
  static TrainLog read_tsv(const std::filesystem::path& path);
};

struct TrainResult {
  AweModel model;
  TrainLog log;
};

struct StrategySpec {
  ModelKind model_kind = ModelKind::contrastive;
  Regime regime = Regime::mono_unsupervised;
  std::vector<std::string> languages;
  std::string target_language;
  TrainConfig config;
  std::optional<std::filesystem::path> source_checkpoint;  // adapt only

  /// Throws UsageError: adapt needs a source, multilingual >= 2 languages.
  void validate() const;
};

/// Trains from scratch (mono_unsupervised, multilingual) or from the source
/// checkpoint (adapt). mono_unsupervised and adapt train on a label-stripped
/// copy of `train`. With `dev` (labelled), the epoch with the best dev AP is
/// kept. Throws DataError on empty pairs and NumericError on a non-finite loss.
TrainResult train_awe(const StrategySpec& spec, const Corpus& train, const PairSet& pairs,
                      const Corpus* dev = nullptr);

/// Word-supervised training on ground-truth pairs of a labelled corpus, any
/// number of languages. The multilingual regime goes through here.
TrainResult train_supervised(ModelKind kind, const Corpus& train, const PairSet& pairs,
                             const TrainConfig& config, const Corpus* dev = nullptr);

/// Fine-tunes `source` on the target's pairs under `policy`. Frozen tensors
/// stay bitwise identical.
TrainResult adapt_model(const AweModel& source, const Corpus& target, const PairSet& target_pairs,
                        const FreezePolicy& policy, const TrainConfig& config,
                        const Corpus* dev = nullptr);

// ---------------------------------------------------------------------------
// Semantic trainers

/// CAE machinery trained to reconstruct a context word from the target word.
TrainResult train_speech2vec(const Corpus& corpus, const ContextPairSet& context,
                             const TrainConfig& config);

/// Segment indices that may serve as negatives for `anchor`: everything
/// outside the anchor's context window.
std::vector<std::size_t> sample_negatives(const Corpus& corpus, std::size_t anchor, int window,
                                          int count, Rng& rng);

struct SemanticContrastiveResult {
  nn::Encoder encoder;
  TrainLog log;
  /// Negatives drawn for each positive of the first batch.
  std::vector<std::size_t> batch_negative_counts;
};

/// Contrastive loss over (target, context) positives with sampled negatives.
/// With `init`, training starts from that encoder and its first two
/// recurrent layers stay frozen.
SemanticContrastiveResult train_semantic_contrastive(const Corpus& corpus,
                                                     const ContextPairSet& context,
                                                     const TrainConfig& config,
                                                     const nn::Encoder* init = nullptr);

struct ProjectionResult {
  nn::ProjectionNet net;
  TrainLog log;
};

/// Contrastive training of `net` on fixed phonetic embeddings (one per corpus
/// segment) with the same positives and negatives as the semantic encoder.
ProjectionResult train_projection(const std::vector<Embedding>& phonetic, const Corpus& corpus,
                                  const ContextPairSet& context, nn::ProjectionNet net,
                                  const TrainConfig& config);

struct ClusterSkipGramConfig {
  int clusters = 50;
  double sigma = 0.01;
  KMeansOptions kmeans;
  SkipGramConfig skipgram;
  SoftLabelReading reading = SoftLabelReading::distance;
};

struct ClusterSkipGram {
  ClusterModel clusters;
  SkipGramModel skipgram;
  SoftLabelReading reading = SoftLabelReading::distance;
  std::vector<double> epoch_loss;

  Embedding embed(const nn::Encoder& encoder, const FrameMatrix& x) const;
};

/// K-means over unit-length phonetic embeddings, then a skip-gram over the
/// utterances' soft cluster labels.
ClusterSkipGram train_cluster_skipgram(const nn::Encoder& phonetic, const Corpus& corpus,
                                       const ClusterSkipGramConfig& config, std::uint64_t seed);

}  // namespace awe
