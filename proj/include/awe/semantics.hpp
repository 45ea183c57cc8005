// awe/semantics.hpp

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
#include "awe/nn/parameters.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace awe {

namespace nn {
class Encoder;
}

// ---------------------------------------------------------------------------
// Clustering

/// K centroids (one per row) and the soft-label width.
struct ClusterModel {
  Eigen::MatrixXd centroids;  // K x E
  double sigma = 0.01;

  int k() const { return static_cast<int>(centroids.rows()); }
  int dim() const { return static_cast<int>(centroids.cols()); }
};

struct KMeansOptions {
  int restarts = 50;
  int max_iterations = 200;
};

struct KMeansResult {
  ClusterModel model;
  std::vector<int> assignments;
  double inertia = 0.0;
};

/// Lloyd's algorithm from `restarts` random selections of K points; the run
/// with the lowest within-cluster sum of squares wins. An empty cluster takes
/// the point furthest from its centroid. Throws DataError if #points < K.
KMeansResult kmeans_fit(const std::vector<Embedding>& points, int k, std::uint64_t seed,
                        KMeansOptions options = {});

/// Nearest centroid by Euclidean distance (lowest index on ties).
std::vector<int> kmeans_assign(const ClusterModel& model, const std::vector<Embedding>& points);

/// Copies scaled to unit length. Throws NumericError on a zero vector.
std::vector<Embedding> unit_length(const std::vector<Embedding>& points);

/// How the soft-label exponent treats the cosine term. `distance` weights
/// close centroids most; `similarity` uses exp(-sim / sigma^2) as written.
enum class SoftLabelReading { distance, similarity };

/// v_k = softmax_k(-d(z, c_k) / sigma^2), d = cosine distance under the
/// default reading. Throws NumericError on a zero-norm z.
Eigen::VectorXd soft_label(const ClusterModel& model, const Embedding& z,
                           SoftLabelReading reading = SoftLabelReading::distance);

/// Index of the centroid with the smallest cosine distance to z.
int nearest_centroid_cosine(const ClusterModel& model, const Embedding& z);

/// Sum over clusters of the majority-label count, divided by n.
double cluster_purity(const std::vector<int>& assignments, const std::vector<std::string>& labels);

void save_cluster_model(const ClusterModel& model, const std::filesystem::path& path);
ClusterModel load_cluster_model(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Skip-gram

/// A distribution over the vocabulary as (index, weight) entries; one-hot
/// tokens have a single entry of weight 1.
using SparseLabel = std::vector<std::pair<int, double>>;

SparseLabel one_hot(int index);
/// Nonzero entries of a dense probability vector.
SparseLabel sparse_from_dense(const Eigen::VectorXd& v);

/// One (centre, context) training example.
struct SkipGramExample {
  SparseLabel input;
  SparseLabel target;
};

/// Examples for every position and every context offset 1..window on either
/// side, clipped at sequence edges.
std::vector<SkipGramExample> skipgram_examples(const std::vector<std::vector<SparseLabel>>& seqs,
                                               int window);

struct SkipGramConfig {
  int dim = 100;
  int window = 3;
  int epochs = 10;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
};

/// Full-softmax skip-gram: hidden h = sum_k v_k W1[k,:], logits = h W2.
class SkipGramModel {
 public:
  SkipGramModel() = default;
  SkipGramModel(int vocab, int dim, std::uint64_t seed);

  int vocab() const { return static_cast<int>(params_[0].rows()); }
  int dim() const { return static_cast<int>(params_[0].cols()); }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }
  const Eigen::MatrixXd& w1() const { return params_[0]; }
  const Eigen::MatrixXd& w2() const { return params_[1]; }

  /// v^T W1 for a soft label v.
  Embedding embed(const Eigen::VectorXd& v) const;
  /// Output distribution for one input.
  Eigen::VectorXd predict(const SparseLabel& input) const;

 private:
  nn::ParameterSet params_;
};

/// Mean cross-entropy over `examples`; accumulates the gradient when asked.
double skipgram_loss(const nn::ParameterSet& params, const std::vector<SkipGramExample>& examples,
                     nn::ParameterSet* grad);

struct SkipGramResult {
  SkipGramModel model;
  std::vector<double> epoch_loss;  // mean minibatch loss per epoch
};

/// Adam over seeded minibatches of examples. Throws DataError when the
/// sequences yield no example.
SkipGramResult skipgram_train(const std::vector<std::vector<SparseLabel>>& seqs, int vocab,
                              const SkipGramConfig& config);
/// Convenience for token-id sequences.
SkipGramResult skipgram_train_tokens(const std::vector<std::vector<int>>& seqs, int vocab,
                                     const SkipGramConfig& config);
/// Convenience for dense soft-label sequences.
SkipGramResult skipgram_train_soft(const std::vector<std::vector<Eigen::VectorXd>>& seqs,
                                   const SkipGramConfig& config);

void save_skipgram(const SkipGramModel& model, const std::filesystem::path& path);
SkipGramModel load_skipgram(const std::filesystem::path& path);

/// soft_label(clusters, encode(segment))^T W1.
Embedding semantic_embed(const nn::Encoder& encoder, const ClusterModel& clusters,
                         const SkipGramModel& sg, const FrameMatrix& segment,
                         SoftLabelReading reading = SoftLabelReading::distance);

}  // namespace awe
