// tests/test_semantics.cpp

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

#include "awe/nn/losses.hpp"
#include "awe/nn/recurrent.hpp"
#include "awe/semantics.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace awe {
namespace {

using awe::testing::random_vector;

TEST(KMeans, TwoTightBlobs) {
  Rng rng(1);
  std::vector<Embedding> pts;
  std::vector<std::string> labels;
  Eigen::Vector3d mean_a = Eigen::Vector3d::Zero(), mean_b = Eigen::Vector3d::Zero();
  for (int i = 0; i < 40; ++i) {
    const bool a = i % 2 == 0;
    Eigen::Vector3d p = (a ? Eigen::Vector3d(5, 0, 1) : Eigen::Vector3d(-5, 2, 0)) +
                        1e-3 * Eigen::Vector3d(random_vector(3, rng));
    (a ? mean_a : mean_b) += p / 20.0;
    pts.push_back(p);
    labels.push_back(a ? "a" : "b");
  }
  const KMeansResult r = kmeans_fit(pts, 2, 7, {5, 200});
  const int ia = r.assignments[0], ib = 1 - ia;
  EXPECT_LT((Eigen::Vector3d(r.model.centroids.row(ia).transpose()) - mean_a).norm(), 1e-6);
  EXPECT_LT((Eigen::Vector3d(r.model.centroids.row(ib).transpose()) - mean_b).norm(), 1e-6);
  EXPECT_EQ(cluster_purity(r.assignments, labels), 1.0);
  EXPECT_EQ(kmeans_assign(r.model, pts), r.assignments);
}

TEST(KMeans, OneClusterPerPoint) {
  Rng rng(2);
  std::vector<Embedding> pts;
  for (int i = 0; i < 6; ++i) pts.push_back(random_vector(4, rng));
  const KMeansResult r = kmeans_fit(pts, 6, 3, {3, 200});
  EXPECT_EQ(r.inertia, 0.0);
  std::set<int> used(r.assignments.begin(), r.assignments.end());
  EXPECT_EQ(used.size(), 6u);
}

TEST(KMeans, SeededAndValidated) {
  Rng rng(3);
  std::vector<Embedding> pts;
  for (int i = 0; i < 30; ++i) pts.push_back(random_vector(3, rng));
  const KMeansResult a = kmeans_fit(pts, 4, 11, {10, 200}), b = kmeans_fit(pts, 4, 11, {10, 200});
  EXPECT_EQ(a.model.centroids, b.model.centroids);
  EXPECT_EQ(a.assignments, b.assignments);
  EXPECT_THROW(kmeans_fit(pts, 31, 1), DataError);
  // More restarts never give a worse optimum on the same seed stream.
  EXPECT_LE(kmeans_fit(pts, 4, 11, {20, 200}).inertia, a.inertia);
}

TEST(KMeans, EmptyClusterIsReseeded) {
  std::vector<Embedding> pts(3, Embedding::Zero(1));
  pts.push_back(Embedding::Constant(1, 10.0));
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    EXPECT_EQ(kmeans_fit(pts, 2, seed, {1, 200}).inertia, 0.0) << seed;
}

ClusterModel two_centroids(Eigen::Vector2d a, Eigen::Vector2d b, double sigma) {
  ClusterModel m;
  m.centroids.resize(2, 2);
  m.centroids.row(0) = a.transpose();
  m.centroids.row(1) = b.transpose();
  m.sigma = sigma;
  return m;
}

TEST(SoftLabel, SymmetricCase) {
  const ClusterModel m = two_centroids({1, 0}, {0, 1}, 0.01);
  const Eigen::VectorXd v = soft_label(m, Eigen::Vector2d(1, 1));
  EXPECT_NEAR(v[0], 0.5, 1e-15);
  EXPECT_NEAR(v[1], 0.5, 1e-15);
}

TEST(SoftLabel, ScalarEvaluation) {
  const ClusterModel m = two_centroids({1, 0}, {0, 1}, 0.1);
  const Eigen::VectorXd v = soft_label(m, Eigen::Vector2d(1, 0));
  EXPECT_NEAR(v[0], 1.0 / (1.0 + std::exp(-100.0)), 1e-15);
  EXPECT_NEAR(v[0], 1.0, 1e-12);
}

TEST(SoftLabel, WideSigmaIsUniform) {
  Rng rng(4);
  ClusterModel m;
  m.centroids = Eigen::MatrixXd::Random(5, 3);
  m.sigma = 1e6;
  const Eigen::VectorXd v = soft_label(m, random_vector(3, rng));
  for (int k = 0; k < 5; ++k) EXPECT_NEAR(v[k], 0.2, 1e-6);
}

TEST(SoftLabel, ProbabilityVectorWithNearestArgmax) {
  Rng rng(5);
  ClusterModel m;
  m.centroids.resize(7, 4);
  for (int k = 0; k < 7; ++k) m.centroids.row(k) = random_vector(4, rng).transpose();
  for (double sigma : {0.01, 0.5}) {
    m.sigma = sigma;
    for (int i = 0; i < 1000; ++i) {
      const Embedding z = random_vector(4, rng);
      const Eigen::VectorXd v = soft_label(m, z);
      EXPECT_GE(v.minCoeff(), 0.0);
      EXPECT_NEAR(v.sum(), 1.0, 1e-9);
      Eigen::Index arg;
      v.maxCoeff(&arg);
      EXPECT_EQ(arg, nearest_centroid_cosine(m, z));
    }
  }
  EXPECT_THROW(soft_label(m, Embedding::Zero(4)), NumericError);
  EXPECT_THROW(soft_label(m, Embedding::Ones(3)), DataError);
}

TEST(SoftLabel, LiteralReadingFavoursFarCentroids) {
  const ClusterModel m = two_centroids({1, 0}, {0, 1}, 0.5);
  const Eigen::VectorXd v = soft_label(m, Eigen::Vector2d(1, 0.1), SoftLabelReading::similarity);
  EXPECT_GT(v[1], v[0]);
}

TEST(Purity, HandCases) {
  EXPECT_EQ(cluster_purity({0, 0, 1, 1}, {"a", "a", "b", "b"}), 1.0);
  EXPECT_EQ(cluster_purity({0, 0, 0, 0}, {"a", "a", "b", "b"}), 0.5);
  // Majorities: cluster 0 has a:2 b:1, cluster 1 b:2 c:1, cluster 2 c:2 a:1 b:1.
  EXPECT_DOUBLE_EQ(cluster_purity({0, 0, 0, 1, 1, 1, 2, 2, 2, 2},
                                  {"a", "a", "b", "b", "b", "c", "c", "c", "a", "b"}),
                   0.6);
  EXPECT_THROW(cluster_purity({}, {}), DataError);
}

TEST(Purity, RefinementNeverLowersPurity) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> a;
    std::vector<std::string> l;
    for (int i = 0; i < 30; ++i) {
      a.push_back(static_cast<int>(uniform_index(rng, 4)));
      l.push_back("w" + std::to_string(uniform_index(rng, 3)));
    }
    const double before = cluster_purity(a, l);
    const int target = static_cast<int>(uniform_index(rng, 4));
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i] == target && uniform_index(rng, 2) == 0) a[i] = 10;
    EXPECT_GE(cluster_purity(a, l), before);
  }
}

TEST(ClusterCheckpoint, RoundTrip) {
  awe::testing::TempDir d("clu");
  ClusterModel m;
  m.centroids = Eigen::MatrixXd::Random(4, 3);
  m.sigma = 0.5;
  save_cluster_model(m, d / "c.bin");
  const ClusterModel back = load_cluster_model(d / "c.bin");
  EXPECT_EQ(back.centroids, m.centroids);
  EXPECT_EQ(back.sigma, 0.5);
}

// ---------------------------------------------------------------------------

TEST(SkipGram, AlternatingCorpus) {
  std::vector<int> seq;
  for (int i = 0; i < 200; ++i) {
    seq.push_back(0);
    seq.push_back(1);
  }
  SkipGramConfig cfg;
  cfg.dim = 8;
  cfg.window = 1;
  cfg.epochs = 20;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.01;
  const SkipGramResult r = skipgram_train_tokens({seq}, 2, cfg);
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
  EXPECT_GT(r.model.predict(one_hot(0))[1], 0.9);
  EXPECT_GT(r.model.predict(one_hot(1))[0], 0.9);
  // Nearest other row to A by cosine is B: the only candidate.
  EXPECT_LT(nn::cosine_distance(r.model.w1().row(0).transpose(), r.model.w1().row(1).transpose()), 2.0);
}

TEST(SkipGram, SoftModeReducesToOneHot) {
  Rng rng(7);
  std::vector<std::vector<int>> tokens;
  std::vector<std::vector<Eigen::VectorXd>> soft;
  for (int u = 0; u < 20; ++u) {
    std::vector<int> t;
    std::vector<Eigen::VectorXd> s;
    for (int i = 0; i < 6; ++i) {
      const int w = static_cast<int>(uniform_index(rng, 5));
      t.push_back(w);
      s.push_back(Eigen::VectorXd::Unit(5, w));
    }
    tokens.push_back(t);
    soft.push_back(s);
  }
  SkipGramConfig cfg;
  cfg.dim = 6;
  cfg.window = 2;
  cfg.epochs = 4;
  cfg.batch_size = 10;
  const SkipGramResult a = skipgram_train_tokens(tokens, 5, cfg);
  const SkipGramResult b = skipgram_train_soft(soft, cfg);
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
  EXPECT_EQ(a.model.params(), b.model.params());
}

TEST(SkipGram, SoftLossGradient) {
  Rng rng(8);
  SkipGramModel m(6, 4, 9);
  std::vector<SkipGramExample> ex;
  for (int i = 0; i < 12; ++i) {
    Eigen::VectorXd v = Eigen::VectorXd::Random(6).cwiseAbs();
    Eigen::VectorXd t = Eigen::VectorXd::Random(6).cwiseAbs();
    ex.push_back({sparse_from_dense(v / v.sum()), sparse_from_dense(t / t.sum())});
  }
  const nn::LossFunction f = [&](const nn::ParameterSet& q, nn::ParameterSet* g) {
    return skipgram_loss(q, ex, g);
  };
  EXPECT_LT(nn::grad_check(f, m.params(), 10).max_relative_error, 1e-4);
}

TEST(SkipGram, EmbeddingIsLinearInTheLabel) {
  SkipGramModel m(5, 3, 4);
  EXPECT_EQ(m.embed(Eigen::VectorXd::Unit(5, 2)), Embedding(m.w1().row(2).transpose()));
  const Embedding mean = m.w1().colwise().mean().transpose();
  EXPECT_LT((m.embed(Eigen::VectorXd::Constant(5, 0.2)) - mean).norm(), 1e-12);
}

TEST(SkipGram, ExamplesAndErrors) {
  const std::vector<std::vector<SparseLabel>> seqs{{one_hot(0), one_hot(1), one_hot(2)}, {one_hot(1)}};
  EXPECT_EQ(skipgram_examples(seqs, 2).size(), 6u);
  EXPECT_THROW(skipgram_train({{one_hot(0)}}, 3, {}), DataError);
  EXPECT_THROW(skipgram_examples(seqs, 0), UsageError);
  EXPECT_THROW(SkipGramModel(1, 4, 1), UsageError);
}

TEST(SkipGram, CheckpointRoundTrip) {
  awe::testing::TempDir d("sg");
  const SkipGramModel m(7, 5, 3);
  save_skipgram(m, d / "s.bin");
  EXPECT_EQ(load_skipgram(d / "s.bin").params(), m.params());
}

TEST(SemanticEmbed, ComposesThePipeline) {
  const nn::Encoder enc({3, 4, 2, 1}, 5);
  ClusterModel clusters;
  clusters.centroids = Eigen::MatrixXd::Random(4, 2);
  const SkipGramModel sg(4, 6, 6);
  Rng rng(7);
  const FrameMatrix x = awe::testing::random_frames(5, 3, rng);
  const Embedding expected = sg.embed(soft_label(clusters, enc.encode(x)));
  EXPECT_EQ(semantic_embed(enc, clusters, sg, x), expected);
  EXPECT_THROW(semantic_embed(enc, clusters, SkipGramModel(5, 6, 6), x), DataError);
}

}  // namespace
}  // namespace awe
