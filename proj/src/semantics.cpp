// src/semantics.cpp

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

#include "awe/semantics.hpp"

#include "awe/nn/checkpoint.hpp"
#include "awe/nn/losses.hpp"
#include "awe/nn/optim.hpp"
#include "awe/nn/recurrent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace awe {

namespace {

constexpr std::array<char, 4> kClusterMagic{'A', 'W', 'E', 'C'};
constexpr std::array<char, 4> kSkipGramMagic{'A', 'W', 'E', 'S'};

Eigen::MatrixXd stack_rows(const std::vector<Embedding>& points) {
  const Eigen::Index d = points.front().size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(points.size()), d);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != d) throw DataError("points differ in dimension");
    x.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
  }
  return x;
}

// Squared distances up to the per-point constant |x|^2.
std::vector<int> assign_rows(const Eigen::MatrixXd& x, const Eigen::MatrixXd& c) {
  Eigen::MatrixXd score = -2.0 * x * c.transpose();
  score.rowwise() += c.rowwise().squaredNorm().transpose();
  std::vector<int> a(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Index best;
    score.row(i).minCoeff(&best);
    a[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return a;
}

double inertia_of(const Eigen::MatrixXd& x, const Eigen::MatrixXd& c, const std::vector<int>& a) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    s += (x.row(i) - c.row(a[static_cast<std::size_t>(i)])).squaredNorm();
  return s;
}

void update_centroids(const Eigen::MatrixXd& x, const std::vector<int>& a, Eigen::MatrixXd& c) {
  const Eigen::Index k = c.rows();
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    sums.row(a[static_cast<std::size_t>(i)]) += x.row(i);
    ++counts[static_cast<std::size_t>(a[static_cast<std::size_t>(i)])];
  }
  // Distance of each point to its current centroid, for re-seeding.
  std::vector<double> spread(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    spread[static_cast<std::size_t>(i)] = (x.row(i) - c.row(a[static_cast<std::size_t>(i)])).squaredNorm();
  for (Eigen::Index j = 0; j < k; ++j) {
    if (counts[static_cast<std::size_t>(j)] > 0) {
      c.row(j) = sums.row(j) / counts[static_cast<std::size_t>(j)];
      continue;
    }
    const auto far = std::max_element(spread.begin(), spread.end());
    c.row(j) = x.row(far - spread.begin());
    *far = -1.0;  // one re-seed per point
  }
}

}  // namespace

KMeansResult kmeans_fit(const std::vector<Embedding>& points, int k, std::uint64_t seed,
                        KMeansOptions options) {
  if (k < 1) throw UsageError("K must be >= 1");
  if (points.size() < static_cast<std::size_t>(k))
    throw DataError("k-means needs at least K=" + std::to_string(k) + " points, got " +
                    std::to_string(points.size()));
  if (options.restarts < 1 || options.max_iterations < 1)
    throw UsageError("k-means restarts and iterations must be >= 1");
  const Eigen::MatrixXd x = stack_rows(points);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < options.restarts; ++r) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    std::vector<std::size_t> idx(points.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (int j = 0; j < k; ++j)
      std::swap(idx[static_cast<std::size_t>(j)],
                idx[static_cast<std::size_t>(j) + uniform_index(rng, idx.size() - static_cast<std::size_t>(j))]);
    Eigen::MatrixXd c(k, x.cols());
    for (int j = 0; j < k; ++j) c.row(j) = x.row(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(j)]));
    std::vector<int> a = assign_rows(x, c);
    for (int it = 0; it < options.max_iterations; ++it) {
      update_centroids(x, a, c);
      std::vector<int> next = assign_rows(x, c);
      if (next == a) break;
      a = std::move(next);
    }
    const double inertia = inertia_of(x, c, a);
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.model.centroids = c;
      best.assignments = a;
    }
  }
  return best;
}

std::vector<int> kmeans_assign(const ClusterModel& model, const std::vector<Embedding>& points) {
  if (points.empty()) return {};
  const Eigen::MatrixXd x = stack_rows(points);
  if (x.cols() != model.centroids.cols()) throw DataError("point and centroid dimensions differ");
  return assign_rows(x, model.centroids);
}

std::vector<Embedding> unit_length(const std::vector<Embedding>& points) {
  std::vector<Embedding> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    const double n = p.norm();
    if (n == 0.0) throw NumericError("cannot length-normalise a zero vector");
    out.push_back(p / n);
  }
  return out;
}

Eigen::VectorXd soft_label(const ClusterModel& model, const Embedding& z, SoftLabelReading reading) {
  if (z.size() != model.dim())
    throw DataError("soft_label: embedding has " + std::to_string(z.size()) +
                    " dimensions, centroids have " + std::to_string(model.dim()));
  if (!(model.sigma > 0.0)) throw UsageError("soft-label sigma must be > 0");
  const double inv = 1.0 / (model.sigma * model.sigma);
  Eigen::VectorXd logits(model.k());
  for (int j = 0; j < model.k(); ++j) {
    const Eigen::VectorXd c = model.centroids.row(j).transpose();
    logits[j] = reading == SoftLabelReading::distance ? -nn::cosine_distance(z, c) * inv
                                                      : -nn::cosine_similarity(z, c) * inv;
  }
  const double m = logits.maxCoeff();
  Eigen::VectorXd v = (logits.array() - m).exp();
  return v / v.sum();
}

int nearest_centroid_cosine(const ClusterModel& model, const Embedding& z) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int j = 0; j < model.k(); ++j) {
    const double d = nn::cosine_distance(z, model.centroids.row(j).transpose());
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

double cluster_purity(const std::vector<int>& assignments, const std::vector<std::string>& labels) {
  if (assignments.empty()) throw DataError("cluster purity of an empty set");
  if (assignments.size() != labels.size())
    throw DataError("cluster purity: one label per assignment required");
  std::map<int, std::map<std::string, std::size_t>> counts;
  for (std::size_t i = 0; i < labels.size(); ++i) ++counts[assignments[i]][labels[i]];
  std::size_t majority = 0;
  for (const auto& [cluster, by_label] : counts) {
    std::size_t m = 0;
    for (const auto& [label, n] : by_label) m = std::max(m, n);
    majority += m;
  }
  return static_cast<double>(majority) / static_cast<double>(labels.size());
}

void save_cluster_model(const ClusterModel& model, const std::filesystem::path& path) {
  nn::Checkpoint ckpt;
  ckpt.magic = kClusterMagic;
  ckpt.dims = {static_cast<std::uint32_t>(model.k()), static_cast<std::uint32_t>(model.dim()), 0, 0};
  const Eigen::MatrixXd& c = model.centroids;
  ckpt.blocks.push_back({"centroids", std::vector<double>(c.data(), c.data() + c.size())});
  ckpt.blocks.push_back({"sigma", {model.sigma}});
  nn::write_checkpoint(ckpt, path);
}

ClusterModel load_cluster_model(const std::filesystem::path& path) {
  const nn::Checkpoint ckpt = nn::read_checkpoint(path, kClusterMagic);
  const auto* c = ckpt.find("centroids");
  const auto* s = ckpt.find("sigma");
  const Eigen::Index k = ckpt.dims[0], d = ckpt.dims[1];
  if (!c || !s || s->values.size() != 1 || static_cast<Eigen::Index>(c->values.size()) != k * d)
    throw DataError("malformed cluster checkpoint '" + path.string() + "'");
  ClusterModel m;
  m.centroids = Eigen::Map<const Eigen::MatrixXd>(c->values.data(), k, d);
  m.sigma = s->values[0];
  return m;
}

// ---------------------------------------------------------------------------

SparseLabel one_hot(int index) { return {{index, 1.0}}; }

SparseLabel sparse_from_dense(const Eigen::VectorXd& v) {
  SparseLabel s;
  for (Eigen::Index k = 0; k < v.size(); ++k)
    if (v[k] != 0.0) s.emplace_back(static_cast<int>(k), v[k]);
  return s;
}

std::vector<SkipGramExample> skipgram_examples(const std::vector<std::vector<SparseLabel>>& seqs,
                                               int window) {
  if (window < 1) throw UsageError("skip-gram context size must be >= 1");
  std::vector<SkipGramExample> out;
  for (const auto& seq : seqs) {
    const int n = static_cast<int>(seq.size());
    for (int t = 0; t < n; ++t)
      for (int j = -window; j <= window; ++j) {
        if (j == 0 || t + j < 0 || t + j >= n) continue;
        out.push_back({seq[static_cast<std::size_t>(t)], seq[static_cast<std::size_t>(t + j)]});
      }
  }
  return out;
}

SkipGramModel::SkipGramModel(int vocab, int dim, std::uint64_t seed) {
  if (vocab < 2) throw UsageError("skip-gram vocabulary must have at least 2 entries");
  if (dim < 1) throw UsageError("skip-gram dimension must be >= 1");
  Rng rng(seed);
  nn::fill_uniform(params_.add("sg.w1", vocab, dim), dim, rng);
  nn::fill_uniform(params_.add("sg.w2", dim, vocab), dim, rng);
}

Embedding SkipGramModel::embed(const Eigen::VectorXd& v) const {
  if (v.size() != vocab()) throw DataError("soft label size differs from the skip-gram vocabulary");
  return w1().transpose() * v;
}

Eigen::VectorXd SkipGramModel::predict(const SparseLabel& input) const {
  Eigen::VectorXd h = Eigen::VectorXd::Zero(dim());
  for (const auto& [k, w] : input) h += w * w1().row(k).transpose();
  Eigen::VectorXd logits = w2().transpose() * h;
  Eigen::VectorXd p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

double skipgram_loss(const nn::ParameterSet& params, const std::vector<SkipGramExample>& examples,
                     nn::ParameterSet* grad) {
  if (examples.empty()) throw DataError("skip-gram loss over no examples");
  const Eigen::MatrixXd& w1 = params[0];
  const Eigen::MatrixXd& w2 = params[1];
  const Eigen::Index v = w1.rows(), d = w1.cols();
  const Eigen::Index b = static_cast<Eigen::Index>(examples.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, b);
  for (Eigen::Index e = 0; e < b; ++e)
    for (const auto& [k, w] : examples[static_cast<std::size_t>(e)].input) {
      if (k < 0 || k >= v) throw DataError("skip-gram input index out of range");
      h.col(e) += w * w1.row(k).transpose();
    }
  Eigen::MatrixXd logits = w2.transpose() * h;  // V x B
  double loss = 0.0;
  for (Eigen::Index e = 0; e < b; ++e) {
    const double m = logits.col(e).maxCoeff();
    const double lse = m + std::log((logits.col(e).array() - m).exp().sum());
    double tsum = 0.0;
    for (const auto& [k, w] : examples[static_cast<std::size_t>(e)].target) {
      if (k < 0 || k >= v) throw DataError("skip-gram target index out of range");
      loss -= w * (logits(k, e) - lse);
      tsum += w;
    }
    if (grad) {
      // d/dlogits = tsum * p - t
      logits.col(e) = tsum * (logits.col(e).array() - lse).exp();
      for (const auto& [k, w] : examples[static_cast<std::size_t>(e)].target) logits(k, e) -= w;
    }
  }
  const double n = static_cast<double>(b);
  if (grad) {
    const Eigen::MatrixXd dl = logits / n;
    (*grad)[1].noalias() += h * dl.transpose();
    const Eigen::MatrixXd dh = w2 * dl;
    for (Eigen::Index e = 0; e < b; ++e)
      for (const auto& [k, w] : examples[static_cast<std::size_t>(e)].input)
        (*grad)[0].row(k) += w * dh.col(e).transpose();
  }
  return loss / n;
}

SkipGramResult skipgram_train(const std::vector<std::vector<SparseLabel>>& seqs, int vocab,
                              const SkipGramConfig& config) {
  if (config.batch_size < 1) throw UsageError("skip-gram batch size must be >= 1");
  const std::vector<SkipGramExample> examples = skipgram_examples(seqs, config.window);
  if (examples.empty()) throw DataError("skip-gram corpus yields no training example");
  SkipGramResult r{SkipGramModel(vocab, config.dim, derive_seed(config.seed, "sg-init")), {}};
  nn::Adam adam(r.model.params(), {config.learning_rate});
  nn::ParameterSet grad = r.model.params().zeros_like();
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch) + 1000));
    seeded_shuffle(order, rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<SkipGramExample> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) batch.push_back(examples[order[i]]);
      grad.set_zero();
      const double loss = skipgram_loss(r.model.params(), batch, &grad);
      if (!std::isfinite(loss)) throw NumericError("skip-gram loss became non-finite");
      adam.step(r.model.params(), grad);
      total += loss;
      ++batches;
    }
    r.epoch_loss.push_back(total / static_cast<double>(batches));
  }
  return r;
}

SkipGramResult skipgram_train_tokens(const std::vector<std::vector<int>>& seqs, int vocab,
                                     const SkipGramConfig& config) {
  std::vector<std::vector<SparseLabel>> s;
  for (const auto& seq : seqs) {
    std::vector<SparseLabel> row;
    for (int t : seq) {
      if (t < 0 || t >= vocab) throw DataError("token id out of vocabulary range");
      row.push_back(one_hot(t));
    }
    s.push_back(std::move(row));
  }
  return skipgram_train(s, vocab, config);
}

SkipGramResult skipgram_train_soft(const std::vector<std::vector<Eigen::VectorXd>>& seqs,
                                   const SkipGramConfig& config) {
  std::vector<std::vector<SparseLabel>> s;
  int vocab = -1;
  for (const auto& seq : seqs) {
    std::vector<SparseLabel> row;
    for (const auto& v : seq) {
      if (vocab < 0) vocab = static_cast<int>(v.size());
      if (v.size() != vocab) throw DataError("soft labels differ in size");
      row.push_back(sparse_from_dense(v));
    }
    s.push_back(std::move(row));
  }
  if (vocab < 0) throw DataError("skip-gram corpus is empty");
  return skipgram_train(s, vocab, config);
}

void save_skipgram(const SkipGramModel& model, const std::filesystem::path& path) {
  nn::Checkpoint ckpt;
  ckpt.magic = kSkipGramMagic;
  ckpt.dims = {static_cast<std::uint32_t>(model.vocab()), static_cast<std::uint32_t>(model.dim()), 0, 0};
  nn::append_blocks(ckpt, model.params());
  nn::write_checkpoint(ckpt, path);
}

SkipGramModel load_skipgram(const std::filesystem::path& path) {
  const nn::Checkpoint ckpt = nn::read_checkpoint(path, kSkipGramMagic);
  SkipGramModel m(static_cast<int>(ckpt.dims[0]), static_cast<int>(ckpt.dims[1]), 0);
  nn::load_blocks(ckpt, m.params());
  return m;
}

Embedding semantic_embed(const nn::Encoder& encoder, const ClusterModel& clusters,
                         const SkipGramModel& sg, const FrameMatrix& segment,
                         SoftLabelReading reading) {
  if (clusters.k() != sg.vocab())
    throw DataError("cluster count " + std::to_string(clusters.k()) +
                    " differs from skip-gram vocabulary " + std::to_string(sg.vocab()));
  return sg.embed(soft_label(clusters, encoder.encode(segment), reading));
}

}  // namespace awe
