// src/evaluation.cpp

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

#include "awe/alignment.hpp"
#include "awe/corpus.hpp"
#include "awe/nn/losses.hpp"
#include "awe/nn/optim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_set>

namespace awe {

PRCurve average_precision(const std::vector<double>& distances,
                          const std::vector<bool>& relevant) {
  if (distances.size() != relevant.size())
    throw DataError("average_precision: distances and relevance differ in length");
  const std::size_t total_rel = static_cast<std::size_t>(std::count(relevant.begin(), relevant.end(), true));
  if (total_rel == 0) throw DataError("no relevant pair: AP is undefined");
  std::vector<std::size_t> order(distances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return distances[a] < distances[b]; });
  PRCurve curve;
  std::size_t cum_rel = 0, cum_ret = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double d = distances[order[k]];
    std::size_t group_rel = 0, group = 0;
    while (k < order.size() && distances[order[k]] == d) {
      group_rel += relevant[order[k]] ? 1 : 0;
      ++group;
      ++k;
    }
    cum_rel += group_rel;
    cum_ret += group;
    const double precision = static_cast<double>(cum_rel) / static_cast<double>(cum_ret);
    curve.ap += (static_cast<double>(group_rel) / static_cast<double>(total_rel)) * precision;
    curve.thresholds.push_back(d);
    curve.precision.push_back(precision);
    curve.recall.push_back(static_cast<double>(cum_rel) / static_cast<double>(total_rel));
  }
  return curve;
}

namespace {

void check_lengths(std::size_t n, std::size_t labels, std::size_t speakers) {
  if (labels != n || speakers != n)
    throw DataError("same-different: labels and speakers must match the item count");
}

std::vector<bool> swdp_relevance(const std::vector<std::string>& labels,
                                 const std::vector<std::string>& speakers) {
  std::vector<bool> rel;
  const std::size_t n = labels.size();
  rel.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      rel.push_back(labels[i] == labels[j] && speakers[i] != speakers[j]);
  return rel;
}

}  // namespace

PRCurve same_different_ap(const std::vector<Embedding>& embeddings,
                          const std::vector<std::string>& labels,
                          const std::vector<std::string>& speakers) {
  const std::size_t n = embeddings.size();
  check_lengths(n, labels.size(), speakers.size());
  if (n < 2) throw DataError("same-different needs at least two items");
  const Eigen::Index dim = embeddings.front().size();
  for (const auto& e : embeddings) {
    if (e.size() != dim) throw DataError("embeddings differ in dimension");
    if (e.norm() == 0.0) throw NumericError("zero-norm embedding in same-different evaluation");
  }
  std::vector<double> dist;
  dist.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      dist.push_back(nn::cosine_distance(embeddings[i], embeddings[j]));
  return average_precision(dist, swdp_relevance(labels, speakers));
}

PRCurve same_different_ap_dtw(const std::vector<FrameMatrix>& sequences,
                              const std::vector<std::string>& labels,
                              const std::vector<std::string>& speakers) {
  const std::size_t n = sequences.size();
  check_lengths(n, labels.size(), speakers.size());
  if (n < 2) throw DataError("same-different needs at least two items");
  std::vector<FrameMatrix> unit;
  unit.reserve(n);
  for (const auto& s : sequences) unit.push_back(unit_rows(s));
  std::vector<double> dist;
  dist.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) dist.push_back(dtw_distance_unit(unit[i], unit[j]));
  return average_precision(dist, swdp_relevance(labels, speakers));
}

double same_different_ap(const Corpus& corpus,
                         const std::function<Embedding(const FrameMatrix&)>& embed) {
  std::vector<Embedding> z;
  std::vector<std::string> labels, speakers;
  for (const Segment& s : corpus.segments()) {
    if (!s.word_label) throw DataError("same-different evaluation needs labelled segments");
    z.push_back(embed(s.features));
    labels.push_back(*s.word_label);
    speakers.push_back(s.speaker);
  }
  return same_different_ap(z, labels, speakers).ap;
}

// ---------------------------------------------------------------------------

double speaker_probe(const std::vector<Embedding>& embeddings,
                     const std::vector<std::string>& speakers, std::uint64_t seed,
                     SpeakerProbeOptions options) {
  if (embeddings.size() != speakers.size())
    throw DataError("speaker probe: one speaker per embedding required");
  std::map<std::string, std::vector<std::size_t>> by_speaker;
  for (std::size_t i = 0; i < speakers.size(); ++i) by_speaker[speakers[i]].push_back(i);
  if (by_speaker.size() < 2) throw DataError("speaker probe needs at least two speakers");
  Rng rng(seed);
  std::vector<std::size_t> train, test;
  std::vector<int> cls(speakers.size());
  int c = 0;
  for (auto& [spk, items] : by_speaker) {
    if (items.size() < 2) throw DataError("speaker '" + spk + "' has a single item");
    for (std::size_t i : items) cls[i] = c;
    ++c;
    seeded_shuffle(items, rng);
    const std::size_t n_train = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(options.train_fraction * items.size())), 1,
        items.size() - 1);
    train.insert(train.end(), items.begin(), items.begin() + n_train);
    test.insert(test.end(), items.begin() + n_train, items.end());
  }
  const int classes = c;
  const Eigen::Index dim = embeddings.front().size();

  // Standardize with training statistics.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim), sd = Eigen::VectorXd::Zero(dim);
  for (std::size_t i : train) mean += embeddings[i];
  mean /= static_cast<double>(train.size());
  for (std::size_t i : train) sd += (embeddings[i] - mean).array().square().matrix();
  sd = (sd / static_cast<double>(train.size())).cwiseSqrt();
  for (Eigen::Index d = 0; d < dim; ++d)
    if (sd[d] < 1e-12) sd[d] = 1.0;
  auto features = [&](const std::vector<std::size_t>& idx) {
    Eigen::MatrixXd x(dim, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k)
      x.col(static_cast<Eigen::Index>(k)) = (embeddings[idx[k]] - mean).cwiseQuotient(sd);
    return x;
  };
  const Eigen::MatrixXd xtr = features(train), xte = features(test);
  Eigen::MatrixXd target = Eigen::MatrixXd::Zero(classes, xtr.cols());
  for (std::size_t k = 0; k < train.size(); ++k) target(cls[train[k]], static_cast<Eigen::Index>(k)) = 1.0;

  nn::ParameterSet params;
  params.add("w", classes, dim);
  params.add("b", classes, 1);
  nn::ParameterSet grad = params.zeros_like();
  nn::Adam adam(params, {options.learning_rate});
  double prev = std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(xtr.cols());
  for (int it = 0; it < options.max_iterations; ++it) {
    Eigen::MatrixXd logits = params[0] * xtr;
    logits.colwise() += params[1].col(0);
    double loss = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      const double mx = logits.col(j).maxCoeff();
      auto e = (logits.col(j).array() - mx).exp();
      const double s = e.sum();
      loss += -(logits.col(j).dot(target.col(j)) - mx - std::log(s));
      logits.col(j) = e / s;
    }
    loss = loss / n + 0.5 * options.l2 * params[0].squaredNorm();
    const Eigen::MatrixXd dlogits = (logits - target) / n;
    grad[0] = dlogits * xtr.transpose() + options.l2 * params[0];
    grad[1] = dlogits.rowwise().sum();
    adam.step(params, grad);
    if (std::abs(prev - loss) < options.tolerance) break;
    prev = loss;
  }
  Eigen::MatrixXd scores = params[0] * xte;
  scores.colwise() += params[1].col(0);
  std::size_t correct = 0;
  for (std::size_t k = 0; k < test.size(); ++k) {
    Eigen::Index best;
    scores.col(static_cast<Eigen::Index>(k)).maxCoeff(&best);
    if (best == cls[test[k]]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

// ---------------------------------------------------------------------------

double precision_at_k(const std::vector<std::string>& ranking,
                      const std::vector<std::string>& relevant, std::size_t k) {
  if (relevant.empty()) throw DataError("precision@k: empty relevance set");
  if (k == 0) throw UsageError("precision@k needs k >= 1");
  if (ranking.size() < k)
    throw DataError("precision@" + std::to_string(k) + " needs at least " + std::to_string(k) +
                    " ranked items, got " + std::to_string(ranking.size()));
  const std::unordered_set<std::string> rel(relevant.begin(), relevant.end());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < k; ++i) hits += rel.count(ranking[i]);
  return static_cast<double>(hits) / static_cast<double>(k);
}

double precision_at_n(const std::vector<std::string>& ranking,
                      const std::vector<std::string>& relevant) {
  const std::set<std::string> unique(relevant.begin(), relevant.end());
  return precision_at_k(ranking, relevant, unique.size());
}

double macro_average(const std::vector<double>& values, const std::vector<std::string>& types) {
  if (values.size() != types.size() || values.empty())
    throw DataError("macro_average: need one type per value and at least one value");
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < values.size(); ++i) {
    acc[types[i]].first += values[i];
    acc[types[i]].second += 1;
  }
  double total = 0.0;
  for (const auto& [t, sum_count] : acc) total += sum_count.first / static_cast<double>(sum_count.second);
  return total / static_cast<double>(acc.size());
}

double equal_error_rate(const std::vector<double>& scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw DataError("EER: scores and labels differ in length");
  const double n_pos = static_cast<double>(std::count(positive.begin(), positive.end(), true));
  const double n_neg = static_cast<double>(positive.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("EER needs both positive and negative items");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sweep point 0 accepts nothing; point k accepts every score <= k-th unique value.
  double far_prev = 0.0, frr_prev = 1.0;
  double acc_pos = 0.0, acc_neg = 0.0;
  for (std::size_t k = 0; k < order.size();) {
    const double s = scores[order[k]];
    while (k < order.size() && scores[order[k]] == s) {
      (positive[order[k]] ? acc_pos : acc_neg) += 1.0;
      ++k;
    }
    const double far = acc_neg / n_neg, frr = 1.0 - acc_pos / n_pos;
    const double diff = far - frr, diff_prev = far_prev - frr_prev;
    if (diff >= 0.0) {
      if (diff == 0.0) return far;
      const double alpha = -diff_prev / (diff - diff_prev);
      return far_prev + alpha * (far - far_prev);
    }
    far_prev = far;
    frr_prev = frr;
  }
  return far_prev;  // unreachable: the last point has FAR = 1, FRR = 0
}

DetectionMetrics detection_metrics(std::size_t hits, std::size_t detected, std::size_t total) {
  if (total == 0) throw DataError("recall is undefined: no true keyword occurrence");
  if (hits > detected || hits > total) throw DataError("detection counts are inconsistent");
  DetectionMetrics m;
  m.hits = hits;
  m.detected = detected;
  m.total = total;
  m.precision = detected == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(detected);
  m.recall = static_cast<double>(hits) / static_cast<double>(total);
  m.f1 = (m.precision + m.recall) == 0.0 ? 0.0
                                         : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

DetectionMetrics detection_metrics(const std::vector<bool>& flags, const std::vector<bool>& truth) {
  if (truth.empty()) throw DataError("empty truth set");
  if (flags.size() != truth.size()) throw DataError("flags and truth differ in length");
  std::size_t hits = 0, detected = 0, total = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    detected += flags[i];
    total += truth[i];
    hits += flags[i] && truth[i];
  }
  return detection_metrics(hits, detected, total);
}

std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t k = 0; k < order.size();) {
    std::size_t e = k;
    while (e < order.size() && x[order[e]] == x[order[k]]) ++e;
    const double r = 0.5 * static_cast<double>(k + e - 1) + 1.0;
    for (std::size_t i = k; i < e; ++i) ranks[order[i]] = r;
    k = e;
  }
  return ranks;
}

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DataError("spearman: inputs differ in length");
  if (x.size() < 3) throw DataError("spearman: need at least three items");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DataError("spearman: zero rank variance");
  return sxy / std::sqrt(sxx * syy);
}

WordSimilarity word_similarity(const std::vector<Embedding>& embeddings,
                               const std::vector<std::string>& labels,
                               const std::vector<SimilarityPair>& reference,
                               std::uint64_t seed, int draws) {
  if (embeddings.size() != labels.size()) throw DataError("word_similarity: one label per embedding");
  std::map<std::string, std::vector<std::size_t>> tokens;
  for (std::size_t i = 0; i < labels.size(); ++i) tokens[labels[i]].push_back(i);
  std::vector<double> ref;
  for (const auto& p : reference) {
    for (const std::string* w : {&p.a, &p.b})
      if (!tokens.count(*w)) throw DataError("reference word '" + *w + "' has no token");
    ref.push_back(p.reference);
  }
  std::map<std::string, Embedding> means;
  for (const auto& [w, idx] : tokens) {
    Embedding m = Embedding::Zero(embeddings[idx.front()].size());
    for (std::size_t i : idx) m += embeddings[i];
    means[w] = m / static_cast<double>(idx.size());
  }
  std::vector<double> sims;
  for (const auto& p : reference) sims.push_back(nn::cosine_similarity(means[p.a], means[p.b]));
  WordSimilarity out;
  out.rho_avg = spearman_rho(sims, ref);

  Rng rng(seed);
  double total = 0.0;
  for (int d = 0; d < draws; ++d) {
    std::map<std::string, std::size_t> pick;
    for (const auto& [w, idx] : tokens) pick[w] = idx[uniform_index(rng, idx.size())];
    sims.clear();
    for (const auto& p : reference)
      sims.push_back(nn::cosine_similarity(embeddings[pick[p.a]], embeddings[pick[p.b]]));
    total += spearman_rho(sims, ref);
  }
  out.rho_single = total / draws;
  return out;
}

// ---------------------------------------------------------------------------

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

void EvalReport::set(const std::string& name, double value) {
  for (auto& [n, v] : entries_)
    if (n == name) {
      v = value;
      return;
    }
  entries_.emplace_back(name, value);
}

std::optional<double> EvalReport::get(const std::string& name) const {
  for (const auto& [n, v] : entries_)
    if (n == name) return v;
  return std::nullopt;
}

double EvalReport::at(const std::string& name) const {
  auto v = get(name);
  if (!v) throw UsageError("report has no metric '" + name + "'");
  return *v;
}

void EvalReport::merge(const EvalReport& other, const std::string& prefix) {
  for (const auto& [n, v] : other.entries_) set(prefix + n, v);
}

std::string EvalReport::to_tsv() const {
  std::string out;
  for (const auto& [n, v] : entries_) out += n + "\t" + format_double(v) + "\n";
  return out;
}

void EvalReport::write_tsv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << to_tsv();
}

EvalReport EvalReport::read_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  EvalReport r;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError("malformed metrics line '" + line + "'");
    double v = 0.0;
    const char* b = line.data() + tab + 1;
    auto [p, ec] = std::from_chars(b, line.data() + line.size(), v);
    if (ec != std::errc()) throw DataError("malformed metric value in '" + line + "'");
    r.set(line.substr(0, tab), v);
  }
  return r;
}

void write_pr_curve(const PRCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "# recall\tprecision\n";
  for (std::size_t i = 0; i < curve.recall.size(); ++i)
    out << format_double(curve.recall[i]) << '\t' << format_double(curve.precision[i]) << '\n';
}

}  // namespace awe
