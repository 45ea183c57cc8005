// strategies.cpp

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

#include "awe/strategies.hpp"

#include "awe/evaluation.hpp"
#include "awe/nn/checkpoint.hpp"
#include "awe/nn/losses.hpp"
#include "awe/nn/optim.hpp"
#include "awe/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace awe {

namespace {

constexpr std::array<char, 4> kModelMagic{'A', 'W', 'E', 'M'};
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::cae: return "cae";
    case ModelKind::siamese: return "siamese";
    case ModelKind::contrastive: return "contrastive";
  }
  return "?";
}

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::mono_unsupervised: return "mono";
    case Regime::multilingual: return "multi";
    case Regime::adapt: return "adapt";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view s) {
  if (s == "cae") return ModelKind::cae;
  if (s == "siamese") return ModelKind::siamese;
  if (s == "contrastive") return ModelKind::contrastive;
  throw UsageError("unknown model kind '" + std::string(s) + "'");
}

Regime parse_regime(std::string_view s) {
  if (s == "mono" || s == "mono_unsupervised") return Regime::mono_unsupervised;
  if (s == "multi" || s == "multilingual") return Regime::multilingual;
  if (s == "adapt") return Regime::adapt;
  throw UsageError("unknown regime '" + std::string(s) + "'");
}

nn::FrozenSet FreezePolicy::encoder_tensors(const nn::Encoder& encoder) const {
  nn::FrozenSet out;
  for (int l : frozen_encoder_layers) {
    if (l < 0 || l >= encoder.dims().layers)
      throw UsageError("freeze policy names layer " + std::to_string(l) + " of a " +
                       std::to_string(encoder.dims().layers) + "-layer encoder");
    for (auto& n : encoder.layer_tensors(l)) out.insert(n);
  }
  if (freeze_projection)
    for (auto& n : encoder.projection_tensors()) out.insert(n);
  return out;
}

FreezePolicy FreezePolicy::adapt_default(ModelKind kind, int layers) {
  FreezePolicy p;
  if (kind == ModelKind::cae) {
    for (int l = 0; l < layers; ++l) p.frozen_encoder_layers.insert(l);
    p.reinit_decoder = true;
  }
  return p;
}

FreezePolicy FreezePolicy::freeze_all(int layers) {
  FreezePolicy p;
  for (int l = 0; l < layers; ++l) p.frozen_encoder_layers.insert(l);
  p.freeze_projection = true;
  return p;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw UsageError("learning_rate must be > 0");
  if (!(temperature > 0.0)) throw UsageError("temperature must be > 0");
  if (!(margin >= 0.0)) throw UsageError("margin must be >= 0");
  if (epochs < 0) throw UsageError("epochs must be >= 0");
  if (ae_pretrain_epochs < 0) throw UsageError("ae_pretrain_epochs must be >= 0");
  if (patience < 1) throw UsageError("patience must be >= 1");
  if (batch_size < 1) throw UsageError("batch_size must be >= 1");
  if (negatives_per_positive < 1) throw UsageError("negatives_per_positive must be >= 1");
}

TrainConfig default_train_config(ModelKind kind, Regime regime) {
  TrainConfig c;
  c.batch_size = kind == ModelKind::contrastive ? 600 : 300;
  if (regime == Regime::adapt) {
    c.learning_rate = adapt_learning_rate(kind);
    c.freeze = FreezePolicy::adapt_default(kind, c.dims.layers);
  }
  return c;
}

double adapt_learning_rate(ModelKind kind) {
  switch (kind) {
    case ModelKind::cae: return 1e-4;
    case ModelKind::siamese: return 1e-5;
    case ModelKind::contrastive: return 1e-4;
  }
  return 1e-4;
}

bool AweModel::operator==(const AweModel& o) const {
  if (kind != o.kind || !(encoder.dims() == o.encoder.dims()) ||
      !(encoder.params() == o.encoder.params()) || decoder.has_value() != o.decoder.has_value())
    return false;
  return !decoder || decoder->params() == o.decoder->params();
}

AweModel init_model(ModelKind kind, const nn::RnnDims& dims, std::uint64_t seed) {
  AweModel m;
  m.kind = kind;
  m.encoder = nn::Encoder(dims, derive_seed(seed, "encoder"));
  if (kind == ModelKind::cae) m.decoder = nn::Decoder(dims, derive_seed(seed, "decoder"));
  return m;
}

void save_model(const AweModel& model, const std::filesystem::path& path) {
  nn::Checkpoint ckpt;
  ckpt.magic = kModelMagic;
  const auto& d = model.encoder.dims();
  ckpt.dims = {static_cast<std::uint32_t>(d.layers), static_cast<std::uint32_t>(d.hidden_dim),
               static_cast<std::uint32_t>(d.embedding_dim), static_cast<std::uint32_t>(d.input_dim)};
  ckpt.blocks.push_back({"meta.kind", {static_cast<double>(static_cast<int>(model.kind))}});
  nn::append_blocks(ckpt, model.encoder.params());
  if (model.decoder) nn::append_blocks(ckpt, model.decoder->params());
  nn::write_checkpoint(ckpt, path);
}

AweModel load_model(const std::filesystem::path& path) {
  const nn::Checkpoint ckpt = nn::read_checkpoint(path, kModelMagic);
  const nn::RnnDims dims{static_cast<int>(ckpt.dims[3]), static_cast<int>(ckpt.dims[1]),
                         static_cast<int>(ckpt.dims[2]), static_cast<int>(ckpt.dims[0])};
  const auto* kind = ckpt.find("meta.kind");
  if (!kind || kind->values.size() != 1 || kind->values[0] < 0 || kind->values[0] > 2)
    throw DataError(path.string() + ": missing or invalid model kind");
  AweModel m;
  m.kind = static_cast<ModelKind>(static_cast<int>(kind->values[0]));
  try {
    m.encoder = nn::Encoder(dims, 0);
  } catch (const UsageError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  nn::load_blocks(ckpt, m.encoder.params());
  if (ckpt.find("dec.out.w")) {
    m.decoder = nn::Decoder(dims, 0);
    nn::load_blocks(ckpt, m.decoder->params());
  }
  return m;
}

void TrainLog::write_tsv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "epoch\tloss\tdev_metric\n";
  for (const auto& e : epochs)
    out << e.epoch << '\t' << format_double(e.loss) << '\t' << format_double(e.dev_metric) << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

TrainLog TrainLog::read_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "epoch\tloss\tdev_metric")
    throw DataError(path.string() + ": missing training-log header");
  TrainLog log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string a, b, c;
    if (!std::getline(ss, a, '\t') || !std::getline(ss, b, '\t') || !std::getline(ss, c))
      throw DataError(path.string() + ": malformed log row '" + line + "'");
    try {
      log.epochs.push_back({std::stoi(a), std::stod(b), std::stod(c)});
    } catch (const std::exception&) {
      throw DataError(path.string() + ": malformed log row '" + line + "'");
    }
  }
  return log;
}

void StrategySpec::validate() const {
  config.validate();
  if (regime == Regime::adapt && !source_checkpoint)
    throw UsageError("adapt regime needs a source checkpoint");
  if (regime == Regime::multilingual && languages.size() < 2)
    throw UsageError("multilingual regime needs at least two training languages");
}

// ---------------------------------------------------------------------------
// Training engine

namespace {

using IndexPair = std::pair<std::size_t, std::size_t>;

std::vector<IndexPair> resolve(const std::vector<IdPair>& pairs, const Corpus& corpus) {
  std::vector<IndexPair> out;
  out.reserve(pairs.size());
  for (const auto& [a, b] : pairs) out.emplace_back(corpus.index_of(a), corpus.index_of(b));
  return out;
}

void check_finite(double loss, int epoch, std::size_t batch) {
  if (!std::isfinite(loss))
    throw NumericError("non-finite loss " + std::to_string(loss) + " at epoch " +
                       std::to_string(epoch) + ", batch " + std::to_string(batch));
}

// Encodes each distinct segment of a batch once; gradients with respect to
// the embeddings are summed per segment before one backward pass.
class EmbeddingCache {
 public:
  EmbeddingCache(const nn::Encoder& enc, const Corpus& corpus) : enc_(enc), corpus_(corpus) {}

  const Embedding& z(std::size_t seg) {
    auto it = entries_.find(seg);
    if (it == entries_.end()) {
      Entry e;
      e.z = enc_.forward(corpus_[seg].features, e.trace);
      e.dz = Embedding::Zero(e.z.size());
      it = entries_.emplace(seg, std::move(e)).first;
    }
    return it->second.z;
  }
  void add_grad(std::size_t seg, const Eigen::VectorXd& g) { entries_.at(seg).dz += g; }

  void backward(nn::ParameterSet& grad) const {
    for (const auto& [seg, e] : entries_) enc_.backward(corpus_[seg].features, e.trace, e.dz, grad);
  }

 private:
  struct Entry {
    nn::RnnTrace trace;
    Embedding z, dz;
  };
  const nn::Encoder& enc_;
  const Corpus& corpus_;
  std::map<std::size_t, Entry> entries_;
};

struct EpochRng {
  Rng rng;
  EpochRng(std::uint64_t seed, int epoch) : rng(derive_seed(seed, static_cast<std::uint64_t>(epoch))) {}
};

template <class T>
std::vector<T> epoch_sample(const std::vector<T>& all, std::size_t cap, Rng& rng) {
  std::vector<T> v = all;
  seeded_shuffle(v, rng);
  if (cap > 0 && v.size() > cap) v.resize(cap);
  return v;
}

enum class LabelMode { word, pair_index };

struct PairTrainingJob {
  const Corpus* corpus = nullptr;
  std::vector<IdPair> pairs;  // ordered for cae, unordered otherwise
  LabelMode labels = LabelMode::pair_index;
  bool ae_pretrain = false;
  nn::FrozenSet frozen;
  const Corpus* dev = nullptr;
};

// One minibatch of CAE pairs; returns the mean loss and accumulates gradients.
double cae_batch(const AweModel& m, const Corpus& corpus, const std::vector<IndexPair>& batch,
                 bool autoencode, nn::ParameterSet& genc, nn::ParameterSet& gdec) {
  const double scale = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const auto& [a, b] : batch) {
    const FrameMatrix& x = corpus[a].features;
    const FrameMatrix& target = autoencode ? x : corpus[b].features;
    nn::RnnTrace et, dt;
    const Embedding z = m.encoder.forward(x, et);
    const FrameMatrix y = m.decoder->forward(z, static_cast<int>(target.rows()), dt);
    const auto lg = nn::reconstruction_loss(y, target);
    loss += lg.loss;
    const FrameMatrix dy = lg.grad * scale;
    const Embedding dz = m.decoder->backward(z, dt, dy, gdec);
    m.encoder.backward(x, et, dz, genc);
  }
  return loss * scale;
}

double embedding_batch(const AweModel& m, const Corpus& corpus, const ContrastiveBatch& batch,
                       const std::vector<int>* word_labels, const TrainConfig& cfg,
                       nn::ParameterSet& genc) {
  const auto idx = resolve(batch.positive_pairs, corpus);
  const Eigen::Index n = static_cast<Eigen::Index>(2 * idx.size());
  EmbeddingCache cache(m.encoder, corpus);
  Eigen::MatrixXd z(m.encoder.dims().embedding_dim, n);
  std::vector<std::size_t> cols;
  std::vector<int> labels;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (std::size_t seg : {idx[i].first, idx[i].second}) {
      z.col(static_cast<Eigen::Index>(cols.size())) = cache.z(seg);
      cols.push_back(seg);
      labels.push_back(word_labels ? (*word_labels)[seg] : static_cast<int>(i));
    }
  }
  nn::LossAndGrad lg;
  if (m.kind == ModelKind::siamese) {
    lg = nn::triplet_hard_loss(z, labels, cfg.margin);
  } else {
    lg = nn::contrastive_loss(z, cfg.temperature);
    const double s = 1.0 / static_cast<double>(n);
    lg.loss *= s;
    lg.grad *= s;
  }
  for (std::size_t j = 0; j < cols.size(); ++j) cache.add_grad(cols[j], lg.grad.col(static_cast<Eigen::Index>(j)));
  cache.backward(genc);
  return lg.loss;
}

double dev_ap(const AweModel& m, const Corpus& dev) {
  std::vector<Embedding> z(dev.size());
  parallel_for(dev.size(), [&](std::size_t i) { z[i] = m.encoder.encode(dev[i].features); });
  std::vector<std::string> labels, speakers;
  for (const auto& s : dev.segments()) {
    if (!s.word_label) throw DataError("dev corpus needs word labels");
    labels.push_back(*s.word_label);
    speakers.push_back(s.speaker);
  }
  return same_different_ap(z, labels, speakers).ap;
}

// Keeps the best dev checkpoint with patience; without dev data, the last.
class Selector {
 public:
  Selector(const AweModel& init, const Corpus* dev, int patience, TrainLog& log)
      : dev_(dev), patience_(patience), log_(log), best_(init) {
    const double ap = dev ? dev_ap(init, *dev) : kNaN;
    log_.epochs.push_back({0, kNaN, ap});
    best_ap_ = ap;
  }

  // Returns false when training should stop. Epochs with `warmup` set are
  // candidates but never count towards patience.
  bool record(int epoch, double loss, const AweModel& m, bool warmup = false) {
    if (!dev_) {
      log_.epochs.push_back({epoch, loss, kNaN});
      best_ = m;
      log_.selected_epoch = epoch;
      return true;
    }
    const double ap = dev_ap(m, *dev_);
    log_.epochs.push_back({epoch, loss, ap});
    if (ap > best_ap_) {
      best_ap_ = ap;
      best_ = m;
      log_.selected_epoch = epoch;
      stale_ = 0;
      return true;
    }
    if (warmup) return true;
    return ++stale_ < patience_;
  }

  AweModel& best() { return best_; }

 private:
  const Corpus* dev_;
  int patience_;
  TrainLog& log_;
  AweModel best_;
  double best_ap_ = kNaN;
  int stale_ = 0;
};

TrainResult run_pair_training(AweModel model, const PairTrainingJob& job, const TrainConfig& cfg) {
  cfg.validate();
  if (job.pairs.empty()) throw DataError("no training pairs");
  const Corpus& corpus = *job.corpus;
  if (model.kind == ModelKind::cae && !model.decoder) throw UsageError("cae model without decoder");

  std::vector<int> word_ids;
  if (job.labels == LabelMode::word) {
    std::map<std::string, int> ids;
    for (const auto& s : corpus.segments()) {
      if (!s.word_label) throw DataError("supervised training needs word labels on '" + s.id + "'");
      word_ids.push_back(ids.emplace(*s.word_label, static_cast<int>(ids.size())).first->second);
    }
  }
  const auto frozen = job.frozen;
  for (const auto& name : frozen) model.encoder.params().index(name);

  TrainResult result;
  Selector sel(model, job.dev, cfg.patience, result.log);
  nn::Adam enc_opt(model.encoder.params(), {cfg.learning_rate});
  std::optional<nn::Adam> dec_opt;
  if (model.decoder) dec_opt.emplace(model.decoder->params(), nn::AdamConfig{cfg.learning_rate});
  nn::ParameterSet genc = model.encoder.params().zeros_like();
  nn::ParameterSet gdec = model.decoder ? model.decoder->params().zeros_like() : nn::ParameterSet{};

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochRng er(cfg.seed, epoch);
    const auto pairs = epoch_sample(job.pairs, cfg.max_pairs_per_epoch, er.rng);
    double total = 0.0;
    std::size_t batches = 0;
    const bool ae = model.kind == ModelKind::cae && job.ae_pretrain && epoch <= cfg.ae_pretrain_epochs;
    if (model.kind == ModelKind::cae) {
      const auto idx = resolve(pairs, corpus);
      for (std::size_t start = 0; start < idx.size(); start += cfg.batch_size) {
        const std::vector<IndexPair> batch(
            idx.begin() + static_cast<long>(start),
            idx.begin() + static_cast<long>(std::min(idx.size(), start + cfg.batch_size)));
        genc.set_zero();
        gdec.set_zero();
        const double l = cae_batch(model, corpus, batch, ae, genc, gdec);
        check_finite(l, epoch, batches);
        enc_opt.step(model.encoder.params(), genc, frozen);
        dec_opt->step(model.decoder->params(), gdec);
        total += l;
        ++batches;
      }
    } else {
      const auto batches_list =
          build_contrastive_batches(pairs, cfg.batch_size, derive_seed(cfg.seed, "batches") + epoch);
      for (const auto& b : batches_list) {
        genc.set_zero();
        const double l = embedding_batch(model, corpus, b, word_ids.empty() ? nullptr : &word_ids, cfg, genc);
        check_finite(l, epoch, batches);
        enc_opt.step(model.encoder.params(), genc, frozen);
        total += l;
        ++batches;
      }
    }
    if (!sel.record(epoch, total / static_cast<double>(std::max<std::size_t>(batches, 1)), model, ae)) break;
  }
  result.model = std::move(sel.best());
  return result;
}

PairTrainingJob make_job(ModelKind kind, const Corpus& corpus, const PairSet& pairs, LabelMode labels,
                         const Corpus* dev) {
  PairTrainingJob job;
  job.corpus = &corpus;
  job.pairs = kind == ModelKind::cae ? pairs.pairs : pairs.unordered();
  job.labels = labels;
  job.dev = dev;
  return job;
}

}  // namespace

TrainResult train_awe(const StrategySpec& spec, const Corpus& train, const PairSet& pairs,
                      const Corpus* dev) {
  spec.validate();
  if (pairs.pairs.empty()) throw DataError("no training pairs");
  const TrainConfig& cfg = spec.config;
  const ModelKind kind = spec.model_kind;
  switch (spec.regime) {
    case Regime::mono_unsupervised: {
      if (pairs.source != PairSource::discovered)
        throw UsageError("mono_unsupervised training takes discovered pairs");
      const Corpus stripped = train.without_labels();
      auto job = make_job(kind, stripped, pairs, LabelMode::pair_index, dev);
      job.ae_pretrain = true;
      return run_pair_training(init_model(kind, cfg.dims, cfg.seed), job, cfg);
    }
    case Regime::multilingual: {
      if (pairs.source != PairSource::ground_truth)
        throw UsageError("multilingual training takes ground-truth pairs");
      return train_supervised(kind, train, pairs, cfg, dev);
    }
    case Regime::adapt: {
      const AweModel source = load_model(*spec.source_checkpoint);
      if (source.kind != kind)
        throw UsageError("source checkpoint holds a " + std::string(to_string(source.kind)) +
                         " model, not " + std::string(to_string(kind)));
      return adapt_model(source, train, pairs, cfg.freeze, cfg, dev);
    }
  }
  throw UsageError("unknown regime");
}

TrainResult train_supervised(ModelKind kind, const Corpus& train, const PairSet& pairs,
                             const TrainConfig& config, const Corpus* dev) {
  config.validate();
  if (pairs.pairs.empty()) throw DataError("no training pairs");
  if (pairs.source != PairSource::ground_truth)
    throw UsageError("supervised training takes ground-truth pairs");
  for (const auto& seg : train.segments())
    if (!seg.word_label) throw DataError("supervised training needs word labels; '" + seg.id + "' has none");
  auto job = make_job(kind, train, pairs, LabelMode::word, dev);
  job.ae_pretrain = true;
  return run_pair_training(init_model(kind, config.dims, config.seed), job, config);
}

TrainResult adapt_model(const AweModel& source, const Corpus& target, const PairSet& target_pairs,
                        const FreezePolicy& policy, const TrainConfig& config, const Corpus* dev) {
  if (target_pairs.pairs.empty()) throw DataError("no target pairs for adaptation");
  AweModel m = source;
  const nn::FrozenSet frozen = policy.encoder_tensors(m.encoder);
  if (policy.reinit_decoder && m.decoder)
    m.decoder = nn::Decoder(m.decoder->dims(), derive_seed(config.seed, "decoder-reinit"));
  const Corpus stripped = target.without_labels();
  auto job = make_job(m.kind, stripped, target_pairs, LabelMode::pair_index, dev);
  job.frozen = frozen;
  return run_pair_training(std::move(m), job, config);
}

// ---------------------------------------------------------------------------
// Semantic trainers

TrainResult train_speech2vec(const Corpus& corpus, const ContextPairSet& context,
                             const TrainConfig& config) {
  if (context.pairs.empty()) throw DataError("no context pairs");
  PairTrainingJob job;
  job.corpus = &corpus;
  job.pairs = context.pairs;
  return run_pair_training(init_model(ModelKind::cae, config.dims, config.seed), job, config);
}

std::vector<std::size_t> sample_negatives(const Corpus& corpus, std::size_t anchor, int window,
                                          int count, Rng& rng) {
  const Segment& a = corpus[anchor];
  auto excluded = [&](std::size_t i) {
    const Segment& s = corpus[i];
    return s.utterance_id == a.utterance_id && std::abs(s.position - a.position) <= window;
  };
  std::size_t blocked = 0;
  for (std::size_t i : corpus.utterances().at(a.utterance_id)) blocked += excluded(i);
  if (blocked >= corpus.size())
    throw DataError("no segment lies outside the context window of '" + a.id + "'");
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(count));
  while (out.size() < static_cast<std::size_t>(count)) {
    const std::size_t i = uniform_index(rng, corpus.size());
    if (!excluded(i)) out.push_back(i);
  }
  return out;
}

namespace {

// Shared positive/negative schedule of the semantic contrastive objectives.
template <class BatchFn>
TrainLog run_semantic_contrastive(const Corpus& corpus, const ContextPairSet& context,
                                  const TrainConfig& cfg, BatchFn&& step,
                                  std::vector<std::size_t>* first_batch_counts) {
  cfg.validate();
  if (context.pairs.empty()) throw DataError("no context pairs");
  const auto all = resolve(context.pairs, corpus);
  TrainLog log;
  log.epochs.push_back({0, kNaN, kNaN});
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochRng er(cfg.seed, epoch);
    const auto pairs = epoch_sample(all, cfg.max_pairs_per_epoch, er.rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < pairs.size(); start += cfg.batch_size) {
      std::vector<std::vector<std::size_t>> columns;  // anchor, context, negatives
      for (std::size_t i = start; i < std::min(pairs.size(), start + cfg.batch_size); ++i) {
        std::vector<std::size_t> c{pairs[i].first, pairs[i].second};
        const auto neg = sample_negatives(corpus, pairs[i].first, context.window,
                                          cfg.negatives_per_positive, er.rng);
        c.insert(c.end(), neg.begin(), neg.end());
        columns.push_back(std::move(c));
      }
      if (first_batch_counts && epoch == 1 && batches == 0)
        for (const auto& c : columns) first_batch_counts->push_back(c.size() - 2);
      const double l = step(columns);
      check_finite(l, epoch, batches);
      total += l;
      ++batches;
    }
    log.epochs.push_back({epoch, total / static_cast<double>(std::max<std::size_t>(batches, 1)), kNaN});
    log.selected_epoch = epoch;
  }
  return log;
}

}  // namespace

SemanticContrastiveResult train_semantic_contrastive(const Corpus& corpus,
                                                     const ContextPairSet& context,
                                                     const TrainConfig& config,
                                                     const nn::Encoder* init) {
  SemanticContrastiveResult r;
  nn::FrozenSet frozen;
  if (init) {
    if (init->dims().layers < 2) throw UsageError("initialising encoder needs at least two layers");
    if (init->dims().input_dim != corpus.dim())
      throw DataError("initialising encoder input dimension does not match the corpus");
    r.encoder = *init;
    FreezePolicy p;
    p.frozen_encoder_layers = {0, 1};
    frozen = p.encoder_tensors(r.encoder);
  } else {
    r.encoder = nn::Encoder(config.dims, derive_seed(config.seed, "encoder"));
  }
  nn::Adam opt(r.encoder.params(), {config.learning_rate});
  nn::ParameterSet grad = r.encoder.params().zeros_like();
  auto step = [&](const std::vector<std::vector<std::size_t>>& columns) {
    grad.set_zero();
    EmbeddingCache cache(r.encoder, corpus);
    const double scale = 1.0 / static_cast<double>(columns.size());
    double loss = 0.0;
    for (const auto& c : columns) {
      Eigen::MatrixXd z(r.encoder.dims().embedding_dim, static_cast<Eigen::Index>(c.size()));
      for (std::size_t j = 0; j < c.size(); ++j) z.col(static_cast<Eigen::Index>(j)) = cache.z(c[j]);
      const auto lg = nn::contrastive_loss_explicit(z, config.temperature);
      loss += lg.loss * scale;
      for (std::size_t j = 0; j < c.size(); ++j)
        cache.add_grad(c[j], lg.grad.col(static_cast<Eigen::Index>(j)) * scale);
    }
    cache.backward(grad);
    opt.step(r.encoder.params(), grad, frozen);
    return loss;
  };
  r.log = run_semantic_contrastive(corpus, context, config, step, &r.batch_negative_counts);
  return r;
}

ProjectionResult train_projection(const std::vector<Embedding>& phonetic, const Corpus& corpus,
                                  const ContextPairSet& context, nn::ProjectionNet net,
                                  const TrainConfig& config) {
  if (phonetic.size() != corpus.size()) throw DataError("one phonetic embedding per segment required");
  for (const auto& e : phonetic)
    if (e.size() != net.input_dim())
      throw DataError("phonetic embedding dimension " + std::to_string(e.size()) +
                      " != projection input " + std::to_string(net.input_dim()));
  ProjectionResult r;
  nn::Adam opt(net.params(), {config.learning_rate});
  nn::ParameterSet grad = net.params().zeros_like();
  auto step = [&](const std::vector<std::vector<std::size_t>>& columns) {
    grad.set_zero();
    const double scale = 1.0 / static_cast<double>(columns.size());
    double loss = 0.0;
    for (const auto& c : columns) {
      std::vector<nn::ProjectionNet::Trace> traces(c.size());
      Eigen::MatrixXd z(net.output_dim(), static_cast<Eigen::Index>(c.size()));
      for (std::size_t j = 0; j < c.size(); ++j)
        z.col(static_cast<Eigen::Index>(j)) = net.forward(phonetic[c[j]], traces[j]);
      const auto lg = nn::contrastive_loss_explicit(z, config.temperature);
      loss += lg.loss * scale;
      for (std::size_t j = 0; j < c.size(); ++j)
        net.backward(traces[j], lg.grad.col(static_cast<Eigen::Index>(j)) * scale, grad);
    }
    opt.step(net.params(), grad);
    return loss;
  };
  r.log = run_semantic_contrastive(corpus, context, config, step, nullptr);
  r.net = std::move(net);
  return r;
}

Embedding ClusterSkipGram::embed(const nn::Encoder& encoder, const FrameMatrix& x) const {
  return semantic_embed(encoder, clusters, skipgram, x, reading);
}

ClusterSkipGram train_cluster_skipgram(const nn::Encoder& phonetic, const Corpus& corpus,
                                       const ClusterSkipGramConfig& config, std::uint64_t seed) {
  if (corpus.empty()) throw DataError("empty corpus");
  std::vector<Embedding> z(corpus.size());
  parallel_for(corpus.size(), [&](std::size_t i) { z[i] = phonetic.encode(corpus[i].features); });
  ClusterSkipGram out;
  out.reading = config.reading;
  out.clusters = kmeans_fit(unit_length(z), config.clusters, derive_seed(seed, "kmeans"), config.kmeans).model;
  out.clusters.sigma = config.sigma;
  std::vector<std::vector<Eigen::VectorXd>> seqs;
  for (const auto& [utt, members] : corpus.utterances()) {
    std::vector<Eigen::VectorXd> s;
    for (std::size_t i : members) s.push_back(soft_label(out.clusters, z[i], config.reading));
    seqs.push_back(std::move(s));
  }
  SkipGramConfig sg = config.skipgram;
  sg.seed = derive_seed(seed, "skipgram");
  auto trained = skipgram_train_soft(seqs, sg);
  out.skipgram = std::move(trained.model);
  out.epoch_loss = std::move(trained.epoch_loss);
  return out;
}

}  // namespace awe
