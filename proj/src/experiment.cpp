// experiment.cpp

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

#include "awe/experiment.hpp"

#include "awe/alignment.hpp"
#include "awe/nn/checkpoint.hpp"
#include "awe/nn/recurrent.hpp"
#include "awe/parallel.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace awe {

namespace fs = std::filesystem;

namespace {

enum class KeyType { integer, real, text, flag, list, range };

struct KeyInfo {
  const char* key;
  const char* value;
  KeyType type;
};

// Desk-scale defaults.
const std::vector<KeyInfo>& registry() {
  static const std::vector<KeyInfo> keys = {
      {"flow", "contrastive-chapter", KeyType::text},
      {"seed", "1", KeyType::integer},
      // synthetic data
      {"languages", "a:100:0,b:100:0,c:100:0,d:30:0,x:100:1,y:100:2,tgt:30:0,qbe:200:0",
       KeyType::list},
      {"synth.phone_count", "20", KeyType::integer},
      {"synth.phone_dim", "13", KeyType::integer},
      {"synth.speakers_per_language", "8", KeyType::integer},
      {"synth.tokens_per_type", "20", KeyType::integer},
      {"synth.eval_speakers", "4", KeyType::integer},
      {"synth.eval_tokens_per_type", "6", KeyType::integer},
      {"synth.frames_per_phone", "2:4", KeyType::range},
      {"synth.phones_per_word", "3:5", KeyType::range},
      {"synth.words_per_utterance", "2:4", KeyType::range},
      {"synth.noise_sigma", "0.25", KeyType::real},
      {"synth.speaker_offset_sigma", "0.2", KeyType::real},
      {"synth.phone_shift_sigma", "0.25", KeyType::real},
      {"synth.speaker_normalize", "false", KeyType::flag},
      {"train_languages", "a,b,c", KeyType::list},
      {"dev_language", "d", KeyType::text},
      {"target_language", "tgt", KeyType::text},
      {"search_language", "qbe", KeyType::text},
      {"related_languages", "a,b", KeyType::list},
      {"unrelated_languages", "x,y", KeyType::list},
      // models and training
      {"model", "contrastive", KeyType::text},
      {"models", "cae,siamese,contrastive", KeyType::list},
      {"hidden_dim", "48", KeyType::integer},
      {"embedding_dim", "32", KeyType::integer},
      {"layers", "2", KeyType::integer},
      {"learning_rate", "0.001", KeyType::real},
      {"cae.batch_size", "32", KeyType::integer},
      {"siamese.batch_size", "8", KeyType::integer},
      {"contrastive.batch_size", "32", KeyType::integer},
      {"margin", "0.25", KeyType::real},
      {"temperature", "0.1", KeyType::real},
      {"epochs", "20", KeyType::integer},
      {"ae_pretrain_epochs", "5", KeyType::integer},
      {"patience", "10", KeyType::integer},
      {"max_pairs_per_epoch", "3000", KeyType::integer},
      {"pair_cap", "0", KeyType::integer},
      {"discovered.count", "1500", KeyType::integer},
      {"discovered.precision", "0.7", KeyType::real},
      {"adapt.freeze", "default", KeyType::text},
      {"adapt.epochs", "20", KeyType::integer},
      {"adapt.learning_rate", "0", KeyType::real},
      {"language_choice.single_languages", "true", KeyType::flag},
      // retrieval
      {"seg.min_len", "6", KeyType::integer},
      {"seg.max_len", "20", KeyType::integer},
      {"seg.start_stride", "1", KeyType::integer},
      {"seg.len_stride", "2", KeyType::integer},
      {"qbe.query_types", "10", KeyType::integer},
      {"qbe.queries_per_type", "2", KeyType::integer},
      {"kws.keywords", "10", KeyType::integer},
      {"kws.templates", "5", KeyType::integer},
      {"kws.top_k", "0", KeyType::integer},
      // semantic track
      {"semantic.language", "sem:30:0", KeyType::text},
      {"semantic.topic_count", "5", KeyType::integer},
      {"semantic.topic_overlap", "0.3", KeyType::real},
      {"semantic.tokens_per_type", "40", KeyType::integer},
      {"semantic.words_per_utterance", "4:8", KeyType::range},
      {"semantic.window", "3", KeyType::integer},
      {"semantic.layers", "3", KeyType::integer},
      {"semantic.epochs", "10", KeyType::integer},
      {"semantic.batch_size", "32", KeyType::integer},
      {"semantic.negatives", "20", KeyType::integer},
      {"semantic.clusters", "30", KeyType::integer},
      {"semantic.sigma", "0.01", KeyType::real},
      {"semantic.soft_label", "distance", KeyType::text},
      {"semantic.kmeans_restarts", "5", KeyType::integer},
      {"semantic.skipgram_dim", "20", KeyType::integer},
      {"semantic.skipgram_epochs", "10", KeyType::integer},
      {"semantic.projection_hidden", "64", KeyType::integer},
      {"semantic.methods", "phonetic,speech2vec,contrastive,init,project,cluster-skipgram",
       KeyType::list},
      {"semantic.queries_per_type", "2", KeyType::integer},
  };
  return keys;
}

const KeyInfo& key_info(const std::string& key) {
  for (const auto& k : registry())
    if (key == k.key) return k;
  throw UsageError("unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

long long to_integer(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long x = 0;
  try {
    x = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw UsageError(key + ": '" + v + "' is not an integer");
  return x;
}

double to_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw UsageError(key + ": '" + v + "' is not a number");
  return x;
}

bool to_flag(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw UsageError(key + ": '" + v + "' is not a boolean");
}

IntRange to_range(const std::string& key, const std::string& v) {
  const auto parts = split_list(v, ':');
  if (parts.size() != 2) throw UsageError(key + ": expected lo:hi, got '" + v + "'");
  return {static_cast<int>(to_integer(key, parts[0])), static_cast<int>(to_integer(key, parts[1]))};
}

void check_value(const KeyInfo& info, const std::string& v) {
  switch (info.type) {
    case KeyType::integer: to_integer(info.key, v); break;
    case KeyType::real: to_real(info.key, v); break;
    case KeyType::flag: to_flag(info.key, v); break;
    case KeyType::range: to_range(info.key, v); break;
    case KeyType::text:
    case KeyType::list: break;
  }
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  for (const auto& k : registry()) values_[k.key] = k.value;
}

ExperimentConfig ExperimentConfig::parse(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::stringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(n) + ": ";
    if (eq == std::string::npos) throw UsageError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (!seen.insert(key).second) throw UsageError(where + "duplicate key '" + key + "'");
    try {
      cfg.set(key, trim(line.substr(eq + 1)));
    } catch (const UsageError& e) {
      throw UsageError(where + e.what());
    }
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  const KeyInfo& info = key_info(key);
  check_value(info, value);
  values_[key] = value;
}

void ExperimentConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw UsageError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

const std::string& ExperimentConfig::get(const std::string& key) const {
  key_info(key);
  return values_.at(key);
}

int ExperimentConfig::get_int(const std::string& key) const {
  return static_cast<int>(to_integer(key, get(key)));
}

double ExperimentConfig::get_double(const std::string& key) const { return to_real(key, get(key)); }

std::uint64_t ExperimentConfig::get_seed(const std::string& key) const {
  return static_cast<std::uint64_t>(to_integer(key, get(key)));
}

bool ExperimentConfig::get_bool(const std::string& key) const { return to_flag(key, get(key)); }

std::vector<std::string> ExperimentConfig::get_list(const std::string& key) const {
  return split_list(get(key), ',');
}

IntRange ExperimentConfig::get_range(const std::string& key) const { return to_range(key, get(key)); }

std::string ExperimentConfig::resolved() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

void ExperimentConfig::write_resolved(const fs::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << resolved();
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<std::string> ExperimentConfig::known_keys() {
  std::vector<std::string> out;
  for (const auto& k : registry()) out.push_back(k.key);
  return out;
}

// ---------------------------------------------------------------------------
// Config readers

std::vector<LanguageSpec> parse_languages(const std::string& text) {
  std::vector<LanguageSpec> out;
  for (const std::string& item : split_list(text, ',')) {
    const auto f = split_list(item, ':');
    if (f.size() != 3 && f.size() != 4)
      throw UsageError("language '" + item + "': expected name:vocab:inventory[:shared]");
    LanguageSpec l;
    l.name = f[0];
    l.vocab_size = static_cast<int>(to_integer("languages", f[1]));
    l.inventory = static_cast<int>(to_integer("languages", f[2]));
    if (f.size() == 4) l.shared_vocab_fraction = to_real("languages", f[3]);
    out.push_back(l);
  }
  return out;
}

namespace {

SynthSpec base_spec(const ExperimentConfig& cfg, Split split) {
  SynthSpec s;
  s.seed = cfg.get_seed("seed");
  s.phone_count = cfg.get_int("synth.phone_count");
  s.phone_dim = cfg.get_int("synth.phone_dim");
  const bool train = split == Split::train;
  s.speakers_per_language = cfg.get_int(train ? "synth.speakers_per_language" : "synth.eval_speakers");
  s.tokens_per_type = cfg.get_int(train ? "synth.tokens_per_type" : "synth.eval_tokens_per_type");
  s.frames_per_phone = cfg.get_range("synth.frames_per_phone");
  s.phones_per_word = cfg.get_range("synth.phones_per_word");
  s.words_per_utterance = cfg.get_range("synth.words_per_utterance");
  s.noise_sigma = cfg.get_double("synth.noise_sigma");
  s.speaker_offset_sigma = cfg.get_double("synth.speaker_offset_sigma");
  s.phone_shift_sigma = cfg.get_double("synth.phone_shift_sigma");
  s.split = split;
  return s;
}

}  // namespace

SynthSpec synth_spec(const ExperimentConfig& cfg, Split split) {
  SynthSpec s = base_spec(cfg, split);
  s.languages = parse_languages(cfg.get("languages"));
  s.validate();
  return s;
}

SynthSpec semantic_synth_spec(const ExperimentConfig& cfg, Split split) {
  SynthSpec s = base_spec(cfg, split);
  s.languages = parse_languages(cfg.get("semantic.language"));
  if (s.languages.size() != 1) throw UsageError("semantic.language must name one language");
  s.tokens_per_type = cfg.get_int("semantic.tokens_per_type");
  s.topic_count = cfg.get_int("semantic.topic_count");
  s.topic_overlap = cfg.get_double("semantic.topic_overlap");
  s.words_per_utterance = cfg.get_range("semantic.words_per_utterance");
  if (s.topic_count < 1) throw UsageError("semantic.topic_count must be >= 1");
  s.validate();
  return s;
}

Corpus generate_corpus(const SynthSpec& spec, bool normalize) {
  Corpus c = generate_synthetic_corpus(spec);
  return normalize ? speaker_normalize(c) : c;
}

TrainConfig train_config(const ExperimentConfig& cfg, ModelKind kind, Regime regime) {
  TrainConfig c = default_train_config(kind, regime);
  c.dims = {cfg.get_int("synth.phone_dim"), cfg.get_int("hidden_dim"), cfg.get_int("embedding_dim"),
            cfg.get_int("layers")};
  c.learning_rate = cfg.get_double("learning_rate");
  c.batch_size = static_cast<std::size_t>(cfg.get_int(std::string(to_string(kind)) + ".batch_size"));
  c.margin = cfg.get_double("margin");
  c.temperature = cfg.get_double("temperature");
  c.epochs = cfg.get_int("epochs");
  c.ae_pretrain_epochs = cfg.get_int("ae_pretrain_epochs");
  c.patience = cfg.get_int("patience");
  c.seed = cfg.get_seed("seed");
  c.max_pairs_per_epoch = static_cast<std::size_t>(cfg.get_int("max_pairs_per_epoch"));
  if (regime == Regime::adapt) {
    const double lr = cfg.get_double("adapt.learning_rate");
    c.learning_rate = lr > 0.0 ? lr : adapt_learning_rate(kind);
    c.epochs = cfg.get_int("adapt.epochs");
    c.freeze = freeze_policy(cfg, kind);
  }
  c.validate();
  return c;
}

SegmentationParams segmentation_params(const ExperimentConfig& cfg) {
  SegmentationParams p;
  p.min_len = cfg.get_int("seg.min_len");
  p.max_len = cfg.get_int("seg.max_len");
  p.start_stride = cfg.get_int("seg.start_stride");
  p.len_stride = cfg.get_int("seg.len_stride");
  segment_sliding(p.max_len, p);  // validates
  return p;
}

FreezePolicy freeze_policy(const ExperimentConfig& cfg, ModelKind kind) {
  const std::string& f = cfg.get("adapt.freeze");
  const int layers = cfg.get_int("layers");
  if (f == "default") return FreezePolicy::adapt_default(kind, layers);
  if (f == "all") return FreezePolicy::freeze_all(layers);
  if (f == "none") return FreezePolicy{};
  throw UsageError("adapt.freeze: expected default, all or none, got '" + f + "'");
}

// ---------------------------------------------------------------------------
// Saved embedders

namespace {
constexpr std::array<char, 4> kProjectionMagic{'A', 'W', 'E', 'P'};
}

void save_projection(const nn::ProjectionNet& net, const fs::path& path) {
  nn::Checkpoint ckpt;
  ckpt.magic = kProjectionMagic;
  ckpt.dims = {static_cast<std::uint32_t>(net.input_dim()), static_cast<std::uint32_t>(net.hidden_dim()),
               static_cast<std::uint32_t>(net.output_dim()), 0};
  nn::append_blocks(ckpt, net.params());
  nn::write_checkpoint(ckpt, path);
}

nn::ProjectionNet load_projection(const fs::path& path) {
  const nn::Checkpoint ckpt = nn::read_checkpoint(path, kProjectionMagic);
  nn::ProjectionNet net;
  try {
    net = nn::ProjectionNet(static_cast<int>(ckpt.dims[0]), static_cast<int>(ckpt.dims[1]),
                            static_cast<int>(ckpt.dims[2]), 0);
  } catch (const UsageError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  nn::load_blocks(ckpt, net.params());
  return net;
}

Embedding EmbedderBundle::embed(const FrameMatrix& x) const {
  if (clusters && skipgram) return semantic_embed(model.encoder, *clusters, *skipgram, x, reading);
  Embedding z = model.embed(x);
  return projection ? projection->apply(z) : z;
}

Embedder EmbedderBundle::embedder() const {
  return [this](const FrameMatrix& x) { return embed(x); };
}

void EmbedderBundle::save(const fs::path& dir) const {
  fs::create_directories(dir);
  save_model(model, dir / "model.awem");
  std::ofstream meta(dir / "bundle.txt");
  meta << "reading = " << (reading == SoftLabelReading::distance ? "distance" : "similarity") << "\n";
  if (projection) save_projection(*projection, dir / "projection.awep");
  if (clusters) save_cluster_model(*clusters, dir / "clusters.awek");
  if (skipgram) save_skipgram(*skipgram, dir / "skipgram.awes");
  if (!meta) throw DataError("write failed for " + (dir / "bundle.txt").string());
}

EmbedderBundle EmbedderBundle::load(const fs::path& path) {
  EmbedderBundle b;
  if (!fs::is_directory(path)) {
    b.model = load_model(path);
    return b;
  }
  b.model = load_model(path / "model.awem");
  std::ifstream meta(path / "bundle.txt");
  std::string line;
  while (std::getline(meta, line))
    if (line.find("similarity") != std::string::npos) b.reading = SoftLabelReading::similarity;
  if (fs::exists(path / "projection.awep")) b.projection = load_projection(path / "projection.awep");
  if (fs::exists(path / "clusters.awek")) b.clusters = load_cluster_model(path / "clusters.awek");
  if (fs::exists(path / "skipgram.awes")) b.skipgram = load_skipgram(path / "skipgram.awes");
  if (b.clusters.has_value() != b.skipgram.has_value())
    throw DataError(path.string() + ": clusters and skip-gram must come together");
  return b;
}

// ---------------------------------------------------------------------------
// Semantic retrieval helpers

std::vector<std::string> topic_relevant_utterances(const Corpus& corpus, const LanguageTruth& truth,
                                                   const std::vector<int>& topics) {
  std::map<std::string, std::size_t> type_of;
  for (std::size_t w = 0; w < truth.labels.size(); ++w) type_of[truth.labels[w]] = w;
  std::vector<std::string> out;
  for (const auto& [utt, members] : corpus.utterances()) {
    std::set<int> possible;
    bool first = true;
    for (std::size_t i : members) {
      const auto& label = corpus[i].word_label;
      if (!label) throw DataError("topic relevance needs word labels");
      const auto it = type_of.find(*label);
      if (it == type_of.end()) throw DataError("word '" + *label + "' is not in " + truth.name);
      const auto& ts = truth.topics.at(it->second);
      std::set<int> cur(ts.begin(), ts.end());
      if (first) {
        possible = cur;
        first = false;
      } else {
        std::set<int> both;
        std::set_intersection(possible.begin(), possible.end(), cur.begin(), cur.end(),
                              std::inserter(both, both.begin()));
        possible = std::move(both);
      }
    }
    for (int t : topics)
      if (possible.count(t)) {
        out.push_back(utt);
        break;
      }
  }
  return out;
}

std::vector<SimilarityPair> topic_reference_pairs(const LanguageTruth& truth) {
  std::vector<SimilarityPair> out;
  for (std::size_t a = 0; a < truth.labels.size(); ++a)
    for (std::size_t b = a + 1; b < truth.labels.size(); ++b)
      out.push_back({truth.labels[a], truth.labels[b], topic_pmi(truth, a, b)});
  return out;
}

SemanticQbeMetrics semantic_qbe(const Embedder& embed, const Corpus& queries, const Corpus& search,
                                const LanguageTruth& truth) {
  if (queries.empty()) throw DataError("semantic QbE without queries");
  std::map<std::string, std::size_t> type_of;
  for (std::size_t w = 0; w < truth.labels.size(); ++w) type_of[truth.labels[w]] = w;
  // Word-segment units, embedded once; each query masks its own type.
  std::vector<Embedding> units(search.size());
  parallel_for(search.size(), [&](std::size_t i) {
    Embedding z = embed(search[i].features);
    const double n = z.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw NumericError("degenerate embedding for " + search[i].id);
    units[i] = z / n;
  });
  std::vector<double> p10, pn, scores;
  std::vector<bool> positive;
  std::vector<std::string> types;
  for (const Segment& q : queries.segments()) {
    if (!q.word_label) throw DataError("semantic QbE queries need labels");
    const auto it = type_of.find(*q.word_label);
    if (it == type_of.end()) throw DataError("query word '" + *q.word_label + "' is unknown");
    const CorpusView view = mask_query_occurrences(search, *q.word_label);
    Embedding zq = embed(q.features);
    if (!(zq.norm() > 0.0)) throw NumericError("degenerate query embedding for " + q.id);
    zq.normalize();
    std::vector<std::pair<double, std::string>> ranked;
    for (const auto& [utt, members] : search.utterances()) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i : members)
        if (!view.masked(i)) best = std::min(best, std::max(0.0, 1.0 - units[i].dot(zq)));
      if (std::isfinite(best)) ranked.emplace_back(best, utt);
    }
    std::sort(ranked.begin(), ranked.end());
    std::vector<std::string> ranking;
    for (const auto& r : ranked) ranking.push_back(r.second);
    const auto relevant = topic_relevant_utterances(search, truth, truth.topics.at(it->second));
    std::set<std::string> rel(relevant.begin(), relevant.end());
    std::vector<std::string> rel_ranked;
    for (const auto& [s, u] : ranked) {
      scores.push_back(s);
      positive.push_back(rel.count(u) > 0);
      if (rel.count(u)) rel_ranked.push_back(u);
    }
    if (rel_ranked.empty()) continue;
    p10.push_back(precision_at_k(ranking, rel_ranked, 10));
    pn.push_back(precision_at_n(ranking, rel_ranked));
    types.push_back(*q.word_label);
  }
  if (p10.empty()) throw DataError("no semantic query has a relevant utterance");
  SemanticQbeMetrics m;
  m.p_at_10 = macro_average(p10, types);
  m.p_at_n = macro_average(pn, types);
  m.eer = equal_error_rate(scores, positive);
  return m;
}

// ---------------------------------------------------------------------------
// Flows

std::string_view to_string(Flow f) {
  switch (f) {
    case Flow::contrastive_chapter: return "contrastive-chapter";
    case Flow::adaptation_chapter: return "adaptation-chapter";
    case Flow::language_choice: return "language-choice";
    case Flow::kws: return "kws";
    case Flow::semantic: return "semantic";
  }
  return "?";
}

Flow parse_flow(std::string_view s) {
  for (Flow f : {Flow::contrastive_chapter, Flow::adaptation_chapter, Flow::language_choice, Flow::kws,
                 Flow::semantic})
    if (s == to_string(f)) return f;
  if (s == "adaptation") return Flow::adaptation_chapter;
  throw UsageError("unknown flow '" + std::string(s) + "'");
}

void write_run_logs(const std::vector<RunLog>& logs, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "run\tepoch\tloss\tdev_metric\n";
  for (const auto& r : logs)
    for (const auto& e : r.log.epochs)
      out << r.run << '\t' << e.epoch << '\t' << format_double(e.loss) << '\t'
          << format_double(e.dev_metric) << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Shared state of one flow run.
class Workspace {
 public:
  Workspace(const ExperimentConfig& cfg, fs::path out) : cfg_(cfg), out_(std::move(out)) {
    if (!out_.empty()) fs::create_directories(out_ / "checkpoints");
  }

  const ExperimentConfig& cfg() const { return cfg_; }
  std::uint64_t seed() const { return cfg_.get_seed("seed"); }
  bool normalize() const { return cfg_.get_bool("synth.speaker_normalize"); }
  FlowOutput& output() { return output_; }
  EvalReport& metrics() { return output_.metrics; }
  const fs::path& out() const { return out_; }

  // Languages are generated independently, so each split keeps only the
  // languages asked for.
  Corpus corpus(Split split, const std::vector<std::string>& languages) {
    const auto key = std::make_pair(split, languages);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    SynthSpec spec = synth_spec(cfg_, split);
    std::vector<LanguageSpec> chosen;
    for (const auto& name : languages) {
      auto l = std::find_if(spec.languages.begin(), spec.languages.end(),
                            [&](const LanguageSpec& x) { return x.name == name; });
      if (l == spec.languages.end()) throw UsageError("language '" + name + "' is not configured");
      chosen.push_back(*l);
    }
    spec.languages = chosen;
    return cache_.emplace(key, generate_corpus(spec, normalize())).first->second;
  }

  Corpus dev() { return corpus(Split::dev, {cfg_.get("dev_language")}); }

  void record(const std::string& run, const TrainLog& log) { output_.logs.push_back({run, log}); }
  void time(const std::string& step, double s) { output_.timings.emplace_back(step, s); }

  void save(const std::string& run, const AweModel& m) const {
    if (!out_.empty()) save_model(m, out_ / "checkpoints" / (run + ".awem"));
  }

  void finish() const {
    if (out_.empty()) return;
    cfg_.write_resolved(out_ / "config.resolved");
    output_.metrics.write_tsv(out_ / "metrics.tsv");
    write_run_logs(output_.logs, out_ / "log.tsv");
    std::ofstream t(out_ / "timing.tsv");
    t << "step\tseconds\n";
    for (const auto& [k, v] : output_.timings) t << k << '\t' << v << '\n';
  }

 private:
  const ExperimentConfig& cfg_;
  fs::path out_;
  FlowOutput output_;
  std::map<std::pair<Split, std::vector<std::string>>, Corpus> cache_;
};

Embedder embedder(const AweModel& m) {
  return [&m](const FrameMatrix& x) { return m.embed(x); };
}

std::vector<Embedding> embed_all(const Embedder& embed, const Corpus& c) {
  std::vector<Embedding> out(c.size());
  parallel_for(c.size(), [&](std::size_t i) { out[i] = embed(c[i].features); });
  return out;
}

std::vector<std::string> speakers_of(const Corpus& c) {
  std::vector<std::string> out;
  for (const auto& s : c.segments()) out.push_back(s.speaker);
  return out;
}

std::vector<std::string> labels_of(const Corpus& c) {
  std::vector<std::string> out;
  for (const auto& s : c.segments()) {
    if (!s.word_label) throw DataError("segment '" + s.id + "' has no label");
    out.push_back(*s.word_label);
  }
  return out;
}

// AP and speaker-probe accuracy under one prefix.
void evaluate_model(Workspace& ws, const std::string& prefix, const Embedder& embed, const Corpus& test) {
  const auto z = embed_all(embed, test);
  ws.metrics().set(prefix + ".ap", same_different_ap(z, labels_of(test), speakers_of(test)).ap);
  ws.metrics().set(prefix + ".speaker_acc",
                   speaker_probe(z, speakers_of(test), derive_seed(ws.seed(), "probe")));
}

TrainResult train_multilingual(Workspace& ws, ModelKind kind, const std::vector<std::string>& languages,
                               const std::string& run) {
  const Corpus train = ws.corpus(Split::train, languages);
  const Corpus dev = ws.dev();
  const int cap = ws.cfg().get_int("pair_cap");
  const PairSet pairs = build_positive_pairs(
      train, cap > 0 ? std::optional<std::size_t>(cap) : std::nullopt, derive_seed(ws.seed(), "pairs"));
  const auto t0 = Clock::now();
  TrainResult r = languages.size() >= 2
                      ? [&] {
                          StrategySpec spec;
                          spec.model_kind = kind;
                          spec.regime = Regime::multilingual;
                          spec.languages = languages;
                          spec.config = train_config(ws.cfg(), kind);
                          return train_awe(spec, train, pairs, &dev);
                        }()
                      : train_supervised(kind, train, pairs, train_config(ws.cfg(), kind), &dev);
  ws.time("train." + run, seconds_since(t0));
  ws.record(run, r.log);
  ws.save(run, r.model);
  return r;
}

PairSet discovered_pairs(Workspace& ws, const Corpus& target) {
  return simulate_discovered_pairs(target, static_cast<std::size_t>(ws.cfg().get_int("discovered.count")),
                                   ws.cfg().get_double("discovered.precision"),
                                   derive_seed(ws.seed(), "discovered"));
}

std::vector<ModelKind> model_kinds(const ExperimentConfig& cfg) {
  std::vector<ModelKind> out;
  for (const auto& m : cfg.get_list("models")) out.push_back(parse_model_kind(m));
  if (out.empty()) throw UsageError("models is empty");
  return out;
}

void contrastive_chapter(Workspace& ws) {
  const std::string target = ws.cfg().get("target_language");
  const Corpus test = ws.corpus(Split::test, {target});
  const Corpus target_train = ws.corpus(Split::train, {target});
  const auto labels = labels_of(test);
  const auto speakers = speakers_of(test);

  std::vector<Embedding> down;
  for (const auto& s : test.segments()) down.push_back(nn::embed_downsample(s.features));
  ws.metrics().set("baseline.downsample.ap", same_different_ap(down, labels, speakers).ap);
  std::vector<FrameMatrix> frames;
  for (const auto& s : test.segments()) frames.push_back(s.features);
  ws.metrics().set("baseline.dtw.ap", same_different_ap_dtw(frames, labels, speakers).ap);

  const PairSet discovered = discovered_pairs(ws, target_train);
  ws.metrics().set("discovered.precision", pair_precision(discovered, target_train));
  for (ModelKind kind : model_kinds(ws.cfg())) {
    const std::string k(to_string(kind));
    const TrainConfig cfg = train_config(ws.cfg(), kind);
    const AweModel untrained = init_model(kind, cfg.dims, cfg.seed);
    ws.metrics().set("untrained." + k + ".ap", same_different_ap(test, embedder(untrained)));

    StrategySpec spec;
    spec.model_kind = kind;
    spec.regime = Regime::mono_unsupervised;
    spec.config = cfg;
    // Training conditions for unsupervised models are fixed in advance; no
    // target labels are used for model selection.
    const auto t0 = Clock::now();
    const TrainResult mono = train_awe(spec, target_train, discovered);
    ws.time("train.mono." + k, seconds_since(t0));
    ws.record("mono." + k, mono.log);
    ws.save("mono." + k, mono.model);
    evaluate_model(ws, "mono." + k, embedder(mono.model), test);

    const TrainResult multi = train_multilingual(ws, kind, ws.cfg().get_list("train_languages"), "multi." + k);
    evaluate_model(ws, "multi." + k, embedder(multi.model), test);
  }
}

bool frozen_unchanged(const AweModel& before, const AweModel& after, const FreezePolicy& policy) {
  const nn::FrozenSet frozen = policy.encoder_tensors(before.encoder);
  const auto& a = before.encoder.params();
  const auto& b = after.encoder.params();
  for (std::size_t i = 0; i < a.size(); ++i)
    if (frozen.count(a.name(i)) && a[i] != b[i]) return false;
  return true;
}

void adaptation_chapter(Workspace& ws) {
  const std::string target = ws.cfg().get("target_language");
  const Corpus test = ws.corpus(Split::test, {target});
  const Corpus target_train = ws.corpus(Split::train, {target});
  const Corpus dev = ws.dev();
  const PairSet discovered = discovered_pairs(ws, target_train);
  for (ModelKind kind : model_kinds(ws.cfg())) {
    const std::string k(to_string(kind));
    const TrainResult source = train_multilingual(ws, kind, ws.cfg().get_list("train_languages"), "source." + k);
    evaluate_model(ws, "source." + k, embedder(source.model), test);
    const TrainConfig cfg = train_config(ws.cfg(), kind, Regime::adapt);
    const auto t0 = Clock::now();
    const TrainResult adapted = adapt_model(source.model, target_train, discovered, cfg.freeze, cfg, &dev);
    ws.time("train.adapted." + k, seconds_since(t0));
    ws.record("adapted." + k, adapted.log);
    ws.save("adapted." + k, adapted.model);
    evaluate_model(ws, "adapted." + k, embedder(adapted.model), test);
    ws.metrics().set("adapted." + k + ".frozen_unchanged",
                     frozen_unchanged(source.model, adapted.model, cfg.freeze) ? 1.0 : 0.0);
  }
}

void language_choice(Workspace& ws) {
  const Corpus test = ws.corpus(Split::test, {ws.cfg().get("target_language")});
  const ModelKind kind = parse_model_kind(ws.cfg().get("model"));
  for (const char* group : {"related", "unrelated"}) {
    const std::string g(group);
    const auto langs = ws.cfg().get_list(g + "_languages");
    if (langs.empty()) throw UsageError(g + "_languages is empty");
    const TrainResult r = train_multilingual(ws, kind, langs, g);
    ws.metrics().set(g + ".ap", same_different_ap(test, embedder(r.model)));
  }
  if (!ws.cfg().get_bool("language_choice.single_languages")) return;
  std::vector<std::string> singles = ws.cfg().get_list("related_languages");
  for (const auto& l : ws.cfg().get_list("unrelated_languages")) singles.push_back(l);
  for (const auto& l : singles) {
    const TrainResult r = train_multilingual(ws, kind, {l}, "single." + l);
    ws.metrics().set("single." + l + ".ap", same_different_ap(test, embedder(r.model)));
  }
}

// First `count` word types of a seeded shuffle of the corpus vocabulary.
std::vector<std::string> pick_types(const Corpus& c, int count, std::uint64_t seed) {
  std::set<std::string> vocab;
  for (const auto& s : c.segments()) vocab.insert(*s.word_label);
  std::vector<std::string> v(vocab.begin(), vocab.end());
  Rng rng(seed);
  seeded_shuffle(v, rng);
  if (count < 1 || static_cast<std::size_t>(count) > v.size())
    throw UsageError("cannot pick " + std::to_string(count) + " of " + std::to_string(v.size()) +
                     " word types");
  v.resize(static_cast<std::size_t>(count));
  return v;
}

// Up to `count` seeded tokens of `label`.
std::vector<std::size_t> pick_tokens(const Corpus& c, const std::string& label, int count, Rng& rng) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (c[i].word_label == label) idx.push_back(i);
  seeded_shuffle(idx, rng);
  if (idx.size() > static_cast<std::size_t>(count)) idx.resize(static_cast<std::size_t>(count));
  return idx;
}

void set_detection(Workspace& ws, const std::string& prefix, const std::vector<KwsDecision>& d,
                   const std::vector<bool>& truth) {
  std::vector<bool> flags;
  for (const auto& x : d) flags.push_back(x.flag);
  const DetectionMetrics m = detection_metrics(flags, truth);
  ws.metrics().set(prefix + ".precision", m.precision);
  ws.metrics().set(prefix + ".recall", m.recall);
  ws.metrics().set(prefix + ".f1", m.f1);
  ws.metrics().set(prefix + ".mean_f1", mean_keyword_f1(d, truth));
}

bool same_decisions(const std::vector<KwsDecision>& a, const std::vector<KwsDecision>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].keyword != b[i].keyword || a[i].utterance_id != b[i].utterance_id ||
        a[i].score != b[i].score || a[i].flag != b[i].flag || !(a[i].best == b[i].best))
      return false;
  return true;
}

void kws_flow(Workspace& ws) {
  const std::string lang = ws.cfg().get("search_language");
  const Corpus templates = ws.corpus(Split::train, {lang});
  const Corpus dev = ws.corpus(Split::dev, {lang});
  const Corpus test = ws.corpus(Split::test, {lang});
  const SegmentationParams seg = segmentation_params(ws.cfg());
  const ModelKind kind = parse_model_kind(ws.cfg().get("model"));
  const TrainResult model = train_multilingual(ws, kind, ws.cfg().get_list("train_languages"), "phonetic");
  const Embedder embed = embedder(model.model);

  auto t0 = Clock::now();
  const SearchIndex dev_index = build_index(embed, CorpusView(dev), IndexUnits::sliding, seg, "awe");
  const SearchIndex test_index = build_index(embed, CorpusView(test), IndexUnits::sliding, seg, "awe");
  ws.time("kws.index", seconds_since(t0));

  // Keyword spotting: templates from held-out speakers, thresholds from dev.
  Rng rng(derive_seed(ws.seed(), "templates"));
  std::vector<KeywordSpec> keywords;
  for (const auto& w : pick_types(templates, ws.cfg().get_int("kws.keywords"), derive_seed(ws.seed(), "keywords"))) {
    std::vector<std::string> ids;
    for (std::size_t i : pick_tokens(templates, w, ws.cfg().get_int("kws.templates"), rng))
      ids.push_back(templates[i].id);
    keywords.push_back(make_keyword(w, ids, templates, embed));
  }
  const auto dev_d = kws_detect(dev_index, keywords, {});
  const auto dev_truth = kws_truth(dev_d, dev);
  const auto test_d = kws_detect(test_index, keywords, {});
  const auto test_truth = kws_truth(test_d, test);
  for (ThresholdMode mode : {ThresholdMode::global, ThresholdMode::per_keyword}) {
    const std::string m = mode == ThresholdMode::global ? "global" : "per_keyword";
    const KwsThresholds th = tune_kws_thresholds(dev_d, dev_truth, mode);
    set_detection(ws, "kws.dev." + m, apply_thresholds(dev_d, th), dev_truth);
    const auto flagged = apply_thresholds(test_d, th);
    set_detection(ws, "kws.test." + m, flagged, test_truth);
    if (!ws.out().empty()) {
      const fs::path p = ws.out() / ("kws_test_" + m + ".tsv");
      write_kws_tsv(flagged, p);
      ws.metrics().set("kws.test." + m + ".tsv_consistent", same_decisions(read_kws_tsv(p), flagged) ? 1.0 : 0.0);
      const int top_k = ws.cfg().get_int("kws.top_k");
      if (top_k > 0)
        write_kws_tsv(flagged, ws.out() / ("kws_test_" + m + "_top.tsv"), static_cast<std::size_t>(top_k));
    }
  }

  // Query-by-example over the test collection.
  std::vector<std::size_t> queries;
  std::vector<std::string> types;
  Rng qrng(derive_seed(ws.seed(), "queries"));
  for (const auto& w : pick_types(dev, ws.cfg().get_int("qbe.query_types"), derive_seed(ws.seed(), "query-types")))
    for (std::size_t i : pick_tokens(dev, w, ws.cfg().get_int("qbe.queries_per_type"), qrng)) {
      queries.push_back(i);
      types.push_back(w);
    }
  std::vector<double> p_awe, p_dtw, p_rand, n_awe, n_dtw;
  const CorpusView view(test);
  double awe_s = 0.0, dtw_s = 0.0;
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const FrameMatrix& x = dev[queries[qi]].features;
    const auto rel = utterances_with_label(test, types[qi]);
    t0 = Clock::now();
    const QueryResult a = qbe_rank(test_index, embed(x));
    awe_s += seconds_since(t0);
    t0 = Clock::now();
    const QueryResult d = qbe_rank_dtw(x, view, IndexUnits::sliding, seg);
    dtw_s += seconds_since(t0);
    p_awe.push_back(precision_at_k(a.ids(), rel, 10));
    n_awe.push_back(precision_at_n(a.ids(), rel));
    p_dtw.push_back(precision_at_k(d.ids(), rel, 10));
    n_dtw.push_back(precision_at_n(d.ids(), rel));
    p_rand.push_back(precision_at_k(random_ranking(test, derive_seed(ws.seed(), qi)), rel, 10));
  }
  ws.metrics().set("qbe.awe.p10", macro_average(p_awe, types));
  ws.metrics().set("qbe.awe.pn", macro_average(n_awe, types));
  ws.metrics().set("qbe.dtw.p10", macro_average(p_dtw, types));
  ws.metrics().set("qbe.dtw.pn", macro_average(n_dtw, types));
  ws.metrics().set("qbe.random.p10", macro_average(p_rand, types));
  ws.time("qbe.awe.query_seconds", awe_s);
  ws.time("qbe.dtw.query_seconds", dtw_s);
}

void semantic_flow(Workspace& ws) {
  const ExperimentConfig& cfg = ws.cfg();
  const SynthSpec train_spec = semantic_synth_spec(cfg, Split::train);
  const LanguageTruth truth = language_truth(train_spec, train_spec.languages[0].name);
  // Semantic training sees no labels.
  const Corpus train = generate_corpus(train_spec, ws.normalize()).without_labels();
  const Corpus dev = generate_corpus(semantic_synth_spec(cfg, Split::dev), ws.normalize());
  const Corpus test = generate_corpus(semantic_synth_spec(cfg, Split::test), ws.normalize());
  const auto reference = topic_reference_pairs(truth);
  const auto test_labels = labels_of(test);

  // Queries: a few dev tokens of every type.
  std::vector<std::size_t> qidx;
  Rng qrng(derive_seed(ws.seed(), "semantic-queries"));
  for (const auto& w : truth.labels)
    for (std::size_t i : pick_tokens(dev, w, cfg.get_int("semantic.queries_per_type"), qrng)) qidx.push_back(i);
  std::sort(qidx.begin(), qidx.end());
  std::vector<Segment> qsegs;
  for (std::size_t i : qidx) qsegs.push_back(dev[i]);
  const Corpus queries(qsegs, Split::dev);

  // Phonetic encoder: multilingual, deeper so that the init variant can keep
  // its first two layers.
  ExperimentConfig pcfg = cfg;
  pcfg.set("layers", cfg.get("semantic.layers"));
  Workspace phon_ws(pcfg, {});
  const TrainResult phonetic = train_multilingual(phon_ws, ModelKind::contrastive,
                                                  cfg.get_list("train_languages"), "phonetic");
  for (auto& l : phon_ws.output().logs) ws.record(l.run, l.log);
  ws.save("phonetic", phonetic.model);

  const ContextPairSet context = build_context_pairs(train, cfg.get_int("semantic.window"));
  TrainConfig scfg = train_config(pcfg, ModelKind::contrastive);
  scfg.epochs = cfg.get_int("semantic.epochs");
  scfg.batch_size = static_cast<std::size_t>(cfg.get_int("semantic.batch_size"));
  scfg.negatives_per_positive = cfg.get_int("semantic.negatives");
  scfg.max_pairs_per_epoch = static_cast<std::size_t>(cfg.get_int("max_pairs_per_epoch"));

  auto report = [&](const std::string& method, const Embedder& embed) {
    const auto z = embed_all(embed, test);
    const WordSimilarity s = word_similarity(z, test_labels, reference, derive_seed(ws.seed(), "draws"));
    ws.metrics().set(method + ".rho_avg", s.rho_avg);
    ws.metrics().set(method + ".rho_single", s.rho_single);
    const SemanticQbeMetrics q = semantic_qbe(embed, queries, test, truth);
    ws.metrics().set(method + ".qbe.p10", q.p_at_10);
    ws.metrics().set(method + ".qbe.pn", q.p_at_n);
    ws.metrics().set(method + ".qbe.eer", q.eer);
  };

  for (const std::string& method : cfg.get_list("semantic.methods")) {
    const auto t0 = Clock::now();
    if (method == "phonetic") {
      report(method, embedder(phonetic.model));
    } else if (method == "speech2vec") {
      TrainConfig c = train_config(pcfg, ModelKind::cae);
      c.epochs = scfg.epochs;
      c.batch_size = scfg.batch_size;
      c.ae_pretrain_epochs = 0;
      const TrainResult r = train_speech2vec(train, context, c);
      ws.record(method, r.log);
      ws.save(method, r.model);
      report(method, embedder(r.model));
    } else if (method == "contrastive" || method == "init") {
      const auto r = train_semantic_contrastive(train, context, scfg,
                                                method == "init" ? &phonetic.model.encoder : nullptr);
      ws.record(method, r.log);
      const AweModel m{ModelKind::contrastive, r.encoder, std::nullopt};
      ws.save(method, m);
      report(method, embedder(m));
    } else if (method == "project") {
      const auto z = embed_all(embedder(phonetic.model), train);
      const int e = phonetic.model.encoder.dims().embedding_dim;
      const nn::ProjectionNet init(e, cfg.get_int("semantic.projection_hidden"), e,
                                   derive_seed(ws.seed(), "projection"));
      const auto r = train_projection(z, train, context, init, scfg);
      ws.record(method, r.log);
      report(method, [&](const FrameMatrix& x) { return r.net.apply(phonetic.model.embed(x)); });
    } else if (method == "cluster-skipgram") {
      ClusterSkipGramConfig c;
      c.clusters = cfg.get_int("semantic.clusters");
      c.sigma = cfg.get_double("semantic.sigma");
      c.kmeans.restarts = cfg.get_int("semantic.kmeans_restarts");
      c.skipgram.dim = cfg.get_int("semantic.skipgram_dim");
      c.skipgram.window = cfg.get_int("semantic.window");
      c.skipgram.epochs = cfg.get_int("semantic.skipgram_epochs");
      c.skipgram.seed = derive_seed(ws.seed(), "skipgram");
      const std::string& reading = cfg.get("semantic.soft_label");
      if (reading == "distance") c.reading = SoftLabelReading::distance;
      else if (reading == "similarity") c.reading = SoftLabelReading::similarity;
      else throw UsageError("semantic.soft_label: expected distance or similarity");
      const ClusterSkipGram r = train_cluster_skipgram(phonetic.model.encoder, train, c,
                                                       derive_seed(ws.seed(), "clusters"));
      TrainLog log;
      for (std::size_t i = 0; i < r.epoch_loss.size(); ++i)
        log.epochs.push_back({static_cast<int>(i + 1), r.epoch_loss[i], std::numeric_limits<double>::quiet_NaN()});
      ws.record(method, log);
      if (!ws.out().empty()) {
        save_cluster_model(r.clusters, ws.out() / "checkpoints" / "clusters.awek");
        save_skipgram(r.skipgram, ws.out() / "checkpoints" / "skipgram.awes");
      }
      const auto zt = unit_length(embed_all(embedder(phonetic.model), test));
      ws.metrics().set(method + ".purity", cluster_purity(kmeans_assign(r.clusters, zt), test_labels));
      report(method, [&](const FrameMatrix& x) { return r.embed(phonetic.model.encoder, x); });
    } else {
      throw UsageError("unknown semantic method '" + method + "'");
    }
    ws.time("semantic." + method, seconds_since(t0));
  }
}

}  // namespace

FlowOutput run_flow(const ExperimentConfig& cfg, const fs::path& out_dir) {
  const Flow flow = parse_flow(cfg.get("flow"));
  Workspace ws(cfg, out_dir);
  switch (flow) {
    case Flow::contrastive_chapter: contrastive_chapter(ws); break;
    case Flow::adaptation_chapter: adaptation_chapter(ws); break;
    case Flow::language_choice: language_choice(ws); break;
    case Flow::kws: kws_flow(ws); break;
    case Flow::semantic: semantic_flow(ws); break;
  }
  ws.finish();
  return ws.output();
}

}  // namespace awe
