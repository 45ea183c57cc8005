// cli.cpp

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

#include "awe/cli.hpp"

#include "awe/experiment.hpp"
#include "awe/nn/recurrent.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <set>

namespace awe {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out;

  ExperimentConfig load() const {
    ExperimentConfig cfg = config.empty() ? ExperimentConfig() : ExperimentConfig::load(config);
    for (const auto& s : sets) cfg.set_assignment(s);
    return cfg;
  }
};

void add_common(CLI::App* cmd, Common& c, bool out_required = true) {
  cmd->add_option("--config", c.config, "key = value file");
  cmd->add_option("--set", c.sets, "override, key=value (repeatable)");
  auto* o = cmd->add_option("--out", c.out, "output directory");
  if (out_required) o->required();
}

void prepare_out(const Common& c, const ExperimentConfig& cfg) {
  fs::create_directories(c.out);
  cfg.write_resolved(fs::path(c.out) / "config.resolved");
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "test") return Split::test;
  throw UsageError("unknown split '" + s + "'");
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<std::string> corpus_languages(const Corpus& c) {
  std::set<std::string> langs;
  for (const auto& s : c.segments()) langs.insert(s.language);
  return {langs.begin(), langs.end()};
}

std::vector<std::string> labels_of(const Corpus& c) {
  std::vector<std::string> out;
  for (const auto& s : c.segments()) {
    if (!s.word_label) throw DataError("segment '" + s.id + "' has no word label");
    out.push_back(*s.word_label);
  }
  return out;
}

std::vector<Embedding> embed_all(const Embedder& embed, const Corpus& c) {
  std::vector<Embedding> z;
  for (const auto& s : c.segments()) z.push_back(embed(s.features));
  return z;
}

// ---------------------------------------------------------------------------
// Subcommands

struct GenData {
  Common c;
  std::string split = "train";
  std::string languages;
  bool semantic = false;
  std::string discovered;

  void run() const {
    const ExperimentConfig cfg = c.load();
    const Split sp = parse_split(split);
    SynthSpec spec = semantic ? semantic_synth_spec(cfg, sp) : synth_spec(cfg, sp);
    if (!languages.empty()) {
      std::vector<LanguageSpec> chosen;
      for (const auto& name : split_commas(languages)) {
        auto it = std::find_if(spec.languages.begin(), spec.languages.end(),
                               [&](const LanguageSpec& l) { return l.name == name; });
        if (it == spec.languages.end()) throw UsageError("language '" + name + "' is not configured");
        chosen.push_back(*it);
      }
      spec.languages = chosen;
    }
    const Corpus corpus = generate_corpus(spec, cfg.get_bool("synth.speaker_normalize"));
    write_archive(corpus, c.out);
    cfg.write_resolved(fs::path(c.out) / "config.resolved");
    if (!discovered.empty())
      write_pairs_file(simulate_discovered_pairs(corpus, static_cast<std::size_t>(cfg.get_int("discovered.count")),
                                                 cfg.get_double("discovered.precision"),
                                                 derive_seed(cfg.get_seed("seed"), "discovered")),
                       discovered);
  }
};

struct Train {
  Common c;
  std::string model, regime, data, dev, pairs, languages, source;

  void run() const {
    const ExperimentConfig cfg = c.load();
    StrategySpec spec;
    spec.model_kind = parse_model_kind(model);
    spec.regime = parse_regime(regime);
    Corpus train = read_archive(data);
    if (!languages.empty()) train = train.filter_languages(split_commas(languages));
    if (train.empty()) throw DataError("no training segments");
    spec.languages = corpus_languages(train);
    spec.config = train_config(cfg, spec.model_kind, spec.regime);
    spec.config.dims.input_dim = train.dim();
    if (!source.empty()) spec.source_checkpoint = source;
    PairSet ps;
    if (spec.regime == Regime::multilingual) {
      if (!pairs.empty()) throw UsageError("multilingual training builds its pairs from word labels");
      const int cap = cfg.get_int("pair_cap");
      ps = build_positive_pairs(train, cap > 0 ? std::optional<std::size_t>(cap) : std::nullopt,
                                derive_seed(cfg.get_seed("seed"), "pairs"));
    } else {
      if (pairs.empty()) throw UsageError(std::string(to_string(spec.regime)) + " training needs --pairs");
      ps = load_discovered_pairs(pairs, train);
    }
    std::optional<Corpus> dev_corpus;
    if (!dev.empty()) dev_corpus = read_archive(dev);
    prepare_out(c, cfg);
    const TrainResult r = train_awe(spec, train, ps, dev_corpus ? &*dev_corpus : nullptr);
    const fs::path out(c.out);
    save_model(r.model, out / "model.awem");
    r.log.write_tsv(out / "log.tsv");
    EvalReport m;
    m.set("selected_epoch", r.log.selected_epoch);
    if (dev_corpus)
      m.set("dev.ap", same_different_ap(*dev_corpus, [&](const FrameMatrix& x) { return r.model.embed(x); }));
    m.write_tsv(out / "metrics.tsv");
  }
};

struct Semantic {
  Common c;
  std::string method, data, phonetic;

  void run() const {
    const ExperimentConfig cfg = c.load();
    const Corpus corpus = read_archive(data).without_labels();
    const ContextPairSet context = build_context_pairs(corpus, cfg.get_int("semantic.window"));
    TrainConfig tc = train_config(cfg, ModelKind::contrastive);
    tc.dims.input_dim = corpus.dim();
    tc.dims.layers = cfg.get_int("semantic.layers");
    tc.epochs = cfg.get_int("semantic.epochs");
    tc.batch_size = static_cast<std::size_t>(cfg.get_int("semantic.batch_size"));
    tc.negatives_per_positive = cfg.get_int("semantic.negatives");
    std::optional<AweModel> phon;
    const bool needs_phonetic = method == "init" || method == "project" || method == "cluster-skipgram";
    if (needs_phonetic) {
      if (phonetic.empty()) throw UsageError(method + " needs --phonetic");
      phon = load_model(phonetic);
    }
    EmbedderBundle b;
    TrainLog log;
    if (method == "speech2vec") {
      TrainConfig s = tc;
      s.ae_pretrain_epochs = 0;
      TrainResult r = train_speech2vec(corpus, context, s);
      b.model = std::move(r.model);
      log = r.log;
    } else if (method == "contrastive" || method == "init") {
      auto r = train_semantic_contrastive(corpus, context, tc, phon ? &phon->encoder : nullptr);
      b.model = {ModelKind::contrastive, r.encoder, std::nullopt};
      log = r.log;
    } else if (method == "project") {
      std::vector<Embedding> z = embed_all([&](const FrameMatrix& x) { return phon->embed(x); }, corpus);
      const int e = phon->encoder.dims().embedding_dim;
      auto r = train_projection(z, corpus, context,
                                nn::ProjectionNet(e, cfg.get_int("semantic.projection_hidden"), e,
                                                  derive_seed(cfg.get_seed("seed"), "projection")),
                                tc);
      b.model = *phon;
      b.projection = r.net;
      log = r.log;
    } else if (method == "cluster-skipgram") {
      ClusterSkipGramConfig cc;
      cc.clusters = cfg.get_int("semantic.clusters");
      cc.sigma = cfg.get_double("semantic.sigma");
      cc.kmeans.restarts = cfg.get_int("semantic.kmeans_restarts");
      cc.skipgram.dim = cfg.get_int("semantic.skipgram_dim");
      cc.skipgram.window = cfg.get_int("semantic.window");
      cc.skipgram.epochs = cfg.get_int("semantic.skipgram_epochs");
      cc.skipgram.seed = derive_seed(cfg.get_seed("seed"), "skipgram");
      cc.reading = cfg.get("semantic.soft_label") == "similarity" ? SoftLabelReading::similarity
                                                                 : SoftLabelReading::distance;
      auto r = train_cluster_skipgram(phon->encoder, corpus, cc, derive_seed(cfg.get_seed("seed"), "clusters"));
      b.model = *phon;
      b.clusters = r.clusters;
      b.skipgram = r.skipgram;
      b.reading = r.reading;
      for (std::size_t i = 0; i < r.epoch_loss.size(); ++i)
        log.epochs.push_back({static_cast<int>(i + 1), r.epoch_loss[i], std::numeric_limits<double>::quiet_NaN()});
    } else {
      throw UsageError("unknown semantic method '" + method + "'");
    }
    prepare_out(c, cfg);
    b.save(c.out);
    log.write_tsv(fs::path(c.out) / "log.tsv");
  }
};

struct EvalSameDiff {
  Common c;
  std::string model, baseline, data;

  void run() const {
    const ExperimentConfig cfg = c.load();
    if (model.empty() == baseline.empty()) throw UsageError("give exactly one of --model and --baseline");
    const Corpus corpus = read_archive(data);
    const auto labels = labels_of(corpus);
    std::vector<std::string> speakers;
    for (const auto& s : corpus.segments()) speakers.push_back(s.speaker);
    PRCurve curve;
    if (baseline == "dtw") {
      std::vector<FrameMatrix> seqs;
      for (const auto& s : corpus.segments()) seqs.push_back(s.features);
      curve = same_different_ap_dtw(seqs, labels, speakers);
    } else if (baseline == "downsample") {
      curve = same_different_ap(embed_all([](const FrameMatrix& x) { return nn::embed_downsample(x); }, corpus),
                                labels, speakers);
    } else if (!baseline.empty()) {
      throw UsageError("unknown baseline '" + baseline + "'");
    } else {
      const EmbedderBundle b = EmbedderBundle::load(model);
      curve = same_different_ap(embed_all(b.embedder(), corpus), labels, speakers);
    }
    prepare_out(c, cfg);
    EvalReport m;
    m.set("samediff.ap", curve.ap);
    m.write_tsv(fs::path(c.out) / "metrics.tsv");
    write_pr_curve(curve, fs::path(c.out) / "pr_curve.tsv");
  }
};

struct EvalSpeaker {
  Common c;
  std::string model, data;

  void run() const {
    const ExperimentConfig cfg = c.load();
    const Corpus corpus = read_archive(data);
    const EmbedderBundle b = EmbedderBundle::load(model);
    std::vector<std::string> speakers;
    for (const auto& s : corpus.segments()) speakers.push_back(s.speaker);
    const double acc = speaker_probe(embed_all(b.embedder(), corpus), speakers,
                                     derive_seed(cfg.get_seed("seed"), "probe"));
    prepare_out(c, cfg);
    EvalReport m;
    m.set("speaker.accuracy", acc);
    m.write_tsv(fs::path(c.out) / "metrics.tsv");
  }
};

struct Qbe {
  Common c;
  std::string model, queries, search, method = "awe", units = "sliding";
  bool mask = false;

  void run() const {
    const ExperimentConfig cfg = c.load();
    const Corpus q = read_archive(queries);
    const Corpus s = read_archive(search);
    if (q.empty()) throw DataError("no queries");
    IndexUnits u;
    if (units == "sliding") u = IndexUnits::sliding;
    else if (units == "words") u = IndexUnits::word_segments;
    else throw UsageError("unknown units '" + units + "'");
    if (method != "awe" && method != "dtw") throw UsageError("unknown QbE method '" + method + "'");
    if (method == "awe" && model.empty()) throw UsageError("awe QbE needs --model");
    const SegmentationParams seg = segmentation_params(cfg);
    std::optional<EmbedderBundle> b;
    std::optional<SearchIndex> index;
    if (method == "awe") {
      b = EmbedderBundle::load(model);
      if (!mask) index = build_index(b->embedder(), CorpusView(s), u, seg, model);
    }
    prepare_out(c, cfg);
    std::ofstream rank(fs::path(c.out) / "rankings.tsv");
    rank << "query\trank\tutterance\tscore\n";
    std::vector<double> p10, pn;
    std::vector<std::string> types;
    for (const Segment& seg_q : q.segments()) {
      const CorpusView view = mask && seg_q.word_label ? mask_query_occurrences(s, *seg_q.word_label) : CorpusView(s);
      QueryResult r;
      if (method == "dtw") {
        r = qbe_rank_dtw(seg_q.features, view, u, seg);
      } else {
        const SearchIndex idx = index ? *index : build_index(b->embedder(), view, u, seg, model);
        r = qbe_rank(idx, b->embed(seg_q.features));
      }
      for (std::size_t i = 0; i < r.ranking.size(); ++i)
        rank << seg_q.id << '\t' << i + 1 << '\t' << r.ranking[i].utterance_id << '\t'
             << format_double(r.ranking[i].score) << '\n';
      if (!seg_q.word_label) continue;
      const auto rel = utterances_with_label(s, *seg_q.word_label);
      if (rel.empty()) continue;
      p10.push_back(precision_at_k(r.ids(), rel, 10));
      pn.push_back(precision_at_n(r.ids(), rel));
      types.push_back(*seg_q.word_label);
    }
    EvalReport m;
    if (!p10.empty()) {
      m.set("qbe.p10", macro_average(p10, types));
      m.set("qbe.pn", macro_average(pn, types));
    }
    m.write_tsv(fs::path(c.out) / "metrics.tsv");
  }
};

struct Kws {
  Common c;
  std::string model, templates, dev, search, keywords, mode = "per_keyword";

  void run() const {
    const ExperimentConfig cfg = c.load();
    ThresholdMode tm;
    if (mode == "global") tm = ThresholdMode::global;
    else if (mode == "per_keyword") tm = ThresholdMode::per_keyword;
    else throw UsageError("unknown threshold mode '" + mode + "'");
    const Corpus tpl = read_archive(templates);
    const Corpus dv = read_archive(dev);
    const Corpus sr = read_archive(search);
    const EmbedderBundle b = EmbedderBundle::load(model);
    const Embedder embed = b.embedder();
    std::vector<std::string> words = split_commas(keywords);
    if (words.empty()) {
      std::set<std::string> vocab;
      for (const auto& s : tpl.segments())
        if (s.word_label) vocab.insert(*s.word_label);
      words.assign(vocab.begin(), vocab.end());
      Rng rng(derive_seed(cfg.get_seed("seed"), "keywords"));
      seeded_shuffle(words, rng);
      words.resize(std::min<std::size_t>(words.size(), static_cast<std::size_t>(cfg.get_int("kws.keywords"))));
    }
    std::vector<KeywordSpec> specs;
    Rng rng(derive_seed(cfg.get_seed("seed"), "templates"));
    for (const auto& w : words) {
      std::vector<std::string> ids;
      for (const auto& s : tpl.segments())
        if (s.word_label == w) ids.push_back(s.id);
      seeded_shuffle(ids, rng);
      ids.resize(std::min<std::size_t>(ids.size(), static_cast<std::size_t>(cfg.get_int("kws.templates"))));
      if (ids.empty()) throw DataError("keyword '" + w + "' has no template");
      specs.push_back(make_keyword(w, ids, tpl, embed));
    }
    const SegmentationParams seg = segmentation_params(cfg);
    const auto dev_d = kws_detect(build_index(embed, CorpusView(dv), IndexUnits::sliding, seg), specs, {});
    const KwsThresholds th = tune_kws_thresholds(dev_d, kws_truth(dev_d, dv), tm);
    const auto d = kws_detect(build_index(embed, CorpusView(sr), IndexUnits::sliding, seg), specs, th);
    prepare_out(c, cfg);
    const fs::path out(c.out);
    const int top_k = cfg.get_int("kws.top_k");
    write_kws_tsv(d, out / "decisions.tsv",
                  top_k > 0 ? std::optional<std::size_t>(top_k) : std::nullopt);
    {
      std::ofstream t(out / "thresholds.tsv");
      t << "keyword\tthreshold\n";
      for (const auto& w : words) t << w << '\t' << format_double(th.for_keyword(w)) << '\n';
    }
    const auto truth = kws_truth(d, sr);
    std::vector<bool> flags;
    for (const auto& x : d) flags.push_back(x.flag);
    const DetectionMetrics dm = detection_metrics(flags, truth);
    EvalReport m;
    m.set("kws.precision", dm.precision);
    m.set("kws.recall", dm.recall);
    m.set("kws.f1", dm.f1);
    m.set("kws.mean_f1", mean_keyword_f1(d, truth));
    m.write_tsv(out / "metrics.tsv");
  }
};

struct WordSim {
  Common c;
  std::string model, data;

  void run() const {
    const ExperimentConfig cfg = c.load();
    const Corpus corpus = read_archive(data);
    const SynthSpec spec = semantic_synth_spec(cfg, Split::train);
    const LanguageTruth truth = language_truth(spec, spec.languages[0].name);
    const EmbedderBundle b = EmbedderBundle::load(model);
    const WordSimilarity ws = word_similarity(embed_all(b.embedder(), corpus), labels_of(corpus),
                                              topic_reference_pairs(truth),
                                              derive_seed(cfg.get_seed("seed"), "draws"));
    prepare_out(c, cfg);
    EvalReport m;
    m.set("wordsim.rho_avg", ws.rho_avg);
    m.set("wordsim.rho_single", ws.rho_single);
    m.write_tsv(fs::path(c.out) / "metrics.tsv");
  }
};

struct Export {
  Common c;
  std::string model, data;

  void run() const {
    const Corpus corpus = read_archive(data);
    const EmbedderBundle b = EmbedderBundle::load(model);
    std::ofstream out(c.out);
    if (!out) throw DataError("cannot write " + c.out);
    out << "id\tlabel\tspeaker\tembedding\n";
    for (const auto& s : corpus.segments()) {
      const Embedding z = b.embed(s.features);
      out << s.id << '\t' << s.word_label.value_or("") << '\t' << s.speaker << '\t';
      for (Eigen::Index i = 0; i < z.size(); ++i) out << (i ? "," : "") << format_double(z[i]);
      out << '\n';
    }
    if (!out) throw DataError("write failed for " + c.out);
  }
};

struct FlowCmd {
  Common c;
  std::string name;

  void run() const {
    ExperimentConfig cfg = c.load();
    if (!name.empty()) cfg.set("flow", name);
    parse_flow(cfg.get("flow"));
    run_flow(cfg, c.out);
  }
};

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Acoustic word embedding laboratory"};
  app.name("awe");
  app.require_subcommand(1, 1);

  GenData gen;
  auto* g = app.add_subcommand("gen-data", "generate a synthetic corpus archive");
  add_common(g, gen.c);
  g->add_option("--split", gen.split, "train, dev or test");
  g->add_option("--languages", gen.languages, "comma-separated subset of the configured languages");
  g->add_flag("--semantic", gen.semantic, "topic-structured semantic language");
  g->add_option("--discovered", gen.discovered, "also write simulated discovered pairs here");

  Train tr;
  auto* t = app.add_subcommand("train", "train a phonetic embedding model");
  add_common(t, tr.c);
  t->add_option("--model", tr.model, "cae, siamese or contrastive")->required();
  t->add_option("--regime", tr.regime, "mono, multi or adapt")->required();
  t->add_option("--data", tr.data, "training archive")->required();
  t->add_option("--dev", tr.dev, "labelled archive for model selection");
  t->add_option("--pairs", tr.pairs, "discovered pairs (mono, adapt)");
  t->add_option("--languages", tr.languages, "comma-separated languages to train on");
  t->add_option("--source", tr.source, "source checkpoint (adapt)");

  Semantic se;
  auto* s = app.add_subcommand("semantic", "train a semantic embedding model");
  add_common(s, se.c);
  s->add_option("--method", se.method, "speech2vec, contrastive, init, project or cluster-skipgram")->required();
  s->add_option("--data", se.data, "training archive")->required();
  s->add_option("--phonetic", se.phonetic, "phonetic checkpoint (init, project, cluster-skipgram)");

  EvalSameDiff sd;
  auto* e = app.add_subcommand("eval-samediff", "same-different average precision");
  add_common(e, sd.c);
  e->add_option("--model", sd.model, "checkpoint or embedder directory");
  e->add_option("--baseline", sd.baseline, "downsample or dtw");
  e->add_option("--data", sd.data, "labelled archive")->required();

  EvalSpeaker sp;
  auto* p = app.add_subcommand("eval-speaker", "speaker classification probe");
  add_common(p, sp.c);
  p->add_option("--model", sp.model, "checkpoint or embedder directory")->required();
  p->add_option("--data", sp.data, "archive")->required();

  Qbe qb;
  auto* q = app.add_subcommand("qbe", "query-by-example search");
  add_common(q, qb.c);
  q->add_option("--model", qb.model, "checkpoint or embedder directory");
  q->add_option("--queries", qb.queries, "query archive")->required();
  q->add_option("--search", qb.search, "search collection archive")->required();
  q->add_option("--method", qb.method, "awe or dtw");
  q->add_option("--units", qb.units, "sliding or words");
  q->add_flag("--mask", qb.mask, "hide exact occurrences of each query's word");

  Kws kw;
  auto* k = app.add_subcommand("kws", "keyword spotting");
  add_common(k, kw.c);
  k->add_option("--model", kw.model, "checkpoint or embedder directory")->required();
  k->add_option("--templates", kw.templates, "archive with keyword templates")->required();
  k->add_option("--dev", kw.dev, "archive for threshold tuning")->required();
  k->add_option("--search", kw.search, "archive to search")->required();
  k->add_option("--keywords", kw.keywords, "comma-separated keywords");
  k->add_option("--mode", kw.mode, "global or per_keyword");

  WordSim wsim;
  auto* w = app.add_subcommand("wordsim", "word similarity against the topic oracle");
  add_common(w, wsim.c);
  w->add_option("--model", wsim.model, "checkpoint or embedder directory")->required();
  w->add_option("--data", wsim.data, "labelled semantic archive")->required();

  Export ex;
  auto* x = app.add_subcommand("export-embeddings", "write one embedding per segment");
  add_common(x, ex.c);
  x->add_option("--model", ex.model, "checkpoint or embedder directory")->required();
  x->add_option("--data", ex.data, "archive")->required();

  FlowCmd fl;
  auto* f = app.add_subcommand("flow", "run a scripted experiment flow");
  add_common(f, fl.c);
  f->add_option("--name", fl.name,
                "contrastive-chapter, adaptation-chapter, language-choice, kws or semantic");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& pe) {
    err << "awe: " << pe.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (g->parsed()) gen.run();
    else if (t->parsed()) tr.run();
    else if (s->parsed()) se.run();
    else if (e->parsed()) sd.run();
    else if (p->parsed()) sp.run();
    else if (q->parsed()) qb.run();
    else if (k->parsed()) kw.run();
    else if (w->parsed()) wsim.run();
    else if (x->parsed()) ex.run();
    else if (f->parsed()) fl.run();
  } catch (const UsageError& ue) {
    err << "awe: " << ue.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& de) {
    err << "awe: " << de.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

int dispatch(int argc, char** argv) { return dispatch(argc, argv, std::cout, std::cerr); }

}  // namespace awe
