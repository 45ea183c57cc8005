// retrieval.cpp

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

#include "awe/retrieval.hpp"

#include "awe/alignment.hpp"
#include "awe/evaluation.hpp"
#include "awe/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace awe {

std::vector<Span> segment_sliding(int frames, const SegmentationParams& p) {
  if (p.min_len < 1 || p.max_len < p.min_len || p.start_stride < 1 || p.len_stride < 1)
    throw UsageError("segmentation needs 1 <= min_len <= max_len and strides >= 1");
  if (frames <= 0) throw DataError("cannot segment an empty utterance");
  std::vector<Span> spans;
  if (frames < p.min_len) {
    spans.push_back({0, frames});
    return spans;
  }
  for (int s = 0; s + p.min_len <= frames; s += p.start_stride)
    for (int l = p.min_len; l <= p.max_len && s + l <= frames; l += p.len_stride)
      spans.push_back({s, s + l});
  return spans;
}

CorpusView::CorpusView(const Corpus& corpus)
    : corpus_(&corpus), masked_(corpus.size(), false) {}

std::size_t CorpusView::masked_count() const {
  return static_cast<std::size_t>(std::count(masked_.begin(), masked_.end(), true));
}

void CorpusView::mask_label(const std::string& label) {
  for (std::size_t i = 0; i < corpus_->size(); ++i) {
    const auto& wl = (*corpus_)[i].word_label;
    if (!wl) throw DataError("masking needs word labels; segment '" + (*corpus_)[i].id + "' has none");
    if (*wl == label) masked_[i] = true;
  }
}

CorpusView mask_query_occurrences(const Corpus& corpus, const std::string& label,
                                  const std::vector<std::string>& vocabulary) {
  if (!vocabulary.empty() &&
      std::find(vocabulary.begin(), vocabulary.end(), label) == vocabulary.end())
    throw UsageError("unknown query label '" + label + "'");
  CorpusView view(corpus);
  view.mask_label(label);
  return view;
}

std::size_t SearchIndex::segment_count() const {
  std::size_t n = 0;
  for (const auto& u : utterances) n += u.spans.size();
  return n;
}

namespace {

bool overlaps(const Span& a, const Span& b) { return a.start < b.end && b.start < a.end; }

// Spans of one utterance under the view's mask.
std::vector<Span> utterance_spans(const CorpusView& view, const std::vector<std::size_t>& members,
                                  IndexUnits units, const SegmentationParams& params) {
  const Corpus& c = view.corpus();
  std::vector<Span> spans;
  if (units == IndexUnits::word_segments) {
    for (std::size_t i : members)
      if (!view.masked(i)) spans.push_back(c[i].span);
    return spans;
  }
  std::vector<Span> hidden;
  int frames = 0;
  for (std::size_t i : members) {
    frames = std::max(frames, c[i].span.end);
    if (view.masked(i)) hidden.push_back(c[i].span);
  }
  for (const Span& s : segment_sliding(frames, params)) {
    bool keep = true;
    for (const Span& h : hidden)
      if (overlaps(s, h)) {
        keep = false;
        break;
      }
    if (keep) spans.push_back(s);
  }
  return spans;
}

Embedding unit(const Embedding& z) {
  const double n = z.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw NumericError("cannot normalise a zero or non-finite embedding");
  return z / n;
}

void sort_ranking(std::vector<RankedUtterance>& r) {
  std::sort(r.begin(), r.end(), [](const RankedUtterance& a, const RankedUtterance& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.utterance_id < b.utterance_id;
  });
}

}  // namespace

SearchIndex build_index(const Embedder& embed, const CorpusView& view, IndexUnits units,
                        const SegmentationParams& params, const std::string& tag) {
  SearchIndex index;
  index.embedder_tag = tag;
  index.units = units;
  index.params = params;
  const Corpus& c = view.corpus();
  std::vector<const std::pair<const std::string, std::vector<std::size_t>>*> utts;
  for (const auto& kv : c.utterances()) utts.push_back(&kv);
  std::vector<IndexedUtterance> built(utts.size());
  parallel_for(utts.size(), [&](std::size_t u) {
    IndexedUtterance& out = built[u];
    out.utterance_id = utts[u]->first;
    out.spans = utterance_spans(view, utts[u]->second, units, params);
    if (out.spans.empty()) return;
    const FrameMatrix frames = c.utterance_frames(out.utterance_id);
    for (std::size_t j = 0; j < out.spans.size(); ++j) {
      const Span& s = out.spans[j];
      const Embedding z = unit(embed(frames.middleRows(s.start, s.length())));
      if (j == 0) out.unit.resize(z.size(), static_cast<Eigen::Index>(out.spans.size()));
      if (z.size() != out.unit.rows()) throw DataError("embedder returned inconsistent dimensions");
      out.unit.col(static_cast<Eigen::Index>(j)) = z;
    }
  });
  // Utterances left without spans (fully masked) are not ranked.
  for (auto& u : built)
    if (!u.spans.empty()) index.utterances.push_back(std::move(u));
  return index;
}

std::vector<std::string> QueryResult::ids() const {
  std::vector<std::string> out;
  out.reserve(ranking.size());
  for (const auto& r : ranking) out.push_back(r.utterance_id);
  return out;
}

QueryResult qbe_rank(const SearchIndex& index, const Embedding& query) {
  if (index.utterances.empty()) throw DataError("query against an empty index");
  const Embedding q = unit(query);
  QueryResult result;
  result.ranking.resize(index.utterances.size());
  parallel_for(index.utterances.size(), [&](std::size_t u) {
    const IndexedUtterance& iu = index.utterances[u];
    if (iu.unit.rows() != q.size())
      throw DataError("query dimension " + std::to_string(q.size()) + " != index dimension " +
                      std::to_string(iu.unit.rows()));
    const Eigen::VectorXd d = (1.0 - (iu.unit.transpose() * q).array()).max(0.0).matrix();
    Eigen::Index best = 0;
    d.minCoeff(&best);
    result.ranking[u] = {iu.utterance_id, d[best], iu.spans[static_cast<std::size_t>(best)]};
  });
  sort_ranking(result.ranking);
  return result;
}

QueryResult qbe_rank_dtw(const FrameMatrix& query, const CorpusView& view, IndexUnits units,
                         const SegmentationParams& params) {
  const Corpus& c = view.corpus();
  if (c.empty()) throw DataError("query against an empty collection");
  const FrameMatrix q = unit_rows(query);
  std::vector<const std::pair<const std::string, std::vector<std::size_t>>*> utts;
  for (const auto& kv : c.utterances()) utts.push_back(&kv);
  std::vector<std::optional<RankedUtterance>> scored(utts.size());
  parallel_for(utts.size(), [&](std::size_t u) {
    const auto spans = utterance_spans(view, utts[u]->second, units, params);
    if (spans.empty()) return;
    const FrameMatrix frames = unit_rows(c.utterance_frames(utts[u]->first));
    RankedUtterance r{utts[u]->first, 0.0, {}};
    bool first = true;
    for (const Span& s : spans) {
      const double d = dtw_distance_unit(q, frames.middleRows(s.start, s.length()));
      if (first || d < r.score) {
        r.score = d;
        r.best = s;
        first = false;
      }
    }
    scored[u] = r;
  });
  QueryResult result;
  for (auto& s : scored)
    if (s) result.ranking.push_back(*s);
  sort_ranking(result.ranking);
  return result;
}

std::vector<std::string> utterances_with_label(const Corpus& corpus, const std::string& label) {
  std::vector<std::string> out;
  for (const auto& [utt, members] : corpus.utterances()) {
    for (std::size_t i : members) {
      if (!corpus[i].word_label) throw DataError("relevance needs word labels");
      if (*corpus[i].word_label == label) {
        out.push_back(utt);
        break;
      }
    }
  }
  return out;
}

std::vector<std::string> random_ranking(const Corpus& corpus, std::uint64_t seed) {
  std::vector<std::string> ids;
  for (const auto& kv : corpus.utterances()) ids.push_back(kv.first);
  Rng rng(derive_seed(seed, "random-ranking"));
  seeded_shuffle(ids, rng);
  return ids;
}

// ---------------------------------------------------------------------------

KeywordSpec make_keyword(const std::string& keyword, const std::vector<std::string>& template_ids,
                         const Corpus& templates, const Embedder& embed) {
  if (template_ids.empty()) throw UsageError("keyword '" + keyword + "' has no templates");
  KeywordSpec spec{keyword, template_ids, {}};
  for (const auto& id : template_ids) {
    const Embedding z = embed(templates[templates.index_of(id)].features);
    if (spec.query.size() == 0) spec.query = Embedding::Zero(z.size());
    spec.query += z;
  }
  spec.query /= static_cast<double>(template_ids.size());
  return spec;
}

double KwsThresholds::for_keyword(const std::string& keyword) const {
  auto it = per_keyword.find(keyword);
  return it == per_keyword.end() ? global : it->second;
}

std::vector<KwsDecision> kws_detect(const SearchIndex& index, const std::vector<KeywordSpec>& keywords,
                                    const KwsThresholds& thresholds) {
  if (keywords.empty()) throw UsageError("no keywords given");
  std::vector<KwsDecision> out;
  for (const auto& kw : keywords) {
    const double tau = thresholds.for_keyword(kw.keyword);
    for (const auto& r : qbe_rank(index, kw.query).ranking)
      out.push_back({kw.keyword, r.utterance_id, r.score, r.score <= tau, r.best});
  }
  return out;
}

std::vector<KwsDecision> apply_thresholds(std::vector<KwsDecision> decisions,
                                          const KwsThresholds& thresholds) {
  for (auto& d : decisions) d.flag = d.score <= thresholds.for_keyword(d.keyword);
  return decisions;
}

std::vector<bool> kws_truth(const std::vector<KwsDecision>& decisions, const Corpus& corpus) {
  std::set<std::pair<std::string, std::string>> present;
  for (const auto& s : corpus.segments()) {
    if (!s.word_label) throw DataError("keyword truth needs word labels");
    present.insert({*s.word_label, s.utterance_id});
  }
  std::vector<bool> truth;
  truth.reserve(decisions.size());
  for (const auto& d : decisions) truth.push_back(present.count({d.keyword, d.utterance_id}) > 0);
  return truth;
}

namespace {

double f1_of(std::size_t tp, std::size_t fp, std::size_t fn) {
  const double denom = 2.0 * static_cast<double>(tp) + static_cast<double>(fp + fn);
  return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
}

}  // namespace

ThresholdChoice tune_threshold(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw UsageError("scores and labels differ in length");
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
  if (pos == 0 || pos == labels.size()) throw DataError("threshold tuning needs both classes");
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Walk tie groups; after group g everything with score <= its value is flagged.
  ThresholdChoice best{0.0, -1.0};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double v = scores[order[i]];
    while (i < order.size() && scores[order[i]] == v) {
      (labels[order[i]] ? tp : fp) += 1;
      ++i;
    }
    const double tau = i < order.size() ? 0.5 * (v + scores[order[i]]) : v;
    const double f1 = f1_of(tp, fp, pos - tp);
    if (f1 > best.f1) best = {tau, f1};
  }
  return best;
}

KwsThresholds tune_kws_thresholds(const std::vector<KwsDecision>& dev, const std::vector<bool>& truth,
                                  ThresholdMode mode) {
  if (dev.size() != truth.size()) throw UsageError("decisions and truth differ in length");
  std::vector<double> scores;
  for (const auto& d : dev) scores.push_back(d.score);
  KwsThresholds t;
  t.global = tune_threshold(scores, truth).threshold;
  if (mode == ThresholdMode::per_keyword) {
    std::map<std::string, std::pair<std::vector<double>, std::vector<bool>>> by_kw;
    for (std::size_t i = 0; i < dev.size(); ++i) {
      by_kw[dev[i].keyword].first.push_back(dev[i].score);
      by_kw[dev[i].keyword].second.push_back(truth[i]);
    }
    for (const auto& [kw, st] : by_kw) {
      const auto pos = std::count(st.second.begin(), st.second.end(), true);
      // A keyword whose dev decisions hold one class keeps the global value.
      if (pos == 0 || pos == static_cast<long>(st.second.size())) continue;
      t.per_keyword[kw] = tune_threshold(st.first, st.second).threshold;
    }
  }
  return t;
}

std::map<std::string, double> per_keyword_f1(const std::vector<KwsDecision>& decisions,
                                             const std::vector<bool>& truth) {
  if (decisions.size() != truth.size()) throw UsageError("decisions and truth differ in length");
  std::map<std::string, std::array<std::size_t, 3>> counts;  // tp, fp, fn
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    auto& c = counts[decisions[i].keyword];
    if (decisions[i].flag && truth[i]) ++c[0];
    else if (decisions[i].flag) ++c[1];
    else if (truth[i]) ++c[2];
  }
  std::map<std::string, double> out;
  for (const auto& [kw, c] : counts) out[kw] = f1_of(c[0], c[1], c[2]);
  return out;
}

double mean_keyword_f1(const std::vector<KwsDecision>& decisions, const std::vector<bool>& truth) {
  const auto f = per_keyword_f1(decisions, truth);
  if (f.empty()) throw DataError("no keyword decisions");
  double s = 0.0;
  for (const auto& kv : f) s += kv.second;
  return s / static_cast<double>(f.size());
}

void write_kws_tsv(const std::vector<KwsDecision>& decisions, const std::filesystem::path& path,
                   std::optional<std::size_t> top_k) {
  std::vector<const KwsDecision*> rows;
  if (top_k) {
    std::map<std::string, std::vector<const KwsDecision*>> by_kw;
    std::vector<std::string> order;
    for (const auto& d : decisions) {
      if (!by_kw.count(d.keyword)) order.push_back(d.keyword);
      by_kw[d.keyword].push_back(&d);
    }
    for (const auto& kw : order) {
      auto& v = by_kw[kw];
      std::stable_sort(v.begin(), v.end(), [](const KwsDecision* a, const KwsDecision* b) {
        if (a->score != b->score) return a->score < b->score;
        return a->utterance_id < b->utterance_id;
      });
      for (std::size_t i = 0; i < v.size() && i < *top_k; ++i) rows.push_back(v[i]);
    }
  } else {
    for (const auto& d : decisions) rows.push_back(&d);
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const KwsDecision* d : rows)
    out << d->keyword << '\t' << d->utterance_id << '\t' << format_double(d->score) << '\t'
        << (d->flag ? 1 : 0) << '\t' << d->best.start << '\t' << d->best.end << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<KwsDecision> read_kws_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<KwsDecision> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) f.push_back(field);
    if (f.size() != 6) throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 6 fields");
    try {
      KwsDecision d;
      d.keyword = f[0];
      d.utterance_id = f[1];
      std::size_t used = 0;
      d.score = std::stod(f[2], &used);
      if (used != f[2].size() || (f[3] != "0" && f[3] != "1")) throw std::invalid_argument("field");
      d.flag = f[3] == "1";
      d.best = {std::stoi(f[4]), std::stoi(f[5])};
      out.push_back(std::move(d));
    } catch (const std::exception&) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
    }
  }
  return out;
}

}  // namespace awe
