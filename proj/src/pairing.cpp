// src/pairing.cpp

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

#include "awe/pairing.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <unordered_set>

namespace awe {

std::vector<IdPair> PairSet::unordered() const {
  std::set<IdPair> seen;
  std::vector<IdPair> out;
  for (const IdPair& p : pairs) {
    IdPair key = p.first < p.second ? p : IdPair{p.second, p.first};
    if (seen.insert(key).second) out.push_back(p);
  }
  return out;
}

PairSet build_positive_pairs(const Corpus& corpus, std::optional<std::size_t> cap,
                             std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& label = corpus[i].word_label;
    if (!label) throw DataError("segment '" + corpus[i].id + "' has no word label");
    by_label[*label].push_back(i);
  }
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (const auto& [label, members] : by_label)
    for (std::size_t a = 0; a < members.size(); ++a)
      for (std::size_t b = a + 1; b < members.size(); ++b)
        all.emplace_back(members[a], members[b]);
  if (all.empty()) throw DataError("no pairs: no word type has two or more tokens");
  if (cap && *cap < all.size()) {
    Rng rng(seed);
    // Partial Fisher-Yates: a uniform subset of size cap.
    for (std::size_t i = 0; i < *cap; ++i) {
      std::size_t j = i + uniform_index(rng, all.size() - i);
      std::swap(all[i], all[j]);
    }
    all.resize(*cap);
    std::sort(all.begin(), all.end());
  }
  PairSet out;
  out.source = PairSource::ground_truth;
  for (auto [a, b] : all) {
    out.pairs.emplace_back(corpus[a].id, corpus[b].id);
    out.pairs.emplace_back(corpus[b].id, corpus[a].id);
  }
  return out;
}

PairSet load_discovered_pairs(const std::filesystem::path& path, const Corpus& corpus) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open pairs file '" + path.string() + "'");
  PairSet out;
  out.source = PairSource::discovered;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": expected two tab-separated ids");
    IdPair p{line.substr(0, tab), line.substr(tab + 1)};
    for (const std::string* id : {&p.first, &p.second})
      if (!corpus.find(*id))
        throw DataError(path.string() + ":" + std::to_string(lineno) +
                        ": unknown segment id '" + *id + "'");
    if (p.first == p.second)
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": pair of a segment with itself");
    out.pairs.push_back(std::move(p));
  }
  return out;
}

void write_pairs_file(const PairSet& pairs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write pairs file '" + path.string() + "'");
  out << "# " << (pairs.source == PairSource::discovered ? "discovered" : "ground_truth")
      << " pairs\n";
  for (const IdPair& p : pairs.pairs) out << p.first << '\t' << p.second << '\n';
}

PairSet simulate_discovered_pairs(const Corpus& corpus, std::size_t count,
                                  double precision, std::uint64_t seed) {
  if (precision < 0.0 || precision > 1.0)
    throw UsageError("pair precision must lie in [0, 1]");
  PairSet truth = build_positive_pairs(corpus, std::nullopt, seed);
  std::vector<IdPair> same = truth.unordered();
  Rng rng(derive_seed(seed, "noisy-pairs"));
  seeded_shuffle(same, rng);
  const std::size_t n_same = std::min<std::size_t>(
      same.size(), static_cast<std::size_t>(std::llround(precision * count)));
  std::vector<IdPair> out(same.begin(), same.begin() + n_same);
  std::set<IdPair> used(out.begin(), out.end());
  std::size_t guard = 0;
  while (out.size() < count) {
    if (++guard > 100 * count + 1000) throw DataError("cannot draw enough cross-type pairs");
    const std::size_t a = uniform_index(rng, corpus.size());
    const std::size_t b = uniform_index(rng, corpus.size());
    if (a == b || corpus[a].word_label == corpus[b].word_label) continue;
    IdPair p{corpus[a].id, corpus[b].id};
    if (!used.insert(p).second) continue;
    out.push_back(std::move(p));
  }
  seeded_shuffle(out, rng);
  PairSet ps;
  ps.source = PairSource::discovered;
  ps.pairs = std::move(out);
  return ps;
}

double pair_precision(const PairSet& pairs, const Corpus& corpus) {
  if (pairs.pairs.empty()) throw DataError("empty pair set");
  std::size_t hits = 0;
  for (const IdPair& p : pairs.pairs) {
    const auto& a = corpus[corpus.index_of(p.first)].word_label;
    const auto& b = corpus[corpus.index_of(p.second)].word_label;
    if (a && b && *a == *b) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pairs.pairs.size());
}

ContextPairSet build_context_pairs(const Corpus& corpus, int window) {
  if (window < 1) throw UsageError("context window must be >= 1");
  ContextPairSet out;
  out.window = window;
  for (const auto& [utt, members] : corpus.utterances()) {
    const int n = static_cast<int>(members.size());
    for (int t = 0; t < n; ++t)
      for (int j = -window; j <= window; ++j) {
        if (j == 0 || t + j < 0 || t + j >= n) continue;
        out.pairs.emplace_back(corpus[members[t]].id, corpus[members[t + j]].id);
      }
  }
  return out;
}

std::vector<ContrastiveBatch> build_contrastive_batches(const std::vector<IdPair>& pairs,
                                                        std::size_t batch_pairs,
                                                        std::uint64_t seed) {
  if (batch_pairs < 2) throw UsageError("contrastive batches need at least 2 pairs");
  if (pairs.empty()) throw DataError("no pairs to batch");
  std::vector<IdPair> order = pairs;
  Rng rng(seed);
  seeded_shuffle(order, rng);

  std::vector<ContrastiveBatch> batches;
  std::deque<IdPair> deferred;
  ContrastiveBatch current;
  std::unordered_set<std::string> ids;
  auto try_add = [&](const IdPair& p) {
    if (p.first == p.second || ids.count(p.first) || ids.count(p.second)) return false;
    ids.insert(p.first);
    ids.insert(p.second);
    current.positive_pairs.push_back(p);
    if (current.positive_pairs.size() == batch_pairs) {
      batches.push_back(std::move(current));
      current = {};
      ids.clear();
    }
    return true;
  };
  auto drain_deferred = [&] {
    // One pass over the waiting pairs; those that still clash stay queued.
    for (std::size_t k = deferred.size(); k > 0; --k) {
      IdPair p = std::move(deferred.front());
      deferred.pop_front();
      if (!try_add(p)) deferred.push_back(std::move(p));
    }
  };
  for (const IdPair& p : order) {
    if (current.positive_pairs.empty()) drain_deferred();
    if (!try_add(p)) deferred.push_back(p);
  }
  // Flush what the queue can still fill.
  for (;;) {
    const std::size_t before = batches.size();
    drain_deferred();
    if (batches.size() == before) break;
  }
  if (batches.empty())
    throw DataError("cannot form a single contrastive batch of " +
                    std::to_string(batch_pairs) + " distinct pairs");
  return batches;
}

std::vector<int> pair_components(const std::vector<IdPair>& pairs, const Corpus& corpus) {
  std::vector<std::size_t> parent(corpus.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<bool> touched(corpus.size(), false);
  auto root = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const IdPair& p : pairs) {
    const std::size_t a = corpus.index_of(p.first), b = corpus.index_of(p.second);
    touched[a] = touched[b] = true;
    const std::size_t ra = root(a), rb = root(b);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::vector<int> group(corpus.size(), -1);
  std::map<std::size_t, int> ids;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!touched[i]) continue;
    auto [it, fresh] = ids.emplace(root(i), static_cast<int>(ids.size()));
    group[i] = it->second;
  }
  return group;
}

}  // namespace awe
