// awe/pairing.hpp

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

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace awe {

using IdPair = std::pair<std::string, std::string>;

enum class PairSource { ground_truth, discovered };

/// Same-type supervision pairs. Ground-truth sets hold both orderings of every
/// sampled unordered pair.
struct PairSet {
  std::vector<IdPair> pairs;
  PairSource source = PairSource::ground_truth;

  /// Each unordered pair once, first-seen ordering kept.
  std::vector<IdPair> unordered() const;
};

struct ContextPairSet {
  std::vector<IdPair> pairs;  // (target, context)
  int window = 1;
};

struct ContrastiveBatch {
  std::vector<IdPair> positive_pairs;
};

/// All same-label unordered pairs, or a seeded uniform subsample of
/// `cap_unordered` of them; both orderings are emitted.
PairSet build_positive_pairs(const Corpus& corpus,
                             std::optional<std::size_t> cap_unordered,
                             std::uint64_t seed);

/// Reads `id_a<TAB>id_b` rows; `#` lines are comments. Labels are not consulted.
PairSet load_discovered_pairs(const std::filesystem::path& path, const Corpus& corpus);
void write_pairs_file(const PairSet& pairs, const std::filesystem::path& path);

/// Stand-in for term discovery output: `count` unordered pairs of which a
/// `precision` fraction are same-type pairs and the rest uniformly drawn
/// cross-type pairs. Returned with source = discovered.
PairSet simulate_discovered_pairs(const Corpus& corpus, std::size_t count,
                                  double precision, std::uint64_t seed);

/// Fraction of pairs whose two segments share a word label.
double pair_precision(const PairSet& pairs, const Corpus& corpus);

ContextPairSet build_context_pairs(const Corpus& corpus, int window);

/// Batches of `batch_pairs` pairs with 2N distinct segment ids each. Pairs
/// that would repeat an id are deferred to a later batch; leftovers are dropped.
std::vector<ContrastiveBatch> build_contrastive_batches(const std::vector<IdPair>& pairs,
                                                        std::size_t batch_pairs,
                                                        std::uint64_t seed);

/// Connected components of the pair graph, as a group id per corpus segment
/// (-1 for segments in no pair). Used as pseudo word labels for hard mining.
std::vector<int> pair_components(const std::vector<IdPair>& pairs, const Corpus& corpus);

}  // namespace awe
