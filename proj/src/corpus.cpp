// src/corpus.cpp

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

#include "awe/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace awe {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "test") return Split::test;
  throw UsageError("unknown split '" + std::string(s) + "'");
}

bool operator==(const Segment& a, const Segment& b) {
  return a.id == b.id && a.language == b.language && a.speaker == b.speaker &&
         a.word_label == b.word_label && a.utterance_id == b.utterance_id &&
         a.position == b.position && a.span == b.span &&
         a.features.rows() == b.features.rows() &&
         a.features.cols() == b.features.cols() && a.features == b.features;
}

Corpus::Corpus(std::vector<Segment> segments, Split split)
    : segments_(std::move(segments)), split_(split) {
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const Segment& s = segments_[i];
    if (s.frames() < 1)
      throw DataError("segment '" + s.id + "' has no frames");
    if (s.span.length() != s.frames())
      throw DataError("segment '" + s.id + "' span length " +
                      std::to_string(s.span.length()) + " != frame count " +
                      std::to_string(s.frames()));
    if (s.position < 0)
      throw DataError("segment '" + s.id + "' has negative position");
    if (s.dim() != segments_.front().dim())
      throw DataError("segment '" + s.id + "' has feature dimension " +
                      std::to_string(s.dim()) + ", corpus uses " +
                      std::to_string(segments_.front().dim()));
    if (!s.features.allFinite())
      throw DataError("segment '" + s.id + "' has non-finite features");
    if (!by_id_.emplace(s.id, i).second)
      throw DataError("duplicate segment id '" + s.id + "'");
    utterances_[s.utterance_id].push_back(i);
  }
  for (auto& [utt, members] : utterances_) {
    std::stable_sort(members.begin(), members.end(),
                     [this](std::size_t a, std::size_t b) {
                       return segments_[a].position < segments_[b].position;
                     });
    for (std::size_t k = 1; k < members.size(); ++k)
      if (segments_[members[k]].position == segments_[members[k - 1]].position)
        throw DataError("utterance '" + utt + "' has two segments at position " +
                        std::to_string(segments_[members[k]].position));
  }
}

int Corpus::dim() const {
  return segments_.empty() ? 0 : segments_.front().dim();
}

std::vector<std::string> Corpus::utterance_members(const std::string& utt) const {
  std::vector<std::string> ids;
  auto it = utterances_.find(utt);
  if (it == utterances_.end()) return ids;
  for (std::size_t i : it->second) ids.push_back(segments_[i].id);
  return ids;
}

std::optional<std::size_t> Corpus::find(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::size_t Corpus::index_of(const std::string& id) const {
  auto i = find(id);
  if (!i) throw DataError("unknown segment id '" + id + "'");
  return *i;
}

FrameMatrix Corpus::utterance_frames(const std::string& utt) const {
  auto it = utterances_.find(utt);
  if (it == utterances_.end())
    throw DataError("unknown utterance '" + utt + "'");
  Eigen::Index total = 0;
  for (std::size_t i : it->second) total += segments_[i].frames();
  FrameMatrix out(total, dim());
  Eigen::Index row = 0;
  for (std::size_t i : it->second) {
    out.middleRows(row, segments_[i].frames()) = segments_[i].features;
    row += segments_[i].frames();
  }
  return out;
}

Corpus Corpus::without_labels() const {
  std::vector<Segment> segs = segments_;
  for (Segment& s : segs) s.word_label.reset();
  return Corpus(std::move(segs), split_);
}

Corpus Corpus::filter_languages(const std::vector<std::string>& languages) const {
  std::vector<Segment> segs;
  for (const Segment& s : segments_)
    if (std::find(languages.begin(), languages.end(), s.language) != languages.end())
      segs.push_back(s);
  return Corpus(std::move(segs), split_);
}

Corpus Corpus::merge(const std::vector<const Corpus*>& parts, Split split) {
  std::vector<Segment> segs;
  for (const Corpus* c : parts)
    segs.insert(segs.end(), c->segments().begin(), c->segments().end());
  return Corpus(std::move(segs), split);
}

bool Corpus::operator==(const Corpus& other) const {
  return split_ == other.split_ && segments_ == other.segments_;
}

// ---------------------------------------------------------------------------
// Synthetic generation

namespace {

double sequence_space(int phones, IntRange len) {
  double total = 0.0;
  for (int l = len.lo; l <= len.hi; ++l) total += std::pow(double(phones), l);
  return total;
}

int uniform_int(Rng& rng, IntRange r) {
  return std::uniform_int_distribution<int>(r.lo, r.hi)(rng);
}

Eigen::VectorXd gaussian_vector(Rng& rng, int dim, double sigma) {
  std::normal_distribution<double> n(0.0, sigma);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = n(rng);
  return v;
}

Eigen::VectorXd unit_gaussian(Rng& rng, int dim) {
  Eigen::VectorXd v;
  do {
    v = gaussian_vector(rng, dim, 1.0);
  } while (v.norm() == 0.0);
  return v / v.norm();
}

// Draws `count` phone sequences not already present in `taken`.
std::vector<std::vector<int>> draw_sequences(Rng& rng, int count, int phones,
                                             IntRange len,
                                             std::set<std::vector<int>>& taken) {
  std::vector<std::vector<int>> out;
  std::uniform_int_distribution<int> phone(0, phones - 1);
  while (static_cast<int>(out.size()) < count) {
    std::vector<int> seq(uniform_int(rng, len));
    for (int& p : seq) p = phone(rng);
    if (taken.insert(seq).second) out.push_back(std::move(seq));
  }
  return out;
}

const LanguageSpec& find_language(const SynthSpec& spec, const std::string& name) {
  for (const LanguageSpec& l : spec.languages)
    if (l.name == name) return l;
  throw UsageError("language '" + name + "' not in synthetic spec");
}

int shared_count(const LanguageSpec& l) {
  return static_cast<int>(std::lround(l.shared_vocab_fraction * l.vocab_size));
}

// First `count` words of the inventory's shared-word stream. The stream does
// not depend on which other languages the spec lists.
std::vector<std::vector<int>> family_words(const SynthSpec& spec, int inventory, int count) {
  std::set<std::vector<int>> taken;
  Rng rng(derive_seed(spec.seed, "family:" + std::to_string(inventory)));
  return draw_sequences(rng, count, spec.phone_count, spec.phones_per_word, taken);
}

std::vector<Eigen::VectorXd> inventory_prototypes(const SynthSpec& spec, int inventory) {
  Rng rng(derive_seed(spec.seed, "inventory:" + std::to_string(inventory)));
  std::vector<Eigen::VectorXd> protos;
  for (int p = 0; p < spec.phone_count; ++p)
    protos.push_back(unit_gaussian(rng, spec.phone_dim));
  return protos;
}

std::vector<Eigen::VectorXd> language_prototypes(const SynthSpec& spec,
                                                 const LanguageSpec& lang) {
  std::vector<Eigen::VectorXd> protos = inventory_prototypes(spec, lang.inventory);
  Rng rng(derive_seed(spec.seed, "shift:" + lang.name));
  for (Eigen::VectorXd& p : protos) {
    Eigen::VectorXd q = p + gaussian_vector(rng, spec.phone_dim, spec.phone_shift_sigma);
    if (q.norm() > 0.0) p = q / q.norm();
  }
  return protos;
}

std::string padded(int v, int width) {
  std::ostringstream os;
  os << std::setw(width) << std::setfill('0') << v;
  return os.str();
}

constexpr int kSpeakersPerSplit = 1000;

int split_index(Split s) {
  switch (s) {
    case Split::train: return 0;
    case Split::dev: return 1;
    case Split::test: return 2;
  }
  return 0;
}

}  // namespace

void SynthSpec::validate() const {
  auto check_range = [](IntRange r, const char* what) {
    if (r.lo < 1 || r.hi < r.lo)
      throw UsageError(std::string("invalid range for ") + what);
  };
  if (phone_count < 1) throw UsageError("phone_count must be >= 1");
  if (phone_dim < 1) throw UsageError("phone_dim must be >= 1");
  if (languages.empty()) throw UsageError("synthetic spec has no languages");
  if (speakers_per_language < 1 || speakers_per_language > kSpeakersPerSplit)
    throw UsageError("speakers_per_language must lie in [1, 1000]");
  if (tokens_per_type < 1) throw UsageError("tokens_per_type must be >= 1");
  check_range(frames_per_phone, "frames_per_phone");
  check_range(phones_per_word, "phones_per_word");
  check_range(words_per_utterance, "words_per_utterance");
  if (!(noise_sigma >= 0.0)) throw UsageError("noise_sigma must be >= 0");
  if (!(speaker_offset_sigma >= 0.0)) throw UsageError("speaker_offset_sigma must be >= 0");
  if (!(phone_shift_sigma >= 0.0)) throw UsageError("phone_shift_sigma must be >= 0");
  if (topic_count < 0) throw UsageError("topic_count must be >= 0");
  if (topic_overlap < 0.0 || topic_overlap > 1.0)
    throw UsageError("topic_overlap must lie in [0, 1]");
  std::set<std::string> names;
  const double space = sequence_space(phone_count, phones_per_word);
  for (const LanguageSpec& l : languages) {
    if (l.name.empty()) throw UsageError("language with empty name");
    if (!names.insert(l.name).second)
      throw UsageError("duplicate language '" + l.name + "'");
    if (l.vocab_size < 1) throw UsageError("vocab_size must be >= 1");
    if (l.shared_vocab_fraction < 0.0 || l.shared_vocab_fraction > 1.0)
      throw UsageError("shared_vocab_fraction must lie in [0, 1]");
    if (topic_count > l.vocab_size)
      throw UsageError("topic_count exceeds vocabulary of '" + l.name + "'");
    // Own words are drawn disjoint from the first vocab_size family words.
    if (l.vocab_size > space || 2.0 * l.vocab_size - shared_count(l) > space)
      throw UsageError("vocabulary of '" + l.name +
                       "' exceeds the distinct phone-sequence space");
  }
}

LanguageTruth language_truth(const SynthSpec& spec, const std::string& language) {
  spec.validate();
  const LanguageSpec& lang = find_language(spec, language);
  const int shared = shared_count(lang);
  auto family = family_words(spec, lang.inventory, lang.vocab_size);
  std::set<std::vector<int>> taken(family.begin(), family.end());
  Rng rng(derive_seed(spec.seed, "lang:" + lang.name));
  auto own = draw_sequences(rng, lang.vocab_size - shared, spec.phone_count,
                            spec.phones_per_word, taken);
  LanguageTruth truth;
  truth.name = lang.name;
  truth.inventory = lang.inventory;
  truth.utterance_length = spec.words_per_utterance;
  for (int k = 0; k < shared; ++k) {
    truth.labels.push_back("f" + std::to_string(lang.inventory) + "_w" + padded(k, 3));
    truth.phone_sequences.push_back(family[k]);
  }
  for (std::size_t k = 0; k < own.size(); ++k) {
    truth.labels.push_back(lang.name + "_w" + padded(static_cast<int>(k), 3));
    truth.phone_sequences.push_back(std::move(own[k]));
  }
  if (spec.topic_count > 0) {
    Rng rng(derive_seed(spec.seed, "topics:" + lang.name));
    const std::size_t v = truth.labels.size();
    std::vector<std::size_t> order(v);
    for (std::size_t i = 0; i < v; ++i) order[i] = i;
    seeded_shuffle(order, rng);
    truth.topics.assign(v, {});
    std::bernoulli_distribution second(spec.topic_overlap);
    for (std::size_t r = 0; r < v; ++r) {
      const int primary = static_cast<int>(r % spec.topic_count);
      truth.topics[order[r]].push_back(primary);
    }
    for (std::size_t r = 0; r < v; ++r) {
      if (spec.topic_count < 2 || !second(rng)) continue;
      int extra = static_cast<int>(uniform_index(rng, spec.topic_count - 1));
      if (extra >= truth.topics[order[r]][0]) ++extra;
      truth.topics[order[r]].push_back(extra);
    }
  }
  return truth;
}

double topic_pmi(const LanguageTruth& truth, std::size_t a, std::size_t b, double floor) {
  // Utterance model: topic uniform, length uniform over the configured range,
  // words i.i.d. uniform over the topic's word set. Probabilities are those of
  // "appears at least once", averaged over topics and lengths.
  if (truth.topics.empty()) throw UsageError("language has no topic structure");
  int topic_count = 0;
  for (const auto& ts : truth.topics)
    for (int t : ts) topic_count = std::max(topic_count, t + 1);
  std::vector<double> set_size(topic_count, 0.0);
  for (const auto& ts : truth.topics)
    for (int t : ts) set_size[t] += 1.0;
  auto in = [&](std::size_t w, int t) {
    return std::find(truth.topics[w].begin(), truth.topics[w].end(), t) !=
           truth.topics[w].end();
  };
  const int len_lo = truth.utterance_length.lo, len_hi = truth.utterance_length.hi;
  double pa = 0.0, pb = 0.0, pab = 0.0;
  for (int t = 0; t < topic_count; ++t) {
    const double q = 1.0 / set_size[t];
    for (int len = len_lo; len <= len_hi; ++len) {
      const double none_one = std::pow(1.0 - q, len);
      const double none_two = std::pow(std::max(0.0, 1.0 - 2.0 * q), len);
      const double w = 1.0 / (topic_count * (len_hi - len_lo + 1));
      const bool ia = in(a, t), ib = in(b, t);
      if (ia) pa += w * (1.0 - none_one);
      if (ib) pb += w * (1.0 - none_one);
      if (ia && ib) pab += w * (a == b ? 1.0 - none_one : 1.0 - 2.0 * none_one + none_two);
    }
  }
  if (pab <= 0.0) return floor;
  return std::max(floor, std::log(pab / (pa * pb)));
}

Corpus generate_synthetic_corpus(const SynthSpec& spec) {
  spec.validate();
  std::vector<Segment> segments;
  const int split_idx = split_index(spec.split);
  const std::string split_tag(to_string(spec.split));
  for (const LanguageSpec& lang : spec.languages) {
    const LanguageTruth truth = language_truth(spec, lang.name);
    const std::vector<Eigen::VectorXd> protos = language_prototypes(spec, lang);

    std::vector<Eigen::VectorXd> speaker_offsets;
    std::vector<std::string> speaker_ids;
    for (int k = 0; k < spec.speakers_per_language; ++k) {
      // Splits draw from disjoint speaker ranges whatever their sizes.
      const int global = split_idx * kSpeakersPerSplit + k;
      Rng srng(derive_seed(spec.seed, "speaker:" + lang.name + ":" + std::to_string(global)));
      speaker_offsets.push_back(gaussian_vector(srng, spec.phone_dim, spec.speaker_offset_sigma));
      speaker_ids.push_back(lang.name + "_s" + padded(global, 3));
    }

    Rng rng(derive_seed(spec.seed, "sample:" + lang.name + ":" + split_tag));
    const std::size_t vocab = truth.labels.size();
    const std::size_t total_tokens = vocab * static_cast<std::size_t>(spec.tokens_per_type);

    // Word-type sequence for each utterance.
    std::vector<std::vector<std::size_t>> utterances;
    if (spec.topic_count == 0) {
      std::vector<std::size_t> tokens;
      for (std::size_t w = 0; w < vocab; ++w)
        for (int k = 0; k < spec.tokens_per_type; ++k) tokens.push_back(w);
      seeded_shuffle(tokens, rng);
      std::size_t at = 0;
      while (at < tokens.size()) {
        const std::size_t len = std::min<std::size_t>(
            uniform_int(rng, spec.words_per_utterance), tokens.size() - at);
        utterances.emplace_back(tokens.begin() + at, tokens.begin() + at + len);
        at += len;
      }
    } else {
      std::vector<std::vector<std::size_t>> members(spec.topic_count);
      for (std::size_t w = 0; w < vocab; ++w)
        for (int t : truth.topics[w]) members[t].push_back(w);
      std::size_t produced = 0;
      while (produced < total_tokens) {
        const auto& words = members[uniform_index(rng, members.size())];
        const std::size_t len = std::min<std::size_t>(
            uniform_int(rng, spec.words_per_utterance), total_tokens - produced);
        std::vector<std::size_t> utt;
        for (std::size_t k = 0; k < len; ++k) utt.push_back(words[uniform_index(rng, words.size())]);
        produced += len;
        utterances.push_back(std::move(utt));
      }
    }

    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (std::size_t u = 0; u < utterances.size(); ++u) {
      const std::string utt_id = lang.name + "_" + split_tag + "_u" + padded(static_cast<int>(u), 4);
      const std::size_t spk = uniform_index(rng, speaker_ids.size());
      int offset = 0;
      for (std::size_t pos = 0; pos < utterances[u].size(); ++pos) {
        const std::size_t w = utterances[u][pos];
        std::vector<int> frame_phones;
        for (int phone : truth.phone_sequences[w]) {
          const int n = uniform_int(rng, spec.frames_per_phone);
          frame_phones.insert(frame_phones.end(), n, phone);
        }
        Segment seg;
        seg.id = utt_id + "_" + padded(static_cast<int>(pos), 2);
        seg.language = lang.name;
        seg.speaker = speaker_ids[spk];
        seg.word_label = truth.labels[w];
        seg.utterance_id = utt_id;
        seg.position = static_cast<int>(pos);
        seg.features.resize(static_cast<Eigen::Index>(frame_phones.size()), spec.phone_dim);
        for (std::size_t t = 0; t < frame_phones.size(); ++t)
          for (int d = 0; d < spec.phone_dim; ++d) {
            const double v = protos[frame_phones[t]][d] + speaker_offsets[spk][d] +
                             (spec.noise_sigma > 0.0 ? noise(rng) : 0.0);
            // Values are float32-representable so archives round-trip exactly.
            seg.features(static_cast<Eigen::Index>(t), d) = static_cast<double>(static_cast<float>(v));
          }
        seg.span = {offset, offset + seg.frames()};
        offset += seg.frames();
        segments.push_back(std::move(seg));
      }
    }
  }
  return Corpus(std::move(segments), spec.split);
}

Corpus speaker_normalize(const Corpus& corpus) {
  std::vector<Segment> segs = corpus.segments();
  const int dim = corpus.dim();
  for (const auto& [utt, members] : corpus.utterances()) {
    double n = 0.0;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (std::size_t i : members) {
      mean += segs[i].features.colwise().sum().transpose();
      n += segs[i].frames();
    }
    mean /= n;
    Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
    for (std::size_t i : members)
      var += (segs[i].features.rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
    var /= n;
    for (int d = 0; d < dim; ++d) {
      // A constant coordinate leaves only rounding residue in var.
      const bool degenerate = var[d] <= 1e-24 * std::max(1.0, mean[d] * mean[d]);
      const double sd = std::sqrt(var[d]);
      for (std::size_t i : members) {
        auto col = segs[i].features.col(d);
        if (degenerate)
          col.setZero();
        else
          col = (col.array() - mean[d]) / sd;
      }
    }
  }
  return Corpus(std::move(segs), corpus.split());
}

// ---------------------------------------------------------------------------
// Archive

namespace {

constexpr char kSegmentMagic[4] = {'A', 'W', 'E', '0'};

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
         (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

int parse_int(const std::string& s, const std::string& what, std::size_t line) {
  try {
    std::size_t used = 0;
    int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ArchiveError(ArchiveErrc::malformed_manifest,
                       "manifest line " + std::to_string(line) + ": bad " + what + " '" + s + "'");
  }
}

std::string relpath_for(const std::string& id) {
  std::string safe = id;
  for (char& c : safe)
    if (c == '/' || c == '\\' || c == '\t') c = '_';
  return "segments/" + safe + ".awe";
}

}  // namespace

void write_segment_file(const FrameMatrix& frames, const std::filesystem::path& path) {
  std::string buf(kSegmentMagic, 4);
  put_u32(buf, static_cast<std::uint32_t>(frames.rows()));
  put_u32(buf, static_cast<std::uint32_t>(frames.cols()));
  put_u32(buf, 0);
  for (Eigen::Index t = 0; t < frames.rows(); ++t)
    for (Eigen::Index d = 0; d < frames.cols(); ++d) {
      const float f = static_cast<float>(frames(t, d));
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(buf, bits);
    }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArchiveError(ArchiveErrc::io, "cannot write '" + path.string() + "'");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw ArchiveError(ArchiveErrc::io, "write failed for '" + path.string() + "'");
}

FrameMatrix read_segment_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArchiveError(ArchiveErrc::dangling_reference, "missing segment file '" + path.string() + "'");
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 16 || std::memcmp(buf.data(), kSegmentMagic, 4) != 0)
    throw ArchiveError(ArchiveErrc::malformed_header, "bad segment header in '" + path.string() + "'");
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
  const std::uint32_t t = get_u32(p + 4), d = get_u32(p + 8), reserved = get_u32(p + 12);
  if (reserved != 0)
    throw ArchiveError(ArchiveErrc::malformed_header, "nonzero reserved field in '" + path.string() + "'");
  const std::uint64_t expect = 16 + 4ull * t * d;
  if (buf.size() != expect)
    throw ArchiveError(ArchiveErrc::payload_length_mismatch,
                       "payload length mismatch in '" + path.string() + "': expected " +
                           std::to_string(expect) + " bytes, found " + std::to_string(buf.size()));
  FrameMatrix frames(t, d);
  const unsigned char* q = p + 16;
  for (std::uint32_t i = 0; i < t; ++i)
    for (std::uint32_t j = 0; j < d; ++j, q += 4) {
      const std::uint32_t bits = get_u32(q);
      float f;
      std::memcpy(&f, &bits, 4);
      frames(i, j) = f;
    }
  return frames;
}

void write_archive(const Corpus& corpus, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "segments", ec);
  if (ec) throw ArchiveError(ArchiveErrc::io, "cannot create '" + dir.string() + "': " + ec.message());
  std::ofstream manifest(dir / "manifest.tsv", std::ios::trunc);
  if (!manifest) throw ArchiveError(ArchiveErrc::io, "cannot write manifest in '" + dir.string() + "'");
  manifest << "# split=" << to_string(corpus.split()) << "\n";
  for (const Segment& s : corpus.segments()) {
    const std::string rel = relpath_for(s.id);
    manifest << s.id << '\t' << s.language << '\t' << s.speaker << '\t'
             << (s.word_label ? *s.word_label : std::string("-")) << '\t'
             << s.utterance_id << '\t' << s.position << '\t' << s.span.start
             << '\t' << s.span.end << '\t' << rel << '\n';
    write_segment_file(s.features, dir / rel);
  }
  if (!manifest) throw ArchiveError(ArchiveErrc::io, "manifest write failed in '" + dir.string() + "'");
}

Corpus read_archive(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.tsv");
  if (!manifest) throw ArchiveError(ArchiveErrc::io, "no manifest.tsv in '" + dir.string() + "'");
  Split split = Split::train;
  std::vector<Segment> segs;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  int dim = -1;
  while (std::getline(manifest, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto at = line.find("split=");
      if (at != std::string::npos) {
        try {
          split = parse_split(line.substr(at + 6));
        } catch (const UsageError&) {
          throw ArchiveError(ArchiveErrc::malformed_manifest,
                             "manifest line " + std::to_string(lineno) + ": bad split");
        }
      }
      continue;
    }
    auto f = split_tabs(line);
    if (f.size() != 9)
      throw ArchiveError(ArchiveErrc::malformed_manifest,
                         "manifest line " + std::to_string(lineno) + ": expected 9 fields, found " +
                             std::to_string(f.size()));
    Segment s;
    s.id = f[0];
    s.language = f[1];
    s.speaker = f[2];
    if (f[3] != "-") s.word_label = f[3];
    s.utterance_id = f[4];
    s.position = parse_int(f[5], "position", lineno);
    s.span = {parse_int(f[6], "start", lineno), parse_int(f[7], "end", lineno)};
    if (!seen.insert(s.id).second)
      throw ArchiveError(ArchiveErrc::malformed_manifest,
                         "manifest line " + std::to_string(lineno) + ": duplicate id '" + s.id + "'");
    const std::filesystem::path file = dir / f[8];
    if (!std::filesystem::exists(file))
      throw ArchiveError(ArchiveErrc::dangling_reference,
                         "manifest line " + std::to_string(lineno) + ": '" + f[8] + "' does not exist");
    s.features = read_segment_file(file);
    if (dim < 0) dim = s.dim();
    if (s.dim() != dim || s.span.length() != s.frames())
      throw ArchiveError(ArchiveErrc::dimension_mismatch,
                         "manifest line " + std::to_string(lineno) + ": segment '" + s.id +
                             "' has shape " + std::to_string(s.frames()) + "x" +
                             std::to_string(s.dim()) + " inconsistent with manifest");
    segs.push_back(std::move(s));
  }
  try {
    return Corpus(std::move(segs), split);
  } catch (const DataError& e) {
    throw ArchiveError(ArchiveErrc::malformed_manifest, e.what());
  }
}

}  // namespace awe
