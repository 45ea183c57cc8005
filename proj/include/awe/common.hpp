// awe/common.hpp

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

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace awe {

/// Frame matrix: one row per frame (T x D), rows contiguous.
using FrameMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Fixed-dimensional embedding of a segment.
using Embedding = Eigen::VectorXd;

using Rng = std::mt19937_64;

/// Base class of everything this library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments or configuration supplied by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Input data that violates a documented format or precondition.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A computation produced NaN/inf or hit a degenerate numeric case.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// 64-bit FNV-1a, used to derive stable sub-seeds from names.
constexpr std::uint64_t fnv1a(std::string_view s,
                              std::uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Mixes a seed with a tag into an independent stream seed (splitmix64 finalizer).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  return derive_seed(seed, fnv1a(tag));
}

/// Uniform index in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

/// Fisher-Yates shuffle with our own index draws, so results do not depend on
/// the standard library's std::shuffle implementation.
template <class Vec>
void seeded_shuffle(Vec& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    using std::swap;
    swap(v[i - 1], v[j]);
  }
}

}  // namespace awe
