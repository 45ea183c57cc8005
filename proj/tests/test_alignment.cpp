// tests/test_alignment.cpp

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

#include "awe/alignment.hpp"
#include "awe/nn/losses.hpp"
#include "brute_force.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

namespace awe {
namespace {

using awe::testing::random_frames;

TEST(Dtw, IdenticalSequences) {
  Rng rng(1);
  const FrameMatrix a = random_frames(5, 3, rng);
  const AlignmentResult r = dtw_cost(a, a);
  EXPECT_NEAR(r.cost, 0.0, 1e-15);
  ASSERT_EQ(r.path.size(), 5u);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(r.path[static_cast<std::size_t>(i)], std::make_pair(i, i));
}

TEST(Dtw, SingleCell) {
  Rng rng(2);
  const FrameMatrix u = random_frames(1, 4, rng), v = random_frames(1, 4, rng);
  EXPECT_NEAR(dtw_cost(u, v).cost,
              nn::cosine_distance(u.row(0).transpose(), v.row(0).transpose()), 1e-15);
}

TEST(Dtw, MatchesPathEnumeration) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(uniform_index(rng, 6));
    const int m = 1 + static_cast<int>(uniform_index(rng, 6));
    const FrameMatrix a = random_frames(n, 3, rng), b = random_frames(m, 3, rng);
    EXPECT_NEAR(dtw_cost(a, b).cost, awe::testing::brute_force_dtw(a, b), 1e-12)
        << n << "x" << m;
  }
}

TEST(Dtw, PathShape) {
  Rng rng(4);
  const FrameMatrix a = random_frames(6, 2, rng), b = random_frames(4, 2, rng);
  const AlignmentResult r = dtw_cost(a, b);
  EXPECT_EQ(r.path.front(), std::make_pair(0, 0));
  EXPECT_EQ(r.path.back(), std::make_pair(5, 3));
  for (std::size_t k = 1; k < r.path.size(); ++k) {
    const int di = r.path[k].first - r.path[k - 1].first;
    const int dj = r.path[k].second - r.path[k - 1].second;
    EXPECT_TRUE((di == 1 && dj == 1) || (di == 1 && dj == 0) || (di == 0 && dj == 1));
  }
}

TEST(Dtw, DiagonalWinsTies) {
  // All frames equal: every path costs 0, the diagonal must be chosen.
  const FrameMatrix a = FrameMatrix::Ones(3, 2), b = FrameMatrix::Ones(3, 2);
  const AlignmentResult r = dtw_cost(a, b);
  EXPECT_EQ(r.path.size(), 3u);
}

TEST(Dtw, SymmetricAndBounded) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const FrameMatrix a = random_frames(2 + trial % 7, 3, rng);
    const FrameMatrix b = random_frames(3 + trial % 5, 3, rng);
    const double ab = dtw_distance(a, b), ba = dtw_distance(b, a);
    EXPECT_NEAR(ab, ba, 1e-12);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 2.0);
  }
}

TEST(Dtw, InvariantToFrameRepetition) {
  Rng rng(6);
  const FrameMatrix a = random_frames(4, 3, rng);
  FrameMatrix stretched(7, 3);
  stretched << a.row(0), a.row(0), a.row(1), a.row(2), a.row(2), a.row(2), a.row(3);
  EXPECT_NEAR(dtw_distance(a, stretched), 0.0, 1e-15);
}

TEST(Dtw, Errors) {
  FrameMatrix a = FrameMatrix::Ones(3, 2);
  FrameMatrix z = a;
  z.row(1).setZero();
  EXPECT_THROW(dtw_cost(a, z), NumericError);
  EXPECT_THROW(dtw_cost(a, FrameMatrix::Ones(3, 3)), DataError);
  EXPECT_THROW(dtw_cost(a, FrameMatrix(0, 2)), DataError);
}

}  // namespace
}  // namespace awe
