// awe/alignment.hpp

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

#include "awe/common.hpp"

#include <utility>
#include <vector>

namespace awe {

struct AlignmentResult {
  /// Summed cosine distance along the path divided by the path length.
  double cost = 0.0;
  std::vector<std::pair<int, int>> path;
};

/// Dynamic time warping with cosine frame distance and steps (1,1), (1,0),
/// (0,1). The path minimizes the summed distance; ties prefer (1,1), then
/// (1,0), then (0,1). Throws NumericError on a zero-norm frame.
AlignmentResult dtw_cost(const FrameMatrix& a, const FrameMatrix& b);

/// Cost only, without the traceback.
double dtw_distance(const FrameMatrix& a, const FrameMatrix& b);

/// Rows scaled to unit norm (a DTW pre-pass that can be cached per sequence).
FrameMatrix unit_rows(const FrameMatrix& x);
double dtw_distance_unit(const FrameMatrix& unit_a, const FrameMatrix& unit_b);

}  // namespace awe
