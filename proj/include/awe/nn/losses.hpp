// awe/nn/losses.hpp

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

#include <vector>

namespace awe::nn {

/// 1 - u.v / (|u| |v|), in [0, 2]. Throws NumericError on a zero-norm input.
double cosine_distance(const Eigen::VectorXd& u, const Eigen::VectorXd& v);
double cosine_similarity(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

/// Loss value plus its gradient with respect to each input column.
struct LossAndGrad {
  double loss = 0.0;
  Eigen::MatrixXd grad;
};

/// Sum of squared frame errors; grad is with respect to `output`.
LossAndGrad reconstruction_loss(const FrameMatrix& output, const FrameMatrix& target);

/// Columns (2i, 2i+1) of `z` are positive pairs. Every column acts once as
/// anchor; its denominator runs over all other columns. Returns the sum over
/// the 2N anchor roles.
LossAndGrad contrastive_loss(const Eigen::MatrixXd& z, double temperature);

/// Column 0 is the anchor, column 1 the positive, the rest negatives.
LossAndGrad contrastive_loss_explicit(const Eigen::MatrixXd& z, double temperature);

/// max(0, m + d(a,p) - d(a,n)) for explicit vectors.
double triplet_term(const Eigen::VectorXd& a, const Eigen::VectorXd& p,
                    const Eigen::VectorXd& n, double margin);

/// Batch-hard triplet loss over the columns of `z`: per anchor, the same-label
/// column furthest away and the different-label column closest, by cosine
/// distance. Mean over anchors that have both. Throws DataError when none do.
LossAndGrad triplet_hard_loss(const Eigen::MatrixXd& z, const std::vector<int>& labels,
                              double margin);

}  // namespace awe::nn
