// tests/brute_force.hpp

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

// Slow reference implementations shared by the unit tests and the acceptance
// binary.

#pragma once

#include "awe/common.hpp"
#include "awe/nn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <vector>

namespace awe::testing {

namespace detail {

inline void walk(const Eigen::MatrixXd& d, int i, int j, double sum, int len, double& best_sum,
                 int& best_len) {
  sum += d(i, j);
  ++len;
  if (i == d.rows() - 1 && j == d.cols() - 1) {
    if (sum < best_sum) {
      best_sum = sum;
      best_len = len;
    }
    return;
  }
  if (i + 1 < d.rows() && j + 1 < d.cols()) walk(d, i + 1, j + 1, sum, len, best_sum, best_len);
  if (i + 1 < d.rows()) walk(d, i + 1, j, sum, len, best_sum, best_len);
  if (j + 1 < d.cols()) walk(d, i, j + 1, sum, len, best_sum, best_len);
}

}  // namespace detail

// Enumerates every monotone path; returns sum / length of the cheapest one.
inline double brute_force_dtw(const FrameMatrix& a, const FrameMatrix& b) {
  Eigen::MatrixXd d(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j)
      d(i, j) = nn::cosine_distance(a.row(i).transpose(), b.row(j).transpose());
  double best = std::numeric_limits<double>::infinity();
  int len = 0;
  detail::walk(d, 0, 0, 0.0, 0, best, len);
  return std::max(0.0, best / len);
}

// AP by an explicit sweep: at each distinct distance, recount retrieved and
// relevant pairs from scratch.
inline double brute_force_ap(const std::vector<double>& dist, const std::vector<bool>& rel) {
  const std::set<double> thresholds(dist.begin(), dist.end());
  std::size_t total = 0;
  for (bool r : rel) total += r;
  double ap = 0.0;
  std::size_t prev_rel = 0;
  for (double t : thresholds) {
    std::size_t ret = 0, hit = 0;
    for (std::size_t k = 0; k < dist.size(); ++k)
      if (dist[k] <= t) {
        ++ret;
        hit += rel[k];
      }
    ap += (static_cast<double>(hit - prev_rel) / static_cast<double>(total)) *
          (static_cast<double>(hit) / static_cast<double>(ret));
    prev_rel = hit;
  }
  return ap;
}

inline double brute_force_same_different(const std::vector<Embedding>& z,
                                         const std::vector<std::string>& labels,
                                         const std::vector<std::string>& speakers) {
  std::vector<double> dist;
  std::vector<bool> rel;
  for (std::size_t i = 0; i < z.size(); ++i)
    for (std::size_t j = i + 1; j < z.size(); ++j) {
      dist.push_back(nn::cosine_distance(z[i], z[j]));
      rel.push_back(labels[i] == labels[j] && speakers[i] != speakers[j]);
    }
  return brute_force_ap(dist, rel);
}

// Independent loop evaluation of the pairwise contrastive objective.
inline double scalar_contrastive(const Eigen::MatrixXd& z, double tau) {
  double total = 0.0;
  for (Eigen::Index a = 0; a < z.cols(); ++a) {
    const Eigen::Index p = a ^ 1;
    double den = 0.0;
    for (Eigen::Index j = 0; j < z.cols(); ++j)
      if (j != a) den += std::exp((1.0 - nn::cosine_distance(z.col(a), z.col(j))) / tau);
    total -= std::log(std::exp((1.0 - nn::cosine_distance(z.col(a), z.col(p))) / tau) / den);
  }
  return total;
}

}  // namespace awe::testing
