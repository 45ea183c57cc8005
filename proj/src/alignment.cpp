// src/alignment.cpp

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

#include <algorithm>

namespace awe {

FrameMatrix unit_rows(const FrameMatrix& x) {
  FrameMatrix u = x;
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    const double n = x.row(t).norm();
    if (n == 0.0)
      throw NumericError("zero-norm frame " + std::to_string(t) + " in DTW input");
    u.row(t) /= n;
  }
  return u;
}

namespace {

enum Step : unsigned char { kDiag, kUp, kLeft };  // (1,1), (1,0), (0,1)

struct Table {
  Eigen::MatrixXd acc;
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> len;
  Eigen::Matrix<unsigned char, Eigen::Dynamic, Eigen::Dynamic> from;
};

template <bool kTrace>
Table fill(const FrameMatrix& ua, const FrameMatrix& ub) {
  if (ua.rows() < 1 || ub.rows() < 1) throw DataError("DTW needs sequences of length >= 1");
  if (ua.cols() != ub.cols()) throw DataError("DTW inputs have different frame dimensions");
  const Eigen::Index n = ua.rows(), m = ub.rows();
  const Eigen::MatrixXd dist = Eigen::MatrixXd::Ones(n, m) - ua * ub.transpose();
  Table t;
  t.acc.resize(n, m);
  t.len.resize(n, m);
  if (kTrace) t.from.resize(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      const double d = dist(i, j);
      if (i == 0 && j == 0) {
        t.acc(0, 0) = d;
        t.len(0, 0) = 1;
        if (kTrace) t.from(0, 0) = kDiag;
        continue;
      }
      Step best = kDiag;
      double best_acc = 0.0;
      bool have = false;
      auto offer = [&](bool ok, Eigen::Index pi, Eigen::Index pj, Step s) {
        if (!ok) return;
        if (!have || t.acc(pi, pj) < best_acc) {
          best = s;
          best_acc = t.acc(pi, pj);
          have = true;
        }
      };
      offer(i > 0 && j > 0, i - 1, j - 1, kDiag);
      offer(i > 0, i - 1, j, kUp);
      offer(j > 0, i, j - 1, kLeft);
      const Eigen::Index pi = best == kLeft ? i : i - 1;
      const Eigen::Index pj = best == kUp ? j : j - 1;
      t.acc(i, j) = d + best_acc;
      t.len(i, j) = t.len(pi, pj) + 1;
      if (kTrace) t.from(i, j) = best;
    }
  return t;
}

}  // namespace

AlignmentResult dtw_cost(const FrameMatrix& a, const FrameMatrix& b) {
  const Table t = fill<true>(unit_rows(a), unit_rows(b));
  const Eigen::Index n = a.rows(), m = b.rows();
  AlignmentResult r;
  r.cost = std::max(0.0, t.acc(n - 1, m - 1) / t.len(n - 1, m - 1));
  Eigen::Index i = n - 1, j = m - 1;
  for (;;) {
    r.path.emplace_back(static_cast<int>(i), static_cast<int>(j));
    if (i == 0 && j == 0) break;
    switch (t.from(i, j)) {
      case kDiag: --i; --j; break;
      case kUp: --i; break;
      case kLeft: --j; break;
    }
  }
  std::reverse(r.path.begin(), r.path.end());
  return r;
}

double dtw_distance_unit(const FrameMatrix& ua, const FrameMatrix& ub) {
  const Table t = fill<false>(ua, ub);
  const Eigen::Index n = ua.rows(), m = ub.rows();
  return std::max(0.0, t.acc(n - 1, m - 1) / t.len(n - 1, m - 1));
}

double dtw_distance(const FrameMatrix& a, const FrameMatrix& b) {
  return dtw_distance_unit(unit_rows(a), unit_rows(b));
}

}  // namespace awe
