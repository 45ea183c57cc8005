// src/nn/losses.cpp

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

#include "awe/nn/losses.hpp"

#include <cmath>
#include <limits>

namespace awe::nn {

double cosine_similarity(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  if (u.size() != v.size()) throw DataError("cosine of vectors with different sizes");
  const double nu = u.norm(), nv = v.norm();
  if (nu == 0.0 || nv == 0.0) throw NumericError("cosine of a zero-norm vector");
  return u.dot(v) / (nu * nv);
}

double cosine_distance(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  return 1.0 - cosine_similarity(u, v);
}

LossAndGrad reconstruction_loss(const FrameMatrix& output, const FrameMatrix& target) {
  if (output.rows() != target.rows() || output.cols() != target.cols())
    throw DataError("reconstruction shape mismatch: " + std::to_string(output.rows()) + "x" +
                    std::to_string(output.cols()) + " vs " + std::to_string(target.rows()) +
                    "x" + std::to_string(target.cols()));
  const FrameMatrix diff = output - target;
  return {diff.squaredNorm(), 2.0 * diff};
}

namespace {

struct Normalized {
  Eigen::MatrixXd unit;
  Eigen::VectorXd norms;
};

Normalized normalize_columns(const Eigen::MatrixXd& z) {
  Normalized n{z, z.colwise().norm().transpose()};
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    if (n.norms[j] == 0.0) throw NumericError("zero-norm embedding in loss");
    n.unit.col(j) /= n.norms[j];
  }
  return n;
}

// Maps a gradient with respect to unit vectors back through normalization.
Eigen::MatrixXd through_normalization(const Normalized& n, const Eigen::MatrixXd& dunit) {
  Eigen::MatrixXd dz(dunit.rows(), dunit.cols());
  for (Eigen::Index j = 0; j < dunit.cols(); ++j) {
    const auto u = n.unit.col(j);
    dz.col(j) = (dunit.col(j) - u * u.dot(dunit.col(j))) / n.norms[j];
  }
  return dz;
}

void check_temperature(double t) {
  if (!(t > 0.0)) throw UsageError("temperature must be > 0");
}

}  // namespace

LossAndGrad contrastive_loss(const Eigen::MatrixXd& z, double temperature) {
  check_temperature(temperature);
  const Eigen::Index n = z.cols();
  if (n < 4 || n % 2 != 0) throw DataError("contrastive loss needs 2N columns with N >= 2");
  const Normalized nz = normalize_columns(z);
  const Eigen::MatrixXd s = nz.unit.transpose() * nz.unit / temperature;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index pos = i ^ 1;
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) mx = std::max(mx, s(i, j));
    double denom = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) denom += std::exp(s(i, j) - mx);
    total += mx + std::log(denom) - s(i, pos);
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) g(i, j) = std::exp(s(i, j) - mx) / denom;
    g(i, pos) -= 1.0;
  }
  const Eigen::MatrixXd dunit = nz.unit * (g + g.transpose()) / temperature;
  return {total, through_normalization(nz, dunit)};
}

LossAndGrad contrastive_loss_explicit(const Eigen::MatrixXd& z, double temperature) {
  check_temperature(temperature);
  const Eigen::Index n = z.cols();
  if (n < 2) throw DataError("contrastive loss needs an anchor and a positive");
  const Normalized nz = normalize_columns(z);
  const Eigen::VectorXd s = nz.unit.transpose() * nz.unit.col(0) / temperature;
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 1; j < n; ++j) mx = std::max(mx, s[j]);
  double denom = 0.0;
  for (Eigen::Index j = 1; j < n; ++j) denom += std::exp(s[j] - mx);
  const double loss = mx + std::log(denom) - s[1];
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  for (Eigen::Index j = 1; j < n; ++j) g[j] = std::exp(s[j] - mx) / denom;
  g[1] -= 1.0;
  Eigen::MatrixXd dunit(z.rows(), n);
  dunit.col(0) = nz.unit * g / temperature;
  for (Eigen::Index j = 1; j < n; ++j) dunit.col(j) = g[j] * nz.unit.col(0) / temperature;
  return {loss, through_normalization(nz, dunit)};
}

double triplet_term(const Eigen::VectorXd& a, const Eigen::VectorXd& p,
                    const Eigen::VectorXd& n, double margin) {
  return std::max(0.0, margin + cosine_distance(a, p) - cosine_distance(a, n));
}

LossAndGrad triplet_hard_loss(const Eigen::MatrixXd& z, const std::vector<int>& labels,
                              double margin) {
  const Eigen::Index n = z.cols();
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw DataError("triplet loss: one label per embedding required");
  const Normalized nz = normalize_columns(z);
  const Eigen::MatrixXd dist =
      Eigen::MatrixXd::Ones(n, n) - nz.unit.transpose() * nz.unit;

  struct Triplet {
    Eigen::Index a, p, neg;
    double value;
  };
  std::vector<Triplet> triplets;
  for (Eigen::Index a = 0; a < n; ++a) {
    Eigen::Index hp = -1, hn = -1;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == a) continue;
      if (labels[j] == labels[a]) {
        if (hp < 0 || dist(a, j) > dist(a, hp)) hp = j;
      } else if (hn < 0 || dist(a, j) < dist(a, hn)) {
        hn = j;
      }
    }
    if (hp >= 0 && hn >= 0) triplets.push_back({a, hp, hn, margin + dist(a, hp) - dist(a, hn)});
  }
  if (triplets.empty())
    throw DataError("triplet loss: no anchor has both a positive and a negative");

  const double w = 1.0 / static_cast<double>(triplets.size());
  double loss = 0.0;
  Eigen::MatrixXd dunit = Eigen::MatrixXd::Zero(z.rows(), n);
  for (const Triplet& t : triplets) {
    if (t.value <= 0.0) continue;
    loss += w * t.value;
    // d(dist)/d(unit_i) = -unit_j for dist = 1 - unit_i . unit_j.
    dunit.col(t.a) += -w * nz.unit.col(t.p) + w * nz.unit.col(t.neg);
    dunit.col(t.p) += -w * nz.unit.col(t.a);
    dunit.col(t.neg) += w * nz.unit.col(t.a);
  }
  return {loss, through_normalization(nz, dunit)};
}

}  // namespace awe::nn
