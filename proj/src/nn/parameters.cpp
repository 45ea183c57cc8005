// src/nn/parameters.cpp

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

#include "awe/nn/parameters.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace awe::nn {

Eigen::MatrixXd& ParameterSet::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  if (contains(name)) throw UsageError("duplicate parameter '" + name + "'");
  names_.push_back(std::move(name));
  values_.push_back(Eigen::MatrixXd::Zero(rows, cols));
  return values_.back();
}

std::size_t ParameterSet::index(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw UsageError("no parameter named '" + name + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

bool ParameterSet::contains(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], values_[i].rows(), values_[i].cols());
  return out;
}

void ParameterSet::set_zero() {
  for (auto& v : values_) v.setZero();
}

bool ParameterSet::same_layout(const ParameterSet& other) const {
  if (size() != other.size()) return false;
  for (std::size_t i = 0; i < size(); ++i)
    if (names_[i] != other.names_[i] || values_[i].rows() != other.values_[i].rows() ||
        values_[i].cols() != other.values_[i].cols())
      return false;
  return true;
}

Eigen::Index ParameterSet::num_elements() const {
  Eigen::Index n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

bool ParameterSet::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](const auto& v) { return v.allFinite(); });
}

double& ParameterSet::flat(Eigen::Index k) {
  for (auto& v : values_) {
    if (k < v.size()) return v.data()[k];
    k -= v.size();
  }
  throw UsageError("flat parameter index out of range");
}

double ParameterSet::flat(Eigen::Index k) const {
  return const_cast<ParameterSet*>(this)->flat(k);
}

void ParameterSet::add_scaled(const ParameterSet& other, double scale) {
  if (!same_layout(other)) throw UsageError("parameter layout mismatch");
  for (std::size_t i = 0; i < size(); ++i) values_[i] += scale * other.values_[i];
}

void ParameterSet::scale(double s) {
  for (auto& v : values_) v *= s;
}

bool ParameterSet::operator==(const ParameterSet& other) const {
  if (!same_layout(other)) return false;
  for (std::size_t i = 0; i < size(); ++i)
    if (values_[i] != other.values_[i]) return false;
  return true;
}

GradCheckResult grad_check(const LossFunction& loss, const ParameterSet& params,
                           std::uint64_t seed, GradCheckOptions options) {
  ParameterSet grad = params.zeros_like();
  const double base = loss(params, &grad);
  if (!std::isfinite(base)) throw NumericError("grad_check: loss is not finite");

  const Eigen::Index n = params.num_elements();
  std::vector<Eigen::Index> coords(static_cast<std::size_t>(n));
  std::iota(coords.begin(), coords.end(), Eigen::Index{0});
  if (static_cast<std::size_t>(n) > options.coordinates) {
    Rng rng(seed);
    seeded_shuffle(coords, rng);
    coords.resize(options.coordinates);
  }

  ParameterSet probe = params;
  GradCheckResult result;
  for (Eigen::Index k : coords) {
    const double orig = probe.flat(k);
    probe.flat(k) = orig + options.step;
    const double up = loss(probe, nullptr);
    probe.flat(k) = orig - options.step;
    const double down = loss(probe, nullptr);
    probe.flat(k) = orig;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericError("grad_check: loss is not finite near the probe point");
    const double numeric = (up - down) / (2.0 * options.step);
    const double analytic = grad.flat(k);
    const double denom = std::max({std::abs(numeric), std::abs(analytic), options.floor});
    result.max_relative_error = std::max(result.max_relative_error, std::abs(numeric - analytic) / denom);
    ++result.coordinates_checked;
  }
  return result;
}

}  // namespace awe::nn
