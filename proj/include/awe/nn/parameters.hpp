// awe/nn/parameters.hpp

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

#include <functional>
#include <set>
#include <string>
#include <vector>

namespace awe::nn {

/// Ordered list of named dense tensors. Models own one; gradients are a
/// second ParameterSet of identical layout.
class ParameterSet {
 public:
  Eigen::MatrixXd& add(std::string name, Eigen::Index rows, Eigen::Index cols);

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Eigen::MatrixXd& operator[](std::size_t i) { return values_[i]; }
  const Eigen::MatrixXd& operator[](std::size_t i) const { return values_[i]; }

  /// Index of a named tensor; throws UsageError if absent.
  std::size_t index(const std::string& name) const;
  bool contains(const std::string& name) const;

  ParameterSet zeros_like() const;
  void set_zero();
  bool same_layout(const ParameterSet& other) const;
  Eigen::Index num_elements() const;
  bool all_finite() const;

  /// Flat element access in declaration order (column-major within a tensor).
  double& flat(Eigen::Index k);
  double flat(Eigen::Index k) const;

  /// this += scale * other.
  void add_scaled(const ParameterSet& other, double scale);
  void scale(double s);

  bool operator==(const ParameterSet& other) const;

 private:
  std::vector<std::string> names_;
  std::vector<Eigen::MatrixXd> values_;
};

/// Names of tensors an optimizer must leave untouched.
using FrozenSet = std::set<std::string>;

/// loss(params, grad_out): returns the loss and, when grad_out is non-null,
/// writes the analytic gradient into it (same layout, pre-zeroed by caller).
using LossFunction = std::function<double(const ParameterSet&, ParameterSet*)>;

struct GradCheckOptions {
  double step = 1e-5;
  std::size_t coordinates = 200;
  /// Denominator floor for the relative error of tiny gradient entries.
  double floor = 1e-6;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
};

/// Central finite differences on a seeded sample of coordinates.
/// Throws NumericError if the loss is not finite at `params`.
GradCheckResult grad_check(const LossFunction& loss, const ParameterSet& params,
                           std::uint64_t seed, GradCheckOptions options = {});

}  // namespace awe::nn
