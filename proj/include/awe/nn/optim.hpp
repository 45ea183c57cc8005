// awe/nn/optim.hpp

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

#include "awe/nn/parameters.hpp"

namespace awe::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Frozen tensors are skipped entirely: neither the
/// values nor their moments change.
class Adam {
 public:
  Adam(const ParameterSet& layout, AdamConfig config);

  void step(ParameterSet& params, const ParameterSet& grads, const FrozenSet& frozen = {});

  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  long steps() const { return t_; }
  const ParameterSet& first_moment() const { return m_; }
  const ParameterSet& second_moment() const { return v_; }

 private:
  AdamConfig config_;
  ParameterSet m_, v_;
  long t_ = 0;
};

}  // namespace awe::nn
