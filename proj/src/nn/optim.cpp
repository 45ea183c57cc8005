// src/nn/optim.cpp

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

#include "awe/nn/optim.hpp"

#include <cmath>

namespace awe::nn {

Adam::Adam(const ParameterSet& layout, AdamConfig config)
    : config_(config), m_(layout.zeros_like()), v_(layout.zeros_like()) {
  if (!(config.learning_rate > 0.0)) throw UsageError("learning rate must be > 0");
}

void Adam::step(ParameterSet& params, const ParameterSet& grads, const FrozenSet& frozen) {
  if (!params.same_layout(m_) || !grads.same_layout(m_))
    throw UsageError("Adam: parameter/gradient layout mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (frozen.count(params.name(i))) continue;
    auto& m = m_[i];
    auto& v = v_[i];
    const auto& g = grads[i];
    m = config_.beta1 * m + (1.0 - config_.beta1) * g;
    v = config_.beta2 * v + (1.0 - config_.beta2) * g.cwiseProduct(g);
    params[i].array() -= config_.learning_rate * (m.array() / c1) /
                         ((v.array() / c2).sqrt() + config_.epsilon);
  }
}

}  // namespace awe::nn
