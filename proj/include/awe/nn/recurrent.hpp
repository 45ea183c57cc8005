// awe/nn/recurrent.hpp

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

#include <vector>

namespace awe::nn {

struct RnnDims {
  int input_dim = 13;
  int hidden_dim = 400;
  int embedding_dim = 130;
  int layers = 3;

  bool operator==(const RnnDims&) const = default;
};

/// Hidden states of every layer for one sequence; column 0 is the zero
/// initial state, column t the state after frame t.
struct RnnTrace {
  std::vector<Eigen::MatrixXd> hidden;
};

// Stacked tanh recurrence  h_t = tanh(W_in x_t + W_rec h_{t-1} + b)  over the
// tensors "<prefix>l<k>.w_in", ".w_rec", ".b" of a ParameterSet. Inputs are one
// column per step.
void add_rnn_parameters(ParameterSet& p, const std::string& prefix, int input_dim,
                        int hidden_dim, int layers);
void rnn_forward(const ParameterSet& p, std::size_t first, int layers,
                 const Eigen::MatrixXd& inputs, RnnTrace& trace);
/// `dtop` holds dLoss/dh_t of the top layer (hidden x T). Accumulates parameter
/// gradients into `grad`; returns dLoss/dinputs when `dinputs` is non-null.
void rnn_backward(const ParameterSet& p, std::size_t first, int layers,
                  const Eigen::MatrixXd& inputs, const RnnTrace& trace,
                  const Eigen::MatrixXd& dtop, ParameterSet& grad,
                  Eigen::MatrixXd* dinputs);

/// Fills `m` uniformly in +-1/sqrt(fan_in).
void fill_uniform(Eigen::MatrixXd& m, double fan_in, Rng& rng);

/// Recurrent encoder: z = W_proj h_T + b_proj of the last layer.
class Encoder {
 public:
  Encoder() = default;
  Encoder(const RnnDims& dims, std::uint64_t seed);

  const RnnDims& dims() const { return dims_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  Embedding encode(const FrameMatrix& x) const;
  Embedding forward(const FrameMatrix& x, RnnTrace& trace) const;
  void backward(const FrameMatrix& x, const RnnTrace& trace, const Embedding& dz,
                ParameterSet& grad) const;

  std::string layer_prefix(int layer) const;
  /// Names of the recurrent tensors of one layer.
  std::vector<std::string> layer_tensors(int layer) const;
  std::vector<std::string> projection_tensors() const;

 private:
  void check_input(const FrameMatrix& x) const;

  RnnDims dims_;
  ParameterSet params_;
};

/// Recurrent decoder fed z at every step; y_t = W_out h_t + b_out.
class Decoder {
 public:
  Decoder() = default;
  /// dims.input_dim is the output frame dimension D.
  Decoder(const RnnDims& dims, std::uint64_t seed);

  const RnnDims& dims() const { return dims_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  FrameMatrix decode(const Embedding& z, int frames) const;
  FrameMatrix forward(const Embedding& z, int frames, RnnTrace& trace) const;
  /// dy is T x D; returns dLoss/dz.
  Embedding backward(const Embedding& z, const RnnTrace& trace, const FrameMatrix& dy,
                     ParameterSet& grad) const;

 private:
  RnnDims dims_;
  ParameterSet params_;
};

/// Two affine layers with a ReLU between (hidden_dim = 0: one affine layer).
class ProjectionNet {
 public:
  ProjectionNet() = default;
  ProjectionNet(int input_dim, int hidden_dim, int output_dim, std::uint64_t seed);
  /// Single affine layer initialised to the identity.
  static ProjectionNet identity(int dim);

  int input_dim() const { return input_dim_; }
  int hidden_dim() const { return hidden_dim_; }
  int output_dim() const { return output_dim_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  struct Trace {
    Eigen::VectorXd input, pre;
  };
  Embedding apply(const Embedding& x) const;
  Embedding forward(const Embedding& x, Trace& trace) const;
  void backward(const Trace& trace, const Embedding& dy, ParameterSet& grad) const;

 private:
  int input_dim_ = 0, hidden_dim_ = 0, output_dim_ = 0;
  ParameterSet params_;
};

/// k frames at indices round(i (T-1) / (k-1)), concatenated (k * D values).
Embedding embed_downsample(const FrameMatrix& x, int k = 10);
std::vector<int> downsample_indices(int frames, int k);

}  // namespace awe::nn
