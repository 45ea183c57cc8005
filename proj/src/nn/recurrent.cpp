// src/nn/recurrent.cpp

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

#include "awe/nn/recurrent.hpp"

#include <cmath>

namespace awe::nn {

void fill_uniform(Eigen::MatrixXd& m, double fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(fan_in);
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
}

void add_rnn_parameters(ParameterSet& p, const std::string& prefix, int input_dim,
                        int hidden_dim, int layers) {
  for (int l = 0; l < layers; ++l) {
    const std::string base = prefix + "l" + std::to_string(l);
    p.add(base + ".w_in", hidden_dim, l == 0 ? input_dim : hidden_dim);
    p.add(base + ".w_rec", hidden_dim, hidden_dim);
    p.add(base + ".b", hidden_dim, 1);
  }
}

namespace {

void init_rnn(ParameterSet& p, std::size_t first, int layers, Rng& rng) {
  for (int l = 0; l < layers; ++l) {
    const std::size_t k = first + 3 * static_cast<std::size_t>(l);
    const double fan_in = static_cast<double>(p[k].cols() + p[k + 1].cols());
    fill_uniform(p[k], fan_in, rng);
    fill_uniform(p[k + 1], fan_in, rng);
    fill_uniform(p[k + 2], fan_in, rng);
  }
}

}  // namespace

void rnn_forward(const ParameterSet& p, std::size_t first, int layers,
                 const Eigen::MatrixXd& inputs, RnnTrace& trace) {
  const Eigen::Index steps = inputs.cols();
  trace.hidden.resize(static_cast<std::size_t>(layers));
  for (int l = 0; l < layers; ++l) {
    const std::size_t k = first + 3 * static_cast<std::size_t>(l);
    const Eigen::MatrixXd& w_in = p[k];
    const Eigen::MatrixXd& w_rec = p[k + 1];
    const Eigen::MatrixXd& b = p[k + 2];
    Eigen::MatrixXd& h = trace.hidden[static_cast<std::size_t>(l)];
    h.resize(w_rec.rows(), steps + 1);
    h.col(0).setZero();
    Eigen::MatrixXd pre = w_in * (l == 0 ? inputs : trace.hidden[l - 1].rightCols(steps));
    pre.colwise() += b.col(0);
    for (Eigen::Index t = 0; t < steps; ++t)
      h.col(t + 1) = (pre.col(t) + w_rec * h.col(t)).array().tanh();
  }
}

void rnn_backward(const ParameterSet& p, std::size_t first, int layers,
                  const Eigen::MatrixXd& inputs, const RnnTrace& trace,
                  const Eigen::MatrixXd& dtop, ParameterSet& grad,
                  Eigen::MatrixXd* dinputs) {
  const Eigen::Index steps = inputs.cols();
  Eigen::MatrixXd dh = dtop;
  for (int l = layers - 1; l >= 0; --l) {
    const std::size_t k = first + 3 * static_cast<std::size_t>(l);
    const Eigen::MatrixXd& w_in = p[k];
    const Eigen::MatrixXd& w_rec = p[k + 1];
    const Eigen::MatrixXd& h = trace.hidden[static_cast<std::size_t>(l)];
    Eigen::MatrixXd da(h.rows(), steps);
    for (Eigen::Index t = steps - 1; t >= 0; --t) {
      Eigen::VectorXd g = dh.col(t);
      if (t + 1 < steps) g.noalias() += w_rec.transpose() * da.col(t + 1);
      da.col(t) = g.array() * (1.0 - h.col(t + 1).array().square());
    }
    const auto below = [&]() -> Eigen::MatrixXd {
      return l == 0 ? inputs : Eigen::MatrixXd(trace.hidden[l - 1].rightCols(steps));
    }();
    grad[k].noalias() += da * below.transpose();
    grad[k + 1].noalias() += da * h.leftCols(steps).transpose();
    grad[k + 2] += da.rowwise().sum();
    if (l > 0)
      dh = w_in.transpose() * da;
    else if (dinputs)
      *dinputs = w_in.transpose() * da;
  }
}

// ---------------------------------------------------------------------------

Encoder::Encoder(const RnnDims& dims, std::uint64_t seed) : dims_(dims) {
  if (dims.layers < 1 || dims.hidden_dim < 1 || dims.embedding_dim < 1 || dims.input_dim < 1)
    throw UsageError("encoder dimensions must be >= 1");
  add_rnn_parameters(params_, "enc.", dims.input_dim, dims.hidden_dim, dims.layers);
  params_.add("enc.proj.w", dims.embedding_dim, dims.hidden_dim);
  params_.add("enc.proj.b", dims.embedding_dim, 1);
  Rng rng(seed);
  init_rnn(params_, 0, dims.layers, rng);
  const std::size_t proj = 3 * static_cast<std::size_t>(dims.layers);
  fill_uniform(params_[proj], dims.hidden_dim, rng);
  fill_uniform(params_[proj + 1], dims.hidden_dim, rng);
}

void Encoder::check_input(const FrameMatrix& x) const {
  if (x.cols() != dims_.input_dim)
    throw DataError("encoder expects " + std::to_string(dims_.input_dim) +
                    "-dimensional frames, got " + std::to_string(x.cols()));
  if (x.rows() < 1) throw DataError("cannot encode an empty sequence");
}

Embedding Encoder::encode(const FrameMatrix& x) const {
  RnnTrace trace;
  return forward(x, trace);
}

Embedding Encoder::forward(const FrameMatrix& x, RnnTrace& trace) const {
  check_input(x);
  const Eigen::MatrixXd inputs = x.transpose();
  rnn_forward(params_, 0, dims_.layers, inputs, trace);
  const std::size_t proj = 3 * static_cast<std::size_t>(dims_.layers);
  return params_[proj] * trace.hidden.back().col(inputs.cols()) + params_[proj + 1].col(0);
}

void Encoder::backward(const FrameMatrix& x, const RnnTrace& trace, const Embedding& dz,
                       ParameterSet& grad) const {
  const Eigen::MatrixXd inputs = x.transpose();
  const Eigen::Index steps = inputs.cols();
  const std::size_t proj = 3 * static_cast<std::size_t>(dims_.layers);
  grad[proj].noalias() += dz * trace.hidden.back().col(steps).transpose();
  grad[proj + 1] += dz;
  Eigen::MatrixXd dtop = Eigen::MatrixXd::Zero(dims_.hidden_dim, steps);
  dtop.col(steps - 1) = params_[proj].transpose() * dz;
  rnn_backward(params_, 0, dims_.layers, inputs, trace, dtop, grad, nullptr);
}

std::string Encoder::layer_prefix(int layer) const {
  return "enc.l" + std::to_string(layer);
}

std::vector<std::string> Encoder::layer_tensors(int layer) const {
  if (layer < 0 || layer >= dims_.layers)
    throw UsageError("encoder has no layer " + std::to_string(layer));
  const std::string base = layer_prefix(layer);
  return {base + ".w_in", base + ".w_rec", base + ".b"};
}

std::vector<std::string> Encoder::projection_tensors() const {
  return {"enc.proj.w", "enc.proj.b"};
}

// ---------------------------------------------------------------------------

Decoder::Decoder(const RnnDims& dims, std::uint64_t seed) : dims_(dims) {
  if (dims.layers < 1 || dims.hidden_dim < 1 || dims.embedding_dim < 1 || dims.input_dim < 1)
    throw UsageError("decoder dimensions must be >= 1");
  add_rnn_parameters(params_, "dec.", dims.embedding_dim, dims.hidden_dim, dims.layers);
  params_.add("dec.out.w", dims.input_dim, dims.hidden_dim);
  params_.add("dec.out.b", dims.input_dim, 1);
  Rng rng(seed);
  init_rnn(params_, 0, dims.layers, rng);
  const std::size_t out = 3 * static_cast<std::size_t>(dims.layers);
  fill_uniform(params_[out], dims.hidden_dim, rng);
  fill_uniform(params_[out + 1], dims.hidden_dim, rng);
}

FrameMatrix Decoder::decode(const Embedding& z, int frames) const {
  RnnTrace trace;
  return forward(z, frames, trace);
}

FrameMatrix Decoder::forward(const Embedding& z, int frames, RnnTrace& trace) const {
  if (frames < 1) throw UsageError("decoder output length must be >= 1");
  if (z.size() != dims_.embedding_dim)
    throw DataError("decoder expects a " + std::to_string(dims_.embedding_dim) +
                    "-dimensional embedding, got " + std::to_string(z.size()));
  const Eigen::MatrixXd inputs = z.replicate(1, frames);
  rnn_forward(params_, 0, dims_.layers, inputs, trace);
  const std::size_t out = 3 * static_cast<std::size_t>(dims_.layers);
  Eigen::MatrixXd y = params_[out] * trace.hidden.back().rightCols(frames);
  y.colwise() += params_[out + 1].col(0);
  return y.transpose();
}

Embedding Decoder::backward(const Embedding& z, const RnnTrace& trace, const FrameMatrix& dy,
                            ParameterSet& grad) const {
  const Eigen::Index steps = dy.rows();
  const std::size_t out = 3 * static_cast<std::size_t>(dims_.layers);
  const Eigen::MatrixXd dyt = dy.transpose();
  grad[out].noalias() += dyt * trace.hidden.back().rightCols(steps).transpose();
  grad[out + 1] += dyt.rowwise().sum();
  const Eigen::MatrixXd dtop = params_[out].transpose() * dyt;
  const Eigen::MatrixXd inputs = z.replicate(1, steps);
  Eigen::MatrixXd dinputs;
  rnn_backward(params_, 0, dims_.layers, inputs, trace, dtop, grad, &dinputs);
  return dinputs.rowwise().sum();
}

// ---------------------------------------------------------------------------

ProjectionNet::ProjectionNet(int input_dim, int hidden_dim, int output_dim, std::uint64_t seed)
    : input_dim_(input_dim), hidden_dim_(hidden_dim), output_dim_(output_dim) {
  if (input_dim < 1 || output_dim < 1 || hidden_dim < 0)
    throw UsageError("invalid projection network dimensions");
  Rng rng(seed);
  if (hidden_dim == 0) {
    fill_uniform(params_.add("proj.w", output_dim, input_dim), input_dim, rng);
    fill_uniform(params_.add("proj.b", output_dim, 1), input_dim, rng);
    return;
  }
  fill_uniform(params_.add("proj.w1", hidden_dim, input_dim), input_dim, rng);
  fill_uniform(params_.add("proj.b1", hidden_dim, 1), input_dim, rng);
  fill_uniform(params_.add("proj.w2", output_dim, hidden_dim), hidden_dim, rng);
  fill_uniform(params_.add("proj.b2", output_dim, 1), hidden_dim, rng);
}

ProjectionNet ProjectionNet::identity(int dim) {
  ProjectionNet net(dim, 0, dim, 0);
  net.params_[0].setIdentity();
  net.params_[1].setZero();
  return net;
}

Embedding ProjectionNet::apply(const Embedding& x) const {
  Trace trace;
  return forward(x, trace);
}

Embedding ProjectionNet::forward(const Embedding& x, Trace& trace) const {
  if (x.size() != input_dim_)
    throw DataError("projection expects " + std::to_string(input_dim_) +
                    "-dimensional input, got " + std::to_string(x.size()));
  trace.input = x;
  if (hidden_dim_ == 0) return params_[0] * x + params_[1].col(0);
  trace.pre = params_[0] * x + params_[1].col(0);
  return params_[2] * trace.pre.cwiseMax(0.0) + params_[3].col(0);
}

void ProjectionNet::backward(const Trace& trace, const Embedding& dy, ParameterSet& grad) const {
  if (hidden_dim_ == 0) {
    grad[0].noalias() += dy * trace.input.transpose();
    grad[1] += dy;
    return;
  }
  const Eigen::VectorXd h = trace.pre.cwiseMax(0.0);
  grad[2].noalias() += dy * h.transpose();
  grad[3] += dy;
  const Eigen::VectorXd dpre =
      ((params_[2].transpose() * dy).array() * (trace.pre.array() > 0.0).cast<double>()).matrix();
  grad[0].noalias() += dpre * trace.input.transpose();
  grad[1] += dpre;
}

// ---------------------------------------------------------------------------

std::vector<int> downsample_indices(int frames, int k) {
  if (frames < 1) throw DataError("cannot downsample an empty sequence");
  if (k < 1) throw UsageError("downsample count must be >= 1");
  std::vector<int> idx(static_cast<std::size_t>(k), 0);
  if (k == 1) return idx;
  for (int i = 0; i < k; ++i)
    idx[static_cast<std::size_t>(i)] =
        static_cast<int>(std::lround(static_cast<double>(i) * (frames - 1) / (k - 1)));
  return idx;
}

Embedding embed_downsample(const FrameMatrix& x, int k) {
  const std::vector<int> idx = downsample_indices(static_cast<int>(x.rows()), k);
  const Eigen::Index d = x.cols();
  Embedding z(static_cast<Eigen::Index>(k) * d);
  for (int i = 0; i < k; ++i) z.segment(i * d, d) = x.row(idx[static_cast<std::size_t>(i)]).transpose();
  return z;
}

}  // namespace awe::nn
