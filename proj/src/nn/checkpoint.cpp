// src/nn/checkpoint.cpp

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

#include "awe/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

namespace awe::nn {

namespace {

void put_le(std::string& buf, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const std::string& buf, std::string path) : buf_(buf), path_(std::move(path)) {}

  std::uint64_t le(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i)
      v |= std::uint64_t(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) throw DataError("truncated checkpoint '" + path_ + "'");
  }
  const std::string& buf_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

const CheckpointBlock* Checkpoint::find(const std::string& name) const {
  for (const auto& b : blocks)
    if (b.name == name) return &b;
  return nullptr;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::string buf(ckpt.magic.data(), 4);
  put_le(buf, ckpt.version, 4);
  for (std::uint32_t d : ckpt.dims) put_le(buf, d, 4);
  for (const auto& b : ckpt.blocks) {
    put_le(buf, b.name.size(), 4);
    buf += b.name;
    put_le(buf, b.values.size(), 8);
    for (double v : b.values) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      put_le(buf, bits, 8);
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("write failed for checkpoint '" + path.string() + "'");
}

Checkpoint read_checkpoint(const std::filesystem::path& path,
                           const std::array<char, 4>& expected_magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(buf, path.string());
  Checkpoint ckpt;
  const std::string magic = r.bytes(4);
  if (std::memcmp(magic.data(), expected_magic.data(), 4) != 0)
    throw DataError("checkpoint '" + path.string() + "' has magic '" + magic + "', expected '" +
                    std::string(expected_magic.data(), 4) + "'");
  std::memcpy(ckpt.magic.data(), magic.data(), 4);
  ckpt.version = static_cast<std::uint32_t>(r.le(4));
  if (ckpt.version != kCheckpointVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(ckpt.version));
  for (auto& d : ckpt.dims) d = static_cast<std::uint32_t>(r.le(4));
  while (!r.done()) {
    CheckpointBlock b;
    b.name = r.bytes(static_cast<std::size_t>(r.le(4)));
    const std::uint64_t count = r.le(8);
    if (count > (buf.size() / 8)) throw DataError("truncated checkpoint '" + path.string() + "'");
    b.values.resize(static_cast<std::size_t>(count));
    for (double& v : b.values) {
      const std::uint64_t bits = r.le(8);
      std::memcpy(&v, &bits, 8);
    }
    ckpt.blocks.push_back(std::move(b));
  }
  return ckpt;
}

void append_blocks(Checkpoint& ckpt, const ParameterSet& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& m = params[i];
    ckpt.blocks.push_back({params.name(i), std::vector<double>(m.data(), m.data() + m.size())});
  }
}

void load_blocks(const Checkpoint& ckpt, ParameterSet& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const CheckpointBlock* b = ckpt.find(params.name(i));
    if (!b) throw DataError("checkpoint lacks tensor '" + params.name(i) + "'");
    if (static_cast<Eigen::Index>(b->values.size()) != params[i].size())
      throw DataError("checkpoint tensor '" + params.name(i) + "' has " +
                      std::to_string(b->values.size()) + " values, model expects " +
                      std::to_string(params[i].size()));
    std::copy(b->values.begin(), b->values.end(), params[i].data());
  }
}

}  // namespace awe::nn
