// Copyright 2026 The ADI Intonation Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Checkpoint layout (little-endian):
//   "IADI", version u32, kind u8, n_tensors u32
//   per tensor: name_len u32, name bytes, rank u32, dims u32[rank], f32 data
//   n_stats u32, mean f32[n_stats], std f32[n_stats]
// Architecture hyperparameters travel as tensors named meta.*, the label set
// as one scalar tensor per label, meta.label.<NAME> = class index.

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "adi/features.hpp"
#include "adi/nn/model.hpp"

namespace adi::nn {

struct Classifier {
  Model<float> model;
  std::vector<std::string> labels;  // index = class id
  features::FeatureStats stats;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

struct RawTensor {
  Shape shape;
  std::vector<float> data;
};

inline void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

inline std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  if (!is) throw Error(ErrorCode::kMalformedFile, "truncated checkpoint");
  return v;
}

inline void put_tensor(std::ostream& os, const std::string& name, const Shape& shape, const float* data) {
  put_u32(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u32(os, static_cast<std::uint32_t>(shape.size()));
  for (auto d : shape) put_u32(os, static_cast<std::uint32_t>(d));
  os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(numel(shape) * 4));
}

inline void put_scalar(std::ostream& os, const std::string& name, float v) { put_tensor(os, name, {1}, &v); }

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, Classifier& c) {
  const ModelSpec& s = c.model.spec();
  adi::detail::require(c.labels.size() == s.n_classes, ErrorCode::kInvalidArgument,
                       "label count differs from the model's classes");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot create " + path.string());
  auto params = c.model.named_params();
  auto buffers = c.model.named_buffers();
  const std::size_t n_meta = 7 + c.labels.size();
  out.write("IADI", 4);
  detail::put_u32(out, kCheckpointVersion);
  const auto kind = static_cast<std::uint8_t>(s.kind);
  out.write(reinterpret_cast<const char*>(&kind), 1);
  detail::put_u32(out, static_cast<std::uint32_t>(n_meta + params.size() + buffers.size()));

  std::vector<float> ch(s.conv_channels.begin(), s.conv_channels.end());
  detail::put_tensor(out, "meta.conv_channels", {ch.size()}, ch.data());
  detail::put_scalar(out, "meta.recurrent_hidden", static_cast<float>(s.recurrent_hidden));
  detail::put_scalar(out, "meta.fc_units", static_cast<float>(s.fc_units));
  detail::put_scalar(out, "meta.n_classes", static_cast<float>(s.n_classes));
  detail::put_scalar(out, "meta.dropout_p", static_cast<float>(s.dropout_p));
  detail::put_scalar(out, "meta.n_mels", static_cast<float>(s.n_mels));
  detail::put_scalar(out, "meta.frames", static_cast<float>(s.frames));
  for (std::size_t i = 0; i < c.labels.size(); ++i) {
    detail::put_scalar(out, "meta.label." + c.labels[i], static_cast<float>(i));
  }
  for (auto& [name, p] : params) detail::put_tensor(out, name, p->value.shape, p->value.ptr());
  for (auto& [name, p] : buffers) detail::put_tensor(out, name, p->value.shape, p->value.ptr());

  detail::put_u32(out, static_cast<std::uint32_t>(c.stats.mean.size()));
  out.write(reinterpret_cast<const char*>(c.stats.mean.data()), static_cast<std::streamsize>(c.stats.mean.size() * 4));
  out.write(reinterpret_cast<const char*>(c.stats.stddev.data()),
            static_cast<std::streamsize>(c.stats.stddev.size() * 4));
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

inline Classifier load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "IADI", 4) != 0) {
    throw Error(ErrorCode::kMalformedFile, path.string() + ": not a model checkpoint");
  }
  const auto version = detail::get_u32(in);
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kUnsupportedFormat, path.string() + ": checkpoint version " + std::to_string(version));
  }
  std::uint8_t kind = 0;
  in.read(reinterpret_cast<char*>(&kind), 1);
  adi::detail::require(static_cast<bool>(in) && kind <= 1, ErrorCode::kMalformedFile, "bad model kind byte");
  const auto n = detail::get_u32(in);
  std::map<std::string, detail::RawTensor> tensors;
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto len = detail::get_u32(in);
    adi::detail::require(len < 4096, ErrorCode::kMalformedFile, "implausible tensor name length");
    std::string name(len, '\0');
    in.read(name.data(), len);
    detail::RawTensor t;
    const auto rank = detail::get_u32(in);
    adi::detail::require(rank <= 8, ErrorCode::kMalformedFile, "implausible tensor rank");
    for (std::uint32_t r = 0; r < rank; ++r) t.shape.push_back(detail::get_u32(in));
    t.data.resize(numel(t.shape));
    in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * 4));
    if (!in) throw Error(ErrorCode::kMalformedFile, path.string() + ": truncated tensor " + name);
    tensors[name] = std::move(t);
  }
  auto scalar = [&](const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end() || it->second.data.size() != 1) {
      throw Error(ErrorCode::kMalformedFile, path.string() + ": missing " + name);
    }
    return static_cast<double>(it->second.data[0]);
  };

  ModelSpec spec;
  spec.kind = static_cast<ModelKind>(kind);
  spec.conv_channels.clear();
  auto ch = tensors.find("meta.conv_channels");
  if (ch == tensors.end()) throw Error(ErrorCode::kMalformedFile, path.string() + ": missing meta.conv_channels");
  for (float v : ch->second.data) spec.conv_channels.push_back(static_cast<std::size_t>(v));
  spec.recurrent_hidden = static_cast<std::size_t>(scalar("meta.recurrent_hidden"));
  spec.fc_units = static_cast<std::size_t>(scalar("meta.fc_units"));
  spec.n_classes = static_cast<std::size_t>(scalar("meta.n_classes"));
  spec.dropout_p = static_cast<float>(scalar("meta.dropout_p"));
  spec.n_mels = static_cast<std::size_t>(scalar("meta.n_mels"));
  spec.frames = static_cast<std::size_t>(scalar("meta.frames"));

  std::vector<std::string> labels(spec.n_classes);
  const std::string label_prefix = "meta.label.";
  for (const auto& [name, t] : tensors) {
    if (name.rfind(label_prefix, 0) != 0) continue;
    const auto idx = static_cast<std::size_t>(t.data.at(0));
    adi::detail::require(idx < labels.size() && labels[idx].empty(), ErrorCode::kMalformedFile,
                         "inconsistent label table");
    labels[idx] = name.substr(label_prefix.size());
  }
  for (const auto& l : labels) adi::detail::require(!l.empty(), ErrorCode::kMalformedFile, "label table has gaps");

  Classifier c{build_model<float>(spec), std::move(labels), {}};
  auto assign = [&](const std::vector<std::pair<std::string, Param<float>*>>& ps) {
    for (auto& [name, p] : ps) {
      auto it = tensors.find(name);
      if (it == tensors.end()) throw Error(ErrorCode::kMalformedFile, path.string() + ": missing tensor " + name);
      if (it->second.shape != p->value.shape) {
        throw Error(ErrorCode::kShapeMismatch, name + ": stored " + shape_str(it->second.shape) + ", model " +
                                                   shape_str(p->value.shape));
      }
      p->value.data.assign(it->second.data.begin(), it->second.data.end());
    }
  };
  assign(c.model.named_params());
  assign(c.model.named_buffers());

  const auto n_stats = detail::get_u32(in);
  adi::detail::require(n_stats <= 1u << 16, ErrorCode::kMalformedFile, "implausible statistics length");
  c.stats.mean.resize(n_stats);
  c.stats.stddev.resize(n_stats);
  in.read(reinterpret_cast<char*>(c.stats.mean.data()), static_cast<std::streamsize>(n_stats * 4));
  in.read(reinterpret_cast<char*>(c.stats.stddev.data()), static_cast<std::streamsize>(n_stats * 4));
  if (!in) throw Error(ErrorCode::kMalformedFile, path.string() + ": truncated statistics");
  return c;
}

}  // namespace adi::nn
