// Copyright 2026 The FAIR-Pruner Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// FPD1: one binary file per (layer, kind) carrying unit outputs, summed loss
// gradients or parameters for one prunable layer.
//
//   offset  size  field
//   0       4     magic "FPD1"
//   4       4     version (u32) = 1
//   8       1     kind (u8): 0 activations, 1 weight-grad, 2 bias-grad,
//                 3 weights, 4 biases
//   9       4     layer_id (u32)
//   13      4     unit_count J (u32)
//   17      4     sample_count n (u32), 0 for parameter kinds
//   21      4     unit_dim d (u32)
//   25      1     labels_present (u8), set iff kind == 0
//   26      ...   payload: float32 values
//                   kind 0: [n, J, d] sample-major
//                   kind 1, 3: [J, d]
//                   kind 2, 4: [J] (d must be 1)
//   ...           labels: n u32 class indices (kind 0 only)
//
// Every multi-byte field is little-endian regardless of host byte order.

#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "fair/common.hpp"

namespace fair::dumpio {

enum class DumpKind : std::uint8_t {
  activations = 0,
  weight_grad = 1,
  bias_grad = 2,
  weights = 3,
  biases = 4,
};

inline constexpr std::array<char, 4> kMagic = {'F', 'P', 'D', '1'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 26;

inline const char* kind_name(DumpKind k) {
  switch (k) {
    case DumpKind::activations: return "act";
    case DumpKind::weight_grad: return "wgrad";
    case DumpKind::bias_grad: return "bgrad";
    case DumpKind::weights: return "weight";
    case DumpKind::biases: return "bias";
  }
  return "unknown";
}

enum class DumpErrc {
  io,
  bad_magic,
  unsupported_version,
  bad_kind,
  truncated,
  trailing_data,
  shape,
  labels,
  non_finite,
};

class DumpError : public Error {
 public:
  DumpError(DumpErrc code, const std::string& what)
      : Error(ErrorKind::invalid_input, what), code_(code) {}
  DumpErrc code() const noexcept { return code_; }

 private:
  DumpErrc code_;
};

struct FpdHeader {
  std::array<char, 4> magic = kMagic;
  std::uint32_t version = kVersion;
  DumpKind kind = DumpKind::activations;
  std::uint32_t layer_id = 0;
  std::uint32_t unit_count = 0;
  std::uint32_t sample_count = 0;
  std::uint32_t unit_dim = 1;
  bool labels_present = false;

  bool operator==(const FpdHeader&) const = default;
};

/// A parsed dump of any kind. `labels` is empty unless kind == activations.
struct Dump {
  FpdHeader header;
  std::vector<float> data;
  std::vector<std::uint32_t> labels;

  std::size_t units() const { return header.unit_count; }
  std::size_t samples() const { return header.sample_count; }
  std::size_t dim() const { return header.unit_dim; }

  // Activation access: sample i, unit j, component c.
  float at(std::size_t i, std::size_t j, std::size_t c = 0) const {
    return data[(i * units() + j) * dim() + c];
  }
  // Row of a [J, d] parameter or gradient dump.
  std::span<const float> row(std::size_t j) const {
    return std::span<const float>(data).subspan(j * dim(), dim());
  }

  bool operator==(const Dump&) const = default;
};

using ActivationDump = Dump;
using GradientDump = Dump;
using ParamDump = Dump;

inline std::size_t expected_values(const FpdHeader& h) {
  const std::size_t J = h.unit_count, d = h.unit_dim;
  switch (h.kind) {
    case DumpKind::activations: return std::size_t{h.sample_count} * J * d;
    case DumpKind::weight_grad:
    case DumpKind::weights: return J * d;
    case DumpKind::bias_grad:
    case DumpKind::biases: return J;
  }
  return 0;
}

inline std::size_t payload_bytes(const FpdHeader& h) {
  std::size_t bytes = expected_values(h) * sizeof(float);
  if (h.labels_present) bytes += std::size_t{h.sample_count} * 4;
  return bytes;
}

namespace detail {

inline bool kind_valid(std::uint8_t k) { return k <= 4; }

inline void check_header(const FpdHeader& h) {
  if (h.magic != kMagic)
    throw DumpError(DumpErrc::bad_magic,
                    "bad magic '" + std::string(h.magic.data(), 4) + "'");
  if (h.version != kVersion)
    throw DumpError(DumpErrc::unsupported_version,
                    "unsupported FPD version " + std::to_string(h.version));
  if (!kind_valid(static_cast<std::uint8_t>(h.kind)))
    throw DumpError(DumpErrc::bad_kind, "unknown dump kind " +
                    std::to_string(static_cast<int>(h.kind)));
  const bool is_act = h.kind == DumpKind::activations;
  if (h.labels_present != is_act)
    throw DumpError(DumpErrc::labels,
                    is_act ? "activation dump without labels"
                           : "labels present on a non-activation dump");
  if (h.unit_count == 0 || h.unit_dim == 0)
    throw DumpError(DumpErrc::shape, "unit_count and unit_dim must be positive");
  if ((h.kind == DumpKind::bias_grad || h.kind == DumpKind::biases) &&
      h.unit_dim != 1)
    throw DumpError(DumpErrc::shape, "bias dumps require unit_dim == 1");
  if ((h.kind == DumpKind::weights || h.kind == DumpKind::biases) &&
      h.sample_count != 0)
    throw DumpError(DumpErrc::shape, "parameter dumps require sample_count == 0");
  if (is_act && h.sample_count == 0)
    throw DumpError(DumpErrc::shape, "activation dump with zero samples");
}

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<unsigned char>(v >> s));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) |
         (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
}

}  // namespace detail

/// Full validation of a dump: header invariants, payload shape, finiteness
/// and label count. Per-class sample minimums are checked at scoring time.
/// Throws DumpError.
inline void validate(const Dump& dump) {
  const auto& h = dump.header;
  detail::check_header(h);
  if (dump.data.size() != expected_values(h))
    throw DumpError(DumpErrc::shape, "payload holds " +
                    std::to_string(dump.data.size()) + " values, header implies " +
                    std::to_string(expected_values(h)));
  if (!all_finite(dump.data))
    throw DumpError(DumpErrc::non_finite,
                    std::string("non-finite value in ") + kind_name(h.kind) +
                    " dump of layer " + std::to_string(h.layer_id));
  if (h.kind != DumpKind::activations) {
    if (!dump.labels.empty())
      throw DumpError(DumpErrc::labels, "labels on a non-activation dump");
    return;
  }
  if (dump.labels.size() != h.sample_count)
    throw DumpError(DumpErrc::labels, "label count does not match sample_count");
}

inline std::vector<unsigned char> encode(const Dump& dump) {
  validate(dump);
  const auto& h = dump.header;
  std::vector<unsigned char> out;
  out.reserve(kHeaderSize + payload_bytes(h));
  out.insert(out.end(), h.magic.begin(), h.magic.end());
  detail::put_u32(out, h.version);
  out.push_back(static_cast<unsigned char>(h.kind));
  detail::put_u32(out, h.layer_id);
  detail::put_u32(out, h.unit_count);
  detail::put_u32(out, h.sample_count);
  detail::put_u32(out, h.unit_dim);
  out.push_back(h.labels_present ? 1 : 0);
  for (float v : dump.data) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  for (auto y : dump.labels) detail::put_u32(out, y);
  return out;
}

inline Dump decode(std::span<const unsigned char> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic.data(), 4) != 0) {
    std::string got(reinterpret_cast<const char*>(bytes.data()),
                    std::min<std::size_t>(bytes.size(), 4));
    throw DumpError(DumpErrc::bad_magic, "bad magic '" + got + "'");
  }
  if (bytes.size() < kHeaderSize)
    throw DumpError(DumpErrc::truncated, "truncated header (" +
                    std::to_string(bytes.size()) + " bytes)");
  const unsigned char* p = bytes.data();
  Dump dump;
  auto& h = dump.header;
  std::memcpy(h.magic.data(), p, 4);
  h.version = detail::get_u32(p + 4);
  if (h.version != kVersion)
    throw DumpError(DumpErrc::unsupported_version,
                    "unsupported FPD version " + std::to_string(h.version));
  if (!detail::kind_valid(p[8]))
    throw DumpError(DumpErrc::bad_kind, "unknown dump kind " + std::to_string(p[8]));
  h.kind = static_cast<DumpKind>(p[8]);
  h.layer_id = detail::get_u32(p + 9);
  h.unit_count = detail::get_u32(p + 13);
  h.sample_count = detail::get_u32(p + 17);
  h.unit_dim = detail::get_u32(p + 21);
  if (p[25] > 1)
    throw DumpError(DumpErrc::labels, "labels_present flag must be 0 or 1");
  h.labels_present = p[25] == 1;
  detail::check_header(h);

  const std::size_t need = payload_bytes(h);
  const std::size_t have = bytes.size() - kHeaderSize;
  if (have < need)
    throw DumpError(DumpErrc::truncated, "truncated payload: " +
                    std::to_string(have) + " of " + std::to_string(need) + " bytes");
  if (have > need)
    throw DumpError(DumpErrc::trailing_data, std::to_string(have - need) +
                    " trailing bytes after payload");

  const unsigned char* q = p + kHeaderSize;
  dump.data.resize(expected_values(h));
  for (auto& v : dump.data) {
    v = std::bit_cast<float>(detail::get_u32(q));
    q += 4;
  }
  if (h.labels_present) {
    dump.labels.resize(h.sample_count);
    for (auto& y : dump.labels) {
      y = detail::get_u32(q);
      q += 4;
    }
  }
  validate(dump);
  return dump;
}

/// Number of read_dump calls made by this process.
inline std::atomic<std::uint64_t>& read_counter() {
  static std::atomic<std::uint64_t> count{0};
  return count;
}

inline void write_dump(const std::filesystem::path& path, const Dump& dump) {
  const auto bytes = encode(dump);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DumpError(DumpErrc::io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DumpError(DumpErrc::io, "write failed: " + path.string());
}

inline Dump read_dump(const std::filesystem::path& path) {
  read_counter().fetch_add(1, std::memory_order_relaxed);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DumpError(DumpErrc::io, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  try {
    return decode(bytes);
  } catch (const DumpError& e) {
    throw DumpError(e.code(), path.string() + ": " + e.what());
  }
}

// Construction helpers. Values are downcast to float32 here.

template <typename T>
Dump make_activation_dump(std::uint32_t layer, std::uint32_t n, std::uint32_t J,
                          std::uint32_t d, std::span<const T> values,
                          std::span<const std::uint32_t> labels) {
  Dump dump;
  dump.header.kind = DumpKind::activations;
  dump.header.layer_id = layer;
  dump.header.unit_count = J;
  dump.header.sample_count = n;
  dump.header.unit_dim = d;
  dump.header.labels_present = true;
  dump.data.assign(values.begin(), values.end());
  dump.labels.assign(labels.begin(), labels.end());
  return dump;
}

template <typename T>
Dump make_matrix_dump(DumpKind kind, std::uint32_t layer, std::uint32_t J,
                      std::uint32_t d, std::uint32_t n, std::span<const T> values) {
  Dump dump;
  dump.header.kind = kind;
  dump.header.layer_id = layer;
  dump.header.unit_count = J;
  dump.header.unit_dim = d;
  dump.header.sample_count = n;
  dump.header.labels_present = false;
  dump.data.assign(values.begin(), values.end());
  return dump;
}

}  // namespace fair::dumpio
