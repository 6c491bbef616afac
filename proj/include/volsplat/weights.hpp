#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "volsplat/common.hpp"

namespace volsplat {

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t element_count() const;
};

/// Ordered collection of named f32 tensors.
///
/// File layout (little-endian): "VSWT", u32 tensor count, then per tensor
/// {u16 name length, name bytes, u8 rank, rank x u32 dims, f32 data}, then a
/// trailing CRC32 (zlib polynomial) of every preceding byte.
struct WeightBlob {
  std::vector<NamedTensor> tensors;

  void add(std::string name, std::vector<std::uint32_t> dims, std::vector<float> data);
  const NamedTensor* find(std::string_view name) const;
  /// Throws a weight-load error when the tensor is missing or its shape differs.
  const NamedTensor& expect(std::string_view name, const std::vector<std::uint32_t>& dims) const;
  std::uint32_t checksum() const;
};

std::string encode_weights(const WeightBlob& blob);
WeightBlob decode_weights(std::string_view bytes);
void save_weights(const WeightBlob& blob, const std::string& path);
WeightBlob load_weights(const std::string& path);

std::uint32_t crc32(std::string_view bytes);

}  // namespace volsplat
