#include "volsplat/weights.hpp"

#include <zlib.h>

#include <functional>
#include <numeric>

#include "binary_io.hpp"

namespace volsplat {

std::size_t NamedTensor::element_count() const {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

void WeightBlob::add(std::string name, std::vector<std::uint32_t> dims, std::vector<float> data) {
  NamedTensor t{std::move(name), std::move(dims), std::move(data)};
  require(t.element_count() == t.data.size(), ErrorKind::WeightLoad, "tensor '" + t.name + "' data/shape mismatch");
  require(find(t.name) == nullptr, ErrorKind::WeightLoad, "duplicate tensor '" + t.name + "'");
  tensors.push_back(std::move(t));
}

const NamedTensor* WeightBlob::find(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const NamedTensor& WeightBlob::expect(std::string_view name, const std::vector<std::uint32_t>& dims) const {
  const NamedTensor* t = find(name);
  if (t == nullptr) throw Error(ErrorKind::WeightLoad, "missing tensor '" + std::string(name) + "'");
  if (t->dims != dims) {
    std::string want, got;
    for (auto d : dims) want += std::to_string(d) + " ";
    for (auto d : t->dims) got += std::to_string(d) + " ";
    throw Error(ErrorKind::WeightLoad,
                "tensor '" + std::string(name) + "' has shape [ " + got + "], expected [ " + want + "]");
  }
  return *t;
}

std::uint32_t crc32(std::string_view bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

std::uint32_t WeightBlob::checksum() const {
  const std::string bytes = encode_weights(*this);
  io::ByteReader r(std::string_view(bytes).substr(bytes.size() - 4), "checksum");
  return r.uint<std::uint32_t>();
}

std::string encode_weights(const WeightBlob& blob) {
  io::ByteWriter w;
  w.bytes("VSWT");
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(blob.tensors.size()));
  for (const auto& t : blob.tensors) {
    require(t.name.size() <= 0xFFFF, ErrorKind::WeightLoad, "tensor name too long");
    require(t.dims.size() <= 0xFF, ErrorKind::WeightLoad, "tensor rank too large");
    w.uint<std::uint16_t>(static_cast<std::uint16_t>(t.name.size()));
    w.bytes(t.name);
    w.uint<std::uint8_t>(static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) w.uint<std::uint32_t>(d);
    for (float v : t.data) w.f32(v);
  }
  const std::uint32_t crc = crc32(w.buffer());
  w.uint<std::uint32_t>(crc);
  return w.take();
}

WeightBlob decode_weights(std::string_view bytes) {
  if (bytes.size() < 12) throw Error(ErrorKind::WeightLoad, "weight blob too short");
  io::ByteReader trailer(bytes.substr(bytes.size() - 4), "weights");
  const std::uint32_t stored = trailer.uint<std::uint32_t>();
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  if (crc32(body) != stored) throw Error(ErrorKind::WeightLoad, "weight blob checksum mismatch");

  WeightBlob blob;
  try {
    io::ByteReader r(body, "weights");
    if (r.bytes(4) != "VSWT") throw Error(ErrorKind::WeightLoad, "bad weight magic");
    const auto count = r.uint<std::uint32_t>();
    for (std::uint32_t n = 0; n < count; ++n) {
      const auto name_len = r.uint<std::uint16_t>();
      std::string name(r.bytes(name_len));
      const auto rank = r.uint<std::uint8_t>();
      std::vector<std::uint32_t> dims(rank);
      for (auto& d : dims) d = r.uint<std::uint32_t>();
      const std::size_t elements = std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
      if (r.remaining() < elements * 4) throw Error(ErrorKind::WeightLoad, "tensor '" + name + "' truncated");
      std::vector<float> data(elements);
      for (auto& v : data) v = r.f32();
      blob.add(std::move(name), std::move(dims), std::move(data));
    }
    r.expect_end();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::WeightLoad) throw;
    throw Error(ErrorKind::WeightLoad, e.what());
  }
  return blob;
}

void save_weights(const WeightBlob& blob, const std::string& path) { io::write_file(path, encode_weights(blob)); }

WeightBlob load_weights(const std::string& path) { return decode_weights(io::read_file(path)); }

}  // namespace volsplat
