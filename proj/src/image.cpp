#include "volsplat/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "binary_io.hpp"

namespace volsplat {

void DepthMap::validate() const {
  require(values.rows() == valid_mask.rows() && values.cols() == valid_mask.cols(),
          ErrorKind::InvalidInput, "depth values and mask differ in shape");
  for (Index y = 0; y < values.rows(); ++y) {
    for (Index x = 0; x < values.cols(); ++x) {
      if (valid_mask(y, x)) {
        require(std::isfinite(values(y, x)) && values(y, x) > 0, ErrorKind::InvalidInput,
                "valid depth must be finite and positive");
      }
    }
  }
}

void CameraView::validate() const {
  camera.validate();
  require(!image.empty() && image.channels() == 3, ErrorKind::InvalidInput,
          "view image must be a non-empty RGB raster");
  require(image.width == camera.intrinsics.width && image.height == camera.intrinsics.height,
          ErrorKind::InvalidInput, "image size does not match intrinsics");
  if (gt_depth) {
    require(gt_depth->height() == image.height && gt_depth->width() == image.width,
            ErrorKind::InvalidInput, "ground-truth depth size does not match image");
    gt_depth->validate();
  }
}

BilinearTaps upsample_taps(int target, int factor, int source_extent) {
  const double pos = (target - (factor - 1) / 2.0) / factor;
  const double clamped = std::clamp(pos, 0.0, static_cast<double>(source_extent - 1));
  const int lo = static_cast<int>(std::floor(clamped));
  const int hi = std::min(lo + 1, source_extent - 1);
  return {lo, hi, clamped - lo};
}

PixelGrid upsample_bilinear(const PixelGrid& source, int factor_y, int factor_x) {
  require(factor_y >= 1 && factor_x >= 1, ErrorKind::InvalidInput, "upsample factor must be >= 1");
  if (factor_y == 1 && factor_x == 1) return source;
  PixelGrid out(source.height * factor_y, source.width * factor_x, source.channels());
#pragma omp parallel for schedule(static)
  for (int y = 0; y < out.height; ++y) {
    const BilinearTaps ty = upsample_taps(y, factor_y, source.height);
    for (int x = 0; x < out.width; ++x) {
      const BilinearTaps tx = upsample_taps(x, factor_x, source.width);
      out.pixel(y, x) = (1 - ty.w_hi) * ((1 - tx.w_hi) * source.pixel(ty.lo, tx.lo) + tx.w_hi * source.pixel(ty.lo, tx.hi)) +
                        ty.w_hi * ((1 - tx.w_hi) * source.pixel(ty.hi, tx.lo) + tx.w_hi * source.pixel(ty.hi, tx.hi));
    }
  }
  return out;
}

unsigned char quantize_unit(double value) {
  const double c = std::clamp(std::isnan(value) ? 0.0 : value, 0.0, 1.0);
  return static_cast<unsigned char>(std::floor(c * 255.0 + 0.5));
}

std::string encode_ppm(const Image& image) {
  require(image.channels() == 3, ErrorKind::InvalidInput, "PPM needs three channels");
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.reserve(out.size() + static_cast<std::size_t>(image.values.size()));
  for (Index i = 0; i < image.values.rows(); ++i) {
    for (int c = 0; c < 3; ++c) out.push_back(static_cast<char>(quantize_unit(image.values(i, c))));
  }
  return out;
}

void write_ppm(const Image& image, const std::string& path) { io::write_file(path, encode_ppm(image)); }

Image read_ppm(const std::string& path) {
  const std::string data = io::read_file(path);
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < data.size()) {
      if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    std::size_t start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    return data.substr(start, pos - start);
  };
  if (next_token() != "P6") throw Error(ErrorKind::Format, path + ": not a binary PPM");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw Error(ErrorKind::Format, path + ": malformed PPM header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw Error(ErrorKind::Format, path + ": unsupported PPM");
  ++pos;  // single whitespace after maxval
  if (data.size() - pos != static_cast<std::size_t>(w) * h * 3) {
    throw Error(ErrorKind::Format, path + ": PPM payload size mismatch");
  }
  Image image(h, w, 3);
  for (Index i = 0; i < image.values.rows(); ++i) {
    for (int c = 0; c < 3; ++c) {
      image.values(i, c) = static_cast<unsigned char>(data[pos++]) / 255.0;
    }
  }
  return image;
}

void write_depth(const DepthMap& depth, const std::string& path) {
  io::ByteWriter w;
  w.bytes("VSDP");
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(depth.height()));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(depth.width()));
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      w.f32(depth.valid_mask(y, x) ? static_cast<float>(depth.values(y, x)) : 0.0f);
    }
  }
  io::write_file(path, w.buffer());
}

DepthMap read_depth(const std::string& path) {
  const std::string data = io::read_file(path);
  io::ByteReader r(data, path);
  if (r.bytes(4) != "VSDP") throw Error(ErrorKind::Format, path + ": bad depth magic");
  const auto h = r.uint<std::uint32_t>();
  const auto w = r.uint<std::uint32_t>();
  if (r.remaining() != std::size_t(h) * w * 4) throw Error(ErrorKind::Format, path + ": depth size mismatch");
  DepthMap depth(static_cast<int>(h), static_cast<int>(w));
  for (std::uint32_t y = 0; y < h; ++y) {
    for (std::uint32_t x = 0; x < w; ++x) {
      const float v = r.f32();
      depth.values(y, x) = v;
      depth.valid_mask(y, x) = std::isfinite(v) && v > 0.0f;
    }
  }
  return depth;
}

}  // namespace volsplat
