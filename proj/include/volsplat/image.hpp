#pragma once

#include <optional>
#include <string>

#include "volsplat/common.hpp"
#include "volsplat/geometry.hpp"

namespace volsplat {

/// H x W grid of C-vectors stored as an (H*W) x C row-major table.
struct PixelGrid {
  int height = 0;
  int width = 0;
  RowMatrix values;

  PixelGrid() = default;
  PixelGrid(int h, int w, int channels) : height(h), width(w), values(RowMatrix::Zero(Index(h) * w, channels)) {}

  int channels() const { return static_cast<int>(values.cols()); }
  Index index(int y, int x) const { return Index(y) * width + x; }
  bool empty() const { return height == 0 || width == 0; }

  auto pixel(int y, int x) { return values.row(index(y, x)); }
  auto pixel(int y, int x) const { return values.row(index(y, x)); }
  double& at(int y, int x, int c) { return values(index(y, x), c); }
  double at(int y, int x, int c) const { return values(index(y, x), c); }
};

/// RGB image with values in [0, 1].
using Image = PixelGrid;

using DepthArray = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MaskArray = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DepthMap {
  DepthArray values;
  MaskArray valid_mask;

  DepthMap() = default;
  DepthMap(int h, int w) : values(DepthArray::Zero(h, w)), valid_mask(MaskArray::Constant(h, w, false)) {}

  int height() const { return static_cast<int>(values.rows()); }
  int width() const { return static_cast<int>(values.cols()); }

  static DepthMap constant(int h, int w, double depth) {
    DepthMap d(h, w);
    d.values.setConstant(depth);
    d.valid_mask.setConstant(true);
    return d;
  }

  void validate() const;
};

struct CameraView {
  Image image;
  Camera camera;
  std::optional<DepthMap> gt_depth;

  void validate() const;
};

/// Two-tap bilinear stencil along one axis: source samples `lo` and `hi`
/// with weights (1 - w_hi) and w_hi.
struct BilinearTaps {
  int lo;
  int hi;
  double w_hi;
};

/// Stencil for target index `target` when upsampling an axis of
/// `source_extent` samples by `factor`.
BilinearTaps upsample_taps(int target, int factor, int source_extent);

/// Bilinear upsampling by an integer factor per axis under the pixel-center
/// convention: target pixel X samples source coordinate (X - (f-1)/2) / f,
/// clamped to the source extent.
PixelGrid upsample_bilinear(const PixelGrid& source, int factor_y, int factor_x);

// PPM (P6, maxval 255). Values are clamped to [0, 1] and quantized with
// round-half-up: byte = floor(255 * x + 0.5).
std::string encode_ppm(const Image& image);
void write_ppm(const Image& image, const std::string& path);
Image read_ppm(const std::string& path);
unsigned char quantize_unit(double value);

// Depth file: "VSDP", u32 H, u32 W, then H*W little-endian f32 (0 marks invalid).
void write_depth(const DepthMap& depth, const std::string& path);
DepthMap read_depth(const std::string& path);

}  // namespace volsplat
