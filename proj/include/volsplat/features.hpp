#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "volsplat/image.hpp"

namespace volsplat {

/// Per-view 2D features at 1/scale of the image resolution.
struct FeatureMap {
  PixelGrid grid;
  int scale = 1;

  int height() const { return grid.height; }
  int width() const { return grid.width; }
  int channels() const { return grid.channels(); }
};

struct CostVolume {
  int height = 0;
  int width = 0;
  RowMatrix scores;  // (height*width) x D
  std::vector<double> depth_hypotheses;

  int planes() const { return static_cast<int>(depth_hypotheses.size()); }
};

enum class FeatureKind { GradientDescriptor, RandomProjection, ExternalFile };

const char* to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& name);

struct FeatureExtractorSpec {
  FeatureKind kind = FeatureKind::GradientDescriptor;
  int channels = 32;
  int scale = 1;
  std::uint64_t seed = 0;
  // Rescale every feature vector to norm sqrt(C) so matching scores are in [-1, 1].
  bool normalize = true;
  std::string path;  // external-file only

  void validate() const;
};

/// A camera "pair": intrinsics plus extrinsics of the full-resolution image.
using CameraPair = Camera;

struct WarpResult {
  FeatureMap features;
  MaskArray valid;  // per reference cell; false where the reprojection left the source map
};

FeatureMap extract_features(const CameraView& view, const FeatureExtractorSpec& spec);

/// Samples `source` at the reprojection of every reference cell lying on the
/// fronto-parallel plane z = depth_plane of the reference camera.
WarpResult warp_feature(const FeatureMap& source, const CameraPair& source_camera,
                        const CameraPair& reference_camera, double depth_plane);

struct NeighborView {
  const FeatureMap* features;
  CameraPair camera;
};

CostVolume build_cost_volume(const FeatureMap& reference, std::span<const NeighborView> neighbors,
                             const CameraPair& reference_camera, std::span<const double> hypotheses);

enum class DepthSpacing { Linear, Inverse };

DepthSpacing depth_spacing_from_string(const std::string& name);
const char* to_string(DepthSpacing spacing);

std::vector<double> sample_depth_hypotheses(double near, double far, int count, DepthSpacing spacing);

/// Softargmax over the depth axis of the cost volume.
DepthMap regress_depth(const CostVolume& volume, double temperature);

DepthMap upsample_depth(const DepthMap& depth, int target_height, int target_width);

// External feature file: "VSFM", u32 H, u32 W, u32 C, then H*W*C little-endian f32.
void write_feature_file(const FeatureMap& features, const std::string& path);
FeatureMap read_feature_file(const std::string& path, int scale);

}  // namespace volsplat
